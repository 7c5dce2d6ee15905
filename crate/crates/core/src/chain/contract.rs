//! Registered-function contract machine over word-addressed storage.
//!
//! Contracts are not bytecode. Each selector dispatches to one of a small
//! set of function shapes, enough to express getter/setter contracts and
//! contracts that call out through the router.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_words, encode_bool, encode_words};
use crate::message::{Callback, ExternalContract, OutboundCall};
use crate::primitives::{Address, ChainId, Fee, Selector, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CallError {
    #[error("no contract at address")]
    UnknownAddress,
    #[error("selector not registered on contract")]
    UnknownSelector,
    #[error("malformed parameters")]
    BadParams,
    #[error("storage key {0} not accessible")]
    UnauthorizedKey(Word),
    #[error("function cannot run inside a cross-chain execution")]
    NotCrossChainCallable,
    #[error("cost {cost} exceeds gas limit {limit}")]
    OutOfGas { cost: Fee, limit: Fee },
}

/// Per-call pricing: a flat charge per invocation plus a charge per
/// storage write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub per_call: Fee,
    pub per_write: Fee,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            per_call: 5,
            per_write: 3,
        }
    }
}

impl GasSchedule {
    pub fn cost(&self, writes: usize) -> Fee {
        self.per_call + self.per_write * writes as Fee
    }
}

/// Word-addressed storage a function executes against.
pub trait Storage {
    fn load(&mut self, key: &Word) -> Result<Word, CallError>;
    fn store(&mut self, key: Word, value: Word) -> Result<(), CallError>;
}

impl Storage for BTreeMap<Word, Word> {
    fn load(&mut self, key: &Word) -> Result<Word, CallError> {
        Ok(self.get(key).copied().unwrap_or(Word::ZERO))
    }

    fn store(&mut self, key: Word, value: Word) -> Result<(), CallError> {
        if value.is_zero() {
            self.remove(&key);
        } else {
            self.insert(key, value);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Function {
    /// Returns the word at `slot`.
    Getter { slot: u64 },
    /// Stores the first parameter word at `slot` and returns `true`.
    Setter { slot: u64 },
    /// Stores the first parameter word at `slot`, returns nothing.
    Sink { slot: u64 },
    /// Asks the router to call `target` on a remote contract and route the
    /// result to `callback` on this contract. Parameters are
    /// `[target_chain, target_address]` plus one forwarded value word when
    /// `forward_value` is set.
    Initiate {
        target: Selector,
        callback: Selector,
        forward_value: bool,
    },
}

impl Function {
    /// Number of storage writes the function performs when it succeeds.
    pub fn declared_writes(&self) -> usize {
        match self {
            Function::Getter { .. } | Function::Initiate { .. } => 0,
            Function::Setter { .. } | Function::Sink { .. } => 1,
        }
    }

    pub fn slots(&self) -> Vec<Word> {
        match self {
            Function::Getter { slot } | Function::Setter { slot } | Function::Sink { slot } => {
                vec![Word::from_u64(*slot)]
            }
            Function::Initiate { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub signature: String,
    #[serde(flatten)]
    pub body: Function,
}

impl FunctionDef {
    pub fn new(signature: &str, body: Function) -> Self {
        FunctionDef {
            signature: signature.to_string(),
            body,
        }
    }

    pub fn selector(&self) -> Selector {
        Selector::from_signature(&self.signature)
    }
}

/// One storage write, with the value it replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageWrite {
    pub key: Word,
    pub old: Word,
    pub new: Word,
}

/// Identity of the running call.
#[derive(Debug, Clone, Copy)]
pub struct CallContext {
    pub chain: ChainId,
    pub this: Address,
    /// Cross-chain executions may not originate router calls.
    pub cross_chain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Execution {
    pub return_data: Vec<u8>,
    pub writes: Vec<StorageWrite>,
    pub outbound: Vec<OutboundCall>,
}

pub fn execute(
    ctx: &CallContext,
    func: &Function,
    params: &[u8],
    storage: &mut dyn Storage,
) -> Result<Execution, CallError> {
    let words = decode_words(params).map_err(|_| CallError::BadParams)?;
    let mut out = Execution::default();
    match *func {
        Function::Getter { slot } => {
            let v = storage.load(&Word::from_u64(slot))?;
            out.return_data = encode_words(&[v]);
        }
        Function::Setter { slot } | Function::Sink { slot } => {
            let value = *words.first().ok_or(CallError::BadParams)?;
            let key = Word::from_u64(slot);
            let old = storage.load(&key)?;
            storage.store(key, value)?;
            out.writes.push(StorageWrite {
                key,
                old,
                new: value,
            });
            out.return_data = if matches!(func, Function::Setter { .. }) {
                encode_bool(true)
            } else {
                encode_words(&[])
            };
        }
        Function::Initiate {
            target,
            callback,
            forward_value,
        } => {
            if ctx.cross_chain {
                return Err(CallError::NotCrossChainCallable);
            }
            let expected = if forward_value { 3 } else { 2 };
            if words.len() != expected {
                return Err(CallError::BadParams);
            }
            let target_chain = ChainId::new(words[0].0).map_err(|_| CallError::BadParams)?;
            let target_address = Address::from_word(words[1]).ok_or(CallError::BadParams)?;
            let params = if forward_value {
                encode_words(&words[2..3])
            } else {
                encode_words(&[])
            };
            out.outbound.push(OutboundCall {
                target_chain,
                target: ExternalContract {
                    contract_address: target_address,
                    function_selector: target,
                    params,
                },
                // The result comes home to the initiating chain.
                callback: Callback::to(ctx.chain, ctx.this, callback),
            });
            out.return_data = encode_words(&[]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractAccount {
    pub address: Address,
    #[serde(default)]
    pub storage: BTreeMap<Word, Word>,
    pub functions: BTreeMap<Selector, FunctionDef>,
}

impl ContractAccount {
    pub fn new(address: Address, functions: impl IntoIterator<Item = FunctionDef>) -> Self {
        ContractAccount {
            address,
            storage: BTreeMap::new(),
            functions: functions.into_iter().map(|f| (f.selector(), f)).collect(),
        }
    }

    pub fn with_slot(mut self, slot: u64, value: Word) -> Self {
        let _ = self.storage.store(Word::from_u64(slot), value);
        self
    }

    pub fn read(&self, key: &Word) -> Word {
        self.storage.get(key).copied().unwrap_or(Word::ZERO)
    }

    pub fn slot(&self, slot: u64) -> Word {
        self.read(&Word::from_u64(slot))
    }

    pub fn function(&self, selector: &Selector) -> Option<&FunctionDef> {
        self.functions.get(selector)
    }
}

/// Ready-made contracts for the read and write interaction patterns.
/// Each keeps its single state variable in slot 0.
pub mod library {
    use super::*;

    pub const GET_VALUE: &str = "getValue()";
    pub const SET_VALUE: &str = "setValue(uint256)";
    pub const REQUEST_VALUE: &str = "requestValue(bytes32,address)";
    pub const HANDLE_RESULT: &str = "handleResult(uint256)";
    pub const UPDATE_REMOTE_VALUE: &str = "updateRemoteValue(bytes32,address,uint256)";
    pub const HANDLE_WRITE_RESULT: &str = "handleWriteResult(bool)";
    pub const STORED_VALUE: &str = "storedValue()";
    pub const RETRIEVED_VALUE: &str = "retrievedValue()";
    pub const WRITE_SUCCESSFUL: &str = "writeSuccessful()";

    /// Holds `storedValue` and serves `getValue()`.
    pub fn provider_read(address: Address, stored: u64) -> ContractAccount {
        ContractAccount::new(
            address,
            [
                FunctionDef::new(GET_VALUE, Function::Getter { slot: 0 }),
                FunctionDef::new(STORED_VALUE, Function::Getter { slot: 0 }),
            ],
        )
        .with_slot(0, Word::from_u64(stored))
    }

    /// Holds `storedValue` and accepts `setValue(uint256)`.
    pub fn provider_write(address: Address, stored: u64) -> ContractAccount {
        ContractAccount::new(
            address,
            [
                FunctionDef::new(SET_VALUE, Function::Setter { slot: 0 }),
                FunctionDef::new(GET_VALUE, Function::Getter { slot: 0 }),
                FunctionDef::new(STORED_VALUE, Function::Getter { slot: 0 }),
            ],
        )
        .with_slot(0, Word::from_u64(stored))
    }

    /// Requests a remote `getValue()` and stores the answer in
    /// `retrievedValue`.
    pub fn consumer_read(address: Address) -> ContractAccount {
        ContractAccount::new(
            address,
            [
                FunctionDef::new(
                    REQUEST_VALUE,
                    Function::Initiate {
                        target: Selector::from_signature(GET_VALUE),
                        callback: Selector::from_signature(HANDLE_RESULT),
                        forward_value: false,
                    },
                ),
                FunctionDef::new(HANDLE_RESULT, Function::Sink { slot: 0 }),
                FunctionDef::new(RETRIEVED_VALUE, Function::Getter { slot: 0 }),
            ],
        )
    }

    /// Requests a remote `setValue(v)` and records the acknowledgement in
    /// `writeSuccessful`.
    pub fn consumer_write(address: Address) -> ContractAccount {
        ContractAccount::new(
            address,
            [
                FunctionDef::new(
                    UPDATE_REMOTE_VALUE,
                    Function::Initiate {
                        target: Selector::from_signature(SET_VALUE),
                        callback: Selector::from_signature(HANDLE_WRITE_RESULT),
                        forward_value: true,
                    },
                ),
                FunctionDef::new(HANDLE_WRITE_RESULT, Function::Sink { slot: 0 }),
                FunctionDef::new(WRITE_SUCCESSFUL, Function::Getter { slot: 0 }),
            ],
        )
    }
}
