//! Per-chain router: assigns request ids, executes inbound calls against the
//! compact chain and decides where results go.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::codec::Encoder;
use crate::compact::{CompactChain, CompactError, CompactExecution, ExposurePolicy};
use crate::message::{Callback, CrossChainCall, ExternalContract};
use crate::primitives::{keccak256, Address, ChainId, RequestId};

/// Address the router itself uses as `sender` when it forwards results.
pub const ROUTER_ADDRESS: Address = Address::from_low_u64(0x0001_0000);

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum RouterError {
    #[error("unknown target chain {0}")]
    UnknownTargetChain(ChainId),
    #[error("callback addressed to {got}, this router serves {expected}")]
    WrongChain { expected: ChainId, got: ChainId },
}

/// Why a request leg ended without a result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FailureReason {
    InvalidContractAddress,
    Unauthorized(String),
    Execution(String),
    AdmissionRefused(String),
    Dropped,
    UnknownChain(String),
    MalformedPayload,
}

impl FailureReason {
    fn from_compact(e: CompactError) -> Self {
        match e {
            CompactError::ExecutionFailed(c) => FailureReason::Execution(c.to_string()),
            other => FailureReason::Unauthorized(other.to_string()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FailureReason::InvalidContractAddress => "invalid_contract_address",
            FailureReason::Unauthorized(_) => "unauthorized",
            FailureReason::Execution(_) => "execution_failed",
            FailureReason::AdmissionRefused(_) => "admission_refused",
            FailureReason::Dropped => "dropped",
            FailureReason::UnknownChain(_) => "unknown_chain",
            FailureReason::MalformedPayload => "malformed_payload",
        }
    }
}

/// How a single request leg ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Terminal {
    /// Executed with no callback.
    Completed,
    /// Executed; the callback ran on this chain.
    CallbackResult {
        status: bool,
    },
    /// Executed; the result went out as a new request.
    Relayed {
        follow_up: RequestId,
    },
    Failed(FailureReason),
}

impl Terminal {
    pub fn label(&self) -> &'static str {
        match self {
            Terminal::Completed => "completed",
            Terminal::CallbackResult { status: true } => "callback_ok",
            Terminal::CallbackResult { status: false } => "callback_failed",
            Terminal::Relayed { .. } => "relayed",
            Terminal::Failed(r) => r.label(),
        }
    }

    pub fn is_success(&self) -> bool {
        !matches!(self, Terminal::Failed(_))
    }
}

/// Events the router emits for the network watcher.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouterEvent {
    CrossChainRequest {
        target_chain: ChainId,
        call: CrossChainCall,
    },
    CallBackResult {
        request_id: RequestId,
        status: bool,
        result: Vec<u8>,
    },
}

/// Outcome of finishing an inbound call after its execution is final.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub terminal: Terminal,
    /// The local callback execution, when one ran successfully.
    pub callback_exec: Option<CompactExecution>,
}

#[derive(Debug, Clone)]
pub struct Router {
    chain: ChainId,
    known: BTreeSet<ChainId>,
    nonces: BTreeMap<Address, u64>,
    outbox: Vec<RouterEvent>,
}

impl Router {
    pub fn new(chain: ChainId, known: impl IntoIterator<Item = ChainId>) -> Self {
        Router {
            chain,
            known: known.into_iter().filter(|c| *c != chain).collect(),
            nonces: BTreeMap::new(),
            outbox: Vec::new(),
        }
    }

    pub fn chain(&self) -> ChainId {
        self.chain
    }

    pub fn knows(&self, chain: &ChainId) -> bool {
        self.known.contains(chain)
    }

    fn request_id(&self, sender: Address, nonce: u64, tick: u64) -> RequestId {
        let mut e = Encoder::new();
        e.chain(&self.chain).u64(tick).address(&sender).u64(nonce);
        e.digest()
    }

    /// The id the next call from `sender` at `tick` will receive.
    pub fn peek_request_id(&self, sender: Address, tick: u64) -> RequestId {
        let nonce = self.nonces.get(&sender).copied().unwrap_or(0);
        self.request_id(sender, nonce, tick)
    }

    pub fn initiate_cross_chain_call(
        &mut self,
        target_chain: ChainId,
        target: ExternalContract,
        callback: Callback,
        sender: Address,
        tick: u64,
    ) -> Result<(RequestId, RouterEvent), RouterError> {
        if !self.knows(&target_chain) {
            return Err(RouterError::UnknownTargetChain(target_chain));
        }
        let id = self.peek_request_id(sender, tick);
        *self.nonces.entry(sender).or_default() += 1;
        let event = RouterEvent::CrossChainRequest {
            target_chain,
            call: CrossChainCall {
                request_id: id,
                sender,
                target,
                callback,
            },
        };
        self.outbox.push(event.clone());
        Ok((id, event))
    }

    /// Runs an inbound call on the compact chain. Nothing is emitted yet.
    pub fn execute_incoming(
        &self,
        call: &CrossChainCall,
        compact: &mut CompactChain,
        policy: &ExposurePolicy,
    ) -> Result<CompactExecution, FailureReason> {
        if call.target.contract_address.is_zero() {
            return Err(FailureReason::InvalidContractAddress);
        }
        compact
            .apply_cross_chain_tx(policy, call)
            .map_err(FailureReason::from_compact)
    }

    /// Routes the result of a finalized inbound execution.
    pub fn complete_incoming(
        &mut self,
        call: &CrossChainCall,
        exec: &CompactExecution,
        compact: &mut CompactChain,
        policy: &ExposurePolicy,
        tick: u64,
    ) -> Completion {
        let cb = call.callback;
        let done = |terminal| Completion {
            terminal,
            callback_exec: None,
        };
        let Some(chain) = cb.chain.filter(|_| !cb.is_none()) else {
            return done(Terminal::Completed);
        };
        if chain == self.chain {
            return self
                .deliver_callback(call.request_id, cb, &exec.return_data, compact, policy)
                .expect("callback chain checked");
        }
        let target = ExternalContract {
            contract_address: cb.callback_address,
            function_selector: cb.callback_selector,
            params: exec.return_data.clone(),
        };
        match self.initiate_cross_chain_call(chain, target, Callback::NONE, ROUTER_ADDRESS, tick) {
            Ok((follow_up, _)) => done(Terminal::Relayed { follow_up }),
            Err(e) => done(Terminal::Failed(FailureReason::UnknownChain(e.to_string()))),
        }
    }

    /// Executes a callback on this chain and emits `CallBackResult`.
    pub fn deliver_callback(
        &mut self,
        request_id: RequestId,
        callback: Callback,
        result: &[u8],
        compact: &mut CompactChain,
        policy: &ExposurePolicy,
    ) -> Result<Completion, RouterError> {
        match callback.chain {
            Some(c) if c == self.chain => {}
            other => {
                return Err(RouterError::WrongChain {
                    expected: self.chain,
                    got: other.unwrap_or(self.chain),
                })
            }
        }
        let mut e = Encoder::new();
        e.hash(&request_id).fixed(b"callback");
        let source = e.digest();
        let exec = if callback.callback_address.is_zero() {
            None
        } else {
            compact
                .execute(
                    policy,
                    callback.callback_address,
                    callback.callback_selector,
                    result,
                    source,
                )
                .ok()
        };
        let status = exec.is_some();
        self.outbox.push(RouterEvent::CallBackResult {
            request_id,
            status,
            result: exec
                .as_ref()
                .map(|x| x.return_data.clone())
                .unwrap_or_default(),
        });
        Ok(Completion {
            terminal: Terminal::CallbackResult { status },
            callback_exec: exec,
        })
    }

    /// Executes and completes an inbound call in one step, for callers that
    /// do not model finality.
    pub fn handle_incoming(
        &mut self,
        call: &CrossChainCall,
        compact: &mut CompactChain,
        policy: &ExposurePolicy,
        tick: u64,
    ) -> (Option<CompactExecution>, Completion) {
        match self.execute_incoming(call, compact, policy) {
            Ok(exec) => {
                let c = self.complete_incoming(call, &exec, compact, policy, tick);
                (Some(exec), c)
            }
            Err(reason) => (
                None,
                Completion {
                    terminal: Terminal::Failed(reason),
                    callback_exec: None,
                },
            ),
        }
    }

    /// Takes every event emitted since the last drain.
    pub fn drain_events(&mut self) -> Vec<RouterEvent> {
        std::mem::take(&mut self.outbox)
    }

    pub fn has_events(&self) -> bool {
        !self.outbox.is_empty()
    }
}

/// Deterministic id for a value forwarded between routers, used in traces.
pub fn event_digest(event: &RouterEvent) -> RequestId {
    match event {
        RouterEvent::CrossChainRequest { call, .. } => call.digest(),
        RouterEvent::CallBackResult {
            request_id,
            status,
            result,
        } => {
            let mut e = Encoder::new();
            e.hash(request_id).u8(*status as u8).bytes(result);
            keccak256(&e.finish())
        }
    }
}
