//! One blockchain: accounts, transactions, blocks and the main state `S_main`.

pub mod contract;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_words, encode_words, Encoder};
use crate::message::OutboundCall;
use crate::primitives::{Address, ChainId, Fee, Hash32, Selector, Word};

pub use contract::{
    execute, library, CallContext, CallError, ContractAccount, Function, FunctionDef, GasSchedule,
    Storage, StorageWrite,
};

/// Reserved sender for synchronizer mirror transactions. Exempt from fees.
pub const SYSTEM_SENDER: Address = Address([0xff; 20]);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("address {0} already registered")]
    DuplicateAddress(Address),
    #[error("the zero address is reserved")]
    ZeroAddress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TxKind {
    Local,
    CrossChainInbound,
    SyncMirror,
}

impl TxKind {
    fn tag(self) -> u8 {
        match self {
            TxKind::Local => 0,
            TxKind::CrossChainInbound => 1,
            TxKind::SyncMirror => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub target: Address,
    pub selector: Selector,
    #[serde(with = "crate::message::hex_bytes")]
    pub params: Vec<u8>,
    pub nonce: u64,
    pub gas_limit: Fee,
    pub kind: TxKind,
}

impl Transaction {
    pub fn local(
        sender: Address,
        target: Address,
        selector: Selector,
        params: Vec<u8>,
        nonce: u64,
    ) -> Self {
        Transaction {
            sender,
            target,
            selector,
            params,
            nonce,
            gas_limit: Fee::MAX,
            kind: TxKind::Local,
        }
    }

    /// System transaction that writes `writes` into `target`'s storage.
    pub fn mirror(target: Address, writes: &[(Word, Word)], nonce: u64) -> Self {
        let words: Vec<Word> = writes.iter().flat_map(|(k, v)| [*k, *v]).collect();
        Transaction {
            sender: SYSTEM_SENDER,
            target,
            selector: Selector::ZERO,
            params: encode_words(&words),
            nonce,
            gas_limit: Fee::MAX,
            kind: TxKind::SyncMirror,
        }
    }

    /// Decoded `(key, value)` pairs of a mirror transaction.
    pub fn mirror_writes(&self) -> Option<Vec<(Word, Word)>> {
        let words = decode_words(&self.params).ok()?;
        if words.len() % 2 != 0 {
            return None;
        }
        Some(words.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.u8(self.kind.tag())
            .address(&self.sender)
            .address(&self.target)
            .selector(&self.selector)
            .bytes(&self.params)
            .u64(self.nonce)
            .u64(self.gas_limit);
        e.digest()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceiptStatus {
    Success,
    Reverted(CallError),
    InvalidNonce {
        expected: u64,
        got: u64,
    },
    ZeroGasLimit,
    /// A mirror transaction that could not be applied.
    MirrorRejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub height: u64,
    pub tx: Hash32,
    pub sender: Address,
    pub status: ReceiptStatus,
    #[serde(with = "crate::message::hex_bytes")]
    pub return_data: Vec<u8>,
    pub cost: Fee,
}

impl Receipt {
    pub fn succeeded(&self) -> bool {
        self.status == ReceiptStatus::Success
    }
}

/// A storage write performed inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWrite {
    pub tx_index: usize,
    pub origin: TxKind,
    pub address: Address,
    pub write: StorageWrite,
}

/// Something a block asks the outside world to act on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainEvent {
    /// Contract `origin` invoked the router. `payer` signed the transaction.
    Outbound {
        tx: Hash32,
        origin: Address,
        payer: Address,
        call: OutboundCall,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent_digest: Hash32,
    pub transactions: Vec<Transaction>,
    pub state_digest: Hash32,
    pub timestamp: u64,
    pub receipts: Vec<Receipt>,
    pub writes: Vec<BlockWrite>,
    pub events: Vec<ChainEvent>,
}

impl Block {
    pub fn digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.u64(self.height).hash(&self.parent_digest);
        e.u64(self.transactions.len() as u64);
        for tx in &self.transactions {
            e.hash(&tx.digest());
        }
        e.hash(&self.state_digest).u64(self.timestamp);
        e.digest()
    }
}

/// Result of a direct function call.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CallOutcome {
    pub status: bool,
    pub return_data: Vec<u8>,
    pub cost: Fee,
    pub writes: Vec<StorageWrite>,
    pub outbound: Vec<OutboundCall>,
    pub error: Option<CallError>,
}

impl CallOutcome {
    fn failed(error: CallError, cost: Fee) -> Self {
        CallOutcome {
            error: Some(error),
            cost,
            ..Default::default()
        }
    }
}

/// Copy-on-write view so a failing call leaves storage untouched.
struct Staged<'a> {
    base: &'a BTreeMap<Word, Word>,
    overlay: BTreeMap<Word, Word>,
}

impl Storage for Staged<'_> {
    fn load(&mut self, key: &Word) -> Result<Word, CallError> {
        Ok(self
            .overlay
            .get(key)
            .or_else(|| self.base.get(key))
            .copied()
            .unwrap_or(Word::ZERO))
    }

    fn store(&mut self, key: Word, value: Word) -> Result<(), CallError> {
        self.overlay.insert(key, value);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    id: ChainId,
    gas: GasSchedule,
    contracts: BTreeMap<Address, ContractAccount>,
    nonces: BTreeMap<Address, u64>,
    height: u64,
    head: Hash32,
    receipts: Vec<Receipt>,
}

impl ChainState {
    pub fn genesis(id: ChainId, gas: GasSchedule) -> Self {
        ChainState {
            id,
            gas,
            contracts: BTreeMap::new(),
            nonces: BTreeMap::new(),
            height: 0,
            head: Hash32::ZERO,
            receipts: Vec::new(),
        }
    }

    pub fn id(&self) -> ChainId {
        self.id
    }

    pub fn gas(&self) -> GasSchedule {
        self.gas
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn head(&self) -> Hash32 {
        self.head
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn contract(&self, address: &Address) -> Option<&ContractAccount> {
        self.contracts.get(address)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &ContractAccount> {
        self.contracts.values()
    }

    pub fn read(&self, address: &Address, key: &Word) -> Word {
        self.contracts
            .get(address)
            .map(|c| c.read(key))
            .unwrap_or(Word::ZERO)
    }

    pub fn next_nonce(&self, sender: &Address) -> u64 {
        self.nonces.get(sender).copied().unwrap_or(0)
    }

    pub fn register_contract(&mut self, account: ContractAccount) -> Result<(), ChainError> {
        if account.address.is_zero() {
            return Err(ChainError::ZeroAddress);
        }
        if self.contracts.contains_key(&account.address) {
            return Err(ChainError::DuplicateAddress(account.address));
        }
        self.contracts.insert(account.address, account);
        Ok(())
    }

    /// Overwrites one storage word outside of any transaction. Test and
    /// fault-injection hook only.
    pub fn poke(&mut self, address: &Address, key: Word, value: Word) {
        if let Some(c) = self.contracts.get_mut(address) {
            let _ = c.storage.store(key, value);
        }
    }

    /// Invokes `selector` on `target` and commits on success.
    pub fn call_function(
        &mut self,
        caller: Address,
        target: Address,
        selector: Selector,
        params: &[u8],
    ) -> CallOutcome {
        self.run_call(caller, target, selector, params, Fee::MAX)
    }

    fn run_call(
        &mut self,
        _caller: Address,
        target: Address,
        selector: Selector,
        params: &[u8],
        gas_limit: Fee,
    ) -> CallOutcome {
        let Some(account) = self.contracts.get_mut(&target) else {
            return CallOutcome::failed(CallError::UnknownAddress, 0);
        };
        let Some(def) = account.functions.get(&selector) else {
            return CallOutcome::failed(CallError::UnknownSelector, 0);
        };
        let ctx = CallContext {
            chain: self.id,
            this: target,
            cross_chain: false,
        };
        let mut staged = Staged {
            base: &account.storage,
            overlay: BTreeMap::new(),
        };
        let exec = match execute(&ctx, &def.body, params, &mut staged) {
            Ok(exec) => exec,
            Err(e) => return CallOutcome::failed(e, self.gas.per_call),
        };
        let cost = self.gas.cost(exec.writes.len());
        if cost > gas_limit {
            return CallOutcome::failed(
                CallError::OutOfGas {
                    cost,
                    limit: gas_limit,
                },
                gas_limit,
            );
        }
        let overlay = staged.overlay;
        for (k, v) in overlay {
            let _ = account.storage.store(k, v);
        }
        CallOutcome {
            status: true,
            return_data: exec.return_data,
            cost,
            writes: exec.writes,
            outbound: exec.outbound,
            error: None,
        }
    }

    /// Applies one transaction against the current state without sealing a
    /// block. Returns the receipt, the writes performed and any router
    /// requests.
    pub fn apply_transaction(
        &mut self,
        tx: &Transaction,
    ) -> (Receipt, Vec<StorageWrite>, Vec<OutboundCall>) {
        let mut receipt = Receipt {
            height: self.height + 1,
            tx: tx.digest(),
            sender: tx.sender,
            status: ReceiptStatus::Success,
            return_data: Vec::new(),
            cost: 0,
        };
        if tx.gas_limit == 0 {
            receipt.status = ReceiptStatus::ZeroGasLimit;
            return (receipt, Vec::new(), Vec::new());
        }
        let expected = self.next_nonce(&tx.sender);
        if tx.nonce != expected {
            receipt.status = ReceiptStatus::InvalidNonce {
                expected,
                got: tx.nonce,
            };
            return (receipt, Vec::new(), Vec::new());
        }
        self.nonces.insert(tx.sender, expected + 1);

        match tx.kind {
            TxKind::SyncMirror => {
                let pairs = tx.mirror_writes();
                let account = self.contracts.get_mut(&tx.target);
                match (tx.sender == SYSTEM_SENDER, pairs, account) {
                    (true, Some(pairs), Some(account)) => {
                        let writes = pairs
                            .into_iter()
                            .map(|(key, new)| {
                                let old = account.read(&key);
                                let _ = account.storage.store(key, new);
                                StorageWrite { key, old, new }
                            })
                            .collect();
                        (receipt, writes, Vec::new())
                    }
                    _ => {
                        receipt.status = ReceiptStatus::MirrorRejected;
                        (receipt, Vec::new(), Vec::new())
                    }
                }
            }
            TxKind::Local | TxKind::CrossChainInbound => {
                let out =
                    self.run_call(tx.sender, tx.target, tx.selector, &tx.params, tx.gas_limit);
                receipt.cost = out.cost;
                receipt.return_data = out.return_data;
                if let Some(e) = out.error {
                    receipt.status = ReceiptStatus::Reverted(e);
                }
                (receipt, out.writes, out.outbound)
            }
        }
    }

    /// Applies `txs` in order and seals the next block.
    pub fn mine_block(&mut self, txs: Vec<Transaction>, timestamp: u64) -> Block {
        let mut receipts = Vec::with_capacity(txs.len());
        let mut writes = Vec::new();
        let mut events = Vec::new();
        for (i, tx) in txs.iter().enumerate() {
            let (receipt, w, outbound) = self.apply_transaction(tx);
            writes.extend(w.into_iter().map(|write| BlockWrite {
                tx_index: i,
                origin: tx.kind,
                address: tx.target,
                write,
            }));
            events.extend(outbound.into_iter().map(|call| ChainEvent::Outbound {
                tx: receipt.tx,
                origin: tx.target,
                payer: tx.sender,
                call,
            }));
            receipts.push(receipt);
        }
        let block = Block {
            height: self.height + 1,
            parent_digest: self.head,
            transactions: txs,
            state_digest: self.state_digest(),
            timestamp,
            receipts: receipts.clone(),
            writes,
            events,
        };
        self.height = block.height;
        self.head = block.digest();
        self.receipts.extend(receipts);
        block
    }

    /// Digest of contract storage only.
    pub fn s_main_digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        self.encode_storage(&mut e);
        e.digest()
    }

    /// Digest of the full post-state: storage and account nonces.
    pub fn state_digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.chain(&self.id);
        self.encode_storage(&mut e);
        e.u64(self.nonces.len() as u64);
        for (a, n) in &self.nonces {
            e.address(a).u64(*n);
        }
        e.digest()
    }

    fn encode_storage(&self, e: &mut Encoder) {
        e.u64(self.contracts.len() as u64);
        for c in self.contracts.values() {
            e.address(&c.address).u64(c.storage.len() as u64);
            for (k, v) in &c.storage {
                e.word(k).word(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;
    use crate::codec::{encode_bool, encode_words};

    fn chain() -> ChainState {
        ChainState::genesis(
            ChainId::from_label("A").unwrap(),
            GasSchedule {
                per_call: 5,
                per_write: 3,
            },
        )
    }

    const READER: Address = Address([0x0a; 20]);
    const WRITER: Address = Address([0x0b; 20]);
    const USER: Address = Address([0x01; 20]);

    fn sel(s: &str) -> Selector {
        Selector::from_signature(s)
    }

    #[test]
    fn register_and_read() {
        let mut c = chain();
        c.register_contract(provider_read(READER, 42)).unwrap();
        c.register_contract(provider_write(WRITER, 0)).unwrap();
        let out = c.call_function(USER, READER, sel(GET_VALUE), &[]);
        assert!(out.status);
        assert_eq!(out.return_data, encode_words(&[Word::from_u64(42)]));
        assert_eq!(out.cost, 5);
        let out = c.call_function(USER, WRITER, sel(GET_VALUE), &[]);
        assert_eq!(out.return_data, encode_words(&[Word::ZERO]));
        assert_eq!(
            c.register_contract(provider_read(READER, 1)),
            Err(ChainError::DuplicateAddress(READER))
        );
        assert_eq!(
            c.register_contract(provider_read(Address::ZERO, 1)),
            Err(ChainError::ZeroAddress)
        );
    }

    #[test]
    fn set_value_writes_and_charges_per_write() {
        let mut c = chain();
        c.register_contract(provider_write(WRITER, 0)).unwrap();
        let out = c.call_function(
            USER,
            WRITER,
            sel(SET_VALUE),
            &encode_words(&[Word::from_u64(99)]),
        );
        assert!(out.status);
        assert_eq!(out.return_data, encode_bool(true));
        assert_eq!(out.cost, 8);
        assert_eq!(c.read(&WRITER, &Word::ZERO), Word::from_u64(99));
    }

    #[test]
    fn unknown_targets_fail_without_cost() {
        let mut c = chain();
        c.register_contract(provider_read(READER, 42)).unwrap();
        let before = c.state_digest();
        let out = c.call_function(USER, WRITER, sel(GET_VALUE), &[]);
        assert_eq!((out.status, out.return_data.len(), out.cost), (false, 0, 0));
        assert_eq!(out.error, Some(CallError::UnknownAddress));
        let out = c.call_function(USER, READER, sel(SET_VALUE), &[]);
        assert_eq!(out.error, Some(CallError::UnknownSelector));
        assert!(out.return_data.is_empty());
        assert_eq!(before, c.state_digest());
    }

    #[test]
    fn failed_call_rolls_back() {
        let mut c = chain();
        c.register_contract(provider_write(WRITER, 3)).unwrap();
        let tx = Transaction {
            gas_limit: 7,
            ..Transaction::local(
                USER,
                WRITER,
                sel(SET_VALUE),
                encode_words(&[Word::from_u64(9)]),
                0,
            )
        };
        let block = c.mine_block(vec![tx], 1);
        assert_eq!(
            block.receipts[0].status,
            ReceiptStatus::Reverted(CallError::OutOfGas { cost: 8, limit: 7 })
        );
        assert_eq!(c.read(&WRITER, &Word::ZERO), Word::from_u64(3));
        assert!(block.writes.is_empty());
    }

    #[test]
    fn empty_block_keeps_state_digest() {
        let mut c = chain();
        c.register_contract(provider_read(READER, 42)).unwrap();
        let before = c.state_digest();
        let b1 = c.mine_block(vec![], 1);
        let b2 = c.mine_block(vec![], 2);
        assert_eq!(b1.state_digest, before);
        assert_eq!(b2.state_digest, before);
        assert_eq!((b1.height, b2.height), (1, 2));
        assert_eq!(b1.parent_digest, Hash32::ZERO);
        assert_eq!(b2.parent_digest, b1.digest());
        assert_ne!(b1.digest(), b2.digest());
    }

    #[test]
    fn repeated_nonce_is_skipped() {
        let mut c = chain();
        c.register_contract(provider_write(WRITER, 0)).unwrap();
        let p = |v| encode_words(&[Word::from_u64(v)]);
        let block = c.mine_block(
            vec![
                Transaction::local(USER, WRITER, sel(SET_VALUE), p(1), 0),
                Transaction::local(USER, WRITER, sel(SET_VALUE), p(2), 0),
            ],
            1,
        );
        assert!(block.receipts[0].succeeded());
        assert_eq!(
            block.receipts[1].status,
            ReceiptStatus::InvalidNonce {
                expected: 1,
                got: 0
            }
        );
        assert_eq!(c.read(&WRITER, &Word::ZERO), Word::from_u64(1));
        assert_eq!(c.receipts().len(), 2);
    }

    #[test]
    fn reads_do_not_change_state() {
        let mut c = chain();
        c.register_contract(provider_read(READER, 42)).unwrap();
        let before = c.state_digest();
        for _ in 0..10 {
            c.call_function(USER, READER, sel(GET_VALUE), &[]);
        }
        assert_eq!(before, c.state_digest());
    }

    #[test]
    fn mirror_requires_system_sender() {
        let mut c = chain();
        c.register_contract(provider_write(WRITER, 0)).unwrap();
        let mut forged = Transaction::mirror(WRITER, &[(Word::ZERO, Word::from_u64(5))], 0);
        forged.sender = USER;
        let good = Transaction::mirror(WRITER, &[(Word::ZERO, Word::from_u64(6))], 0);
        let missing = Transaction::mirror(READER, &[(Word::ZERO, Word::from_u64(6))], 1);
        let block = c.mine_block(vec![forged, good, missing], 1);
        assert_eq!(block.receipts[0].status, ReceiptStatus::MirrorRejected);
        assert!(block.receipts[1].succeeded());
        assert_eq!(block.receipts[2].status, ReceiptStatus::MirrorRejected);
        assert_eq!(c.read(&WRITER, &Word::ZERO), Word::from_u64(6));
        assert_eq!(block.writes.len(), 1);
        assert_eq!(block.writes[0].origin, TxKind::SyncMirror);
    }
}
