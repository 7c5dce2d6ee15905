//! The compact chain: a per-chain sequencer holding only the storage that
//! contracts have exposed for cross-chain use (`S_compact`).
//!
//! A [`CompactChain`] never holds a handle to the main chain's state. It is
//! seeded by copying authorized words out of a [`ChainState`] and is only
//! ever updated through cross-chain executions or synchronizer blocks, both
//! of which are checked against the [`ExposurePolicy`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    execute, CallContext, CallError, ChainState, FunctionDef, GasSchedule, Storage, StorageWrite,
};
use crate::codec::Encoder;
use crate::message::CrossChainCall;
use crate::primitives::{Address, ChainId, Fee, Hash32, Selector, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CompactError {
    #[error("contract {0} is not deployed on the main chain")]
    UnknownContract(Address),
    #[error("{0}::{1} is not exposed for cross-chain calls")]
    UnauthorizedTarget(Address, Selector),
    #[error("write through read-only exposure")]
    WriteToReadOnly,
    #[error("execution failed: {0}")]
    ExecutionFailed(CallError),
    #[error("key {1} of {0} is not authorized")]
    UnauthorizedKey(Address, Word),
    #[error("compact block height {got}, expected {expected}")]
    HeightMismatch { expected: u64, got: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    ReadOnly,
    ReadWrite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureEntry {
    pub contract: Address,
    pub selector: Selector,
    pub storage_keys: BTreeSet<Word>,
    pub mode: AccessMode,
}

/// Which (contract, selector) pairs are callable cross-chain, and which
/// storage keys each may touch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExposurePolicy {
    pub entries: Vec<ExposureEntry>,
}

impl ExposurePolicy {
    pub fn new(entries: Vec<ExposureEntry>) -> Self {
        ExposurePolicy { entries }
    }

    pub fn entry(&self, contract: &Address, selector: &Selector) -> Option<&ExposureEntry> {
        self.entries
            .iter()
            .find(|e| e.contract == *contract && e.selector == *selector)
    }

    /// Every (contract, key) pair mirrored into `S_compact`.
    pub fn authorized_keys(&self) -> BTreeSet<(Address, Word)> {
        self.entries
            .iter()
            .flat_map(|e| e.storage_keys.iter().map(move |k| (e.contract, *k)))
            .collect()
    }

    pub fn is_authorized_key(&self, contract: &Address, key: &Word) -> bool {
        self.entries
            .iter()
            .any(|e| e.contract == *contract && e.storage_keys.contains(key))
    }

    pub fn contracts(&self) -> BTreeSet<Address> {
        self.entries.iter().map(|e| e.contract).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompactState {
    pub s_compact: BTreeMap<(Address, Word), Word>,
    pub height: u64,
}

impl CompactState {
    pub fn read(&self, contract: &Address, key: &Word) -> Word {
        self.s_compact
            .get(&(*contract, *key))
            .copied()
            .unwrap_or(Word::ZERO)
    }

    pub fn digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.u64(self.s_compact.len() as u64);
        for ((a, k), v) in &self.s_compact {
            e.address(a).word(k).word(v);
        }
        e.digest()
    }
}

/// Seeds `S_compact` with the current main-chain value of every authorized
/// key. Keys already present in `state` are overwritten.
pub fn authorize(
    policy: &ExposurePolicy,
    state: &CompactState,
    main: &ChainState,
) -> Result<CompactState, CompactError> {
    for c in policy.contracts() {
        if main.contract(&c).is_none() {
            return Err(CompactError::UnknownContract(c));
        }
    }
    let mut next = state.clone();
    for (a, k) in policy.authorized_keys() {
        next.s_compact.insert((a, k), main.read(&a, &k));
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompactOrigin {
    MainSync,
    CrossChainExec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactEntry {
    pub source: Hash32,
    pub contract: Address,
    /// Touched keys with their new values, in write order.
    pub writes: Vec<(Word, Word)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactBlock {
    pub height: u64,
    pub parent_digest: Hash32,
    pub entries: Vec<CompactEntry>,
    pub origin: CompactOrigin,
}

impl CompactBlock {
    pub fn digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        e.u64(self.height).hash(&self.parent_digest);
        e.u8(match self.origin {
            CompactOrigin::MainSync => 0,
            CompactOrigin::CrossChainExec => 1,
        });
        e.u64(self.entries.len() as u64);
        for entry in &self.entries {
            e.hash(&entry.source).address(&entry.contract);
            e.u64(entry.writes.len() as u64);
            for (k, v) in &entry.writes {
                e.word(k).word(v);
            }
        }
        e.digest()
    }
}

/// A committed cross-chain execution on the compact chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactExecution {
    pub source: Hash32,
    pub contract: Address,
    pub selector: Selector,
    pub return_data: Vec<u8>,
    pub cost: Fee,
    pub writes: Vec<StorageWrite>,
}

/// Storage view restricted to one exposure entry's keys.
struct PolicyView<'a> {
    base: &'a BTreeMap<(Address, Word), Word>,
    contract: Address,
    keys: &'a BTreeSet<Word>,
    overlay: BTreeMap<Word, Word>,
}

impl Storage for PolicyView<'_> {
    fn load(&mut self, key: &Word) -> Result<Word, CallError> {
        if !self.keys.contains(key) {
            return Err(CallError::UnauthorizedKey(*key));
        }
        Ok(self
            .overlay
            .get(key)
            .or_else(|| self.base.get(&(self.contract, *key)))
            .copied()
            .unwrap_or(Word::ZERO))
    }

    fn store(&mut self, key: Word, value: Word) -> Result<(), CallError> {
        if !self.keys.contains(&key) {
            return Err(CallError::UnauthorizedKey(key));
        }
        self.overlay.insert(key, value);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CompactChain {
    chain: ChainId,
    gas: GasSchedule,
    state: CompactState,
    code: BTreeMap<(Address, Selector), FunctionDef>,
    head: Hash32,
    open: Vec<CompactEntry>,
    blocks: Vec<CompactBlock>,
}

impl CompactChain {
    /// Builds the compact chain for `main`, copying authorized storage and
    /// the code of exposed functions.
    pub fn authorize(policy: &ExposurePolicy, main: &ChainState) -> Result<Self, CompactError> {
        let state = authorize(policy, &CompactState::default(), main)?;
        let mut code = BTreeMap::new();
        for e in &policy.entries {
            let account = main
                .contract(&e.contract)
                .ok_or(CompactError::UnknownContract(e.contract))?;
            if let Some(def) = account.function(&e.selector) {
                code.insert((e.contract, e.selector), def.clone());
            }
        }
        Ok(CompactChain {
            chain: main.id(),
            gas: main.gas(),
            state,
            code,
            head: Hash32::ZERO,
            open: Vec::new(),
            blocks: Vec::new(),
        })
    }

    pub fn state(&self) -> &CompactState {
        &self.state
    }

    pub fn height(&self) -> u64 {
        self.state.height
    }

    pub fn head(&self) -> Hash32 {
        self.head
    }

    pub fn blocks(&self) -> &[CompactBlock] {
        &self.blocks
    }

    pub fn read(&self, contract: &Address, key: &Word) -> Word {
        self.state.read(contract, key)
    }

    /// Shape of an exposed function, if any.
    pub fn function(&self, contract: &Address, selector: &Selector) -> Option<&FunctionDef> {
        self.code.get(&(*contract, *selector))
    }

    /// Fault-injection hook for consistency tests.
    pub fn corrupt(&mut self, contract: Address, key: Word, value: Word) {
        self.state.s_compact.insert((contract, key), value);
    }

    /// Executes an inbound cross-chain call against `S_compact`.
    pub fn apply_cross_chain_tx(
        &mut self,
        policy: &ExposurePolicy,
        call: &CrossChainCall,
    ) -> Result<CompactExecution, CompactError> {
        self.execute(
            policy,
            call.target.contract_address,
            call.target.function_selector,
            &call.target.params,
            call.digest(),
        )
    }

    /// Runs `selector` on `contract` with access restricted to the policy
    /// entry for that pair. On success the writes land in `S_compact` and
    /// are queued for the next execution block.
    pub fn execute(
        &mut self,
        policy: &ExposurePolicy,
        contract: Address,
        selector: Selector,
        params: &[u8],
        source: Hash32,
    ) -> Result<CompactExecution, CompactError> {
        let entry = policy
            .entry(&contract, &selector)
            .ok_or(CompactError::UnauthorizedTarget(contract, selector))?;
        let def = self
            .code
            .get(&(contract, selector))
            .ok_or(CompactError::UnauthorizedTarget(contract, selector))?;
        if def.body.declared_writes() > 0 && entry.mode == AccessMode::ReadOnly {
            return Err(CompactError::WriteToReadOnly);
        }
        let ctx = CallContext {
            chain: self.chain,
            this: contract,
            cross_chain: true,
        };
        let mut view = PolicyView {
            base: &self.state.s_compact,
            contract,
            keys: &entry.storage_keys,
            overlay: BTreeMap::new(),
        };
        let exec =
            execute(&ctx, &def.body, params, &mut view).map_err(CompactError::ExecutionFailed)?;
        for (k, v) in view.overlay {
            self.state.s_compact.insert((contract, k), v);
        }
        if !exec.writes.is_empty() {
            self.open.push(CompactEntry {
                source,
                contract,
                writes: exec.writes.iter().map(|w| (w.key, w.new)).collect(),
            });
        }
        Ok(CompactExecution {
            source,
            contract,
            selector,
            cost: self.gas.cost(exec.writes.len()),
            return_data: exec.return_data,
            writes: exec.writes,
        })
    }

    /// Seals queued execution entries into a block. Returns `None` when
    /// nothing was written.
    pub fn seal_exec(&mut self) -> Option<CompactBlock> {
        if self.open.is_empty() {
            return None;
        }
        let entries = std::mem::take(&mut self.open);
        let block = self.next_block(entries, CompactOrigin::CrossChainExec);
        self.push(block.clone());
        Some(block)
    }

    pub(crate) fn next_block(
        &self,
        entries: Vec<CompactEntry>,
        origin: CompactOrigin,
    ) -> CompactBlock {
        CompactBlock {
            height: self.state.height + 1,
            parent_digest: self.head,
            entries,
            origin,
        }
    }

    /// Commits a block built by the synchronizer from a main-chain block.
    pub fn apply_sync(
        &mut self,
        policy: &ExposurePolicy,
        block: CompactBlock,
    ) -> Result<(), CompactError> {
        if block.height != self.state.height + 1 {
            return Err(CompactError::HeightMismatch {
                expected: self.state.height + 1,
                got: block.height,
            });
        }
        for entry in &block.entries {
            for (k, _) in &entry.writes {
                if !policy.is_authorized_key(&entry.contract, k) {
                    return Err(CompactError::UnauthorizedKey(entry.contract, *k));
                }
            }
        }
        for entry in &block.entries {
            for (k, v) in &entry.writes {
                self.state.s_compact.insert((entry.contract, *k), *v);
            }
        }
        self.push(block);
        Ok(())
    }

    fn push(&mut self, block: CompactBlock) {
        self.state.height = block.height;
        self.head = block.digest();
        self.blocks.push(block);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::library::*;
    use crate::codec::{encode_bool, encode_words};
    use crate::message::{Callback, ExternalContract};

    const PROVIDER: Address = Address([0x0a; 20]);
    const HIDDEN: Address = Address([0x0c; 20]);

    fn sel(s: &str) -> Selector {
        Selector::from_signature(s)
    }

    fn main_chain(stored: u64) -> ChainState {
        let mut c = ChainState::genesis(ChainId::from_label("A").unwrap(), GasSchedule::default());
        c.register_contract(provider_write(PROVIDER, stored))
            .unwrap();
        c.register_contract(provider_write(HIDDEN, 7)).unwrap();
        c
    }

    fn policy(mode: AccessMode) -> ExposurePolicy {
        let keys: BTreeSet<Word> = [Word::ZERO].into();
        ExposurePolicy::new(vec![
            ExposureEntry {
                contract: PROVIDER,
                selector: sel(GET_VALUE),
                storage_keys: keys.clone(),
                mode: AccessMode::ReadOnly,
            },
            ExposureEntry {
                contract: PROVIDER,
                selector: sel(SET_VALUE),
                storage_keys: keys,
                mode,
            },
        ])
    }

    fn call(selector: &str, params: Vec<u8>) -> CrossChainCall {
        call_to(PROVIDER, selector, params)
    }

    fn call_to(contract: Address, selector: &str, params: Vec<u8>) -> CrossChainCall {
        CrossChainCall {
            request_id: Hash32([1; 32]),
            sender: Address::from_low_u64(9),
            target: ExternalContract {
                contract_address: contract,
                function_selector: sel(selector),
                params,
            },
            callback: Callback::NONE,
        }
    }

    #[test]
    fn authorize_seeds_exposed_keys() {
        let main = main_chain(42);
        let cc = CompactChain::authorize(&policy(AccessMode::ReadOnly), &main).unwrap();
        assert_eq!(cc.read(&PROVIDER, &Word::ZERO), Word::from_u64(42));
        assert_eq!(cc.state().s_compact.len(), 1);
        assert!(!cc.state().s_compact.contains_key(&(HIDDEN, Word::ZERO)));

        let empty = CompactChain::authorize(&ExposurePolicy::default(), &main).unwrap();
        assert!(empty.state().s_compact.is_empty());
    }

    #[test]
    fn absent_key_mirrors_as_zero() {
        let main = main_chain(0);
        let mut p = policy(AccessMode::ReadOnly);
        p.entries[0].storage_keys.insert(Word::from_u64(5));
        let s = authorize(&p, &CompactState::default(), &main).unwrap();
        assert_eq!(
            s.s_compact.get(&(PROVIDER, Word::from_u64(5))),
            Some(&Word::ZERO)
        );
    }

    #[test]
    fn authorize_rejects_unknown_contract() {
        let main = main_chain(0);
        let mut p = policy(AccessMode::ReadOnly);
        p.entries[0].contract = Address::from_low_u64(0xdead);
        assert_eq!(
            CompactChain::authorize(&p, &main).unwrap_err(),
            CompactError::UnknownContract(Address::from_low_u64(0xdead))
        );
    }

    #[test]
    fn inbound_read_leaves_state() {
        let main = main_chain(42);
        let p = policy(AccessMode::ReadOnly);
        let mut cc = CompactChain::authorize(&p, &main).unwrap();
        let before = cc.state().digest();
        let out = cc
            .apply_cross_chain_tx(&p, &call(GET_VALUE, vec![]))
            .unwrap();
        assert_eq!(out.return_data, encode_words(&[Word::from_u64(42)]));
        assert!(out.writes.is_empty());
        assert_eq!(before, cc.state().digest());
        assert!(cc.seal_exec().is_none());
    }

    #[test]
    fn inbound_write_respects_mode() {
        let main = main_chain(42);
        let rw = policy(AccessMode::ReadWrite);
        let mut cc = CompactChain::authorize(&rw, &main).unwrap();
        let out = cc
            .apply_cross_chain_tx(&rw, &call(SET_VALUE, encode_words(&[Word::from_u64(17)])))
            .unwrap();
        assert_eq!(out.return_data, encode_bool(true));
        assert_eq!(cc.read(&PROVIDER, &Word::ZERO), Word::from_u64(17));
        let block = cc.seal_exec().unwrap();
        assert_eq!(block.origin, CompactOrigin::CrossChainExec);
        assert_eq!(
            block.entries[0].writes,
            vec![(Word::ZERO, Word::from_u64(17))]
        );
        assert_eq!(cc.height(), 1);

        let ro = policy(AccessMode::ReadOnly);
        let mut cc = CompactChain::authorize(&ro, &main).unwrap();
        let before = cc.state().clone();
        assert_eq!(
            cc.apply_cross_chain_tx(&ro, &call(SET_VALUE, encode_words(&[Word::from_u64(17)]))),
            Err(CompactError::WriteToReadOnly)
        );
        assert_eq!(&before, cc.state());
    }

    #[test]
    fn unexposed_targets_rejected() {
        let main = main_chain(42);
        let p = policy(AccessMode::ReadWrite);
        let mut cc = CompactChain::authorize(&p, &main).unwrap();
        assert_eq!(
            cc.apply_cross_chain_tx(&p, &call_to(HIDDEN, GET_VALUE, vec![])),
            Err(CompactError::UnauthorizedTarget(HIDDEN, sel(GET_VALUE)))
        );
        assert_eq!(
            cc.apply_cross_chain_tx(&p, &call(STORED_VALUE, vec![])),
            Err(CompactError::UnauthorizedTarget(
                PROVIDER,
                sel(STORED_VALUE)
            ))
        );
    }

    #[test]
    fn keys_outside_entry_are_unreachable() {
        let main = main_chain(42);
        let mut p = policy(AccessMode::ReadWrite);
        // setValue writes slot 0 but the entry only lists slot 1.
        p.entries[1].storage_keys = [Word::from_u64(1)].into();
        let mut cc = CompactChain::authorize(&p, &main).unwrap();
        assert_eq!(
            cc.apply_cross_chain_tx(&p, &call(SET_VALUE, encode_words(&[Word::ONE]))),
            Err(CompactError::ExecutionFailed(CallError::UnauthorizedKey(
                Word::ZERO
            )))
        );
    }

    #[test]
    fn sync_blocks_checked() {
        let main = main_chain(42);
        let p = policy(AccessMode::ReadWrite);
        let mut cc = CompactChain::authorize(&p, &main).unwrap();
        let bad = cc.next_block(
            vec![CompactEntry {
                source: Hash32::ZERO,
                contract: HIDDEN,
                writes: vec![(Word::ZERO, Word::ONE)],
            }],
            CompactOrigin::MainSync,
        );
        assert_eq!(
            cc.apply_sync(&p, bad),
            Err(CompactError::UnauthorizedKey(HIDDEN, Word::ZERO))
        );
        let mut skip = cc.next_block(vec![], CompactOrigin::MainSync);
        skip.height += 1;
        assert!(matches!(
            cc.apply_sync(&p, skip),
            Err(CompactError::HeightMismatch { .. })
        ));
    }
}
