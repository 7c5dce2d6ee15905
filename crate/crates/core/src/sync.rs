//! Keeps a main chain and its compact chain in agreement.
//!
//! Main → compact: every sealed main block is turned into a `MainSync`
//! compact block carrying the final value of each authorized key the block
//! touched. Compact → main: every compact execution that wrote storage
//! produces one `SyncMirror` transaction replaying the same writes.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::chain::{Block, ChainState, ReceiptStatus, Transaction, TxKind};
use crate::compact::{
    CompactBlock, CompactChain, CompactEntry, CompactError, CompactExecution, CompactOrigin,
    CompactState, ExposurePolicy,
};
use crate::primitives::{Address, ChainId, Hash32, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyncError {
    #[error("main block {got} mirrored out of order, expected {expected}")]
    HeightGap { expected: u64, got: u64 },
    #[error(transparent)]
    Compact(#[from] CompactError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub address: Address,
    pub key: Word,
    pub main: Word,
    pub compact: Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    pub checked_keys: usize,
    pub mismatches: Vec<Mismatch>,
    pub main_height: u64,
    pub compact_height: u64,
}

impl SyncReport {
    pub fn is_consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Mirror,
    Local,
}

/// A local write and a mirror write hit the same key in one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub tick: u64,
    pub chain: String,
    pub address: String,
    pub key: String,
    pub winner: Winner,
}

pub fn write_conflicts_csv<W: io::Write>(out: W, conflicts: &[Conflict]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tick", "chain", "address", "key", "winner"])?;
    for c in conflicts {
        w.serialize((c.tick, &c.chain, &c.address, &c.key, c.winner))?;
    }
    w.flush()?;
    Ok(())
}

/// Synchronizer state for one chain.
#[derive(Debug, Clone)]
pub struct Synchronizer {
    chain: ChainId,
    mirrored_height: u64,
    mirror_nonce: u64,
    conflicts: Vec<Conflict>,
    rejected_mirrors: Vec<Hash32>,
}

impl Synchronizer {
    /// `start_height` is the main-chain height already reflected in the
    /// compact chain (the height it was authorized at).
    pub fn new(chain: ChainId, start_height: u64) -> Self {
        Synchronizer {
            chain,
            mirrored_height: start_height,
            mirror_nonce: 0,
            conflicts: Vec::new(),
            rejected_mirrors: Vec::new(),
        }
    }

    pub fn mirrored_height(&self) -> u64 {
        self.mirrored_height
    }

    pub fn conflicts(&self) -> &[Conflict] {
        &self.conflicts
    }

    /// Mirror transactions the main chain refused. Any entry here is an
    /// invariant violation.
    pub fn rejected_mirrors(&self) -> &[Hash32] {
        &self.rejected_mirrors
    }

    /// Builds and commits the `MainSync` compact block for `block`.
    pub fn on_main_block(
        &mut self,
        block: &Block,
        policy: &ExposurePolicy,
        compact: &mut CompactChain,
    ) -> Result<CompactBlock, SyncError> {
        let expected = self.mirrored_height + 1;
        if block.height != expected {
            return Err(SyncError::HeightGap {
                expected,
                got: block.height,
            });
        }

        for (tx, receipt) in block.transactions.iter().zip(&block.receipts) {
            if tx.kind == TxKind::SyncMirror && receipt.status != ReceiptStatus::Success {
                self.rejected_mirrors.push(receipt.tx);
            }
        }
        self.record_conflicts(block);

        // Final value per authorized key, grouped by contract.
        let mut touched: BTreeMap<Address, BTreeMap<Word, Word>> = BTreeMap::new();
        for w in &block.writes {
            if policy.is_authorized_key(&w.address, &w.write.key) {
                touched
                    .entry(w.address)
                    .or_default()
                    .insert(w.write.key, w.write.new);
            }
        }
        let source = block.digest();
        let entries = touched
            .into_iter()
            .map(|(contract, writes)| CompactEntry {
                source,
                contract,
                writes: writes.into_iter().collect(),
            })
            .collect();
        let cblock = compact.next_block(entries, CompactOrigin::MainSync);
        compact.apply_sync(policy, cblock.clone())?;
        self.mirrored_height = block.height;
        Ok(cblock)
    }

    fn record_conflicts(&mut self, block: &Block) {
        let mut last: BTreeMap<(Address, Word), (usize, TxKind)> = BTreeMap::new();
        let mut mixed: BTreeMap<(Address, Word), bool> = BTreeMap::new();
        for w in &block.writes {
            let slot = (w.address, w.write.key);
            if let Some((_, kind)) = last.get(&slot) {
                let is_mirror = |k: TxKind| k == TxKind::SyncMirror;
                if is_mirror(*kind) != is_mirror(w.origin) {
                    mixed.insert(slot, true);
                }
            }
            last.insert(slot, (w.tx_index, w.origin));
        }
        for (slot, _) in mixed {
            let (_, kind) = last[&slot];
            self.conflicts.push(Conflict {
                tick: block.timestamp,
                chain: self.chain.to_string(),
                address: slot.0.to_string(),
                key: slot.1.to_string(),
                winner: if kind == TxKind::SyncMirror {
                    Winner::Mirror
                } else {
                    Winner::Local
                },
            });
        }
    }

    /// The main-chain transaction replaying a compact execution's writes.
    /// Read-only executions produce none.
    pub fn on_compact_exec(&mut self, exec: &CompactExecution) -> Option<Transaction> {
        if exec.writes.is_empty() {
            return None;
        }
        let writes: Vec<(Word, Word)> = exec.writes.iter().map(|w| (w.key, w.new)).collect();
        let tx = Transaction::mirror(exec.contract, &writes, self.mirror_nonce);
        self.mirror_nonce += 1;
        Some(tx)
    }
}

/// Compares every authorized key between `S_main` and `S_compact`.
pub fn verify_consistency(
    main: &ChainState,
    compact: &CompactState,
    policy: &ExposurePolicy,
) -> SyncReport {
    let keys = policy.authorized_keys();
    let mismatches = keys
        .iter()
        .filter_map(|(a, k)| {
            let m = main.read(a, k);
            let c = compact.read(a, k);
            (m != c).then_some(Mismatch {
                address: *a,
                key: *k,
                main: m,
                compact: c,
            })
        })
        .collect();
    SyncReport {
        checked_keys: keys.len(),
        mismatches,
        main_height: main.height(),
        compact_height: compact.height,
    }
}
