//! Cross-chain transaction pool with depth-based finality.

use serde::Serialize;
use thiserror::Error;

use super::ledger::LedgerError;
use crate::primitives::{Hash32, RequestId};

/// Main-chain blocks an entry must be buried under before it is final,
/// unless it was already committed on the compact chain.
pub const FINALITY_DEPTH: u64 = 6;

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum MempoolError {
    #[error("admission refused: {0}")]
    AdmissionRefused(LedgerError),
    #[error("transaction already in pool")]
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EntryStatus {
    Pending,
    Finalized,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MempoolEntry {
    pub tx: Hash32,
    pub request: RequestId,
    pub inclusion_height: u64,
    pub via_compact: bool,
    pub status: EntryStatus,
}

/// True when an entry included at `inclusion_height` is final at `current_height`.
pub fn is_final(via_compact: bool, inclusion_height: u64, current_height: u64) -> bool {
    via_compact || current_height >= inclusion_height.saturating_add(FINALITY_DEPTH)
}

/// A candidate for the pool together with the result of its admission check.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub tx: Hash32,
    pub request: RequestId,
    pub via_compact: bool,
    pub admission: Result<(), LedgerError>,
}

#[derive(Debug, Clone, Default)]
pub struct XChainMempool {
    entries: Vec<MempoolEntry>,
}

impl XChainMempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[MempoolEntry] {
        &self.entries
    }

    pub fn pending(&self) -> impl Iterator<Item = &MempoolEntry> {
        self.entries
            .iter()
            .filter(|e| e.status == EntryStatus::Pending)
    }

    pub fn has_pending(&self) -> bool {
        self.pending().next().is_some()
    }

    pub fn get(&self, tx: &Hash32) -> Option<&MempoolEntry> {
        self.entries.iter().find(|e| e.tx == *tx)
    }

    pub fn submit(
        &mut self,
        candidate: Candidate,
        current_height: u64,
    ) -> Result<MempoolEntry, MempoolError> {
        candidate
            .admission
            .map_err(MempoolError::AdmissionRefused)?;
        if self.get(&candidate.tx).is_some() {
            return Err(MempoolError::Duplicate);
        }
        let entry = MempoolEntry {
            tx: candidate.tx,
            request: candidate.request,
            inclusion_height: current_height,
            via_compact: candidate.via_compact,
            status: EntryStatus::Pending,
        };
        self.entries.push(entry);
        Ok(entry)
    }

    /// Marks a pending entry as rejected. Returns false if it was not pending.
    pub fn reject(&mut self, tx: &Hash32) -> bool {
        match self
            .entries
            .iter_mut()
            .find(|e| e.tx == *tx && e.status == EntryStatus::Pending)
        {
            Some(e) => {
                e.status = EntryStatus::Rejected;
                true
            }
            None => false,
        }
    }

    /// Finalizes every pending entry that has reached finality and returns
    /// them in submission order.
    pub fn finalize_ready(&mut self, current_height: u64) -> Vec<MempoolEntry> {
        let mut done = Vec::new();
        for e in &mut self.entries {
            if e.status == EntryStatus::Pending
                && is_final(e.via_compact, e.inclusion_height, current_height)
            {
                e.status = EntryStatus::Finalized;
                done.push(*e);
            }
        }
        done
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::Hash32;

    fn cand(n: u8, via_compact: bool) -> Candidate {
        Candidate {
            tx: Hash32([n; 32]),
            request: Hash32([n; 32]),
            via_compact,
            admission: Ok(()),
        }
    }

    #[test]
    fn default_path_is_pending() {
        let mut m = XChainMempool::new();
        let e = m.submit(cand(1, false), 10).unwrap();
        assert_eq!(e.status, EntryStatus::Pending);
        assert_eq!(e.inclusion_height, 10);
        assert!(!e.via_compact);
        assert!(m.submit(cand(2, true), 10).unwrap().via_compact);
        assert_eq!(m.submit(cand(1, false), 11), Err(MempoolError::Duplicate));
    }

    #[test]
    fn refused_admission_propagates() {
        let mut m = XChainMempool::new();
        let mut c = cand(1, false);
        c.admission = Err(LedgerError::InsufficientFunds { need: 15, have: 14 });
        assert!(matches!(
            m.submit(c, 0),
            Err(MempoolError::AdmissionRefused(_))
        ));
        assert!(m.entries().is_empty());
    }

    #[test]
    fn six_block_rule() {
        let mut m = XChainMempool::new();
        m.submit(cand(1, false), 10).unwrap();
        assert!(m.finalize_ready(15).is_empty());
        let done = m.finalize_ready(16);
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].status, EntryStatus::Finalized);
        assert!(m.finalize_ready(17).is_empty());
    }

    #[test]
    fn compact_bypass_is_immediate() {
        let mut m = XChainMempool::new();
        m.submit(cand(1, true), 1_000).unwrap();
        assert_eq!(m.finalize_ready(1_000).len(), 1);
    }

    #[test]
    fn rejected_entries_never_finalize() {
        let mut m = XChainMempool::new();
        m.submit(cand(1, true), 3).unwrap();
        assert!(m.reject(&Hash32([1; 32])));
        assert!(!m.reject(&Hash32([1; 32])));
        assert!(m.finalize_ready(100).is_empty());
        assert_eq!(m.entries()[0].status, EntryStatus::Rejected);
    }
}
