use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::ChainId;

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("no enode registered for chain {0}")]
pub struct UnknownChain(pub ChainId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnodeRecord {
    pub chain: ChainId,
    pub endpoint: String,
    pub public: bool,
}

/// Maps chain ids to peer endpoints. One record per chain.
#[derive(Debug, Clone, Default)]
pub struct EnodeRegistry {
    records: BTreeMap<ChainId, EnodeRecord>,
}

impl EnodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the record for `record.chain` and returns the
    /// one it replaced.
    pub fn register_enode(&mut self, record: EnodeRecord) -> Option<EnodeRecord> {
        let chain = record.chain;
        let old = self.records.insert(chain, record);
        if let Some(prev) = &old {
            log::info!(
                "enode for {chain} replaced: {} -> {}",
                prev.endpoint,
                self.records[&chain].endpoint
            );
        }
        old
    }

    pub fn resolve(&self, chain: &ChainId) -> Result<&str, UnknownChain> {
        self.records
            .get(chain)
            .map(|r| r.endpoint.as_str())
            .ok_or(UnknownChain(*chain))
    }

    pub fn record(&self, chain: &ChainId) -> Option<&EnodeRecord> {
        self.records.get(chain)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: &str, endpoint: &str) -> EnodeRecord {
        EnodeRecord {
            chain: ChainId::from_label(label).unwrap(),
            endpoint: endpoint.into(),
            public: true,
        }
    }

    #[test]
    fn register_and_resolve() {
        let mut r = EnodeRegistry::new();
        assert!(r.register_enode(rec("A", "enode://a")).is_none());
        r.register_enode(rec("B", "enode://b"));
        let b = ChainId::from_label("B").unwrap();
        assert_eq!(r.resolve(&b), Ok("enode://b"));
        let z = ChainId::from_label("Z").unwrap();
        assert_eq!(r.resolve(&z), Err(UnknownChain(z)));
    }

    #[test]
    fn latest_registration_wins() {
        let mut r = EnodeRegistry::new();
        r.register_enode(rec("A", "enode://old"));
        let prev = r.register_enode(rec("A", "enode://new")).unwrap();
        assert_eq!(prev.endpoint, "enode://old");
        assert_eq!(
            r.resolve(&ChainId::from_label("A").unwrap()),
            Ok("enode://new")
        );
        assert_eq!(r.len(), 1);
    }
}
