//! Cross-chain authorization layer: prepaid fee locks, collateral
//! accounts, and the XChain mempool.

pub mod dos;
pub mod fees;
pub mod ledger;
pub mod mempool;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::primitives::{ChainId, Fee, RequestId};

pub use dos::{
    n_star, run_dos_experiment, CostSchedule, CurvePoint, DoSConfigError, DoSExperimentConfig,
    DoSReport,
};
pub use fees::{FeeError, FeeSchedule};
pub use ledger::{
    CollateralLedger, LedgerError, LedgerTotals, Lock, Payer, SettleOutcome, Settlement,
};
pub use mempool::{
    is_final, Candidate, EntryStatus, MempoolEntry, MempoolError, XChainMempool, FINALITY_DEPTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Admission {
    Accepted { locked: Fee },
    Refused(LedgerError),
}

impl Admission {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Admission::Accepted { .. })
    }
}

/// Running totals for one sender: invocations let through, invocations
/// refused, and the cumulative prepaid cost `T(n)` of the accepted ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SenderTally {
    pub accepted: u64,
    pub refused: u64,
    pub total_cost: Fee,
}

/// Source-side gatekeeper. An invocation is admitted exactly when its
/// prepaid fee can be locked.
#[derive(Debug, Clone)]
pub struct AdmissionController {
    schedule: FeeSchedule,
    tallies: BTreeMap<Payer, SenderTally>,
}

impl AdmissionController {
    pub fn new(schedule: FeeSchedule) -> Self {
        AdmissionController {
            schedule,
            tallies: BTreeMap::new(),
        }
    }

    pub fn schedule(&self) -> &FeeSchedule {
        &self.schedule
    }

    pub fn tally(&self, payer: &Payer) -> SenderTally {
        self.tallies.get(payer).copied().unwrap_or_default()
    }

    pub fn tallies(&self) -> &BTreeMap<Payer, SenderTally> {
        &self.tallies
    }

    pub fn admission_check(
        &mut self,
        ledger: &mut CollateralLedger,
        payer: Payer,
        request: RequestId,
        dest: ChainId,
        estimated_cd: Fee,
    ) -> Admission {
        let tally = self.tallies.entry(payer).or_default();
        match ledger.lock_fee(payer, request, dest, estimated_cd, &self.schedule) {
            Ok(locked) => {
                tally.accepted += 1;
                tally.total_cost += locked;
                Admission::Accepted { locked }
            }
            Err(e) => {
                tally.refused += 1;
                Admission::Refused(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::GasSchedule;
    use crate::primitives::{keccak256, Address};

    #[test]
    fn honest_sender_accepted_and_tallied() {
        let a = ChainId::from_label("A").unwrap();
        let b = ChainId::from_label("B").unwrap();
        let payer = (b, Address::from_low_u64(1));
        let mut ledger = CollateralLedger::new();
        ledger.fund_user(payer, 1_000_000);
        let mut ac = AdmissionController::new(FeeSchedule {
            f_base: 10,
            gas: GasSchedule {
                per_call: 5,
                per_write: 0,
            },
            multiplier: 1,
        });
        for i in 0..3u8 {
            let adm = ac.admission_check(&mut ledger, payer, keccak256(&[i]), a, 5);
            assert_eq!(adm, Admission::Accepted { locked: 15 });
        }
        assert_eq!(
            ac.tally(&payer),
            SenderTally {
                accepted: 3,
                refused: 0,
                total_cost: 45
            }
        );
    }

    #[test]
    fn poor_sender_refused() {
        let a = ChainId::from_label("A").unwrap();
        let payer = (a, Address::from_low_u64(1));
        let mut ledger = CollateralLedger::new();
        ledger.fund_user(payer, 9);
        let mut ac = AdmissionController::new(FeeSchedule::default());
        let adm = ac.admission_check(&mut ledger, payer, keccak256(b"x"), a, 0);
        assert!(!adm.is_accepted());
        assert_eq!(ac.tally(&payer).refused, 1);
    }
}
