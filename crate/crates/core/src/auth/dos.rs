//! Invocation-flooding experiment against the prepaid-fee gate.
//!
//! An attacker with capital `A` fires invocations with destination costs
//! `c_1, c_2, ...`, one per tick, until the admission controller refuses
//! one. Each accepted invocation locks `f_base + c_i` and is settled as
//! executed at that same charge, so nothing is ever refunded and the
//! attacker's spend after `n` invocations is `T(n) = Σ (f_base + c_i)`.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Admission, AdmissionController, CollateralLedger, FeeError, FeeSchedule, SettleOutcome,
};
use crate::chain::GasSchedule;
use crate::primitives::{keccak256, Address, ChainId, Fee};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSchedule {
    Constant {
        cost: Fee,
    },
    /// Explicit costs; the attacker stops when the list runs out.
    Listed {
        costs: Vec<Fee>,
    },
    Arithmetic {
        start: Fee,
        step: Fee,
    },
}

impl CostSchedule {
    /// Cost of the `i`-th invocation (0-based).
    pub fn cost(&self, i: usize) -> Option<Fee> {
        match self {
            CostSchedule::Constant { cost } => Some(*cost),
            CostSchedule::Listed { costs } => costs.get(i).copied(),
            CostSchedule::Arithmetic { start, step } => {
                Some(start.saturating_add(step.saturating_mul(i as Fee)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoSExperimentConfig {
    pub attacker_capital: Fee,
    pub f_base: Fee,
    pub costs: CostSchedule,
    /// Destination computational capacity per window, if bounded.
    #[serde(default)]
    pub comp_max: Option<Fee>,
    /// Window length in ticks.
    #[serde(default = "default_window")]
    pub window: u64,
}

fn default_window() -> u64 {
    10
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DoSConfigError {
    #[error(transparent)]
    Fee(#[from] FeeError),
    #[error("window must be positive")]
    ZeroWindow,
    #[error("comp_max must be positive")]
    ZeroCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub n: u64,
    pub cost: Fee,
    pub total_cost: Fee,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DoSReport {
    /// `max { n | T(n) ≤ A }` from a direct scan of the cost schedule.
    pub n_star: u64,
    pub accepted: u64,
    pub refused: u64,
    pub total_cost_curve: Vec<CurvePoint>,
    pub peak_window_load: Fee,
    pub capacity_exceeded: bool,
    pub fee_conserved: bool,
}

impl DoSReport {
    pub fn write_curve_csv<W: io::Write>(&self, out: W, capital: Fee) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "cost", "total_cost", "capital"])?;
        for p in &self.total_cost_curve {
            w.serialize((p.n, p.cost, p.total_cost, capital))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest `n` with `Σ_{i<n} (f_base + c_i) ≤ capital`.
pub fn n_star(capital: Fee, f_base: Fee, costs: &CostSchedule) -> u64 {
    let mut total: Fee = 0;
    let mut n = 0;
    while let Some(c) = costs.cost(n as usize) {
        match total.checked_add(f_base.saturating_add(c)) {
            Some(t) if t <= capital => {
                total = t;
                n += 1;
            }
            _ => break,
        }
        if f_base == 0 && c == 0 {
            // Free invocations would never exhaust the capital.
            break;
        }
    }
    n
}

/// Drives the ledger and admission controller through a flood and reports
/// how many invocations got through.
pub fn run_dos_experiment(cfg: &DoSExperimentConfig) -> Result<DoSReport, DoSConfigError> {
    let schedule = FeeSchedule {
        f_base: cfg.f_base,
        gas: GasSchedule {
            per_call: 0,
            per_write: 0,
        },
        multiplier: 1,
    };
    schedule.validate()?;
    if cfg.window == 0 {
        return Err(DoSConfigError::ZeroWindow);
    }
    if cfg.comp_max == Some(0) {
        return Err(DoSConfigError::ZeroCapacity);
    }

    let source = ChainId::from_label("attacker").expect("static label");
    let dest = ChainId::from_label("victim").expect("static label");
    let attacker = (source, Address::from_low_u64(0xbad));
    let mut ledger = CollateralLedger::new();
    ledger.fund_user(attacker, cfg.attacker_capital);
    // Collateral covering every possible charge.
    ledger.open_channel(source, dest, cfg.attacker_capital);
    let mut gate = AdmissionController::new(schedule);

    let mut curve = Vec::new();
    let mut refused = 0;
    let mut loads: Vec<Fee> = Vec::new();
    let mut i: usize = 0;
    while let Some(c) = cfg.costs.cost(i) {
        let request = keccak256(&(i as u64).to_be_bytes());
        match gate.admission_check(&mut ledger, attacker, request, dest, c) {
            Admission::Accepted { .. } => {
                ledger
                    .hold_collateral(&request)
                    .expect("collateral sized to capital");
                let window = i / cfg.window as usize;
                if loads.len() <= window {
                    loads.resize(window + 1, 0);
                }
                loads[window] += c;
                ledger
                    .settle_or_refund(
                        &request,
                        SettleOutcome::Executed {
                            cost: cfg.f_base + c,
                        },
                    )
                    .expect("fresh lock");
                curve.push(CurvePoint {
                    n: i as u64 + 1,
                    cost: c,
                    total_cost: gate.tally(&attacker).total_cost,
                });
            }
            Admission::Refused(_) => {
                refused += 1;
                break;
            }
        }
        i += 1;
    }

    let peak = loads.iter().copied().max().unwrap_or(0);
    Ok(DoSReport {
        n_star: n_star(cfg.attacker_capital, cfg.f_base, &cfg.costs),
        accepted: gate.tally(&attacker).accepted,
        refused,
        total_cost_curve: curve,
        peak_window_load: peak,
        capacity_exceeded: cfg.comp_max.is_some_and(|m| peak > m),
        fee_conserved: ledger.total() == ledger.genesis_total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: Fee, f: Fee, costs: CostSchedule) -> DoSExperimentConfig {
        DoSExperimentConfig {
            attacker_capital: a,
            f_base: f,
            costs,
            comp_max: None,
            window: 10,
        }
    }

    #[test]
    fn worked_case() {
        let r = run_dos_experiment(&cfg(1000, 10, CostSchedule::Constant { cost: 5 })).unwrap();
        assert_eq!((r.accepted, r.refused, r.n_star), (66, 1, 66));
        assert_eq!(r.total_cost_curve.last().unwrap().total_cost, 990);
        assert!(r.fee_conserved);
    }

    #[test]
    fn capital_below_base_fee() {
        let r = run_dos_experiment(&cfg(9, 10, CostSchedule::Constant { cost: 0 })).unwrap();
        assert_eq!((r.accepted, r.refused), (0, 1));
        assert!(r.total_cost_curve.is_empty());
    }

    #[test]
    fn listed_schedule_may_run_out() {
        let r = run_dos_experiment(&cfg(
            1000,
            1,
            CostSchedule::Listed {
                costs: vec![1, 2, 3],
            },
        ))
        .unwrap();
        assert_eq!((r.accepted, r.refused, r.n_star), (3, 0, 3));
    }

    #[test]
    fn capacity_tracking() {
        let mut c = cfg(1000, 10, CostSchedule::Constant { cost: 5 });
        c.comp_max = Some(50);
        c.window = 10;
        let r = run_dos_experiment(&c).unwrap();
        assert_eq!(r.peak_window_load, 50);
        assert!(!r.capacity_exceeded);
        c.comp_max = Some(49);
        assert!(run_dos_experiment(&c).unwrap().capacity_exceeded);
    }

    #[test]
    fn config_validation() {
        assert!(run_dos_experiment(&cfg(10, 0, CostSchedule::Constant { cost: 1 })).is_err());
        let mut c = cfg(10, 1, CostSchedule::Constant { cost: 1 });
        c.window = 0;
        assert_eq!(run_dos_experiment(&c), Err(DoSConfigError::ZeroWindow));
    }

    #[test]
    fn curve_csv() {
        let r = run_dos_experiment(&cfg(45, 10, CostSchedule::Constant { cost: 5 })).unwrap();
        let mut buf = Vec::new();
        r.write_curve_csv(&mut buf, 45).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,cost,total_cost,capital\n1,5,15,45\n2,5,30,45\n3,5,45,45\n"
        );
    }
}
