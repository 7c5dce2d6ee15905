//! Named end-to-end scenarios. Each runs to quiescence and returns its
//! metrics together with a list of pass/fail checks.

mod fuzz;
mod metrics;

pub use fuzz::{run_isolation_fuzz, FuzzCall, FuzzReport, Repro};
pub use metrics::{ChainDigest, MetricsRecord, RequestMetric, METRICS_HEADER};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::auth::{
    run_dos_experiment, CostSchedule, DoSConfigError, DoSExperimentConfig, DoSReport,
};
use crate::chain::contract::library;
use crate::codec::encode_words;
use crate::compact::AccessMode;
use crate::config::{ContractRef, ScenarioName, SimConfig, USER};
use crate::message::{Callback, ExternalContract};
use crate::netsim::{rng_for, Trace};
use crate::primitives::{Address, ChainId, Selector, Word};
use crate::router::Terminal;
use crate::sim::{Action, SimError, Simulation, DEFAULT_EVENT_BUDGET};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    DoS(#[from] DoSConfigError),
    #[error("scenario needs `{0}` in the scenario section")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn eq<T: PartialEq + std::fmt::Debug>(name: &str, got: T, want: T) -> Self {
        let passed = got == want;
        Check::new(name, passed, format!("got {got:?}, want {want:?}"))
    }
}

pub struct ScenarioOutcome {
    pub metrics: MetricsRecord,
    pub checks: Vec<Check>,
    pub trace: Trace,
    pub sim: Option<Simulation>,
    pub dos: Option<DoSReport>,
    pub fuzz: Option<FuzzReport>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Runs the scenario named in `cfg.scenario` with the given seed.
pub fn run(cfg: &SimConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    match cfg.scenario.name {
        ScenarioName::ReadPattern => run_read_scenario(cfg, seed),
        ScenarioName::WritePattern => run_write_scenario(cfg, seed),
        ScenarioName::DosFlood => run_dos_scenario(cfg, seed),
        ScenarioName::IsolationFuzz => run_isolation_fuzz(cfg, seed),
        ScenarioName::Soak => run_soak(cfg, seed),
    }
}

fn roles(cfg: &SimConfig) -> Result<(ContractRef, ContractRef, Address), ScenarioError> {
    let s = &cfg.scenario;
    Ok((
        s.provider.ok_or(ScenarioError::Missing("provider"))?,
        s.consumer.ok_or(ScenarioError::Missing("consumer"))?,
        s.user.unwrap_or(USER),
    ))
}

fn read_request(provider: ContractRef, consumer: ContractRef, user: Address) -> Action {
    Action::Transact {
        sender: user,
        target: consumer.address,
        selector: Selector::from_signature(library::REQUEST_VALUE),
        params: encode_words(&[Word::from(provider.chain), provider.address.to_word()]),
    }
}

fn write_request(
    provider: ContractRef,
    consumer: ContractRef,
    user: Address,
    value: u64,
) -> Action {
    Action::Transact {
        sender: user,
        target: consumer.address,
        selector: Selector::from_signature(library::UPDATE_REMOTE_VALUE),
        params: encode_words(&[
            Word::from(provider.chain),
            provider.address.to_word(),
            Word::from_u64(value),
        ]),
    }
}

/// Checks every scenario must pass once the simulation has drained.
pub fn standard_checks(sim: &Simulation, metrics: &MetricsRecord) -> Vec<Check> {
    let dirty: Vec<String> = sim
        .consistency()
        .into_iter()
        .filter(|(_, r)| !r.is_consistent())
        .map(|(c, r)| format!("{c}: {} mismatches", r.mismatches.len()))
        .collect();
    let delivered = metrics
        .requests
        .iter()
        .filter(|r| !matches!(r.outcome, "dropped" | "unknown_chain"))
        .count();
    vec![
        Check::eq("quiescent", sim.is_quiescent(), true),
        Check::new("consistency", dirty.is_empty(), dirty.join("; ")),
        Check::new(
            "fee_conservation",
            sim.fee_conserved(),
            format!(
                "total {} vs genesis {}",
                sim.ledger().total(),
                sim.ledger().genesis_total()
            ),
        ),
        Check::eq("all_requests_terminal", sim.unresolved(), 0),
        Check::new(
            "no_invariant_breaches",
            sim.violations().is_empty(),
            sim.violations().join("; "),
        ),
        Check::eq(
            "s_main_isolation_violations",
            sim.isolation().violations(),
            0,
        ),
        Check::new(
            "counts_reconcile",
            metrics.reconciles(),
            format!(
                "accepted {} + refused {} + router errors {} vs attempted {}",
                metrics.accepted, metrics.refused, metrics.router_errors, metrics.attempted
            ),
        ),
        Check::eq(
            "trace_deliveries_match",
            sim.trace().count("deliver"),
            delivered,
        ),
    ]
}

fn outcome(
    name: ScenarioName,
    seed: u64,
    sim: Simulation,
    mut checks: Vec<Check>,
) -> ScenarioOutcome {
    let metrics = MetricsRecord::from_sim(name, seed, &sim);
    let mut all = standard_checks(&sim, &metrics);
    all.append(&mut checks);
    ScenarioOutcome {
        metrics,
        checks: all,
        trace: sim.trace().clone(),
        sim: Some(sim),
        dos: None,
        fuzz: None,
    }
}

fn exposed_rw(cfg: &SimConfig, at: ContractRef, signature: &str) -> bool {
    let sel = Selector::from_signature(signature);
    cfg.exposure.iter().any(|e| {
        e.chain == at.chain
            && e.contract == at.address
            && e.selector() == sel
            && e.mode == AccessMode::ReadWrite
    })
}

/// The consumer asks the provider for its stored value and records the
/// answer in `retrievedValue`.
pub fn run_read_scenario(cfg: &SimConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    let (provider, consumer, user) = roles(cfg)?;
    let mut sim = Simulation::new(cfg, seed)?;
    let expected = sim.read_main(&provider.chain, &provider.address, 0);
    sim.schedule(1, consumer.chain, read_request(provider, consumer, user))?;
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)?;

    let got = sim.read_main(&consumer.chain, &consumer.address, 0);
    let mut checks = vec![Check::eq("retrieved_value", got, expected)];
    checks.push(Check::eq(
        "retrieved_value_compact",
        sim.read_compact(&consumer.chain, &consumer.address, 0),
        expected,
    ));
    let mut out = outcome(ScenarioName::ReadPattern, seed, sim, checks);
    out.metrics
        .extra
        .insert("retrieved_value".into(), got.to_string());
    Ok(out)
}

/// The consumer asks the provider to store a value and records the
/// acknowledgement in `writeSuccessful`.
pub fn run_write_scenario(cfg: &SimConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    let (provider, consumer, user) = roles(cfg)?;
    let value = cfg.scenario.value.unwrap_or(99);
    let mut sim = Simulation::new(cfg, seed)?;
    let before = sim.read_main(&provider.chain, &provider.address, 0);
    sim.schedule(
        1,
        consumer.chain,
        write_request(provider, consumer, user, value),
    )?;
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)?;

    let stored_main = sim.read_main(&provider.chain, &provider.address, 0);
    let stored_compact = sim.read_compact(&provider.chain, &provider.address, 0);
    let ack = sim.read_main(&consumer.chain, &consumer.address, 0);
    let writable = exposed_rw(cfg, provider, library::SET_VALUE);
    let want = if writable {
        Word::from_u64(value)
    } else {
        before
    };
    let mut checks = vec![
        Check::eq("stored_value_main", stored_main, want),
        Check::eq("stored_value_compact", stored_compact, want),
        Check::eq("write_successful", ack, Word::from_bool(writable)),
    ];
    if !writable {
        let root = sim.requests().next().map(|r| r.terminal.clone());
        let refused = matches!(root, Some(Some((_, Terminal::Failed(_)))));
        checks.push(Check::new(
            "policy_refused_write",
            refused,
            format!("{root:?}"),
        ));
        let settled = sim.ledger().settlements().first().copied();
        checks.push(Check::new(
            "settled_failed",
            settled.is_some_and(|s| s.charged == 0 && s.burned > 0),
            format!("{settled:?}"),
        ));
    }
    let mut out = outcome(ScenarioName::WritePattern, seed, sim, checks);
    out.metrics
        .extra
        .insert("stored_value".into(), stored_main.to_string());
    out.metrics
        .extra
        .insert("write_successful".into(), (!ack.is_zero()).to_string());
    Ok(out)
}

/// Prefix-sum oracle and ledger-level flood, cross-checked with a full
/// simulation when the per-invocation cost is constant.
pub fn run_dos_scenario(cfg: &SimConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    let dos = cfg
        .scenario
        .dos
        .clone()
        .ok_or(ScenarioError::Missing("dos"))?;
    let report = run_dos_experiment(&dos)?;
    let mut checks = vec![
        Check::eq("accepted_equals_n_star", report.accepted, report.n_star),
        Check::eq("ledger_fee_conservation", report.fee_conserved, true),
    ];
    let (sim, flood_checks) = match dos.costs {
        CostSchedule::Constant { cost } => {
            let (sim, c) = flood(cfg, &dos, cost, report.n_star, seed)?;
            (Some(sim), c)
        }
        _ => (None, Vec::new()),
    };
    checks.extend(flood_checks);
    let mut out = match sim {
        Some(sim) => outcome(ScenarioName::DosFlood, seed, sim, checks),
        None => ScenarioOutcome {
            metrics: MetricsRecord::new(ScenarioName::DosFlood, seed),
            checks,
            trace: Trace::new(),
            sim: None,
            dos: None,
            fuzz: None,
        },
    };
    out.metrics
        .extra
        .insert("n_star".into(), report.n_star.to_string());
    out.metrics
        .extra
        .insert("ledger_accepted".into(), report.accepted.to_string());
    out.metrics.extra.insert(
        "peak_window_load".into(),
        report.peak_window_load.to_string(),
    );
    out.dos = Some(report);
    Ok(out)
}

/// Extra attempts beyond `n*` in the simulated flood.
const FLOOD_OVERSHOOT: u64 = 5;

fn flood(
    cfg: &SimConfig,
    dos: &DoSExperimentConfig,
    cost: u64,
    n_star: u64,
    seed: u64,
) -> Result<(Simulation, Vec<Check>), ScenarioError> {
    let (provider, consumer, attacker) = roles(cfg)?;
    let mut cfg = cfg.clone();
    cfg.fees.schedule.f_base = dos.f_base;
    cfg.fees.schedule.gas.per_call = cost;
    cfg.fees.schedule.gas.per_write = 0;
    cfg.fees.schedule.multiplier = 1;
    cfg.fees
        .accounts
        .retain(|a| (a.chain, a.address) != (consumer.chain, attacker));
    cfg.fees.accounts.push(crate::config::AccountSpec {
        chain: consumer.chain,
        address: attacker,
        balance: dos.attacker_capital,
    });
    let mut sim = Simulation::new(&cfg, seed)?;
    let attempts = n_star + FLOOD_OVERSHOOT;
    for _ in 0..attempts {
        sim.schedule(
            1,
            consumer.chain,
            Action::RouterCall {
                sender: attacker,
                target_chain: provider.chain,
                target: ExternalContract {
                    contract_address: provider.address,
                    function_selector: Selector::from_signature(library::GET_VALUE),
                    params: Vec::new(),
                },
                callback: Callback::NONE,
            },
        )?;
    }
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)?;
    let tally = sim.admission().tally(&(consumer.chain, attacker));
    let checks = vec![
        Check::eq("flood_accepted_equals_n_star", tally.accepted, n_star),
        Check::eq("flood_refused", tally.refused, FLOOD_OVERSHOOT),
        Check::eq(
            "flood_attacker_spent",
            dos.attacker_capital - sim.ledger().balance(&(consumer.chain, attacker)),
            n_star * (dos.f_base + cost),
        ),
    ];
    Ok((sim, checks))
}

/// Interleaved read and write round trips under the configured transport,
/// for throughput and latency regression.
pub fn run_soak(cfg: &SimConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    let (provider, consumer, user) = roles(cfg)?;
    let rounds = cfg.scenario.rounds.unwrap_or(100);
    let writer = find_pair(cfg, consumer.chain, provider.chain);
    let mut sim = Simulation::new(cfg, seed)?;
    let mut rng = rng_for(seed, "soak");
    let horizon = rounds.max(1) * 2;
    let mut last_write = None;
    for i in 0..rounds {
        let t = rng.random_range(1..=horizon);
        sim.schedule(t, consumer.chain, read_request(provider, consumer, user))?;
        if let Some((wp, wc)) = writer {
            let v = i + 1;
            let t = rng.random_range(1..=horizon);
            sim.schedule(t, consumer.chain, write_request(wp, wc, user, v))?;
            last_write = Some(wp);
        }
    }
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)?;

    let end_tick = sim.tick().max(1);
    let mut out = outcome(ScenarioName::Soak, seed, sim, Vec::new());
    let lat = out.metrics.root_latencies();
    let completed = lat.len() as u64;
    let mean = if lat.is_empty() {
        0.0
    } else {
        lat.iter().sum::<u64>() as f64 / lat.len() as f64
    };
    let max = lat.iter().copied().max().unwrap_or(0);
    let ex = &mut out.metrics.extra;
    ex.insert("rounds".into(), rounds.to_string());
    ex.insert("end_tick".into(), end_tick.to_string());
    ex.insert(
        "requests_per_kilotick".into(),
        format!("{:.3}", completed as f64 * 1000.0 / end_tick as f64),
    );
    ex.insert("mean_latency".into(), format!("{mean:.3}"));
    ex.insert("max_latency".into(), max.to_string());
    if let Some(wp) = last_write {
        ex.insert("writer".into(), wp.address.to_string());
    }
    Ok(out)
}

/// A writable provider on `provider_chain` and a write consumer on
/// `consumer_chain`, if the config has them.
fn find_pair(
    cfg: &SimConfig,
    consumer_chain: ChainId,
    provider_chain: ChainId,
) -> Option<(ContractRef, ContractRef)> {
    use crate::config::ContractTemplate as T;
    let find = |chain: ChainId, pred: fn(&T) -> bool| {
        cfg.contracts
            .iter()
            .find(|c| c.chain == chain && pred(&c.template))
            .map(|c| ContractRef {
                chain,
                address: c.address,
            })
    };
    Some((
        find(provider_chain, |t| matches!(t, T::ProviderWrite { .. }))?,
        find(consumer_chain, |t| matches!(t, T::ConsumerWrite))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_passed(out: &ScenarioOutcome) {
        let failed: Vec<_> = out.failures().collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn read_pattern_default() {
        let out = run_read_scenario(&SimConfig::read_pattern(), 1).unwrap();
        assert_passed(&out);
        assert_eq!(out.metrics.extra["retrieved_value"], "42");
        assert_eq!(out.metrics.accepted, 1);
    }

    #[test]
    fn read_pattern_zero_value() {
        let mut cfg = SimConfig::read_pattern();
        cfg.contracts[0].template = crate::config::ContractTemplate::ProviderRead { stored: 0 };
        let out = run_read_scenario(&cfg, 1).unwrap();
        assert_passed(&out);
        assert_eq!(out.metrics.extra["retrieved_value"], "0");
    }

    #[test]
    fn write_pattern_default() {
        let out = run_write_scenario(&SimConfig::write_pattern(), 1).unwrap();
        assert_passed(&out);
        assert_eq!(out.metrics.extra["stored_value"], "99");
        assert_eq!(out.metrics.extra["write_successful"], "true");
    }

    #[test]
    fn write_of_zero_still_writes() {
        let mut cfg = SimConfig::write_pattern();
        cfg.scenario.value = Some(0);
        let out = run_write_scenario(&cfg, 1).unwrap();
        assert_passed(&out);
        let sim = out.sim.as_ref().unwrap();
        let a = crate::config::chain("A");
        let compact_writes: usize = sim
            .compact(&a)
            .blocks()
            .iter()
            .map(|b| b.entries.len())
            .sum();
        assert!(compact_writes > 0);
        assert_eq!(out.metrics.extra["write_successful"], "true");
    }

    #[test]
    fn write_pattern_read_only_policy() {
        let mut cfg = SimConfig::write_pattern();
        cfg.exposure[0].mode = AccessMode::ReadOnly;
        let out = run_write_scenario(&cfg, 1).unwrap();
        assert_passed(&out);
        assert_eq!(out.metrics.extra["write_successful"], "false");
    }

    #[test]
    fn dos_default() {
        let out = run_dos_scenario(&SimConfig::dos_flood(), 1).unwrap();
        assert_passed(&out);
        assert_eq!(out.dos.as_ref().unwrap().n_star, 66);
    }

    #[test]
    fn soak_small() {
        let mut cfg = SimConfig::soak();
        cfg.scenario.rounds = Some(20);
        let out = run_soak(&cfg, 3).unwrap();
        assert_passed(&out);
        assert!(out.metrics.accepted >= 40);
    }
}
