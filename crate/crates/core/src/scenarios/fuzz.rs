//! Randomized isolation check: a mix of authorized and unauthorized
//! cross-chain calls must never change `S_main` outside mirror
//! transactions, and no unauthorized call may execute.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{standard_checks, Check, MetricsRecord, ScenarioError, ScenarioOutcome};
use crate::chain::contract::library;
use crate::codec::encode_words;
use crate::compact::AccessMode;
use crate::config::{ScenarioName, SimConfig, USER};
use crate::message::{Callback, ExternalContract};
use crate::netsim::{rng_for, sub_seed, Trace};
use crate::primitives::{Address, ChainId, Hash32, Selector, Word};
use crate::router::{FailureReason, Terminal};
use crate::sim::{Action, Simulation, DEFAULT_EVENT_BUDGET};

/// One generated router invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FuzzCall {
    pub tick: u64,
    pub from: ChainId,
    pub to: ChainId,
    pub contract: Address,
    pub selector: Selector,
    pub params: Vec<Word>,
    pub callback: Option<(Address, Selector)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Repro {
    pub batch: u64,
    pub seed: u64,
    pub calls: Vec<FuzzCall>,
    pub trace: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FuzzReport {
    pub iterations: u64,
    pub batches: u64,
    /// Executions of pairs the harness classifies as authorized.
    pub authorized_executions: u64,
    /// Legs that ended in a policy rejection.
    pub unauthorized_rejected: u64,
    /// Executions of pairs the harness classifies as unauthorized.
    pub unauthorized_accepted: u64,
    pub s_main_violations: u64,
    /// Batches whose final `S_main` differs from genesis on some chain.
    pub batches_with_main_changes: u64,
    pub mirror_blocks: u64,
    pub failed_checks: Vec<String>,
    pub repro: Option<Repro>,
}

/// The harness's own view of what may run: exposed pairs, and whether the
/// exposure allows the function's writes.
struct Oracle {
    allowed: BTreeSet<(ChainId, Address, Selector)>,
}

impl Oracle {
    fn new(cfg: &SimConfig) -> Self {
        let mut allowed = BTreeSet::new();
        for e in &cfg.exposure {
            let Some(spec) = cfg.contract_spec(&e.chain, &e.contract) else {
                continue;
            };
            let sel = e.selector();
            let writes = spec
                .build()
                .function(&sel)
                .map(|f| f.body.declared_writes() > 0)
                .unwrap_or(false);
            if !writes || e.mode == AccessMode::ReadWrite {
                allowed.insert((e.chain, e.contract, sel));
            }
        }
        Oracle { allowed }
    }

    fn allows(&self, chain: ChainId, contract: Address, selector: Selector) -> bool {
        self.allowed.contains(&(chain, contract, selector))
    }
}

struct Pools {
    chains: Vec<ChainId>,
    contracts: Vec<Address>,
    selectors: Vec<Selector>,
}

impl Pools {
    fn new(cfg: &SimConfig) -> Self {
        let mut contracts: BTreeSet<Address> = cfg.contracts.iter().map(|c| c.address).collect();
        contracts.insert(Address::ZERO);
        contracts.insert(Address::from_low_u64(0x99));
        let mut selectors: BTreeSet<Selector> = [
            library::GET_VALUE,
            library::SET_VALUE,
            library::STORED_VALUE,
            library::HANDLE_RESULT,
            library::REQUEST_VALUE,
        ]
        .iter()
        .map(|s| Selector::from_signature(s))
        .collect();
        selectors.extend(cfg.exposure.iter().map(|e| e.selector()));
        selectors.insert(Selector([0xde, 0xad, 0xbe, 0xef]));
        Pools {
            chains: cfg.chain_ids(),
            contracts: contracts.into_iter().collect(),
            selectors: selectors.into_iter().collect(),
        }
    }

    fn call(&self, rng: &mut ChaCha8Rng, horizon: u64) -> FuzzCall {
        let from = *self.chains.choose(rng).expect("chains");
        let to = *self
            .chains
            .iter()
            .filter(|c| **c != from)
            .collect::<Vec<_>>()
            .choose(rng)
            .copied()
            .unwrap_or(&from);
        let params = match rng.random_range(0..4) {
            0 => Vec::new(),
            1 | 2 => vec![Word::from_u64(rng.random_range(0..1000))],
            _ => vec![Word::from_u64(rng.random()), Word::from_u64(rng.random())],
        };
        let callback = rng.random_bool(0.4).then(|| {
            (
                *self.contracts.choose(rng).expect("contracts"),
                *self.selectors.choose(rng).expect("selectors"),
            )
        });
        FuzzCall {
            tick: rng.random_range(1..=horizon),
            from,
            to,
            contract: *self.contracts.choose(rng).expect("contracts"),
            selector: *self.selectors.choose(rng).expect("selectors"),
            params,
            callback,
        }
    }
}

fn schedule(sim: &mut Simulation, call: &FuzzCall) {
    let action = Action::RouterCall {
        sender: USER,
        target_chain: call.to,
        target: ExternalContract {
            contract_address: call.contract,
            function_selector: call.selector,
            params: encode_words(&call.params),
        },
        callback: match call.callback {
            Some((a, s)) => Callback::to(call.from, a, s),
            None => Callback::NONE,
        },
    };
    sim.schedule(call.tick, call.from, action)
        .expect("chain from config");
}

struct BatchResult {
    report: FuzzReport,
    trace: Trace,
    checks: Vec<Check>,
    metrics: MetricsRecord,
}

fn run_calls(
    cfg: &SimConfig,
    sim_seed: u64,
    calls: &[FuzzCall],
    oracle: &Oracle,
) -> Result<(Simulation, FuzzReport), ScenarioError> {
    let mut sim = Simulation::new(cfg, sim_seed)?;
    let genesis: Vec<Hash32> = sim.nodes().map(|(_, n)| n.main.s_main_digest()).collect();
    for c in calls {
        schedule(&mut sim, c);
    }
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)?;

    let mut r = FuzzReport {
        iterations: calls.len() as u64,
        batches: 1,
        s_main_violations: sim.isolation().violations(),
        mirror_blocks: sim.isolation().blocks_with_mirror_writes,
        ..FuzzReport::default()
    };
    for e in sim.executions() {
        if oracle.allows(e.chain, e.contract, e.selector) {
            r.authorized_executions += 1;
        } else {
            r.unauthorized_accepted += 1;
        }
    }
    r.unauthorized_rejected = sim
        .requests()
        .filter(|q| {
            matches!(
                q.terminal,
                Some((
                    _,
                    Terminal::Failed(
                        FailureReason::Unauthorized(_) | FailureReason::InvalidContractAddress
                    )
                ))
            )
        })
        .count() as u64;
    let end: Vec<Hash32> = sim.nodes().map(|(_, n)| n.main.s_main_digest()).collect();
    r.batches_with_main_changes = u64::from(end != genesis);
    Ok((sim, r))
}

fn run_batch(
    cfg: &SimConfig,
    seed: u64,
    batch: u64,
    count: u64,
    oracle: &Oracle,
    pools: &Pools,
) -> Result<BatchResult, ScenarioError> {
    let mut rng = rng_for(seed, &format!("fuzz/{batch}"));
    let horizon = (count / 4).max(1);
    let calls: Vec<FuzzCall> = (0..count).map(|_| pools.call(&mut rng, horizon)).collect();
    let sim_seed = sub_seed(seed, &format!("fuzz-sim/{batch}"));
    let (sim, mut report) = run_calls(cfg, sim_seed, &calls, oracle)?;
    let metrics = MetricsRecord::from_sim(ScenarioName::IsolationFuzz, seed, &sim);
    let checks = standard_checks(&sim, &metrics);
    report.failed_checks = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("batch {batch}: {}: {}", c.name, c.detail))
        .collect();
    if report.unauthorized_accepted + report.s_main_violations > 0 {
        report.repro = Some(minimize(cfg, sim_seed, batch, &calls, oracle, sim.trace()));
    }
    Ok(BatchResult {
        report,
        trace: sim.trace().clone(),
        checks,
        metrics,
    })
}

/// Shrinks a violating batch to the first single call that still
/// violates, falling back to the whole batch.
fn minimize(
    cfg: &SimConfig,
    sim_seed: u64,
    batch: u64,
    calls: &[FuzzCall],
    oracle: &Oracle,
    full: &Trace,
) -> Repro {
    for c in calls {
        let one = [FuzzCall {
            tick: 1,
            ..c.clone()
        }];
        if let Ok((sim, r)) = run_calls(cfg, sim_seed, &one, oracle) {
            if r.unauthorized_accepted + r.s_main_violations > 0 {
                return Repro {
                    batch,
                    seed: sim_seed,
                    calls: one.to_vec(),
                    trace: sim.trace().render(),
                };
            }
        }
    }
    Repro {
        batch,
        seed: sim_seed,
        calls: calls.to_vec(),
        trace: full.render(),
    }
}

/// Runs `iterations` random calls split into independent batches across
/// worker threads. Batch results merge in batch order.
pub fn run_isolation_fuzz(cfg: &SimConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    let iterations = cfg.scenario.iterations.unwrap_or(10_000);
    let batch_size = cfg.scenario.batch_size.unwrap_or(250).max(1);
    let batches = iterations.div_ceil(batch_size);
    let oracle = Oracle::new(cfg);
    let pools = Pools::new(cfg);

    let results: Vec<BatchResult> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = batch_size.min(iterations - b * batch_size);
            run_batch(cfg, seed, b, count, &oracle, &pools)
        })
        .collect::<Result<_, _>>()?;

    let mut report = FuzzReport::default();
    let mut trace = Trace::new();
    let mut metrics = MetricsRecord::new(ScenarioName::IsolationFuzz, seed);
    let mut standard_ok = true;
    for r in &results {
        let x = &r.report;
        report.iterations += x.iterations;
        report.batches += 1;
        report.authorized_executions += x.authorized_executions;
        report.unauthorized_rejected += x.unauthorized_rejected;
        report.unauthorized_accepted += x.unauthorized_accepted;
        report.s_main_violations += x.s_main_violations;
        report.batches_with_main_changes += x.batches_with_main_changes;
        report.mirror_blocks += x.mirror_blocks;
        report.failed_checks.extend(x.failed_checks.iter().cloned());
        if report.repro.is_none() {
            report.repro = x.repro.clone();
        }
        standard_ok &= r.checks.iter().all(|c| c.passed);
        for l in r.trace.lines() {
            trace.push(l.clone());
        }
        metrics.attempted += r.metrics.attempted;
        metrics.accepted += r.metrics.accepted;
        metrics.refused += r.metrics.refused;
        metrics.router_errors += r.metrics.router_errors;
        metrics.events += r.metrics.events;
        metrics.genesis_total += r.metrics.genesis_total;
        metrics.requests.extend(r.metrics.requests.iter().cloned());
    }
    metrics.trace_lines = trace.len();
    metrics.trace_digest = trace.digest();
    metrics
        .extra
        .insert("iterations".into(), report.iterations.to_string());
    metrics.extra.insert(
        "s_main_violations".into(),
        report.s_main_violations.to_string(),
    );
    metrics.extra.insert(
        "unauthorized_accepted".into(),
        report.unauthorized_accepted.to_string(),
    );
    metrics.extra.insert(
        "unauthorized_rejected".into(),
        report.unauthorized_rejected.to_string(),
    );

    let checks = vec![
        Check::eq("fuzz_iterations", report.iterations, iterations),
        Check::eq("s_main_violations", report.s_main_violations, 0),
        Check::eq("unauthorized_accepted", report.unauthorized_accepted, 0),
        Check::new(
            "batch_invariants",
            standard_ok,
            report.failed_checks.join("; "),
        ),
    ];
    Ok(ScenarioOutcome {
        metrics,
        checks,
        trace,
        sim: None,
        dos: None,
        fuzz: Some(report),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(iterations: u64) -> SimConfig {
        let mut cfg = SimConfig::isolation_fuzz();
        cfg.scenario.iterations = Some(iterations);
        cfg.scenario.batch_size = Some(100);
        cfg
    }

    #[test]
    fn small_fuzz_is_clean() {
        let out = run_isolation_fuzz(&small(400), 7).unwrap();
        let f = out.fuzz.as_ref().unwrap();
        assert!(out.passed(), "{:#?}", out.failures().collect::<Vec<_>>());
        assert_eq!(f.iterations, 400);
        assert!(f.authorized_executions > 0);
        assert!(f.unauthorized_rejected > 0);
        assert!(f.mirror_blocks > 0);
    }

    #[test]
    fn fuzz_is_deterministic() {
        let a = run_isolation_fuzz(&small(200), 3).unwrap();
        let b = run_isolation_fuzz(&small(200), 3).unwrap();
        assert_eq!(a.trace.digest(), b.trace.digest());
        assert_eq!(a.fuzz, b.fuzz);
    }

    #[test]
    fn read_only_world_never_changes_main() {
        let mut cfg = small(300);
        for e in &mut cfg.exposure {
            e.mode = AccessMode::ReadOnly;
        }
        let out = run_isolation_fuzz(&cfg, 11).unwrap();
        let f = out.fuzz.unwrap();
        assert_eq!(f.batches_with_main_changes, 0);
        assert_eq!(f.mirror_blocks, 0);
        assert_eq!(f.unauthorized_accepted, 0);
    }

    #[test]
    fn oracle_classification() {
        let cfg = SimConfig::isolation_fuzz();
        let o = Oracle::new(&cfg);
        let a = crate::config::chain("A");
        let set = Selector::from_signature(library::SET_VALUE);
        let get = Selector::from_signature(library::GET_VALUE);
        assert!(o.allows(a, Address::from_low_u64(0x10), set));
        assert!(o.allows(a, Address::from_low_u64(0x11), get));
        assert!(!o.allows(a, Address::from_low_u64(0x12), get));
        assert!(!o.allows(a, Address::from_low_u64(0x13), set));
        assert!(o.allows(a, Address::from_low_u64(0x13), get));
    }
}
