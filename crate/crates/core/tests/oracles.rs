use std::collections::{BTreeMap, BTreeSet};

use xchain_sim::auth::{n_star, run_dos_experiment, CostSchedule, DoSExperimentConfig};
use xchain_sim::chain::contract::library::{REQUEST_VALUE, UPDATE_REMOTE_VALUE};
use xchain_sim::codec::encode_words;
use xchain_sim::config::{chain, SimConfig, CHAIN_A, CHAIN_B, CONSUMER, PROVIDER, USER};
use xchain_sim::primitives::{Hash32, Selector, Word};
use xchain_sim::router::{FailureReason, Terminal};
use xchain_sim::scenarios;
use xchain_sim::sim::{Action, Simulation, DEFAULT_EVENT_BUDGET};

fn read_request() -> Action {
    Action::Transact {
        sender: USER,
        target: CONSUMER,
        selector: Selector::from_signature(REQUEST_VALUE),
        params: encode_words(&[Word::from(chain(CHAIN_A)), PROVIDER.to_word()]),
    }
}

fn write_request(value: u64) -> Action {
    Action::Transact {
        sender: USER,
        target: CONSUMER,
        selector: Selector::from_signature(UPDATE_REMOTE_VALUE),
        params: encode_words(&[
            Word::from(chain(CHAIN_A)),
            PROVIDER.to_word(),
            Word::from_u64(value),
        ]),
    }
}

fn prefix_sum(capital: u64, f_base: u64, costs: impl Iterator<Item = u64>) -> u64 {
    let mut spent = 0;
    let mut n = 0;
    for c in costs {
        spent += f_base + c;
        if spent > capital {
            break;
        }
        n += 1;
    }
    n
}

#[test]
fn increasing_schedule_matches_prefix_sum() {
    let costs = CostSchedule::Arithmetic { start: 5, step: 5 };
    let want = prefix_sum(1000, 10, (0..).map_while(|i| costs.cost(i)));
    assert_eq!(want, 17);
    assert_eq!(n_star(1000, 10, &costs), want);
    let report = run_dos_experiment(&DoSExperimentConfig {
        attacker_capital: 1000,
        f_base: 10,
        costs,
        comp_max: None,
        window: 10,
    })
    .unwrap();
    assert_eq!(report.accepted, want);
    assert!(report.fee_conserved);
}

#[test]
fn constant_schedule_worked_case() {
    let costs = CostSchedule::Constant { cost: 5 };
    assert_eq!(
        prefix_sum(1000, 10, (0..1000).map(|i| costs.cost(i).unwrap())),
        66
    );
    assert_eq!(n_star(1000, 10, &costs), 66);
}

#[test]
fn read_end_state_is_independent_of_latency() {
    let mut cfg = SimConfig::read_pattern();
    cfg.transport.latency_min = 1;
    cfg.transport.latency_max = 5;
    let mut states = BTreeSet::new();
    let mut latencies = BTreeSet::new();
    for seed in 0..100 {
        let out = scenarios::run_read_scenario(&cfg, seed).unwrap();
        assert!(
            out.passed(),
            "seed {seed}: {:?}",
            out.failures().collect::<Vec<_>>()
        );
        states.insert(out.sim.as_ref().unwrap().end_state_digest());
        latencies.extend(out.metrics.root_latencies());
    }
    assert_eq!(states.len(), 1);
    assert!(latencies.len() > 1, "latency never varied: {latencies:?}");
}

#[test]
fn compact_chain_replays_to_its_state() {
    let mut cfg = SimConfig::soak();
    cfg.scenario.rounds = Some(40);
    let out = scenarios::run_soak(&cfg, 5).unwrap();
    let sim = out.sim.as_ref().unwrap();
    let fresh = Simulation::new(&cfg, 5).unwrap();
    for (id, node) in sim.nodes() {
        let mut state: BTreeMap<_, _> = fresh.compact(id).state().s_compact.clone();
        let mut parent = Hash32::ZERO;
        for (i, block) in node.compact.blocks().iter().enumerate() {
            assert_eq!(block.height, i as u64 + 1);
            assert_eq!(block.parent_digest, parent);
            parent = block.digest();
            for entry in &block.entries {
                for (k, v) in &entry.writes {
                    assert!(node.policy.is_authorized_key(&entry.contract, k));
                    state.insert((entry.contract, *k), *v);
                }
            }
        }
        assert_eq!(parent, node.compact.head());
        assert_eq!(state, node.compact.state().s_compact, "chain {id}");
        for ((a, k), v) in &state {
            assert_eq!(node.main.read(a, k), *v, "chain {id} {a} {k}");
        }
    }
}

#[test]
fn later_write_wins_under_constant_latency() {
    let mut sim = Simulation::new(&SimConfig::write_pattern(), 1).unwrap();
    sim.schedule(1, chain(CHAIN_B), write_request(5)).unwrap();
    sim.schedule(2, chain(CHAIN_B), write_request(9)).unwrap();
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
    let a = chain(CHAIN_A);
    assert_eq!(sim.read_main(&a, &PROVIDER, 0), Word::from_u64(9));
    assert_eq!(sim.read_compact(&a, &PROVIDER, 0), Word::from_u64(9));
    assert!(sim.is_consistent());
}

#[test]
fn dropped_requests_burn_only_the_base_fee() {
    let mut cfg = SimConfig::read_pattern();
    cfg.transport.drop_probability = 1.0;
    let mut sim = Simulation::new(&cfg, 3).unwrap();
    let n = 7;
    for t in 1..=n {
        sim.schedule(t, chain(CHAIN_B), read_request()).unwrap();
    }
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
    let legs: Vec<_> = sim.requests().collect();
    assert_eq!(legs.len() as u64, n);
    for leg in &legs {
        assert_eq!(
            leg.terminal.as_ref().unwrap().1,
            Terminal::Failed(FailureReason::Dropped)
        );
    }
    assert_eq!(sim.ledger().sink(), 10 * n);
    assert_eq!(
        sim.ledger().balance(&(chain(CHAIN_B), USER)),
        1_000_000 - 10 * n
    );
    assert_eq!(sim.read_main(&chain(CHAIN_B), &CONSUMER, 0), Word::ZERO);
    assert!(sim.fee_conserved());
}

#[test]
fn constant_latency_preserves_issue_order() {
    let mut cfg = SimConfig::read_pattern();
    cfg.transport.latency_min = 3;
    cfg.transport.latency_max = 3;
    let mut sim = Simulation::new(&cfg, 8).unwrap();
    for t in 1..=12 {
        sim.schedule(t, chain(CHAIN_B), read_request()).unwrap();
    }
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
    let roots: Vec<_> = sim
        .requests()
        .filter(|r| r.is_root())
        .map(|r| r.id)
        .collect();
    let served: Vec<_> = sim
        .executions()
        .iter()
        .filter(|e| e.chain == chain(CHAIN_A) && !e.callback)
        .map(|e| e.request)
        .collect();
    assert_eq!(roots.len(), 12);
    assert_eq!(served, roots);
}
