use proptest::prelude::*;
use xchain_sim::chain::contract::library::{
    GET_VALUE, HANDLE_RESULT, REQUEST_VALUE, SET_VALUE, UPDATE_REMOTE_VALUE,
};
use xchain_sim::codec::encode_words;
use xchain_sim::compact::AccessMode;
use xchain_sim::config::{
    chain, exposure, ContractSpec, ContractTemplate, SimConfig, CHAIN_A, CHAIN_B, CONSUMER,
    PROVIDER, USER,
};
use xchain_sim::primitives::{Address, Selector, Word};
use xchain_sim::sim::{Action, Simulation, DEFAULT_EVENT_BUDGET};

#[derive(Debug, Clone)]
enum Op {
    Read(u64),
    Write(u64, u64),
    Local(u64, u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (1u64..40).prop_map(Op::Read),
        (1u64..40, 0u64..1000).prop_map(|(t, v)| Op::Write(t, v)),
        (1u64..40, 0u64..1000).prop_map(|(t, v)| Op::Local(t, v)),
    ]
}

const READER: Address = Address::from_low_u64(0x0e);

fn config(latency_max: u64, drop: f64, bypass: bool) -> SimConfig {
    let mut cfg = SimConfig::write_pattern();
    cfg.contracts.push(ContractSpec {
        chain: chain(CHAIN_B),
        address: READER,
        template: ContractTemplate::ConsumerRead,
    });
    cfg.exposure
        .push(exposure(CHAIN_A, PROVIDER, GET_VALUE, AccessMode::ReadOnly));
    cfg.exposure.push(exposure(
        CHAIN_B,
        READER,
        HANDLE_RESULT,
        AccessMode::ReadWrite,
    ));
    cfg.transport.latency_max = latency_max;
    cfg.transport.drop_probability = drop;
    for c in &mut cfg.chains {
        c.compact_bypass = bypass;
    }
    cfg
}

fn apply(sim: &mut Simulation, op: &Op) {
    let (tick, chain_label, action) = match *op {
        Op::Read(t) => (
            t,
            CHAIN_B,
            Action::Transact {
                sender: USER,
                target: READER,
                selector: Selector::from_signature(REQUEST_VALUE),
                params: encode_words(&[Word::from(chain(CHAIN_A)), PROVIDER.to_word()]),
            },
        ),
        Op::Write(t, v) => (
            t,
            CHAIN_B,
            Action::Transact {
                sender: USER,
                target: CONSUMER,
                selector: Selector::from_signature(UPDATE_REMOTE_VALUE),
                params: encode_words(&[
                    Word::from(chain(CHAIN_A)),
                    PROVIDER.to_word(),
                    Word::from_u64(v),
                ]),
            },
        ),
        Op::Local(t, v) => (
            t,
            CHAIN_A,
            Action::Transact {
                sender: USER,
                target: PROVIDER,
                selector: Selector::from_signature(SET_VALUE),
                params: encode_words(&[Word::from_u64(v)]),
            },
        ),
    };
    sim.schedule(tick, chain(chain_label), action).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn invariants_hold_at_quiescence(
        ops in prop::collection::vec(op(), 1..25),
        seed in any::<u64>(),
        latency_max in 1u64..8,
        drop in prop_oneof![Just(0.0), Just(0.1), Just(0.5)],
        bypass in any::<bool>(),
    ) {
        let cfg = config(latency_max, drop, bypass);
        let mut sim = Simulation::new(&cfg, seed).unwrap();
        for o in &ops {
            apply(&mut sim, o);
        }
        sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
        prop_assert!(sim.is_quiescent());
        prop_assert!(sim.fee_conserved());
        prop_assert_eq!(sim.ledger().totals().sum(), sim.ledger().genesis_total());
        prop_assert!(sim.is_consistent(), "{:?}", sim.consistency());
        prop_assert_eq!(sim.unresolved(), 0);
        prop_assert!(sim.requests().all(|r| r.terminal.is_some()));
        prop_assert_eq!(sim.isolation().violations(), 0);
        prop_assert!(sim.violations().is_empty(), "{:?}", sim.violations());
        prop_assert_eq!(sim.ledger().live_locks(), 0);
    }

    #[test]
    fn same_seed_same_trace(ops in prop::collection::vec(op(), 1..10), seed in any::<u64>()) {
        let cfg = config(6, 0.2, true);
        let run = || {
            let mut sim = Simulation::new(&cfg, seed).unwrap();
            for o in &ops {
                apply(&mut sim, o);
            }
            sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
            (sim.trace().digest(), sim.end_state_digest())
        };
        prop_assert_eq!(run(), run());
    }
}
