//! Three chains from an inline JSON config. B reads from A twice: once
//! with the answer sent back to B, once with the callback landing on a
//! contract next to the provider on A. A third request targets C, which
//! is not registered with the locator, and fails.

use xchain_sim::chain::contract::library::{GET_VALUE, HANDLE_RESULT, REQUEST_VALUE};
use xchain_sim::codec::encode_words;
use xchain_sim::config::SimConfig;
use xchain_sim::message::{Callback, ExternalContract};
use xchain_sim::primitives::{Address, ChainId, Selector, Word};
use xchain_sim::sim::{Action, Simulation, DEFAULT_EVENT_BUDGET};

const CONFIG: &str = r#"{
  "chains": [
    { "id": "A" },
    { "id": "B", "block_interval": 2 },
    { "id": "C", "public": false }
  ],
  "contracts": [
    { "chain": "A", "address": "0xa", "template": "provider_read", "stored": 7 },
    { "chain": "A", "address": "0xac", "template": "consumer_read" },
    { "chain": "B", "address": "0xb", "template": "consumer_read" },
    { "chain": "C", "address": "0xc", "template": "provider_read", "stored": 3 }
  ],
  "exposure": [
    { "chain": "A", "contract": "0xa", "function": "getValue()", "keys": [0], "mode": "read_only" },
    { "chain": "A", "contract": "0xac", "function": "handleResult(uint256)", "keys": [0], "mode": "read_write" },
    { "chain": "B", "contract": "0xb", "function": "handleResult(uint256)", "keys": [0], "mode": "read_write" },
    { "chain": "C", "contract": "0xc", "function": "getValue()", "keys": [0], "mode": "read_only" }
  ],
  "fees": {
    "f_base": 10, "per_call": 5, "per_write": 3, "multiplier": 1,
    "accounts": [{ "chain": "B", "address": "0x1", "balance": 10000 }],
    "collateral": [
      { "owner": "A", "host": "B", "amount": 10000 },
      { "owner": "B", "host": "A", "amount": 10000 },
      { "owner": "B", "host": "C", "amount": 10000 },
      { "owner": "C", "host": "B", "amount": 10000 }
    ]
  },
  "transport": { "latency_min": 1, "latency_max": 3, "drop_probability": 0.0, "seed": 0 },
  "scenario": { "name": "read-pattern", "seed": 1 }
}"#;

fn addr(v: u64) -> Address {
    Address::from_low_u64(v)
}

fn main() {
    let cfg = SimConfig::from_json(CONFIG).expect("config");
    let id = |l: &str| ChainId::from_label(l).expect("label");
    let (a, b, c) = (id("A"), id("B"), id("C"));
    let user = addr(1);
    let mut sim = Simulation::new(&cfg, 5).expect("simulation");

    let read_a = encode_words(&[Word::from(a), addr(0xa).to_word()]);
    let read_c = encode_words(&[Word::from(c), addr(0xc).to_word()]);
    for (tick, params) in [(1, read_a), (2, read_c)] {
        let action = Action::Transact {
            sender: user,
            target: addr(0xb),
            selector: Selector::from_signature(REQUEST_VALUE),
            params,
        };
        sim.schedule(tick, b, action).expect("schedule");
    }
    let direct = Action::RouterCall {
        sender: user,
        target_chain: a,
        target: ExternalContract {
            contract_address: addr(0xa),
            function_selector: Selector::from_signature(GET_VALUE),
            params: Vec::new(),
        },
        callback: Callback::to(a, addr(0xac), Selector::from_signature(HANDLE_RESULT)),
    };
    sim.schedule(3, b, direct).expect("schedule");
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)
        .expect("quiescent");

    for leg in sim.requests() {
        let (done, terminal) = leg.terminal.as_ref().expect("terminal");
        println!(
            "{} -> {} issued {} done {done}: {}",
            leg.from,
            leg.to,
            leg.issued_tick,
            terminal.label()
        );
    }
    println!("B consumer holds {}", sim.read_main(&b, &addr(0xb), 0));
    println!("A consumer holds {}", sim.read_main(&a, &addr(0xac), 0));
    println!(
        "consistent {} fees conserved {}",
        sim.is_consistent(),
        sim.fee_conserved()
    );
}
