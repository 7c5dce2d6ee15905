//! The same read with and without the compact-chain fast path. Without it
//! a delivered request waits six main-chain blocks before it is final.

use xchain_sim::chain::contract::library::REQUEST_VALUE;
use xchain_sim::codec::encode_words;
use xchain_sim::config::{chain, SimConfig, CHAIN_A, CHAIN_B, CONSUMER, PROVIDER, USER};
use xchain_sim::primitives::{Selector, Word};
use xchain_sim::sim::{Action, Simulation, DEFAULT_EVENT_BUDGET};

fn run(bypass: bool) {
    let mut cfg = SimConfig::read_pattern();
    for c in &mut cfg.chains {
        c.compact_bypass = bypass;
    }
    let mut sim = Simulation::new(&cfg, 1).expect("config");
    let params = encode_words(&[Word::from(chain(CHAIN_A)), PROVIDER.to_word()]);
    let action = Action::Transact {
        sender: USER,
        target: CONSUMER,
        selector: Selector::from_signature(REQUEST_VALUE),
        params,
    };
    sim.schedule(1, chain(CHAIN_B), action).expect("schedule");
    sim.run_until_quiescent(DEFAULT_EVENT_BUDGET)
        .expect("quiescent");
    println!("compact bypass {bypass}:");
    for leg in sim.requests() {
        let (done, terminal) = leg.terminal.as_ref().expect("terminal");
        println!(
            "  {} -> {} issued {} final {done} ({})",
            leg.from,
            leg.to,
            leg.issued_tick,
            terminal.label()
        );
    }
}

fn main() {
    run(true);
    run(false);
}
