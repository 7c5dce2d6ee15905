//! Remote read: a consumer on B asks a provider on A for its value and
//! stores the answer through a callback.

use xchain_sim::config::{chain, SimConfig, CHAIN_B, CONSUMER};
use xchain_sim::scenarios::run_read_scenario;

fn main() {
    let mut cfg = SimConfig::read_pattern();
    cfg.transport.latency_max = 4;
    let out = run_read_scenario(&cfg, 11).expect("scenario");
    let sim = out.sim.as_ref().expect("sim");

    print!("{}", out.trace.render());
    for leg in sim.requests() {
        let (tick, terminal) = leg.terminal.as_ref().expect("terminal");
        println!(
            "{} -> {} issued {} done {tick}: {}",
            leg.from,
            leg.to,
            leg.issued_tick,
            terminal.label()
        );
    }
    println!(
        "retrievedValue = {}",
        sim.read_main(&chain(CHAIN_B), &CONSUMER, 0)
    );
    for c in &out.checks {
        println!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.name);
    }
}
