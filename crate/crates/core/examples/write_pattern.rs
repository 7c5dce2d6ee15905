//! Remote write: the consumer sets a value on A and gets an
//! acknowledgement. Run with `-- read-only` to see the policy refuse it.

use xchain_sim::compact::AccessMode;
use xchain_sim::config::{chain, SimConfig, CHAIN_A, CHAIN_B, CONSUMER, PROVIDER};
use xchain_sim::scenarios::run_write_scenario;

fn main() {
    let mut cfg = SimConfig::write_pattern();
    if std::env::args().any(|a| a == "read-only") {
        cfg.exposure[0].mode = AccessMode::ReadOnly;
    }
    let out = run_write_scenario(&cfg, 1).expect("scenario");
    let sim = out.sim.as_ref().expect("sim");
    let a = chain(CHAIN_A);

    println!("storedValue main    = {}", sim.read_main(&a, &PROVIDER, 0));
    println!(
        "storedValue compact = {}",
        sim.read_compact(&a, &PROVIDER, 0)
    );
    println!(
        "writeSuccessful     = {}",
        sim.read_main(&chain(CHAIN_B), &CONSUMER, 0)
    );
    for s in sim.ledger().settlements() {
        println!(
            "settled {}: locked {} charged {} refunded {} burned {}",
            s.request, s.locked, s.charged, s.refunded, s.burned
        );
    }
    for (id, report) in sim.consistency() {
        println!(
            "chain {id}: {} keys checked, {} mismatches",
            report.checked_keys,
            report.mismatches.len()
        );
    }
}
