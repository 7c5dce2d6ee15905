//! Randomized cross-chain calls against exposed, read-only and hidden
//! contracts, checking that main-chain storage only changes by way of
//! blocks. Pass an iteration count as the first argument.

use xchain_sim::config::SimConfig;
use xchain_sim::scenarios::run_isolation_fuzz;

fn main() {
    let mut cfg = SimConfig::isolation_fuzz();
    if let Some(n) = std::env::args().nth(1) {
        cfg.scenario.iterations = Some(n.parse().expect("iteration count"));
    }
    let out = run_isolation_fuzz(&cfg, 1).expect("scenario");
    let f = out.fuzz.as_ref().expect("report");
    println!("{} calls in {} batches", f.iterations, f.batches);
    println!("authorized executions   {}", f.authorized_executions);
    println!("unauthorized rejected   {}", f.unauthorized_rejected);
    println!("unauthorized accepted   {}", f.unauthorized_accepted);
    println!("S_main violations       {}", f.s_main_violations);
    if let Some(r) = &f.repro {
        println!("repro: {}", serde_json::to_string_pretty(r).expect("json"));
    }
}
