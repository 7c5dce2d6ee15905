//! Mixed read and write traffic in both directions over a lossy,
//! jittery network. Writes per-request metrics to stdout as CSV.

use xchain_sim::config::SimConfig;
use xchain_sim::scenarios::run_soak;

fn main() {
    let mut cfg = SimConfig::soak();
    cfg.scenario.rounds = Some(50);
    let out = run_soak(&cfg, 3).expect("scenario");
    out.metrics.write_csv(std::io::stdout()).expect("csv");
    eprintln!("{:?}", out.metrics.extra);
    eprintln!("fees: {:?}", out.metrics.fees);
    eprintln!("passed: {}", out.passed());
}
