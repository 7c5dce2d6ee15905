//! Invocation flood against the prepaid fee gate. Prints the cumulative
//! cost curve and where the attacker runs dry.

use xchain_sim::auth::CostSchedule;
use xchain_sim::config::SimConfig;
use xchain_sim::scenarios::run_dos_scenario;

fn main() {
    let mut cfg = SimConfig::dos_flood();
    let out = run_dos_scenario(&cfg, 1).expect("scenario");
    let report = out.dos.as_ref().expect("report");
    println!(
        "constant cost 5, f_base 10, capital 1000: n* = {}",
        report.n_star
    );
    println!("accepted {} refused {}", report.accepted, report.refused);
    for c in &out.checks {
        println!(
            "{} {}: {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.detail
        );
    }

    let dos = cfg.scenario.dos.as_mut().expect("dos section");
    dos.costs = CostSchedule::Arithmetic { start: 5, step: 5 };
    let out = run_dos_scenario(&cfg, 1).expect("scenario");
    let report = out.dos.as_ref().expect("report");
    println!("rising cost 5, 10, 15...: n* = {}", report.n_star);
    report
        .write_curve_csv(std::io::stdout(), 1000)
        .expect("csv");
}
