use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use xchain_sim::config::{ScenarioName, SimConfig};
use xchain_sim::scenarios::{self, ScenarioOutcome};

#[derive(Parser)]
#[command(version, about = "Run cross-chain simulation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Genesis and scenario config (JSON). Defaults to the built-in one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Writes the event trace here.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Writes per-request metrics CSV here.
    #[arg(long, global = true)]
    metrics: Option<PathBuf>,
    /// Writes the final fee ledger snapshot CSV here.
    #[arg(long, global = true)]
    ledger: Option<PathBuf>,
    /// Only the exit code reports the result.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Remote read with callback.
    ReadPattern,
    /// Remote write with acknowledgement.
    WritePattern,
    /// Invocation flood against the prepaid-fee gate.
    DosFlood {
        /// Writes the cumulative cost curve CSV here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Randomized main-state isolation check.
    IsolationFuzz {
        /// Overrides the iteration count.
        #[arg(long)]
        iterations: Option<u64>,
        /// Writes a minimized reproduction here when a violation is found.
        #[arg(long)]
        repro: Option<PathBuf>,
    },
    /// Sustained mixed traffic for throughput and latency figures.
    Soak {
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// Prints the built-in config for a scenario.
    Config { scenario: String },
}

fn scenario_of(cmd: &Command) -> Option<ScenarioName> {
    Some(match cmd {
        Command::ReadPattern => ScenarioName::ReadPattern,
        Command::WritePattern => ScenarioName::WritePattern,
        Command::DosFlood { .. } => ScenarioName::DosFlood,
        Command::IsolationFuzz { .. } => ScenarioName::IsolationFuzz,
        Command::Soak { .. } => ScenarioName::Soak,
        Command::Config { .. } => return None,
    })
}

fn write_file(
    path: &PathBuf,
    f: impl FnOnce(BufWriter<File>) -> Result<(), Box<dyn std::error::Error>>,
) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    f(BufWriter::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: &Cli) -> Result<bool, String> {
    let Some(name) = scenario_of(&cli.command) else {
        let Command::Config { scenario } = &cli.command else {
            unreachable!()
        };
        let name: ScenarioName = serde_json::from_value(json!(scenario))
            .map_err(|_| format!("unknown scenario `{scenario}`"))?;
        println!("{}", SimConfig::default_for(name).to_json());
        return Ok(true);
    };
    let mut cfg = match &cli.config {
        Some(p) => SimConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => SimConfig::default_for(name),
    };
    if cfg.scenario.name != name {
        return Err(format!(
            "config describes scenario `{}`, not `{}`",
            cfg.scenario.name.as_str(),
            name.as_str()
        ));
    }
    match &cli.command {
        Command::IsolationFuzz {
            iterations: Some(n),
            ..
        } => cfg.scenario.iterations = Some(*n),
        Command::Soak { rounds: Some(n) } => cfg.scenario.rounds = Some(*n),
        _ => {}
    }
    let seed = cli.seed.unwrap_or(cfg.scenario.seed);
    let out = scenarios::run(&cfg, seed).map_err(|e| e.to_string())?;
    emit(cli, &cfg, &out)?;
    Ok(out.passed())
}

fn emit(cli: &Cli, cfg: &SimConfig, out: &ScenarioOutcome) -> Result<(), String> {
    if let Some(p) = &cli.trace {
        write_file(p, |w| Ok(out.trace.write_to(w)?))?;
    }
    if let Some(p) = &cli.metrics {
        write_file(p, |w| Ok(out.metrics.write_csv(w)?))?;
    }
    if let (Some(p), Some(sim)) = (&cli.ledger, &out.sim) {
        write_file(p, |w| Ok(sim.ledger().write_snapshot_csv(w)?))?;
    }
    match &cli.command {
        Command::DosFlood { curve: Some(p) } => {
            if let (Some(report), Some(dos)) = (&out.dos, &cfg.scenario.dos) {
                write_file(p, |w| Ok(report.write_curve_csv(w, dos.attacker_capital)?))?;
            }
        }
        Command::IsolationFuzz { repro: Some(p), .. } => {
            if let Some(r) = out.fuzz.as_ref().and_then(|f| f.repro.as_ref()) {
                write_file(p, |w| Ok(serde_json::to_writer_pretty(w, r)?))?;
            }
        }
        _ => {}
    }
    if cli.quiet {
        return Ok(());
    }
    for c in &out.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.passed || c.detail.is_empty() {
            println!("{mark} {}", c.name);
        } else {
            println!("{mark} {}: {}", c.name, c.detail);
        }
    }
    let m = &out.metrics;
    let summary = json!({
        "scenario": m.scenario,
        "seed": m.seed,
        "attempted": m.attempted,
        "accepted": m.accepted,
        "refused": m.refused,
        "legs": m.requests.len(),
        "events": m.events,
        "trace_digest": m.trace_digest,
        "genesis_total": m.genesis_total,
        "fees": m.fees,
        "end_state": m.end_state,
        "extra": m.extra,
        "dos": out.dos,
        "fuzz": out.fuzz.as_ref().map(|f| json!({
            "iterations": f.iterations,
            "authorized_executions": f.authorized_executions,
            "unauthorized_rejected": f.unauthorized_rejected,
            "unauthorized_accepted": f.unauthorized_accepted,
            "s_main_violations": f.s_main_violations,
        })),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    if let (false, Some(p)) = (out.passed(), &cli.trace) {
        println!("trace written to {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
