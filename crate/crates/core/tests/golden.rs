//! Pinned traces. Set `UPDATE_GOLDEN=1` to rewrite them after an intended
//! behaviour change.

use std::path::PathBuf;

use xchain_sim::config::SimConfig;
use xchain_sim::scenarios;

fn check(name: &str, cfg: &SimConfig, seed: u64) {
    let out = scenarios::run(cfg, seed).unwrap();
    assert!(out.passed());
    let rendered = out.trace.render();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.trace"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &rendered).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(rendered, want, "trace drifted from {}", path.display());
}

#[test]
fn read_pattern_trace() {
    let mut cfg = SimConfig::read_pattern();
    cfg.transport.latency_max = 5;
    check("read_pattern", &cfg, 7);
}

#[test]
fn write_pattern_trace() {
    check("write_pattern", &SimConfig::write_pattern(), 1);
}
