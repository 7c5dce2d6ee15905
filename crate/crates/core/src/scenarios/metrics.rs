use std::collections::BTreeMap;
use std::io;

use serde::Serialize;

use crate::auth::LedgerTotals;
use crate::config::ScenarioName;
use crate::primitives::{ChainId, Fee, Hash32, RequestId};
use crate::sim::Simulation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestMetric {
    pub request_id: RequestId,
    pub root: RequestId,
    pub from: ChainId,
    pub to: ChainId,
    pub issued_tick: u64,
    pub terminal_tick: Option<u64>,
    pub latency: Option<u64>,
    pub outcome: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainDigest {
    pub chain: ChainId,
    pub main_height: u64,
    pub compact_height: u64,
    pub s_main: Hash32,
    pub s_compact: Hash32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsRecord {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub attempted: u64,
    pub accepted: u64,
    pub refused: u64,
    pub router_errors: u64,
    pub requests: Vec<RequestMetric>,
    pub genesis_total: Fee,
    pub fees: LedgerTotals,
    pub end_state: Vec<ChainDigest>,
    pub events: u64,
    pub trace_lines: usize,
    pub trace_digest: Hash32,
    /// Scenario-specific figures, e.g. the value a read pattern retrieved.
    pub extra: BTreeMap<String, String>,
}

pub const METRICS_HEADER: [&str; 8] = [
    "request_id",
    "root",
    "from",
    "to",
    "issued_tick",
    "terminal_tick",
    "latency",
    "outcome",
];

impl MetricsRecord {
    pub fn new(scenario: ScenarioName, seed: u64) -> Self {
        MetricsRecord {
            scenario,
            seed,
            attempted: 0,
            accepted: 0,
            refused: 0,
            router_errors: 0,
            requests: Vec::new(),
            genesis_total: 0,
            fees: LedgerTotals::default(),
            end_state: Vec::new(),
            events: 0,
            trace_lines: 0,
            trace_digest: Hash32::ZERO,
            extra: BTreeMap::new(),
        }
    }

    pub fn from_sim(scenario: ScenarioName, seed: u64, sim: &Simulation) -> Self {
        let requests: Vec<RequestMetric> = sim
            .requests()
            .map(|r| RequestMetric {
                request_id: r.id,
                root: r.root,
                from: r.from,
                to: r.to,
                issued_tick: r.issued_tick,
                terminal_tick: r.terminal.as_ref().map(|t| t.0),
                latency: r.terminal.as_ref().map(|t| t.0 - r.issued_tick),
                outcome: r
                    .terminal
                    .as_ref()
                    .map(|t| t.1.label())
                    .unwrap_or("pending"),
            })
            .collect();
        MetricsRecord {
            attempted: sim.attempts(),
            accepted: sim.requests().filter(|r| r.is_root()).count() as u64,
            refused: sim.refusals().len() as u64,
            router_errors: sim.router_errors(),
            requests,
            genesis_total: sim.ledger().genesis_total(),
            fees: sim.ledger().totals(),
            end_state: sim
                .nodes()
                .map(|(id, n)| ChainDigest {
                    chain: *id,
                    main_height: n.main.height(),
                    compact_height: n.compact.height(),
                    s_main: n.main.s_main_digest(),
                    s_compact: n.compact.state().digest(),
                })
                .collect(),
            events: sim.events_run(),
            trace_lines: sim.trace().len(),
            trace_digest: sim.trace().digest(),
            ..MetricsRecord::new(scenario, seed)
        }
    }

    pub fn reconciles(&self) -> bool {
        self.accepted + self.refused + self.router_errors == self.attempted
    }

    /// End-to-end latency of each user request: from issue to the terminal
    /// outcome of its last leg.
    pub fn root_latencies(&self) -> Vec<u64> {
        let mut end: BTreeMap<RequestId, (u64, u64)> = BTreeMap::new();
        for r in &self.requests {
            if r.request_id == r.root {
                end.entry(r.root).or_insert((r.issued_tick, r.issued_tick));
            }
        }
        for r in &self.requests {
            if let (Some(e), Some(t)) = (end.get_mut(&r.root), r.terminal_tick) {
                e.1 = e.1.max(t);
            }
        }
        end.values().map(|(s, e)| e - s).collect()
    }

    /// One row per request leg, under [`METRICS_HEADER`].
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(METRICS_HEADER)?;
        for r in &self.requests {
            w.write_record([
                r.request_id.to_string(),
                r.root.to_string(),
                r.from.to_string(),
                r.to.to_string(),
                r.issued_tick.to_string(),
                r.terminal_tick.map(|t| t.to_string()).unwrap_or_default(),
                r.latency.map(|t| t.to_string()).unwrap_or_default(),
                r.outcome.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
