//! Deterministic discrete-event simulation wiring every chain together.
//!
//! Each chain runs a main chain, its compact chain, a synchronizer, a
//! router and a cross-chain mempool. A single collateral ledger spans all
//! chains. Events are popped from one queue ordered by `(tick, sequence)`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::auth::{
    Admission, AdmissionController, Candidate, CollateralLedger, LedgerError, Payer, SettleOutcome,
    XChainMempool,
};
use crate::chain::{ChainError, ChainEvent, ChainState, Transaction, TxKind};
use crate::codec::Encoder;
use crate::compact::{CompactChain, CompactError, CompactExecution, ExposurePolicy};
use crate::config::{ConfigError, SimConfig};
use crate::message::{Callback, CrossChainCall, ExternalContract};
use crate::netsim::{
    watch_and_forward, EnodeRecord, EnodeRegistry, Envelope, EventQueue, Forwarded, Trace,
    TraceLine, Transport, TransportConfig, TransportError,
};
use crate::primitives::{keccak256, Address, ChainId, Fee, Hash32, RequestId, Selector, Word};
use crate::router::{FailureReason, Router, Terminal};
use crate::sync::{verify_consistency, SyncReport, Synchronizer};

/// Default cap on executed events before a run is declared divergent.
pub const DEFAULT_EVENT_BUDGET: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Compact(#[from] CompactError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("event budget of {0} exhausted before quiescence")]
    EventBudget(u64),
}

/// Something scheduled from outside the protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// A signed transaction to a contract on the chain.
    Transact {
        sender: Address,
        target: Address,
        selector: Selector,
        params: Vec<u8>,
    },
    /// An account invoking the router directly.
    RouterCall {
        sender: Address,
        target_chain: ChainId,
        target: ExternalContract,
        callback: Callback,
    },
    /// Tops up this chain's collateral on `host` from its treasury.
    Replenish { host: ChainId, amount: Fee },
}

#[derive(Debug, Clone)]
enum SimEvent {
    Action { chain: ChainId, action: Action },
    ProduceBlock { chain: ChainId },
    Deliver(Envelope),
}

#[derive(Debug, Clone)]
struct Incoming {
    call: CrossChainCall,
    exec: CompactExecution,
}

#[derive(Debug, Clone)]
struct DirectCall {
    sender: Address,
    target_chain: ChainId,
    target: ExternalContract,
    callback: Callback,
}

/// Everything one chain runs.
#[derive(Debug, Clone)]
pub struct Node {
    pub main: ChainState,
    pub compact: CompactChain,
    pub policy: ExposurePolicy,
    pub sync: Synchronizer,
    pub router: Router,
    pub mempool: XChainMempool,
    block_interval: u64,
    compact_bypass: bool,
    local_pool: Vec<Transaction>,
    mirror_pool: Vec<Transaction>,
    direct_calls: Vec<DirectCall>,
    awaiting: BTreeMap<Hash32, Incoming>,
    block_scheduled: bool,
}

impl Node {
    fn has_work(&self) -> bool {
        !self.local_pool.is_empty()
            || !self.mirror_pool.is_empty()
            || !self.direct_calls.is_empty()
            || self.router.has_events()
            || self.mempool.has_pending()
    }

    pub fn consistency(&self) -> SyncReport {
        verify_consistency(&self.main, self.compact.state(), &self.policy)
    }
}

/// Life of one request leg.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestRecord {
    pub id: RequestId,
    /// The user-initiated request this leg belongs to. Equal to `id` for
    /// user-initiated requests.
    pub root: RequestId,
    pub from: ChainId,
    pub to: ChainId,
    pub issued_tick: u64,
    pub terminal: Option<(u64, Terminal)>,
}

impl RequestRecord {
    pub fn is_root(&self) -> bool {
        self.id == self.root
    }
}

/// A successful execution on some compact chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecRecord {
    pub tick: u64,
    pub chain: ChainId,
    pub request: RequestId,
    pub contract: Address,
    pub selector: Selector,
    pub callback: bool,
    pub writes: usize,
}

/// Counters backing the `S_main` isolation check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IsolationStats {
    pub deliveries: u64,
    /// Deliveries during which some main chain's storage changed.
    pub delivery_main_changes: u64,
    pub blocks: u64,
    pub blocks_with_mirror_writes: u64,
    /// Blocks whose storage changed without any local or mirror write.
    pub unexplained_main_changes: u64,
}

impl IsolationStats {
    pub fn violations(&self) -> u64 {
        self.delivery_main_changes + self.unexplained_main_changes
    }
}

/// A refused admission at the source chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Refusal {
    pub tick: u64,
    pub chain: ChainId,
    pub payer: Address,
    pub error: LedgerError,
}

pub struct Simulation {
    nodes: BTreeMap<ChainId, Node>,
    registry: EnodeRegistry,
    transport: Transport,
    queue: EventQueue<SimEvent>,
    ledger: CollateralLedger,
    admission: AdmissionController,
    requests: BTreeMap<RequestId, RequestRecord>,
    request_order: Vec<RequestId>,
    root_gas: BTreeMap<RequestId, Fee>,
    execs: Vec<ExecRecord>,
    refusals: Vec<Refusal>,
    router_errors: u64,
    attempts: u64,
    isolation: IsolationStats,
    violations: Vec<String>,
    trace: Trace,
    tick: u64,
    events_run: u64,
}

impl Simulation {
    /// Builds genesis for every chain in `config`. All randomness derives
    /// from `seed`.
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let ids = config.chain_ids();
        let mut nodes = BTreeMap::new();
        let mut registry = EnodeRegistry::new();
        for spec in &config.chains {
            let mut main = ChainState::genesis(spec.id, config.fees.schedule.gas);
            for c in config.contracts.iter().filter(|c| c.chain == spec.id) {
                main.register_contract(c.build())?;
            }
            let policy = config.policy(&spec.id);
            let compact = CompactChain::authorize(&policy, &main)?;
            if spec.public {
                registry.register_enode(EnodeRecord {
                    chain: spec.id,
                    endpoint: spec.endpoint(),
                    public: true,
                });
            }
            nodes.insert(
                spec.id,
                Node {
                    sync: Synchronizer::new(spec.id, main.height()),
                    router: Router::new(spec.id, ids.iter().copied()),
                    main,
                    compact,
                    policy,
                    mempool: XChainMempool::new(),
                    block_interval: spec.block_interval,
                    compact_bypass: spec.compact_bypass,
                    local_pool: Vec::new(),
                    mirror_pool: Vec::new(),
                    direct_calls: Vec::new(),
                    awaiting: BTreeMap::new(),
                    block_scheduled: false,
                },
            );
        }
        let mut ledger = CollateralLedger::new();
        for a in &config.fees.accounts {
            ledger.fund_user((a.chain, a.address), a.balance);
        }
        for ch in &config.fees.collateral {
            ledger.open_channel(ch.owner, ch.host, ch.amount);
        }
        let transport = Transport::new(TransportConfig {
            seed,
            ..config.transport
        })?;
        Ok(Simulation {
            nodes,
            registry,
            transport,
            queue: EventQueue::new(),
            ledger,
            admission: AdmissionController::new(config.fees.schedule),
            requests: BTreeMap::new(),
            request_order: Vec::new(),
            root_gas: BTreeMap::new(),
            execs: Vec::new(),
            refusals: Vec::new(),
            router_errors: 0,
            attempts: 0,
            isolation: IsolationStats::default(),
            violations: Vec::new(),
            trace: Trace::new(),
            tick: 0,
            events_run: 0,
        })
    }

    pub fn schedule(&mut self, tick: u64, chain: ChainId, action: Action) -> Result<(), SimError> {
        if !self.nodes.contains_key(&chain) {
            return Err(SimError::UnknownChain(chain));
        }
        self.queue.push(tick, SimEvent::Action { chain, action });
        Ok(())
    }

    /// Runs one event. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some((tick, event)) = self.queue.pop() else {
            return false;
        };
        self.tick = tick;
        self.events_run += 1;
        let line = match event {
            SimEvent::Action { chain, action } => self.on_action(chain, action),
            SimEvent::ProduceBlock { chain } => self.on_block(chain),
            SimEvent::Deliver(env) => self.on_deliver(env),
        };
        self.trace.push(line);
        true
    }

    pub fn run_until_quiescent(&mut self, budget: u64) -> Result<u64, SimError> {
        let start = self.events_run;
        while self.step() {
            if self.events_run - start >= budget && !self.queue.is_empty() {
                return Err(SimError::EventBudget(budget));
            }
        }
        Ok(self.events_run - start)
    }

    pub fn is_quiescent(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn events_run(&self) -> u64 {
        self.events_run
    }

    pub fn node(&self, chain: &ChainId) -> Option<&Node> {
        self.nodes.get(chain)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&ChainId, &Node)> {
        self.nodes.iter()
    }

    pub fn main(&self, chain: &ChainId) -> &ChainState {
        &self.nodes[chain].main
    }

    pub fn compact(&self, chain: &ChainId) -> &CompactChain {
        &self.nodes[chain].compact
    }

    /// Test hook: mutable access to a node, e.g. to inject faults.
    pub fn node_mut(&mut self, chain: &ChainId) -> Option<&mut Node> {
        self.nodes.get_mut(chain)
    }

    pub fn ledger(&self) -> &CollateralLedger {
        &self.ledger
    }

    pub fn admission(&self) -> &AdmissionController {
        &self.admission
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Request legs in issue order.
    pub fn requests(&self) -> impl Iterator<Item = &RequestRecord> {
        self.request_order.iter().map(|id| &self.requests[id])
    }

    pub fn request(&self, id: &RequestId) -> Option<&RequestRecord> {
        self.requests.get(id)
    }

    pub fn executions(&self) -> &[ExecRecord] {
        &self.execs
    }

    pub fn refusals(&self) -> &[Refusal] {
        &self.refusals
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn router_errors(&self) -> u64 {
        self.router_errors
    }

    pub fn isolation(&self) -> IsolationStats {
        self.isolation
    }

    /// Internal invariant breaches observed while running.
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn consistency(&self) -> Vec<(ChainId, SyncReport)> {
        self.nodes
            .iter()
            .map(|(id, n)| (*id, n.consistency()))
            .collect()
    }

    pub fn is_consistent(&self) -> bool {
        self.nodes.values().all(|n| n.consistency().is_consistent())
    }

    pub fn fee_conserved(&self) -> bool {
        self.ledger.total() == self.ledger.genesis_total()
    }

    /// Legs still waiting for a terminal outcome.
    pub fn unresolved(&self) -> usize {
        self.requests
            .values()
            .filter(|r| r.terminal.is_none())
            .count()
    }

    /// Digest over every chain's storage, compact state and nonces.
    pub fn end_state_digest(&self) -> Hash32 {
        let mut e = Encoder::new();
        for (id, n) in &self.nodes {
            e.chain(id)
                .hash(&n.main.s_main_digest())
                .hash(&n.compact.state().digest());
        }
        e.digest()
    }

    fn schedule_block(&mut self, chain: ChainId) {
        let node = self.nodes.get_mut(&chain).expect("known chain");
        if !node.block_scheduled && node.has_work() {
            node.block_scheduled = true;
            self.queue.push(
                self.tick + node.block_interval,
                SimEvent::ProduceBlock { chain },
            );
        }
    }

    fn on_action(&mut self, chain: ChainId, action: Action) -> TraceLine {
        let tick = self.tick;
        let node = self.nodes.get_mut(&chain).expect("checked at schedule");
        let digest = match action {
            Action::Transact {
                sender,
                target,
                selector,
                params,
            } => {
                let queued = node
                    .local_pool
                    .iter()
                    .filter(|t| t.sender == sender)
                    .count() as u64;
                let nonce = node.main.next_nonce(&sender) + queued;
                let tx = Transaction::local(sender, target, selector, params, nonce);
                let d = tx.digest();
                node.local_pool.push(tx);
                d
            }
            Action::RouterCall {
                sender,
                target_chain,
                target,
                callback,
            } => {
                let mut e = Encoder::new();
                e.address(&sender)
                    .chain(&target_chain)
                    .address(&target.contract_address)
                    .selector(&target.function_selector)
                    .bytes(&target.params);
                node.direct_calls.push(DirectCall {
                    sender,
                    target_chain,
                    target,
                    callback,
                });
                e.digest()
            }
            Action::Replenish { host, amount } => {
                if let Err(err) = self.ledger.replenish(chain, host, amount) {
                    log::warn!("replenish {chain}->{host} failed: {err}");
                }
                let mut e = Encoder::new();
                e.chain(&host).u64(amount);
                e.digest()
            }
        };
        self.schedule_block(chain);
        TraceLine {
            tick,
            kind: "action",
            chain,
            request_id: None,
            digest,
        }
    }

    fn on_block(&mut self, chain: ChainId) -> TraceLine {
        let tick = self.tick;
        let node = self.nodes.get_mut(&chain).expect("known chain");
        node.block_scheduled = false;
        let mut txs = std::mem::take(&mut node.local_pool);
        txs.append(&mut node.mirror_pool);

        let before = node.main.s_main_digest();
        let block = node.main.mine_block(txs, tick);
        self.isolation.blocks += 1;
        if block.writes.iter().any(|w| w.origin == TxKind::SyncMirror) {
            self.isolation.blocks_with_mirror_writes += 1;
        }
        if node.main.s_main_digest() != before
            && !block
                .writes
                .iter()
                .any(|w| matches!(w.origin, TxKind::Local | TxKind::SyncMirror))
        {
            self.isolation.unexplained_main_changes += 1;
        }
        let cblock = node
            .sync
            .on_main_block(&block, &node.policy, &mut node.compact);
        if let Err(e) = &cblock {
            self.violations
                .push(format!("sync of {chain} block {}: {e}", block.height));
        }
        for id in node.sync.rejected_mirrors() {
            self.violations
                .push(format!("mirror {id} rejected on {chain}"));
        }

        let mut calls: Vec<(Address, Payer, ChainId, ExternalContract, Callback)> = Vec::new();
        for ev in &block.events {
            let ChainEvent::Outbound {
                origin,
                payer,
                call,
                ..
            } = ev;
            calls.push((
                *origin,
                (chain, *payer),
                call.target_chain,
                call.target.clone(),
                call.callback,
            ));
        }
        for dc in std::mem::take(&mut node.direct_calls) {
            calls.push((
                dc.sender,
                (chain, dc.sender),
                dc.target_chain,
                dc.target,
                dc.callback,
            ));
        }
        let height = node.main.height();
        let finalized = node.mempool.finalize_ready(height);

        for (sender, payer, target_chain, target, callback) in calls {
            self.initiate(chain, sender, payer, target_chain, target, callback);
        }
        for entry in finalized {
            self.complete(chain, entry.tx);
        }
        self.forward(chain);
        self.schedule_block(chain);

        let mut e = Encoder::new();
        e.hash(&block.digest());
        if let Ok(cb) = &cblock {
            e.hash(&cb.digest());
        }
        TraceLine {
            tick,
            kind: "block",
            chain,
            request_id: None,
            digest: e.digest(),
        }
    }

    /// Estimated destination cost of a request and its callback leg, priced
    /// from the exposed code on the chains involved.
    fn estimate(
        &self,
        target_chain: &ChainId,
        target: &ExternalContract,
        callback: &Callback,
    ) -> Fee {
        let schedule = self.admission.schedule();
        let shape = |chain: &ChainId, addr: &Address, sel: &Selector| {
            self.nodes
                .get(chain)
                .and_then(|n| n.compact.function(addr, sel))
                .map(|d| d.body)
        };
        let mut cd = schedule.estimate_leg(
            shape(
                target_chain,
                &target.contract_address,
                &target.function_selector,
            )
            .as_ref(),
        );
        if let (false, Some(cb_chain)) = (callback.is_none(), callback.chain) {
            cd += schedule.estimate_leg(
                shape(
                    &cb_chain,
                    &callback.callback_address,
                    &callback.callback_selector,
                )
                .as_ref(),
            );
        }
        cd
    }

    fn initiate(
        &mut self,
        chain: ChainId,
        sender: Address,
        payer: Payer,
        target_chain: ChainId,
        target: ExternalContract,
        callback: Callback,
    ) {
        let tick = self.tick;
        self.attempts += 1;
        if !self.nodes[&chain].router.knows(&target_chain) {
            self.router_errors += 1;
            return;
        }
        let cd = self.estimate(&target_chain, &target, &callback);
        let node = self.nodes.get_mut(&chain).expect("known chain");
        let id = node.router.peek_request_id(sender, tick);
        if let Admission::Refused(error) =
            self.admission
                .admission_check(&mut self.ledger, payer, id, target_chain, cd)
        {
            self.refusals.push(Refusal {
                tick,
                chain,
                payer: payer.1,
                error,
            });
            return;
        }
        let (rid, _) = node
            .router
            .initiate_cross_chain_call(target_chain, target, callback, sender, tick)
            .expect("target chain checked");
        debug_assert_eq!(rid, id);
        self.root_gas.insert(rid, 0);
        self.record_request(rid, rid, chain, target_chain);
    }

    fn record_request(&mut self, id: RequestId, root: RequestId, from: ChainId, to: ChainId) {
        let prev = self.requests.insert(
            id,
            RequestRecord {
                id,
                root,
                from,
                to,
                issued_tick: self.tick,
                terminal: None,
            },
        );
        if prev.is_some() {
            self.violations.push(format!("request id {id} reused"));
        } else {
            self.request_order.push(id);
        }
    }

    fn forward(&mut self, chain: ChainId) {
        let events = self
            .nodes
            .get_mut(&chain)
            .expect("known chain")
            .router
            .drain_events();
        if events.is_empty() {
            return;
        }
        let out = watch_and_forward(
            chain,
            &events,
            &self.registry,
            &mut self.transport,
            self.tick,
        );
        for f in out {
            match f {
                Forwarded::Scheduled(env) => {
                    self.queue.push(env.deliver_tick, SimEvent::Deliver(env))
                }
                Forwarded::Dropped { request_id, .. } => {
                    self.finish(request_id, Terminal::Failed(FailureReason::Dropped))
                }
                Forwarded::Unroutable {
                    request_id,
                    to_chain,
                } => self.finish(
                    request_id,
                    Terminal::Failed(FailureReason::UnknownChain(to_chain.to_string())),
                ),
            }
        }
    }

    fn on_deliver(&mut self, env: Envelope) -> TraceLine {
        let tick = self.tick;
        let to = env.to_chain;
        let line = |request_id| TraceLine {
            tick,
            kind: "deliver",
            chain: to,
            request_id,
            digest: keccak256(&env.payload),
        };
        self.isolation.deliveries += 1;
        let before: Vec<Hash32> = self
            .nodes
            .values()
            .map(|n| n.main.s_main_digest())
            .collect();

        let call = match CrossChainCall::decode(&env.payload) {
            Ok(c) => c,
            Err(e) => {
                self.violations
                    .push(format!("undecodable envelope to {to}: {e}"));
                return line(None);
            }
        };
        let rid = call.request_id;
        let Some(record) = self.requests.get(&rid) else {
            self.violations
                .push(format!("delivery of unknown request {rid}"));
            return line(Some(rid));
        };
        let root = record.root;
        let admission = if record.is_root() {
            self.ledger.hold_collateral(&rid).map(|_| ())
        } else {
            Ok(())
        };

        let node = self
            .nodes
            .get_mut(&to)
            .expect("registered chains have nodes");
        let tx = call.digest();
        let height = node.main.height();
        let mut terminal = None;
        match admission {
            Err(e) => {
                let refused = node.mempool.submit(
                    Candidate {
                        tx,
                        request: rid,
                        via_compact: false,
                        admission: Err(e),
                    },
                    height,
                );
                debug_assert!(refused.is_err());
                terminal = Some(Terminal::Failed(FailureReason::AdmissionRefused(
                    e.to_string(),
                )));
            }
            Ok(()) => match node
                .router
                .execute_incoming(&call, &mut node.compact, &node.policy)
            {
                Err(reason) => {
                    let cand = Candidate {
                        tx,
                        request: rid,
                        via_compact: false,
                        admission: Ok(()),
                    };
                    if node.mempool.submit(cand, height).is_ok() {
                        node.mempool.reject(&tx);
                    }
                    terminal = Some(Terminal::Failed(reason));
                }
                Ok(exec) => {
                    node.compact.seal_exec();
                    if let Some(m) = node.sync.on_compact_exec(&exec) {
                        node.mirror_pool.push(m);
                    }
                    *self.root_gas.entry(root).or_default() += exec.cost;
                    self.execs.push(ExecRecord {
                        tick,
                        chain: to,
                        request: rid,
                        contract: exec.contract,
                        selector: exec.selector,
                        callback: false,
                        writes: exec.writes.len(),
                    });
                    let cand = Candidate {
                        tx,
                        request: rid,
                        via_compact: node.compact_bypass,
                        admission: Ok(()),
                    };
                    match node.mempool.submit(cand, height) {
                        Ok(_) => {
                            node.awaiting.insert(tx, Incoming { call, exec });
                        }
                        Err(e) => self.violations.push(format!("mempool refused {rid}: {e}")),
                    }
                }
            },
        }
        if let Some(t) = terminal {
            self.finish(rid, t);
        }

        let node = self.nodes.get_mut(&to).expect("known chain");
        let ready = node.mempool.finalize_ready(height);
        for entry in ready {
            self.complete(to, entry.tx);
        }
        self.forward(to);
        self.schedule_block(to);

        let after: Vec<Hash32> = self
            .nodes
            .values()
            .map(|n| n.main.s_main_digest())
            .collect();
        if before != after {
            self.isolation.delivery_main_changes += 1;
        }
        line(Some(rid))
    }

    /// Routes the result of a finalized inbound execution.
    fn complete(&mut self, chain: ChainId, tx: Hash32) {
        let tick = self.tick;
        let node = self.nodes.get_mut(&chain).expect("known chain");
        let Some(inc) = node.awaiting.remove(&tx) else {
            return;
        };
        let done = node.router.complete_incoming(
            &inc.call,
            &inc.exec,
            &mut node.compact,
            &node.policy,
            tick,
        );
        let rid = inc.call.request_id;
        let root = self.requests.get(&rid).map(|r| r.root).unwrap_or(rid);
        if let Some(cb) = &done.callback_exec {
            node.compact.seal_exec();
            if let Some(m) = node.sync.on_compact_exec(cb) {
                node.mirror_pool.push(m);
            }
            *self.root_gas.entry(root).or_default() += cb.cost;
            self.execs.push(ExecRecord {
                tick,
                chain,
                request: rid,
                contract: cb.contract,
                selector: cb.selector,
                callback: true,
                writes: cb.writes.len(),
            });
        }
        if let Terminal::Relayed { follow_up } = done.terminal {
            let to = inc.call.callback.chain.unwrap_or(chain);
            self.record_request(follow_up, root, chain, to);
        }
        self.finish(rid, done.terminal);
    }

    /// Records a leg's terminal outcome and settles its root request once
    /// the whole chain of legs has ended.
    fn finish(&mut self, id: RequestId, terminal: Terminal) {
        let tick = self.tick;
        let Some(rec) = self.requests.get_mut(&id) else {
            self.violations
                .push(format!("terminal for unknown request {id}"));
            return;
        };
        if rec.terminal.is_some() {
            self.violations.push(format!("second terminal for {id}"));
            return;
        }
        rec.terminal = Some((tick, terminal.clone()));
        let root = rec.root;
        let outcome = match terminal {
            Terminal::Relayed { .. } => return,
            Terminal::Failed(_) => SettleOutcome::Failed,
            Terminal::Completed | Terminal::CallbackResult { .. } => SettleOutcome::Executed {
                cost: self.admission.schedule().f_base
                    + self.root_gas.get(&root).copied().unwrap_or(0),
            },
        };
        if let Err(e) = self.ledger.settle_or_refund(&root, outcome) {
            self.violations.push(format!("settling {root}: {e}"));
        }
    }

    /// Reads a storage word of a contract on a chain's main state.
    pub fn read_main(&self, chain: &ChainId, contract: &Address, slot: u64) -> Word {
        self.nodes[chain].main.read(contract, &Word::from_u64(slot))
    }

    /// Reads a storage word of a contract on a chain's compact state.
    pub fn read_compact(&self, chain: &ChainId, contract: &Address, slot: u64) -> Word {
        self.nodes[chain]
            .compact
            .read(contract, &Word::from_u64(slot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::contract::library::*;
    use crate::codec::encode_words;
    use crate::config::{chain, CHAIN_A, CHAIN_B, CONSUMER, PROVIDER, USER};

    fn request_value(sim: &mut Simulation, tick: u64) {
        let params = encode_words(&[Word::from(chain(CHAIN_A)), PROVIDER.to_word()]);
        sim.schedule(
            tick,
            chain(CHAIN_B),
            Action::Transact {
                sender: USER,
                target: CONSUMER,
                selector: Selector::from_signature(REQUEST_VALUE),
                params,
            },
        )
        .unwrap();
    }

    #[test]
    fn read_roundtrip() {
        let mut sim = Simulation::new(&SimConfig::read_pattern(), 1).unwrap();
        request_value(&mut sim, 1);
        sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
        let (a, b) = (chain(CHAIN_A), chain(CHAIN_B));
        assert_eq!(sim.read_main(&b, &CONSUMER, 0), Word::from_u64(42));
        assert_eq!(sim.read_compact(&b, &CONSUMER, 0), Word::from_u64(42));
        assert!(sim.is_consistent());
        assert!(sim.fee_conserved());
        assert!(sim.violations().is_empty(), "{:?}", sim.violations());
        assert_eq!(sim.unresolved(), 0);
        let legs: Vec<_> = sim.requests().collect();
        assert_eq!(legs.len(), 2);
        assert_eq!((legs[0].from, legs[0].to), (b, a));
        assert!(matches!(
            legs[0].terminal,
            Some((_, Terminal::Relayed { .. }))
        ));
        assert_eq!(legs[1].terminal.as_ref().unwrap().1, Terminal::Completed);
        // Lock of 10 + 5 + 8 fully charged: getValue and handleResult.
        let s = &sim.ledger().settlements()[0];
        assert_eq!(s.charged, 23);
        assert_eq!(sim.isolation().violations(), 0);
    }

    #[test]
    fn deterministic_trace() {
        let run = |seed| {
            let mut cfg = SimConfig::read_pattern();
            cfg.transport.latency_max = 9;
            let mut sim = Simulation::new(&cfg, seed).unwrap();
            for t in 1..5 {
                request_value(&mut sim, t);
            }
            sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
            sim.trace().render()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn without_bypass_the_callback_waits_six_blocks() {
        let mut cfg = SimConfig::read_pattern();
        for c in &mut cfg.chains {
            c.compact_bypass = false;
        }
        let mut sim = Simulation::new(&cfg, 1).unwrap();
        request_value(&mut sim, 1);
        sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
        let legs: Vec<_> = sim.requests().collect();
        let (t_first, _) = legs[0].terminal.clone().unwrap();
        // Delivered at tick 3 on A; final once A has mined 6 more blocks.
        assert_eq!(t_first, 3 + 6);
        assert_eq!(
            sim.read_main(&chain(CHAIN_B), &CONSUMER, 0),
            Word::from_u64(42)
        );
        assert!(sim.fee_conserved());
    }

    #[test]
    fn refused_when_broke() {
        let mut cfg = SimConfig::read_pattern();
        cfg.fees.accounts[0].balance = 22;
        let mut sim = Simulation::new(&cfg, 1).unwrap();
        request_value(&mut sim, 1);
        sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
        assert_eq!(sim.refusals().len(), 1);
        assert_eq!(sim.requests().count(), 0);
        assert_eq!(sim.read_main(&chain(CHAIN_B), &CONSUMER, 0), Word::ZERO);
        assert!(sim.fee_conserved());
    }

    #[test]
    fn dropped_request_is_refunded() {
        let mut cfg = SimConfig::read_pattern();
        cfg.transport.drop_probability = 1.0;
        let mut sim = Simulation::new(&cfg, 1).unwrap();
        request_value(&mut sim, 1);
        sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
        let rec = sim.requests().next().unwrap();
        assert_eq!(
            rec.terminal.as_ref().unwrap().1,
            Terminal::Failed(FailureReason::Dropped)
        );
        let payer = (chain(CHAIN_B), USER);
        assert_eq!(sim.ledger().balance(&payer), 1_000_000 - 10);
        assert_eq!(sim.ledger().sink(), 10);
        assert!(sim.fee_conserved());
    }

    #[test]
    fn private_destination_fails_fast() {
        let mut cfg = SimConfig::read_pattern();
        cfg.chains[0].public = false;
        let mut sim = Simulation::new(&cfg, 1).unwrap();
        request_value(&mut sim, 1);
        sim.run_until_quiescent(DEFAULT_EVENT_BUDGET).unwrap();
        let rec = sim.requests().next().unwrap();
        assert!(matches!(
            rec.terminal,
            Some((_, Terminal::Failed(FailureReason::UnknownChain(_))))
        ));
        assert!(sim.fee_conserved());
    }

    #[test]
    fn event_budget() {
        let mut sim = Simulation::new(&SimConfig::read_pattern(), 1).unwrap();
        request_value(&mut sim, 1);
        assert!(matches!(
            sim.run_until_quiescent(2),
            Err(SimError::EventBudget(2))
        ));
    }
}
