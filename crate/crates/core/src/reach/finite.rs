//! Finite-state reachability: the stack is replaced by a pointer into a
//! continuation store, so returns and throws may flow to any frame ever
//! stored at the same continuation address.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::*;
use crate::machine::{Addr, Machine, PopOutcome, StmtPos, StoreView, Transition};

/// Continuation address: where the frame below the current one lives.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KAddr {
    Halt,
    /// Frame pushed when calling into the method running in this frame pointer.
    Call(FramePointer),
    /// Handler pushed at `site` in frame `owner`.
    Handler(FramePointer, StmtPos),
}

/// Non-relational continuation store: frames and their successor addresses
/// are kept separately and recombined freely on pop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KStore {
    pub frames: BTreeMap<KAddr, BTreeSet<Frame>>,
    pub nexts: BTreeMap<KAddr, BTreeSet<KAddr>>,
}

impl KStore {
    pub fn new() -> Self {
        KStore::default()
    }

    /// Returns whether anything new was stored.
    pub fn push(&mut self, at: &KAddr, frame: Frame, next: KAddr) -> bool {
        let a = self.frames.entry(at.clone()).or_default().insert(frame);
        let b = self.nexts.entry(at.clone()).or_default().insert(next);
        a || b
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(BTreeSet::len).sum::<usize>()
            + self.nexts.values().map(BTreeSet::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leq(&self, other: &KStore) -> bool {
        sub(&self.frames, &other.frames) && sub(&self.nexts, &other.nexts)
    }
}

fn sub<T: Ord>(a: &BTreeMap<KAddr, BTreeSet<T>>, b: &BTreeMap<KAddr, BTreeSet<T>>) -> bool {
    a.iter()
        .all(|(k, s)| b.get(k).is_some_and(|t| s.is_subset(t)))
}

fn kaddr_for(frame: &Frame, target: &ControlState) -> KAddr {
    match frame {
        Frame::Fun { .. } => KAddr::Call(target.fp.clone()),
        Frame::Handler { owner, site, .. } => KAddr::Handler(owner.clone(), *site),
    }
}

type Node = (ControlState, KAddr);

/// Finite-state reachability with a fresh continuation store.
pub fn analyze_finite(
    p: &Program,
    summaries: &ApiSummaryTable,
    entry: &MethodRef,
    store: Store,
    taint: TaintStore,
    cfg: &AnalysisConfig,
) -> Result<AnalysisResult, AnalysisError> {
    analyze_finite_with(p, summaries, entry, store, taint, KStore::new(), cfg)
}

/// Finite-state reachability starting from an existing continuation store.
pub fn analyze_finite_with(
    p: &Program,
    summaries: &ApiSummaryTable,
    entry: &MethodRef,
    mut store: Store,
    mut taint: TaintStore,
    mut kstore: KStore,
    cfg: &AnalysisConfig,
) -> Result<AnalysisResult, AnalysisError> {
    cfg.validate().map_err(AnalysisError::Config)?;
    let initial = entry_state(p, entry)?;
    let m = Machine::new(p, summaries, cfg.machine());

    let mut seen: BTreeSet<Node> = BTreeSet::new();
    let mut worklist: Vec<Node> = Vec::new();
    let mut queued: BTreeSet<Node> = BTreeSet::new();
    let mut deps: BTreeMap<Addr, BTreeSet<Node>> = BTreeMap::new();
    let mut kdeps: BTreeMap<KAddr, BTreeSet<Node>> = BTreeMap::new();
    let mut dsg = DyckStateGraph::default();
    let mut visits: BTreeMap<ControlState, u64> = BTreeMap::new();
    let mut terminals = BTreeSet::new();
    let mut tracebacks: BTreeMap<ControlState, Edge> = BTreeMap::new();
    let mut events = BTreeSet::new();
    let mut diagnostics: BTreeSet<String> = BTreeSet::new();
    let mut audit = Audit::default();

    let start = (initial.clone(), KAddr::Halt);
    seen.insert(start.clone());
    dsg.nodes.insert(initial.clone());
    queued.insert(start.clone());
    worklist.push(start);

    let clock = Clock::start(cfg.max_seconds);
    let mut incomplete = None;
    let mut steps: u64 = 0;

    macro_rules! enqueue {
        ($n:expr) => {{
            let n: Node = $n;
            if queued.insert(n.clone()) {
                worklist.push(n);
            }
        }};
    }

    while let Some(node) = worklist.pop() {
        queued.remove(&node);
        let (q, ka) = node.clone();
        *visits.entry(q.clone()).or_default() += 1;

        let mut succs: Vec<(StackAction, Node)> = Vec::new();
        let effects;
        let reads;
        if m.is_pop_state(&q) {
            kdeps.entry(ka.clone()).or_default().insert(node.clone());
            let view = StoreView::new(&store, &taint);
            let mut all = crate::machine::Effects::default();
            if ka == KAddr::Halt {
                let step = m.pop_step(&q, None, &view);
                merge(&mut all, step.effects);
                for o in step.outcomes {
                    match o {
                        PopOutcome::Terminal(kind) => {
                            terminals.insert((q.clone(), kind));
                        }
                        PopOutcome::Malformed(why) => {
                            diagnostics.insert(format!("dropped path: {why}"));
                        }
                        PopOutcome::Continue(_) => {}
                    }
                }
            } else {
                let frames = kstore.frames.get(&ka).cloned().unwrap_or_default();
                let nexts = kstore.nexts.get(&ka).cloned().unwrap_or_default();
                for frame in &frames {
                    let step = m.pop_step(&q, Some(frame), &view);
                    merge(&mut all, step.effects);
                    for o in step.outcomes {
                        match o {
                            PopOutcome::Continue(next) => {
                                for below in &nexts {
                                    succs.push((
                                        StackAction::Pop(frame.clone()),
                                        (next.clone(), below.clone()),
                                    ));
                                }
                            }
                            PopOutcome::Terminal(kind) => {
                                terminals.insert((q.clone(), kind));
                            }
                            PopOutcome::Malformed(why) => {
                                diagnostics.insert(format!("dropped path: {why}"));
                            }
                        }
                    }
                }
            }
            effects = all;
            reads = view.into_reads();
        } else {
            let view = StoreView::new(&store, &taint);
            let step = m.local_step(&q, &view);
            reads = view.into_reads();
            effects = step.effects;
            for t in step.transitions {
                match t {
                    Transition::NoOp(next) => succs.push((StackAction::NoOp, (next, ka.clone()))),
                    Transition::Push(frame, next) => {
                        let at = kaddr_for(&frame, &next);
                        if kstore.push(&at, frame.clone(), ka.clone()) {
                            for n in kdeps.get(&at).cloned().unwrap_or_default() {
                                enqueue!(n);
                            }
                        }
                        succs.push((StackAction::Push(frame), (next, at)));
                    }
                }
            }
        }

        for a in reads {
            deps.entry(a).or_default().insert(node.clone());
        }
        for a in apply_effects(&effects, &mut store, &mut taint, &mut audit) {
            for n in deps.get(&a).cloned().unwrap_or_default() {
                enqueue!(n);
            }
        }
        events.extend(effects.events);
        diagnostics.extend(effects.diagnostics);

        succs.sort_by(|a, b| b.1.cmp(&a.1));
        for (action, next) in succs {
            let edge = Edge {
                from: q.clone(),
                action,
                to: next.0.clone(),
            };
            if next.0 != q {
                tracebacks
                    .entry(next.0.clone())
                    .or_insert_with(|| edge.clone());
            }
            dsg.edges.insert(edge);
            dsg.nodes.insert(next.0.clone());
            if seen.insert(next.clone()) {
                enqueue!(next);
            }
        }

        steps += 1;
        if dsg.nodes.len() > cfg.max_states {
            incomplete = Some(ResourceLimit::MaxStates(cfg.max_states));
            break;
        }
        if steps.is_multiple_of(256) {
            if let Some(limit) = clock.expired() {
                incomplete = Some(limit);
                break;
            }
        }
    }

    Ok(AnalysisResult {
        mode: Mode::Finite,
        entry: initial.method,
        initial,
        dsg,
        final_store: store,
        final_taint: taint,
        visit_counts: visits,
        terminals,
        tracebacks,
        events,
        diagnostics,
        incomplete,
        kstore: Some(kstore),
        audit,
    })
}

fn merge(into: &mut crate::machine::Effects, from: crate::machine::Effects) {
    into.vals.extend(from.vals);
    into.taints.extend(from.taints);
    into.events.extend(from.events);
    into.diagnostics.extend(from.diagnostics);
}
