//! Summarization-based pushdown reachability.
//!
//! Work items are `(root, state)` pairs: `state` is reachable from `root` by a
//! path whose pushes and pops balance. Roots are push targets plus the
//! bottom root (the entry with an empty stack). A pop from a state in
//! `root`'s summary is propagated to exactly the push sites recorded as
//! callers of `root`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::*;
use crate::machine::{Addr, Machine, PopOutcome, PopStep, StoreView, Transition};

type Sid = u32;
type Fid = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Root {
    Bottom,
    At(Sid),
}

type Item = (Root, Sid);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Act {
    NoOp,
    Push(Fid),
    Pop(Fid),
}

struct Engine<'p> {
    m: Machine<'p>,
    states: Interner<ControlState>,
    frames: Interner<Frame>,
    store: Store,
    taint: TaintStore,
    summ: BTreeMap<Root, BTreeSet<Sid>>,
    poppers: BTreeMap<Root, BTreeSet<Sid>>,
    callers: BTreeMap<Sid, BTreeSet<(Root, Sid, Fid)>>,
    edges: BTreeSet<(Sid, Act, Sid)>,
    epsilon: BTreeSet<(Sid, Sid)>,
    worklist: Vec<Item>,
    queued: BTreeSet<Item>,
    deps: BTreeMap<Addr, BTreeSet<Item>>,
    visits: BTreeMap<Sid, u64>,
    terminals: BTreeSet<(Sid, TerminalKind)>,
    tracebacks: BTreeMap<Sid, (Sid, Act)>,
    events: BTreeSet<Event>,
    diagnostics: BTreeSet<String>,
    audit: Audit,
}

impl<'p> Engine<'p> {
    fn enqueue(&mut self, item: Item) {
        if self.queued.insert(item) {
            self.worklist.push(item);
        }
    }

    fn add(&mut self, root: Root, q: &ControlState, via: Option<(Sid, Act)>) -> Sid {
        let sid = self.states.intern(q);
        if let Some((from, act)) = via {
            self.edges.insert((from, act, sid));
            if from != sid {
                self.tracebacks.entry(sid).or_insert((from, act));
            }
        }
        if self.summ.entry(root).or_default().insert(sid) {
            self.enqueue((root, sid));
        }
        sid
    }

    fn record_reads(&mut self, reads: BTreeSet<Addr>, item: Item) {
        for a in reads {
            self.deps.entry(a).or_default().insert(item);
        }
    }

    fn absorb(&mut self, effects: &crate::machine::Effects) {
        let grown = apply_effects(effects, &mut self.store, &mut self.taint, &mut self.audit);
        self.events.extend(effects.events.iter().cloned());
        self.diagnostics.extend(effects.diagnostics.iter().cloned());
        for a in grown {
            let waiting: Vec<Item> = self
                .deps
                .get(&a)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
            for item in waiting {
                self.enqueue(item);
            }
        }
    }

    /// Pops `frame` off the stack below `popper`, continuing in `caller_root`.
    fn pop_into(
        &mut self,
        popper_root: Root,
        popper: Sid,
        caller_root: Root,
        src: Sid,
        frame: Fid,
    ) -> Result<(), AnalysisError> {
        let q = self.states.get(popper).clone();
        let (step, reads): (PopStep, _) = {
            let view = StoreView::new(&self.store, &self.taint);
            let step = self.m.pop_step(&q, Some(self.frames.get(frame)), &view);
            (step, view.into_reads())
        };
        self.record_reads(reads, (popper_root, popper));
        self.absorb(&step.effects);
        for o in step.outcomes {
            match o {
                PopOutcome::Continue(next) => {
                    let to = self.add(caller_root, &next, Some((popper, Act::Pop(frame))));
                    self.epsilon.insert((src, to));
                }
                PopOutcome::Terminal(kind) => {
                    self.terminals.insert((popper, kind));
                }
                PopOutcome::Malformed(why) => return Err(AnalysisError::Malformed(why)),
            }
        }
        Ok(())
    }

    fn process(&mut self, (root, sid): Item) -> Result<(), AnalysisError> {
        *self.visits.entry(sid).or_default() += 1;
        let q = self.states.get(sid).clone();
        if self.m.is_pop_state(&q) {
            self.poppers.entry(root).or_default().insert(sid);
            match root {
                Root::Bottom => {
                    let (step, reads) = {
                        let view = StoreView::new(&self.store, &self.taint);
                        let step = self.m.pop_step(&q, None, &view);
                        (step, view.into_reads())
                    };
                    self.record_reads(reads, (root, sid));
                    self.absorb(&step.effects);
                    for o in step.outcomes {
                        match o {
                            PopOutcome::Terminal(kind) => {
                                self.terminals.insert((sid, kind));
                            }
                            PopOutcome::Malformed(why) => {
                                return Err(AnalysisError::Malformed(why))
                            }
                            PopOutcome::Continue(_) => {}
                        }
                    }
                }
                Root::At(r) => {
                    let callers: Vec<_> = self
                        .callers
                        .get(&r)
                        .map(|c| c.iter().copied().collect())
                        .unwrap_or_default();
                    for (caller_root, src, frame) in callers {
                        self.pop_into(root, sid, caller_root, src, frame)?;
                    }
                }
            }
            return Ok(());
        }

        let (step, reads) = {
            let view = StoreView::new(&self.store, &self.taint);
            let step = self.m.local_step(&q, &view);
            (step, view.into_reads())
        };
        self.record_reads(reads, (root, sid));
        self.absorb(&step.effects);
        let mut transitions = step.transitions;
        transitions.sort_by(|a, b| target(b).cmp(target(a)));
        for t in transitions {
            match t {
                Transition::NoOp(next) => {
                    self.add(root, &next, Some((sid, Act::NoOp)));
                }
                Transition::Push(frame, next) => {
                    let fid = self.frames.intern(&frame);
                    let target = self.states.intern(&next);
                    let callee = self.add(Root::At(target), &next, Some((sid, Act::Push(fid))));
                    if self
                        .callers
                        .entry(callee)
                        .or_default()
                        .insert((root, sid, fid))
                    {
                        let poppers: Vec<Sid> = self
                            .poppers
                            .get(&Root::At(callee))
                            .map(|s| s.iter().copied().collect())
                            .unwrap_or_default();
                        for p in poppers {
                            self.pop_into(Root::At(callee), p, root, sid, fid)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self, initial: ControlState, incomplete: Option<ResourceLimit>) -> AnalysisResult {
        let st = |id: Sid| self.states.get(id).clone();
        let action = |a: Act| match a {
            Act::NoOp => StackAction::NoOp,
            Act::Push(f) => StackAction::Push(self.frames.get(f).clone()),
            Act::Pop(f) => StackAction::Pop(self.frames.get(f).clone()),
        };
        let dsg = DyckStateGraph {
            nodes: self.states.items.iter().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|&(a, act, b)| Edge {
                    from: st(a),
                    action: action(act),
                    to: st(b),
                })
                .collect(),
            epsilon: self.epsilon.iter().map(|&(a, b)| (st(a), st(b))).collect(),
        };
        AnalysisResult {
            mode: Mode::Pushdown,
            entry: initial.method,
            initial,
            dsg,
            visit_counts: self.visits.iter().map(|(&s, &n)| (st(s), n)).collect(),
            terminals: self.terminals.iter().map(|&(s, k)| (st(s), k)).collect(),
            tracebacks: self
                .tracebacks
                .iter()
                .map(|(&to, &(from, act))| {
                    (
                        st(to),
                        Edge {
                            from: st(from),
                            action: action(act),
                            to: st(to),
                        },
                    )
                })
                .collect(),
            events: self.events,
            diagnostics: self.diagnostics,
            incomplete,
            kstore: None,
            audit: self.audit,
            final_store: self.store,
            final_taint: self.taint,
        }
    }
}

fn target(t: &Transition) -> &ControlState {
    match t {
        Transition::NoOp(q) | Transition::Push(_, q) => q,
    }
}

/// Pushdown reachability from `entry` with the given initial stores.
pub fn analyze_pushdown(
    p: &Program,
    summaries: &ApiSummaryTable,
    entry: &MethodRef,
    store: Store,
    taint: TaintStore,
    cfg: &AnalysisConfig,
) -> Result<AnalysisResult, AnalysisError> {
    cfg.validate().map_err(AnalysisError::Config)?;
    let initial = entry_state(p, entry)?;
    let mut engine = Engine {
        m: Machine::new(p, summaries, cfg.machine()),
        states: Interner::default(),
        frames: Interner::default(),
        store,
        taint,
        summ: BTreeMap::new(),
        poppers: BTreeMap::new(),
        callers: BTreeMap::new(),
        edges: BTreeSet::new(),
        epsilon: BTreeSet::new(),
        worklist: Vec::new(),
        queued: BTreeSet::new(),
        deps: BTreeMap::new(),
        visits: BTreeMap::new(),
        terminals: BTreeSet::new(),
        tracebacks: BTreeMap::new(),
        events: BTreeSet::new(),
        diagnostics: BTreeSet::new(),
        audit: Audit::default(),
    };
    engine.add(Root::Bottom, &initial, None);
    let clock = Clock::start(cfg.max_seconds);
    let mut incomplete = None;
    let mut steps: u64 = 0;
    while let Some(item) = engine.worklist.pop() {
        engine.queued.remove(&item);
        engine.process(item)?;
        steps += 1;
        if engine.states.len() > cfg.max_states {
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
    Ok(engine.finish(initial, incomplete))
}
