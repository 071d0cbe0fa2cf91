//! The abstract machine: control states, stack frames and the transition
//! relation, split into stack-neutral/push moves and pop moves so that the
//! reachability engines can supply the top frame themselves.

pub mod domain;
mod step;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::ir::{ClassName, IrError, Label, MethodId, MethodRef, Program, Reg, Stmt};
use crate::taint::{ApiSummaryTable, SinkKind, TaintSet, TaintVal};
use domain::*;

pub use domain::{AbsValue, Addr, FramePointer, ObjectPointer, StmtPos, Store, TaintStore, Val};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// About to execute the statement.
    Exec,
    /// The call at this statement returned; copy `ret` into its target.
    AfterCall,
    /// Unwinding the exception thrown by the `throw` at this statement. The
    /// set holds handler classes already passed; thrown values of those
    /// classes were caught there and are no longer in flight.
    Unwind(BTreeSet<ClassName>),
}

/// The finite part of a configuration: statement position and frame pointer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControlState {
    pub method: MethodId,
    pub index: u32,
    pub phase: Phase,
    pub fp: FramePointer,
}

impl ControlState {
    pub fn new(method: MethodId, index: usize, phase: Phase, fp: FramePointer) -> Self {
        ControlState {
            method,
            index: index as u32,
            phase,
            fp,
        }
    }

    pub fn pos(&self) -> StmtPos {
        StmtPos {
            method: self.method,
            index: self.index,
        }
    }

    fn at(&self, index: usize, phase: Phase) -> ControlState {
        ControlState::new(self.method, index, phase, self.fp.clone())
    }
}

/// Renders a control state as `Class.method(params)@index[phase] fp-context`.
pub struct DisplayState<'a>(pub &'a Program, pub &'a ControlState);

impl fmt::Display for DisplayState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.1;
        write!(f, "{}@{}", self.0.method_ref(q.method), q.index)?;
        match &q.phase {
            Phase::Exec => {}
            Phase::AfterCall => f.write_str("+ret")?,
            Phase::Unwind(ex) => {
                f.write_str("!")?;
                for (i, c) in ex.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
            }
        }
        write!(f, " {}", DisplayFp(self.0, &q.fp))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Frame {
    /// Caller frame: resume in `fp` after the call at `ret`.
    Fun { fp: FramePointer, ret: StmtPos },
    /// Active catch region pushed at `site` in frame `owner`.
    Handler {
        class: ClassName,
        label: Label,
        owner: FramePointer,
        site: StmtPos,
    },
}

/// Things the analysis observes at a control state, beyond store effects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Source {
        state: ControlState,
        category: TaintVal,
    },
    Sink {
        state: ControlState,
        category: TaintVal,
        kind: SinkKind,
    },
    Permission {
        state: ControlState,
        permission: String,
    },
}

impl Event {
    pub fn state(&self) -> &ControlState {
        match self {
            Event::Source { state, .. }
            | Event::Sink { state, .. }
            | Event::Permission { state, .. } => state,
        }
    }
}

/// Store joins and observations produced by one transition.
#[derive(Debug, Clone, Default)]
pub struct Effects {
    pub vals: Vec<(Addr, Val)>,
    pub taints: Vec<(Addr, TaintSet)>,
    pub events: Vec<Event>,
    pub diagnostics: Vec<String>,
}

impl Effects {
    fn val(&mut self, a: Addr, v: Val) {
        if !v.is_empty() {
            self.vals.push((a, v));
        }
    }

    fn taint(&mut self, a: Addr, t: TaintSet) {
        if !t.is_empty() {
            self.taints.push((a, t));
        }
    }

    /// Applies the joins; returns the addresses whose contents grew.
    pub fn apply(&self, store: &mut Store, taint: &mut TaintStore) -> Vec<Addr> {
        let mut grown = Vec::new();
        for (a, v) in &self.vals {
            if store.join(a, v) {
                grown.push(a.clone());
            }
        }
        for (a, t) in &self.taints {
            if taint.join(a, *t) {
                grown.push(a.clone());
            }
        }
        grown
    }
}

/// Read access to the two stores that records which addresses were read.
pub struct StoreView<'a> {
    pub store: &'a Store,
    pub taint: &'a TaintStore,
    reads: RefCell<BTreeSet<Addr>>,
}

impl<'a> StoreView<'a> {
    pub fn new(store: &'a Store, taint: &'a TaintStore) -> Self {
        StoreView {
            store,
            taint,
            reads: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn val(&self, a: &Addr) -> &'a Val {
        self.reads.borrow_mut().insert(a.clone());
        self.store.get(a)
    }

    pub fn taint_of(&self, a: &Addr) -> TaintSet {
        self.reads.borrow_mut().insert(a.clone());
        self.taint.get(a)
    }

    pub fn into_reads(self) -> BTreeSet<Addr> {
        self.reads.into_inner()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transition {
    NoOp(ControlState),
    Push(Frame, ControlState),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalKind {
    Returned,
    Uncaught,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PopOutcome {
    Continue(ControlState),
    Terminal(TerminalKind),
    /// `pop-handler` found no handler frame on top.
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("malformed state: {0}")]
    Malformed(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineConfig {
    /// Call-string length kept in frame pointers.
    pub k: usize,
    /// Whether object pointers also carry the allocating frame's context.
    pub heap_context: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            k: 1,
            heap_context: false,
        }
    }
}

/// The transition relation for one program, summary table and configuration.
#[derive(Clone, Copy)]
pub struct Machine<'p> {
    pub program: &'p Program,
    pub summaries: &'p ApiSummaryTable,
    pub config: MachineConfig,
}

/// A full configuration with explicit stack (top is the last element).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractConfig {
    pub state: ControlState,
    pub store: Store,
    pub taint: TaintStore,
    pub kont: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Successor {
    Config(AbstractConfig),
    /// Empty stack reached; the stores after the final step.
    Terminal(TerminalKind, Store, TaintStore),
}

/// The starting configuration for `entry`: first statement, empty-context
/// frame pointer, the given stores and an empty stack.
pub fn inject(
    p: &Program,
    entry: &MethodRef,
    store: Store,
    taint: TaintStore,
) -> Result<AbstractConfig, IrError> {
    let id = p
        .method_id(entry)
        .ok_or_else(|| IrError::UnknownMethod(entry.clone()))?;
    Ok(AbstractConfig {
        state: ControlState::new(id, 0, Phase::Exec, FramePointer::entry(id)),
        store,
        taint,
        kont: Vec::new(),
    })
}

impl<'p> Machine<'p> {
    pub fn new(
        program: &'p Program,
        summaries: &'p ApiSummaryTable,
        config: MachineConfig,
    ) -> Self {
        Machine {
            program,
            summaries,
            config,
        }
    }

    pub fn stmt(&self, q: &ControlState) -> Option<&'p Stmt> {
        self.program.method(q.method).body.get(q.index as usize)
    }

    /// Whether `q`'s transitions consume the top stack frame.
    pub fn is_pop_state(&self, q: &ControlState) -> bool {
        match q.phase {
            Phase::Unwind(_) => true,
            Phase::AfterCall => false,
            Phase::Exec => matches!(
                self.stmt(q),
                Some(Stmt::Return(_) | Stmt::Throw(_) | Stmt::PopHandler)
            ),
        }
    }

    /// Evaluates an atomic expression against a plain store.
    pub fn eval_atomic(&self, ae: &crate::ir::AExp, fp: &FramePointer, store: &Store) -> Val {
        let empty = TaintStore::new();
        let view = StoreView::new(store, &empty);
        self.eval(ae, fp, &view)
    }

    /// Joins `field` over every object `ae_o` may denote.
    pub fn eval_field(
        &self,
        ae_o: &crate::ir::AExp,
        fp: &FramePointer,
        store: &Store,
        field: &crate::ir::FieldName,
    ) -> Val {
        let empty = TaintStore::new();
        let view = StoreView::new(store, &empty);
        let obj = self.eval(ae_o, fp, &view);
        let mut out = Val::new();
        for (op, _) in obj.objects() {
            out.join(
                store.get(&Addr::Field(op.clone(), field.clone())),
                store.budget(),
            );
        }
        out
    }

    /// All successors of a configuration with an explicit stack.
    pub fn step_config(&self, c: &AbstractConfig) -> Result<Vec<Successor>, MachineError> {
        let view = StoreView::new(&c.store, &c.taint);
        let with = |effects: &Effects| {
            let mut store = c.store.clone();
            let mut taint = c.taint.clone();
            effects.apply(&mut store, &mut taint);
            (store, taint)
        };
        let mut out = Vec::new();
        if self.is_pop_state(&c.state) {
            let popped = self.pop_step(&c.state, c.kont.last(), &view);
            let (store, taint) = with(&popped.effects);
            let rest = &c.kont[..c.kont.len().saturating_sub(1)];
            for o in popped.outcomes {
                match o {
                    PopOutcome::Continue(q) => out.push(Successor::Config(AbstractConfig {
                        state: q,
                        store: store.clone(),
                        taint: taint.clone(),
                        kont: rest.to_vec(),
                    })),
                    PopOutcome::Terminal(kind) => {
                        out.push(Successor::Terminal(kind, store.clone(), taint.clone()))
                    }
                    PopOutcome::Malformed(why) => return Err(MachineError::Malformed(why)),
                }
            }
        } else {
            let local = self.local_step(&c.state, &view);
            let (store, taint) = with(&local.effects);
            for t in local.transitions {
                let (q, kont) = match t {
                    Transition::NoOp(q) => (q, c.kont.clone()),
                    Transition::Push(frame, q) => {
                        let mut kont = c.kont.clone();
                        kont.push(frame);
                        (q, kont)
                    }
                };
                out.push(Successor::Config(AbstractConfig {
                    state: q,
                    store: store.clone(),
                    taint: taint.clone(),
                    kont,
                }));
            }
        }
        Ok(out)
    }

    fn reg(&self, fp: &FramePointer, r: Reg) -> Addr {
        Addr::Reg(fp.clone(), r)
    }
}

/// Output of a stack-neutral or push step.
#[derive(Debug, Clone, Default)]
pub struct LocalStep {
    pub transitions: Vec<Transition>,
    pub effects: Effects,
}

/// Output of a pop step.
#[derive(Debug, Clone, Default)]
pub struct PopStep {
    pub outcomes: Vec<PopOutcome>,
    pub effects: Effects,
}
