//! Reachability over the abstract machine: the pushdown engine (exact
//! call/return and throw/catch matching via summaries) and a finite-state
//! engine that abstracts the stack through a continuation store.

mod finite;
mod path;
mod pushdown;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ir::{IrError, MethodId, MethodRef, Program};
use crate::machine::domain::DEFAULT_CONSTANT_BUDGET;
use crate::machine::{
    ControlState, Event, Frame, FramePointer, MachineConfig, Store, TaintStore, TerminalKind,
};
use crate::taint::ApiSummaryTable;

pub use finite::{analyze_finite, analyze_finite_with, KAddr, KStore};
pub use path::{reconstruct_edges, reconstruct_path, replay_stack};
pub use pushdown::analyze_pushdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pushdown,
    Finite,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pushdown => "pushdown",
            Mode::Finite => "finite",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const MAX_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisConfig {
    pub mode: Mode,
    pub k: usize,
    pub heap_context: bool,
    pub int_constant_budget: usize,
    pub max_states: usize,
    /// Wall-clock budget; only enforced with the `std` feature.
    pub max_seconds: Option<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            mode: Mode::Pushdown,
            k: 1,
            heap_context: false,
            int_constant_budget: DEFAULT_CONSTANT_BUDGET,
            max_states: 500_000,
            max_seconds: Some(300),
        }
    }
}

impl AnalysisConfig {
    pub fn with_mode(mode: Mode, k: usize) -> Self {
        AnalysisConfig {
            mode,
            k,
            ..AnalysisConfig::default()
        }
    }

    pub fn machine(&self) -> MachineConfig {
        MachineConfig {
            k: self.k,
            heap_context: self.heap_context,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k > MAX_K {
            return Err(alloc::format!(
                "k = {} exceeds the maximum of {MAX_K}",
                self.k
            ));
        }
        if self.max_states == 0 || self.max_seconds == Some(0) || self.int_constant_budget == 0 {
            return Err("budgets must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StackAction {
    NoOp,
    Push(Frame),
    Pop(Frame),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: ControlState,
    pub action: StackAction,
    pub to: ControlState,
}

/// Reachable control states with stack-action-labelled edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DyckStateGraph {
    pub nodes: BTreeSet<ControlState>,
    pub edges: BTreeSet<Edge>,
    /// (push source, pop target) pairs joined by a balanced path.
    pub epsilon: BTreeSet<(ControlState, ControlState)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ResourceLimit {
    MaxStates(usize),
    MaxSeconds(u64),
}

impl fmt::Display for ResourceLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceLimit::MaxStates(n) => write!(f, "state budget of {n} exceeded"),
            ResourceLimit::MaxSeconds(s) => write!(f, "time budget of {s}s exceeded"),
        }
    }
}

/// Instrumentation counters gathered while joining into the global stores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Audit {
    pub joins: u64,
    /// Joins after which the target did not cover the joined value.
    pub monotonicity_violations: u64,
}

#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub mode: Mode,
    pub entry: MethodId,
    pub initial: ControlState,
    pub dsg: DyckStateGraph,
    pub final_store: Store,
    pub final_taint: TaintStore,
    pub visit_counts: BTreeMap<ControlState, u64>,
    pub terminals: BTreeSet<(ControlState, TerminalKind)>,
    /// The edge through which each state was first discovered.
    pub tracebacks: BTreeMap<ControlState, Edge>,
    pub events: BTreeSet<Event>,
    pub diagnostics: BTreeSet<String>,
    pub incomplete: Option<ResourceLimit>,
    /// Continuation store at the end of a finite-mode run.
    pub kstore: Option<KStore>,
    pub audit: Audit,
}

impl AnalysisResult {
    pub fn is_complete(&self) -> bool {
        self.incomplete.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("malformed state: {0}")]
    Malformed(String),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Runs the engine selected by `cfg.mode`.
pub fn analyze(
    p: &Program,
    summaries: &ApiSummaryTable,
    entry: &MethodRef,
    store: Store,
    taint: TaintStore,
    cfg: &AnalysisConfig,
) -> Result<AnalysisResult, AnalysisError> {
    match cfg.mode {
        Mode::Pushdown => analyze_pushdown(p, summaries, entry, store, taint, cfg),
        Mode::Finite => analyze_finite(p, summaries, entry, store, taint, cfg),
    }
}

pub(crate) fn entry_state(p: &Program, entry: &MethodRef) -> Result<ControlState, AnalysisError> {
    let id = p
        .method_id(entry)
        .ok_or_else(|| IrError::UnknownMethod(entry.clone()))?;
    Ok(ControlState::new(
        id,
        0,
        crate::machine::Phase::Exec,
        FramePointer::entry(id),
    ))
}

/// Wall-clock budget check; a no-op without `std`.
pub(crate) struct Clock {
    #[cfg(feature = "std")]
    start: std::time::Instant,
    limit: Option<u64>,
}

impl Clock {
    pub(crate) fn start(limit: Option<u64>) -> Self {
        Clock {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
            limit,
        }
    }

    pub(crate) fn expired(&self) -> Option<ResourceLimit> {
        let limit = self.limit?;
        #[cfg(feature = "std")]
        {
            if self.start.elapsed().as_secs() >= limit {
                return Some(ResourceLimit::MaxSeconds(limit));
            }
        }
        let _ = limit;
        None
    }
}

/// Interning table giving dense ids to values.
#[derive(Debug, Clone)]
pub(crate) struct Interner<T: Ord + Clone> {
    pub items: Vec<T>,
    ids: BTreeMap<T, u32>,
}

impl<T: Ord + Clone> Default for Interner<T> {
    fn default() -> Self {
        Interner {
            items: Vec::new(),
            ids: BTreeMap::new(),
        }
    }
}

impl<T: Ord + Clone> Interner<T> {
    pub fn intern(&mut self, t: &T) -> u32 {
        if let Some(id) = self.ids.get(t) {
            return *id;
        }
        let id = self.items.len() as u32;
        self.items.push(t.clone());
        self.ids.insert(t.clone(), id);
        id
    }

    pub fn get(&self, id: u32) -> &T {
        &self.items[id as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

/// Joins effects into the global stores, updating audit counters; returns
/// the addresses that grew.
pub(crate) fn apply_effects(
    effects: &crate::machine::Effects,
    store: &mut Store,
    taint: &mut TaintStore,
    audit: &mut Audit,
) -> Vec<crate::machine::Addr> {
    let grown = effects.apply(store, taint);
    for (a, v) in &effects.vals {
        audit.joins += 1;
        if !v.leq(store.get(a)) {
            audit.monotonicity_violations += 1;
        }
    }
    for (a, t) in &effects.taints {
        audit.joins += 1;
        if !t.is_subset(taint.get(a)) {
            audit.monotonicity_violations += 1;
        }
    }
    grown
}

#[cfg(test)]
mod tests;
