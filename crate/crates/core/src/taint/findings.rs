//! Source-to-sink findings over saturated entry-point results.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{SinkKind, TaintSet, TaintVal};
use crate::eps::{EntryResult, SaturationTrace};
use crate::ir::{MethodRef, Program};
use crate::machine::{ControlState, Event, StmtPos};
use crate::reach::{reconstruct_edges, AnalysisResult, Edge};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteRef {
    pub state: ControlState,
    pub method: MethodRef,
    pub line: u32,
}

impl SiteRef {
    fn new(p: &Program, state: &ControlState) -> Self {
        SiteRef {
            state: state.clone(),
            method: p.method_ref(state.method).clone(),
            line: p.line_at(state.method, state.index as usize),
        }
    }
}

/// A path from an entry point's first state, empty stack, to a target state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub entry: MethodRef,
    pub edges: Vec<Edge>,
    /// Whether a path was found; false only for truncated results.
    pub found: bool,
    start: ControlState,
}

impl Segment {
    fn new(r: &EntryResult, to: &ControlState) -> Self {
        let res = &r.result;
        let edges = reconstruct_edges(res, &res.initial, to);
        Segment {
            entry: r.entry.method.clone(),
            found: edges.is_some(),
            edges: edges.unwrap_or_default(),
            start: res.initial.clone(),
        }
    }

    pub fn states(&self) -> Vec<ControlState> {
        let mut out = alloc::vec![self.start.clone()];
        out.extend(self.edges.iter().map(|e| e.to.clone()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintFinding {
    pub category: TaintVal,
    pub unit: String,
    /// The entry point whose analysis reached the sink.
    pub trigger: MethodRef,
    pub source: SiteRef,
    pub sink: SiteRef,
    pub sink_kind: SinkKind,
    /// Permissions required by the API called at the sink.
    pub sink_permissions: BTreeSet<String>,
    /// How the source was reached.
    pub source_path: Segment,
    /// How the sink was reached from the trigger.
    pub sink_path: Segment,
}

impl TaintFinding {
    /// The source path followed by the sink path.
    pub fn witness(&self) -> Vec<ControlState> {
        let mut out = self.source_path.states();
        out.extend(self.sink_path.states());
        out
    }

    pub fn witness_edges(&self) -> impl Iterator<Item = &Edge> {
        self.source_path.edges.iter().chain(&self.sink_path.edges)
    }
}

/// Pairs every sink hit with every source of the same category. Duplicates
/// (same trigger, category, source statement and sink statement) are dropped.
pub fn extract_findings(p: &Program, trace: &SaturationTrace) -> Vec<TaintFinding> {
    let mut sources: BTreeMap<TaintVal, Vec<(&EntryResult, &ControlState)>> = BTreeMap::new();
    for r in &trace.results {
        for e in &r.result.events {
            if let Event::Source { state, category } = e {
                sources.entry(*category).or_default().push((r, state));
            }
        }
    }
    let mut seen: BTreeSet<(MethodRef, TaintVal, StmtPos, StmtPos, SinkKind)> = BTreeSet::new();
    let mut out = Vec::new();
    for r in &trace.results {
        for e in &r.result.events {
            let Event::Sink {
                state,
                category,
                kind,
            } = e
            else {
                continue;
            };
            for (src_entry, src_state) in
                sources.get(category).map(Vec::as_slice).unwrap_or_default()
            {
                let key = (
                    r.entry.method.clone(),
                    *category,
                    src_state.pos(),
                    state.pos(),
                    *kind,
                );
                if !seen.insert(key) {
                    continue;
                }
                out.push(TaintFinding {
                    category: *category,
                    unit: r.unit.clone(),
                    trigger: r.entry.method.clone(),
                    source: SiteRef::new(p, src_state),
                    sink: SiteRef::new(p, state),
                    sink_kind: *kind,
                    sink_permissions: r
                        .result
                        .events
                        .iter()
                        .filter_map(|e| match e {
                            Event::Permission {
                                state: s,
                                permission,
                            } if s == state => Some(permission.clone()),
                            _ => None,
                        })
                        .collect(),
                    source_path: Segment::new(src_entry, src_state),
                    sink_path: Segment::new(r, state),
                });
            }
        }
    }
    out.sort_by(|a, b| {
        (
            &a.unit,
            a.source.line,
            a.sink.line,
            &a.trigger,
            a.category,
            &a.source.state,
            &a.sink.state,
        )
            .cmp(&(
                &b.unit,
                b.source.line,
                b.sink.line,
                &b.trigger,
                b.category,
                &b.source.state,
                &b.sink.state,
            ))
    });
    out
}

fn source_categories(r: &AnalysisResult) -> TaintSet {
    let mut out = TaintSet::default();
    for e in &r.events {
        if let Event::Source { category, .. } = e {
            out.insert(*category);
        }
    }
    out
}

/// Categories in `r`'s final taint store that neither `seed` nor any source
/// application in `r` accounts for. Always empty for a correct engine.
pub fn unexplained_taint(r: &AnalysisResult, seed: TaintSet) -> TaintSet {
    let known = source_categories(r).union(seed);
    let mut out = TaintSet::default();
    for t in r
        .final_taint
        .categories()
        .iter()
        .filter(|t| !known.contains(*t))
    {
        out.insert(t);
    }
    out
}

/// [`unexplained_taint`] over a whole saturation, seeded with nothing.
pub fn unexplained_app_taint(trace: &SaturationTrace) -> TaintSet {
    let mut known = TaintSet::default();
    for r in &trace.results {
        known.join(source_categories(&r.result));
    }
    let mut out = TaintSet::default();
    for t in trace
        .taint
        .categories()
        .iter()
        .filter(|t| !known.contains(*t))
    {
        out.insert(t);
    }
    out
}
