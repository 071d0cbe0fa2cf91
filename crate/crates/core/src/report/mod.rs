//! Report documents: information flows, least permissions, heat map and
//! the annotated state graph. Documents are plain serializable structs; the
//! std crate writes them out as JSON.

pub mod dot;
pub mod predicate;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::ir::{MethodId, Program};
use crate::machine::{ControlState, DisplayState};
use crate::permissions::PermissionReport;
use crate::reach::{AnalysisConfig, AnalysisResult};
use crate::taint::{SinkKind, TaintFinding, TaintVal};

pub use dot::export_graph;
pub use predicate::{Atom, Predicate, PredicateError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TOP_N: usize = 50;

/// Tool version, configuration and input digests embedded in every document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub tool_version: String,
    pub config: AnalysisConfig,
    /// Input file name → hex digest.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(config: &AnalysisConfig, inputs: BTreeMap<String, String>) -> Self {
        Provenance {
            tool_version: TOOL_VERSION.into(),
            config: config.clone(),
            inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeLoc {
    pub class: String,
    pub method: String,
    pub line: u32,
}

impl CodeLoc {
    fn of(p: &Program, q: &ControlState) -> Self {
        let m = p.method_ref(q.method);
        CodeLoc {
            class: m.class.to_string(),
            method: m.name.to_string(),
            line: p.line_at(q.method, q.index as usize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowSite {
    pub class: String,
    pub method: String,
    pub line: u32,
    pub state: String,
}

impl FlowSite {
    fn of(p: &Program, q: &ControlState) -> Self {
        let at = CodeLoc::of(p, q);
        FlowSite {
            class: at.class,
            method: at.method,
            line: at.line,
            state: DisplayState(p, q).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowEntry {
    pub unit: String,
    pub trigger: String,
    pub category: TaintVal,
    pub source: FlowSite,
    pub sink: FlowSite,
    pub sink_kind: SinkKind,
    pub sink_permissions: Vec<String>,
    /// Source path then sink path, consecutive repeats collapsed.
    pub witness: Vec<CodeLoc>,
    pub witness_found: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowReport {
    pub provenance: Provenance,
    pub predicate: Option<String>,
    /// False when a resource limit cut the analysis short.
    pub complete: bool,
    pub total_findings: usize,
    pub findings: Vec<FlowEntry>,
    pub verdict_hints: Vec<String>,
}

fn witness_locs(p: &Program, f: &TaintFinding) -> Vec<CodeLoc> {
    let mut out: Vec<CodeLoc> = Vec::new();
    for q in f.witness() {
        let loc = CodeLoc::of(p, &q);
        if out.last() != Some(&loc) {
            out.push(loc);
        }
    }
    out
}

fn flow_hint(f: &TaintFinding) -> String {
    format!(
        "{} data may flow into the {} sink call in {}.{} (line {}) when {} runs",
        f.category,
        f.sink_kind.name(),
        f.sink.method.class,
        f.sink.method.name,
        f.sink.line,
        f.trigger
    )
}

/// The findings accepted by `pred`, rendered for the flow report.
pub fn emit_flow_report(
    p: &Program,
    findings: &[TaintFinding],
    pred: Option<&Predicate>,
    provenance: Provenance,
    complete: bool,
) -> FlowReport {
    let kept: Vec<&TaintFinding> = findings
        .iter()
        .filter(|f| pred.is_none_or(|pr| pr.accepts(f)))
        .collect();
    let mut hints: Vec<String> = kept.iter().map(|f| flow_hint(f)).collect();
    hints.dedup();
    if !complete {
        hints.push("analysis stopped at a resource limit; flows may be missing".into());
    }
    FlowReport {
        provenance,
        predicate: pred.filter(|p| !p.is_trivial()).map(ToString::to_string),
        complete,
        total_findings: findings.len(),
        findings: kept
            .iter()
            .map(|f| FlowEntry {
                unit: f.unit.clone(),
                trigger: f.trigger.to_string(),
                category: f.category,
                source: FlowSite::of(p, &f.source.state),
                sink: FlowSite::of(p, &f.sink.state),
                sink_kind: f.sink_kind,
                sink_permissions: f.sink_permissions.iter().cloned().collect(),
                witness: witness_locs(p, f),
                witness_found: f.source_path.found && f.sink_path.found,
            })
            .collect(),
        verdict_hints: hints,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PermissionsReport {
    pub provenance: Provenance,
    pub requested: Vec<String>,
    pub reached: Vec<String>,
    pub over_privileged: Vec<String>,
    pub missing: Vec<String>,
    pub evidence: BTreeMap<String, Vec<FlowSite>>,
    pub lower_bound: bool,
    pub verdict_hints: Vec<String>,
}

pub fn emit_permissions_report(
    p: &Program,
    r: &PermissionReport,
    provenance: Provenance,
) -> PermissionsReport {
    let mut hints = Vec::new();
    for perm in &r.over_privileged {
        hints.push(format!("{perm} is requested but no reachable code uses it"));
    }
    for perm in &r.missing {
        hints.push(format!(
            "{perm} is used by reachable code but not requested"
        ));
    }
    if r.lower_bound {
        hints.push(
            "analysis stopped at a resource limit; reached permissions are a lower bound".into(),
        );
    }
    PermissionsReport {
        provenance,
        requested: r.requested.iter().cloned().collect(),
        reached: r.reached.iter().cloned().collect(),
        over_privileged: r.over_privileged.iter().cloned().collect(),
        missing: r.missing.iter().cloned().collect(),
        evidence: r
            .evidence
            .iter()
            .map(|(perm, sites)| {
                (
                    perm.clone(),
                    sites.iter().map(|(q, _)| FlowSite::of(p, q)).collect(),
                )
            })
            .collect(),
        lower_bound: r.lower_bound,
        verdict_hints: hints,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MethodHeat {
    pub method: String,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatementHeat {
    pub class: String,
    pub method: String,
    pub index: u32,
    pub line: u32,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HeatMap {
    pub provenance: Provenance,
    pub top_n: usize,
    pub total_visits: u64,
    pub methods: Vec<MethodHeat>,
    pub statements: Vec<StatementHeat>,
}

/// Worklist visits per statement, summed over contexts, phases and results.
pub fn statement_visits<'a>(
    results: impl IntoIterator<Item = &'a AnalysisResult>,
) -> BTreeMap<(MethodId, u32), u64> {
    let mut out = BTreeMap::new();
    for r in results {
        for (q, n) in &r.visit_counts {
            *out.entry((q.method, q.index)).or_insert(0) += n;
        }
    }
    out
}

/// Visit counts aggregated per method and per statement, hottest first,
/// each list cut to `top_n`.
pub fn emit_heat_map<'a>(
    p: &Program,
    results: impl IntoIterator<Item = &'a AnalysisResult>,
    top_n: usize,
    provenance: Provenance,
) -> HeatMap {
    let per_stmt = statement_visits(results);
    let mut per_method: BTreeMap<MethodId, u64> = BTreeMap::new();
    for ((m, _), n) in &per_stmt {
        *per_method.entry(*m).or_insert(0) += n;
    }
    let mut methods: Vec<MethodHeat> = per_method
        .iter()
        .map(|(m, n)| MethodHeat {
            method: p.method_ref(*m).to_string(),
            visits: *n,
        })
        .collect();
    methods.sort_by(|a, b| {
        b.visits
            .cmp(&a.visits)
            .then_with(|| a.method.cmp(&b.method))
    });
    methods.truncate(top_n);
    let mut statements: Vec<StatementHeat> = per_stmt
        .iter()
        .map(|((m, i), n)| {
            let r = p.method_ref(*m);
            StatementHeat {
                class: r.class.to_string(),
                method: r.to_string(),
                index: *i,
                line: p.line_at(*m, *i as usize),
                visits: *n,
            }
        })
        .collect();
    statements.sort_by(|a, b| {
        b.visits
            .cmp(&a.visits)
            .then_with(|| a.method.cmp(&b.method))
            .then_with(|| a.index.cmp(&b.index))
    });
    statements.truncate(top_n);
    HeatMap {
        provenance,
        top_n,
        total_visits: per_stmt.values().sum(),
        methods,
        statements,
    }
}
