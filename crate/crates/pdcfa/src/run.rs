//! One analysis of a bundle, start to finish, and the files it produces.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use pdcfa_core::eps::{saturate_app, EpsError, SaturationTrace};
use pdcfa_core::permissions::{build_permission_report, collect_app_permissions};
use pdcfa_core::reach::{AnalysisConfig, AnalysisResult};
use pdcfa_core::report::{
    emit_flow_report, emit_heat_map, emit_permissions_report, export_graph, FlowReport, HeatMap,
    PermissionsReport, Predicate, Provenance, DEFAULT_TOP_N, TOOL_VERSION,
};
use pdcfa_core::taint::{extract_findings, unexplained_app_taint, TaintFinding, TaintVal};
use serde::Serialize;

use crate::bundle::Bundle;

pub const FLOW_REPORT: &str = "flow_report.json";
pub const PERMISSIONS_REPORT: &str = "permissions_report.json";
pub const HEAT_MAP: &str = "heatmap.json";
pub const STATE_GRAPH: &str = "state_graph.dot";
pub const RUN_META: &str = "run_meta.json";

/// The four report files; `run_meta.json` holds timings and is not among them.
pub const REPORT_FILES: [&str; 4] = [FLOW_REPORT, PERMISSIONS_REPORT, HEAT_MAP, STATE_GRAPH];

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: AnalysisConfig,
    /// Conjoined with the bundle's own predicates.
    pub predicate: Option<Predicate>,
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UnitMeta {
    pub name: String,
    pub entry_points: Vec<String>,
    pub passes: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMeta {
    pub tool_version: String,
    pub app_name: String,
    pub config: AnalysisConfig,
    pub inputs: BTreeMap<String, String>,
    pub predicate: Option<String>,
    pub jobs: usize,
    pub units: Vec<UnitMeta>,
    pub rounds: usize,
    pub states: usize,
    pub edges: usize,
    pub findings_total: usize,
    pub findings_reported: usize,
    pub complete: bool,
    pub limit: Option<String>,
    pub joins: u64,
    pub monotonicity_violations: u64,
    pub unexplained_taint: Vec<TaintVal>,
    pub diagnostics: Vec<String>,
    pub elapsed_ms: u64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub trace: SaturationTrace,
    /// Every finding, before the predicate.
    pub findings: Vec<TaintFinding>,
    pub flow: FlowReport,
    pub permissions: PermissionsReport,
    pub heat: HeatMap,
    pub dot: String,
    pub meta: RunMeta,
}

impl RunOutput {
    pub fn complete(&self) -> bool {
        self.trace.incomplete.is_none()
    }

    /// 3 when a budget ran out, 1 with reported findings, else 0.
    pub fn exit_code(&self) -> i32 {
        if !self.complete() {
            3
        } else if !self.flow.findings.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn results(&self) -> impl Iterator<Item = &AnalysisResult> {
        self.trace.results.iter().map(|r| &r.result)
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report documents serialize");
    s.push('\n');
    s
}

fn merged_predicate(b: &Bundle, extra: Option<&Predicate>) -> Predicate {
    let mut p = b.predicate.clone();
    if let Some(e) = extra {
        p.atoms.extend(e.atoms.iter().cloned());
    }
    p
}

pub fn run_bundle(b: &Bundle, opts: &RunOptions) -> Result<RunOutput, EpsError> {
    let started = Instant::now();
    let cfg = &opts.config;
    log::info!(
        "analyzing {} ({} mode, k = {})",
        b.manifest.app_name,
        cfg.mode,
        cfg.k
    );
    let trace = saturate_app(&b.program, &b.summaries, &b.units, cfg)?;
    log::info!("saturated after {} rounds", trace.rounds);
    let findings = extract_findings(&b.program, &trace);
    let pred = merged_predicate(b, opts.predicate.as_ref());
    let complete = trace.incomplete.is_none();
    let prov = Provenance::new(cfg, b.digests.clone());

    let flow = emit_flow_report(&b.program, &findings, Some(&pred), prov.clone(), complete);
    let shown: Vec<TaintFinding> = findings
        .iter()
        .filter(|f| pred.accepts(f))
        .cloned()
        .collect();
    let collected = collect_app_permissions(&trace);
    let perm = build_permission_report(&b.program, &b.requested, &collected, !complete);
    let permissions = emit_permissions_report(&b.program, &perm, prov.clone());
    let results: Vec<&AnalysisResult> = trace.results.iter().map(|r| &r.result).collect();
    let heat = emit_heat_map(&b.program, results.iter().copied(), DEFAULT_TOP_N, prov);
    let dot = export_graph(&b.program, results.iter().copied(), &shown);

    let mut diagnostics: Vec<String> = results
        .iter()
        .flat_map(|r| r.diagnostics.iter().cloned())
        .collect();
    diagnostics.sort();
    diagnostics.dedup();
    for d in &diagnostics {
        log::warn!("{d}");
    }
    let meta = RunMeta {
        tool_version: TOOL_VERSION.into(),
        app_name: b.manifest.app_name.clone(),
        config: cfg.clone(),
        inputs: b.digests.clone(),
        predicate: flow.predicate.clone(),
        jobs: opts.jobs,
        units: b
            .units
            .iter()
            .map(|u| UnitMeta {
                name: u.name.clone(),
                entry_points: u
                    .entry_points
                    .iter()
                    .map(|e| e.method.to_string())
                    .collect(),
                passes: trace.unit_passes.get(&u.name).copied().unwrap_or(0),
            })
            .collect(),
        rounds: trace.rounds,
        states: results.iter().map(|r| r.dsg.nodes.len()).sum(),
        edges: results.iter().map(|r| r.dsg.edges.len()).sum(),
        findings_total: findings.len(),
        findings_reported: flow.findings.len(),
        complete,
        limit: trace.incomplete.map(|l| l.to_string()),
        joins: trace.audit.joins,
        monotonicity_violations: trace.audit.monotonicity_violations,
        unexplained_taint: unexplained_app_taint(&trace).iter().collect(),
        diagnostics,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    Ok(RunOutput {
        trace,
        findings,
        flow,
        permissions,
        heat,
        dot,
        meta,
    })
}

/// Writes all five files into `out`, creating it if needed.
pub fn write_reports(out: &Path, o: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(FLOW_REPORT), to_json(&o.flow))?;
    fs::write(out.join(PERMISSIONS_REPORT), to_json(&o.permissions))?;
    fs::write(out.join(HEAT_MAP), to_json(&o.heat))?;
    fs::write(out.join(STATE_GRAPH), &o.dot)?;
    fs::write(out.join(RUN_META), to_json(&o.meta))?;
    Ok(())
}
