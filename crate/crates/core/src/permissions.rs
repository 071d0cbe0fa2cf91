//! Least-permission inference: permissions reached through API summaries
//! compared against the permissions an app requests.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use crate::eps::SaturationTrace;
use crate::ir::Program;
use crate::machine::{ControlState, Event};
use crate::reach::AnalysisResult;

/// Permissions used by summary applications in `r`, with the applying state.
pub fn collect_permissions(r: &AnalysisResult) -> BTreeSet<(String, ControlState)> {
    r.events
        .iter()
        .filter_map(|e| match e {
            Event::Permission { state, permission } => Some((permission.clone(), state.clone())),
            _ => None,
        })
        .collect()
}

/// [`collect_permissions`] over every final-round entry result.
pub fn collect_app_permissions(trace: &SaturationTrace) -> BTreeSet<(String, ControlState)> {
    trace
        .results
        .iter()
        .flat_map(|r| collect_permissions(&r.result))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PermissionReport {
    pub requested: BTreeSet<String>,
    pub reached: BTreeSet<String>,
    pub over_privileged: BTreeSet<String>,
    pub missing: BTreeSet<String>,
    /// Where each reached permission is used: state and source line.
    pub evidence: BTreeMap<String, BTreeSet<(ControlState, u32)>>,
    /// Set when the analysis stopped early, so `reached` may be incomplete.
    pub lower_bound: bool,
}

pub fn build_permission_report(
    p: &Program,
    requested: &BTreeSet<String>,
    collected: &BTreeSet<(String, ControlState)>,
    lower_bound: bool,
) -> PermissionReport {
    let mut evidence: BTreeMap<String, BTreeSet<(ControlState, u32)>> = BTreeMap::new();
    for (perm, q) in collected {
        let line = p.line_at(q.method, q.index as usize);
        evidence
            .entry(perm.clone())
            .or_default()
            .insert((q.clone(), line));
    }
    let reached: BTreeSet<String> = evidence.keys().cloned().collect();
    PermissionReport {
        over_privileged: requested.difference(&reached).cloned().collect(),
        missing: reached.difference(requested).cloned().collect(),
        requested: requested.clone(),
        reached,
        evidence,
        lower_bound,
    }
}
