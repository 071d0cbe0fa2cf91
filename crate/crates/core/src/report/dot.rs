//! Graphviz rendering of the union of analyzed state graphs.
//!
//! Nodes read `Class.method:line` over the frame context. Push and pop edges
//! name their frame (`push f3`, `pop f3`); the frame table is emitted as a
//! comment. Edges on a finding's witness are drawn bold red and tagged
//! `witness="i.s.j"`: finding i, segment s (0 source, 1 sink), step j.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::ir::Program;
use crate::machine::domain::DisplayFp;
use crate::machine::{ControlState, Frame, Phase};
use crate::reach::{AnalysisResult, Edge, StackAction};
use crate::taint::TaintFinding;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn node_label(p: &Program, q: &ControlState) -> String {
    let m = p.method_ref(q.method);
    let mut s = format!(
        "{}.{}:{}",
        m.class,
        m.name,
        p.line_at(q.method, q.index as usize)
    );
    match &q.phase {
        Phase::Exec => {}
        Phase::AfterCall => s.push_str(" (ret)"),
        Phase::Unwind(_) => s.push_str(" (unwind)"),
    }
    s.push_str("\n[");
    for (i, site) in q.fp.ctx.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(
            s,
            "{}:{}",
            p.method_ref(site.method).name,
            p.line_at(site.method, site.index as usize)
        );
    }
    s.push(']');
    s
}

fn frame_text(p: &Program, f: &Frame) -> String {
    match f {
        Frame::Fun { fp, ret } => format!("return to {} at {}", DisplayFp(p, fp), ret.index),
        Frame::Handler {
            class, label, site, ..
        } => {
            format!(
                "catch {class} -> {label} at {}@{}",
                p.method_ref(site.method),
                site.index
            )
        }
    }
}

/// Renders every node and edge of `results`, marking finding sources,
/// sinks and witness edges.
pub fn export_graph<'a>(
    p: &Program,
    results: impl IntoIterator<Item = &'a AnalysisResult>,
    findings: &[TaintFinding],
) -> String {
    let mut nodes: BTreeSet<&ControlState> = BTreeSet::new();
    let mut edges: BTreeSet<&Edge> = BTreeSet::new();
    let mut epsilon: BTreeSet<(&ControlState, &ControlState)> = BTreeSet::new();
    let mut entries: BTreeSet<&ControlState> = BTreeSet::new();
    for r in results {
        entries.insert(&r.initial);
        nodes.extend(&r.dsg.nodes);
        edges.extend(&r.dsg.edges);
        epsilon.extend(r.dsg.epsilon.iter().map(|(a, b)| (a, b)));
    }
    let ids: BTreeMap<&ControlState, usize> =
        nodes.iter().enumerate().map(|(i, q)| (*q, i)).collect();

    let mut frames: BTreeMap<&Frame, usize> = BTreeMap::new();
    for e in &edges {
        if let StackAction::Push(f) | StackAction::Pop(f) = &e.action {
            let n = frames.len();
            frames.entry(f).or_insert(n);
        }
    }

    let sources: BTreeSet<&ControlState> = findings.iter().map(|f| &f.source.state).collect();
    let sinks: BTreeSet<&ControlState> = findings.iter().map(|f| &f.sink.state).collect();
    let mut witness: BTreeMap<&Edge, Vec<String>> = BTreeMap::new();
    for (i, f) in findings.iter().enumerate() {
        for (s, seg) in [&f.source_path, &f.sink_path].into_iter().enumerate() {
            for (j, e) in seg.edges.iter().enumerate() {
                witness.entry(e).or_default().push(format!("{i}.{s}.{j}"));
            }
        }
    }

    let mut out = String::from("digraph states {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (f, n) in &frames {
        let _ = writeln!(out, "  // f{n}: {}", frame_text(p, f));
    }
    for (q, id) in &ids {
        let mut attrs = format!("label=\"{}\"", escape(&node_label(p, q)));
        let (src, snk) = (sources.contains(q), sinks.contains(q));
        if src && snk {
            attrs.push_str(", style=filled, fillcolor=orange, role=\"source sink\"");
        } else if src {
            attrs.push_str(", style=filled, fillcolor=lightblue, role=source");
        } else if snk {
            attrs.push_str(", style=filled, fillcolor=salmon, role=sink");
        }
        if entries.contains(q) {
            attrs.push_str(", peripheries=2");
        }
        let _ = writeln!(out, "  n{id} [{attrs}];");
    }
    for e in &edges {
        let label = match &e.action {
            StackAction::NoOp => String::new(),
            StackAction::Push(f) => format!("push f{}", frames[f]),
            StackAction::Pop(f) => format!("pop f{}", frames[f]),
        };
        let mut attrs = format!("label=\"{label}\"");
        if let Some(tags) = witness.get(e) {
            let _ = write!(
                attrs,
                ", color=red, penwidth=2, witness=\"{}\"",
                tags.join(",")
            );
        }
        let _ = writeln!(out, "  n{} -> n{} [{attrs}];", ids[&e.from], ids[&e.to]);
    }
    for (a, b) in &epsilon {
        if let (Some(x), Some(y)) = (ids.get(a), ids.get(b)) {
            let _ = writeln!(out, "  n{x} -> n{y} [label=\"ε\", style=dashed];");
        }
    }
    out.push_str("}\n");
    out
}
