//! Shared corpus helpers for the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use pdcfa::core::concrete::{run_concrete, CPhase, Trace};
use pdcfa::core::ir::{parse_program, MethodRef, Program};
use pdcfa::core::machine::{ControlState, FramePointer, Phase, Store, TaintStore};
use pdcfa::core::reach::{analyze, AnalysisConfig, AnalysisResult, Mode};
use pdcfa::core::taint::ApiSummaryTable;
use serde::Deserialize;

pub mod lattice;

pub const FUEL: usize = 200_000;

pub const BUNDLES: [&str; 5] = ["benign", "eps3", "kitty", "perms_over", "perms_zero"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn bundle_dir(name: &str) -> PathBuf {
    corpus_dir().join("bundles").join(name)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CorpusEntry {
    pub file: String,
    /// `Class.method`
    pub entry: String,
    #[serde(default)]
    pub return_flow: bool,
}

pub struct CorpusProgram {
    pub meta: CorpusEntry,
    pub program: Program,
    pub entry: MethodRef,
}

pub fn load_corpus() -> Vec<CorpusProgram> {
    let dir = corpus_dir().join("programs");
    let index = std::fs::read_to_string(dir.join("index.json")).unwrap();
    let entries: Vec<CorpusEntry> = serde_json::from_str(&index).unwrap();
    entries
        .into_iter()
        .map(|meta| {
            let text = std::fs::read_to_string(dir.join(&meta.file)).unwrap();
            let program = parse_program(&text).unwrap_or_else(|e| panic!("{}: {e}", meta.file));
            let (class, method) = meta.entry.rsplit_once('.').unwrap();
            let id = program
                .method_by_name(class, method)
                .unwrap_or_else(|| panic!("{}: no entry {}", meta.file, meta.entry));
            let entry = program.method_ref(id).clone();
            CorpusProgram {
                meta,
                program,
                entry,
            }
        })
        .collect()
}

pub fn run_abstract(c: &CorpusProgram, mode: Mode, k: usize) -> AnalysisResult {
    let table = ApiSummaryTable::android_default();
    let cfg = AnalysisConfig::with_mode(mode, k);
    analyze(
        &c.program,
        &table,
        &c.entry,
        Store::default(),
        TaintStore::new(),
        &cfg,
    )
    .unwrap_or_else(|e| panic!("{}: {e}", c.meta.file))
}

pub fn run_oracle(c: &CorpusProgram) -> Trace {
    run_concrete(
        &c.program,
        &ApiSummaryTable::android_default(),
        &c.entry,
        &[],
        FUEL,
    )
}

type Shape = (u32, u32, u8, FramePointer);

fn phase_tag(p: &Phase) -> u8 {
    match p {
        Phase::Exec => 0,
        Phase::AfterCall => 1,
        Phase::Unwind(_) => 2,
    }
}

/// Checks that `r` over-approximates `t`: every concrete state has an
/// abstract state at the same statement, phase and abstracted frame, and
/// every concrete store write is covered by the final abstract store.
pub fn covers_trace(
    t: &Trace,
    r: &AnalysisResult,
    k: usize,
    heap_context: bool,
) -> Result<(), String> {
    let shapes: BTreeSet<Shape> = r
        .dsg
        .nodes
        .iter()
        .map(|q: &ControlState| (q.method.0, q.index, phase_tag(&q.phase), q.fp.clone()))
        .collect();
    for (i, s) in t.states.iter().enumerate() {
        let tag = match s.phase {
            CPhase::Exec => 0,
            CPhase::AfterCall => 1,
            CPhase::Unwind => 2,
        };
        let shape = (s.method.0, s.index, tag, t.abs_fp(s.frame, k));
        if !shapes.contains(&shape) {
            return Err(format!(
                "concrete state {i} {s:?} has no abstract counterpart"
            ));
        }
    }
    for (a, v, taint) in &t.writes {
        let aa = t.abs_addr(a, k, heap_context);
        let av = t.abs_value(v, k, heap_context);
        if !r.final_store.get(&aa).covers(&av) {
            return Err(format!("write {a:?} = {v} not covered at {aa:?}"));
        }
        if !taint.is_subset(r.final_taint.get(&aa)) {
            return Err(format!("taint of write {a:?} not covered"));
        }
    }
    Ok(())
}

pub fn control_states(r: &AnalysisResult) -> BTreeSet<ControlState> {
    r.dsg.nodes.clone()
}

/// Structural DOT check: one digraph, declared node ids, quoted strings
/// closed, every edge between declared nodes.
pub fn validate_dot(dot: &str) -> Result<(), String> {
    let mut lines = dot.lines();
    if lines.next() != Some("digraph states {") {
        return Err("missing digraph header".into());
    }
    if dot.lines().last() != Some("}") {
        return Err("missing closing brace".into());
    }
    let mut nodes = BTreeSet::new();
    for line in dot.lines().skip(1) {
        let l = line.trim();
        if l == "}" || l.starts_with("//") || l.starts_with("node [") {
            continue;
        }
        let quotes = l
            .replace("\\\\", "")
            .replace("\\\"", "")
            .matches('"')
            .count();
        if quotes % 2 != 0 {
            return Err(format!("unbalanced quotes: {l}"));
        }
        if !l.ends_with("];") {
            return Err(format!("unterminated statement: {l}"));
        }
        let head = l.split(" [").next().unwrap();
        if let Some((a, b)) = head.split_once(" -> ") {
            for n in [a, b] {
                if !nodes.contains(n) {
                    return Err(format!("edge to undeclared node {n}"));
                }
            }
        } else if head.starts_with('n') && head[1..].chars().all(|c| c.is_ascii_digit()) {
            nodes.insert(head.to_string());
        } else {
            return Err(format!("unexpected line: {l}"));
        }
    }
    Ok(())
}

/// (from, to, label) of one DOT edge.
type DotEdge = (String, String, String);

/// Groups highlighted DOT edges by (finding, segment) in step order and
/// replays each group: consecutive edges must chain, and every pop must
/// match the innermost open push. Returns the number of segments checked.
pub fn replay_dot_witnesses(dot: &str) -> Result<usize, String> {
    let mut segs: BTreeMap<(usize, usize), BTreeMap<usize, DotEdge>> = BTreeMap::new();
    for line in dot.lines() {
        let l = line.trim();
        let Some((head, attrs)) = l.split_once(" [") else {
            continue;
        };
        let Some((a, b)) = head.split_once(" -> ") else {
            continue;
        };
        let Some(w) = attrs.split("witness=\"").nth(1) else {
            continue;
        };
        let label = attrs
            .split("label=\"")
            .nth(1)
            .and_then(|s| s.split('"').next())
            .unwrap_or("");
        for tag in w.split('"').next().unwrap().split(',') {
            let parts: Vec<usize> = tag.split('.').map(|x| x.parse().unwrap()).collect();
            segs.entry((parts[0], parts[1]))
                .or_default()
                .insert(parts[2], (a.to_string(), b.to_string(), label.to_string()));
        }
    }
    for ((i, s), steps) in &segs {
        let mut stack: Vec<&str> = Vec::new();
        let mut at: Option<&str> = None;
        for (j, (expected, (from, to, label))) in steps.iter().enumerate() {
            if *expected != j {
                return Err(format!("witness {i}.{s} skips step {j}"));
            }
            if at.is_some_and(|x| x != from) {
                return Err(format!("witness {i}.{s} breaks at step {j}"));
            }
            if let Some(f) = label.strip_prefix("push ") {
                stack.push(f);
            } else if let Some(f) = label.strip_prefix("pop ") {
                if stack.pop() != Some(f) {
                    return Err(format!("witness {i}.{s} pops {f} unmatched at step {j}"));
                }
            }
            at = Some(to);
        }
    }
    Ok(segs.len())
}

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pdcfa"))
        .args(args)
        .env("PDCFA_LOG", "error")
        .output()
        .expect("spawn pdcfa");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Runs `pdcfa analyze` on a corpus bundle, writing into `out`.
pub fn analyze_cli(bundle: &str, extra: &[&str], out: &std::path::Path) -> (i32, String, String) {
    let b = bundle_dir(bundle);
    let mut args = vec![
        "analyze",
        "--bundle",
        b.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run_cli(&args)
}

pub struct GoldenCase {
    pub name: &'static str,
    pub bundle: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
}

pub const GOLDEN_CASES: [GoldenCase; 6] = [
    GoldenCase {
        name: "benign",
        bundle: "benign",
        args: &[],
        exit: 0,
    },
    GoldenCase {
        name: "eps3",
        bundle: "eps3",
        args: &[],
        exit: 1,
    },
    GoldenCase {
        name: "kitty",
        bundle: "kitty",
        args: &[],
        exit: 1,
    },
    GoldenCase {
        name: "kitty_finite_k0",
        bundle: "kitty",
        args: &["--mode", "finite", "--k", "0"],
        exit: 1,
    },
    GoldenCase {
        name: "perms_over",
        bundle: "perms_over",
        args: &[],
        exit: 0,
    },
    GoldenCase {
        name: "perms_zero",
        bundle: "perms_zero",
        args: &[],
        exit: 0,
    },
];

pub fn golden_dir(case: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
        .join(case)
}

/// Compares the report files in `out` with the checked-in copies, or
/// refreshes them when UPDATE_GOLDENS=1.
pub fn check_goldens(case: &str, out: &std::path::Path) -> Result<(), String> {
    let dir = golden_dir(case);
    let update = std::env::var("UPDATE_GOLDENS").is_ok_and(|v| v == "1");
    for f in pdcfa::run::REPORT_FILES {
        let got = std::fs::read_to_string(out.join(f)).map_err(|e| format!("{case}/{f}: {e}"))?;
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(dir.join(f), &got).unwrap();
            continue;
        }
        let want =
            std::fs::read_to_string(dir.join(f)).map_err(|e| format!("golden {case}/{f}: {e}"))?;
        if got != want {
            let line = got
                .lines()
                .zip(want.lines())
                .position(|(a, b)| a != b)
                .map_or(0, |i| i + 1);
            return Err(format!("{case}/{f} differs from golden near line {line}"));
        }
    }
    Ok(())
}

pub fn schema_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"))
}

pub fn check_schema(name: &str, doc: &str) -> Result<(), String> {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path(name)).unwrap()).unwrap();
    let instance: serde_json::Value =
        serde_json::from_str(doc).map_err(|e| format!("{name}: {e}"))?;
    let v = jsonschema::validator_for(&schema).map_err(|e| format!("{name} schema: {e}"))?;
    let errs: Vec<String> = v
        .iter_errors(&instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(format!("{name}: {}", errs.join("; ")))
    }
}

/// Schema name for each JSON output file.
pub const JSON_OUTPUTS: [(&str, &str); 4] = [
    (pdcfa::run::FLOW_REPORT, "flow_report"),
    (pdcfa::run::PERMISSIONS_REPORT, "permissions_report"),
    (pdcfa::run::HEAT_MAP, "heatmap"),
    (pdcfa::run::RUN_META, "run_meta"),
];

pub fn check_output_schemas(out: &std::path::Path) -> Result<(), String> {
    for (file, schema) in JSON_OUTPUTS {
        let doc = std::fs::read_to_string(out.join(file)).map_err(|e| format!("{file}: {e}"))?;
        check_schema(schema, &doc)?;
    }
    Ok(())
}
