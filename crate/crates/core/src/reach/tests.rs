use super::*;
use crate::ir::{parse_program, Reg};
use crate::machine::{AbsValue, Addr, Phase, Val};
use alloc::vec::Vec;

fn entry(p: &Program, c: &str, m: &str) -> MethodRef {
    p.method_ref(p.method_by_name(c, m).unwrap()).clone()
}

fn run(p: &Program, c: &str, m: &str, mode: Mode, k: usize) -> AnalysisResult {
    let table = ApiSummaryTable::new();
    let cfg = AnalysisConfig::with_mode(mode, k);
    analyze(
        p,
        &table,
        &entry(p, c, m),
        Store::default(),
        TaintStore::new(),
        &cfg,
    )
    .unwrap()
}

fn states_at(
    r: &AnalysisResult,
    p: &Program,
    class: &str,
    method: &str,
    index: u32,
) -> Vec<ControlState> {
    let id = p.method_by_name(class, method).unwrap();
    r.dsg
        .nodes
        .iter()
        .filter(|q| q.method == id && q.index == index && q.phase == Phase::Exec)
        .cloned()
        .collect()
}

const CALL: &str = r#"
(class M extends java/lang/Object () (
  (method static main () int
    (assign r (invoke-static () () M.f))
    (return r))
  (method static f () int
    (return 1))))
"#;

const TWO_SITES: &str = r#"
(class E extends java/lang/Exception () ())
(class M extends java/lang/Object () (
  (method static main () int
    (push-handler E h1)
    (assign a (invoke-static () () M.f))
    (pop-handler)
    (label h1)
    (push-handler E h2)
    (assign b (invoke-static () () M.f))
    (pop-handler)
    (return 0)
    (label h2)
    (return 2))
  (method static f () void
    (assign e (new E))
    (throw e))))
"#;

const SPLIT: &str = r#"
(class E extends java/lang/Exception () ())
(class M extends java/lang/Object () (
  (method static a () int
    (push-handler E benign)
    (assign z (invoke-static () () M.f))
    (pop-handler)
    (return 0)
    (label benign)
    (return 1))
  (method static b () int
    (push-handler E evil)
    (assign z (invoke-static () () M.f))
    (pop-handler)
    (return 0)
    (label evil)
    (return 2))
  (method static f () void
    (assign e (new E))
    (throw e))))
"#;

const STRAIGHT: &str = r#"
(class Box extends java/lang/Object ((field v int)) ())
(class M extends java/lang/Object () (
  (method static main () int
    (assign x 1)
    (assign o (new Box))
    (field-put o v x)
    (field-get y o v)
    (if (eq y 1) (goto one))
    (return 0)
    (label one)
    (return y))))
"#;

const NESTED: &str = r#"
(class M extends java/lang/Object () (
  (method static main () int
    (assign x (invoke-static (1) (int) M.a))
    (assign y (invoke-static (2) (int) M.a))
    (return (add x y)))
  (method static a (int) int (limit 1)
    (assign r (invoke-static (param0) (int) M.b))
    (return r))
  (method static b (int) int (limit 1)
    (assign r (invoke-static (param0) (int) M.c))
    (return r))
  (method static c (int) int (limit 1)
    (return param0))))
"#;

#[test]
fn single_return_reaches_terminal() {
    let p = parse_program(
        "(class M extends java/lang/Object () ((method static main () void (return))))",
    )
    .unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    assert!((1..=2).contains(&r.dsg.nodes.len()));
    assert_eq!(r.terminals.len(), 1);
    let fp = FramePointer::entry(r.entry);
    let only: Vec<_> = r.final_store.iter().collect();
    assert_eq!(only.len(), 1);
    assert_eq!(only[0].0, &Addr::reg(&fp, Reg::ret()));
    assert_eq!(only[0].1, &Val::singleton(AbsValue::Void));
}

#[test]
fn call_return_has_one_summary() {
    let p = parse_program(CALL).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    let fp = FramePointer::entry(r.entry);
    assert!(r
        .final_store
        .get(&Addr::reg(&fp, Reg::ret()))
        .contains(&AbsValue::Int(1)));
    assert!(r
        .terminals
        .iter()
        .any(|(_, k)| *k == TerminalKind::Returned));
    assert_eq!(r.dsg.epsilon.len(), 1);
}

fn handler_pops(r: &AnalysisResult) -> Vec<(&ControlState, &Frame)> {
    r.dsg
        .edges
        .iter()
        .filter_map(|e| match &e.action {
            StackAction::Pop(f @ Frame::Handler { .. }) => Some((&e.from, f)),
            _ => None,
        })
        .collect()
}

#[test]
fn throws_return_only_to_their_own_handler() {
    let p = parse_program(TWO_SITES).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    let f = p.method_by_name("M", "f").unwrap();
    let pops = handler_pops(&r);
    assert!(!pops.is_empty());
    for (from, frame) in pops {
        let Frame::Handler { label, site, .. } = frame else {
            unreachable!()
        };
        if from.method != f {
            continue;
        }
        // call sites are one statement after their handler's push
        assert_eq!(
            from.fp.ctx[0].index,
            site.index + 1,
            "{label} reached from the wrong call site"
        );
    }
    assert_eq!(states_at(&r, &p, "M", "main", 4).len(), 1);
    assert_eq!(states_at(&r, &p, "M", "main", 9).len(), 1);
}

#[test]
fn shared_continuations_leak_between_entry_points() {
    let p = parse_program(SPLIT).unwrap();
    let table = ApiSummaryTable::new();
    let evil_label = 5;

    let cfg = AnalysisConfig::with_mode(Mode::Finite, 0);
    let b = analyze_finite(
        &p,
        &table,
        &entry(&p, "M", "b"),
        Store::default(),
        TaintStore::new(),
        &cfg,
    )
    .unwrap();
    let a = analyze_finite_with(
        &p,
        &table,
        &entry(&p, "M", "a"),
        b.final_store.clone(),
        b.final_taint.clone(),
        b.kstore.clone().unwrap(),
        &cfg,
    )
    .unwrap();
    assert_eq!(states_at(&a, &p, "M", "b", evil_label).len(), 1);

    let cfg = AnalysisConfig::with_mode(Mode::Pushdown, 0);
    let a = analyze_pushdown(
        &p,
        &table,
        &entry(&p, "M", "a"),
        b.final_store,
        b.final_taint,
        &cfg,
    )
    .unwrap();
    assert!(states_at(&a, &p, "M", "b", evil_label).is_empty());
    assert_eq!(states_at(&a, &p, "M", "a", 5).len(), 1);
}

#[test]
fn straight_line_modes_agree() {
    let p = parse_program(STRAIGHT).unwrap();
    let pd = run(&p, "M", "main", Mode::Pushdown, 1);
    let fi = run(&p, "M", "main", Mode::Finite, 1);
    assert_eq!(pd.dsg.nodes, fi.dsg.nodes);
    assert_eq!(pd.final_store, fi.final_store);
}

#[test]
fn finite_covers_pushdown_on_nested_calls() {
    let p = parse_program(NESTED).unwrap();
    for k in 0..=2 {
        let pd = run(&p, "M", "main", Mode::Pushdown, k);
        let fi = run(&p, "M", "main", Mode::Finite, k);
        assert!(pd.dsg.nodes.is_subset(&fi.dsg.nodes), "k = {k}");
        assert!(pd.final_store.leq(&fi.final_store), "k = {k}");
    }
}

#[test]
fn reseeding_with_final_store_is_a_fixpoint() {
    let table = ApiSummaryTable::new();
    for src in [CALL, TWO_SITES, STRAIGHT, NESTED] {
        let p = parse_program(src).unwrap();
        let e = entry(&p, "M", "main");
        let cfg = AnalysisConfig::default();
        let r =
            analyze_pushdown(&p, &table, &e, Store::default(), TaintStore::new(), &cfg).unwrap();
        let again = analyze_pushdown(
            &p,
            &table,
            &e,
            r.final_store.clone(),
            r.final_taint.clone(),
            &cfg,
        )
        .unwrap();
        assert_eq!(again.final_store, r.final_store);
        assert_eq!(again.dsg.nodes, r.dsg.nodes);
    }
}

#[test]
fn runs_are_deterministic() {
    let p = parse_program(NESTED).unwrap();
    for mode in [Mode::Pushdown, Mode::Finite] {
        let a = run(&p, "M", "main", mode, 1);
        let b = run(&p, "M", "main", mode, 1);
        assert_eq!(a.dsg, b.dsg);
        assert_eq!(a.visit_counts, b.visit_counts);
        assert_eq!(a.tracebacks, b.tracebacks);
    }
}

#[test]
fn state_budget_marks_result_incomplete() {
    let p = parse_program(NESTED).unwrap();
    let table = ApiSummaryTable::new();
    let cfg = AnalysisConfig {
        max_states: 3,
        ..AnalysisConfig::default()
    };
    let r = analyze(
        &p,
        &table,
        &entry(&p, "M", "main"),
        Store::default(),
        TaintStore::new(),
        &cfg,
    )
    .unwrap();
    assert_eq!(r.incomplete, Some(ResourceLimit::MaxStates(3)));
    assert!(!r.is_complete());
}

#[test]
fn k_above_limit_is_rejected() {
    let p = parse_program(CALL).unwrap();
    let table = ApiSummaryTable::new();
    let cfg = AnalysisConfig::with_mode(Mode::Pushdown, MAX_K + 1);
    let e = analyze(
        &p,
        &table,
        &entry(&p, "M", "main"),
        Store::default(),
        TaintStore::new(),
        &cfg,
    );
    assert!(matches!(e, Err(AnalysisError::Config(_))));
}

#[test]
fn stray_pop_handler() {
    let p = parse_program("(class M extends java/lang/Object () ((method static main () void (pop-handler) (return))))")
        .unwrap();
    let table = ApiSummaryTable::new();
    let e = entry(&p, "M", "main");
    let cfg = AnalysisConfig::default();
    let r = analyze_pushdown(&p, &table, &e, Store::default(), TaintStore::new(), &cfg);
    assert!(matches!(r, Err(AnalysisError::Malformed(_))));
    let cfg = AnalysisConfig::with_mode(Mode::Finite, 1);
    let r = analyze_finite(&p, &table, &e, Store::default(), TaintStore::new(), &cfg).unwrap();
    assert!(r.diagnostics.iter().any(|d| d.contains("pop-handler")));
    assert!(r.terminals.is_empty());
}

#[test]
fn path_to_self_is_singleton() {
    let p = parse_program(CALL).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    assert_eq!(
        reconstruct_path(&r, &r.initial, &r.initial),
        Some(alloc::vec![r.initial.clone()])
    );
}

#[test]
fn path_along_one_noop_edge() {
    let p = parse_program(STRAIGHT).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    let next = &states_at(&r, &p, "M", "main", 1)[0];
    let path = reconstruct_path(&r, &r.initial, next).unwrap();
    assert_eq!(path, alloc::vec![r.initial.clone(), next.clone()]);
}

#[test]
fn path_into_callee_uses_push_and_summaries() {
    let p = parse_program(NESTED).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    // the second call chain: main@1 → a → b → c
    let target = states_at(&r, &p, "M", "c", 0)
        .into_iter()
        .max_by_key(|q| q.fp.ctx.clone())
        .unwrap();
    let edges = path::reconstruct_edges(&r, &r.initial, &target).unwrap();
    assert_eq!(replay_stack(&edges), Ok(3));
    let pushes = edges
        .iter()
        .filter(|e| matches!(e.action, StackAction::Push(_)))
        .count();
    let pops = edges
        .iter()
        .filter(|e| matches!(e.action, StackAction::Pop(_)))
        .count();
    assert_eq!(pushes - pops, 3);
    // every state on it is in the graph and consecutive states share an edge
    for e in &edges {
        assert!(r.dsg.edges.contains(e));
    }
    let states = reconstruct_path(&r, &r.initial, &target).unwrap();
    assert_eq!(states.len(), edges.len() + 1);
}

#[test]
fn unreachable_target_has_no_path() {
    let p = parse_program(NESTED).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    let inner = states_at(&r, &p, "M", "c", 0).remove(0);
    assert_eq!(reconstruct_path(&r, &inner, &r.initial), None);
}

#[test]
fn replay_rejects_mismatched_pops() {
    let p = parse_program(CALL).unwrap();
    let r = run(&p, "M", "main", Mode::Pushdown, 1);
    let pop = r
        .dsg
        .edges
        .iter()
        .find(|e| matches!(e.action, StackAction::Pop(_)))
        .unwrap()
        .clone();
    assert!(replay_stack(&[pop]).is_err());
    let push = r
        .dsg
        .edges
        .iter()
        .find(|e| matches!(e.action, StackAction::Push(_)))
        .unwrap()
        .clone();
    assert!(replay_stack(&[push.clone(), push]).is_err());
}
