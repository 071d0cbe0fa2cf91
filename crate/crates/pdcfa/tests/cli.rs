mod common;

use std::fs;

use common::*;
use serde_json::Value;
use tempfile::tempdir;

fn json(path: &std::path::Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn goldens_and_exit_codes() {
    for case in &GOLDEN_CASES {
        let dir = tempdir().unwrap();
        let (code, stdout, stderr) = analyze_cli(case.bundle, case.args, dir.path());
        assert_eq!(code, case.exit, "{}: {stdout}{stderr}", case.name);
        for f in pdcfa::run::REPORT_FILES
            .iter()
            .chain([&pdcfa::run::RUN_META])
        {
            assert!(dir.path().join(f).is_file(), "{}: {f} missing", case.name);
        }
        check_output_schemas(dir.path()).unwrap();
        check_goldens(case.name, dir.path()).unwrap();
        let dot = fs::read_to_string(dir.path().join(pdcfa::run::STATE_GRAPH)).unwrap();
        validate_dot(&dot).unwrap();
        // finite-mode witnesses may return to the wrong caller, so only
        // pushdown paths are expected to replay against a real stack
        if !case.args.contains(&"finite") {
            replay_dot_witnesses(&dot).unwrap();
        }
    }
}

#[test]
fn manifests_match_schema() {
    for b in BUNDLES {
        let text = fs::read_to_string(bundle_dir(b).join("manifest.json")).unwrap();
        check_schema("manifest", &text).unwrap();
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for b in ["kitty", "eps3"] {
        let (a, c) = (tempdir().unwrap(), tempdir().unwrap());
        analyze_cli(b, &["--jobs", "1"], a.path());
        analyze_cli(b, &["--jobs", "4"], c.path());
        for f in pdcfa::run::REPORT_FILES {
            let x = fs::read(a.path().join(f)).unwrap();
            let y = fs::read(c.path().join(f)).unwrap();
            assert!(x == y, "{b}/{f} differs between runs");
        }
    }
}

#[test]
fn kitty_finite_k0_reports_the_spurious_flow() {
    let dir = tempdir().unwrap();
    let (code, ..) = analyze_cli("kitty", &["--mode", "finite", "--k", "0"], dir.path());
    assert_eq!(code, 1);
    let flow = json(&dir.path().join(pdcfa::run::FLOW_REPORT));
    let triggers: Vec<&str> = flow["findings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["trigger"].as_str().unwrap())
        .collect();
    assert_eq!(triggers.len(), 2);
    assert!(triggers.iter().any(|t| t.contains(".aboutButton(")));
}

#[test]
fn where_filters_findings_but_not_the_total() {
    let dir = tempdir().unwrap();
    let (code, ..) = analyze_cli("kitty", &["--where", "taintHas(Sms)"], dir.path());
    assert_eq!(code, 0, "nothing reported means a clean exit");
    let flow = json(&dir.path().join(pdcfa::run::FLOW_REPORT));
    assert_eq!(flow["findings"].as_array().unwrap().len(), 0);
    assert_eq!(flow["totalFindings"], 1);
    assert_eq!(flow["predicate"], "taintHas(Sms)");
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempdir().unwrap();
    let bad: [&[&str]; 4] = [
        &["--where", "taintHas("],
        &["--k", "5"],
        &["--jobs", "0"],
        &["--mode", "cfa"],
    ];
    for extra in bad {
        let (code, _, stderr) = analyze_cli("kitty", extra, dir.path());
        assert_eq!(code, 2, "{extra:?}: {stderr}");
        assert!(!stderr.is_empty());
    }
    let missing = dir.path().join("nope");
    let (code, _, stderr) = run_cli(&["analyze", "--bundle", missing.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("nope"), "{stderr}");
    assert_eq!(run_cli(&["frobnicate"]).0, 2);
    assert_eq!(run_cli(&["--help"]).0, 0);
}

#[test]
fn bad_manifest_exits_2() {
    let dir = tempdir().unwrap();
    let b = dir.path().join("b");
    fs::create_dir(&b).unwrap();
    fs::copy(bundle_dir("benign").join("app.sdex"), b.join("app.sdex")).unwrap();
    fs::write(
        b.join("manifest.json"),
        r#"{"appName":"X","program":"../app.sdex","requestedPermissions":[],"units":[]}"#,
    )
    .unwrap();
    let (code, _, stderr) = run_cli(&[
        "analyze",
        "--bundle",
        b.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn exhausted_budget_exits_3_and_still_writes() {
    let dir = tempdir().unwrap();
    let (code, _, stderr) = analyze_cli("kitty", &["--max-states", "5"], dir.path());
    assert_eq!(code, 3, "{stderr}");
    let flow = json(&dir.path().join(pdcfa::run::FLOW_REPORT));
    assert_eq!(flow["complete"], false);
    let perms = json(&dir.path().join(pdcfa::run::PERMISSIONS_REPORT));
    assert_eq!(perms["lowerBound"], true);
    check_output_schemas(dir.path()).unwrap();
}
