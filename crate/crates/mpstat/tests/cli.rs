use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpstat::report::Report;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn fixture(name: &str) -> String {
    corpus().join("fixtures").join(name).display().to_string()
}

fn mpstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpstat"))
        .args(args)
        .env_remove("MPSTAT_BIACTIVE_CAP")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(o: &Output) -> Report {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    Report::from_json(&String::from_utf8_lossy(&o.stdout)).expect("stdout is a report")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn classify_strong_point() {
    let r = report(&mpstat(&["classify", &fixture("mpcc-plus.toml"), "--kinds", "s"]));
    assert_eq!(r.verdicts.len(), 1);
    let v = &r.verdicts[0];
    assert!(v.holds);
    let w = v.witness.as_ref().unwrap();
    assert_eq!((w.mu.as_slice(), w.nu.as_slice()), (&["1".to_string()][..], &["1".to_string()][..]));
}

#[test]
fn classify_all_alpha_and_grid() {
    let r = report(&mpstat(&["classify", &fixture("mpcc-minus.toml"), "--all-alpha", "--d-grid", "2", "--lattice"]));
    let kinds: Vec<&str> = r.verdicts.iter().map(|v| v.kind.as_str()).collect();
    for k in ["w", "s", "aalpha=0", "palpha=1", "pd=1/2"] {
        assert!(kinds.contains(&k), "{k} missing from {kinds:?}");
    }
    assert!(!r.lattice_flags.is_empty() && r.lattice_flags.iter().all(|f| f.ok));
}

#[test]
fn classify_on_nonlinear_counterexample_data() {
    let r = report(&mpstat(&["classify", &fixture("mpvc-gcq-gap-1.toml"), "--kinds", "aalpha=0"]));
    assert_eq!(r.verdicts[0].kind, "aalpha=0");
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "kind = \"mpcc\"\nn = 2\nobjective = \"x1 + * x2\"\n").unwrap();
    let o = mpstat(&["classify", path.to_str().unwrap(), "--point", "0,0"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("bad.toml:3:"), "{}", stderr(&o));
    let o = mpstat(&["classify", &fixture("mpcc-plus.toml"), "--point", "0,x"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn infeasible_point_exits_2() {
    let o = mpstat(&["classify", &fixture("mpcc-plus.toml"), "--point", "1,1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn cap_from_environment_exits_4() {
    let o = Command::new(env!("CARGO_BIN_EXE_mpstat"))
        .args(["classify", &fixture("mpcc-plus.toml")])
        .env("MPSTAT_BIACTIVE_CAP", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn combine_names_the_infeasible_pattern() {
    let o = mpstat(&["combine", &fixture("mpcc-minus.toml"), "--target", "palpha=0"]);
    assert_eq!(code(&o), 5);
    let err = stderr(&o);
    assert!(err.contains("alpha = 1"), "{err}");
    assert!(err.contains("certificate:"), "{err}");
}

#[test]
fn combine_at_a_strong_point_has_zero_residual() {
    let r = report(&mpstat(&["combine", &fixture("mpcc-plus.toml"), "--target", "pd=1/2"]));
    let c = r.combine.unwrap();
    assert!(c.converged && c.exact_weak_ok);
    assert_eq!(c.max_residual, 0.0);
}

#[test]
fn combine_agrees_with_classify_on_ss_small() {
    let ss = fixture("ss-small.toml");
    let c = report(&mpstat(&["combine", &ss, "--target", "pd=1/2"])).combine.unwrap();
    assert!(c.converged && c.max_residual <= 1e-8);
    let v = report(&mpstat(&["classify", &ss, "--kinds", "pd=1/2"]));
    assert!(v.verdicts[0].holds);
}

#[test]
fn combine_from_a_curve_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.toml");
    fs::write(&path, "[[curve]]\nform = \"graph-over-a\"\nlinear = 1\n[[curve]]\nform = \"graph-over-b\"\nphi = \"-sin(5*t)^2\"\n").unwrap();
    let target = format!("curve={}", path.display());
    let c = report(&mpstat(&["combine", &fixture("ss-small.toml"), "--target", &target])).combine.unwrap();
    assert!(c.converged && c.max_residual <= 1e-8);
}

#[test]
fn unmet_tolerance_exits_6() {
    let o = mpstat(&["combine", &fixture("ss-small.toml"), "--target", "pd=1/2", "--max-depth", "1", "--tol", "1e-300"]);
    assert_eq!(code(&o), 6);
    assert!(serde_json_report(&o).combine.is_some_and(|c| !c.converged));
}

fn serde_json_report(o: &Output) -> Report {
    Report::from_json(&String::from_utf8_lossy(&o.stdout)).unwrap()
}

#[test]
fn check_cq_counterexamples() {
    for (name, gcq, gcq_nlp0) in [("mpvc-gcq-gap-1", false, true), ("mpvc-gcq-gap-2", true, false)] {
        let o = mpstat(&["check-cq", &fixture(&format!("{name}.toml"))]);
        assert_eq!(code(&o), 7, "{name}");
        let tangent = fixture(&format!("{name}.tangent.toml"));
        let cq = report(&mpstat(&["check-cq", &fixture(&format!("{name}.toml")), "--tangent-fixture", &tangent]))
            .cq
            .unwrap();
        assert_eq!((cq.gcq, cq.gcq_nlp0), (gcq, gcq_nlp0), "{name}");
    }
    let cq = report(&mpstat(&["check-cq", &fixture("mpcc-minus.toml")])).cq.unwrap();
    assert!(cq.gcq && cq.acq);
}

fn copy_fixtures(to: &Path) {
    let dst = to.join("fixtures");
    fs::create_dir_all(&dst).unwrap();
    for e in fs::read_dir(corpus().join("fixtures")).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), dst.join(e.file_name())).unwrap();
    }
    fs::write(to.join("seeds.toml"), "version = 1\n").unwrap();
}

#[test]
fn shipped_corpus_runs_clean() {
    let dir = corpus().display().to_string();
    let o = mpstat(&["corpus", "run", "--corpus", &dir]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let o = mpstat(&["corpus", "snapshot", "--corpus", &dir]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 differences pending"));
}

#[test]
fn snapshot_lists_exactly_the_deleted_expectation() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixtures(dir.path());
    let path = dir.path().join("fixtures/mpcc-minus.expect.toml");
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.split("[[expect]]").filter(|e| !e.contains("\"verdict.m\"")).collect();
    assert_eq!(kept.len() + 1, text.split("[[expect]]").count());
    fs::write(&path, kept.join("[[expect]]")).unwrap();

    let root = dir.path().display().to_string();
    let o = mpstat(&["corpus", "snapshot", "--corpus", &root]);
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    let lines: Vec<&str> = out.lines().filter(|l| !l.ends_with("pending")).collect();
    assert_eq!(lines.len(), 1, "{out}");
    assert!(lines[0].starts_with("mpcc-minus: verdict.m: missing"), "{out}");
    assert!(!fs::read_to_string(&path).unwrap().contains("verdict.m"));

    let o = mpstat(&["corpus", "snapshot", "--corpus", &root, "--write"]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&path).unwrap().contains("verdict.m"));
}

#[test]
fn corrupted_witness_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixtures(dir.path());
    let path = dir.path().join("fixtures/mpcc-plus.expect.toml");
    let text = fs::read_to_string(&path).unwrap();
    let mut doc: toml::Table = toml::from_str(&text).unwrap();
    let entries = doc["expect"].as_array_mut().unwrap();
    let witness = entries.iter_mut().find(|e| e["key"].as_str() == Some("witness.s")).unwrap();
    witness.as_table_mut().unwrap().insert("witness".into(), toml::Value::Array(vec!["1".into(), "-1".into()]));
    fs::write(&path, toml::to_string(&doc).unwrap()).unwrap();

    let o = mpstat(&["corpus", "run", "--corpus", &dir.path().display().to_string()]);
    assert_ne!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("MISMATCH mpcc-plus: witness.s"), "{out}");
}
