use std::fs;
use std::path::{Path, PathBuf};

use entorder_cli::run;
use serde_json::Value;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn entorder(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv: Vec<&str> = std::iter::once("entorder")
        .chain(args.iter().copied())
        .collect();
    let code = run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn json(o: &Output) -> Value {
    assert_eq!(o.code, 0, "{}", o.stderr);
    serde_json::from_str(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn uniform(dir: &Path, name: &str, rank: usize) -> String {
    let line = format!("{:.17e}\n", -(rank as f64).log10());
    let body = format!("#schmidt-spectrum 1\n{}", line.repeat(rank));
    write(dir, name, &body)
}

#[test]
fn exit_codes_distinguish_usage_input_and_operation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(entorder(&["frobnicate"]).code, 1);
    assert_eq!(entorder(&["compare", "only-one.spec"]).code, 1);

    let missing = entorder(&["validate", &dir.path().join("nope.spec").to_string_lossy()]);
    assert_eq!(missing.code, 2);
    assert_eq!(
        missing.stderr.matches("nope.spec").count(),
        1,
        "{}",
        missing.stderr
    );

    let t = dir.path().join("t.spec").to_string_lossy().into_owned();
    assert_eq!(
        entorder(&["gen", "tmss", "--q", "0.9", "--n", "200", "-o", &t]).code,
        0
    );
    let unsafe_window = entorder(&["compare", &t, &t, "--window-end", "190"]);
    assert_eq!(unsafe_window.code, 3);
    assert!(
        unsafe_window.stderr.contains("n = 135"),
        "{}",
        unsafe_window.stderr
    );
}

#[test]
fn parse_errors_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let headless = write(dir.path(), "a.spec", "-0.30103\n-0.30103\n");
    let o = entorder(&["info", &headless]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("line 1"), "{}", o.stderr);

    let garbage = write(
        dir.path(),
        "b.spec",
        "#schmidt-spectrum 1\n#family x\n-0.3\nabc\n",
    );
    let o = entorder(&["validate", &garbage]);
    assert_eq!(o.code, 2);
    assert!(
        o.stderr.contains("line 4") && o.stderr.contains("abc"),
        "{}",
        o.stderr
    );
}

#[test]
fn probability_mode_on_small_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let (r2, r3) = (
        uniform(dir.path(), "r2.spec", 2),
        uniform(dir.path(), "r3.spec", 3),
    );

    let v = json(&entorder(&["compare", &r2, &r3, "--mode", "prob"]));
    assert_eq!(v["probability"].as_f64(), Some(0.0));
    assert_eq!(v["verdict"], "OneWayBtoA");
    let v = json(&entorder(&["compare", &r3, &r2, "--mode", "prob"]));
    assert_eq!(v["probability"].as_f64(), Some(1.0));
}

#[test]
fn a_state_is_equivalent_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.spec").to_string_lossy().into_owned();
    assert_eq!(
        entorder(&["gen", "tmss", "--q", "0.5", "--n", "400", "-o", &t]).code,
        0
    );
    let v = json(&entorder(&["compare", &t, &t, "--mode", "slocc"]));
    assert_eq!(v["verdict"], "TwoWay");

    let r3 = uniform(dir.path(), "r3.spec", 3);
    for mode in ["locc", "prob"] {
        let v = json(&entorder(&["compare", &r3, &r3, "--mode", mode]));
        assert_eq!(v["verdict"], "TwoWay", "mode {mode}");
    }
}

#[test]
fn truncated_ties_are_not_decided_blindly() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.spec").to_string_lossy().into_owned();
    assert_eq!(
        entorder(&["gen", "tmss", "--q", "0.5", "--n", "400", "-o", &t]).code,
        0
    );
    let o = entorder(&["compare", &t, &t, "--mode", "locc"]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("tail mass"), "{}", o.stderr);
}

#[test]
fn generated_files_validate_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.spec").to_string_lossy().into_owned();
    assert_eq!(
        entorder(&["gen", "psi", "--k", "2", "--n", "2000", "-o", &p]).code,
        0
    );
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("#schmidt-spectrum 1\n"));
    assert!(text.contains("#family psi\n") && text.contains("#k 2\n"));
    assert_eq!(json(&entorder(&["validate", &p]))["all_pass"], true);

    let stdout = entorder(&["gen", "psi", "--k", "2", "--n", "2000"]);
    assert_eq!(stdout.stdout, text);
}

#[test]
fn estimate_serializes_empty_band_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.spec").to_string_lossy().into_owned();
    assert_eq!(
        entorder(&["gen", "tmss", "--delta", "1e6", "--n", "10000", "-o", &t]).code,
        0
    );
    let args = [
        "estimate-r",
        &t,
        "--r-min",
        "1",
        "--r-max",
        "2",
        "--steps",
        "5",
    ];
    let first = entorder(&args);
    let v = json(&first);
    assert!(v["estimate"]["undecided_band"]
        .as_array()
        .is_some_and(Vec::is_empty));
    assert!(first.stdout.contains("\"undecided_band\": []"));
    assert_eq!(entorder(&args).stdout, first.stdout);
}

#[test]
fn selftest_passes_through_the_front_end() {
    let v = json(&entorder(&["selftest", "--seed", "3", "--pairs", "200"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["mismatches"], 0);
}

#[test]
fn reports_go_to_output_files() {
    let dir = tempfile::tempdir().unwrap();
    let r2 = uniform(dir.path(), "r2.spec", 2);
    let report = dir.path().join("info.json");
    let o = entorder(&["info", &r2, "-o", &report.to_string_lossy()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["exact"], true);
    assert_eq!(v["len"], 2);
    assert_eq!(v["excitation_remainder_bound"].as_f64(), Some(0.0));
}
