use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ufpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ufpipe"))
        .args(args)
        .output()
        .expect("spawn ufpipe")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, cfg: &str, rounds: &str) {
    let cfg_path = dir.join("cfg.txt");
    fs::write(&cfg_path, cfg).unwrap();
    let out = ufpipe(&[
        "gen-trace",
        "--config",
        s(&cfg_path),
        "--out",
        s(dir),
        "--rounds",
        rounds,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
}

#[test]
fn silent_trace_decodes_to_empty_corrections() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "schema_version = 1\ncode = planar\nd = 3\np_data = 0\n",
        "200",
    );
    let trace = dir.path().join("trace.qec");
    let truth = dir.path().join("truth.txt");
    let out = ufpipe(&[
        "decode",
        "--trace",
        s(&trace),
        "--truth",
        s(&truth),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records = fs::read_to_string(dir.path().join("records.txt")).unwrap();
    assert_eq!(records.lines().count(), 200);
    assert!(records
        .lines()
        .all(|l| l.ends_with("corr=-") && l.contains("flags=00")));
    let metrics = fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
    assert_eq!(field(&metrics, "correctness.logical_failures"), "0");
    assert_eq!(field(&metrics, "sla.pass"), "true");

    let rep = ufpipe(&[
        "report",
        "--trace",
        s(&trace),
        "--records",
        s(&dir.path().join("records.txt")),
    ]);
    assert_eq!(code(&rep), 0);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    for text in [
        "schema_version = 1\ncode = planar\nd = 3\nbogus = 1\n",
        "schema_version = 2\ncode = planar\nd = 3\n",
        "schema_version = 1\ncode = planar\nd = 3\np_data = 1.5\n",
    ] {
        fs::write(&bad, text).unwrap();
        let out = ufpipe(&["gen-trace", "--config", s(&bad), "--out", s(dir.path())]);
        assert_eq!(code(&out), 2, "{text}");
    }
    let out = ufpipe(&["gen-trace", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn mismatched_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "schema_version = 1\ncode = planar\nd = 3\n",
        "10",
    );
    let other = dir.path().join("other.txt");
    fs::write(&other, "schema_version = 1\ncode = planar\nd = 5\n").unwrap();
    let out = ufpipe(&[
        "decode",
        "--config",
        s(&other),
        "--trace",
        s(&dir.path().join("trace.qec")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn injected_faults_match_expectations() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "schema_version = 1\ncode = planar\nd = 3\np_data = 0.01\n",
        "3000",
    );
    let plan = dir.path().join("plan.txt");
    fs::write(
        &plan,
        "flip_rate = 0.003\ndrop_rate = 0.003\nburst_rate = 0.001\nburst_min = 64\nburst_max = 64\ndesync_rate = 0.003\nseed = 5\n",
    )
    .unwrap();
    let faulted = dir.path().join("faulted");
    let inj = ufpipe(&[
        "inject",
        "--trace",
        s(&dir.path().join("trace.qec")),
        "--plan",
        s(&plan),
        "--out",
        s(&faulted),
    ]);
    assert_eq!(code(&inj), 0, "{}", String::from_utf8_lossy(&inj.stderr));
    let expected = fs::read_to_string(faulted.join("expected.txt")).unwrap();
    assert_ne!(field(&expected, "events"), "0");

    let out = ufpipe(&[
        "decode",
        "--trace",
        s(&faulted.join("trace.qec")),
        "--out",
        s(&faulted),
        "--single-thread",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(faulted.join("metrics.txt")).unwrap();
    assert_eq!(
        field(&metrics, "flags.erasure"),
        field(&expected, "expected.erasure")
    );
    assert_eq!(
        field(&metrics, "flags.corrupt"),
        field(&expected, "expected.corrupt")
    );
    assert_eq!(
        field(&metrics, "flags.desync"),
        field(&expected, "expected.desync")
    );
}

#[test]
fn conformance_divergence_exits_3_with_dump() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "schema_version = 1\ncode = planar\nd = 3\np_data = 0.05\n",
        "100",
    );
    let trace = dir.path().join("trace.qec");
    let out = ufpipe(&["decode", "--trace", s(&trace), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0);
    let records = dir.path().join("records.txt");

    let same = ufpipe(&[
        "conformance",
        "--trace",
        s(&trace),
        "--golden",
        s(&records),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&same), 0);

    let text = fs::read_to_string(&records).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[40] = lines[40].replace("flags=00", "flags=10");
    let golden = dir.path().join("golden.txt");
    fs::write(&golden, lines.join("\n") + "\n").unwrap();
    let diff = ufpipe(&[
        "conformance",
        "--trace",
        s(&trace),
        "--golden",
        s(&golden),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&diff), 3);
    let stdout = String::from_utf8_lossy(&diff.stdout);
    assert_eq!(field(&stdout, "first_divergence.round"), "40");
    assert_eq!(field(&stdout, "first_divergence.field"), "flags");
    let dump = fs::read_to_string(dir.path().join("first_failure.txt")).unwrap();
    assert_eq!(field(&dump, "first_failing_round"), "40");
    assert_eq!(field(&dump, "packets"), "32");
}

#[test]
fn bench_tier0_passes() {
    let out = ufpipe(&["bench", "--tier", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("tier 0: PASS"));
}
