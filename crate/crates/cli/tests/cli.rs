use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn rpys(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpys"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["synthetic_corpus.txt", "pipeline_synthetic.script"] {
        std::fs::copy(fixture(f), dir.path().join(f)).unwrap();
    }
    dir
}

#[test]
fn run_writes_the_golden_exports() {
    let dir = scratch();
    let out = rpys(&["run", "pipeline_synthetic.script"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).matches("\n[").count() + 1, 10);
    for (name, golden) in [
        ("synthetic_CR.csv", "golden/synthetic_CR.csv"),
        ("synthetic_GRAPH.csv", "golden/synthetic_GRAPH.csv"),
    ] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(fixture(golden)).unwrap(),
            "{name}"
        );
    }
    assert!(dir.path().join("synthetic.rpys").exists());
}

#[test]
fn run_output_is_stable_without_timings() {
    let (a, b) = (scratch(), scratch());
    let ra = rpys(&["run", "pipeline_synthetic.script"], a.path());
    let rb = rpys(&["run", "pipeline_synthetic.script"], b.path());
    let strip = |s: String, d: &Path| s.replace(&d.display().to_string(), "DIR");
    assert_eq!(strip(stdout(&ra), a.path()), strip(stdout(&rb), b.path()));
    let timed = rpys(&["run", "--timings", "pipeline_synthetic.script"], a.path());
    assert!(stdout(&timed).contains(" ms)"));
}

#[test]
fn exit_codes() {
    let dir = scratch();
    let write = |name: &str, body: &str| std::fs::write(dir.path().join(name), body).unwrap();
    write("syntax.script", "info(\n");
    write(
        "command.script",
        "importFile(file:\"synthetic_corpus.txt\")\nremoveCR(N_CR:[3,1])\n",
    );
    write("io.script", "importFile(file:\"absent.txt\")\n");

    assert_eq!(
        rpys(&["check", "pipeline_synthetic.script"], dir.path())
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        rpys(&["check", "syntax.script"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        rpys(&["check", "missing.script"], dir.path()).status.code(),
        Some(2)
    );

    let out = rpys(&["run", "syntax.script"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    let out = rpys(&["run", "command.script"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stdout(&out).contains("[1] importFile"),
        "completed commands are reported"
    );
    assert!(stderr(&out).contains("removeCR"));
    assert_eq!(
        rpys(&["run", "io.script"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        rpys(&["run", "missing.script"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn check_accepts_the_verbatim_listing() {
    let out = rpys(
        &[
            "check",
            fixture("pipeline_verbatim.script").to_str().unwrap(),
        ],
        Path::new("."),
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("10 commands"));
}

#[test]
fn analyze_matches_the_script_pipeline() {
    let dir = scratch();
    let out = rpys(
        &[
            "analyze",
            "--input",
            "synthetic_corpus.txt",
            "--rpy",
            "1900:1995",
            "--py",
            "1962:2018",
            "--cluster-threshold",
            "0.75",
            "--cluster-use",
            "volume,page",
            "--remove-ncr",
            "0:1",
            "--export-cr",
            "cr.csv",
            "--export-graph",
            "graph.csv",
            "--export-peaks",
            "peaks.csv",
            "--save",
            "ws.rpys",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(dir.path().join("cr.csv")).unwrap(),
        std::fs::read(fixture("golden/synthetic_CR.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("graph.csv")).unwrap(),
        std::fs::read(fixture("golden/synthetic_GRAPH.csv")).unwrap()
    );
    let peaks = std::fs::read_to_string(dir.path().join("peaks.csv")).unwrap();
    assert!(peaks.starts_with("rpy,ncr,median_dev\n"));
    assert!(peaks.lines().any(|l| l.starts_with("1960,")));
    assert!(stdout(&out).contains("Liu BYH, 1960, Solar Energy, V4, P1"));

    // Continuing from the saved workspace reproduces the same exports.
    let out = rpys(
        &["analyze", "--load", "ws.rpys", "--export-cr", "cr2.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(dir.path().join("cr.csv")).unwrap(),
        std::fs::read(dir.path().join("cr2.csv")).unwrap()
    );
}

#[test]
fn analyze_with_markers() {
    let dir = scratch();
    let out = rpys(
        &[
            "analyze",
            "--input",
            "synthetic_corpus.txt",
            "--marker",
            "author=Liu BYH,rpy=1960",
            "--marker",
            "author=Perez,rpy=1987",
            "--marker-mode",
            "all",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("filter: "));
}

#[test]
fn analyze_rejects_bad_arguments() {
    let dir = scratch();
    for args in [
        vec!["analyze"],
        vec![
            "analyze",
            "--input",
            "synthetic_corpus.txt",
            "--rpy",
            "1995:1900",
        ],
        vec![
            "analyze",
            "--input",
            "synthetic_corpus.txt",
            "--marker",
            "rpy=1960",
        ],
        vec![
            "analyze",
            "--input",
            "synthetic_corpus.txt",
            "--marker-mode",
            "some",
        ],
        vec![
            "analyze",
            "--input",
            "synthetic_corpus.txt",
            "--cluster-threshold",
            "2",
        ],
        vec!["analyze", "--input", "absent.txt"],
    ] {
        let out = rpys(&args, dir.path());
        assert!(!out.status.success(), "{args:?}");
    }
}
