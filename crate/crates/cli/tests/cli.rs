use std::path::Path;
use std::process::{Command, Output};

fn codeloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codeloop"))
        .args(args)
        .output()
        .expect("spawn")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_small(dir: &Path) -> Output {
    codeloop(&[
        "synth",
        "--frames",
        "40",
        "--loop-start",
        "30",
        "--revisit",
        "8",
        "--seed",
        "3",
        "--out",
        s(dir),
    ])
}

#[test]
fn synth_writes_frames_manifest_and_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    let out = synth_small(&data);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(data.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 40);
    let gt = std::fs::read_to_string(data.join("gt.txt")).unwrap();
    assert_eq!(gt.lines().count(), 24);
    assert!(data.join("frame_00000.pgm").exists());
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(synth_small(&a).status.success());
    assert!(synth_small(&b).status.success());
    for name in ["gt.txt", "frame_00000.pgm", "frame_00035.pgm"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn detect_writes_one_row_per_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert!(synth_small(&data).status.success());
    let det = tmp.path().join("det.csv");
    let stats = tmp.path().join("stats.csv");
    let out = codeloop(&[
        "detect",
        "--manifest",
        s(&data.join("manifest.txt")),
        "--gt",
        s(&data.join("gt.txt")),
        "--tlocal",
        "10",
        "--stats",
        s(&stats),
        "--out",
        s(&det),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&det).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("query_frame,matched_frame,likelihood"));
    assert_eq!(lines.count(), 40);
    assert!(String::from_utf8_lossy(&out.stdout).contains("precision"));
    assert_eq!(std::fs::read_to_string(&stats).unwrap().lines().count(), 41);
}

#[test]
fn detect_without_ground_truth_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert!(synth_small(&data).status.success());
    let det = tmp.path().join("det.csv");
    let out = codeloop(&["detect", "--manifest", s(&data.join("manifest.txt")), "--out", s(&det)]);
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stdout).contains("precision"));
}

#[test]
fn sweep_writes_pr_table() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert!(synth_small(&data).status.success());
    let pr = tmp.path().join("pr.csv");
    let out = codeloop(&[
        "sweep",
        "--manifest",
        s(&data.join("manifest.txt")),
        "--gt",
        s(&data.join("gt.txt")),
        "--tlocal",
        "10",
        "--psi-list",
        "10,18",
        "--out",
        s(&pr),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&pr).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "psi,precision,recall,tp,fp,fn,detections_monotone");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,") && lines[2].starts_with("18,"));
}

#[test]
fn sweep_requires_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert!(synth_small(&data).status.success());
    let out = codeloop(&[
        "sweep",
        "--manifest",
        s(&data.join("manifest.txt")),
        "--out",
        s(&tmp.path().join("pr.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gt"));
}

#[test]
fn verify_reports_all_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.csv");
    let out = codeloop(&["verify", "--trials", "50", "--seed", "9", "--out", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,|y_m|,|y_k|,lhs,rhs,lambda,pass");
    assert_eq!(lines.iter().filter(|l| l.starts_with("centroid-")).count(), 50);
    assert_eq!(lines.iter().filter(|l| l.starts_with("locality-")).count(), 250);
    assert_eq!(lines.iter().filter(|l| l.starts_with("table-")).count(), 24);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: PASS"));
}

#[test]
fn bench_writes_timing_table() {
    let tmp = tempfile::tempdir().unwrap();
    let timing = tmp.path().join("timing.csv");
    let out = codeloop(&["bench", "--trials", "200", "--out", s(&timing)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&timing).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "benchmark,samples,mean_us,stddev_us,min_us,max_us,max_min_ratio"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("codeword_learning_L512,200,"));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.txt");
    let out = codeloop(&["detect", "--manifest", s(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    let out = codeloop(&["bench", "--trials", "5", "--out", s(&tmp.path().join("t.csv"))]);
    assert!(!out.status.success());

    let data = tmp.path().join("d");
    assert!(synth_small(&data).status.success());
    let m = data.join("manifest.txt");
    for bad in [["--roi", "1,2,3"], ["--psi", "-1"], ["--L", "0"]] {
        let out = codeloop(&[
            "detect",
            "--manifest",
            s(&m),
            bad[0],
            bad[1],
            "--out",
            s(&tmp.path().join("x.csv")),
        ]);
        assert!(!out.status.success(), "{bad:?} accepted");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn pattern_length_must_match_bit_count() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    assert!(synth_small(&data).status.success());
    let pat = tmp.path().join("p.txt");
    let p = codeloop::descriptor::generate_pattern(1, 128, (48, 48)).unwrap();
    p.save(&pat).unwrap();
    let m = data.join("manifest.txt");
    let out = codeloop(&[
        "detect",
        "--manifest",
        s(&m),
        "--pattern-file",
        s(&pat),
        "--out",
        s(&tmp.path().join("x.csv")),
    ]);
    assert!(!out.status.success());
    let out = codeloop(&[
        "detect",
        "--manifest",
        s(&m),
        "--pattern-file",
        s(&pat),
        "--L",
        "128",
        "--out",
        s(&tmp.path().join("x.csv")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
