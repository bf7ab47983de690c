use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ckde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckde"))
        .args(args)
        .current_dir(dir)
        .env_remove("CKDE_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ckde(dir, args);
    assert!(
        out.status.success(),
        "ckde {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

/// A directory with a 2-D pair corpus, a 51-D profile corpus and fitted models.
fn fixture() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[
            "synth",
            "--out",
            "t2.csv",
            "--vehicles",
            "80",
            "--duration",
            "60",
            "--n-t",
            "1",
            "--profile-dt",
            "5",
            "--profiles",
            "pairs.csv",
        ],
    );
    ok(p, &["fit", "--data", "pairs.csv", "--out", "m2.json"]);
    ok(
        p,
        &[
            "synth",
            "--out",
            "t51.csv",
            "--vehicles",
            "80",
            "--duration",
            "30",
            "--profiles",
            "profiles.csv",
        ],
    );
    ok(
        p,
        &[
            "fit",
            "--data",
            "profiles.csv",
            "--out",
            "m51.json",
            "--d-red",
            "6",
        ],
    );
    dir
}

#[test]
fn endpoint_shorthand_gives_fifty_profiles() {
    let dir = fixture();
    let p = dir.path();
    ok(
        p,
        &[
            "csample",
            "--model",
            "m51.json",
            "--init-speed",
            "15",
            "--init-accel",
            "1",
            "--out",
            "c.csv",
        ],
    );
    let (header, rows) = read_rows(&p.join("c.csv"));
    assert_eq!(header.len(), 51);
    assert_eq!(header[0], "p1");
    assert_eq!(rows.len(), 50);
    for r in &rows {
        assert!((r[0] - 15.0).abs() < 1e-6);
        assert!(((r[1] - r[0]) / 0.1 - 1.0).abs() < 1e-6);
    }

    ok(
        p,
        &[
            "csample",
            "--model",
            "m51.json",
            "--init-speed",
            "10",
            "--end-speed",
            "15",
            "--out",
            "e.csv",
            "--reduced",
            "-m",
            "7",
        ],
    );
    let (header, rows) = read_rows(&p.join("e.csv"));
    assert_eq!((header.len(), rows.len()), (6, 7));
    // validate accepts reduced and decoded sample files alike
    ok(
        p,
        &[
            "validate",
            "--model",
            "m51.json",
            "--samples",
            "e.csv",
            "--init-speed",
            "10",
            "--end-speed",
            "15",
        ],
    );
    ok(
        p,
        &[
            "validate",
            "--model",
            "m51.json",
            "--samples",
            "c.csv",
            "--init-speed",
            "15",
            "--init-accel",
            "1",
        ],
    );
}

#[test]
fn full_space_constraint_on_reduced_model() {
    let dir = fixture();
    let p = dir.path();
    let mut row = vec!["0"; 51];
    row[0] = "1";
    row[50] = "-1";
    let constraint = format!("[[{}]],[2]", row.join(","));
    ok(
        p,
        &[
            "csample",
            "--model",
            "m51.json",
            "--constraint",
            &constraint,
            "--out",
            "c.csv",
            "-m",
            "20",
        ],
    );
    for r in read_rows(&p.join("c.csv")).1 {
        assert!((r[0] - r[50] - 2.0).abs() < 1e-8);
    }
}

#[test]
fn validate_reports_and_fails_on_wrong_constraint() {
    let dir = fixture();
    let p = dir.path();
    ok(
        p,
        &[
            "csample",
            "--model",
            "m2.json",
            "--constraint",
            "[[1,-1]],[5]",
            "-m",
            "200000",
            "--out",
            "s.csv",
        ],
    );
    let out = ok(
        p,
        &[
            "validate",
            "--model",
            "m2.json",
            "--samples",
            "s.csv",
            "--constraint",
            "[[1,-1]],[5]",
        ],
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["tv"].as_f64().unwrap() <= 0.02);

    let out = ckde(
        p,
        &[
            "validate",
            "--model",
            "m2.json",
            "--samples",
            "s.csv",
            "--constraint",
            "[[1,-1]],[4]",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["residual_ok"], false);
}

#[test]
fn oracle_grid_is_a_density() {
    let dir = fixture();
    let p = dir.path();
    ok(
        p,
        &[
            "oracle",
            "--model",
            "m2.json",
            "--constraint",
            "[[1,-1]],[5]",
            "--out",
            "g.csv",
            "--points",
            "501",
        ],
    );
    let (header, rows) = read_rows(&p.join("g.csv"));
    assert_eq!(header, ["x", "density"]);
    assert_eq!(rows.len(), 501);
    let integral: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]))
        .sum();
    assert!((integral - 1.0).abs() < 1e-9);

    ok(
        p,
        &[
            "oracle",
            "--model",
            "m2.json",
            "--constraint",
            "[[1,-1]],[5]",
            "--out",
            "g2.csv",
            "--axis",
            "p2",
            "--lo",
            "-5",
            "--hi",
            "30",
            "--points",
            "11",
        ],
    );
    let rows = read_rows(&p.join("g2.csv")).1;
    assert_eq!((rows[0][0], rows[10][0]), (-5.0, 30.0));
}

#[test]
fn seed_flag_and_environment_agree() {
    let dir = fixture();
    let p = dir.path();
    ok(
        p,
        &[
            "sample", "--model", "m2.json", "-m", "100", "--out", "a.csv", "--seed", "99",
        ],
    );
    let out = Command::new(env!("CARGO_BIN_EXE_ckde"))
        .args([
            "sample", "--model", "m2.json", "-m", "100", "--out", "b.csv",
        ])
        .current_dir(p)
        .env("CKDE_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    ok(
        p,
        &[
            "sample", "--model", "m2.json", "-m", "100", "--out", "c.csv", "--seed", "100",
        ],
    );
    let read = |n: &str| std::fs::read(p.join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    let dir = fixture();
    let p = dir.path();
    let code = |args: &[&str]| ckde(p, args).status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(
        code(&["csample", "--model", "m2.json", "--out", "x.csv"]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "csample",
            "--model",
            "missing.json",
            "--constraint",
            "[[1,-1]],[5]",
            "--out",
            "x.csv"
        ]),
        Some(2)
    );
    // shorthands need a reduced basis
    assert_eq!(
        code(&[
            "csample",
            "--model",
            "m2.json",
            "--init-speed",
            "15",
            "--init-accel",
            "1",
            "--out",
            "x.csv"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "csample",
            "--model",
            "m2.json",
            "--constraint",
            "[[1,-1,0]],[5]",
            "--out",
            "x.csv"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "csample",
            "--model",
            "m2.json",
            "--constraint",
            "[[1,-1]],[5",
            "--out",
            "x.csv"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "fit",
            "--data",
            "pairs.csv",
            "--out",
            "m.json",
            "--bandwidth",
            "scott"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "synth",
            "--out",
            "t.csv",
            "--speed-min",
            "10",
            "--speed-max",
            "5"
        ]),
        Some(2)
    );
    assert!(!p.join("x.csv").exists());
}

#[test]
fn fit_variants() {
    let dir = fixture();
    let p = dir.path();
    ok(
        p,
        &[
            "fit",
            "--data",
            "pairs.csv",
            "--out",
            "cv.json",
            "--bandwidth",
            "cv:0.05,0.1,0.2,0.4",
        ],
    );
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("cv.json")).unwrap()).unwrap();
    let h2 = model["bandwidth"][0][0].as_f64().unwrap();
    assert!([0.05f64, 0.1, 0.2, 0.4]
        .iter()
        .any(|h| (h * h - h2).abs() < 1e-15));

    std::fs::write(p.join("h.json"), "[[2.0, 0.5], [0.5, 1.0]]").unwrap();
    ok(
        p,
        &[
            "fit",
            "--data",
            "pairs.csv",
            "--out",
            "file.json",
            "--bandwidth",
            "file:h.json",
            "--no-standardize",
        ],
    );
    ok(
        p,
        &[
            "csample",
            "--model",
            "file.json",
            "--constraint",
            "[[1,-1]],[5]",
            "--out",
            "s.csv",
            "-m",
            "10",
        ],
    );
    for r in read_rows(&p.join("s.csv")).1 {
        assert!((r[0] - r[1] - 5.0).abs() < 1e-12);
    }
}

#[test]
fn window_command_matches_synth_profiles() {
    let dir = fixture();
    let p = dir.path();
    ok(p, &["window", "--input", "t51.csv", "--out", "w.csv"]);
    assert_eq!(
        std::fs::read(p.join("w.csv")).unwrap(),
        std::fs::read(p.join("profiles.csv")).unwrap()
    );
}

#[test]
fn histogram_counts_every_sample() {
    let dir = fixture();
    let p = dir.path();
    ok(
        p,
        &[
            "csample",
            "--model",
            "m2.json",
            "--constraint",
            "[[1,-1]],[5]",
            "-m",
            "1000",
            "--out",
            "s.csv",
            "--histogram",
            "h.csv",
            "--bins",
            "25",
        ],
    );
    let (header, rows) = read_rows(&p.join("h.csv"));
    assert_eq!(header, ["lo", "hi", "count", "density"]);
    assert_eq!(rows.len(), 25);
    assert_eq!(rows.iter().map(|r| r[2]).sum::<f64>(), 1000.0);
}
