//! End-to-end tests of the benchmark binary: exit codes, CSV schemas,
//! determinism and the documented summary claims.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phs-bench"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .expect("header")
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("missing column {name} in {header:?}"));
    rows.iter().map(|r| r[idx]).collect()
}

#[test]
fn pendulum_run_writes_balanced_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "pendulum",
            "--method",
            "avfphs",
            "--h",
            "0.5",
            "--steps",
            "200",
            "--out",
            "pend",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (header, rows) = read_csv(&dir.path().join("pend.ledger.csv"));
    assert_eq!(
        header,
        [
            "step",
            "t",
            "H",
            "dH",
            "supply",
            "residual",
            "A_ext_cumulative"
        ]
    );
    assert_eq!(rows.len(), 200);
    let max_residual = column(&header, &rows, "residual")
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    assert!(max_residual <= 1e-11, "max residual {max_residual:.3e}");

    let (theader, trows) = read_csv(&dir.path().join("pend.trajectory.csv"));
    assert_eq!(theader, ["step", "t", "x_1", "x_2", "H", "y_1", "u_1"]);
    assert_eq!(trows.len(), 201);
    // Damping injection never pushes: u has sign opposite to y.
    for row in &trows {
        let y = row[5];
        let u = row[6];
        assert!(y * u <= 0.0, "damping sign violated: y={y} u={u}");
    }
}

#[test]
fn rigid_body_ledger_closes_at_machine_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "rigid-body",
            "--method",
            "disgrad-secant",
            "--h",
            "0.5",
            "--steps",
            "120",
            "--out",
            "rb",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("rb.ledger.csv"));
    let h0 = column(&header, &rows, "H")[0];
    let closure: f64 = column(&header, &rows, "residual").iter().sum();
    assert!(
        closure.abs() <= 1e-12 * h0.abs(),
        "|dH_total + A_ext| = {:.3e} vs allowance {:.3e}",
        closure.abs(),
        1e-12 * h0.abs()
    );
    // Diagnostic column: quaternion norm drift stays at round-off.
    let (theader, trows) = read_csv(&dir.path().join("rb.trajectory.csv"));
    let drift = column(&theader, &trows, "q_norm_drift");
    assert!(drift.iter().all(|d| d.abs() <= 1e-12));
}

#[test]
fn identical_configurations_give_bit_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "--experiment".to_string(),
            "microphone".to_string(),
            "--method".to_string(),
            "collocation".to_string(),
            "--stages".to_string(),
            "2".to_string(),
            "--steps".to_string(),
            "80".to_string(),
            "--out".to_string(),
            out.to_string(),
        ]
    };
    for out in ["a", "b"] {
        let args = args(out);
        let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let output = bench(&refs, dir.path());
        assert!(
            output.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    for suffix in ["trajectory", "ledger"] {
        let a = std::fs::read(dir.path().join(format!("a.{suffix}.csv"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{suffix}.csv"))).unwrap();
        assert_eq!(a, b, "{suffix} files differ between identical runs");
    }
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&["--experiment", "zeppelin"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown experiment"), "stderr: {stderr}");
}

#[test]
fn starved_solver_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "pendulum",
            "--method",
            "avfphs",
            "--max-iter",
            "1",
            "--tol",
            "1e-15",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("step 0 failed"), "stderr: {stderr}");
}

#[test]
fn comparison_reproduces_energy_error_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "pendulum",
            "--compare",
            "avfphs,plain-avf,implicit-midpoint,improved-euler",
            "--steps",
            "200",
            "--oracle-h",
            "0.01",
            "--out",
            "cmp",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("cmp.comparison.csv"));
    let max_of = |name: &str| {
        column(&header, &rows, name)
            .iter()
            .fold(0.0f64, |a, &b| a.max(b))
    };
    let avf = max_of("Herr_avfphs");
    let plain = max_of("Herr_plain-avf");
    let midpoint = max_of("Herr_implicit-midpoint");
    let euler = max_of("Herr_improved-euler");
    assert!(
        avf < midpoint && midpoint < euler,
        "ordering violated: avf {avf:.3e}, midpoint {midpoint:.3e}, euler {euler:.3e}"
    );
    // The two averaging variants stay within a small factor of each other,
    // far below the midpoint method.
    assert!(plain < midpoint);
    assert!(avf / plain < 5.0 && plain / avf < 5.0);
    // The improved Euler run winds up in a different well entirely.
    let x1_avf = column(&header, &rows, "x1_avfphs");
    let x1_ie = column(&header, &rows, "x1_improved-euler");
    assert!((x1_avf.last().unwrap() - x1_ie.last().unwrap()).abs() > 10.0);
    // Per-method files also exist.
    assert!(dir.path().join("cmp.avfphs.trajectory.csv").exists());
    assert!(dir.path().join("cmp.improved-euler.ledger.csv").exists());
}

#[test]
fn single_method_comparison_degenerates_to_the_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "pendulum",
            "--compare",
            "avfphs",
            "--steps",
            "40",
            "--out",
            "one",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let (cheader, crows) = read_csv(&dir.path().join("one.comparison.csv"));
    let (theader, trows) = read_csv(&dir.path().join("one.avfphs.trajectory.csv"));
    let cmp_x1 = column(&cheader, &crows, "x1_avfphs");
    let run_x1 = column(&theader, &trows, "x_1");
    assert_eq!(cmp_x1.len(), run_x1.len());
    for (a, b) in cmp_x1.iter().zip(&run_x1) {
        assert_eq!(a, b, "comparison column diverges from the plain run");
    }
}

#[test]
fn comparison_survives_a_failing_method_with_a_partial_table() {
    let dir = tempfile::tempdir().unwrap();
    // One iteration starves the implicit method; the explicit one finishes.
    let out = bench(
        &[
            "--experiment",
            "pendulum",
            "--compare",
            "avfphs,improved-euler",
            "--steps",
            "20",
            "--max-iter",
            "1",
            "--tol",
            "1e-15",
            "--out",
            "part",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("dropped from the comparison"),
        "stderr: {stderr}"
    );
    let (header, rows) = read_csv(&dir.path().join("part.comparison.csv"));
    assert!(header.iter().any(|h| h == "Herr_improved-euler"));
    assert!(!header.iter().any(|h| h == "Herr_avfphs"));
    assert_eq!(rows.len(), 21);
}

#[test]
fn splitting_runs_without_a_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "rigid-body",
            "--method",
            "splitting",
            "--steps",
            "100",
            "--out",
            "sp",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("sp.trajectory.csv").exists());
    assert!(!dir.path().join("sp.ledger.csv").exists());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ledger skipped"), "stderr: {stderr}");
    // Effective step is 2h.
    let (header, rows) = read_csv(&dir.path().join("sp.trajectory.csv"));
    let t = column(&header, &rows, "t");
    assert_eq!(t[1] - t[0], 1.0);
    // Energy never increases under pure damping.
    let h = column(&header, &rows, "H");
    for w in h.windows(2) {
        assert!(w[1] - w[0] <= 1e-12);
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# microphone setup\nexperiment = microphone\nmethod = avfphs\nsteps = 30\nx0 = 1.5, 0.0, 1.0\n",
    )
    .unwrap();
    let out = bench(
        &["--config", "run.cfg", "--steps", "10", "--out", "cfg"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("cfg.trajectory.csv"));
    assert_eq!(rows.len(), 11, "CLI --steps must override the config file");
    let x1 = column(&header, &rows, "x_1");
    assert_eq!(x1[0], 1.5, "x0 override not applied");
}

#[test]
fn microphone_defaults_still_balance() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(
        &[
            "--experiment",
            "microphone",
            "--steps",
            "200",
            "--out",
            "mic",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("mic.ledger.csv"));
    let max_residual = column(&header, &rows, "residual")
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    assert!(max_residual <= 1e-10, "max residual {max_residual:.3e}");
    // Dissipation shows up as strictly negative supply while moving.
    let supply = column(&header, &rows, "supply");
    assert!(supply[0] < 0.0);
}
