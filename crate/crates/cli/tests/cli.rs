use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levyhj_cli::parse_config;
use levyhj_core::snapshot::read_snapshot;
use levyhj_core::solver::{contraction_horizon, pde_residual};
use levyhj_core::{GridOperator, MildSolver};

fn experiment(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("experiments")
        .join(name)
}

fn levyhj(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levyhj"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// (units line, header, rows) of a CLI CSV.
fn read_csv(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let units = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (units, header, rows)
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn kernel_check_recovers_the_decay_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    let text = fs::read_to_string(experiment("a1_fractional_1_3.toml"))
        .unwrap()
        .replace("alpha = 1.3", "alpha = 1.5");
    fs::write(&cfg, text).unwrap();
    let out = levyhj(&["kernel-check"], &cfg, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (units, header, rows) = read_csv(&dir.path().join("a1_fractional_1_3.csv"));
    assert!(units.starts_with("# units: m [1], t [time]"));
    assert_eq!(
        header,
        columns(&["m", "t", "l1_norm", "fitted_slope", "fitted_c0", "r2"])
    );
    assert_eq!(rows.len(), 8);
    let slope: f64 = rows[0][3].parse().unwrap();
    assert!((slope + 2.0 / 3.0).abs() < 0.01, "{slope}");
    // the plot script reads the CSV and computes nothing
    let gp = fs::read_to_string(dir.path().join("a1_fractional_1_3.gp")).unwrap();
    assert!(gp.contains("data = 'a1_fractional_1_3.csv'"));
    assert!(gp.lines().all(|l| !l.contains("fit ")));
}

#[test]
fn heat_flow_solve_has_stencil_sized_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let path = experiment("heat_flow.toml");
    let out = levyhj(&["solve", "--quiet"], &path, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let (_, header, rows) = read_csv(&dir.path().join("heat_flow.csv"));
    assert_eq!(
        header,
        columns(&[
            "t",
            "sup_u",
            "sup_grad",
            "weighted_norm",
            "residual_sup",
            "picard_iters"
        ])
    );
    assert_eq!(rows.len(), 40);
    assert!(rows[0][4].is_empty() && rows[39][4].is_empty());
    assert!(rows.iter().all(|r| r[5] == "1"));

    let cfg = parse_config(&path).unwrap();
    let setup = cfg.build().unwrap();
    let op = GridOperator::new(&setup.grid, &cfg.operator).unwrap();
    let (traj, _) = MildSolver::new(&op, &setup.hamiltonian, &cfg.solver)
        .unwrap()
        .solve(&setup.u0)
        .unwrap();
    let report = pde_residual(&traj, &setup.hamiltonian, &op).unwrap();
    for (j, row) in rows.iter().enumerate().skip(1).take(38) {
        let r: f64 = row[4].parse().unwrap();
        let limit = 10.0 * (cfg.solver.picard_tol + report.stencil_estimate[j - 1]);
        assert!(r <= limit, "node {j}: {r} > {limit}");
    }
}

#[test]
fn adversarial_run_fails_with_exit_code_two() {
    let path = experiment("adversarial_no_contraction.toml");
    let cfg = parse_config(&path).unwrap();
    let setup = cfg.build().unwrap();
    // kernel constant as a sup of t^{1/alpha} |D p_t|_1 over the resolved window
    let op = GridOperator::new(&setup.grid, &cfg.operator).unwrap();
    let (lo, hi) = op.resolved_time_window().unwrap();
    let c0 = (0..8)
        .map(|j| {
            let t = lo * (hi / lo).powf(j as f64 / 7.0);
            op.kernel_deriv_l1_norm(t, 1).unwrap() * t.powf(1.0 / setup.alpha)
        })
        .fold(0.0f64, f64::max);
    let horizon = contraction_horizon(&setup.hamiltonian, &setup.u0, c0, setup.alpha).unwrap();
    assert!(cfg.solver.horizon >= 10.0 * horizon, "horizon {horizon}");
    let dir = tempfile::tempdir().unwrap();
    let out = levyhj(&["solve"], &path, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not contracting"), "{}", stderr(&out));
    assert!(!dir.path().join("adversarial.csv").exists());
}

#[test]
fn validation_failures_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(experiment("a5_residual.toml")).unwrap();
    let cases = [
        (base.replace("n = 64", "n = 100"), "power of two"),
        (
            base.replace("name = \"sin\"", "name = \"holder_cusp\"\ndelta = 0.4")
                .replace("time_grading = 1.0", "case = \"II\"\ndelta = 0.4"),
            "(U0') requires delta > (r-alpha)/(r-1)",
        ),
        (base.replace("T = 0.5", "T = \"long\""), "solver.T"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("bad{i}.toml"));
        fs::write(&cfg, text).unwrap();
        let out = levyhj(&["solve"], &cfg, dir.path());
        assert_eq!(out.status.code(), Some(1), "case {i}");
        assert!(stderr(&out).contains(needle), "case {i}: {}", stderr(&out));
    }
    let out = levyhj(&["solve"], &dir.path().join("missing.toml"), dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn constants_table_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyhj(&["constants"], &experiment("constants.toml"), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, header, rows) = read_csv(&dir.path().join("constants.csv"));
    assert_eq!(
        header,
        columns(&[
            "k",
            "alpha",
            "beta",
            "gamma",
            "c0",
            "d",
            "c_k_beta_d",
            "c_upper_k",
            "c_bar"
        ])
    );
    assert_eq!(rows.len(), 4);
    // k = 1, beta = 0.5, gamma = 0: alpha c_k / (alpha + beta - k) with c_k = 1
    let upper: f64 = rows[0][7].parse().unwrap();
    assert!((upper - 1.6 / 1.1).abs() < 1e-14);
}

#[test]
fn gronwall_bounds_dominate_the_oracle() {
    for name in ["gronwall_first", "gronwall_second"] {
        let dir = tempfile::tempdir().unwrap();
        let out = levyhj(
            &["gronwall"],
            &experiment(&format!("{name}.toml")),
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let (_, header, rows) = read_csv(&dir.path().join(format!("{name}.csv")));
        assert_eq!(header, columns(&["t", "oracle", "bound", "slack"]));
        assert_eq!(rows.len(), 256);
        for r in &rows {
            let slack: f64 = r[3].parse().unwrap();
            assert!(slack >= -1e-8, "{name}: {r:?}");
        }
    }
}

#[test]
fn repeated_solves_are_byte_identical_and_snapshots_round_trip() {
    let path = experiment("a10_determinism.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = levyhj(&["solve", "--quiet"], &path, d.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 17);
    for n in &names {
        assert_eq!(
            fs::read(a.path().join(n)).unwrap(),
            fs::read(b.path().join(n)).unwrap()
        );
    }
    let snap =
        read_snapshot(fs::File::open(a.path().join("a10_determinism_0000.snap")).unwrap()).unwrap();
    assert_eq!(snap.grid().dimension(), 2);
    assert_eq!(snap.grid().points_per_axis(), 32);
}

#[test]
fn one_sided_kernel_decays_at_the_stable_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyhj(
        &["kernel-check", "--quiet"],
        &experiment("kernel_riesz_feller.toml"),
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, _, rows) = read_csv(&dir.path().join("kernel_riesz_feller.csv"));
    let slope: f64 = rows[0][3].parse().unwrap();
    let r2: f64 = rows[0][5].parse().unwrap();
    assert!(
        (slope + 1.0 / 1.5).abs() <= 0.05 && r2 >= 0.999,
        "{slope} {r2}"
    );
}
