//! The five experiment commands. Each writes one CSV (plus optional extras)
//! into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use levyhj_core::bounds::{
    gronwall_bound_1, gronwall_bound_2, schauder_constants, volterra_oracle, Forcing,
};
use levyhj_core::regularity::blowup_rate_fit;
use levyhj_core::snapshot::write_snapshot;
use levyhj_core::solver::{pde_residual, weighted_norms, MildSolver};
use levyhj_core::{Error as CoreError, GridOperator};
use thiserror::Error;

use crate::config::{
    ConfigError, ExperimentConfig, GronwallConfig, KernelCheckConfig, RateCheck, RateSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    KernelCheck,
    Solve,
    Rates,
    Constants,
    Gronwall,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::KernelCheck => "kernel-check",
            Command::Solve => "solve",
            Command::Rates => "rates",
            Command::Constants => "constants",
            Command::Gronwall => "gronwall",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 1 for invalid input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Files written by a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub extras: Vec<PathBuf>,
    /// One-line human summary.
    pub summary: String,
}

/// Shortest round-trip decimal text; stable across runs.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

struct Table {
    columns: Vec<&'static str>,
    units: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[(&'static str, &'static str)]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.0).collect(),
            units: columns.iter().map(|c| c.1).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut out = BufWriter::new(file);
        let units: Vec<String> = self
            .columns
            .iter()
            .zip(&self.units)
            .map(|(c, u)| format!("{c} [{u}]"))
            .collect();
        writeln!(out, "# units: {}", units.join(", ")).map_err(|e| io_err(path, e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(|e| io_err(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
        Ok(())
    }
}

fn csv_target(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    Ok(out_dir.join(&cfg.outputs.csv_path))
}

// gnuplot script reading only the CSV
fn plot_script(csv: &Path, body: &str) -> Result<PathBuf, CliError> {
    let path = csv.with_extension("gp");
    let name = csv
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = format!(
        "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\ndata = '{name}'\n{body}"
    );
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn run(
    command: Command,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunOutcome, CliError> {
    match command {
        Command::KernelCheck => kernel_check(cfg, out_dir),
        Command::Solve => solve(cfg, out_dir),
        Command::Rates => rates(cfg, out_dir),
        Command::Constants => constants(cfg, out_dir),
        Command::Gronwall => gronwall(cfg, out_dir),
    }
}

fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn kernel_times(kc: &KernelCheckConfig, op: &GridOperator) -> Result<Vec<f64>, CliError> {
    if let Some(t) = &kc.times {
        return Ok(t.clone());
    }
    let (lo, hi) = op.resolved_time_window()?;
    let lo = kc.t_min.unwrap_or(lo);
    let hi = kc.t_max.unwrap_or(hi);
    if !(lo > 0.0 && lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(CoreError::GridTooCoarse(format!(
            "no usable kernel time window: [{lo:e}, {hi:e}]; refine the grid or enlarge the period"
        ))
        .into());
    }
    Ok(geomspace(lo, hi, kc.count))
}

fn kernel_check(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let setup = cfg.build()?;
    let op = GridOperator::new(&setup.grid, &cfg.operator)?;
    let kc = cfg.kernel_check.clone().unwrap_or_default();
    let times = kernel_times(&kc, &op)?;
    let mut table = Table::new(&[
        ("m", "1"),
        ("t", "time"),
        ("l1_norm", "length^-m"),
        ("fitted_slope", "1"),
        ("fitted_c0", "1"),
        ("r2", "1"),
    ]);
    let mut summary = Vec::new();
    for &m in &kc.m {
        let fit = op.fit_kernel_decay(&times, m)?;
        for (t, l1) in fit.times.iter().zip(&fit.l1_norms) {
            table.push(vec![
                m.to_string(),
                fmt_f64(*t),
                fmt_f64(*l1),
                fmt_f64(fit.fitted_slope),
                fmt_f64(fit.fitted_c0),
                fmt_f64(fit.r_squared),
            ]);
        }
        summary.push(format!(
            "m = {m}: slope {:.4} (expected {:.4}), c0 {:.4}, r2 {:.6}",
            fit.fitted_slope,
            -(m as f64) / setup.alpha,
            fit.fitted_c0,
            fit.r_squared
        ));
    }
    let csv = csv_target(cfg, out_dir)?;
    table.write(&csv)?;
    let mut extras = Vec::new();
    if cfg.outputs.plot_script {
        extras.push(plot_script(
            &csv,
            "set logscale xy\nset xlabel 't'\nset ylabel '||D^m p_t||_1'\nplot data using 2:3 with linespoints\n",
        )?);
    }
    Ok(RunOutcome {
        csv,
        extras,
        summary: summary.join("; "),
    })
}

fn solve(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let setup = cfg.build()?;
    let op = GridOperator::new(&setup.grid, &cfg.operator)?;
    let solver = MildSolver::new(&op, &setup.hamiltonian, &cfg.solver)?;
    let (traj, report) = solver.solve(&setup.u0)?;
    report.check()?;
    if !report.converged {
        return Err(CoreError::NoConvergence(format!(
            "Picard iteration stopped after {} iterations at delta {:e} > {:e}",
            report.iterations,
            report.deltas.last().copied().unwrap_or(f64::NAN),
            solver.config().picard_tol
        ))
        .into());
    }
    let residual = if traj.len() >= 3 {
        Some(pde_residual(&traj, &setup.hamiltonian, &op)?)
    } else {
        None
    };
    let norms = weighted_norms(&traj, solver.config().gamma);
    let sups = traj.sups();
    let grads = traj.gradient_sups();
    let mut table = Table::new(&[
        ("t", "time"),
        ("sup_u", "field"),
        ("sup_grad", "field/length"),
        ("weighted_norm", "field"),
        ("residual_sup", "field/time"),
        ("picard_iters", "1"),
    ]);
    for j in 0..traj.len() {
        // residuals exist at interior nodes only
        let res = match &residual {
            Some(r) if j >= 1 && j + 1 < traj.len() => fmt_f64(r.residual_sup[j - 1]),
            _ => String::new(),
        };
        table.push(vec![
            fmt_f64(traj.times()[j]),
            fmt_f64(sups[j]),
            fmt_f64(grads[j]),
            fmt_f64(norms[j]),
            res,
            report.iterations.to_string(),
        ]);
    }
    let csv = csv_target(cfg, out_dir)?;
    table.write(&csv)?;
    let mut extras = Vec::new();
    if cfg.outputs.snapshots {
        let stem = csv
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "snapshot".into());
        for (j, f) in traj.fields().iter().enumerate() {
            let path = out_dir.join(format!("{stem}_{j:04}.snap"));
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            write_snapshot(f, BufWriter::new(file))?;
            extras.push(path);
        }
    }
    if cfg.outputs.plot_script {
        extras.push(plot_script(
            &csv,
            "set logscale x\nset xlabel 't'\nplot data using 1:2 with linespoints, data using 1:3 with linespoints\n",
        )?);
    }
    let summary = format!(
        "{} nodes, {} Picard iterations, final delta {:e}, max residual {}",
        traj.len(),
        report.iterations,
        report.deltas.last().copied().unwrap_or(0.0),
        residual.map_or("n/a".into(), |r| format!("{:e}", r.max_residual()))
    );
    Ok(RunOutcome {
        csv,
        extras,
        summary,
    })
}

fn rates(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let Some(rc) = &cfg.rates else {
        return Err(ConfigError::Validation {
            field: "rates".into(),
            message: "the rates command needs a [rates] section with rows".into(),
        }
        .into());
    };
    let setup = cfg.build()?;
    let op = GridOperator::new(&setup.grid, &cfg.operator)?;
    let solver = MildSolver::new(&op, &setup.hamiltonian, &cfg.solver)?;
    let traj = match rc.source {
        RateSource::HeatFlow => solver.heat_flow(&setup.u0)?,
        RateSource::Solve => {
            let (traj, report) = solver.solve(&setup.u0)?;
            report.check()?;
            traj
        }
    };
    let mut table = Table::new(&[
        ("quantity", "label"),
        ("slope", "1"),
        ("predicted", "1"),
        ("r2", "1"),
        ("window_lo", "time"),
        ("window_hi", "time"),
        ("pass", "bool"),
    ]);
    let mut passed = 0;
    for row in &rc.rows {
        let fit = blowup_rate_fit(&traj, row.quantity, row.predicted, row.window)?;
        let pass = match row.check {
            RateCheck::TwoSided => fit.matches(row.tolerance),
            RateCheck::AtMost => fit.slope <= fit.predicted_slope + row.tolerance,
            RateCheck::AtLeast => fit.within_bound(row.tolerance),
        };
        passed += pass as usize;
        table.push(vec![
            fit.quantity_label.clone(),
            fmt_f64(fit.slope),
            fmt_f64(fit.predicted_slope),
            fmt_f64(fit.r_squared),
            fmt_f64(fit.window.0),
            fmt_f64(fit.window.1),
            pass.to_string(),
        ]);
    }
    let csv = csv_target(cfg, out_dir)?;
    table.write(&csv)?;
    let mut extras = Vec::new();
    if cfg.outputs.plot_script {
        extras.push(plot_script(
            &csv,
            "set style data histograms\nplot data using 2:xtic(1) title 'slope', data using 3 title 'predicted'\n",
        )?);
    }
    Ok(RunOutcome {
        csv,
        extras,
        summary: format!("{passed} of {} rate rows pass", rc.rows.len()),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn constants(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let setup = cfg.build()?;
    let beta_default = cfg.hamiltonian.constants.beta;
    let rows = match &cfg.constants {
        Some(c) => c.rows.clone(),
        None => vec![crate::config::ConstantsRow {
            k: 1,
            beta: None,
            gamma: 0.0,
            c0: 1.0,
            holder_constant: None,
        }],
    };
    let mut table = Table::new(&[
        ("k", "1"),
        ("alpha", "1"),
        ("beta", "1"),
        ("gamma", "1"),
        ("c0", "1"),
        ("d", "1"),
        ("c_k_beta_d", "1"),
        ("c_upper_k", "1"),
        ("c_bar", "1"),
    ]);
    for row in &rows {
        let c = schauder_constants(
            row.k,
            setup.alpha,
            row.beta.unwrap_or(beta_default),
            row.gamma,
            row.c0,
            setup.grid.dimension(),
            row.holder_constant,
        )?;
        table.push(vec![
            c.k.to_string(),
            fmt_f64(c.alpha),
            fmt_f64(c.beta),
            fmt_f64(c.gamma),
            fmt_f64(c.c0),
            c.d.to_string(),
            fmt_f64(c.c_k_beta_d),
            fmt_f64(c.c_upper_k),
            opt(c.c_bar),
        ]);
    }
    let csv = csv_target(cfg, out_dir)?;
    table.write(&csv)?;
    Ok(RunOutcome {
        csv,
        extras: Vec::new(),
        summary: format!("{} constant rows", rows.len()),
    })
}

fn gronwall(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let Some(gc) = &cfg.gronwall else {
        return Err(ConfigError::Validation {
            field: "gronwall".into(),
            message: "the gronwall command needs a [gronwall] section".into(),
        }
        .into());
    };
    let (oracle, bounds) = match *gc {
        GronwallConfig::First {
            a0,
            at0,
            c,
            gamma,
            zeta,
            t0,
            n,
            scheme,
        } => {
            let f = Forcing::SingularPlusConstant { a0, gamma, at0 };
            let o = volterra_oracle(|t| f.eval(t), c, 1.0 - zeta, 1.0, t0, n, scheme.into())?;
            let b = o
                .times
                .iter()
                .map(|t| gronwall_bound_1(a0, at0, c, gamma, zeta, t0, *t))
                .collect::<Result<Vec<_>, _>>()?;
            (o, b)
        }
        GronwallConfig::Second {
            a,
            b,
            alpha_bar,
            beta_bar,
            gamma_bar,
            horizon,
            n,
            tol,
            scheme,
        } => {
            let f = Forcing::Power { a, alpha_bar };
            let o = volterra_oracle(
                |t| f.eval(t),
                b,
                beta_bar,
                gamma_bar,
                horizon,
                n,
                scheme.into(),
            )?;
            let bd = o
                .times
                .iter()
                .map(|t| {
                    gronwall_bound_2(a, b, alpha_bar, beta_bar, gamma_bar, *t, tol).map(|s| s.value)
                })
                .collect::<Result<Vec<_>, _>>()?;
            (o, bd)
        }
    };
    let mut table = Table::new(&[
        ("t", "time"),
        ("oracle", "u"),
        ("bound", "u"),
        ("slack", "relative"),
    ]);
    let mut worst = f64::INFINITY;
    for ((t, o), b) in oracle.times.iter().zip(&oracle.values).zip(&bounds) {
        let slack = (b - o) / o.abs().max(f64::MIN_POSITIVE);
        worst = worst.min(slack);
        table.push(vec![fmt_f64(*t), fmt_f64(*o), fmt_f64(*b), fmt_f64(slack)]);
    }
    let csv = csv_target(cfg, out_dir)?;
    table.write(&csv)?;
    let mut extras = Vec::new();
    if cfg.outputs.plot_script {
        extras.push(plot_script(
            &csv,
            "set xlabel 't'\nplot data using 1:2 with lines, data using 1:3 with lines\n",
        )?);
    }
    Ok(RunOutcome {
        csv,
        extras,
        summary: format!("smallest relative slack {worst:e}"),
    })
}
