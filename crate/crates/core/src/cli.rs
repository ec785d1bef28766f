//! Command-line front end and run artifacts.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    distance_estimate, k_eps_bound, k_max_bound, kantorovich_check, mysovskikh_check,
    ConvergenceReport, ProblemConstants,
};
use crate::config::ProblemConfig;
use crate::dynamics::{max_relative_error, DEFAULT_FD_STEP};
use crate::error::Result;
use crate::newton::{refine_support, solve, IterationRecord, SolveResult, SolveStatus};
use crate::shooting::{finite_diff_jacobian, ShootingProblem};

/// Largest accepted relative error in `check-jacobian`.
pub const JACOBIAN_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "sparsectl", version, about = "Sparse control via l1 Newton steps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a boundary-value problem and write CSV/JSON artifacts.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to ./out/<config stem>/
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override a config value, e.g. `--set refine.enabled=true`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare the assembled Jacobian with central finite differences.
    CheckJacobian {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FD_STEP, allow_negative_numbers = true)]
        fd_step: f64,
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
    /// Evaluate convergence conditions and iteration bounds.
    Bounds {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        mu0: f64,
        #[arg(long = "L")]
        l_const: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
    },
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.command {
        Command::Solve { config, output, overrides } => {
            cmd_solve(&config, output.as_deref(), &overrides)
        }
        Command::CheckJacobian { config, fd_step, samples } => {
            cmd_check_jacobian(&config, fd_step, samples)
        }
        Command::Bounds { mu, mu0, l_const, s, rho, eps } => {
            cmd_bounds(mu, mu0, l_const, s, rho, eps)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub status: SolveStatus,
    pub residual_inf: f64,
    pub u_l1_norm: f64,
    pub u_nnz: usize,
    pub iterations: usize,
}

/// Everything a solve run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Row `j` is `u[j]`.
    pub control_table: Vec<Vec<f64>>,
    /// Row `j` is `x[j]`, `N + 1` rows.
    pub trajectory_table: Vec<Vec<f64>>,
    pub iteration_log: Vec<IterationRecord>,
    pub summary: Summary,
    pub wall_time: f64,
}

impl RunArtifacts {
    pub fn from_result(problem: &ShootingProblem, result: &SolveResult, wall_time: f64) -> Result<Self> {
        let q = problem.control_dim();
        let control_table = result.u_final.as_slice().chunks(q).map(<[f64]>::to_vec).collect();
        let trajectory_table = problem
            .trajectory(&result.u_final)?
            .iter()
            .map(|x| x.as_slice().to_vec())
            .collect();
        Ok(Self {
            control_table,
            trajectory_table,
            iteration_log: result.history.clone(),
            summary: Summary {
                status: result.status,
                residual_inf: result.residual_inf,
                u_l1_norm: result.u_l1_norm,
                u_nnz: result.u_nnz,
                iterations: result.iterations(),
            },
            wall_time,
        })
    }

    /// Writes `control.csv`, `trajectory.csv`, `iterations.json`,
    /// `summary.json` and `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_table(&dir.join("control.csv"), "u", &self.control_table)?;
        write_table(&dir.join("trajectory.csv"), "x", &self.trajectory_table)?;
        fs::write(dir.join("iterations.json"), serde_json::to_string_pretty(&self.iteration_log)?)?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        // kept apart from summary.json so that file stays reproducible
        fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&serde_json::json!({ "wall_time": self.wall_time }))?,
        )?;
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        format!(
            "{} {:e} {} {} {}",
            serde_json::to_value(s.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            s.residual_inf,
            s.u_l1_norm,
            s.u_nnz,
            s.iterations
        )
    }
}

/// Formats with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(path: &Path, prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let width = rows.first().map_or(0, Vec::len);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["j".to_string()];
    header.extend((0..width).map(|i| format!("{prefix}_{i}")));
    writer.write_record(&header)?;
    for (j, row) in rows.iter().enumerate() {
        let mut record = vec![j.to_string()];
        record.extend(row.iter().map(|&v| format_value(v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a table written by [`RunArtifacts::write`], dropping the index column.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| crate::Error::Config(format!("{path:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the configured solve (with refinement when enabled).
pub fn run_config(cfg: &ProblemConfig) -> Result<RunArtifacts> {
    let problem = cfg.problem()?;
    let solver = cfg.solver_config()?;
    let start = Instant::now();
    let result = if cfg.refine.enabled {
        refine_support(&problem, &solver, cfg.refine.probe_steps, cfg.refine.refine_eps)?
    } else {
        solve(&problem, &solver)?
    };
    RunArtifacts::from_result(&problem, &result, start.elapsed().as_secs_f64())
}

fn default_output_dir(config: &Path) -> PathBuf {
    let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from("out").join(stem)
}

pub fn cmd_solve(config: &Path, output: Option<&Path>, overrides: &[String]) -> i32 {
    let cfg = match ProblemConfig::load(config, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return 1;
        }
    };
    let artifacts = match run_config(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: solve failed: {e}");
            return 2;
        }
    };
    let dir = output.map_or_else(|| default_output_dir(config), Path::to_path_buf);
    if let Err(e) = artifacts.write(&dir) {
        eprintln!("error: writing artifacts to {}: {e}", dir.display());
        return 1;
    }
    for rec in &artifacts.iteration_log {
        eprintln!(
            "k={:<3} p={:.3e} gamma={:.3e} |w|_1={:.3e} nnz={} backtracks={}",
            rec.k, rec.p_k, rec.gamma, rec.step_l1_norm, rec.nnz_u, rec.backtracks
        );
    }
    println!("{}", artifacts.summary_line());
    if artifacts.summary.status == SolveStatus::Converged {
        0
    } else {
        2
    }
}

pub fn cmd_check_jacobian(config: &Path, fd_step: f64, samples: usize) -> i32 {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        eprintln!("error: --fd-step must be positive, got {fd_step}");
        return 1;
    }
    let problem = match ProblemConfig::load(config, &[]).and_then(|c| c.problem()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return 1;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    let mut failed = false;
    for sample in 0..samples {
        let u = if sample == 0 {
            DVector::zeros(problem.n())
        } else {
            DVector::from_fn(problem.n(), |_, _| rng.random_range(-0.1..0.1))
        };
        let err = problem
            .jacobian(&u)
            .and_then(|(_, jac)| Ok((jac, finite_diff_jacobian(&problem, &u, fd_step)?)))
            .map(|(jac, fd)| max_relative_error(&jac.matrix, &fd));
        match err {
            Ok(e) => {
                println!("sample {sample}: max relative error {e:.3e}");
                worst = worst.max(e);
            }
            Err(e) => {
                println!("sample {sample}: {e}");
                failed = true;
            }
        }
    }
    println!("max relative error {worst:.3e}");
    if !failed && worst <= JACOBIAN_CHECK_TOL {
        0
    } else {
        2
    }
}

fn print_report(name: &str, report: &ConvergenceReport) {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.12}"));
    println!(
        "{name}: holds={} h={:.12} radius_bound={} distance_bound={}",
        report.condition_holds,
        report.h_ratio,
        opt(report.radius_bound),
        opt(report.u_star_distance_bound)
    );
    if let Some(d) = &report.diagnostic {
        println!("  {d}");
    }
}

pub fn cmd_bounds(mu: f64, mu0: f64, l_const: f64, s: f64, rho: f64, eps: f64) -> i32 {
    let constants = ProblemConstants { mu0, mu, l_const, rho, s };
    if let Err(e) = constants.validate() {
        eprintln!("error: {e}");
        return 1;
    }
    match kantorovich_check(&constants) {
        Ok(r) => print_report("kantorovich", &r),
        Err(e) => println!("kantorovich: {e}"),
    }
    match mysovskikh_check(&constants) {
        Ok(r) => print_report("mysovskikh", &r),
        Err(e) => println!("mysovskikh: {e}"),
    }
    match k_max_bound(mu, l_const, s) {
        Ok(k) => println!("k_max: {k}"),
        Err(e) => println!("k_max: {e}"),
    }
    match k_eps_bound(mu, l_const, s, eps) {
        Ok(k) => println!("k_eps: {k}"),
        Err(e) => println!("k_eps: {e}"),
    }
    match distance_estimate(0, mu, l_const, s) {
        Ok(d) => println!("distance_estimate(0): {d:.12}"),
        Err(e) => println!("distance_estimate(0): {e}"),
    }
    0
}
