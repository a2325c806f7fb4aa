mod error;
mod table;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use delay_noether::conditions::{dh_dt_residual, dubois_reymond, euler_lagrange, hamiltonian, pontryagin_system};
use delay_noether::noether::{check_invariance, noether_charge, noether_charge_oc, InvarianceConfig, Verdict};
use delay_noether::problem::{ControlProblem, GeneratorSet, Problem, Trajectory, VariationalProblem};
use delay_noether::problem_file::{parse_problem, ProblemFile};
use delay_noether::solver::{solve, SolveConfig};
use delay_noether::symexpr::Expr;
use delay_noether::verify::{charge_drift, dh_dt_check, eval_at, residual_check, Charge, DriftReport, Piece};

use error::{CliError, EXIT_USAGE};
use table::{num, trajectory_table, Table};

const INNER: &str = "inner [t1, t2-tau]";
const OUTER: &str = "outer [t2-tau, t2]";
const WHOLE: &str = "whole [t1, t2]";

/// Necessary conditions, Noether charges and numerical extremals for
/// problems with one constant time delay.
#[derive(Parser)]
#[command(name = "delay-noether", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Euler-Lagrange and DuBois-Reymond conditions (or the
    /// Hamiltonian system for control problems), one equation per line.
    Derive { file: PathBuf },
    /// Test the generators for invariance. Exit code 0 Invariant,
    /// 1 NotInvariant, 2 Inconclusive.
    Invariance {
        file: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        /// Absolute tolerance on the invariance integrands.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Print the Noether constant of motion of the generators.
    Charge { file: PathBuf },
    /// Compute an extremal by direct transcription and write it as CSV.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solver: Solver,
        /// Trajectory CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check conservation of the charge and evaluate the residuals along a
    /// trajectory. Exit code 0 iff every check is within --tol.
    Verify {
        file: PathBuf,
        /// Trajectory CSV (`t,q1..qn`, plus `u1..um,p1..pn` for control
        /// problems). Variational problems are solved when omitted.
        #[arg(long)]
        traj: Option<PathBuf>,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        sampling: Sampling,
        /// Largest accepted relative charge drift and, for control
        /// problems, largest accepted |dH/dt - dH/dt partial|.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Charge CSV (`t,charge_value,piece`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Residual CSV (`t,piece,residual,value`).
        #[arg(long)]
        residuals_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Solver {
    /// Grid step; must divide tau and t2 - t1.
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Gradient tolerance (infinity norm).
    #[arg(long, default_value_t = 1e-10)]
    gtol: f64,
}

#[derive(Args)]
struct Sampling {
    /// Random sample points for the numeric invariance test.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// What a command printed and how it ended.
struct Outcome {
    stdout: String,
    code: u8,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match run(cli.command) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe is not worth a panic
            let _ = stdout.write_all(outcome.stdout.as_bytes()).and_then(|_| stdout.flush());
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}

fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Derive { file } => derive(&load(&file)?),
        Command::Invariance { file, sampling, tol } => invariance(&load(&file)?, &sampling.config(tol)),
        Command::Charge { file } => charge(&load(&file)?),
        Command::Solve { file, solver, out } => solve_cmd(&load(&file)?, &solver.config(), out.as_deref()),
        Command::Verify { file, traj, solver, sampling, tol, out, residuals_out } => {
            let opts = VerifyOptions {
                traj: traj.as_deref(),
                solve: solver.config(),
                invariance: sampling.config(InvarianceConfig::default().tolerance),
                tol,
                out: out.as_deref(),
                residuals_out: residuals_out.as_deref(),
            };
            verify(&load(&file)?, &opts)
        }
    }
}

impl Solver {
    fn config(&self) -> SolveConfig {
        SolveConfig { h: self.h, gtol: self.gtol, ..SolveConfig::default() }
    }
}

impl Sampling {
    fn config(&self, tolerance: f64) -> InvarianceConfig {
        InvarianceConfig { samples: self.samples, tolerance, seed: self.seed }
    }
}

fn load(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_problem(&text).map_err(|e| {
        let e = CliError::from(e);
        CliError { detail: format!("{}: {}", path.display(), e.detail), ..e }
    })
}

fn generators(file: &ProblemFile) -> Result<&GeneratorSet, CliError> {
    file.generators.as_ref().ok_or_else(|| CliError::input("invalid", "the problem file has no [generators] section"))
}

fn variational_only<'a>(file: &'a ProblemFile, command: &str) -> Result<&'a VariationalProblem, CliError> {
    match &file.problem {
        Problem::Variational(p) => Ok(p),
        Problem::Control(_) => Err(CliError::input(
            "invalid",
            format!("`{command}` needs a variational problem; control problems are verified against a supplied --traj"),
        )),
    }
}

fn equation(out: &mut String, label: &str, interval: &str, e: &Expr) {
    let _ = writeln!(out, "{label} {interval}: {e} = 0");
}

fn derive(file: &ProblemFile) -> Result<Outcome, CliError> {
    let mut out = String::new();
    match &file.problem {
        Problem::Variational(p) => {
            let el = euler_lagrange(p)?;
            let dr = dubois_reymond(p)?;
            for (interval, eqs) in [(INNER, &el.inner), (OUTER, &el.outer)] {
                for (i, e) in eqs.iter().enumerate() {
                    equation(&mut out, &format!("euler-lagrange q{}", i + 1), interval, e);
                }
            }
            for (interval, eqs) in [(INNER, &dr.inner), (OUTER, &dr.outer)] {
                for e in eqs {
                    equation(&mut out, "dubois-reymond", interval, e);
                }
            }
        }
        Problem::Control(p) => {
            let _ = writeln!(out, "hamiltonian: H = {}", hamiltonian(p)?);
            let system = pontryagin_system(p)?;
            for (interval, group) in [(INNER, &system.inner), (OUTER, &system.outer)] {
                for (i, e) in group.state.iter().enumerate() {
                    equation(&mut out, &format!("state q{}", i + 1), interval, e);
                }
                for (i, e) in group.costate.iter().enumerate() {
                    equation(&mut out, &format!("costate p{}", i + 1), interval, e);
                }
                for (j, e) in group.stationary.iter().enumerate() {
                    equation(&mut out, &format!("stationary u{}", j + 1), interval, e);
                }
            }
            let (_, dt) = dh_dt_residual(p)?;
            let _ = writeln!(out, "dubois-reymond {WHOLE}: dH/dt = {dt}");
        }
    }
    Ok(Outcome::ok(out))
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Invariant => 0,
        Verdict::NotInvariant => 1,
        Verdict::Inconclusive => 2,
    }
}

fn invariance(file: &ProblemFile, cfg: &InvarianceConfig) -> Result<Outcome, CliError> {
    let report = check_invariance(&file.problem, generators(file)?, cfg)?;
    Ok(Outcome { stdout: report.to_string(), code: verdict_code(report.verdict) })
}

fn charge(file: &ProblemFile) -> Result<Outcome, CliError> {
    let g = generators(file)?;
    let out = match &file.problem {
        Problem::Variational(p) => {
            let c = noether_charge(p, g)?;
            format!("{INNER}: C = {}\n{OUTER}: C = {}\n", c.inner, c.outer)
        }
        Problem::Control(p) => format!("{WHOLE}: C = {}\n", noether_charge_oc(p, g)?),
    };
    Ok(Outcome::ok(out))
}

fn solve_cmd(file: &ProblemFile, cfg: &SolveConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let p = variational_only(file, "solve")?;
    let report = solve(p, cfg)?;
    let mut text = String::new();
    let _ = writeln!(text, "converged: {}", report.converged);
    let _ = writeln!(text, "iterations: {}", report.iterations);
    let _ = writeln!(text, "objective: {}", num(report.objective));
    let _ = writeln!(text, "gradient_norm: {}", num(report.gradient_norm));
    let _ = writeln!(text, "h: {}", num(cfg.h));
    let _ = writeln!(text, "nodes: {}", report.trajectory.grid().len());
    let table = trajectory_table(&report.trajectory);
    match out {
        Some(path) => {
            table.save(path)?;
            let _ = writeln!(text, "trajectory: {}", path.display());
        }
        None => {
            text.push('\n');
            text.push_str(&String::from_utf8_lossy(&table.into_bytes()));
        }
    }
    Ok(Outcome { stdout: text, code: if report.converged { 0 } else { 1 } })
}

struct VerifyOptions<'a> {
    traj: Option<&'a Path>,
    solve: SolveConfig,
    invariance: InvarianceConfig,
    tol: f64,
    out: Option<&'a Path>,
    residuals_out: Option<&'a Path>,
}

fn variational_trajectory(
    p: &VariationalProblem,
    opts: &VerifyOptions,
    text: &mut String,
) -> Result<Trajectory, CliError> {
    let traj = match opts.traj {
        Some(path) => {
            let cols = table::read_columns(path, p.n, 0)?;
            let grid = table::grid_for(path, &cols.t, p.tau, p.t1, p.t2)?;
            let _ = writeln!(text, "trajectory: {} (h = {})", path.display(), num(grid.h));
            Trajectory::new(grid, cols.q).map_err(|e| CliError::input("invalid", format!("{}: {e}", path.display())))?
        }
        None => {
            let report = solve(p, &opts.solve)?;
            let _ = writeln!(
                text,
                "trajectory: solved (h = {}, converged {}, iterations {}, gradient_norm {})",
                num(opts.solve.h),
                report.converged,
                report.iterations,
                num(report.gradient_norm)
            );
            report.trajectory
        }
    };
    Ok(traj.with_prehistory(p.prehistory.clone()))
}

fn control_trajectory(p: &ControlProblem, opts: &VerifyOptions, text: &mut String) -> Result<Trajectory, CliError> {
    let path = opts.traj.ok_or_else(|| {
        CliError::input("invalid", "control problems need --traj with columns t,q1..qn,u1..um,p1..pn")
    })?;
    let cols = table::read_columns(path, p.n, p.m)?;
    let grid = table::grid_for(path, &cols.t, p.tau, p.t1, p.t2)?;
    let _ = writeln!(text, "trajectory: {} (h = {})", path.display(), num(grid.h));
    if cols.u.is_empty() || cols.p.is_empty() {
        return Err(CliError::input("invalid", format!("{}: control problems need u and p columns", path.display())));
    }
    let start = grid.start();
    let controls = table::complete(path, &cols.u, 0, "control")?;
    let costates = table::complete(path, &cols.p[start..], start, "costate")?;
    let shape = |e| CliError::input("invalid", format!("{}: {e}", path.display()));
    Ok(Trajectory::new(grid, cols.q)
        .and_then(|t| t.with_controls(controls))
        .and_then(|t| t.with_costates(costates))
        .map_err(shape)?
        .with_prehistory(p.prehistory.clone()))
}

fn interval_label(piece: Piece) -> &'static str {
    match piece {
        Piece::Inner => INNER,
        Piece::Outer => OUTER,
        Piece::Whole => WHOLE,
    }
}

/// Summary lines and the pass/fail verdict of the drift check.
fn drift_summary(report: &DriftReport, tol: f64, text: &mut String) -> bool {
    let mut pass = true;
    for d in &report.intervals {
        let ok = d.relative_drift <= tol;
        pass &= ok;
        let range = d.node_range.map_or("none".to_string(), |(a, b)| format!("{a}..={b}"));
        let _ = writeln!(
            text,
            "charge {}: mean {} max_deviation {} relative_drift {} nodes {} [{}]",
            interval_label(d.piece),
            num(d.mean),
            num(d.max_deviation),
            num(d.relative_drift),
            range,
            if ok { "ok" } else { "FAIL" }
        );
    }
    pass
}

fn charge_table(report: &DriftReport) -> Table {
    let mut table = Table::new(&["t", "charge_value", "piece"]);
    for d in &report.intervals {
        for v in &d.values {
            table.row([num(v.t), num(v.value), d.piece.name().to_string()]);
        }
    }
    table
}

/// Named residuals grouped by interval, in print order.
struct Residuals {
    inner: Vec<(String, Expr)>,
    outer: Vec<(String, Expr)>,
}

fn variational_residuals(p: &VariationalProblem) -> Result<Residuals, CliError> {
    let el = euler_lagrange(p)?;
    let dr = dubois_reymond(p)?;
    let named = |el: Vec<Expr>, dr: Vec<Expr>| {
        el.into_iter()
            .enumerate()
            .map(|(i, e)| (format!("euler-lagrange q{}", i + 1), e))
            .chain(dr.into_iter().map(|e| ("dubois-reymond".to_string(), e)))
            .collect()
    };
    Ok(Residuals { inner: named(el.inner, dr.inner), outer: named(el.outer, dr.outer) })
}

fn control_residuals(p: &ControlProblem) -> Result<Residuals, CliError> {
    let system = pontryagin_system(p)?;
    let named = |g: delay_noether::conditions::PontryaginResiduals| {
        let state = g.state.into_iter().enumerate().map(|(i, e)| (format!("state q{}", i + 1), e));
        let costate = g.costate.into_iter().enumerate().map(|(i, e)| (format!("costate p{}", i + 1), e));
        let stationary = g.stationary.into_iter().enumerate().map(|(j, e)| (format!("stationary u{}", j + 1), e));
        state.chain(costate).chain(stationary).collect()
    };
    Ok(Residuals { inner: named(system.inner), outer: named(system.outer) })
}

/// Residual maxima go to the summary; the per-node values to the table.
fn residual_summary(traj: &Trajectory, residuals: &Residuals, text: &mut String) -> Table {
    let system = delay_noether::conditions::TwoIntervalSystem {
        inner: residuals.inner.iter().map(|(_, e)| e.clone()).collect(),
        outer: residuals.outer.iter().map(|(_, e)| e.clone()).collect(),
    };
    let report = residual_check(traj, &system);
    let grid = traj.grid();
    let mut table = Table::new(&["t", "piece", "residual", "value"]);
    for (piece, named, lo, hi) in [
        (Piece::Inner, &residuals.inner, grid.start(), grid.junction()),
        (Piece::Outer, &residuals.outer, grid.junction(), grid.last()),
    ] {
        for (index, (name, e)) in named.iter().enumerate() {
            if let Some(entry) = report.entries.iter().find(|r| r.piece == piece && r.index == index) {
                let at = entry.argmax.map_or("none".to_string(), |j| num(grid.time(j)));
                let _ = writeln!(
                    text,
                    "residual {name} {}: max_abs {} at t = {} over {} nodes",
                    interval_label(piece),
                    num(entry.max_abs),
                    at,
                    entry.evaluated
                );
            }
            for j in lo + 1..hi {
                if let Ok(v) = eval_at(traj, e, j) {
                    table.row([num(grid.time(j)), piece.name().to_string(), name.clone(), num(v)]);
                }
            }
        }
    }
    table
}

fn verify(file: &ProblemFile, opts: &VerifyOptions) -> Result<Outcome, CliError> {
    let mut text = String::new();
    let mut pass = true;
    let (traj, drift, residuals) = match &file.problem {
        Problem::Variational(p) => {
            let traj = variational_trajectory(p, opts, &mut text)?;
            let drift = match &file.generators {
                Some(g) => Some(charge_drift(&traj, Charge::Piecewise(&noether_charge(p, g)?))),
                None => None,
            };
            (traj, drift, variational_residuals(p)?)
        }
        Problem::Control(p) => {
            let traj = control_trajectory(p, opts, &mut text)?;
            let drift = match &file.generators {
                Some(g) => Some(charge_drift(&traj, Charge::Single(&noether_charge_oc(p, g)?))),
                None => None,
            };
            (traj, drift, control_residuals(p)?)
        }
    };
    match (&file.generators, &drift) {
        (Some(g), Some(drift)) => {
            let report = check_invariance(&file.problem, g, &opts.invariance)?;
            let _ = write!(text, "invariance: {report}");
            pass &= drift_summary(drift, opts.tol, &mut text);
            if let Some(path) = opts.out {
                charge_table(drift).save(path)?;
                let _ = writeln!(text, "charge csv: {}", path.display());
            }
        }
        _ => {
            let _ = writeln!(text, "charge: none (no [generators] section)");
        }
    }
    if let Problem::Control(p) = &file.problem {
        let dh = dh_dt_check(&traj, p)?;
        let ok = dh.max_mismatch <= opts.tol;
        pass &= ok;
        let at = dh.argmax.map_or("none".to_string(), |j| num(traj.grid().time(j)));
        let _ = writeln!(
            text,
            "dh-dt {WHOLE}: max_mismatch {} at t = {at} over {} nodes [{}]",
            num(dh.max_mismatch),
            dh.evaluated,
            if ok { "ok" } else { "FAIL" }
        );
    }
    let table = residual_summary(&traj, &residuals, &mut text);
    if let Some(path) = opts.residuals_out {
        table.save(path)?;
        let _ = writeln!(text, "residual csv: {}", path.display());
    }
    let _ = writeln!(text, "result: {}", if pass { "PASS" } else { "FAIL" });
    Ok(Outcome { stdout: text, code: if pass { 0 } else { 1 } })
}
