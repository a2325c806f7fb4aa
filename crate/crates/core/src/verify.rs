//! Numerical checks along a grid trajectory.
//!
//! Derivatives are taken with central differences, independently of the
//! forward differences used by the solver. Nodes before `t₁` use the exact
//! prehistory when the trajectory carries one.
//!
//! Solutions of delayed problems are in general only piecewise smooth, with
//! corners at `t₁ + jτ`. Drift maxima skip the nodes within one step of a
//! corner (and of `t₂ − τ`); those values are still reported.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::conditions::{control_reduction, hamiltonian, reduction_costate, TwoIntervalSystem};
use crate::problem::{ControlProblem, PiecewiseCharge, ProblemError, Trajectory, TrajectoryError, VariationalProblem};
use crate::solver::DiscretizedObjective;
use crate::symexpr::{eval, partial, Binding, EvalError, Expr, Symbol, SymbolKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("`{symbol}` at node {node} needs values outside the grid")]
    OffGrid { symbol: Symbol, node: usize },
    #[error("trajectory carries no {0}")]
    Missing(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Prehistory(#[from] ProblemError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("{0}")]
    Conditions(String),
}

fn node_at(traj: &Trajectory, i: usize, offset: i32, symbol: Symbol) -> Result<usize, VerifyError> {
    let j = i as i64 + offset as i64 * traj.grid().k as i64;
    if j < 0 || j > traj.grid().last() as i64 {
        return Err(VerifyError::OffGrid { symbol, node: i });
    }
    Ok(j as usize)
}

/// `d^order x / dt^order` at node `j` of the series `series`, which is
/// defined on nodes `lo..=last`.
fn differentiate(
    series: impl Fn(usize) -> Option<f64>,
    j: usize,
    order: usize,
    h: f64,
    lo: usize,
    last: usize,
) -> Option<f64> {
    if order == 0 {
        return series(j);
    }
    if j < lo + 1 || j + 1 > last {
        return None;
    }
    let (a, b, c) = (series(j - 1)?, series(j)?, series(j + 1)?);
    Some(if order == 1 { (c - a) / (2.0 * h) } else { (c - 2.0 * b + a) / (h * h) })
}

fn slot_value(traj: &Trajectory, s: Symbol, i: usize) -> Result<f64, VerifyError> {
    let grid = traj.grid();
    let (h, last) = (grid.h, grid.last());
    let c = s.index() as usize - 1;
    let j = node_at(traj, i, s.offset(), s)?;
    let (order, base) = match s.kind() {
        SymbolKind::State => (0, SymbolKind::State),
        SymbolKind::StateDot => (1, SymbolKind::State),
        SymbolKind::StateDDot => (2, SymbolKind::State),
        SymbolKind::Control => (0, SymbolKind::Control),
        SymbolKind::ControlDot => (1, SymbolKind::Control),
        SymbolKind::Costate => (0, SymbolKind::Costate),
        SymbolKind::CostateDot => (1, SymbolKind::Costate),
        SymbolKind::Time | SymbolKind::Delay => unreachable!(),
    };
    let value = match base {
        SymbolKind::State => {
            if let (Some(pre), true) = (traj.prehistory(), j < grid.start()) {
                return Ok(pre.derivative(grid.time(j), order)?[c]);
            }
            differentiate(|m| Some(traj.state(m)[c]), j, order, h, 0, last)
        }
        SymbolKind::Control => {
            let u = traj.controls().ok_or(VerifyError::Missing("controls"))?;
            differentiate(|m| u[m].get(c).copied(), j, order, h, 0, last)
        }
        _ => {
            if !traj.has_costates() {
                return Err(VerifyError::Missing("costates"));
            }
            differentiate(|m| traj.costate(m).and_then(|p| p.get(c).copied()), j, order, h, grid.start(), last)
        }
    };
    value.ok_or(VerifyError::OffGrid { symbol: s, node: i })
}

/// Values for `needs` at node `i`.
pub fn bind(traj: &Trajectory, i: usize, needs: &BTreeSet<Symbol>) -> Result<Binding, VerifyError> {
    let grid = traj.grid();
    let mut b = Binding::new().with_time(grid.time(i)).with(Symbol::delay(), grid.tau);
    for &s in needs {
        if s.kind().is_scalar() {
            continue;
        }
        b.set(s, slot_value(traj, s, i)?);
    }
    Ok(b)
}

/// Evaluate `e` at node `i`.
pub fn eval_at(traj: &Trajectory, e: &Expr, i: usize) -> Result<f64, VerifyError> {
    Ok(eval(e, &bind(traj, i, &e.symbols())?)?)
}

/// Nodes at `t₁ + jτ` and at `t₂ − τ`.
pub fn corner_nodes(traj: &Trajectory) -> BTreeSet<usize> {
    let grid = traj.grid();
    let mut out: BTreeSet<usize> = (grid.start()..=grid.last()).step_by(grid.k).collect();
    out.insert(grid.junction());
    out
}

fn near_corner(corners: &BTreeSet<usize>, j: usize) -> bool {
    corners.range(j.saturating_sub(1)..=j + 1).next().is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Inner,
    Outer,
    /// `[t₁, t₂]`, for charges with one expression on both intervals.
    Whole,
}

impl Piece {
    pub fn name(self) -> &'static str {
        match self {
            Piece::Inner => "inner",
            Piece::Outer => "outer",
            Piece::Whole => "whole",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeValue {
    pub node: usize,
    pub t: f64,
    pub value: f64,
    /// Within one step of a corner; not used for the drift statistics.
    pub near_corner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDrift {
    pub piece: Piece,
    /// Every evaluable node of the interval.
    pub values: Vec<NodeValue>,
    pub mean: f64,
    pub max_deviation: f64,
    /// `max_deviation / max(1, |mean|)`.
    pub relative_drift: f64,
    /// First and last node used for the statistics.
    pub node_range: Option<(usize, usize)>,
}

impl IntervalDrift {
    fn new(piece: Piece, values: Vec<NodeValue>) -> Self {
        let used: Vec<&NodeValue> = values.iter().filter(|v| !v.near_corner).collect();
        if used.is_empty() {
            return IntervalDrift {
                piece,
                values,
                mean: f64::NAN,
                max_deviation: f64::NAN,
                relative_drift: f64::NAN,
                node_range: None,
            };
        }
        let mean = used.iter().map(|v| v.value).sum::<f64>() / used.len() as f64;
        let max_deviation = used.iter().fold(0.0f64, |m, v| m.max((v.value - mean).abs()));
        let node_range = Some((used[0].node, used[used.len() - 1].node));
        IntervalDrift {
            piece,
            values,
            mean,
            max_deviation,
            relative_drift: max_deviation / mean.abs().max(1.0),
            node_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub intervals: Vec<IntervalDrift>,
}

impl DriftReport {
    pub fn piece(&self, piece: Piece) -> Option<&IntervalDrift> {
        self.intervals.iter().find(|d| d.piece == piece)
    }

    /// Largest relative drift over the intervals (NaN if one has no data).
    pub fn max_relative_drift(&self) -> f64 {
        if self.intervals.iter().any(|d| d.relative_drift.is_nan()) {
            return f64::NAN;
        }
        self.intervals.iter().fold(0.0, |m, d| m.max(d.relative_drift))
    }
}

/// A constant of motion to track along a trajectory.
#[derive(Debug, Clone, Copy)]
pub enum Charge<'a> {
    Piecewise(&'a PiecewiseCharge),
    Single(&'a Expr),
}

fn piece_values(traj: &Trajectory, e: &Expr, nodes: std::ops::RangeInclusive<usize>) -> Vec<NodeValue> {
    let corners = corner_nodes(traj);
    let needs = e.symbols();
    nodes
        .filter_map(|j| {
            let b = bind(traj, j, &needs).ok()?;
            let value = eval(e, &b).ok()?;
            Some(NodeValue { node: j, t: traj.grid().time(j), value, near_corner: near_corner(&corners, j) })
        })
        .collect()
}

/// Drift of `charge` on `[t₁, t₂−τ]` and `[t₂−τ, t₂]` (or on `[t₁, t₂]`
/// for a single expression). Nodes that cannot be bound are skipped.
pub fn charge_drift(traj: &Trajectory, charge: Charge<'_>) -> DriftReport {
    let grid = traj.grid();
    let intervals = match charge {
        Charge::Piecewise(c) => vec![
            IntervalDrift::new(Piece::Inner, piece_values(traj, &c.inner, grid.start()..=grid.junction())),
            IntervalDrift::new(Piece::Outer, piece_values(traj, &c.outer, grid.junction()..=grid.last())),
        ],
        Charge::Single(e) => {
            vec![IntervalDrift::new(Piece::Whole, piece_values(traj, e, grid.start()..=grid.last()))]
        }
    };
    DriftReport { intervals }
}

/// Largest `|dC/dt|` per interval, from central differences of the charge
/// values. Stencils touching an interval end are skipped; corners inside
/// the interval are kept.
pub fn charge_rate(traj: &Trajectory, charge: &PiecewiseCharge) -> (f64, f64) {
    let grid = traj.grid();
    let h = grid.h;
    let rate = |e: &Expr, lo: usize, hi: usize| {
        let values = piece_values(traj, e, lo..=hi);
        values
            .windows(3)
            .filter(|w| w[2].node == w[0].node + 2 && w[0].node > lo && w[2].node < hi)
            .fold(0.0f64, |m, w| m.max(((w[2].value - w[0].value) / (2.0 * h)).abs()))
    };
    (rate(&charge.inner, grid.start(), grid.junction()), rate(&charge.outer, grid.junction(), grid.last()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEntry {
    pub piece: Piece,
    /// Position of the expression in its interval's list.
    pub index: usize,
    pub max_abs: f64,
    pub argmax: Option<usize>,
    /// Nodes at which the residual could be evaluated.
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
}

impl ResidualReport {
    pub fn max(&self, piece: Piece) -> f64 {
        self.entries.iter().filter(|e| e.piece == piece).fold(0.0, |m, e| m.max(e.max_abs))
    }
}

fn residual_entry(traj: &Trajectory, e: &Expr, piece: Piece, index: usize, lo: usize, hi: usize) -> ResidualEntry {
    let needs = e.symbols();
    let mut entry = ResidualEntry { piece, index, max_abs: 0.0, argmax: None, evaluated: 0 };
    for j in lo + 1..hi {
        let Ok(b) = bind(traj, j, &needs) else { continue };
        let Ok(v) = eval(e, &b) else { continue };
        entry.evaluated += 1;
        if v.abs() > entry.max_abs || entry.argmax.is_none() {
            entry.max_abs = v.abs();
            entry.argmax = Some(j);
        }
    }
    entry
}

/// Largest `|residual|` per expression over the interior nodes of each
/// interval.
pub fn residual_check(traj: &Trajectory, system: &TwoIntervalSystem) -> ResidualReport {
    let grid = traj.grid();
    let mut entries = Vec::new();
    for (i, e) in system.inner.iter().enumerate() {
        entries.push(residual_entry(traj, e, Piece::Inner, i, grid.start(), grid.junction()));
    }
    for (i, e) in system.outer.iter().enumerate() {
        entries.push(residual_entry(traj, e, Piece::Outer, i, grid.junction(), grid.last()));
    }
    ResidualReport { entries }
}

/// Worst component-wise relative error between the analytic gradient and
/// central differences with step `1e-6·max(1, |xᵢ|)`.
pub fn gradient_check(obj: &DiscretizedObjective, point: &[f64]) -> Result<f64, crate::solver::SolverError> {
    let g = obj.gradient(point)?;
    let mut worst = 0.0f64;
    let mut x = point.to_vec();
    for i in 0..x.len() {
        let e = 1e-6 * x[i].abs().max(1.0);
        let x0 = x[i];
        x[i] = x0 + e;
        let jp = obj.objective(&x)?;
        x[i] = x0 - e;
        let jm = obj.objective(&x)?;
        x[i] = x0;
        let fd = (jp - jm) / (2.0 * e);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhDtReport {
    /// Largest `|dH/dt − ∂H/∂t|` away from corners.
    pub max_mismatch: f64,
    pub argmax: Option<usize>,
    pub evaluated: usize,
    /// Per node `(node, t, dH/dt, ∂H/∂t)`.
    pub values: Vec<(usize, f64, f64, f64)>,
}

/// Compare central differences of `H` along the trajectory with `∂H/∂t`.
pub fn dh_dt_check(traj: &Trajectory, p: &ControlProblem) -> Result<DhDtReport, VerifyError> {
    if traj.controls().is_none() {
        return Err(VerifyError::Missing("controls"));
    }
    if !traj.has_costates() {
        return Err(VerifyError::Missing("costates"));
    }
    let h_expr = hamiltonian(p).map_err(|e| VerifyError::Conditions(e.to_string()))?;
    let dt = partial(&h_expr, &Symbol::time());
    let grid = traj.grid();
    let corners = corner_nodes(traj);
    let h_at = |j: usize| eval_at(traj, &h_expr, j).ok();
    let mut report = DhDtReport { max_mismatch: 0.0, argmax: None, evaluated: 0, values: Vec::new() };
    for j in grid.start() + 1..grid.last() {
        let (Some(a), Some(b), Ok(d)) = (h_at(j - 1), h_at(j + 1), eval_at(traj, &dt, j)) else { continue };
        let dh = (b - a) / (2.0 * grid.h);
        report.values.push((j, grid.time(j), dh, d));
        if near_corner(&corners, j) {
            continue;
        }
        report.evaluated += 1;
        let m = (dh - d).abs();
        if m > report.max_mismatch || report.argmax.is_none() {
            report.max_mismatch = m;
            report.argmax = Some(j);
        }
    }
    Ok(report)
}

/// The control problem with `φ = u` together with the trajectory
/// `(q, u = q̇, p)`, `p` from the stationary condition. The inner costate
/// is used on `[t₁, t₂−τ)`, the outer one on `[t₂−τ, t₂]`.
pub fn reduce_to_control(
    p: &VariationalProblem,
    traj: &Trajectory,
) -> Result<(ControlProblem, Trajectory), VerifyError> {
    let grid = traj.grid();
    let n = traj.n();
    let mut controls = Vec::with_capacity(grid.len());
    for j in 0..=grid.last() {
        let row = (1..=n as u32)
            .map(|c| {
                slot_value(traj, Symbol::dq(c), j).or_else(|_| {
                    // one-sided at the ends of the grid
                    let (a, b) = if j == 0 { (0, 1) } else { (j - 1, j) };
                    Ok::<f64, VerifyError>((traj.state(b)[c as usize - 1] - traj.state(a)[c as usize - 1]) / grid.h)
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        controls.push(row);
    }
    let inner = reduction_costate(p, true);
    let outer = reduction_costate(p, false);
    let mut costates = Vec::with_capacity(grid.steps + 1);
    for j in grid.start()..=grid.last() {
        let exprs = if j < grid.junction() { &inner } else { &outer };
        let row = exprs
            .iter()
            .map(|e| {
                let needs = e.symbols();
                let mut b =
                    bind(traj, j, &needs.iter().filter(|s| s.kind() != SymbolKind::StateDot).copied().collect())?;
                for s in needs.iter().filter(|s| s.kind() == SymbolKind::StateDot) {
                    let k = node_at(traj, j, s.offset(), *s)?;
                    b.set(*s, controls[k][s.index() as usize - 1]);
                }
                Ok::<f64, VerifyError>(eval(e, &b)?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        costates.push(row);
    }
    let mut reduced =
        Trajectory::new(grid.clone(), traj.states().to_vec())?.with_controls(controls)?.with_costates(costates)?;
    if let Some(pre) = traj.prehistory() {
        reduced = reduced.with_prehistory(pre.clone());
    }
    Ok((control_reduction(p), reduced))
}
