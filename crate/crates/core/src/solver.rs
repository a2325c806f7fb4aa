//! Direct transcription of delayed variational problems.
//!
//! The functional is replaced by the rectangle rule with forward differences
//! on a grid commensurate with the delay,
//!
//! ```text
//! J(q) = h Σ_{i=k}^{N-1} L(s_i, q_i, (q_{i+1}-q_i)/h, q_{i-k}, (q_{i-k+1}-q_{i-k})/h)
//! ```
//!
//! where nodes `0..=k` carry the prehistory. The gradient and Hessian are
//! assembled node by node from symbolic first and second partials of `L`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::{Grid, ProblemError, Trajectory, TrajectoryError, VariationalProblem, Violation};
use crate::symexpr::{partial, Compiled, Expr, Symbol, SymbolKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Grid(#[from] TrajectoryError),
    #[error(transparent)]
    Prehistory(#[from] ProblemError),
    #[error("non-finite Lagrangian value at node {node} (t = {t})")]
    NonFinite { node: usize, t: f64 },
    #[error("cannot evaluate the Lagrangian at node {node} (t = {t}): {message}")]
    Eval { node: usize, t: f64, message: String },
    #[error("expected {expected} free variables, got {found}")]
    Dimension { expected: usize, found: usize },
}

/// A compiled expression reading its arguments from the slot vector
/// `[t, τ, q, v, q_τ, v_τ]`.
#[derive(Debug, Clone)]
struct SlotFn {
    f: Compiled,
    idx: Vec<usize>,
}

impl SlotFn {
    fn new(e: &Expr, n: usize) -> Self {
        let f = Compiled::new(e);
        let idx = f.symbols().iter().map(|s| slot_of(s, n)).collect();
        SlotFn { f, idx }
    }

    fn eval(&self, slots: &[f64], buf: &mut Vec<f64>) -> Result<f64, String> {
        buf.clear();
        buf.extend(self.idx.iter().map(|&i| slots[i]));
        self.f.eval_slots(buf).map_err(|e| e.to_string())
    }
}

/// Position of a Lagrangian argument in the slot vector.
fn slot_of(s: &Symbol, n: usize) -> usize {
    let c = s.index() as usize;
    match (s.kind(), s.offset()) {
        (SymbolKind::Time, _) => 0,
        (SymbolKind::Delay, _) => 1,
        (SymbolKind::State, 0) => 1 + c,
        (SymbolKind::StateDot, 0) => 1 + n + c,
        (SymbolKind::State, -1) => 1 + 2 * n + c,
        (SymbolKind::StateDot, -1) => 1 + 3 * n + c,
        _ => unreachable!("validated Lagrangians only use t, tau, q, dq and their delayed forms"),
    }
}

/// The state symbol of slot `a` in `0..4n` (the slot vector without `t`, `τ`).
fn slot_symbol(a: usize, n: usize) -> Symbol {
    let c = (a % n) as u32 + 1;
    match a / n {
        0 => Symbol::q(c),
        1 => Symbol::dq(c),
        2 => Symbol::q(c).delayed(),
        _ => Symbol::dq(c).delayed(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub h: f64,
    pub gtol: f64,
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { h: 0.01, gtol: 1e-10, max_iter: 100 }
    }
}

/// The discrete objective over the free node values.
#[derive(Debug, Clone)]
pub struct DiscretizedObjective {
    problem: VariationalProblem,
    grid: Grid,
    /// Node values with the fixed nodes filled in; free entries are
    /// overwritten from the variable vector.
    base: Vec<Vec<f64>>,
    /// For every node, its position among the free nodes.
    free_pos: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    lagrangian: SlotFn,
    first: Vec<SlotFn>,
    /// Upper triangle of second partials, nonzero entries only.
    second: Vec<(usize, usize, SlotFn)>,
}

/// Discretize with step `h`.
pub fn discretize(p: &VariationalProblem, h: f64) -> Result<DiscretizedObjective, SolverError> {
    let violations = p.validate();
    if !violations.is_empty() {
        return Err(SolverError::Invalid(violations));
    }
    let grid = Grid::new(p.tau, p.t1, p.t2, h)?;
    let n = p.n;
    let mut base = vec![vec![0.0; n]; grid.len()];
    for (j, row) in base.iter_mut().enumerate().take(grid.start() + 1) {
        *row = p.prehistory.eval(grid.time(j))?;
    }
    if let Some(end) = &p.terminal {
        base[grid.last()] = end.clone();
    }
    let last_free = if p.terminal.is_some() { grid.last() - 1 } else { grid.last() };
    let free_nodes: Vec<usize> = (grid.start() + 1..=last_free).collect();
    let mut free_pos = vec![None; grid.len()];
    for (pos, &j) in free_nodes.iter().enumerate() {
        free_pos[j] = Some(pos);
    }

    let l = &p.lagrangian;
    let first_exprs: Vec<Expr> = (0..4 * n).map(|a| partial(l, &slot_symbol(a, n))).collect();
    let first = first_exprs.iter().map(|e| SlotFn::new(e, n)).collect();
    let mut second = Vec::new();
    for (a, fa) in first_exprs.iter().enumerate() {
        for b in a..4 * n {
            let e = partial(fa, &slot_symbol(b, n));
            if !e.is_zero() {
                second.push((a, b, SlotFn::new(&e, n)));
            }
        }
    }
    Ok(DiscretizedObjective {
        problem: p.clone(),
        grid,
        base,
        free_pos,
        free_nodes,
        lagrangian: SlotFn::new(l, n),
        first,
        second,
    })
}

impl DiscretizedObjective {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &VariationalProblem {
        &self.problem
    }

    /// Indices of the free nodes; variable `pos·n + c` is component `c` at
    /// node `free_nodes()[pos]`.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    /// Number of free variables.
    pub fn dim(&self) -> usize {
        self.free_nodes.len() * self.problem.n
    }

    /// Linear interpolation from `δ(t₁)` to the terminal value, or the
    /// constant `δ(t₁)` without one.
    pub fn initial_guess(&self) -> Vec<f64> {
        let start = &self.base[self.grid.start()];
        let end = self.problem.terminal.as_ref().unwrap_or(start);
        let span = self.grid.steps as f64;
        let mut x = Vec::with_capacity(self.dim());
        for &j in &self.free_nodes {
            let w = (j - self.grid.start()) as f64 / span;
            x.extend(start.iter().zip(end).map(|(a, b)| a + w * (b - a)));
        }
        x
    }

    /// Node values for the variable vector `x`.
    pub fn states(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, SolverError> {
        if x.len() != self.dim() {
            return Err(SolverError::Dimension { expected: self.dim(), found: x.len() });
        }
        let n = self.problem.n;
        let mut q = self.base.clone();
        for (pos, &j) in self.free_nodes.iter().enumerate() {
            q[j].copy_from_slice(&x[pos * n..(pos + 1) * n]);
        }
        Ok(q)
    }

    /// The trajectory for `x`, with the exact prehistory attached.
    pub fn trajectory(&self, x: &[f64]) -> Result<Trajectory, SolverError> {
        Ok(Trajectory::new(self.grid.clone(), self.states(x)?)?.with_prehistory(self.problem.prehistory.clone()))
    }

    /// Integration nodes `k..N`.
    fn nodes(&self) -> std::ops::Range<usize> {
        self.grid.start()..self.grid.last()
    }

    fn fill_slots(&self, q: &[Vec<f64>], i: usize, slots: &mut [f64]) {
        let (n, k, h) = (self.problem.n, self.grid.k, self.grid.h);
        slots[0] = self.grid.time(i);
        slots[1] = self.problem.tau;
        for c in 0..n {
            slots[2 + c] = q[i][c];
            slots[2 + n + c] = (q[i + 1][c] - q[i][c]) / h;
            slots[2 + 2 * n + c] = q[i - k][c];
            slots[2 + 3 * n + c] = (q[i - k + 1][c] - q[i - k][c]) / h;
        }
    }

    /// Nodes and coefficients through which slot `a` of node `i` depends on
    /// the node values.
    fn slot_stencil(&self, i: usize, a: usize) -> [(usize, f64); 2] {
        let (n, k, h) = (self.problem.n, self.grid.k, self.grid.h);
        match a / n {
            0 => [(i, 1.0), (i, 0.0)],
            1 => [(i, -1.0 / h), (i + 1, 1.0 / h)],
            2 => [(i - k, 1.0), (i - k, 0.0)],
            _ => [(i - k, -1.0 / h), (i - k + 1, 1.0 / h)],
        }
    }

    fn checked(&self, f: &SlotFn, slots: &[f64], buf: &mut Vec<f64>, i: usize) -> Result<f64, SolverError> {
        let t = self.grid.time(i);
        let v = f.eval(slots, buf).map_err(|message| SolverError::Eval { node: i, t, message })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SolverError::NonFinite { node: i, t })
        }
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64, SolverError> {
        let q = self.states(x)?;
        let mut slots = vec![0.0; 2 + 4 * self.problem.n];
        let mut buf = Vec::new();
        let mut sum = 0.0;
        for i in self.nodes() {
            self.fill_slots(&q, i, &mut slots);
            sum += self.checked(&self.lagrangian, &slots, &mut buf, i)?;
        }
        Ok(self.grid.h * sum)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        let n = self.problem.n;
        let q = self.states(x)?;
        let mut slots = vec![0.0; 2 + 4 * n];
        let mut buf = Vec::new();
        let mut g = vec![0.0; self.dim()];
        for i in self.nodes() {
            self.fill_slots(&q, i, &mut slots);
            for (a, f) in self.first.iter().enumerate() {
                let d = self.checked(f, &slots, &mut buf, i)?;
                if d == 0.0 {
                    continue;
                }
                for (node, coef) in self.slot_stencil(i, a) {
                    if let Some(pos) = self.free_pos[node] {
                        g[pos * n + a % n] += self.grid.h * coef * d;
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, SolverError> {
        let n = self.problem.n;
        let q = self.states(x)?;
        let mut slots = vec![0.0; 2 + 4 * n];
        let mut buf = Vec::new();
        let mut hess = DMatrix::zeros(self.dim(), self.dim());
        for i in self.nodes() {
            self.fill_slots(&q, i, &mut slots);
            for (a, b, f) in &self.second {
                let d = self.checked(f, &slots, &mut buf, i)?;
                if d == 0.0 {
                    continue;
                }
                for (na, ca) in self.slot_stencil(i, *a) {
                    let Some(pa) = self.free_pos[na] else { continue };
                    for (nb, cb) in self.slot_stencil(i, *b) {
                        let Some(pb) = self.free_pos[nb] else { continue };
                        let v = self.grid.h * ca * cb * d;
                        let (r, c) = (pa * n + a % n, pb * n + b % n);
                        hess[(r, c)] += v;
                        if a != b {
                            hess[(c, r)] += v;
                        }
                    }
                }
            }
        }
        Ok(hess)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub trajectory: Trajectory,
    pub objective: f64,
    pub gradient_norm: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton with a Levenberg shift; steepest descent with Armijo
/// backtracking when no shifted Newton step decreases `J`.
pub fn solve(p: &VariationalProblem, cfg: &SolveConfig) -> Result<SolveReport, SolverError> {
    let obj = discretize(p, cfg.h)?;
    let mut x = obj.initial_guess();
    let mut j = obj.objective(&x)?;
    let mut g = obj.gradient(&x)?;
    let mut iterations = 0;
    while inf_norm(&g) > cfg.gtol && iterations < cfg.max_iter {
        let step = match newton_step(&obj, &x, j, &g)? {
            Some(s) => Some(s),
            None => armijo_step(&obj, &x, j, &g)?,
        };
        let Some((x_new, j_new)) = step else { break };
        x = x_new;
        j = j_new;
        g = obj.gradient(&x)?;
        iterations += 1;
    }
    Ok(SolveReport {
        trajectory: obj.trajectory(&x)?,
        objective: j,
        gradient_norm: inf_norm(&g),
        iterations,
        converged: inf_norm(&g) <= cfg.gtol,
    })
}

type Step = Option<(Vec<f64>, f64)>;

fn newton_step(obj: &DiscretizedObjective, x: &[f64], j: f64, g: &[f64]) -> Result<Step, SolverError> {
    let hess = obj.hessian(x)?;
    let scale = hess.diagonal().iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let rhs = -DVector::from_column_slice(g);
    let mut lambda = 0.0;
    while lambda <= 1e12 * scale {
        let mut shifted = hess.clone();
        for d in 0..shifted.nrows() {
            shifted[(d, d)] += lambda;
        }
        if let Some(chol) = shifted.cholesky() {
            let step = chol.solve(&rhs);
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let j_trial = obj.objective(&trial)?;
            if j_trial <= j {
                return Ok(Some((trial, j_trial)));
            }
        }
        lambda = if lambda == 0.0 { 1e-8 * scale } else { 2.0 * lambda };
    }
    Ok(None)
}

fn armijo_step(obj: &DiscretizedObjective, x: &[f64], j: f64, g: &[f64]) -> Result<Step, SolverError> {
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let mut alpha = 1.0;
    while alpha > 1e-20 {
        let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - alpha * b).collect();
        let j_trial = obj.objective(&trial)?;
        if j_trial <= j - 1e-4 * alpha * g2 {
            return Ok(Some((trial, j_trial)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}
