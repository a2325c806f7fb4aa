//! Problem data: delayed variational and optimal-control problems,
//! prehistories, symmetry generators, trajectories and piecewise charges.

use std::fmt;

use thiserror::Error;

use crate::symexpr::{eval, partial, Binding, Expr, Symbol, SymbolKind};

/// Relative tolerance for grid commensurability and interval endpoints.
pub const GRID_RTOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= GRID_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// A single violated invariant: the offending field and the rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("t = {t} lies outside the prehistory interval [{start}, {end}]")]
    OutsidePrehistory { t: f64, start: f64, end: f64 },
    #[error("prehistory component {component}: {message}")]
    PrehistoryEval { component: usize, message: String },
    #[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// One smooth piece `δ(t) = expr` on `[from, to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrehistoryPiece {
    pub from: f64,
    pub to: f64,
    pub expr: Expr,
}

/// The prescribed state on `[t₁ − τ, t₁]`, piecewise per component.
///
/// At an interior junction the piece starting there is used
/// (right-continuity).
#[derive(Debug, Clone, PartialEq)]
pub struct Prehistory {
    components: Vec<Vec<PrehistoryPiece>>,
}

impl Prehistory {
    pub fn new(components: Vec<Vec<PrehistoryPiece>>) -> Self {
        Prehistory { components }
    }

    /// Each component given by a single expression on `[start, end]`.
    pub fn single(start: f64, end: f64, exprs: Vec<Expr>) -> Self {
        Prehistory {
            components: exprs.into_iter().map(|expr| vec![PrehistoryPiece { from: start, to: end, expr }]).collect(),
        }
    }

    pub fn components(&self) -> &[Vec<PrehistoryPiece>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// `[start, end]` of the first component.
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.components.first()?;
        Some((first.first()?.from, first.last()?.to))
    }

    /// `δ(t)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, ProblemError> {
        self.derivative(t, 0)
    }

    /// `d^order δ / dt^order` at `t`, differentiating the active piece.
    pub fn derivative(&self, t: f64, order: usize) -> Result<Vec<f64>, ProblemError> {
        self.components
            .iter()
            .enumerate()
            .map(|(c, pieces)| {
                let piece = select_piece(pieces, t)?;
                let mut e = piece.expr.clone();
                for _ in 0..order {
                    e = partial(&e, &Symbol::time());
                }
                eval(&e, &Binding::new().with_time(t))
                    .map_err(|err| ProblemError::PrehistoryEval { component: c + 1, message: err.to_string() })
            })
            .collect()
    }

    fn validate(&self, n: usize, start: f64, end: f64, out: &mut Vec<Violation>) {
        if self.components.len() != n {
            out.push(Violation::new("prehistory", format!("expected {n} components, found {}", self.components.len())));
        }
        for (c, pieces) in self.components.iter().enumerate() {
            let field = format!("prehistory.q{}", c + 1);
            let Some(first) = pieces.first() else {
                out.push(Violation::new(field, "no pieces"));
                continue;
            };
            if !close(first.from, start) {
                out.push(Violation::new(&field, format!("must start at t1 - tau = {start}, starts at {}", first.from)));
            }
            let last = pieces.last().unwrap();
            if !close(last.to, end) {
                out.push(Violation::new(&field, format!("must end at t1 = {end}, ends at {}", last.to)));
            }
            for (i, p) in pieces.iter().enumerate() {
                if p.to <= p.from {
                    out.push(Violation::new(
                        &field,
                        format!("piece {} has empty interval [{}, {}]", i + 1, p.from, p.to),
                    ));
                }
                if i > 0 && !close(pieces[i - 1].to, p.from) {
                    out.push(Violation::new(
                        &field,
                        format!("pieces {} and {} do not meet ({} vs {})", i, i + 1, pieces[i - 1].to, p.from),
                    ));
                }
                if p.expr.symbols().iter().any(|s| s.kind() != SymbolKind::Time) {
                    out.push(Violation::new(&field, format!("piece {} may only depend on t", i + 1)));
                }
            }
        }
    }
}

fn select_piece(pieces: &[PrehistoryPiece], t: f64) -> Result<&PrehistoryPiece, ProblemError> {
    let (start, end) = match (pieces.first(), pieces.last()) {
        (Some(a), Some(b)) => (a.from, b.to),
        _ => return Err(ProblemError::OutsidePrehistory { t, start: f64::NAN, end: f64::NAN }),
    };
    if !(t >= start || close(t, start)) || !(t <= end || close(t, end)) {
        return Err(ProblemError::OutsidePrehistory { t, start, end });
    }
    Ok(pieces.iter().rev().find(|p| t >= p.from || close(t, p.from)).unwrap_or(&pieces[0]))
}

/// Minimise `∫_{t₁}^{t₂} L(t, q, q̇, q(t−τ), q̇(t−τ)) dt` with `q = δ` on
/// `[t₁−τ, t₁]` and optionally `q(t₂)` fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalProblem {
    pub n: usize,
    pub lagrangian: Expr,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub prehistory: Prehistory,
    pub terminal: Option<Vec<f64>>,
}

/// Minimise `∫ L(t, q, u, q(t−τ), u(t−τ)) dt` subject to
/// `q̇ = φ(t, q, u, q(t−τ), u(t−τ))` and `q = δ` on `[t₁−τ, t₁]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub n: usize,
    pub m: usize,
    pub cost: Expr,
    pub dynamics: Vec<Expr>,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    pub prehistory: Prehistory,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Variational(VariationalProblem),
    Control(ControlProblem),
}

impl Problem {
    pub fn validate(&self) -> Vec<Violation> {
        match self {
            Problem::Variational(p) => p.validate(),
            Problem::Control(p) => p.validate(),
        }
    }
}

fn validate_horizon(tau: f64, t1: f64, t2: f64, out: &mut Vec<Violation>) {
    if !(tau.is_finite() && t1.is_finite() && t2.is_finite()) {
        out.push(Violation::new("problem", "tau, t1 and t2 must be finite"));
        return;
    }
    if t2 <= t1 {
        out.push(Violation::new("problem.t2", format!("t2 = {t2} must exceed t1 = {t1}")));
    }
    if tau <= 0.0 {
        out.push(Violation::new("problem.tau", format!("tau = {tau} must be positive")));
    } else if tau >= t2 - t1 {
        out.push(Violation::new(
            "problem.tau",
            format!("delay bound violated: tau = {tau} must be smaller than t2 - t1 = {}", t2 - t1),
        ));
    }
}

/// Checks every symbol of `e` against `allowed(kind, offset)` and `dims`.
fn validate_symbols(
    field: &str,
    e: &Expr,
    allowed: impl Fn(SymbolKind, i32) -> Result<(), String>,
    dim_of: impl Fn(SymbolKind) -> usize,
    out: &mut Vec<Violation>,
) {
    for s in e.symbols() {
        if let Err(rule) = allowed(s.kind(), s.offset()) {
            out.push(Violation::new(field, format!("`{s}`: {rule}")));
            continue;
        }
        if !s.kind().is_scalar() && s.index() as usize > dim_of(s.kind()) {
            out.push(Violation::new(field, format!("`{s}`: index exceeds dimension {}", dim_of(s.kind()))));
        }
    }
}

fn delay_offsets(offset: i32) -> Result<(), String> {
    if offset == 0 || offset == -1 {
        Ok(())
    } else {
        Err(format!(
            "offset violation: only current and delayed (t - tau) arguments are allowed, found offset {offset}"
        ))
    }
}

impl VariationalProblem {
    /// Empty iff every invariant of the problem holds.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::new("problem.n", "state dimension must be at least 1"));
        }
        validate_horizon(self.tau, self.t1, self.t2, &mut out);
        validate_symbols(
            "lagrangian",
            &self.lagrangian,
            |kind, offset| match kind {
                SymbolKind::Time | SymbolKind::Delay => Ok(()),
                SymbolKind::State | SymbolKind::StateDot => delay_offsets(offset),
                other => Err(format!("{other:?} symbols are not allowed in a variational Lagrangian")),
            },
            |_| self.n,
            &mut out,
        );
        self.prehistory.validate(self.n, self.t1 - self.tau, self.t1, &mut out);
        if let Some(term) = &self.terminal {
            if term.len() != self.n {
                out.push(Violation::new("terminal", format!("expected {} values, found {}", self.n, term.len())));
            }
            if term.iter().any(|v| !v.is_finite()) {
                out.push(Violation::new("terminal", "values must be finite"));
            }
        }
        out
    }
}

impl ControlProblem {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::new("problem.n", "state dimension must be at least 1"));
        }
        if self.m == 0 {
            out.push(Violation::new("problem.m", "control dimension must be at least 1"));
        }
        validate_horizon(self.tau, self.t1, self.t2, &mut out);
        let allowed = |kind: SymbolKind, offset: i32| match kind {
            SymbolKind::Time | SymbolKind::Delay => Ok(()),
            SymbolKind::State | SymbolKind::Control => delay_offsets(offset),
            other => Err(format!("{other:?} symbols are not allowed in a control problem")),
        };
        let dim = |kind| if kind == SymbolKind::Control { self.m } else { self.n };
        validate_symbols("lagrangian", &self.cost, allowed, dim, &mut out);
        if self.dynamics.len() != self.n {
            out.push(Violation::new(
                "dynamics",
                format!("expected {} right-hand sides, found {}", self.n, self.dynamics.len()),
            ));
        }
        for (i, phi) in self.dynamics.iter().enumerate() {
            validate_symbols(&format!("dynamics.q{}", i + 1), phi, allowed, dim, &mut out);
        }
        self.prehistory.validate(self.n, self.t1 - self.tau, self.t1, &mut out);
        out
    }
}

/// Infinitesimal generators `η`, `ξ` (and `ϱ`, `ς` for control problems) of
/// a one-parameter transformation group.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    pub eta: Expr,
    pub xi: Vec<Expr>,
    pub rho: Option<Vec<Expr>>,
    pub sigma: Option<Vec<Expr>>,
}

impl GeneratorSet {
    /// Time translation: `η ≡ 1`, everything else zero.
    pub fn time_translation(n: usize) -> Self {
        GeneratorSet { eta: Expr::one(), xi: vec![Expr::zero(); n], rho: None, sigma: None }
    }

    /// Scale every generator by `c`.
    pub fn scaled(&self, c: Expr) -> Self {
        let s = |e: &Expr| crate::symexpr::simplify(&(c.clone() * e.clone()));
        GeneratorSet {
            eta: s(&self.eta),
            xi: self.xi.iter().map(s).collect(),
            rho: self.rho.as_ref().map(|v| v.iter().map(s).collect()),
            sigma: self.sigma.as_ref().map(|v| v.iter().map(s).collect()),
        }
    }

    pub fn validate_for(&self, problem: &Problem) -> Vec<Violation> {
        let mut out = Vec::new();
        let (n, m, control) = match problem {
            Problem::Variational(p) => (p.n, 0, false),
            Problem::Control(p) => (p.n, p.m, true),
        };
        let allowed = |kind: SymbolKind, offset: i32| {
            if offset != 0 {
                return Err("generators take undelayed arguments only".to_string());
            }
            match kind {
                SymbolKind::Time | SymbolKind::Delay | SymbolKind::State => Ok(()),
                SymbolKind::Control if control => Ok(()),
                other => Err(format!("{other:?} symbols are not allowed in generators")),
            }
        };
        let dim = |kind| if kind == SymbolKind::Control { m } else { n };
        validate_symbols("generators.eta", &self.eta, allowed, dim, &mut out);
        if self.xi.len() != n {
            out.push(Violation::new("generators.xi", format!("expected {n} components, found {}", self.xi.len())));
        }
        for (i, x) in self.xi.iter().enumerate() {
            validate_symbols(&format!("generators.xi{}", i + 1), x, allowed, dim, &mut out);
        }
        for (name, list, len) in [("rho", &self.rho, m), ("sigma", &self.sigma, n)] {
            let Some(list) = list else { continue };
            if !control {
                out.push(Violation::new(format!("generators.{name}"), "only allowed for control problems"));
                continue;
            }
            if list.len() != len {
                out.push(Violation::new(
                    format!("generators.{name}"),
                    format!("expected {len} components, found {}", list.len()),
                ));
            }
            for (i, x) in list.iter().enumerate() {
                validate_symbols(&format!("generators.{name}{}", i + 1), x, allowed, dim, &mut out);
            }
        }
        out
    }
}

/// A constant of motion valid piecewise: `inner` on `[t₁, t₂−τ]`, `outer`
/// on `[t₂−τ, t₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCharge {
    pub inner: Expr,
    pub outer: Expr,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("delay tau = {tau} is not an integer multiple (>= 2) of the step h = {h}")]
    NotCommensurate { tau: f64, h: f64 },
    #[error("horizon t2 - t1 = {span} is not an integer multiple of the step h = {h}")]
    HorizonNotCommensurate { span: f64, h: f64 },
    #[error("expected {expected} {what}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
}

/// Uniform grid `t₁−τ = s₀ < … < s_N = t₂` with `τ = k·h` and the node
/// values of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub h: f64,
    /// `τ / h`.
    pub k: usize,
    /// Number of steps over `[t₁, t₂]`.
    pub steps: usize,
    pub t1: f64,
    pub tau: f64,
}

impl Grid {
    pub fn new(tau: f64, t1: f64, t2: f64, h: f64) -> Result<Self, TrajectoryError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(TrajectoryError::BadStep(h));
        }
        let ratio = tau / h;
        let k = ratio.round();
        if (ratio - k).abs() > GRID_RTOL * ratio.abs().max(1.0) || k < 2.0 {
            return Err(TrajectoryError::NotCommensurate { tau, h });
        }
        let span = t2 - t1;
        let steps = (span / h).round();
        if (span / h - steps).abs() > GRID_RTOL * (span / h).abs().max(1.0) || steps < 1.0 {
            return Err(TrajectoryError::HorizonNotCommensurate { span, h });
        }
        Ok(Grid { h, k: k as usize, steps: steps as usize, t1, tau })
    }

    /// Index of the last node (`t₂`).
    pub fn last(&self) -> usize {
        self.k + self.steps
    }

    pub fn len(&self) -> usize {
        self.last() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node at `t₁`.
    pub fn start(&self) -> usize {
        self.k
    }

    /// Index of the node at `t₂ − τ`.
    pub fn junction(&self) -> usize {
        self.last() - self.k
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t1 + (j as f64 - self.k as f64) * self.h
    }

    pub fn t2(&self) -> f64 {
        self.time(self.last())
    }
}

/// Node values over a [`Grid`]: states everywhere, controls optionally
/// everywhere, costates optionally on `[t₁, t₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    states: Vec<Vec<f64>>,
    controls: Option<Vec<Vec<f64>>>,
    costates: Option<Vec<Vec<f64>>>,
    prehistory: Option<Prehistory>,
}

impl Trajectory {
    /// `states[j]` holds the state at node `j`.
    pub fn new(grid: Grid, states: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        if states.len() != grid.len() {
            return Err(TrajectoryError::Shape { what: "state rows", expected: grid.len(), found: states.len() });
        }
        let n = states.first().map_or(0, |r| r.len());
        if let Some(bad) = states.iter().find(|r| r.len() != n) {
            return Err(TrajectoryError::Shape { what: "state components", expected: n, found: bad.len() });
        }
        Ok(Trajectory { grid, states, controls: None, costates: None, prehistory: None })
    }

    pub fn with_controls(mut self, controls: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        if controls.len() != self.grid.len() {
            return Err(TrajectoryError::Shape {
                what: "control rows",
                expected: self.grid.len(),
                found: controls.len(),
            });
        }
        self.controls = Some(controls);
        Ok(self)
    }

    /// `costates[i]` is the costate at node `k + i`, i.e. on `[t₁, t₂]`.
    pub fn with_costates(mut self, costates: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        let expected = self.grid.steps + 1;
        if costates.len() != expected {
            return Err(TrajectoryError::Shape { what: "costate rows", expected, found: costates.len() });
        }
        self.costates = Some(costates);
        Ok(self)
    }

    /// Attach the exact prehistory used for derivatives before `t₁`.
    pub fn with_prehistory(mut self, prehistory: Prehistory) -> Self {
        self.prehistory = Some(prehistory);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, |r| r.len())
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn controls(&self) -> Option<&[Vec<f64>]> {
        self.controls.as_deref()
    }

    /// Costate at node `j` (`None` before `t₁` or when absent).
    pub fn costate(&self, j: usize) -> Option<&[f64]> {
        let c = self.costates.as_ref()?;
        j.checked_sub(self.grid.k).and_then(|i| c.get(i)).map(|v| v.as_slice())
    }

    pub fn has_costates(&self) -> bool {
        self.costates.is_some()
    }

    pub fn prehistory(&self) -> Option<&Prehistory> {
        self.prehistory.as_ref()
    }
}
