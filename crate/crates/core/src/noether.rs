//! Invariance checks and Noether constants of motion.
//!
//! A generator set `(η, ξ[, ϱ, ς])` is a symmetry when the integrand of the
//! infinitesimal invariance condition vanishes identically. The check first
//! simplifies the integrand; if that does not give a literal zero the
//! integrand is sampled at pseudo-random points, every slot treated as an
//! independent variable.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditions::{combined_partial, hamiltonian_unchecked, momentum, ConditionsError};
use crate::problem::{ControlProblem, GeneratorSet, PiecewiseCharge, Problem, VariationalProblem, Violation};
use crate::symexpr::{chain_derivative, partial, simplify, total_time_derivative, Compiled, Expr, Symbol, SymbolKind};

/// Invariance integrands on `[t₁, t₂−τ]` and `[t₂−τ, t₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrands {
    pub inner: Expr,
    pub outer: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceConfig {
    pub samples: usize,
    /// Absolute tolerance on sampled integrand values.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        InvarianceConfig { samples: 200, tolerance: 1e-9, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Invariant,
    NotInvariant,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Invariant => "Invariant",
            Verdict::NotInvariant => "NotInvariant",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalInvariance {
    pub symbolic_zero: bool,
    /// Largest `|integrand|` over evaluated samples; 0 when not sampled.
    pub sampled_max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub inner: IntervalInvariance,
    pub outer: IntervalInvariance,
    /// Sample points at which both integrands evaluated.
    pub samples: usize,
    /// Sample points dropped because of a domain error (e.g. `log` of a
    /// negative number).
    pub skipped: usize,
    pub verdict: Verdict,
}

impl InvarianceReport {
    pub fn is_symbolic(&self) -> bool {
        self.inner.symbolic_zero && self.outer.symbolic_zero
    }
}

impl fmt::Display for InvarianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_symbolic() {
            return writeln!(f, "{} (symbolic)", self.verdict);
        }
        writeln!(f, "{} (sampled)", self.verdict)?;
        for (name, iv) in [("inner", &self.inner), ("outer", &self.outer)] {
            writeln!(
                f,
                "{name}: symbolic_zero={} sampled_max_residual={:.16e}",
                iv.symbolic_zero, iv.sampled_max_residual
            )?;
        }
        writeln!(f, "samples: {} skipped: {}", self.samples, self.skipped)
    }
}

fn ensure_valid(violations: Vec<Violation>) -> Result<(), ConditionsError> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ConditionsError::Invalid(violations))
    }
}

fn validate(problem: &Problem, g: &GeneratorSet) -> Result<(), ConditionsError> {
    let mut v = problem.validate();
    v.extend(g.validate_for(problem));
    ensure_valid(v)
}

/// Integrands of the invariance condition for a variational problem.
pub fn invariance_integrands(p: &VariationalProblem, g: &GeneratorSet) -> Result<Integrands, ConditionsError> {
    validate(&Problem::Variational(p.clone()), g)?;
    let l = &p.lagrangian;
    let d_eta = total_time_derivative(&g.eta)?;
    let d_xi = g.xi.iter().map(total_time_derivative).collect::<Result<Vec<_>, _>>()?;
    let build = |combined: bool| {
        let mut terms = vec![partial(l, &Symbol::time()) * g.eta.clone(), l.clone() * d_eta.clone()];
        for (i, (xi, dxi)) in g.xi.iter().zip(&d_xi).enumerate() {
            let i = i as u32 + 1;
            let force = if combined { combined_partial(l, Symbol::q(i)) } else { partial(l, &Symbol::q(i)) };
            let variation = dxi.clone() - Expr::Sym(Symbol::dq(i)) * d_eta.clone();
            terms.push(force * xi.clone());
            terms.push(momentum(l, i, combined) * variation);
        }
        simplify(&Expr::Sum(terms))
    };
    Ok(Integrands { inner: build(true), outer: build(false) })
}

/// Integrands of the invariance condition for a control problem.
///
/// The functional is `∫ H − p·q̇ dt` with `q̇` an independent slot, so `ς`
/// enters through `∂/∂p = φ − q̇`. Generator derivatives along the
/// trajectory use the slots `dq` and `du`.
pub fn control_invariance_integrands(p: &ControlProblem, g: &GeneratorSet) -> Result<Integrands, ConditionsError> {
    validate(&Problem::Control(p.clone()), g)?;
    let h = hamiltonian_unchecked(p);
    let rate = |s: &Symbol| match s.kind() {
        SymbolKind::Time => Some(Expr::one()),
        SymbolKind::State => Some(Expr::Sym(s.with_kind(SymbolKind::StateDot))),
        SymbolKind::Control => Some(Expr::Sym(s.with_kind(SymbolKind::ControlDot))),
        _ => None,
    };
    let d_eta = chain_derivative(&g.eta, rate);
    let zeros_m = vec![Expr::zero(); p.m];
    let zeros_n = vec![Expr::zero(); p.n];
    let rho = g.rho.as_ref().unwrap_or(&zeros_m);
    let sigma = g.sigma.as_ref().unwrap_or(&zeros_n);
    let dq = |i: u32| Expr::Sym(Symbol::dq(i));
    let pdq = Expr::Sum((1..=p.n as u32).map(|i| Expr::Sym(Symbol::p(i)) * dq(i)).collect());
    let build = |combined: bool| {
        let d = |s: Symbol| if combined { combined_partial(&h, s) } else { partial(&h, &s) };
        let mut terms = vec![partial(&h, &Symbol::time()) * g.eta.clone(), (h.clone() - pdq.clone()) * d_eta.clone()];
        for (i, xi) in g.xi.iter().enumerate() {
            let i = i as u32 + 1;
            let variation = chain_derivative(xi, rate) - dq(i) * d_eta.clone();
            terms.push(d(Symbol::q(i)) * xi.clone());
            terms.push(-(Expr::Sym(Symbol::p(i)) * variation));
        }
        for (j, r) in rho.iter().enumerate() {
            terms.push(d(Symbol::u(j as u32 + 1)) * r.clone());
        }
        for (i, (phi, s)) in p.dynamics.iter().zip(sigma).enumerate() {
            terms.push((phi.clone() - dq(i as u32 + 1)) * s.clone());
        }
        simplify(&Expr::Sum(terms))
    };
    Ok(Integrands { inner: build(true), outer: build(false) })
}

/// Symbolic, then sampled, invariance verdict.
pub fn check_invariance(
    problem: &Problem,
    g: &GeneratorSet,
    cfg: &InvarianceConfig,
) -> Result<InvarianceReport, ConditionsError> {
    let (integrands, tau) = match problem {
        Problem::Variational(p) => (invariance_integrands(p, g)?, p.tau),
        Problem::Control(p) => (control_invariance_integrands(p, g)?, p.tau),
    };
    Ok(sample_integrands(&integrands, tau, cfg))
}

/// Verdict for precomputed integrands; `τ` is bound to `tau`, every other
/// symbol is drawn uniformly from `[−2, 2]`.
pub fn sample_integrands(integrands: &Integrands, tau: f64, cfg: &InvarianceConfig) -> InvarianceReport {
    let zero = |e: &Expr| e.is_zero();
    let mut inner = IntervalInvariance { symbolic_zero: zero(&integrands.inner), sampled_max_residual: 0.0 };
    let mut outer = IntervalInvariance { symbolic_zero: zero(&integrands.outer), sampled_max_residual: 0.0 };
    if inner.symbolic_zero && outer.symbolic_zero {
        return InvarianceReport { inner, outer, samples: 0, skipped: 0, verdict: Verdict::Invariant };
    }

    let mut symbols = integrands.inner.symbols();
    symbols.extend(integrands.outer.symbols());
    symbols.remove(&Symbol::delay());
    let symbols: Vec<Symbol> = symbols.into_iter().collect();
    let compiled = [Compiled::new(&integrands.inner), Compiled::new(&integrands.outer)];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut samples, mut skipped) = (0, 0);
    let mut exceeded = false;
    let mut values = vec![0.0; symbols.len()];
    for _ in 0..cfg.samples {
        for v in values.iter_mut() {
            *v = rng.random_range(-2.0..=2.0);
        }
        let lookup = |s: &Symbol| {
            if *s == Symbol::delay() {
                Some(tau)
            } else {
                symbols.binary_search(s).ok().map(|i| values[i])
            }
        };
        let (Ok(a), Ok(b)) = (compiled[0].eval_with(lookup), compiled[1].eval_with(lookup)) else {
            skipped += 1;
            continue;
        };
        if !a.is_finite() || !b.is_finite() {
            skipped += 1;
            continue;
        }
        samples += 1;
        inner.sampled_max_residual = inner.sampled_max_residual.max(a.abs());
        outer.sampled_max_residual = outer.sampled_max_residual.max(b.abs());
        exceeded |= a.abs() > 10.0 * cfg.tolerance || b.abs() > 10.0 * cfg.tolerance;
    }

    let within = |iv: &IntervalInvariance| iv.symbolic_zero || iv.sampled_max_residual <= cfg.tolerance;
    let verdict = if exceeded {
        Verdict::NotInvariant
    } else if samples > 0 && within(&inner) && within(&outer) {
        Verdict::Invariant
    } else {
        Verdict::Inconclusive
    };
    InvarianceReport { inner, outer, samples, skipped, verdict }
}

/// Lagrangian-form constant of motion, piecewise on the two intervals.
pub fn noether_charge(p: &VariationalProblem, g: &GeneratorSet) -> Result<PiecewiseCharge, ConditionsError> {
    validate(&Problem::Variational(p.clone()), g)?;
    let l = &p.lagrangian;
    let build = |combined: bool| {
        let mut energy = vec![l.clone()];
        let mut terms = Vec::new();
        for (i, xi) in g.xi.iter().enumerate() {
            let i = i as u32 + 1;
            let m = momentum(l, i, combined);
            terms.push(m.clone() * xi.clone());
            energy.push(-(Expr::Sym(Symbol::dq(i)) * m));
        }
        terms.push(Expr::Sum(energy) * g.eta.clone());
        simplify(&Expr::Sum(terms))
    };
    Ok(PiecewiseCharge { inner: build(true), outer: build(false) })
}

/// Hamiltonian-form constant of motion `−p·ξ + H·η`, the same on both
/// intervals.
pub fn noether_charge_oc(p: &ControlProblem, g: &GeneratorSet) -> Result<Expr, ConditionsError> {
    validate(&Problem::Control(p.clone()), g)?;
    let mut terms = vec![hamiltonian_unchecked(p) * g.eta.clone()];
    for (i, xi) in g.xi.iter().enumerate() {
        terms.push(-(Expr::Sym(Symbol::p(i as u32 + 1)) * xi.clone()));
    }
    Ok(simplify(&Expr::Sum(terms)))
}
