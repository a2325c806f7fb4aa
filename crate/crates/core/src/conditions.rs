//! Necessary conditions for delayed problems, derived symbolically.
//!
//! Every condition is stored as a residual `lhs − rhs` that vanishes along
//! extremals. Conditions on `[t₁, t₂−τ]` pick up the partials with respect
//! to the delayed slots evaluated at `t + τ`; on `[t₂−τ, t₂]` those terms
//! are absent.

use thiserror::Error;

use crate::problem::{ControlProblem, Prehistory, VariationalProblem, Violation};
use crate::symexpr::{partial, shift, simplify, total_time_derivative, DerivativeError, Expr, Symbol, SymbolKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionsError {
    #[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Derivative(#[from] DerivativeError),
}

fn ensure_valid(violations: Vec<Violation>) -> Result<(), ConditionsError> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ConditionsError::Invalid(violations))
    }
}

/// Residuals on the inner interval `[t₁, t₂−τ]` and the outer interval
/// `[t₂−τ, t₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoIntervalSystem {
    pub inner: Vec<Expr>,
    pub outer: Vec<Expr>,
}

/// `∂L/∂s(t) + ∂L/∂s_τ(t+τ)`: the slot partial plus the advanced partial
/// with respect to its delayed counterpart.
pub fn combined_partial(l: &Expr, s: Symbol) -> Expr {
    simplify(&(partial(l, &s) + shift(&partial(l, &s.delayed()), 1)))
}

/// Generalised momentum of component `i` on the inner (`combined = true`)
/// or outer interval.
pub fn momentum(l: &Expr, i: u32, combined: bool) -> Expr {
    if combined {
        combined_partial(l, Symbol::dq(i))
    } else {
        partial(l, &Symbol::dq(i))
    }
}

fn force(l: &Expr, i: u32, combined: bool) -> Expr {
    if combined {
        combined_partial(l, Symbol::q(i))
    } else {
        partial(l, &Symbol::q(i))
    }
}

fn components(n: usize) -> impl Iterator<Item = u32> {
    1..=n as u32
}

/// Delayed Euler–Lagrange equations, one residual per component and interval.
pub fn euler_lagrange(p: &VariationalProblem) -> Result<TwoIntervalSystem, ConditionsError> {
    ensure_valid(p.validate())?;
    let l = &p.lagrangian;
    let residuals = |combined: bool| -> Result<Vec<Expr>, ConditionsError> {
        components(p.n)
            .map(|i| {
                let dm = total_time_derivative(&momentum(l, i, combined))?;
                Ok(simplify(&(dm - force(l, i, combined))))
            })
            .collect()
    };
    Ok(TwoIntervalSystem { inner: residuals(true)?, outer: residuals(false)? })
}

/// `L − Σᵢ q̇ᵢ·(momentum)ᵢ`, the quantity whose time derivative the
/// DuBois–Reymond condition fixes.
pub fn energy_function(p: &VariationalProblem, combined: bool) -> Expr {
    let l = &p.lagrangian;
    let mut terms = vec![l.clone()];
    for i in components(p.n) {
        terms.push(-(Expr::Sym(Symbol::dq(i)) * momentum(l, i, combined)));
    }
    simplify(&Expr::Sum(terms))
}

/// Delayed DuBois–Reymond condition, one residual per interval.
///
/// The classical argument behind the inner residual needs `L ≡ 0` along the
/// prehistory on `[t₁−τ, t₁]`. That is not checked; the residual is
/// returned as stated and is meaningful to evaluate either way.
pub fn dubois_reymond(p: &VariationalProblem) -> Result<TwoIntervalSystem, ConditionsError> {
    ensure_valid(p.validate())?;
    let dt_l = partial(&p.lagrangian, &Symbol::time());
    let residual = |combined: bool| -> Result<Expr, ConditionsError> {
        let de = total_time_derivative(&energy_function(p, combined))?;
        Ok(simplify(&(de - dt_l.clone())))
    };
    Ok(TwoIntervalSystem { inner: vec![residual(true)?], outer: vec![residual(false)?] })
}

/// `H = L + p·φ`.
pub fn hamiltonian(p: &ControlProblem) -> Result<Expr, ConditionsError> {
    ensure_valid(p.validate())?;
    Ok(hamiltonian_unchecked(p))
}

pub(crate) fn hamiltonian_unchecked(p: &ControlProblem) -> Expr {
    let mut terms = vec![p.cost.clone()];
    for (i, phi) in p.dynamics.iter().enumerate() {
        terms.push(Expr::Sym(Symbol::p(i as u32 + 1)) * phi.clone());
    }
    simplify(&Expr::Sum(terms))
}

/// Residual groups of the Hamiltonian system on one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PontryaginResiduals {
    /// `q̇ᵢ − ∂H/∂pᵢ`.
    pub state: Vec<Expr>,
    /// `ṗᵢ + ∂H/∂qᵢ (+ ∂H/∂qᵢ_τ (t+τ))`.
    pub costate: Vec<Expr>,
    /// `∂H/∂uⱼ (+ ∂H/∂uⱼ_τ (t+τ))`.
    pub stationary: Vec<Expr>,
}

impl PontryaginResiduals {
    pub fn all(&self) -> Vec<Expr> {
        self.state.iter().chain(&self.costate).chain(&self.stationary).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PontryaginSystem {
    pub inner: PontryaginResiduals,
    pub outer: PontryaginResiduals,
}

impl PontryaginSystem {
    /// All residuals flattened in state, costate, stationary order.
    pub fn as_two_interval(&self) -> TwoIntervalSystem {
        TwoIntervalSystem { inner: self.inner.all(), outer: self.outer.all() }
    }
}

/// Delayed Hamiltonian system and stationary conditions.
pub fn pontryagin_system(p: &ControlProblem) -> Result<PontryaginSystem, ConditionsError> {
    let h = hamiltonian(p)?;
    let group = |combined: bool| {
        let d = |s: Symbol| if combined { combined_partial(&h, s) } else { partial(&h, &s) };
        PontryaginResiduals {
            state: components(p.n)
                .map(|i| simplify(&(Expr::Sym(Symbol::dq(i)) - partial(&h, &Symbol::p(i)))))
                .collect(),
            costate: components(p.n).map(|i| simplify(&(Expr::Sym(Symbol::dp(i)) + d(Symbol::q(i))))).collect(),
            stationary: (1..=p.m as u32).map(|j| d(Symbol::u(j))).collect(),
        }
    };
    Ok(PontryaginSystem { inner: group(true), outer: group(false) })
}

/// `(H, ∂H/∂t)`; along Pontryagin extremals `dH/dt` must equal `∂H/∂t`.
pub fn dh_dt_residual(p: &ControlProblem) -> Result<(Expr, Expr), ConditionsError> {
    let h = hamiltonian(p)?;
    let dt = partial(&h, &Symbol::time());
    Ok((h, dt))
}

/// Rename `q̇ → u` at every offset.
pub fn velocities_to_controls(e: &Expr) -> Expr {
    e.substitute(&|s: &Symbol| {
        (s.kind() == SymbolKind::StateDot).then(|| Expr::Sym(Symbol::u(s.index()).shifted(s.offset())))
    })
}

/// Rename `u → q̇` at every offset.
pub fn controls_to_velocities(e: &Expr) -> Expr {
    e.substitute(&|s: &Symbol| {
        (s.kind() == SymbolKind::Control).then(|| Expr::Sym(Symbol::dq(s.index()).shifted(s.offset())))
    })
}

/// The control problem with `φ = u` whose extremals are those of `p`.
pub fn control_reduction(p: &VariationalProblem) -> ControlProblem {
    ControlProblem {
        n: p.n,
        m: p.n,
        cost: velocities_to_controls(&p.lagrangian),
        dynamics: components(p.n).map(|i| Expr::Sym(Symbol::u(i))).collect(),
        tau: p.tau,
        t1: p.t1,
        t2: p.t2,
        prehistory: Prehistory::clone(&p.prehistory),
    }
}

/// Costate of the `φ = u` reduction from the stationary condition,
/// `p = −∂L/∂q̇ − ∂L/∂q̇_τ(t+τ)` (inner) or `p = −∂L/∂q̇` (outer),
/// in variational symbols.
pub fn reduction_costate(p: &VariationalProblem, combined: bool) -> Vec<Expr> {
    components(p.n).map(|i| simplify(&-momentum(&p.lagrangian, i, combined))).collect()
}
