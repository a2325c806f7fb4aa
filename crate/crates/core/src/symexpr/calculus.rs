use thiserror::Error;

use super::{simplify, Expr, Func, Symbol, SymbolKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivativeError {
    #[error("total time derivative of `{0}` is not supported (controls and costates are checked numerically)")]
    UnsupportedSymbol(Symbol),
    #[error("expression already contains the second derivative `{0}`")]
    AlreadySecondOrder(Symbol),
}

/// `∂e/∂s`, simplified.
pub fn partial(e: &Expr, s: &Symbol) -> Expr {
    simplify(&diff(e, s))
}

fn diff(e: &Expr, s: &Symbol) -> Expr {
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Sym(x) => {
            if x == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(xs) => Expr::Sum(xs.iter().map(|x| diff(x, s)).collect()),
        Expr::Product(xs) => {
            let mut terms = Vec::new();
            for (i, x) in xs.iter().enumerate() {
                let d = diff(x, s);
                if d.is_zero() {
                    continue;
                }
                let mut factors = xs.clone();
                factors[i] = d;
                terms.push(Expr::Product(factors));
            }
            Expr::Sum(terms)
        }
        Expr::Power(b, n) => {
            let d = diff(b, s);
            if d.is_zero() {
                return Expr::zero();
            }
            Expr::product([Expr::int(*n), b.as_ref().clone().pow(n - 1), d])
        }
        Expr::Neg(x) => -diff(x, s),
        Expr::Func(f, a) => {
            let d = diff(a, s);
            if d.is_zero() {
                return Expr::zero();
            }
            let a = a.as_ref().clone();
            let outer = match f {
                Func::Sin => Expr::apply(Func::Cos, a),
                Func::Cos => -Expr::apply(Func::Sin, a),
                Func::Exp => Expr::apply(Func::Exp, a),
                Func::Log => a.pow(-1),
            };
            outer * d
        }
    }
}

/// Evaluate `e` at `t + k·τ`: every symbol offset grows by `k` and the time
/// symbol becomes `t + k·τ`.
pub fn shift(e: &Expr, k: i32) -> Expr {
    if k == 0 {
        return e.clone();
    }
    let moved = e.substitute(&|s: &Symbol| match s.kind() {
        SymbolKind::Time => Some(Expr::t() + Expr::int(k as i64) * Expr::tau()),
        SymbolKind::Delay => None,
        _ => Some(Expr::Sym(s.shifted(k))),
    });
    simplify(&moved)
}

/// `d/dt e` along a trajectory: `q → q̇ → q̈` at every offset, `t → 1`,
/// `τ → 0`.
pub fn total_time_derivative(e: &Expr) -> Result<Expr, DerivativeError> {
    let mut bad = None;
    e.visit_symbols(&mut |s| {
        if bad.is_some() {
            return;
        }
        bad = match s.kind() {
            SymbolKind::StateDDot => Some(DerivativeError::AlreadySecondOrder(*s)),
            SymbolKind::Control | SymbolKind::ControlDot | SymbolKind::Costate | SymbolKind::CostateDot => {
                Some(DerivativeError::UnsupportedSymbol(*s))
            }
            _ => None,
        };
    });
    if let Some(err) = bad {
        return Err(err);
    }
    Ok(chain_derivative(e, |s| match s.kind() {
        SymbolKind::Time => Some(Expr::one()),
        SymbolKind::State => Some(Expr::Sym(s.with_kind(SymbolKind::StateDot))),
        SymbolKind::StateDot => Some(Expr::Sym(s.with_kind(SymbolKind::StateDDot))),
        _ => None,
    }))
}

/// `Σ_s ∂e/∂s · rate(s)` over the symbols of `e`; symbols with no rate are
/// treated as constants.
pub(crate) fn chain_derivative(e: &Expr, rate: impl Fn(&Symbol) -> Option<Expr>) -> Expr {
    let terms = e.symbols().into_iter().filter_map(|s| rate(&s).map(|r| diff(e, &s) * r)).collect::<Vec<_>>();
    simplify(&Expr::Sum(terms))
}
