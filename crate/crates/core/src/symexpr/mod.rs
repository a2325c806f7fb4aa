//! Symbolic expressions over time-shifted trajectory symbols.
//!
//! An [`Expr`] is an immutable tree whose leaves are exact rational (or
//! floating) constants and [`Symbol`]s. A symbol names one slot of a
//! trajectory evaluated at `t + offset·τ`: the state `q_i`, its first and
//! second time derivatives, a control `u_j`, or a costate `p_i`. The time
//! `t` and the delay `τ` are symbols of their own.
//!
//! All rewriting goes through [`simplify`], a fixed rule set producing a
//! canonical expanded form: nested sums and products are flattened, like
//! terms and like bases are collected, positive integer powers of sums are
//! expanded and constants are folded exactly. Two expressions that are equal
//! as polynomials in their atoms simplify to structurally equal trees.

mod calculus;
mod display;
mod eval;
mod number;
mod parse;
mod simplify;

use std::fmt;
use std::ops;

pub(crate) use calculus::chain_derivative;
pub use calculus::{partial, shift, total_time_derivative, DerivativeError};
pub use eval::{eval, Binding, Compiled, EvalError};
pub use number::Number;
pub use parse::{parse, ParseError};
pub use simplify::simplify;

/// The role a [`Symbol`] plays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Time,
    /// The constant delay `τ`.
    Delay,
    State,
    StateDot,
    StateDDot,
    Control,
    /// Time derivative of a control; only used when sampling invariance
    /// integrands of control problems.
    ControlDot,
    Costate,
    /// Time derivative of a costate, introduced by the Hamiltonian system.
    CostateDot,
}

impl SymbolKind {
    fn prefix(self) -> &'static str {
        match self {
            SymbolKind::Time => "t",
            SymbolKind::Delay => "tau",
            SymbolKind::State => "q",
            SymbolKind::StateDot => "dq",
            SymbolKind::StateDDot => "ddq",
            SymbolKind::Control => "u",
            SymbolKind::ControlDot => "du",
            SymbolKind::Costate => "p",
            SymbolKind::CostateDot => "dp",
        }
    }

    /// `true` for the two parameter-like kinds that carry no index or offset.
    pub fn is_scalar(self) -> bool {
        matches!(self, SymbolKind::Time | SymbolKind::Delay)
    }
}

/// A trajectory slot evaluated at `t + offset·τ`.
///
/// `Time` and `Delay` symbols always have index 0 and offset 0; shifting
/// the time symbol is done arithmetically by [`shift`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Symbol {
    kind: SymbolKind,
    index: u32,
    offset: i32,
}

impl Symbol {
    pub const fn time() -> Self {
        Symbol { kind: SymbolKind::Time, index: 0, offset: 0 }
    }

    pub const fn delay() -> Self {
        Symbol { kind: SymbolKind::Delay, index: 0, offset: 0 }
    }

    /// A component symbol with 1-based `index` at offset 0.
    ///
    /// # Panics
    /// If `kind` is `Time`/`Delay` or `index` is zero.
    pub fn component(kind: SymbolKind, index: u32) -> Self {
        assert!(!kind.is_scalar(), "{kind:?} symbols carry no index");
        assert!(index >= 1, "component indices start at 1");
        Symbol { kind, index, offset: 0 }
    }

    pub fn q(i: u32) -> Self {
        Self::component(SymbolKind::State, i)
    }

    pub fn dq(i: u32) -> Self {
        Self::component(SymbolKind::StateDot, i)
    }

    pub fn ddq(i: u32) -> Self {
        Self::component(SymbolKind::StateDDot, i)
    }

    pub fn u(j: u32) -> Self {
        Self::component(SymbolKind::Control, j)
    }

    pub fn du(j: u32) -> Self {
        Self::component(SymbolKind::ControlDot, j)
    }

    pub fn p(i: u32) -> Self {
        Self::component(SymbolKind::Costate, i)
    }

    pub fn dp(i: u32) -> Self {
        Self::component(SymbolKind::CostateDot, i)
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    /// 1-based component index; 0 for `t` and `τ`.
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn offset(&self) -> i32 {
        self.offset
    }

    /// Same slot at `offset + k`. Scalar symbols are returned unchanged.
    pub fn shifted(self, k: i32) -> Self {
        if self.kind.is_scalar() {
            self
        } else {
            Symbol { offset: self.offset + k, ..self }
        }
    }

    /// Same slot evaluated at `t − τ`.
    pub fn delayed(self) -> Self {
        self.shifted(-1)
    }

    /// Same slot evaluated at `t + τ`.
    pub fn advanced(self) -> Self {
        self.shifted(1)
    }

    /// The symbol with its kind replaced, keeping index and offset.
    pub(crate) fn with_kind(self, kind: SymbolKind) -> Self {
        Symbol { kind, ..self }
    }
}

/// Kind, then index, then offset in the order `0, -1, +1, -2, +2, ...`.
impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let rank = |o: i32| (o.unsigned_abs(), o > 0);
        (self.kind, self.index, rank(self.offset)).cmp(&(other.kind, other.index, rank(other.offset)))
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.prefix())?;
        if self.kind.is_scalar() {
            return Ok(());
        }
        write!(f, "{}", self.index)?;
        match self.offset {
            0 => Ok(()),
            -1 => f.write_str("_tau"),
            1 => f.write_str("_adv"),
            k if k < 0 => write!(f, "_tau{}", -k),
            k => write!(f, "_adv{k}"),
        }
    }
}

/// Elementary functions available in expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

/// Immutable symbolic expression.
///
/// Variant order matters: the derived `Ord` is the canonical ordering used
/// by [`simplify`] for the children of sums and products.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(Number),
    Sym(Symbol),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    /// Integer power.
    Power(Box<Expr>, i64),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn int(v: i64) -> Self {
        Expr::Const(Number::from(v))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn float(v: f64) -> Self {
        Expr::Const(Number::Float(v))
    }

    pub fn sym(s: Symbol) -> Self {
        Expr::Sym(s)
    }

    pub fn t() -> Self {
        Expr::Sym(Symbol::time())
    }

    pub fn tau() -> Self {
        Expr::Sym(Symbol::delay())
    }

    pub fn pow(self, n: i64) -> Self {
        Expr::Power(Box::new(self), n)
    }

    pub fn apply(f: Func, arg: Expr) -> Self {
        Expr::Func(f, Box::new(arg))
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Self {
        Expr::Sum(terms.into_iter().collect())
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Self {
        Expr::Product(factors.into_iter().collect())
    }

    /// `true` for the literal constant zero (rational or float).
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn as_const(&self) -> Option<&Number> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Pre-order traversal of all symbols (with repetitions).
    pub fn visit_symbols(&self, f: &mut impl FnMut(&Symbol)) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => f(s),
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().for_each(|x| x.visit_symbols(f)),
            Expr::Power(b, _) | Expr::Neg(b) | Expr::Func(_, b) => b.visit_symbols(f),
        }
    }

    /// Distinct symbols occurring in the expression, sorted.
    pub fn symbols(&self) -> std::collections::BTreeSet<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        self.visit_symbols(&mut |s| {
            out.insert(*s);
        });
        out
    }

    pub fn contains_kind(&self, kind: SymbolKind) -> bool {
        let mut found = false;
        self.visit_symbols(&mut |s| found |= s.kind == kind);
        found
    }

    /// Replace symbols through `f`; `None` keeps the symbol.
    pub fn substitute(&self, f: &impl Fn(&Symbol) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Sym(s) => f(s).unwrap_or_else(|| self.clone()),
            Expr::Sum(xs) => Expr::Sum(xs.iter().map(|x| x.substitute(f)).collect()),
            Expr::Product(xs) => Expr::Product(xs.iter().map(|x| x.substitute(f)).collect()),
            Expr::Power(b, n) => Expr::Power(Box::new(b.substitute(f)), *n),
            Expr::Neg(b) => Expr::Neg(Box::new(b.substitute(f))),
            Expr::Func(g, b) => Expr::Func(*g, Box::new(b.substitute(f))),
        }
    }
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Self {
        Expr::Sym(s)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Sum(vec![self, rhs])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sum(vec![self, Expr::Neg(Box::new(rhs))])
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Product(vec![self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Product(vec![self, rhs.pow(-1)])
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
