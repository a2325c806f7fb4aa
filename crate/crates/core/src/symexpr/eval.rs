use std::collections::BTreeMap;

use thiserror::Error;

use super::{Expr, Func, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(Symbol),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Values for the symbols of an expression, including `t` and `τ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    values: BTreeMap<Symbol, f64>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: Symbol, v: f64) -> Self {
        self.values.insert(s, v);
        self
    }

    pub fn with_time(self, t: f64) -> Self {
        self.with(Symbol::time(), t)
    }

    pub fn set(&mut self, s: Symbol, v: f64) {
        self.values.insert(s, v);
    }

    pub fn get(&self, s: &Symbol) -> Option<f64> {
        self.values.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &f64)> {
        self.values.iter()
    }
}

/// Evaluate `e` under `b`.
pub fn eval(e: &Expr, b: &Binding) -> Result<f64, EvalError> {
    Compiled::new(e).eval_with(|s| b.get(s))
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Add(usize),
    Mul(usize),
    Pow(i32),
    Neg,
    Apply(Func),
}

/// An expression lowered to a postfix program over `f64`, for repeated
/// evaluation.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
    symbols: Vec<Symbol>,
    depth: usize,
}

impl Compiled {
    pub fn new(e: &Expr) -> Self {
        let symbols: Vec<Symbol> = e.symbols().into_iter().collect();
        let mut ops = Vec::new();
        let depth = lower(e, &symbols, &mut ops);
        Compiled { ops, symbols, depth }
    }

    /// Symbols in the order expected by [`Compiled::eval_slots`].
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn eval_with(&self, lookup: impl Fn(&Symbol) -> Option<f64>) -> Result<f64, EvalError> {
        let mut slots = Vec::with_capacity(self.symbols.len());
        for s in &self.symbols {
            slots.push(lookup(s).ok_or(EvalError::Unbound(*s))?);
        }
        self.eval_slots(&slots)
    }

    /// Evaluate with `slots[i]` the value of `self.symbols()[i]`.
    pub fn eval_slots(&self, slots: &[f64]) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Load(i) => stack.push(slots[i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let v = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(v);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let v = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(v);
                }
                Op::Pow(n) => {
                    let b = stack.pop().unwrap();
                    if n < 0 && b == 0.0 {
                        return Err(EvalError::Domain("division by zero".into()));
                    }
                    stack.push(b.powi(n));
                }
                Op::Neg => {
                    let v = stack.pop().unwrap();
                    stack.push(-v);
                }
                Op::Apply(f) => {
                    let a = stack.pop().unwrap();
                    stack.push(match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Exp => a.exp(),
                        Func::Log => {
                            if a <= 0.0 {
                                return Err(EvalError::Domain(format!("log of non-positive value {a}")));
                            }
                            a.ln()
                        }
                    });
                }
            }
        }
        Ok(stack.pop().unwrap_or(0.0))
    }
}

/// Appends postfix code; returns the stack depth needed.
fn lower(e: &Expr, symbols: &[Symbol], ops: &mut Vec<Op>) -> usize {
    match e {
        Expr::Const(c) => {
            ops.push(Op::Const(c.to_f64()));
            1
        }
        Expr::Sym(s) => {
            let i = symbols.binary_search(s).expect("symbol table is complete");
            ops.push(Op::Load(i));
            1
        }
        Expr::Sum(xs) | Expr::Product(xs) => {
            if xs.is_empty() {
                let unit = if matches!(e, Expr::Sum(_)) { 0.0 } else { 1.0 };
                ops.push(Op::Const(unit));
                return 1;
            }
            let mut depth = 0;
            for (i, x) in xs.iter().enumerate() {
                depth = depth.max(i + lower(x, symbols, ops));
            }
            ops.push(if matches!(e, Expr::Sum(_)) { Op::Add(xs.len()) } else { Op::Mul(xs.len()) });
            depth
        }
        Expr::Power(b, n) => {
            let d = lower(b, symbols, ops);
            let n = i32::try_from(*n).unwrap_or(if *n < 0 { i32::MIN } else { i32::MAX });
            ops.push(Op::Pow(n));
            d
        }
        Expr::Neg(x) => {
            let d = lower(x, symbols, ops);
            ops.push(Op::Neg);
            d
        }
        Expr::Func(f, x) => {
            let d = lower(x, symbols, ops);
            ops.push(Op::Apply(*f));
            d
        }
    }
}
