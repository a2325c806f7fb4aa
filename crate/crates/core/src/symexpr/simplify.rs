//! Canonical expanded form.
//!
//! Rules, applied bottom-up:
//! - `Neg(x)` becomes `-1·x`;
//! - sums and products are flattened;
//! - products are distributed over sums, `(a+b)^n` with `n > 0` is expanded;
//! - like terms (same monomial) have their coefficients added;
//! - like bases in a product have their exponents added;
//! - constants are folded exactly, `x^0 = 1`, `x^1 = x`, `(x^a)^b = x^(ab)`,
//!   `(xy)^n = x^n y^n`;
//! - `sin 0 = 0`, `cos 0 = 1`, `exp 0 = 1`, `log 1 = 0`.
//!
//! Sum terms and product factors are sorted by the derived `Ord` on
//! [`Expr`]; a product's numeric coefficient, when not 1, is its first child.

use std::collections::BTreeMap;

use super::{Expr, Func, Number};

/// Rewrite `e` into canonical form. Idempotent.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Sym(_) => e.clone(),
        Expr::Neg(x) => mul_all(vec![Expr::int(-1), simplify(x)]),
        Expr::Sum(xs) => add_all(xs.iter().map(simplify).collect()),
        Expr::Product(xs) => mul_all(xs.iter().map(simplify).collect()),
        Expr::Power(b, n) => pow(simplify(b), *n),
        Expr::Func(f, a) => func(*f, simplify(a)),
    }
}

/// Split a canonical term into coefficient and monomial (`None` = constant).
fn split_coeff(term: Expr) -> (Number, Option<Expr>) {
    match term {
        Expr::Const(c) => (c, None),
        Expr::Product(mut fs) if matches!(fs.first(), Some(Expr::Const(_))) => {
            let Expr::Const(c) = fs.remove(0) else { unreachable!() };
            let mono = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product(fs) };
            (c, Some(mono))
        }
        other => (Number::from(1), Some(other)),
    }
}

fn scale(mono: Expr, c: Number) -> Expr {
    if c.is_one() {
        return mono;
    }
    match mono {
        Expr::Product(fs) => {
            let mut out = Vec::with_capacity(fs.len() + 1);
            out.push(Expr::Const(c));
            out.extend(fs);
            Expr::Product(out)
        }
        other => Expr::Product(vec![Expr::Const(c), other]),
    }
}

/// Sum of canonical terms.
fn add_all(terms: Vec<Expr>) -> Expr {
    let mut constant = Number::from(0);
    let mut monos: BTreeMap<Expr, Number> = BTreeMap::new();
    let mut push = |t: Expr, constant: &mut Number| {
        let (c, mono) = split_coeff(t);
        match mono {
            None => *constant = constant.add(&c),
            Some(m) => {
                let entry = monos.entry(m).or_insert_with(|| Number::from(0));
                *entry = entry.add(&c);
            }
        }
    };
    for t in terms {
        match t {
            Expr::Sum(inner) => inner.into_iter().for_each(|x| push(x, &mut constant)),
            other => push(other, &mut constant),
        }
    }
    let mut out: Vec<Expr> = monos.into_iter().filter(|(_, c)| !c.is_zero()).map(|(m, c)| scale(m, c)).collect();
    if !constant.is_zero() {
        out.push(Expr::Const(constant));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(out),
    }
}

/// Product of canonical factors, distributing over any sums.
fn mul_all(factors: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(factors.len());
    for f in factors {
        match f {
            Expr::Product(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let (sums, rest): (Vec<Expr>, Vec<Expr>) = flat.into_iter().partition(|f| matches!(f, Expr::Sum(_)));
    let monomial = mul_monomial(rest);
    if sums.is_empty() || monomial.is_zero() {
        return monomial;
    }
    let mut terms = vec![monomial];
    for s in sums {
        let Expr::Sum(children) = s else { unreachable!() };
        let mut next = Vec::with_capacity(terms.len() * children.len());
        for t in &terms {
            for c in &children {
                next.push(mul_all(vec![t.clone(), c.clone()]));
            }
        }
        terms = next;
    }
    add_all(terms)
}

/// Product of canonical non-sum factors.
fn mul_monomial(factors: Vec<Expr>) -> Expr {
    let mut coeff = Number::from(1);
    let mut bases: BTreeMap<Expr, i64> = BTreeMap::new();
    for f in factors {
        match f {
            Expr::Const(c) => coeff = coeff.mul(&c),
            Expr::Power(b, n) => *bases.entry(*b).or_insert(0) += n,
            other => *bases.entry(other).or_insert(0) += 1,
        }
    }
    if coeff.is_zero() {
        return Expr::Const(coeff);
    }
    let mut out = Vec::with_capacity(bases.len() + 1);
    let mut extra: Vec<Expr> = Vec::new();
    for (b, n) in bases {
        match n {
            0 => {}
            1 => out.push(b),
            _ => match pow(b, n) {
                Expr::Const(c) => coeff = coeff.mul(&c),
                // 0^n with n < 0 stays symbolic
                p @ Expr::Power(..) => out.push(p),
                // exponent collection never produces products or sums from a
                // canonical base, but keep the result correct if it does
                other => extra.push(other),
            },
        }
    }
    if !extra.is_empty() {
        extra.extend(out);
        extra.push(Expr::Const(coeff));
        return mul_all(extra);
    }
    out.sort();
    if coeff.is_zero() {
        return Expr::Const(coeff);
    }
    match (out.len(), coeff.is_one()) {
        (0, _) => Expr::Const(coeff),
        (1, true) => out.pop().unwrap(),
        (_, true) => Expr::Product(out),
        (_, false) => {
            out.insert(0, Expr::Const(coeff));
            Expr::Product(out)
        }
    }
}

/// Integer power of a canonical base.
fn pow(base: Expr, n: i64) -> Expr {
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return base;
    }
    match base {
        Expr::Const(c) => match c.powi(n) {
            Some(v) => Expr::Const(v),
            None => Expr::Power(Box::new(Expr::Const(c)), n),
        },
        Expr::Product(fs) => mul_all(fs.into_iter().map(|f| pow(f, n)).collect()),
        Expr::Power(b, m) => pow(*b, m * n),
        Expr::Sum(terms) if n > 0 => {
            let sum = Expr::Sum(terms);
            mul_all(vec![sum; n as usize])
        }
        other => Expr::Power(Box::new(other), n),
    }
}

fn func(f: Func, arg: Expr) -> Expr {
    if let Expr::Const(c) = &arg {
        match f {
            Func::Sin if c.is_zero() => return Expr::zero(),
            Func::Cos | Func::Exp if c.is_zero() => return Expr::one(),
            Func::Log if c.is_one() => return Expr::zero(),
            _ => {}
        }
    }
    Expr::Func(f, Box::new(arg))
}
