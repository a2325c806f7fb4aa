#![allow(dead_code)]

use delay_noether::problem::{Prehistory, VariationalProblem};
use delay_noether::symexpr::{parse, Expr, Func, Number, Symbol};
use proptest::prelude::*;
use rand::Rng;

/// Atoms that admit a total time derivative.
fn trajectory_atom() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::t()),
        Just(Expr::Sym(Symbol::q(1))),
        Just(Expr::Sym(Symbol::dq(1))),
        Just(Expr::Sym(Symbol::q(1).delayed())),
        Just(Expr::Sym(Symbol::dq(1).delayed())),
        Just(Expr::Sym(Symbol::q(2))),
        Just(Expr::Sym(Symbol::q(2).advanced())),
        Just(Expr::Sym(Symbol::dq(2).shifted(-2))),
        Just(Expr::tau()),
        (-3i64..=3).prop_map(Expr::int),
        (1i64..=4, 2i64..=5).prop_map(|(a, b)| Expr::Const(Number::rational(a, b))),
    ]
}

/// Expressions built from sums, products, non-negative powers, negation and
/// `sin`/`cos`/`exp`: a class on which `simplify` is canonical.
pub fn smooth_expr() -> impl Strategy<Value = Expr> {
    trajectory_atom().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Product),
            (inner.clone(), 0i64..=3).prop_map(|(b, n)| b.pow(n)),
            inner.clone().prop_map(|e| -e),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp)], inner)
                .prop_map(|(f, e)| Expr::apply(f, e)),
        ]
    })
}

/// Like [`smooth_expr`] but also with negative powers and `log`.
pub fn any_expr() -> impl Strategy<Value = Expr> {
    trajectory_atom().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Product),
            (inner.clone(), -2i64..=3).prop_map(|(b, n)| b.pow(n)),
            inner.clone().prop_map(|e| -e),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Log)], inner)
                .prop_map(|(f, e)| Expr::apply(f, e)),
        ]
    })
}

pub fn small_rational() -> impl Strategy<Value = Expr> {
    (-5i64..=5, 1i64..=4).prop_map(|(a, b)| Expr::Const(Number::rational(a, b)))
}

pub fn shift_amount() -> impl Strategy<Value = i32> {
    -3i32..=3
}

pub fn trajectory_symbol() -> impl Strategy<Value = Symbol> {
    prop_oneof![
        Just(Symbol::q(1)),
        Just(Symbol::dq(1)),
        Just(Symbol::q(1).delayed()),
        Just(Symbol::dq(1).delayed()),
        Just(Symbol::q(2)),
        Just(Symbol::q(2).advanced()),
        Just(Symbol::time()),
    ]
}

/// Source text in the expression grammar.
pub fn expr_text() -> impl Strategy<Value = String> {
    let atom = prop_oneof![
        Just("t".to_string()),
        Just("tau".to_string()),
        Just("q1".to_string()),
        Just("dq1".to_string()),
        Just("q1_tau".to_string()),
        Just("dq1_tau".to_string()),
        Just("u2".to_string()),
        Just("p1".to_string()),
        Just("ddq1_adv".to_string()),
        (0u32..100).prop_map(|n| n.to_string()),
        (0u32..100, 1u32..100).prop_map(|(a, b)| format!("{a}.{b:02}")),
        (1u32..9, 1u32..9).prop_map(|(a, b)| format!("{a}/{b}")),
    ];
    atom.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop_oneof![Just("+"), Just("-"), Just("*"), Just("/")], inner.clone())
                .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("({a})")),
            (inner.clone(), -3i32..=4).prop_map(|(a, n)| format!("({a})^{n}")),
            (prop_oneof![Just("sin"), Just("cos"), Just("exp"), Just("log")], inner)
                .prop_map(|(f, a)| format!("{f}({a})")),
        ]
    })
}

/// Slots of a delayed Lagrangian in `n` components.
pub fn lagrangian_atoms(n: u32) -> Vec<Expr> {
    (1..=n)
        .flat_map(|i| [Symbol::q(i), Symbol::dq(i), Symbol::q(i).delayed(), Symbol::dq(i).delayed()].map(Expr::Sym))
        .collect()
}

/// A random monomial of degree `1..=max_degree` in `atoms`.
pub fn random_monomial(rng: &mut impl Rng, atoms: &[Expr], max_degree: usize) -> Expr {
    let degree = rng.random_range(1..=max_degree);
    Expr::product((0..degree).map(|_| atoms[rng.random_range(0..atoms.len())].clone()))
}

/// A random polynomial with small integer coefficients in the slots of an
/// autonomous delayed Lagrangian.
pub fn random_polynomial(rng: &mut impl Rng, n: u32, max_degree: usize, terms: usize) -> Expr {
    let atoms = lagrangian_atoms(n);
    Expr::sum((0..terms).map(|_| {
        let mut c = rng.random_range(-3i64..=3);
        if c == 0 {
            c = 1;
        }
        Expr::int(c) * random_monomial(rng, &atoms, max_degree)
    }))
}

pub fn example1_text() -> &'static str {
    include_str!("../../../../problems/example1.toml")
}

pub fn variational(l: &str, tau: f64, t1: f64, t2: f64, delta: &str, terminal: Option<f64>) -> VariationalProblem {
    VariationalProblem {
        n: 1,
        lagrangian: parse(l).unwrap(),
        tau,
        t1,
        t2,
        prehistory: Prehistory::single(t1 - tau, t1, vec![parse(delta).unwrap()]),
        terminal: terminal.map(|v| vec![v]),
    }
}
