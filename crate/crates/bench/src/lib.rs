//! Problems shared by the benchmarks.

use delay_noether::problem::{Problem, VariationalProblem};
use delay_noether::problem_file::parse_problem;

fn variational(text: &str) -> VariationalProblem {
    match parse_problem(text).expect("fixture parses").problem {
        Problem::Variational(p) => p,
        Problem::Control(_) => panic!("fixture is a control problem"),
    }
}

/// `(q̇ + q̇(t−1))²` on `[0, 3]`, prehistory `−t`, `q(3) = 2`.
pub fn example1() -> VariationalProblem {
    variational(include_str!("../../../problems/example1.toml"))
}

/// `q̇²/2 − q²/2` with a delay of one half on `[0, 1]`.
pub fn oscillator() -> VariationalProblem {
    variational(include_str!("../../../problems/oscillator.toml"))
}
