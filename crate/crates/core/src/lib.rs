//! Necessary optimality conditions, Noether constants of motion and
//! numerically computed extremals for variational and optimal-control
//! problems with one constant time delay.

pub mod conditions;
pub mod noether;
pub mod problem;
pub mod problem_file;
pub mod solver;
pub mod symexpr;
pub mod verify;
