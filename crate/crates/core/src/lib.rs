//! Ground states of `-eps^2 Delta_H u + u = u^p` on the first Heisenberg
//! group, computed on exhausting gauge balls.

pub mod calculus;
pub mod cc;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod group;
pub mod linalg;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use grid::{build_ball_grid, BallLattice, Domain, Grid3, ScalarField};
pub use group::{
    critical_exponent, dilate, gauge, group_mul, homogeneous_dimension, Generator, GroupPoint,
    Polynomial, TestFunction,
};
pub use scalar::Real;

pub type Point = GroupPoint<f64>;
pub type Field = ScalarField<f64>;
pub type Domain64 = Domain<f64>;
pub type Grid = Grid3<f64>;
