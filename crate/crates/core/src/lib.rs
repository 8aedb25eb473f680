//! Spectral solvers for linear PDEs on the cube `[-1, 1]^3`.

pub mod bc;
pub mod cheb;
pub mod cp;
pub mod drivers;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod matrix;
pub mod opdisc;
pub mod schur;
pub mod tensolve;
pub mod tensor3;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use tensor3::{BlockId, BlockSplit, CoeffTensor3};
