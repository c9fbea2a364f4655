//! Open quantum harmonic oscillators: commutator-kernel spectra, the quantum
//! Karhunen–Loève basis and quadratic-exponential functionals.
//!
//! The pipeline runs [`model`] → [`kernels`] → [`eigensolver`] → [`qkl`] →
//! [`qef`], with [`mc`] and [`fock`] as independent numerical oracles.

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolver;
pub mod error;
pub mod fixtures;
pub mod fock;
pub mod kernels;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod qef;
pub mod qkl;
pub mod quadrature;

pub use error::{Error, Result};
pub use kernels::{BvpMatrices, KernelContext, MatrixFunctionResult};
pub use linalg::{CMat, CVec, Mat};
pub use model::{
    build_system, recover_ccr, solve_state_ale, transform_system, GaussianStateData, OscillatorSpec,
    SystemMatrices,
};
pub use eigensolver::{build_basis, BasisConfig, EigenPair, Root, ScanConfig, SpectralBasis};
pub use quadrature::PanelGrid;
pub use fock::{build_pair, lhs_exponential, rhs_average, TruncatedPair};
pub use mc::{estimate_qef_mc, McConfig, McEstimate, McOracle, Route};
pub use qef::{compute_qef, QefInputs, QefReport, Xi};
pub use qkl::{build_qkl, tanhc, QklBasis};
