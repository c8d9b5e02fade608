//! Multistring solutions of a coupled Liouville-type elliptic system:
//! closed-form profiles, radial corrections, discrete linearized operators,
//! and a damped-Newton planar solver.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod linop;
pub mod ode;
pub mod params;
pub mod poisson;
pub mod profiles;
pub mod quadrature;
pub mod radial;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use params::{Params, PhysicalPreset, Regime};
