//! Secure safety filter for linear systems under sparse sensor spoofing.
//!
//! The pipeline runs once per sampling instant:
//!
//! 1. [`ssr`] enumerates every subset of `p - s` trusted sensors, fits an
//!    initial state to the recent input/output window by ∞-norm regression,
//!    discards subsets whose residual exceeds the noise bound and turns each
//!    survivor into an ∞-norm ball around the propagated state.
//! 2. [`filter`] writes one robustified discrete CBF constraint block per
//!    ball and projects the nominal command onto their intersection. An
//!    infeasible projection, or an empty ball set, falls back to a zero
//!    velocity command.
//!
//! [`optim`] holds the in-repo dense LP (simplex) and QP (dual active set)
//! solvers. [`model`], [`plant`], [`attack`] and [`harness`] provide the
//! reduced-order drone model and the three-phase attack scenarios used to
//! exercise the filter in closed loop.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod error;
pub mod filter;
pub mod harness;
pub mod model;
pub mod optim;
pub mod plant;
pub mod selftest;
pub mod ssr;

pub use nalgebra;

pub use error::{Error, Result};
pub use filter::{FilterMode, FilterOutcome, SecureFilter};
pub use model::{DataWindow, LinearSystem, SafetySpec};
pub use ssr::{PlausibleBall, SecureReconstructor, SsrConfig};
