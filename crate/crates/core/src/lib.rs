//! Simulation and small-noise drift estimation for the linear parabolic SPDE
//! `du = (θ2 u_yy + θ1 u_y + θ0 u) dt + ε dW` on `(0, 1)` with zero boundary
//! values.
//!
//! [`pipeline::estimate`] runs both estimation stages on one set of
//! observations; [`harness::run_experiment`] wraps simulation, estimation and
//! diagnostics into a Monte-Carlo study.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod asymptotics;
pub mod contrast;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod observations;
pub mod optimize;
pub mod pipeline;
pub mod rng;
pub mod simulator;
pub mod synthesis;
pub mod warnings;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/contrast.md")]
    mod contrast {}
    #[doc = include_str!("../../../book/src/rate-fit.md")]
    mod rate_fit {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
