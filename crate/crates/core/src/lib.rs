//! Structurally adaptive kernel density estimation in the plane.
//!
//! The density is assumed to factor as `f(x) = g1(u1) g2(u2)` with `u = Qᵀx`
//! for an unknown rotation `Q` from a finite separated net. The crate provides
//! higher-order polynomial kernels, the net machinery, directional and
//! U-statistic estimators, two data-driven rules selecting the bandwidth and
//! rotation, and a Monte Carlo laboratory for pointwise risks.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod risk;
pub mod rotation;
pub mod selector;

pub use error::{Error, Result};
pub use estimator::{BandwidthGrid, PairIndex, UStatMode};
pub use kernel::Kernel;
pub use model::{Marginal, Model, Sample};
pub use rotation::{Point, Rotation, RotationNet};
pub use selector::{AdaptiveRule, MinimaxOptions, SelectionResult, SplitPlan};
