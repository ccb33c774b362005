//! Numerical laboratory for the optimization separation between weight-shared
//! and fully connected one-layer architectures.
//!
//! Two analytic models (a cosine model and an erf-product model) come with
//! closed-form objectives and gradients, a deterministic projected-GD driver,
//! a teacher–student SGD testbed with tanh features, and a suite of numeric
//! checks that turn the convergence and hardness statements into falsifiable
//! predicates with machine-readable reports.

pub mod cosine;
pub mod error;
pub mod kernel;
pub mod nets;
pub mod optim;
pub mod oracles;
pub mod parity;
pub mod suite;
pub mod vec_ops;

pub use error::{Error, Result};
pub use kernel::mc::{KernelEstimate, VectorEstimate};
pub use kernel::quad::QuadratureRule;
pub use optim::{GdConfig, GdRun, ModelSpec, StepRule, TrajectoryRecord, WeightState};
pub use parity::{AngleState, GradientDecomposition, ParityMode, ParityParams};
pub use suite::CheckReport;
