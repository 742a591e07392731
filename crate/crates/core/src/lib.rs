//! Rational Dunkl harmonic analysis for the reflection group `Z_2^d`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod bench;
pub mod bilinear;
pub mod cli;
pub mod config;
pub mod czd;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod littlewood_paley;
pub mod special;
pub mod transform;
pub mod weights;

pub use config::ExperimentConfig;
pub use error::{DunklError, Result};
pub use geometry::{Ball, QuadratureSpec, ReflectionSetup};
pub use grid::{Grid, GridFunction, Side};
pub use num_complex::Complex64;
pub use transform::Transform;
