//! Radial 3D nonlinear Schrödinger simulator and phase-space observable engine.
//!
//! Fields are radial and stored in reduced form `u = r·φ` on a uniform grid.
//! The evolution convention throughout is `i∂tφ = −Δφ + 𝒩(|φ|,|x|,t)φ`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod cutoffs_weights;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod identity_lab;
pub mod op_functions;
pub mod operators;
pub mod propagation;
pub mod quad;
pub mod radial_grid;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Scalar type accepted by the generic parts of the crate (weights, cutoffs,
/// vector fields).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

pub type Cutoff = cutoffs_weights::Cutoff<f64>;
pub type Cutoff32 = cutoffs_weights::Cutoff<f32>;
pub type SmoothWeight = cutoffs_weights::SmoothWeight<f64>;
pub type SmoothWeight32 = cutoffs_weights::SmoothWeight<f32>;
pub type VectorFieldKind = cutoffs_weights::VectorFieldKind<f64>;

pub use radial_grid::{Grid, GridSpec, NormKind, RadialField};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
