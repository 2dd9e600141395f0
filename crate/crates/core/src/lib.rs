//! Dual texture/noise adaptation for infrared single-image super-resolution.
//!
//! The crate is self-contained: a small reverse-mode autodiff engine
//! ([`tensor`]) trains an RRDB generator and two discriminators ([`models`])
//! under the two-stage schedule in [`pipeline`]. Stage 1 learns the IR
//! LR→HR mapping; stage 2 adapts the generator on visible-light inputs with
//! a Sobel-prior discriminator (texture adaptation) and a negative
//! feature-distance loss against noise patterns (noise adaptation).
//!
//! [`imaging`] holds the raster type, degradations and the Sobel operator,
//! [`metrics`] the PSNR / MSE / SSIM evaluation, [`losses`] every objective.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
