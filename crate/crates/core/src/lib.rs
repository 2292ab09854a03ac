//! Comparison-function calculus for robust-stability certificates.
//!
//! Everything in this crate is built around scalar *gain functions* of class
//! K-infinity: continuous, strictly increasing, unbounded maps with
//! `f(0) = 0`. Six certificate forms bound trajectories of a system
//! `dx/dt = f(x, w)` through such functions, either by integrating a gain of
//! the state norm or by bounding its truncated L2 norm:
//!
//! ```text
//! integral form:   ∫ α(|x(τ)|) dτ  ≤  combine(β(|x(0)|), input term)
//! L2 form:         ∫ |x(τ)|² dτ    ≤  combine(β(|x(0)|), input term)
//! ```
//!
//! where `combine` is either `max{a, b}` or `a + b` and the input term is
//! absent, `∫ σ(|w|)`, `γ(∫ σ(|w|))`, `γ̄²·∫|w|²`, or `γ(∫|w|²)` depending
//! on the certificate kind.
//!
//! The crate provides:
//!
//! * [`gainfn`]: gain-function expression trees, evaluation with saturation,
//!   numeric inversion, grid-based K-infinity certification, and the
//!   weak-triangle / envelope / Young helper lemmas.
//! * [`transforms`]: coordinate changes built from a scalar gain function
//!   applied per axis, generic (closure-backed) changes, and monotone
//!   envelope bounds `lo(|ζ|) ≤ |T(ζ)| ≤ hi(|ζ|)`.
//! * [`certificates`]: the six certificate kinds, conversions between them,
//!   combine-mode conversions, and pushing a certificate through a
//!   coordinate change.
//! * [`interconnect`]: cascade and feedback composition of certificates under
//!   small-gain and sector conditions, with derivation traces and explicit
//!   failure values.
//! * [`simulate`]: fixed-step RK4 integration of registered models,
//!   trajectory functionals, certificate verification against trajectories,
//!   seeded Monte Carlo batches, and a falsifier for a bilinear system that
//!   admits no linear-gain L2 certificate.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable default features
//! and enable `libm` for builds without the standard library. All numeric
//! routines are deterministic: fixed grids, fixed iteration caps, and seeded
//! generators, so identical inputs produce identical outputs.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("enable either the `std` or the `libm` feature");

extern crate alloc;

pub mod certificates;
pub mod error;
pub mod gainfn;
pub mod interconnect;
mod math;
pub mod simulate;
pub mod transforms;

pub use certificates::{CertKind, Certificate, CombineMode, TransformedCertificate};
pub use error::GainError;
pub use gainfn::{GridSpec, KinfCertReport, MonotoneTable, ScalarGainFn};
pub use interconnect::{Composed, ConditionFailure, Outcome, SectorConstants, SmallGainParams};
pub use simulate::{
    EstimateReport, InputSignal, MonteCarloReport, SamplerSpec, SystemModel, Trajectory,
};
pub use transforms::{CoordinateTransform, RadiusGrid, TransformBounds};
