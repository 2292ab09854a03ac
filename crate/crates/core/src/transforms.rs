//! Coordinate changes and monotone envelope bounds on their magnitude.
//!
//! A [`CoordinateTransform`] is a homeomorphism `T: R^p -> R^p` with
//! `T(0) = 0`. Two diagonal families are built from a scalar gain function
//! `alpha` applied per axis:
//!
//! ```text
//! upper family:  T_i(z) = sgn(z_i) * alpha(|z_i| * sqrt(p))
//! lower family:  T_i(z) = sgn(z_i) * alpha(|z_i|) / sqrt(p)
//! ```
//!
//! named for which side of `alpha` they sandwich: with `|.|` the Euclidean
//! norm,
//!
//! ```text
//! |T_lower(z)|  <=  alpha(|z|)  <=  |T_upper(z)| .
//! ```
//!
//! Generic transforms wrap user-supplied forward/backward maps. For any
//! transform, [`CoordinateTransform::numeric_bounds`] produces gain
//! functions `lo`, `hi` with `lo(|z|) <= |T(z)| <= hi(|z|)`: analytic
//! closed forms for the diagonal families,
//!
//! ```text
//! lower family:  lo(r) = alpha(r / sqrt(p)) / sqrt(p),   hi(r) = alpha(r)
//! upper family:  lo(r) = alpha(r),   hi(r) = sqrt(p) * alpha(r * sqrt(p))
//! ```
//!
//! and sphere-sampled monotone envelopes for generic ones (min/max of
//! `|T|` per radius, repaired to monotone by running suffix-min/prefix-max,
//! emitted as [`MonotoneTable`] nodes). Sampled envelopes are trustworthy
//! only at the grid resolution; between radii they interpolate linearly.
//!
//! [`MonotoneTable`]: crate::gainfn::MonotoneTable

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GainError;
use crate::gainfn::{inverse_eval, ScalarGainFn};
use crate::math;

/// Which side of the scalar gain function a diagonal transform bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalRole {
    /// `|T(z)| <= alpha(|z|) <= ...`: per-axis `alpha(|z_i|) / sqrt(p)`.
    Lower,
    /// `... <= alpha(|z|) <= |T(z)|`: per-axis `alpha(|z_i| * sqrt(p))`.
    Upper,
}

type VectorMap = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A zero-fixing homeomorphism of `R^p`.
#[derive(Clone)]
pub enum CoordinateTransform {
    /// Axis-wise application of a scalar gain function.
    Diagonal {
        role: DiagonalRole,
        axis: ScalarGainFn,
        dim: usize,
    },
    /// User-supplied forward/backward maps, referenced by name.
    Generic {
        name: String,
        dim: usize,
        forward: Arc<VectorMap>,
        backward: Arc<VectorMap>,
    },
}

impl fmt::Debug for CoordinateTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordinateTransform::Diagonal { role, axis, dim } => f
                .debug_struct("Diagonal")
                .field("role", role)
                .field("axis", &format!("{axis}"))
                .field("dim", dim)
                .finish(),
            CoordinateTransform::Generic { name, dim, .. } => f
                .debug_struct("Generic")
                .field("name", name)
                .field("dim", dim)
                .finish(),
        }
    }
}

/// Builds the upper diagonal family from a gain function (assumed
/// certified K-infinity by the caller).
///
/// # Errors
///
/// [`GainError::Domain`] if `p < 1`.
pub fn build_upper(alpha: &ScalarGainFn, p: usize) -> Result<CoordinateTransform, GainError> {
    if p < 1 {
        return Err(GainError::Domain(String::from(
            "transform dimension must be at least 1",
        )));
    }
    Ok(CoordinateTransform::Diagonal {
        role: DiagonalRole::Upper,
        axis: alpha.clone(),
        dim: p,
    })
}

/// Builds the lower diagonal family from a gain function (assumed
/// certified K-infinity by the caller).
///
/// # Errors
///
/// [`GainError::Domain`] if `p < 1`.
pub fn build_lower(alpha: &ScalarGainFn, p: usize) -> Result<CoordinateTransform, GainError> {
    if p < 1 {
        return Err(GainError::Domain(String::from(
            "transform dimension must be at least 1",
        )));
    }
    Ok(CoordinateTransform::Diagonal {
        role: DiagonalRole::Lower,
        axis: alpha.clone(),
        dim: p,
    })
}

impl CoordinateTransform {
    /// The identity transform as a named generic map.
    pub fn identity(dim: usize) -> Self {
        let copy: Arc<VectorMap> = Arc::new(|x: &[f64], out: &mut [f64]| {
            out.copy_from_slice(x);
        });
        CoordinateTransform::Generic {
            name: String::from("identity"),
            dim,
            forward: Arc::clone(&copy),
            backward: copy,
        }
    }

    /// The scalar change of variables `T(x) = x * exp(-1 / (2 x^2))`,
    /// `T(0) = 0`: odd, strictly increasing, onto. Its inverse has no
    /// closed form and is computed by bracketed bisection.
    pub fn example2() -> Self {
        Self::scalar_monotone("example2", example2_forward)
    }

    /// Wraps an odd, strictly increasing scalar map `f` (with `f(0) = 0`)
    /// as a one-dimensional transform; the backward map bisects `f`.
    pub fn scalar_monotone(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    ) -> Self {
        let forward: Arc<VectorMap> = Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = f(x[0]);
        });
        let backward: Arc<VectorMap> = Arc::new(move |y: &[f64], out: &mut [f64]| {
            out[0] = scalar_invert_odd(&f, y[0]);
        });
        CoordinateTransform::Generic {
            name: String::from(name),
            dim: 1,
            forward,
            backward,
        }
    }

    /// State-space dimension `p`.
    pub fn dim(&self) -> usize {
        match self {
            CoordinateTransform::Diagonal { dim, .. } => *dim,
            CoordinateTransform::Generic { dim, .. } => *dim,
        }
    }

    /// Registered name for generic transforms, the family tag otherwise.
    pub fn name(&self) -> String {
        match self {
            CoordinateTransform::Diagonal { role, .. } => match role {
                DiagonalRole::Lower => String::from("diagonal_lower"),
                DiagonalRole::Upper => String::from("diagonal_upper"),
            },
            CoordinateTransform::Generic { name, .. } => name.clone(),
        }
    }

    /// Applies the transform.
    ///
    /// # Errors
    ///
    /// [`GainError::Dimension`] on a length mismatch.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, GainError> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; x.len()];
        match self {
            CoordinateTransform::Diagonal { role, axis, dim } => {
                let root_p = math::sqrt(*dim as f64);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = match role {
                        DiagonalRole::Upper => signed(xi, |a| axis.eval_extended(a * root_p)),
                        DiagonalRole::Lower => signed(xi, |a| axis.eval_extended(a) / root_p),
                    };
                }
            }
            CoordinateTransform::Generic { forward, .. } => forward(x, &mut out),
        }
        Ok(out)
    }

    /// Applies the inverse transform.
    ///
    /// # Errors
    ///
    /// [`GainError::Dimension`] on a length mismatch; [`GainError::Range`]
    /// if a diagonal axis value cannot be bracketed.
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>, GainError> {
        self.check_dim(y.len())?;
        let mut out = vec![0.0; y.len()];
        match self {
            CoordinateTransform::Diagonal { role, axis, dim } => {
                let root_p = math::sqrt(*dim as f64);
                for (o, &yi) in out.iter_mut().zip(y) {
                    let mag = yi.abs();
                    let inv = match role {
                        DiagonalRole::Upper => inverse_eval(axis, mag)? / root_p,
                        DiagonalRole::Lower => inverse_eval(axis, mag * root_p)?,
                    };
                    *o = if yi < 0.0 { -inv } else { inv };
                }
            }
            CoordinateTransform::Generic { backward, .. } => backward(y, &mut out),
        }
        Ok(out)
    }

    /// Monotone gain-function envelopes for `|T|`:
    /// `lower(|z|) <= |T(z)| <= upper(|z|)`.
    ///
    /// Diagonal families get exact closed forms; generic transforms are
    /// sampled on `64 * p` quasi-random unit directions per grid radius and
    /// the per-radius min/max are repaired to monotone envelopes.
    ///
    /// # Errors
    ///
    /// [`GainError::Precondition`] if a sampled lower envelope collapses to
    /// zero over the whole grid (the transform is numerically singular at
    /// this resolution).
    pub fn numeric_bounds(&self, radii: &RadiusGrid) -> Result<TransformBounds, GainError> {
        match self {
            CoordinateTransform::Diagonal { role, axis, dim } => {
                let root_p = math::sqrt(*dim as f64);
                let (lower, upper) = match role {
                    DiagonalRole::Lower => (
                        scale_both(1.0 / root_p, axis),
                        axis.clone(),
                    ),
                    DiagonalRole::Upper => (
                        axis.clone(),
                        scale_both(root_p, axis),
                    ),
                };
                Ok(TransformBounds {
                    lower,
                    upper,
                    provenance: BoundsProvenance::Analytic,
                })
            }
            CoordinateTransform::Generic { dim, forward, .. } => {
                sampled_bounds(*dim, forward, radii)
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), GainError> {
        let expected = self.dim();
        if got != expected {
            return Err(GainError::Dimension { expected, got });
        }
        Ok(())
    }
}

/// `k * alpha(k * s)`; `k = 1` collapses to a clone.
fn scale_both(k: f64, alpha: &ScalarGainFn) -> ScalarGainFn {
    if k == 1.0 {
        alpha.clone()
    } else {
        ScalarGainFn::post_scale(k, ScalarGainFn::pre_scale(k, alpha.clone()))
    }
}

fn signed(x: f64, f: impl Fn(f64) -> f64) -> f64 {
    if x >= 0.0 {
        f(x)
    } else {
        -f(-x)
    }
}

fn example2_forward(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x * math::exp(-1.0 / (2.0 * x * x))
}

/// Solves `f(x) = y` for an odd increasing scalar map by bracketed
/// bisection (same caps as gain-function inversion); saturates at the
/// bracket limit instead of failing.
fn scalar_invert_odd(f: &impl Fn(f64) -> f64, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let target = y.abs();
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi >= crate::gainfn::SATURATION_BOUND {
            hi = crate::gainfn::SATURATION_BOUND;
            break;
        }
    }
    let mut iters = 0;
    while iters < crate::gainfn::BISECT_MAX_ITERS
        && hi - lo > crate::gainfn::BISECT_REL_WIDTH * f64::max(1.0, hi)
    {
        let mid = lo + 0.5 * (hi - lo);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let root = lo + 0.5 * (hi - lo);
    if y < 0.0 {
        -root
    } else {
        root
    }
}

/// Log-spaced radius grid for envelope sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for RadiusGrid {
    /// 128 log-spaced radii on `[1e-3, 1e3]`.
    fn default() -> Self {
        RadiusGrid {
            r_min: 1e-3,
            r_max: 1e3,
            points: 128,
        }
    }
}

impl RadiusGrid {
    pub fn new(r_min: f64, r_max: f64, points: usize) -> Result<Self, GainError> {
        if !(r_min > 0.0) || !(r_max > r_min) || points < 2 {
            return Err(GainError::Domain(String::from(
                "radius grid needs 0 < r_min < r_max and at least 2 points",
            )));
        }
        Ok(RadiusGrid {
            r_min,
            r_max,
            points,
        })
    }

    pub fn radii(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let (lo, hi) = (math::ln(self.r_min), math::ln(self.r_max));
        (0..n)
            .map(|i| math::exp(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// How a pair of envelope bounds was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsProvenance {
    /// Closed form for a diagonal family; exact.
    Analytic,
    /// Sphere-sampled; valid at grid resolution.
    Sampled,
}

/// Monotone envelopes `lower(|z|) <= |T(z)| <= upper(|z|)`.
#[derive(Debug, Clone)]
pub struct TransformBounds {
    pub lower: ScalarGainFn,
    pub upper: ScalarGainFn,
    pub provenance: BoundsProvenance,
}

fn sampled_bounds(
    dim: usize,
    forward: &Arc<VectorMap>,
    radii: &RadiusGrid,
) -> Result<TransformBounds, GainError> {
    let rs = radii.radii();
    let dirs = unit_directions(dim, 64 * dim);
    let mut out = vec![0.0; dim];
    let mut point = vec![0.0; dim];
    let mut mins = Vec::with_capacity(rs.len());
    let mut maxs = Vec::with_capacity(rs.len());
    for &r in &rs {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for d in &dirs {
            for (p, &di) in point.iter_mut().zip(d) {
                *p = r * di;
            }
            forward(&point, &mut out);
            let mag = math::norm(&out);
            lo = lo.min(mag);
            hi = hi.max(mag);
        }
        mins.push(lo);
        maxs.push(hi);
    }
    // Repair to monotone: the exact envelopes min_{|z| >= r} |T| and
    // max_{|z| <= r} |T| are nondecreasing by definition.
    for i in (0..mins.len().saturating_sub(1)).rev() {
        mins[i] = f64::min(mins[i], mins[i + 1]);
    }
    for i in 1..maxs.len() {
        maxs[i] = f64::max(maxs[i], maxs[i - 1]);
    }
    let last = *mins.last().expect("grid has at least 2 radii");
    if !(last > 0.0) || maxs.iter().any(|v| !v.is_finite()) {
        return Err(GainError::Precondition(String::from(
            "sampled envelope cannot be repaired: |T| is numerically singular on the grid",
        )));
    }
    Ok(TransformBounds {
        lower: ScalarGainFn::from_monotone_table(rs.clone(), mins)?,
        upper: ScalarGainFn::from_monotone_table(rs, maxs)?,
        provenance: BoundsProvenance::Sampled,
    })
}

/// Deterministic quasi-random unit directions (fixed seed; `{+1, -1}`
/// exactly in one dimension).
pub(crate) fn unit_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1f5);
    let mut dirs = Vec::with_capacity(count);
    while dirs.len() < count {
        let mut d: Vec<f64> = (0..dim).map(|_| normal_sample(&mut rng)).collect();
        let n = math::norm(&d);
        if n > 1e-6 {
            for x in &mut d {
                *x /= n;
            }
            dirs.push(d);
        }
    }
    dirs
}

/// Standard normal via Box-Muller; avoids pulling in a distributions crate.
fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    math::sqrt(-2.0 * math::ln(u1)) * cos_tau(u2)
}

fn cos_tau(u: f64) -> f64 {
    // cos(2*pi*u) through the shims (libm lacks nothing here, but keep one
    // call site).
    #[cfg(feature = "std")]
    {
        (core::f64::consts::TAU * u).cos()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::cos(core::f64::consts::TAU * u)
    }
}
