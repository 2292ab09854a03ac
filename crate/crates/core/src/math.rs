//! Float shims so the crate builds with or without std.
//!
//! With `std`, the inherent `f64` methods are used; without it, `libm`
//! supplies the transcendentals. Both paths follow IEEE-754 and round to
//! nearest, so results agree to the last bit on mainstream targets.

#[cfg(feature = "std")]
pub(crate) fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(feature = "std")]
pub(crate) fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(not(feature = "std"))]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(feature = "std")]
pub(crate) fn ln_1p(x: f64) -> f64 {
    x.ln_1p()
}

#[cfg(not(feature = "std"))]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[cfg(feature = "std")]
pub(crate) fn exp_m1(x: f64) -> f64 {
    x.exp_m1()
}

#[cfg(not(feature = "std"))]
pub(crate) fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[cfg(feature = "std")]
pub(crate) fn powf(x: f64, p: f64) -> f64 {
    x.powf(p)
}

#[cfg(not(feature = "std"))]
pub(crate) fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[cfg(feature = "std")]
pub(crate) fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Euclidean norm of a state or input vector. Scaled by the largest
/// component so the intermediate squares cannot overflow or underflow on
/// representable magnitudes; NaN components propagate.
pub(crate) fn norm(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let mut acc = 0.0;
    for &x in v {
        let t = x / m;
        acc += t * t;
    }
    m * sqrt(acc)
}
