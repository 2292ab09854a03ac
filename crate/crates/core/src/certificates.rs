//! Robust-stability certificates and conversions between them.
//!
//! A [`Certificate`] packages the comparison functions of one of six
//! trajectory estimates. Writing `c{a, b}` for either `max{a, b}` or
//! `a + b` according to the certificate's [`CombineMode`], the estimates
//! are, for every trajectory `x(.)` with initial state `x0` and (where
//! applicable) input `w(.)`, and for all horizons `t >= 0`:
//!
//! ```text
//! AlphaIntegrable   int_0^t alpha(|x|) ds  <=  beta(|x0|)
//! L2                int_0^t |x|^2 ds       <=  beta(|x0|)
//! Iss               int_0^t alpha(|x|) ds  <=  c{ beta(|x0|), int_0^t sigma(|w|) ds }
//! Iiss              int_0^t alpha(|x|) ds  <=  c{ beta(|x0|), gamma(int_0^t sigma(|w|) ds) }
//! LinearL2          int_0^t |x|^2 ds       <=  c{ beta(|x0|), gain^2 * int_0^t |w|^2 ds }
//! NonlinearL2       int_0^t |x|^2 ds       <=  c{ beta(|x0|), gamma(int_0^t |w|^2 ds) }
//! ```
//!
//! `alpha`, `beta`, `sigma`, `gamma` are class-K-infinity comparison
//! functions; constructors are structural and do not certify them (use
//! [`ScalarGainFn::certify_default`] where that matters).
//!
//! The conversion functions move a certificate between these forms.
//! Conversions that only rewrite comparison functions return a plain
//! [`Certificate`]; conversions that change coordinates return a
//! [`TransformedCertificate`] carrying the state (and input) transform,
//! because the new estimate holds along `z = T(x)` (driven by `v = S(w)`),
//! not along `x` itself. Mode conversions use `max{a,b} <= a + b` (free)
//! and `a + b <= 2 max{a,b}` (doubles every right-hand term).

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::GainError;
use crate::gainfn::{EvalCache, ScalarGainFn};
use crate::transforms::{build_lower, build_upper, CoordinateTransform, RadiusGrid, TransformBounds};

/// How the initial-state and input terms on the right-hand side combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    Max,
    Sum,
}

/// Which of the six estimates a certificate asserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    AlphaIntegrable,
    L2,
    Iss,
    Iiss,
    LinearL2,
    NonlinearL2,
}

impl CertKind {
    /// Whether the estimate has an input term at all.
    pub fn has_input(self) -> bool {
        !matches!(self, CertKind::AlphaIntegrable | CertKind::L2)
    }

    /// Whether the state integrand is `alpha(|x|)` rather than `|x|^2`.
    pub fn has_alpha(self) -> bool {
        matches!(self, CertKind::AlphaIntegrable | CertKind::Iss | CertKind::Iiss)
    }
}

/// One of the six trajectory estimates, with its comparison functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    kind: CertKind,
    mode: CombineMode,
    alpha: Option<ScalarGainFn>,
    beta: ScalarGainFn,
    sigma: Option<ScalarGainFn>,
    gamma: Option<ScalarGainFn>,
    gain_sq: Option<f64>,
}

impl Certificate {
    pub fn alpha_integrable(alpha: ScalarGainFn, beta: ScalarGainFn) -> Self {
        Certificate {
            kind: CertKind::AlphaIntegrable,
            mode: CombineMode::Max,
            alpha: Some(alpha),
            beta,
            sigma: None,
            gamma: None,
            gain_sq: None,
        }
    }

    pub fn l2(beta: ScalarGainFn) -> Self {
        Certificate {
            kind: CertKind::L2,
            mode: CombineMode::Max,
            alpha: None,
            beta,
            sigma: None,
            gamma: None,
            gain_sq: None,
        }
    }

    pub fn iss(
        mode: CombineMode,
        alpha: ScalarGainFn,
        beta: ScalarGainFn,
        sigma: ScalarGainFn,
    ) -> Self {
        Certificate {
            kind: CertKind::Iss,
            mode,
            alpha: Some(alpha),
            beta,
            sigma: Some(sigma),
            gamma: None,
            gain_sq: None,
        }
    }

    pub fn iiss(
        mode: CombineMode,
        alpha: ScalarGainFn,
        beta: ScalarGainFn,
        sigma: ScalarGainFn,
        gamma: ScalarGainFn,
    ) -> Self {
        Certificate {
            kind: CertKind::Iiss,
            mode,
            alpha: Some(alpha),
            beta,
            sigma: Some(sigma),
            gamma: Some(gamma),
            gain_sq: None,
        }
    }

    /// `gain_sq` is the squared linear gain and must be finite and `>= 0`.
    pub fn linear_l2(mode: CombineMode, beta: ScalarGainFn, gain_sq: f64) -> Result<Self, GainError> {
        if !gain_sq.is_finite() || gain_sq < 0.0 {
            return Err(GainError::Domain(String::from(
                "squared linear gain must be finite and nonnegative",
            )));
        }
        Ok(Certificate {
            kind: CertKind::LinearL2,
            mode,
            alpha: None,
            beta,
            sigma: None,
            gamma: None,
            gain_sq: Some(gain_sq),
        })
    }

    pub fn nonlinear_l2(mode: CombineMode, beta: ScalarGainFn, gamma: ScalarGainFn) -> Self {
        Certificate {
            kind: CertKind::NonlinearL2,
            mode,
            alpha: None,
            beta,
            sigma: None,
            gamma: Some(gamma),
            gain_sq: None,
        }
    }

    pub fn kind(&self) -> CertKind {
        self.kind
    }

    pub fn mode(&self) -> CombineMode {
        self.mode
    }

    pub fn alpha(&self) -> Option<&ScalarGainFn> {
        self.alpha.as_ref()
    }

    pub fn beta(&self) -> &ScalarGainFn {
        &self.beta
    }

    pub fn sigma(&self) -> Option<&ScalarGainFn> {
        self.sigma.as_ref()
    }

    pub fn gamma(&self) -> Option<&ScalarGainFn> {
        self.gamma.as_ref()
    }

    pub fn gain_sq(&self) -> Option<f64> {
        self.gain_sq
    }

    /// The state integrand at `|x(s)| = x_norm`: `alpha(|x|)` or `|x|^2`.
    pub fn state_integrand(&self, x_norm: f64) -> f64 {
        self.state_integrand_cached(x_norm, &mut EvalCache::new())
    }

    /// [`Self::state_integrand`] with a warm-start cache for sweeps.
    pub fn state_integrand_cached(&self, x_norm: f64, cache: &mut EvalCache) -> f64 {
        match &self.alpha {
            Some(a) => a.eval_cached(x_norm, cache),
            None => x_norm * x_norm,
        }
    }

    /// The input integrand at `|w(s)| = w_norm`: `sigma(|w|)` or `|w|^2`;
    /// zero for kinds without an input term.
    pub fn input_integrand(&self, w_norm: f64) -> f64 {
        self.input_integrand_cached(w_norm, &mut EvalCache::new())
    }

    /// [`Self::input_integrand`] with a warm-start cache for sweeps.
    pub fn input_integrand_cached(&self, w_norm: f64, cache: &mut EvalCache) -> f64 {
        match self.kind {
            CertKind::AlphaIntegrable | CertKind::L2 => 0.0,
            CertKind::Iss | CertKind::Iiss => self
                .sigma
                .as_ref()
                .expect("input kinds carry sigma")
                .eval_cached(w_norm, cache),
            CertKind::LinearL2 | CertKind::NonlinearL2 => w_norm * w_norm,
        }
    }

    /// Maps the accumulated input integral to the input term of the bound:
    /// identity for [`CertKind::Iss`], `gamma` for [`CertKind::Iiss`] and
    /// [`CertKind::NonlinearL2`], `gain_sq * .` for [`CertKind::LinearL2`].
    pub fn input_term(&self, input_integral: f64) -> f64 {
        self.input_term_cached(input_integral, &mut EvalCache::new())
    }

    /// [`Self::input_term`] with a warm-start cache; along a nondecreasing
    /// integral sequence, inverse nodes reuse their previous brackets.
    pub fn input_term_cached(&self, input_integral: f64, cache: &mut EvalCache) -> f64 {
        match self.kind {
            CertKind::AlphaIntegrable | CertKind::L2 => 0.0,
            CertKind::Iss => input_integral,
            CertKind::Iiss | CertKind::NonlinearL2 => self
                .gamma
                .as_ref()
                .expect("kind carries gamma")
                .eval_cached(input_integral, cache),
            CertKind::LinearL2 => self.gain_sq.expect("kind carries gain_sq") * input_integral,
        }
    }

    /// The full right-hand bound for initial norm `x0_norm` and accumulated
    /// input integral `input_integral` (ignored for no-input kinds).
    pub fn bound(&self, x0_norm: f64, input_integral: f64) -> f64 {
        let b = self.beta.eval_extended(x0_norm);
        if !self.kind.has_input() {
            return b;
        }
        let i = self.input_term(input_integral);
        match self.mode {
            CombineMode::Max => f64::max(b, i),
            CombineMode::Sum => b + i,
        }
    }

    /// All comparison functions the certificate carries, for bulk checks.
    pub fn gain_functions(&self) -> Vec<(&'static str, &ScalarGainFn)> {
        let mut out = Vec::new();
        if let Some(a) = &self.alpha {
            out.push(("alpha", a));
        }
        out.push(("beta", &self.beta));
        if let Some(s) = &self.sigma {
            out.push(("sigma", s));
        }
        if let Some(g) = &self.gamma {
            out.push(("gamma", g));
        }
        out
    }
}

/// A certificate that holds in transformed coordinates `z = T(x)`
/// (and `v = S(w)` when an input transform is present), together with the
/// transforms and the envelope bounds used to build it.
#[derive(Debug, Clone)]
pub struct TransformedCertificate {
    pub certificate: Certificate,
    pub state_transform: CoordinateTransform,
    pub input_transform: Option<CoordinateTransform>,
    pub state_bounds: TransformBounds,
    pub input_bounds: Option<TransformBounds>,
}

fn sqrt_of(alpha: &ScalarGainFn) -> ScalarGainFn {
    ScalarGainFn::compose(ScalarGainFn::power(0.5), alpha.clone())
}

/// `outer(inner^{-1}(.))` as an expression tree.
fn after_inverse(outer: &ScalarGainFn, inner: &ScalarGainFn) -> ScalarGainFn {
    ScalarGainFn::compose(outer.clone(), ScalarGainFn::numeric_inverse(inner.clone()))
}

fn require(cert: &Certificate, kind: CertKind, op: &str) -> Result<(), GainError> {
    if cert.kind() != kind {
        return Err(GainError::Incompatible(alloc::format!(
            "{op} needs a {kind:?} certificate, got {:?}",
            cert.kind()
        )));
    }
    Ok(())
}

/// `int |x|^2 = int alpha(|x|)` with `alpha(s) = s^2`; same coordinates.
pub fn l2_to_alpha_integrable(cert: &Certificate) -> Result<Certificate, GainError> {
    require(cert, CertKind::L2, "l2_to_alpha_integrable")?;
    Ok(Certificate::alpha_integrable(
        ScalarGainFn::power(2.0),
        cert.beta().clone(),
    ))
}

/// Re-expresses an alpha-integrability estimate as an L2 estimate for the
/// transformed state `z = T(x)`, `T = build_lower(alpha^(1/2), n)`:
/// `|T(x)|^2 <= alpha(|x|)` pointwise, and `|x0| <= lo_T^{-1}(|z0|)` turns
/// `beta` into `beta(lo_T^{-1}(.))`.
pub fn alpha_integrable_to_l2(
    cert: &Certificate,
    state_dim: usize,
) -> Result<TransformedCertificate, GainError> {
    require(cert, CertKind::AlphaIntegrable, "alpha_integrable_to_l2")?;
    let alpha = cert.alpha().expect("kind carries alpha");
    let t = build_lower(&sqrt_of(alpha), state_dim)?;
    let bounds = t.numeric_bounds(&RadiusGrid::default())?;
    let beta = after_inverse(cert.beta(), &bounds.lower);
    Ok(TransformedCertificate {
        certificate: Certificate::l2(beta),
        state_transform: t,
        input_transform: None,
        state_bounds: bounds,
        input_bounds: None,
    })
}

/// `gain^2 * int |w|^2 = int sigma(|w|)` with `sigma(s) = gain^2 s^2`;
/// same coordinates, same combine mode.
pub fn linear_l2_to_iss(cert: &Certificate) -> Result<Certificate, GainError> {
    require(cert, CertKind::LinearL2, "linear_l2_to_iss")?;
    let gain_sq = cert.gain_sq().expect("kind carries gain_sq");
    if gain_sq == 0.0 {
        return Err(GainError::Precondition(String::from(
            "zero linear gain has no class-K-infinity sigma; drop the input term instead",
        )));
    }
    Ok(Certificate::iss(
        cert.mode(),
        ScalarGainFn::power(2.0),
        cert.beta().clone(),
        ScalarGainFn::post_scale(gain_sq, ScalarGainFn::power(2.0)),
    ))
}

/// Re-expresses an Iss estimate as a linear-gain L2 estimate with the
/// chosen `gain > 0`, for `z = T(x)` and `v = S(w)` with
/// `T = build_lower(alpha^(1/2), n)` and
/// `S = build_upper(sigma^(1/2) / gain, m)`: then `|T(x)|^2 <= alpha(|x|)`
/// and `sigma(|w|) <= gain^2 |S(w)|^2`.
pub fn iss_to_linear_l2(
    cert: &Certificate,
    gain: f64,
    state_dim: usize,
    input_dim: usize,
) -> Result<TransformedCertificate, GainError> {
    require(cert, CertKind::Iss, "iss_to_linear_l2")?;
    if !gain.is_finite() || gain <= 0.0 {
        return Err(GainError::Domain(String::from(
            "target linear gain must be finite and positive",
        )));
    }
    let alpha = cert.alpha().expect("kind carries alpha");
    let sigma = cert.sigma().expect("kind carries sigma");
    let t = build_lower(&sqrt_of(alpha), state_dim)?;
    let t_bounds = t.numeric_bounds(&RadiusGrid::default())?;
    let s_axis = ScalarGainFn::post_scale(1.0 / gain, sqrt_of(sigma));
    let s = build_upper(&s_axis, input_dim)?;
    let s_bounds = s.numeric_bounds(&RadiusGrid::default())?;
    let beta = after_inverse(cert.beta(), &t_bounds.lower);
    Ok(TransformedCertificate {
        certificate: Certificate::linear_l2(cert.mode(), beta, gain * gain)?,
        state_transform: t,
        input_transform: Some(s),
        state_bounds: t_bounds,
        input_bounds: Some(s_bounds),
    })
}

/// `gamma(int |w|^2) = gamma(int sigma(|w|))` with `sigma(s) = s^2`;
/// same coordinates, same combine mode.
pub fn nonlinear_l2_to_iiss(cert: &Certificate) -> Result<Certificate, GainError> {
    require(cert, CertKind::NonlinearL2, "nonlinear_l2_to_iiss")?;
    Ok(Certificate::iiss(
        cert.mode(),
        ScalarGainFn::power(2.0),
        cert.beta().clone(),
        ScalarGainFn::power(2.0),
        cert.gamma().expect("kind carries gamma").clone(),
    ))
}

/// Re-expresses an Iiss estimate as a nonlinear-gain L2 estimate for
/// `z = T(x)`, `v = S(w)` with `T = build_lower(alpha^(1/2), n)` and
/// `S = build_upper(lambda^(-1/2) sigma^(1/2), m)`: then
/// `int sigma(|w|) <= lambda * |S(w)|^2_L2`, so the gain becomes
/// `gamma(lambda * .)`. `lambda > 0` trades input-transform growth against
/// gain growth.
pub fn iiss_to_nonlinear_l2(
    cert: &Certificate,
    lambda: f64,
    state_dim: usize,
    input_dim: usize,
) -> Result<TransformedCertificate, GainError> {
    require(cert, CertKind::Iiss, "iiss_to_nonlinear_l2")?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(GainError::Domain(String::from(
            "lambda must be finite and positive",
        )));
    }
    let alpha = cert.alpha().expect("kind carries alpha");
    let sigma = cert.sigma().expect("kind carries sigma");
    let gamma = cert.gamma().expect("kind carries gamma");
    let t = build_lower(&sqrt_of(alpha), state_dim)?;
    let t_bounds = t.numeric_bounds(&RadiusGrid::default())?;
    let s_axis = ScalarGainFn::post_scale(1.0 / crate::math::sqrt(lambda), sqrt_of(sigma));
    let s = build_upper(&s_axis, input_dim)?;
    let s_bounds = s.numeric_bounds(&RadiusGrid::default())?;
    let beta = after_inverse(cert.beta(), &t_bounds.lower);
    let gamma_new = ScalarGainFn::pre_scale(lambda, gamma.clone());
    Ok(TransformedCertificate {
        certificate: Certificate::nonlinear_l2(cert.mode(), beta, gamma_new),
        state_transform: t,
        input_transform: Some(s),
        state_bounds: t_bounds,
        input_bounds: Some(s_bounds),
    })
}

/// `max{a, b} <= a + b` for nonnegative terms: flips the mode for free.
///
/// # Errors
///
/// [`GainError::Precondition`] if the certificate is already in sum mode.
pub fn max_to_sum(cert: &Certificate) -> Result<Certificate, GainError> {
    if cert.mode() != CombineMode::Max {
        return Err(GainError::Precondition(String::from(
            "max_to_sum needs a max-mode certificate",
        )));
    }
    let mut out = cert.clone();
    out.mode = CombineMode::Sum;
    Ok(out)
}

/// `a + b <= 2 max{a, b}`: flips the mode by doubling every right-hand
/// term (`beta`, and `sigma` / `gamma` / `gain_sq` per kind).
///
/// # Errors
///
/// [`GainError::Precondition`] if the certificate is already in max mode.
pub fn sum_to_max(cert: &Certificate) -> Result<Certificate, GainError> {
    if cert.mode() != CombineMode::Sum {
        return Err(GainError::Precondition(String::from(
            "sum_to_max needs a sum-mode certificate",
        )));
    }
    let double = |f: &ScalarGainFn| ScalarGainFn::post_scale(2.0, f.clone());
    let mut out = cert.clone();
    out.mode = CombineMode::Max;
    if out.kind.has_input() {
        out.beta = double(&out.beta);
        match out.kind {
            CertKind::Iss => out.sigma = out.sigma.as_ref().map(double),
            CertKind::Iiss | CertKind::NonlinearL2 => out.gamma = out.gamma.as_ref().map(double),
            CertKind::LinearL2 => out.gain_sq = out.gain_sq.map(|g| 2.0 * g),
            CertKind::AlphaIntegrable | CertKind::L2 => unreachable!(),
        }
    }
    Ok(out)
}

/// Re-expresses an alpha-form certificate in new coordinates `z = T(x)`
/// (and `v = S(w)`): with envelope bounds `lo <= |T| <= hi`,
///
/// ```text
/// alpha -> alpha(hi_T^{-1}(.))    beta -> beta(lo_T^{-1}(.))
/// sigma -> sigma(lo_S^{-1}(.))    gamma unchanged
/// ```
///
/// Envelope bounds are computed on `radii`; pass a grid covering the
/// magnitudes the transformed certificate will be evaluated at.
///
/// # Errors
///
/// [`GainError::Incompatible`] for L2-form kinds (their state integrand is
/// tied to the coordinates) or when an input transform is supplied for a
/// kind without inputs.
pub fn transform_cert(
    cert: &Certificate,
    state: CoordinateTransform,
    input: Option<CoordinateTransform>,
    radii: &RadiusGrid,
) -> Result<TransformedCertificate, GainError> {
    if !cert.kind().has_alpha() {
        return Err(GainError::Incompatible(alloc::format!(
            "transform_cert applies to alpha-form certificates, got {:?}",
            cert.kind()
        )));
    }
    if input.is_some() && !cert.kind().has_input() {
        return Err(GainError::Incompatible(String::from(
            "input transform supplied for a certificate without inputs",
        )));
    }
    let state_bounds = state.numeric_bounds(radii)?;
    let alpha_src = cert.alpha().expect("alpha-form kinds carry alpha");
    let alpha = after_inverse(alpha_src, &state_bounds.upper);
    let beta = after_inverse(cert.beta(), &state_bounds.lower);
    let (input_bounds, sigma) = match (&input, cert.sigma()) {
        (Some(s), Some(sig)) => {
            let b = s.numeric_bounds(radii)?;
            let mapped = after_inverse(sig, &b.lower);
            (Some(b), Some(mapped))
        }
        (None, Some(sig)) => (None, Some(sig.clone())),
        (None, None) => (None, None),
        (Some(_), None) => unreachable!("checked above"),
    };
    let certificate = match cert.kind() {
        CertKind::AlphaIntegrable => Certificate::alpha_integrable(alpha, beta),
        CertKind::Iss => Certificate::iss(cert.mode(), alpha, beta, sigma.expect("iss has sigma")),
        CertKind::Iiss => Certificate::iiss(
            cert.mode(),
            alpha,
            beta,
            sigma.expect("iiss has sigma"),
            cert.gamma().expect("iiss has gamma").clone(),
        ),
        _ => unreachable!("checked above"),
    };
    Ok(TransformedCertificate {
        certificate,
        state_transform: state,
        input_transform: input,
        state_bounds,
        input_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sq() -> ScalarGainFn {
        ScalarGainFn::power(2.0)
    }

    #[test]
    fn l2_alpha_bridge() {
        let c = Certificate::l2(ScalarGainFn::linear(3.0));
        let a = l2_to_alpha_integrable(&c).unwrap();
        assert_eq!(a.kind(), CertKind::AlphaIntegrable);
        assert_relative_eq!(a.alpha().unwrap().eval(3.0).unwrap(), 9.0);
        assert_relative_eq!(a.beta().eval(2.0).unwrap(), 6.0);
        assert!(l2_to_alpha_integrable(&a).is_err());
    }

    #[test]
    fn alpha_to_l2_rescales_beta_through_lower_envelope() {
        // alpha = s^2 so T = build_lower(s, n); in dimension 4 the lower
        // envelope is r/4, hence beta_new(r) = beta(4r).
        let c = Certificate::alpha_integrable(sq(), ScalarGainFn::identity());
        let out = alpha_integrable_to_l2(&c, 4).unwrap();
        assert_eq!(out.certificate.kind(), CertKind::L2);
        assert_relative_eq!(
            out.certificate.beta().eval(2.0).unwrap(),
            8.0,
            max_relative = 1e-7
        );
        // Pointwise: |T(x)|^2 <= alpha(|x|).
        let x = [1.0, -2.0, 0.5, 0.0];
        let z = out.state_transform.apply(&x).unwrap();
        let z_sq: f64 = z.iter().map(|v| v * v).sum();
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(z_sq <= x_norm * x_norm * (1.0 + 1e-12));
    }

    #[test]
    fn linear_l2_iss_bridge() {
        let c = Certificate::linear_l2(CombineMode::Sum, sq(), 4.0).unwrap();
        let iss = linear_l2_to_iss(&c).unwrap();
        assert_eq!(iss.mode(), CombineMode::Sum);
        assert_relative_eq!(iss.sigma().unwrap().eval(2.0).unwrap(), 16.0);
        assert_relative_eq!(iss.alpha().unwrap().eval(3.0).unwrap(), 9.0);
        let zero = Certificate::linear_l2(CombineMode::Max, sq(), 0.0).unwrap();
        assert!(linear_l2_to_iss(&zero).is_err());
    }

    #[test]
    fn iss_to_linear_l2_scalar_example() {
        // alpha = s^2, beta = s^2, sigma = 4 s^2, unit target gain, scalar
        // state and input: T is the identity, S doubles the input.
        let c = Certificate::iss(CombineMode::Sum, sq(), sq(), ScalarGainFn::post_scale(4.0, sq()));
        let out = iss_to_linear_l2(&c, 1.0, 1, 1).unwrap();
        assert_eq!(out.certificate.kind(), CertKind::LinearL2);
        assert_eq!(out.certificate.mode(), CombineMode::Sum);
        assert_relative_eq!(out.certificate.gain_sq().unwrap(), 1.0);
        assert_relative_eq!(
            out.certificate.beta().eval(2.0).unwrap(),
            4.0,
            max_relative = 1e-7
        );
        let s = out.input_transform.as_ref().unwrap();
        assert_relative_eq!(s.apply(&[3.0]).unwrap()[0], 6.0, max_relative = 1e-12);
        assert!(iss_to_linear_l2(&c, 0.0, 1, 1).is_err());
    }

    #[test]
    fn nonlinear_l2_iiss_bridge() {
        let c = Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::log_one_plus());
        let i = nonlinear_l2_to_iiss(&c).unwrap();
        assert_eq!(i.kind(), CertKind::Iiss);
        assert_relative_eq!(i.alpha().unwrap().eval(2.0).unwrap(), 4.0);
        assert_relative_eq!(i.sigma().unwrap().eval(3.0).unwrap(), 9.0);
        assert_relative_eq!(i.gamma().unwrap().eval(1.0).unwrap(), 2.0f64.ln());
    }

    #[test]
    fn iiss_to_nonlinear_l2_lambda_four() {
        // sigma = s^2, lambda = 4: S halves the input, gamma picks up a
        // pre-scale of 4. alpha = s^2 keeps T the identity, so beta stays.
        let c = Certificate::iiss(
            CombineMode::Max,
            sq(),
            ScalarGainFn::identity(),
            sq(),
            ScalarGainFn::log_one_plus(),
        );
        let out = iiss_to_nonlinear_l2(&c, 4.0, 1, 1).unwrap();
        let s = out.input_transform.as_ref().unwrap();
        assert_relative_eq!(s.apply(&[3.0]).unwrap()[0], 1.5, max_relative = 1e-12);
        assert_relative_eq!(
            out.certificate.gamma().unwrap().eval(1.0).unwrap(),
            5.0f64.ln(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            out.certificate.beta().eval(2.0).unwrap(),
            2.0,
            max_relative = 1e-7
        );
    }

    #[test]
    fn mode_flips_double_correctly() {
        let c = Certificate::iss(CombineMode::Sum, sq(), sq(), ScalarGainFn::post_scale(4.0, sq()));
        let m = sum_to_max(&c).unwrap();
        assert_eq!(m.mode(), CombineMode::Max);
        assert_relative_eq!(m.beta().eval(3.0).unwrap(), 18.0);
        assert_relative_eq!(m.sigma().unwrap().eval(1.0).unwrap(), 8.0);
        // Going back is free but keeps the doubled functions.
        let back = max_to_sum(&m).unwrap();
        assert_eq!(back.mode(), CombineMode::Sum);
        assert_relative_eq!(back.beta().eval(3.0).unwrap(), 18.0);
        assert!(sum_to_max(&m).is_err());
        assert!(max_to_sum(&c).is_err());

        let lin = Certificate::linear_l2(CombineMode::Sum, sq(), 4.0).unwrap();
        let lin_max = sum_to_max(&lin).unwrap();
        assert_relative_eq!(lin_max.gain_sq().unwrap(), 8.0);

        let ii = Certificate::iiss(CombineMode::Sum, sq(), sq(), sq(), ScalarGainFn::identity());
        let ii_max = sum_to_max(&ii).unwrap();
        assert_relative_eq!(ii_max.gamma().unwrap().eval(3.0).unwrap(), 6.0);
        assert_relative_eq!(ii_max.sigma().unwrap().eval(3.0).unwrap(), 9.0);
    }

    #[test]
    fn bound_respects_mode_and_kind() {
        let c = Certificate::iss(CombineMode::Max, sq(), sq(), sq());
        assert_relative_eq!(c.bound(2.0, 9.0), 9.0);
        let s = max_to_sum(&c).unwrap();
        assert_relative_eq!(s.bound(2.0, 9.0), 13.0);
        let lin = Certificate::linear_l2(CombineMode::Max, sq(), 4.0).unwrap();
        assert_relative_eq!(lin.bound(1.0, 3.0), 12.0);
        let plain = Certificate::l2(sq());
        assert_relative_eq!(plain.bound(3.0, 100.0), 9.0);
    }

    #[test]
    fn transform_cert_rewrites_all_three_functions() {
        let c = Certificate::iss(CombineMode::Max, sq(), sq(), sq());
        let t = build_lower(&ScalarGainFn::identity(), 4).unwrap();
        let s = CoordinateTransform::identity(2);
        let out = transform_cert(&c, t, Some(s), &RadiusGrid::default()).unwrap();
        let tc = &out.certificate;
        // Upper envelope of T is r, lower is r/4; identity input transform.
        assert_relative_eq!(tc.alpha().unwrap().eval(2.0).unwrap(), 4.0, max_relative = 1e-7);
        assert_relative_eq!(tc.beta().eval(2.0).unwrap(), 64.0, max_relative = 1e-7);
        assert_relative_eq!(tc.sigma().unwrap().eval(2.0).unwrap(), 4.0, max_relative = 1e-6);
    }

    #[test]
    fn transform_cert_rejects_l2_kinds_and_spurious_inputs() {
        let lin = Certificate::linear_l2(CombineMode::Max, sq(), 1.0).unwrap();
        let t = CoordinateTransform::identity(1);
        assert!(matches!(
            transform_cert(&lin, t.clone(), None, &RadiusGrid::default()),
            Err(GainError::Incompatible(_))
        ));
        let plain = Certificate::alpha_integrable(sq(), sq());
        assert!(matches!(
            transform_cert(&plain, t.clone(), Some(t), &RadiusGrid::default()),
            Err(GainError::Incompatible(_))
        ));
    }
}
