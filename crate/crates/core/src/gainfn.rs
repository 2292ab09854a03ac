//! Scalar gain functions: expression trees with a K-infinity calculus.
//!
//! A [`ScalarGainFn`] is an immutable expression tree over the atoms
//!
//! ```text
//! identity        s
//! power(p)        s^p                 (p > 0)
//! linear(k)       k*s                 (k > 0)
//! exp_minus_one   exp(s) - 1
//! log_one_plus    log(1 + s)
//! ```
//!
//! and the combinators `compose`, `pointwise_max`, `pointwise_min`, `sum`,
//! `post_scale(k, f) = k*f(s)`, `pre_scale(k, f) = f(k*s)`,
//! `residual(f) = s - f(s)`, and `numeric_inverse(f) = f^{-1}(s)`. Every
//! atom is class K-infinity on `[0, ∞)`; the combinators preserve that class
//! except `residual`, which is the membership *test* for small-gain
//! conditions (`s - f(s)` is K-infinity exactly when `f` is a strict
//! contraction in the comparison-function sense).
//!
//! Evaluation is total. Outputs clamp to `±`[`SATURATION_BOUND`], negative
//! arguments evaluate through the odd extension `f(-s) = -f(s)` at each atom
//! (only reachable through residual-style expressions; certificates only
//! evaluate at nonnegative arguments), and inverse nodes saturate when the
//! target is beyond reach. Class membership is *certified* numerically on a
//! grid rather than proved: see [`ScalarGainFn::certify_kinf`].
//!
//! A sampled atom, [`MonotoneTable`], represents monotone envelopes measured
//! from coordinate transforms (piecewise linear through `(0, 0)`, continued
//! past the last sample with the final slope). It is not part of the
//! construction grammar above but behaves like any other node.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::GainError;
use crate::math;

/// Evaluation saturates to this magnitude instead of overflowing.
pub const SATURATION_BOUND: f64 = 1e300;

/// Hard cap on bisection refinement steps during inversion.
pub const BISECT_MAX_ITERS: usize = 200;

/// Bisection stops once the bracket width shrinks below this, relative to
/// `max(1, hi)`.
pub const BISECT_REL_WIDTH: f64 = 1e-12;

/// Documented accuracy of [`inverse_eval`]: `|f(s) - y| <= tol * max(1, y)`.
pub const INVERSE_EVAL_TOL: f64 = 1e-8;

/// Default tolerance for K-infinity certification.
pub const DEFAULT_CERT_TOL: f64 = 1e-10;

/// Smallest abscissa of the default logarithmic certification grid.
pub const LOG_GRID_MIN: f64 = 1e-9;

/// A scalar gain-function expression tree.
///
/// Children are shared via [`Arc`], so clones are cheap and trees are
/// `Send + Sync`. Construct through the associated functions, which validate
/// scalar parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarGainFn {
    /// `s`
    Identity,
    /// `s^p` with `p > 0`
    Power(f64),
    /// `k*s` with `k > 0`
    Linear(f64),
    /// `exp(s) - 1`
    ExpMinusOne,
    /// `log(1 + s)`
    LogOnePlus,
    /// `outer(inner(s))`
    Compose(Arc<ScalarGainFn>, Arc<ScalarGainFn>),
    /// `max{a(s), b(s)}`
    Max(Arc<ScalarGainFn>, Arc<ScalarGainFn>),
    /// `min{a(s), b(s)}`
    Min(Arc<ScalarGainFn>, Arc<ScalarGainFn>),
    /// `a(s) + b(s)`
    Sum(Arc<ScalarGainFn>, Arc<ScalarGainFn>),
    /// `k * f(s)` with `k > 0`
    PostScale(f64, Arc<ScalarGainFn>),
    /// `f(k * s)` with `k > 0`
    PreScale(f64, Arc<ScalarGainFn>),
    /// `s - f(s)`; may be negative, callers must handle
    Residual(Arc<ScalarGainFn>),
    /// `f^{-1}(s)` by bracketed bisection
    Inverse(Arc<ScalarGainFn>),
    /// Sampled monotone function, piecewise linear through the origin
    Table(Arc<MonotoneTable>),
}

impl ScalarGainFn {
    /// The identity atom `s`.
    pub fn identity() -> Self {
        ScalarGainFn::Identity
    }

    /// The power atom `s^p`.
    ///
    /// # Panics
    ///
    /// Panics unless `p` is finite and positive.
    pub fn power(p: f64) -> Self {
        assert!(p.is_finite() && p > 0.0, "power exponent must be positive");
        ScalarGainFn::Power(p)
    }

    /// The linear atom `k*s`.
    ///
    /// # Panics
    ///
    /// Panics unless `k` is finite and positive.
    pub fn linear(k: f64) -> Self {
        assert!(k.is_finite() && k > 0.0, "linear slope must be positive");
        ScalarGainFn::Linear(k)
    }

    /// The atom `exp(s) - 1`.
    pub fn exp_minus_one() -> Self {
        ScalarGainFn::ExpMinusOne
    }

    /// The atom `log(1 + s)`.
    pub fn log_one_plus() -> Self {
        ScalarGainFn::LogOnePlus
    }

    /// `outer(inner(s))`.
    pub fn compose(outer: Self, inner: Self) -> Self {
        ScalarGainFn::Compose(Arc::new(outer), Arc::new(inner))
    }

    /// Pointwise maximum of two gain functions.
    pub fn pointwise_max(a: Self, b: Self) -> Self {
        ScalarGainFn::Max(Arc::new(a), Arc::new(b))
    }

    /// Pointwise minimum of two gain functions.
    pub fn pointwise_min(a: Self, b: Self) -> Self {
        ScalarGainFn::Min(Arc::new(a), Arc::new(b))
    }

    /// Pointwise sum of two gain functions.
    pub fn sum(a: Self, b: Self) -> Self {
        ScalarGainFn::Sum(Arc::new(a), Arc::new(b))
    }

    /// `k * f(s)`.
    ///
    /// # Panics
    ///
    /// Panics unless `k` is finite and positive.
    pub fn post_scale(k: f64, f: Self) -> Self {
        assert!(k.is_finite() && k > 0.0, "post_scale factor must be positive");
        ScalarGainFn::PostScale(k, Arc::new(f))
    }

    /// `f(k * s)`.
    ///
    /// # Panics
    ///
    /// Panics unless `k` is finite and positive.
    pub fn pre_scale(k: f64, f: Self) -> Self {
        assert!(k.is_finite() && k > 0.0, "pre_scale factor must be positive");
        ScalarGainFn::PreScale(k, Arc::new(f))
    }

    /// `s - f(s)`. The result is K-infinity exactly when `f` is contractive;
    /// it is *not* assumed to be a gain function and may evaluate negative.
    pub fn residual(f: Self) -> Self {
        ScalarGainFn::Residual(Arc::new(f))
    }

    /// `f^{-1}(s)`, evaluated on demand by bracketed bisection. Meaningful
    /// only when `f` certifies as K-infinity.
    pub fn numeric_inverse(f: Self) -> Self {
        ScalarGainFn::Inverse(Arc::new(f))
    }

    /// Wraps a sampled monotone envelope as a gain function.
    pub fn from_monotone_table(rs: Vec<f64>, vs: Vec<f64>) -> Result<Self, GainError> {
        Ok(ScalarGainFn::Table(Arc::new(MonotoneTable::new(rs, vs)?)))
    }

    /// Evaluates at `s >= 0`.
    ///
    /// Total on the domain: overflow saturates at [`SATURATION_BOUND`].
    /// Residual subtrees may yield negative values.
    ///
    /// # Errors
    ///
    /// [`GainError::Domain`] if `s` is negative or NaN.
    pub fn eval(&self, s: f64) -> Result<f64, GainError> {
        if !(s >= 0.0) {
            return Err(GainError::Domain(format!(
                "gain functions are defined on [0, inf), got {s}"
            )));
        }
        Ok(self.eval_extended(s))
    }

    /// Evaluates anywhere on the real line via the odd extension
    /// `f(-s) = -f(s)` (applied once at entry, so pointwise min/max keep
    /// their nonnegative-domain meaning). Total: never panics, never
    /// returns NaN or infinity.
    pub fn eval_extended(&self, s: f64) -> f64 {
        self.eval_cached(s, &mut EvalCache::new())
    }

    /// [`Self::eval_extended`] with a warm-start cache for inverse nodes.
    ///
    /// Repeated evaluation along a monotone sequence of arguments (the usual
    /// pattern when sweeping a trajectory) reuses the previous bisection
    /// root as the next bracket seed. Results agree with the uncached path
    /// up to the bisection tolerance, and a fixed call sequence is fully
    /// deterministic.
    pub fn eval_cached(&self, s: f64, cache: &mut EvalCache) -> f64 {
        if s.is_nan() {
            return 0.0;
        }
        if s < 0.0 {
            return clamp(-self.eval_cached(-s, cache));
        }
        let v = match self {
            ScalarGainFn::Identity => s,
            ScalarGainFn::Power(p) => math::powf(s, *p),
            ScalarGainFn::Linear(k) => k * s,
            ScalarGainFn::ExpMinusOne => math::exp_m1(s),
            ScalarGainFn::LogOnePlus => math::ln_1p(s),
            ScalarGainFn::Compose(f, g) => {
                // Residual inner values may be negative; the entry branch
                // restores oddness for the outer function.
                let inner = g.eval_cached(s, cache);
                f.eval_cached(inner, cache)
            }
            ScalarGainFn::Max(a, b) => f64::max(a.eval_cached(s, cache), b.eval_cached(s, cache)),
            ScalarGainFn::Min(a, b) => f64::min(a.eval_cached(s, cache), b.eval_cached(s, cache)),
            ScalarGainFn::Sum(a, b) => a.eval_cached(s, cache) + b.eval_cached(s, cache),
            ScalarGainFn::PostScale(k, f) => k * f.eval_cached(s, cache),
            ScalarGainFn::PreScale(k, f) => f.eval_cached(k * s, cache),
            ScalarGainFn::Residual(f) => s - f.eval_cached(s, cache),
            ScalarGainFn::Inverse(f) => invert_saturating(f, s, cache),
            ScalarGainFn::Table(t) => t.eval_nonneg(s),
        };
        clamp(v)
    }

    /// Certifies class-K-infinity membership numerically.
    ///
    /// Three checks on the given grid with tolerance `tol`:
    ///
    /// * `zero_at_zero`: `|f(0)| <= tol`;
    /// * `monotone_on_grid`: consecutive grid values never drop by more than
    ///   `tol` (saturated plateaus therefore pass);
    /// * `unbounded_advisory`: `f(s_max)` exceeds the grid's advisory
    ///   threshold. Heuristic by nature; slowly growing functions need an
    ///   adjusted threshold.
    ///
    /// Deterministic and infallible; the verdict is the conjunction of the
    /// three flags.
    pub fn certify_kinf(&self, grid: &GridSpec, tol: f64) -> KinfCertReport {
        let mut cache = EvalCache::new();
        let zero_at_zero = self.eval_cached(0.0, &mut cache).abs() <= tol;
        let mut monotone_on_grid = true;
        let mut prev = f64::NEG_INFINITY;
        let mut last = 0.0;
        for s in grid.points() {
            let v = self.eval_cached(s, &mut cache);
            if prev > f64::NEG_INFINITY && v - prev < -tol {
                monotone_on_grid = false;
            }
            prev = v;
            last = v;
        }
        let unbounded_advisory = last > grid.unbounded_threshold;
        KinfCertReport {
            zero_at_zero,
            monotone_on_grid,
            unbounded_advisory,
            grid_spec: grid.clone(),
            tolerance: tol,
        }
    }

    /// [`Self::certify_kinf`] on the default grid and tolerance.
    pub fn certify_default(&self) -> KinfCertReport {
        self.certify_kinf(&GridSpec::default(), DEFAULT_CERT_TOL)
    }
}

impl fmt::Display for ScalarGainFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("s"))
    }
}

impl ScalarGainFn {
    fn render(&self, arg: &str) -> String {
        match self {
            ScalarGainFn::Identity => String::from(arg),
            ScalarGainFn::Power(p) => format!("({arg})^{p}"),
            ScalarGainFn::Linear(k) => format!("{k}*{arg}"),
            ScalarGainFn::ExpMinusOne => format!("(exp({arg}) - 1)"),
            ScalarGainFn::LogOnePlus => format!("log(1 + {arg})"),
            ScalarGainFn::Compose(outer, inner) => outer.render(&inner.render(arg)),
            ScalarGainFn::Max(a, b) => format!("max{{{}, {}}}", a.render(arg), b.render(arg)),
            ScalarGainFn::Min(a, b) => format!("min{{{}, {}}}", a.render(arg), b.render(arg)),
            ScalarGainFn::Sum(a, b) => format!("({} + {})", a.render(arg), b.render(arg)),
            ScalarGainFn::PostScale(k, g) => format!("{k}*{}", g.render(arg)),
            ScalarGainFn::PreScale(k, g) => g.render(&format!("({k}*{arg})")),
            ScalarGainFn::Residual(g) => format!("({arg} - {})", g.render(arg)),
            ScalarGainFn::Inverse(g) => format!("inv[{}]({arg})", g.render("s")),
            ScalarGainFn::Table(t) => format!("table[{}]({arg})", t.len()),
        }
    }
}

fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else if v > SATURATION_BOUND {
        SATURATION_BOUND
    } else if v < -SATURATION_BOUND {
        -SATURATION_BOUND
    } else {
        v
    }
}

/// Warm-start state for inverse nodes, keyed by node identity.
///
/// See [`ScalarGainFn::eval_cached`].
#[derive(Debug, Default)]
pub struct EvalCache {
    warm: BTreeMap<usize, (f64, f64)>,
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Total inversion used by `Inverse` nodes: saturates instead of erroring
/// when `y` is unreachable.
fn invert_saturating(f: &Arc<ScalarGainFn>, y: f64, cache: &mut EvalCache) -> f64 {
    let key = Arc::as_ptr(f) as usize;
    let warm = cache.warm.get(&key).copied();
    let root = bisect_inverse(f, y, warm, cache).unwrap_or(SATURATION_BOUND);
    cache.warm.insert(key, (y, root));
    root
}

/// Core bracketed bisection for `f(s) = y`, `y >= 0`, assuming `f` is
/// monotone increasing with `f(0) <= 0 <= y`. Returns `None` when the
/// bracket growth cap is reached without enclosing `y`.
fn bisect_inverse(
    f: &ScalarGainFn,
    y: f64,
    warm: Option<(f64, f64)>,
    cache: &mut EvalCache,
) -> Option<f64> {
    if y == 0.0 {
        return Some(0.0);
    }
    let (mut lo, mut hi) = match warm {
        Some((_, xp)) if xp > 0.0 && xp < SATURATION_BOUND => {
            if f.eval_cached(xp, cache) <= y {
                (xp, (xp * 2.0).max(1e-300))
            } else {
                (0.0, xp)
            }
        }
        _ => (0.0, 1.0),
    };
    // Grow the bracket until f(hi) >= y.
    while f.eval_cached(hi, cache) < y {
        lo = hi;
        hi *= 2.0;
        if hi >= SATURATION_BOUND {
            if f.eval_cached(SATURATION_BOUND, cache) < y {
                return None;
            }
            hi = SATURATION_BOUND;
            break;
        }
    }
    let mut iters = 0;
    while iters < BISECT_MAX_ITERS && hi - lo > BISECT_REL_WIDTH * f64::max(1.0, hi) {
        let mid = lo + 0.5 * (hi - lo);
        if f.eval_cached(mid, cache) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    Some(lo + 0.5 * (hi - lo))
}

/// Solves `f(s) = y` for a certified-monotone `f`.
///
/// Accuracy: `|f(s) - y| <= `[`INVERSE_EVAL_TOL`]`
/// * max(1, y)` for well-scaled trees (property-tested).
///
/// # Errors
///
/// * [`GainError::Domain`] if `y` is negative or NaN.
/// * [`GainError::Range`] if doubling the bracket up to
///   [`SATURATION_BOUND`] never reaches `y`.
pub fn inverse_eval(f: &ScalarGainFn, y: f64) -> Result<f64, GainError> {
    if !(y >= 0.0) {
        return Err(GainError::Domain(format!(
            "inversion target must be nonnegative, got {y}"
        )));
    }
    let mut cache = EvalCache::new();
    bisect_inverse(f, y, None, &mut cache).ok_or_else(|| {
        GainError::Range(format!(
            "no bracket reaches {y}: function saturates below the target"
        ))
    })
}

/// Grid spacing for K-infinity certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    /// `points` samples evenly spaced on `[0, s_max]`.
    Linear,
    /// `points` samples log-spaced on `[`[`LOG_GRID_MIN`]`, s_max]`.
    Log,
}

/// Certification grid: where and how densely to sample, plus the advisory
/// growth threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub s_max: f64,
    pub points: usize,
    pub spacing: Spacing,
    /// `unbounded_advisory` holds when `f(s_max)` exceeds this.
    pub unbounded_threshold: f64,
}

impl Default for GridSpec {
    /// 512 log-spaced points on `[1e-9, 1e9]`, advisory threshold `1e6`.
    fn default() -> Self {
        GridSpec {
            s_max: 1e9,
            points: 512,
            spacing: Spacing::Log,
            unbounded_threshold: 1e6,
        }
    }
}

impl GridSpec {
    /// The sample abscissas, in increasing order (excluding the extra
    /// `s = 0` probe used for `zero_at_zero`).
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(2);
        let (lo, hi, log) = match self.spacing {
            Spacing::Linear => (0.0, self.s_max, false),
            Spacing::Log => (math::ln(LOG_GRID_MIN), math::ln(self.s_max), true),
        };
        (0..n).map(move |i| {
            let t = i as f64 / (n - 1) as f64;
            let v = lo + t * (hi - lo);
            if log {
                math::exp(v)
            } else {
                v
            }
        })
    }
}

/// Outcome of numeric K-infinity certification.
#[derive(Debug, Clone, PartialEq)]
pub struct KinfCertReport {
    pub zero_at_zero: bool,
    pub monotone_on_grid: bool,
    pub unbounded_advisory: bool,
    pub grid_spec: GridSpec,
    pub tolerance: f64,
}

impl KinfCertReport {
    /// Conjunction of the three checks.
    pub fn verdict(&self) -> bool {
        self.zero_at_zero && self.monotone_on_grid && self.unbounded_advisory
    }
}

/// Splits `gamma(a + b)` without a factor-2 loss:
///
/// ```text
/// gamma(a + b) <= max{ gamma(rho(a)), gamma(rho((rho - id)^{-1}(b))) }
/// ```
///
/// valid for any K-infinity `rho` with `rho - id` K-infinity.
///
/// # Errors
///
/// * [`GainError::Domain`] if `a` or `b` is negative or NaN.
/// * [`GainError::Precondition`] if `gamma` or `rho - id` fails
///   certification on the default grid.
pub fn weak_triangle_bound(
    gamma: &ScalarGainFn,
    rho: &ScalarGainFn,
    a: f64,
    b: f64,
) -> Result<f64, GainError> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(GainError::Domain(format!(
            "weak triangle arguments must be nonnegative, got ({a}, {b})"
        )));
    }
    if !gamma.certify_default().verdict() {
        return Err(GainError::Precondition(String::from(
            "gamma does not certify as K-infinity",
        )));
    }
    let rho_minus_id = rho_surplus(rho);
    if !rho_minus_id.certify_default().verdict() {
        return Err(GainError::Precondition(String::from(
            "rho - id does not certify as K-infinity",
        )));
    }
    let first = gamma.eval_extended(rho.eval_extended(a));
    let pulled = inverse_eval(&rho_minus_id, b)?;
    let second = gamma.eval_extended(rho.eval_extended(pulled));
    Ok(f64::max(first, second))
}

/// `rho(s) - s` as an expression tree, via `(id - rho^{-1})(rho(s))`.
///
/// K-infinity exactly when `rho` strictly dominates the identity.
pub fn rho_surplus(rho: &ScalarGainFn) -> ScalarGainFn {
    ScalarGainFn::compose(
        ScalarGainFn::residual(ScalarGainFn::numeric_inverse(rho.clone())),
        rho.clone(),
    )
}

/// A gain function `alpha` with `alpha(s1 + s2) <= alpha1(s1) + alpha2(s2)`:
///
/// ```text
/// alpha(s) = min{ alpha1(s/2), alpha2(s/2) }
/// ```
pub fn sum_lower_envelope(alpha1: &ScalarGainFn, alpha2: &ScalarGainFn) -> ScalarGainFn {
    ScalarGainFn::pointwise_min(
        ScalarGainFn::pre_scale(0.5, alpha1.clone()),
        ScalarGainFn::pre_scale(0.5, alpha2.clone()),
    )
}

/// Young-style split of a squared norm of a sum:
///
/// ```text
/// |a + b|^2 <= (1 + eps^2)*|a|^2 + (1 + eps^{-2})*|b|^2
/// ```
///
/// Takes the already-squared norms and returns the right-hand side.
///
/// # Errors
///
/// [`GainError::Domain`] if `eps <= 0` or any argument is negative or NaN.
pub fn young_split(a_sq: f64, b_sq: f64, eps: f64) -> Result<f64, GainError> {
    if !(eps > 0.0) {
        return Err(GainError::Domain(format!(
            "Young split needs eps > 0, got {eps}"
        )));
    }
    if !(a_sq >= 0.0) || !(b_sq >= 0.0) {
        return Err(GainError::Domain(format!(
            "squared norms must be nonnegative, got ({a_sq}, {b_sq})"
        )));
    }
    Ok((1.0 + eps * eps) * a_sq + (1.0 + 1.0 / (eps * eps)) * b_sq)
}

/// Piecewise-linear monotone sample table anchored at the origin.
///
/// Defined on `[0, ∞)`: linear from `(0, 0)` to the first sample, linear
/// between samples, and continued past the last sample with the final
/// segment's slope (constant if that slope is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    rs: Vec<f64>,
    vs: Vec<f64>,
}

impl MonotoneTable {
    /// Validates and builds a table.
    ///
    /// # Errors
    ///
    /// [`GainError::Domain`] unless there are at least two samples, the
    /// abscissas are strictly increasing and positive, and the values are
    /// finite, nonnegative, and nondecreasing.
    pub fn new(rs: Vec<f64>, vs: Vec<f64>) -> Result<Self, GainError> {
        if rs.len() != vs.len() || rs.len() < 2 {
            return Err(GainError::Domain(String::from(
                "monotone table needs matching abscissa/value lists with at least 2 samples",
            )));
        }
        if !(rs[0] > 0.0) {
            return Err(GainError::Domain(String::from(
                "monotone table abscissas must be positive",
            )));
        }
        for w in rs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GainError::Domain(String::from(
                    "monotone table abscissas must be strictly increasing",
                )));
            }
        }
        if !(vs[0] >= 0.0) {
            return Err(GainError::Domain(String::from(
                "monotone table values must be nonnegative",
            )));
        }
        for w in vs.windows(2) {
            if !w[1].is_finite() || w[1] < w[0] {
                return Err(GainError::Domain(String::from(
                    "monotone table values must be finite and nondecreasing",
                )));
            }
        }
        Ok(MonotoneTable { rs, vs })
    }

    pub fn len(&self) -> usize {
        self.rs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rs.is_empty()
    }

    /// Sample abscissas.
    pub fn abscissas(&self) -> &[f64] {
        &self.rs
    }

    /// Sample values.
    pub fn values(&self) -> &[f64] {
        &self.vs
    }

    fn eval_nonneg(&self, r: f64) -> f64 {
        let n = self.rs.len();
        if r <= 0.0 {
            return 0.0;
        }
        if r <= self.rs[0] {
            return self.vs[0] * (r / self.rs[0]);
        }
        if r >= self.rs[n - 1] {
            let slope = (self.vs[n - 1] - self.vs[n - 2]) / (self.rs[n - 1] - self.rs[n - 2]);
            return self.vs[n - 1] + slope * (r - self.rs[n - 1]);
        }
        let idx = self.rs.partition_point(|&x| x < r);
        let (r0, r1) = (self.rs[idx - 1], self.rs[idx]);
        let (v0, v1) = (self.vs[idx - 1], self.vs[idx]);
        // Weight first: keeps node evaluations exact and avoids crushing
        // subnormal value differences against the cell width.
        let w = (r - r0) / (r1 - r0);
        v0 + (v1 - v0) * w
    }
}
