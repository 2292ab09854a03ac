//! Trajectory generation and numerical certificate verification.
//!
//! Models are vector fields `dx/dt = f(x, w)` integrated with fixed-step
//! classical RK4. Inputs are sampled at the left endpoint of each step and
//! held through all four stages, so piecewise-constant switches take effect
//! at the next grid point. Trajectory functionals use the trapezoid rule on
//! the same grid, which is exact for constant integrands.
//!
//! A certificate claims, for every truncation time `t`,
//!
//! ```text
//! ∫₀ᵗ g(|x(τ)|) dτ  ≤  combine(β(|x(0)|), input term at ∫₀ᵗ h(|w(τ)|) dτ)
//! ```
//!
//! with `g`, `h`, and the input term determined by the certificate kind.
//! [`verify_certificate`] evaluates both sides at every grid point and
//! reports the worst margin; the verdict tolerates a relative defect of
//! `tol * max(1, rhs)` at the worst point, which absorbs the integration and
//! quadrature error of well-resolved trajectories without masking a real
//! violation.
//!
//! [`monte_carlo_verify`] repeats this over seeded random initial states and
//! piecewise-constant inputs. Draw `i` of a batch uses its own generator
//! seeded with `base_seed + i`, so reports are independent of thread count
//! and a failing draw can be replayed from its seed alone.
//!
//! [`falsify_linear_l2_bilinear`] searches for a witness against a claimed
//! finite-linear-gain L2 estimate on the bilinear model `dx/dt = -x + x w`:
//! under the constant input `w ≡ 2` the state grows like `x(0) eᵗ`, so
//! `‖x‖²` eventually exceeds `β̂(|x(0)|) + γ̄² ‖w‖²` for any claimed `β̂`
//! and `γ̄`. The scan accepts a horizon only when an analytic growth check
//! and the simulated comparison both confirm the violation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certificates::{Certificate, CombineMode};
use crate::error::GainError;
use crate::gainfn::{inverse_eval, EvalCache, ScalarGainFn};
use crate::math;
use crate::transforms::CoordinateTransform;

/// Step size used when a caller does not have a reason to pick one.
pub const DEFAULT_DT: f64 = 1e-3;

/// Relative verification tolerance: a bound "holds" when the worst margin is
/// no worse than `-tol * max(1, rhs)`.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-6;

/// State-norm guard; integration aborts with [`GainError::Diverged`] beyond it.
pub const BLOWUP_NORM: f64 = 1e12;

/// Horizon increment of the falsification scan.
const FALSIFY_STEP: f64 = 0.25;

/// Scan cap: horizons `FALSIFY_STEP * {1, .., FALSIFY_MAX_STEPS}`.
const FALSIFY_MAX_STEPS: usize = 200;

/// Solves `u = x²` from `z = x e^{-1/(2x²)}`, i.e. `ln u - 1/u = 2 ln|z|`.
///
/// `h(u) = ln u - 1/u` is increasing and concave on `(0, ∞)`, so Newton
/// iteration from any point below the root converges monotonically without
/// overshoot. Both seeds used here sit below the root: `h(z²) = 2ln|z| - 1/z²`
/// always, and `h(1/(1-r)) <= r` whenever `r < 0.5` (with `r = 2 ln|z|`).
fn inv_t_sq(z: f64) -> f64 {
    let az = if z < 0.0 { -z } else { z };
    if az == 0.0 {
        return 0.0;
    }
    let r = 2.0 * math::ln(az);
    let mut u = az * az;
    if r < 0.5 {
        let near_pole = 1.0 / (1.0 - r);
        if near_pole > u {
            u = near_pole;
        }
    }
    for _ in 0..80 {
        let h = math::ln(u) - 1.0 / u;
        let diff = r - h;
        if diff.abs() <= 1e-13 * (1.0 + r.abs()) {
            break;
        }
        // h'(u) = 1/u + 1/u²; the update keeps u below the root.
        u += diff * (u * u) / (u + 1.0);
    }
    u
}

/// Right-hand side `f(x, w)` writing `dx/dt` into the output slice.
pub type VectorField = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// A named vector field with fixed state and input dimensions.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    state_dim: usize,
    input_dim: usize,
    field: Arc<VectorField>,
}

impl core::fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .finish()
    }
}

impl SystemModel {
    /// Wraps a closure as a model. The closure must write exactly
    /// `state_dim` derivatives and read at most `input_dim` input slots.
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        input_dim: usize,
        field: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            state_dim,
            input_dim,
            field: Arc::new(field),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Evaluates the field once.
    ///
    /// # Errors
    ///
    /// [`GainError::Dimension`] on slice-length mismatches.
    pub fn eval(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<(), GainError> {
        if x.len() != self.state_dim || out.len() != self.state_dim {
            return Err(GainError::Dimension {
                expected: self.state_dim,
                got: if x.len() != self.state_dim { x.len() } else { out.len() },
            });
        }
        if w.len() != self.input_dim {
            return Err(GainError::Dimension {
                expected: self.input_dim,
                got: w.len(),
            });
        }
        (self.field)(x, w, out);
        Ok(())
    }

    /// Scalar cubic decay `dx/dt = -x³`.
    pub fn ex1_cubic() -> Self {
        Self::new("ex1_cubic", 1, 0, |x, _w, out| {
            out[0] = -x[0] * x[0] * x[0];
        })
    }

    /// Forced cubic decay `dx/dt = -x³ + w`.
    pub fn ex2_cubic_forced() -> Self {
        Self::new("ex2_cubic_forced", 1, 1, |x, w, out| {
            out[0] = -x[0] * x[0] * x[0] + w[0];
        })
    }

    /// Bilinear model `dx/dt = -x + x w`; no linear-gain L2 estimate exists.
    pub fn ex3_bilinear() -> Self {
        Self::new("ex3_bilinear", 1, 1, |x, w, out| {
            out[0] = -x[0] + x[0] * w[0];
        })
    }

    /// The cubic-decay model in the coordinate `z = x e^{-1/(2x²)}`:
    /// `dz/dt = -z (1 + x²)` with `x² = inv_t_sq(z)`; `|z|` decays at least
    /// exponentially with unit rate.
    pub fn ex1_transformed() -> Self {
        Self::new("ex1_transformed", 1, 0, |x, _w, out| {
            out[0] = -x[0] * (1.0 + inv_t_sq(x[0]));
        })
    }

    /// The forced cubic model in the same coordinate:
    /// `dz/dt = -z (1 + x²) + e^{-1/(2x²)} (1 + 1/x²) w`; the input
    /// coefficient is bounded by 2 over all `z`.
    pub fn ex2_transformed() -> Self {
        Self::new("ex2_transformed", 1, 1, |x, w, out| {
            let u = inv_t_sq(x[0]);
            let coeff = if u > 0.0 {
                math::exp(-0.5 / u) * (1.0 + 1.0 / u)
            } else {
                0.0
            };
            out[0] = -x[0] * (1.0 + u) + coeff * w[0];
        })
    }

    /// Scalar linear model `dx/dt = -a x + b w`, `a > 0`.
    pub fn linear1d(a: f64, b: f64) -> Self {
        Self::new(format!("linear1d({a},{b})"), 1, 1, move |x, w, out| {
            out[0] = -a * x[0] + b * w[0];
        })
    }

    /// Looks up a registered model by name. `linear1d` resolves with
    /// `a = b = 1`; use [`SystemModel::linear1d`] for other coefficients.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ex1_cubic" => Some(Self::ex1_cubic()),
            "ex2_cubic_forced" => Some(Self::ex2_cubic_forced()),
            "ex3_bilinear" => Some(Self::ex3_bilinear()),
            "ex1_transformed" => Some(Self::ex1_transformed()),
            "ex2_transformed" => Some(Self::ex2_transformed()),
            "linear1d" => Some(Self::linear1d(1.0, 1.0)),
            _ => None,
        }
    }

    /// Names accepted by [`SystemModel::builtin`].
    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "ex1_cubic",
            "ex2_cubic_forced",
            "ex3_bilinear",
            "ex1_transformed",
            "ex2_transformed",
            "linear1d",
        ]
    }

    /// Cascade: the driver's state feeds the receiver's input, the exogenous
    /// input feeds the driver. State is `[x_receiver, x_driver]`.
    ///
    /// # Errors
    ///
    /// [`GainError::Dimension`] unless
    /// `receiver.input_dim() == driver.state_dim()`.
    pub fn cascade(receiver: &Self, driver: &Self) -> Result<Self, GainError> {
        if receiver.input_dim != driver.state_dim {
            return Err(GainError::Dimension {
                expected: receiver.input_dim,
                got: driver.state_dim,
            });
        }
        let (n1, n2, m2) = (receiver.state_dim, driver.state_dim, driver.input_dim);
        let (f1, f2) = (receiver.field.clone(), driver.field.clone());
        Ok(Self::new(
            format!("cascade({},{})", receiver.name, driver.name),
            n1 + n2,
            m2,
            move |x, w, out| {
                f1(&x[..n1], &x[n1..], &mut out[..n1]);
                f2(&x[n1..], w, &mut out[n1..]);
            },
        ))
    }

    /// Feedback loop with no exogenous input: each side's state feeds the
    /// other's input. State is `[x_first, x_second]`.
    ///
    /// # Errors
    ///
    /// [`GainError::Dimension`] unless the input of each side matches the
    /// state of the other.
    pub fn feedback_no_input(first: &Self, second: &Self) -> Result<Self, GainError> {
        if first.input_dim != second.state_dim {
            return Err(GainError::Dimension {
                expected: first.input_dim,
                got: second.state_dim,
            });
        }
        if second.input_dim != first.state_dim {
            return Err(GainError::Dimension {
                expected: second.input_dim,
                got: first.state_dim,
            });
        }
        let n1 = first.state_dim;
        let (f1, f2) = (first.field.clone(), second.field.clone());
        Ok(Self::new(
            format!("feedback({},{})", first.name, second.name),
            n1 + second.state_dim,
            0,
            move |x, _w, out| {
                f1(&x[..n1], &x[n1..], &mut out[..n1]);
                f2(&x[n1..], &x[..n1], &mut out[n1..]);
            },
        ))
    }

    /// Feedback loop with additive exogenous inputs: side `i` sees the other
    /// side's state plus its own exogenous channel. Input is
    /// `[eta_first, eta_second]`.
    ///
    /// # Errors
    ///
    /// Same dimension requirements as [`SystemModel::feedback_no_input`].
    pub fn feedback_with_inputs(first: &Self, second: &Self) -> Result<Self, GainError> {
        if first.input_dim != second.state_dim {
            return Err(GainError::Dimension {
                expected: first.input_dim,
                got: second.state_dim,
            });
        }
        if second.input_dim != first.state_dim {
            return Err(GainError::Dimension {
                expected: second.input_dim,
                got: first.state_dim,
            });
        }
        let (n1, m1) = (first.state_dim, first.input_dim);
        let m2 = second.input_dim;
        let (f1, f2) = (first.field.clone(), second.field.clone());
        Ok(Self::new(
            format!("feedback_forced({},{})", first.name, second.name),
            n1 + second.state_dim,
            m1 + m2,
            move |x, w, out| {
                let mut w1 = Vec::with_capacity(m1);
                for i in 0..m1 {
                    w1.push(x[n1 + i] + w[i]);
                }
                let mut w2 = Vec::with_capacity(m2);
                for i in 0..m2 {
                    w2.push(x[i] + w[m1 + i]);
                }
                f1(&x[..n1], &w1, &mut out[..n1]);
                f2(&x[n1..], &w2, &mut out[n1..]);
            },
        ))
    }
}

/// Exogenous input as a function of time.
#[derive(Clone)]
pub enum InputSignal {
    /// `w(t) = 0`.
    Zero,
    /// `w(t) = value` for all `t`.
    Constant(Vec<f64>),
    /// Right-continuous steps: `values[0]` holds on `[0, switch_times[0])`,
    /// `values[i]` on `[switch_times[i-1], switch_times[i])`, and the last
    /// value from the last switch onward.
    PiecewiseConstant {
        switch_times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    /// Named closure writing `w(t)`.
    Custom {
        name: String,
        waveform: Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>,
    },
}

impl core::fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InputSignal::Zero => f.write_str("Zero"),
            InputSignal::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InputSignal::PiecewiseConstant { switch_times, values } => f
                .debug_struct("PiecewiseConstant")
                .field("switch_times", switch_times)
                .field("values", values)
                .finish(),
            InputSignal::Custom { name, .. } => f.debug_tuple("Custom").field(name).finish(),
        }
    }
}

impl InputSignal {
    /// Checks the signal against an input dimension `m`.
    ///
    /// # Errors
    ///
    /// [`GainError::Dimension`] on value-length mismatches,
    /// [`GainError::Domain`] for empty, non-finite, or non-increasing switch
    /// structure.
    pub fn validate(&self, m: usize) -> Result<(), GainError> {
        match self {
            InputSignal::Zero | InputSignal::Custom { .. } => Ok(()),
            InputSignal::Constant(v) => {
                if v.len() != m {
                    return Err(GainError::Dimension {
                        expected: m,
                        got: v.len(),
                    });
                }
                Ok(())
            }
            InputSignal::PiecewiseConstant {
                switch_times,
                values,
            } => {
                if values.len() != switch_times.len() + 1 {
                    return Err(GainError::Domain(format!(
                        "piecewise signal needs {} values for {} switches, got {}",
                        switch_times.len() + 1,
                        switch_times.len(),
                        values.len()
                    )));
                }
                for v in values {
                    if v.len() != m {
                        return Err(GainError::Dimension {
                            expected: m,
                            got: v.len(),
                        });
                    }
                }
                let mut prev = 0.0;
                for &t in switch_times {
                    if !t.is_finite() || t <= prev {
                        return Err(GainError::Domain(format!(
                            "switch times must be finite and strictly increasing from 0, got {t} after {prev}"
                        )));
                    }
                    prev = t;
                }
                Ok(())
            }
        }
    }

    /// Writes `w(t)` into `out`; `out.len()` fixes the dimension.
    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        match self {
            InputSignal::Zero => out.fill(0.0),
            InputSignal::Constant(v) => out.copy_from_slice(v),
            InputSignal::PiecewiseConstant {
                switch_times,
                values,
            } => {
                let seg = switch_times.partition_point(|&s| s <= t);
                out.copy_from_slice(&values[seg]);
            }
            InputSignal::Custom { waveform, .. } => {
                out.fill(0.0);
                waveform(t, out);
            }
        }
    }
}

/// A uniformly sampled solution record: states and the inputs that produced
/// them, both at `t_k = k dt` for `k = 0..=steps`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    model: String,
    dt: f64,
    states: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
    state_dim: usize,
    input_dim: usize,
}

impl Trajectory {
    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k]
    }

    /// Euclidean state norms at every grid point.
    pub fn state_norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| math::norm(x)).collect()
    }

    /// Euclidean input norms at every grid point.
    pub fn input_norms(&self) -> Vec<f64> {
        self.inputs.iter().map(|w| math::norm(w)).collect()
    }

    /// True if any stored input sample is nonzero.
    pub fn has_nonzero_input(&self) -> bool {
        self.inputs.iter().any(|w| w.iter().any(|&v| v != 0.0))
    }
}

/// Integrates `model` from `x0` under `input` on `[0, t_end]` with classical
/// RK4 at fixed step `dt`. The input is sampled at the left endpoint of each
/// step and held constant through the step.
///
/// # Errors
///
/// * [`GainError::Dimension`] / [`GainError::Domain`] for bad arguments.
/// * [`GainError::Diverged`] when the state norm exceeds [`BLOWUP_NORM`] or
///   stops being finite; the reported time is the end of the offending step.
pub fn integrate(
    model: &SystemModel,
    x0: &[f64],
    input: &InputSignal,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, GainError> {
    let n = model.state_dim();
    let m = model.input_dim();
    if x0.len() != n {
        return Err(GainError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GainError::Domain(format!("step size must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(GainError::Domain(format!(
            "horizon must be nonnegative, got {t_end}"
        )));
    }
    input.validate(m)?;
    for &v in x0 {
        if !v.is_finite() {
            return Err(GainError::Domain("initial state must be finite".to_string()));
        }
    }

    let steps = libround(t_end / dt);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut w = vec![0.0; m];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    input.sample_into(0.0, &mut w);
    states.push(x.clone());
    inputs.push(w.clone());

    for k in 0..steps {
        let t = k as f64 * dt;
        input.sample_into(t, &mut w);
        (model.field)(&x, &w, &mut k1);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        (model.field)(&stage, &w, &mut k2);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        (model.field)(&stage, &w, &mut k3);
        for i in 0..n {
            stage[i] = x[i] + dt * k3[i];
        }
        (model.field)(&stage, &w, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = math::norm(&x);
        if !norm.is_finite() || norm > BLOWUP_NORM {
            return Err(GainError::Diverged { t: (k + 1) as f64 * dt });
        }
        input.sample_into((k + 1) as f64 * dt, &mut w);
        states.push(x.clone());
        inputs.push(w.clone());
    }

    Ok(Trajectory {
        model: model.name().to_string(),
        dt,
        states,
        inputs,
        state_dim: n,
        input_dim: m,
    })
}

/// `round` without the std intrinsic so the crate stays `no_std`-clean.
fn libround(v: f64) -> usize {
    if v <= 0.0 {
        0
    } else {
        (v + 0.5) as usize
    }
}

/// Trapezoid integral of uniformly sampled values.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

/// Running trapezoid integral: `out[k] = ∫` over the first `k` intervals.
pub fn trapezoid_prefix(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * dt * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Truncated squared L2 norm `∫ |x|² dτ` over the whole record.
pub fn truncated_l2_sq(traj: &Trajectory) -> f64 {
    let sq: Vec<f64> = traj.state_norms().iter().map(|v| v * v).collect();
    trapezoid(&sq, traj.dt())
}

/// Closed-form solution of `dx/dt = -x³`: returns
/// `(x(t), ∫₀ᵗ x² dτ) = (x0 / sqrt(1 + 2 x0² t), ln(1 + 2 x0² t) / 2)`.
pub fn closed_form_ex1(x0: f64, t: f64) -> (f64, f64) {
    let d = 1.0 + 2.0 * x0 * x0 * t;
    (x0 / math::sqrt(d), 0.5 * math::ln(d))
}

/// Tail convergence test: true when `max |x(t)|` over the trailing `window`
/// fraction of the record is at most `threshold * |x(0)|`.
///
/// # Errors
///
/// [`GainError::Domain`] unless `0 < window <= 1` and `threshold >= 0`.
pub fn convergence_check(
    traj: &Trajectory,
    window: f64,
    threshold: f64,
) -> Result<bool, GainError> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(GainError::Domain(format!(
            "window must lie in (0, 1], got {window}"
        )));
    }
    if !(threshold >= 0.0) {
        return Err(GainError::Domain(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let norms = traj.state_norms();
    let tail_len = ((norms.len() as f64) * window) as usize;
    let tail_start = norms.len() - tail_len.clamp(1, norms.len());
    let worst = norms[tail_start..]
        .iter()
        .fold(0.0_f64, |acc, &v| if v > acc { v } else { acc });
    Ok(worst <= threshold * norms[0])
}

/// Result of checking one certificate against one trajectory at every
/// truncation time on the grid.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    /// True when the worst margin is within tolerance.
    pub pass: bool,
    /// `min_k (rhs_k - lhs_k)`; negative values mean the measured integral
    /// exceeded the certified bound.
    pub worst_margin: f64,
    /// Grid time attaining the worst margin.
    pub worst_time: f64,
    /// Measured side at the worst time.
    pub lhs_at_worst: f64,
    /// Certified side at the worst time.
    pub rhs_at_worst: f64,
    /// Relative tolerance the verdict used.
    pub tol: f64,
    /// Number of grid comparisons.
    pub samples: usize,
}

/// Compares a certificate's bound against a trajectory at every grid time.
///
/// The measured side accumulates the certificate's state integrand by the
/// trapezoid rule; the certified side combines `β(|x(0)|)` with the input
/// term evaluated at the accumulated input integrand. One evaluation cache
/// persists across grid points, so inverse-bearing gain trees are re-solved
/// from warm brackets along the monotone input-integral sweep.
///
/// # Errors
///
/// [`GainError::Incompatible`] when the certificate has no input channel but
/// the trajectory carries a nonzero input.
pub fn verify_certificate(
    cert: &Certificate,
    traj: &Trajectory,
    tol: f64,
) -> Result<EstimateReport, GainError> {
    if !cert.kind().has_input() && traj.has_nonzero_input() {
        return Err(GainError::Incompatible(format!(
            "{:?} certificate carries no input channel but the trajectory is forced",
            cert.kind()
        )));
    }
    let mut cache = EvalCache::new();
    let x_norms = traj.state_norms();
    let w_norms = traj.input_norms();

    let state_vals: Vec<f64> = x_norms
        .iter()
        .map(|&v| cert.state_integrand_cached(v, &mut cache))
        .collect();
    let lhs = trapezoid_prefix(&state_vals, traj.dt());

    let input_vals: Vec<f64> = w_norms
        .iter()
        .map(|&v| cert.input_integrand_cached(v, &mut cache))
        .collect();
    let input_integral = trapezoid_prefix(&input_vals, traj.dt());

    let beta0 = cert.beta().eval_cached(x_norms[0], &mut cache);

    let mut worst_margin = f64::INFINITY;
    let mut worst_k = 0;
    let mut rhs_at_worst = beta0;
    for k in 0..lhs.len() {
        let term = cert.input_term_cached(input_integral[k], &mut cache);
        let rhs = match cert.mode() {
            CombineMode::Max => {
                if beta0 > term {
                    beta0
                } else {
                    term
                }
            }
            CombineMode::Sum => beta0 + term,
        };
        let margin = rhs - lhs[k];
        if margin < worst_margin {
            worst_margin = margin;
            worst_k = k;
            rhs_at_worst = rhs;
        }
    }
    let scale = if rhs_at_worst > 1.0 { rhs_at_worst } else { 1.0 };
    Ok(EstimateReport {
        pass: worst_margin >= -tol * scale,
        worst_margin,
        worst_time: traj.time(worst_k),
        lhs_at_worst: lhs[worst_k],
        rhs_at_worst,
        tol,
        samples: lhs.len(),
    })
}

/// Maps every state row (and optionally every input row) of a trajectory
/// through coordinate transforms, preserving the grid. Used to verify a
/// transformed certificate against trajectories of the original model.
///
/// # Errors
///
/// Propagates transform dimension or inversion errors.
pub fn map_trajectory(
    traj: &Trajectory,
    state: &CoordinateTransform,
    input: Option<&CoordinateTransform>,
) -> Result<Trajectory, GainError> {
    let mut states = Vec::with_capacity(traj.len());
    for row in &traj.states {
        states.push(state.apply(row)?);
    }
    let mut inputs = Vec::with_capacity(traj.len());
    for row in &traj.inputs {
        match input {
            Some(tr) => inputs.push(tr.apply(row)?),
            None => inputs.push(row.clone()),
        }
    }
    Ok(Trajectory {
        model: format!("{}:{}", state.name(), traj.model),
        dt: traj.dt,
        states,
        inputs,
        state_dim: traj.state_dim,
        input_dim: traj.input_dim,
    })
}

/// Random-batch specification for [`monte_carlo_verify`].
///
/// Draw `i` seeds its own generator with `seed + i`; initial-state
/// coordinates are uniform on `x0_range`, and (for forced models) the input
/// is piecewise constant with `switches` uniform switch times and values
/// uniform on `input_amplitude`.
#[derive(Clone, Debug)]
pub struct SamplerSpec {
    pub trajectories: usize,
    pub x0_range: (f64, f64),
    pub input_amplitude: (f64, f64),
    pub switches: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            trajectories: 200,
            x0_range: (-1.0, 1.0),
            input_amplitude: (-1.0, 1.0),
            switches: 4,
            t_end: 10.0,
            dt: DEFAULT_DT,
            seed: 0,
            tol: DEFAULT_VERIFY_TOL,
        }
    }
}

/// Outcome of a seeded verification batch.
///
/// Diverged draws count against the pass rate but are listed separately so a
/// blow-up is distinguishable from a violated bound. An empty batch reports
/// `no_evidence` with a zero pass rate rather than a vacuous pass.
#[derive(Clone, Debug)]
pub struct MonteCarloReport {
    pub total: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// Smallest per-trajectory worst margin over non-diverged draws;
    /// `+inf` when every draw diverged or the batch was empty.
    pub worst_margin: f64,
    /// Seed of the draw attaining `worst_margin`.
    pub worst_seed: Option<u64>,
    /// Seeds whose bound comparison failed.
    pub failing_seeds: Vec<u64>,
    /// Seeds whose integration aborted.
    pub diverged_seeds: Vec<u64>,
    pub no_evidence: bool,
}

enum DrawOutcome {
    Checked { pass: bool, margin: f64 },
    Diverged,
}

fn run_draw(
    model: &SystemModel,
    cert: &Certificate,
    spec: &SamplerSpec,
    index: usize,
) -> Result<DrawOutcome, GainError> {
    let seed = spec.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.state_dim();
    let m = model.input_dim();

    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        x0.push(rng.gen_range(spec.x0_range.0..=spec.x0_range.1));
    }

    let input = if m == 0 {
        InputSignal::Zero
    } else {
        let mut times: Vec<f64> = (0..spec.switches)
            .map(|_| rng.gen_range(0.0..spec.t_end))
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite switch times"));
        times.dedup();
        times.retain(|&t| t > 0.0);
        let mut values = Vec::with_capacity(times.len() + 1);
        for _ in 0..=times.len() {
            let mut v = Vec::with_capacity(m);
            for _ in 0..m {
                v.push(rng.gen_range(spec.input_amplitude.0..=spec.input_amplitude.1));
            }
            values.push(v);
        }
        InputSignal::PiecewiseConstant {
            switch_times: times,
            values,
        }
    };

    match integrate(model, &x0, &input, spec.t_end, spec.dt) {
        Ok(traj) => {
            let report = verify_certificate(cert, &traj, spec.tol)?;
            Ok(DrawOutcome::Checked {
                pass: report.pass,
                margin: report.worst_margin,
            })
        }
        Err(GainError::Diverged { .. }) => Ok(DrawOutcome::Diverged),
        Err(e) => Err(e),
    }
}

#[cfg(feature = "std")]
fn run_all_draws(
    model: &SystemModel,
    cert: &Certificate,
    spec: &SamplerSpec,
) -> Result<Vec<DrawOutcome>, GainError> {
    let total = spec.trajectories;
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(total.max(1))
        .min(16);
    if workers <= 1 {
        return (0..total).map(|i| run_draw(model, cert, spec, i)).collect();
    }
    let mut per_worker: Vec<Vec<(usize, DrawOutcome)>> = Vec::new();
    let results: Result<(), GainError> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                let mut i = w;
                while i < total {
                    match run_draw(model, cert, spec, i) {
                        Ok(out) => local.push((i, out)),
                        Err(e) => return Err(e),
                    }
                    i += workers;
                }
                Ok(local)
            }));
        }
        for h in handles {
            per_worker.push(h.join().expect("verification worker panicked")?);
        }
        Ok(())
    });
    results?;
    let mut merged: Vec<Option<DrawOutcome>> = (0..total).map(|_| None).collect();
    for chunk in per_worker {
        for (i, out) in chunk {
            merged[i] = Some(out);
        }
    }
    Ok(merged
        .into_iter()
        .map(|o| o.expect("every index assigned to exactly one worker"))
        .collect())
}

#[cfg(not(feature = "std"))]
fn run_all_draws(
    model: &SystemModel,
    cert: &Certificate,
    spec: &SamplerSpec,
) -> Result<Vec<DrawOutcome>, GainError> {
    (0..spec.trajectories)
        .map(|i| run_draw(model, cert, spec, i))
        .collect()
}

/// Verifies a certificate against a batch of seeded random trajectories.
///
/// Results are deterministic in `spec` alone: each draw derives everything
/// from its per-draw seed, and merging is by draw index, so thread count and
/// scheduling cannot change the report.
///
/// # Errors
///
/// [`GainError::Domain`] for malformed sampler ranges; any
/// non-divergence integration or verification error propagates.
pub fn monte_carlo_verify(
    model: &SystemModel,
    cert: &Certificate,
    spec: &SamplerSpec,
) -> Result<MonteCarloReport, GainError> {
    if !(spec.x0_range.0 <= spec.x0_range.1)
        || !(spec.input_amplitude.0 <= spec.input_amplitude.1)
    {
        return Err(GainError::Domain(
            "sampler ranges must be ordered (lo <= hi)".to_string(),
        ));
    }
    if !(spec.t_end > 0.0) || !(spec.dt > 0.0) || !(spec.tol >= 0.0) {
        return Err(GainError::Domain(
            "sampler needs positive horizon and step and nonnegative tolerance".to_string(),
        ));
    }
    if spec.trajectories == 0 {
        return Ok(MonteCarloReport {
            total: 0,
            passed: 0,
            pass_rate: 0.0,
            worst_margin: f64::INFINITY,
            worst_seed: None,
            failing_seeds: Vec::new(),
            diverged_seeds: Vec::new(),
            no_evidence: true,
        });
    }

    let outcomes = run_all_draws(model, cert, spec)?;
    let mut passed = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut worst_seed = None;
    let mut failing_seeds = Vec::new();
    let mut diverged_seeds = Vec::new();
    for (i, out) in outcomes.iter().enumerate() {
        let seed = spec.seed.wrapping_add(i as u64);
        match out {
            DrawOutcome::Checked { pass, margin } => {
                if *margin < worst_margin {
                    worst_margin = *margin;
                    worst_seed = Some(seed);
                }
                if *pass {
                    passed += 1;
                } else {
                    failing_seeds.push(seed);
                }
            }
            DrawOutcome::Diverged => diverged_seeds.push(seed),
        }
    }
    Ok(MonteCarloReport {
        total: spec.trajectories,
        passed,
        pass_rate: passed as f64 / spec.trajectories as f64,
        worst_margin,
        worst_seed,
        failing_seeds,
        diverged_seeds,
        no_evidence: false,
    })
}

/// A simulated violation of a claimed linear-gain L2 estimate on the
/// bilinear model.
#[derive(Clone, Debug)]
pub struct Counterexample {
    /// Initial state, chosen so that `β̂(x0) = 1`.
    pub x0: f64,
    /// First accepted horizon.
    pub t_star: f64,
    /// The constant input driving the witness.
    pub input_value: f64,
    /// Measured `‖x‖²` on `[0, t_star]`.
    pub lhs: f64,
    /// Claimed `β̂(x0) + γ̄² ‖w‖²` at the same horizon.
    pub rhs: f64,
    /// The witness trajectory.
    pub trajectory: Trajectory,
}

/// Searches for a witness against the claim
/// `‖x‖² ≤ β̂(|x(0)|) + γ̄² ‖w‖²` on `dx/dt = -x + x w`.
///
/// With `x0 = β̂⁻¹(1)` and `w ≡ 2` the exact solution is `x0 eᵗ`, so
/// `‖x‖² = x0² (e^{2t} - 1) / 2` while the claim grows linearly in `t`. The
/// scan advances the horizon in steps of 0.25 and accepts the first `t` where
/// the analytic test `1 + 2 γ̄² t < x0² (e^{2t} - 1) / 4` holds and the
/// simulated comparison (with the measured `‖w‖²`) confirms `lhs > rhs`;
/// requiring four times the claim analytically leaves the simulated witness a
/// wide margin.
///
/// # Errors
///
/// * [`GainError::Precondition`] unless `β̂` certifies as class K-infinity.
/// * [`GainError::Domain`] for a negative or non-finite `γ̄`.
/// * [`GainError::Range`] when no horizon up to the scan cap is accepted.
pub fn falsify_linear_l2_bilinear(
    beta_hat: &ScalarGainFn,
    gamma_bar: f64,
    dt: f64,
) -> Result<Counterexample, GainError> {
    if !beta_hat.certify_default().verdict() {
        return Err(GainError::Precondition(
            "claimed transient bound must certify as class K-infinity".to_string(),
        ));
    }
    if !(gamma_bar >= 0.0) || !gamma_bar.is_finite() {
        return Err(GainError::Domain(format!(
            "claimed gain must be finite and nonnegative, got {gamma_bar}"
        )));
    }
    let x0 = inverse_eval(beta_hat, 1.0)?;
    let model = SystemModel::ex3_bilinear();
    let input_value = 2.0;
    let gg = gamma_bar * gamma_bar;

    for step in 1..=FALSIFY_MAX_STEPS {
        let t = FALSIFY_STEP * step as f64;
        let growth = 0.25 * x0 * x0 * (math::exp(2.0 * t) - 1.0);
        if !(1.0 + 2.0 * gg * t < growth) {
            continue;
        }
        let input = InputSignal::Constant(vec![input_value]);
        let traj = integrate(&model, &[x0], &input, t, dt)?;
        let lhs = truncated_l2_sq(&traj);
        let w_sq: Vec<f64> = traj.input_norms().iter().map(|v| v * v).collect();
        let rhs = beta_hat.eval_extended(x0) + gg * trapezoid(&w_sq, traj.dt());
        if lhs > rhs {
            return Ok(Counterexample {
                x0,
                t_star: t,
                input_value,
                lhs,
                rhs,
                trajectory: traj,
            });
        }
    }
    Err(GainError::Range(format!(
        "no violation found up to t = {}: claimed estimate held on every scanned horizon",
        FALSIFY_STEP * FALSIFY_MAX_STEPS as f64
    )))
}
