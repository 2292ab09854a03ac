//! Built-in acceptance suite: nine end-to-end checks covering the closed-form
//! oracle, long-horizon growth, Monte Carlo certificate verification,
//! falsification, the gain-calculus lemmas, the small-gain boundary, and the
//! soundness of composition and equivalence constructions.
//!
//! Every check is deterministic (fixed seeds) and prints one pass/fail line.

use std::time::Instant;

use gaincert_core::certificates::{iss_to_linear_l2, nonlinear_l2_to_iiss};
use gaincert_core::gainfn::{rho_surplus, sum_lower_envelope, weak_triangle_bound, young_split};
use gaincert_core::interconnect::{
    cascade_iiss_direct, cascade_nl2, feedback_nl2_max, feedback_nl2_no_input,
};
use gaincert_core::simulate::{
    falsify_linear_l2_bilinear, integrate, map_trajectory, monte_carlo_verify, trapezoid,
    trapezoid_prefix, truncated_l2_sq, verify_certificate,
};
use gaincert_core::transforms::{build_lower, build_upper, RadiusGrid};
use gaincert_core::{
    Certificate, CombineMode, GainError, InputSignal, Outcome, SamplerSpec, ScalarGainFn,
    SmallGainParams, SystemModel,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::commands::sample_draw;
use crate::config::Settings;

/// One criterion's outcome.
pub struct Criterion {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(bool, String), GainError>;

/// Runs all nine criteria in order, printing one line per criterion unless
/// `quiet`.
pub fn run_all(quiet: bool) -> Vec<Criterion> {
    let checks: [(&'static str, Check); 9] = [
        ("closed-form cubic decay", c1_closed_form),
        ("unbounded vs transformed decay", c2_growth_and_decay),
        ("transformed linear-gain batch", c3_transformed_linear_gain),
        ("bilinear nonlinear-gain batch", c4_bilinear_gain),
        ("linear-gain claim falsified", c5_falsification),
        ("gain-calculus lemma suites", c6_lemma_suites),
        ("small-gain boundary grid", c7_small_gain_grid),
        ("interconnection soundness", c8_interconnections),
        ("equivalence soundness", c9_equivalence),
    ];
    checks
        .into_iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let t0 = Instant::now();
            let (pass, detail) = match check() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            let seconds = t0.elapsed().as_secs_f64();
            let c = Criterion { index: i + 1, name, pass, detail, seconds };
            if !quiet {
                println!(
                    "criterion {} {}: {} ({:.2}s) {}",
                    c.index,
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.seconds,
                    c.detail
                );
            }
            c
        })
        .collect()
}

fn sq() -> ScalarGainFn {
    ScalarGainFn::power(2.0)
}

/// The true squared-norm estimate for `dx/dt = -x + x w`:
/// `beta(s) = s² + s⁴/2`, `gamma(s) = (eˢ - 1)²/2`, max combine.
fn bilinear_cert() -> Certificate {
    let beta = ScalarGainFn::sum(sq(), ScalarGainFn::post_scale(0.5, ScalarGainFn::power(4.0)));
    let gamma = ScalarGainFn::post_scale(
        0.5,
        ScalarGainFn::compose(sq(), ScalarGainFn::exp_minus_one()),
    );
    Certificate::nonlinear_l2(CombineMode::Max, beta, gamma)
}

/// The true estimate for `dx/dt = -x + b w` in max form.
fn linear1d_nl2_cert(b: f64) -> Certificate {
    Certificate::nonlinear_l2(
        CombineMode::Max,
        ScalarGainFn::post_scale(2.0, sq()),
        ScalarGainFn::linear(2.0 * b * b),
    )
}

/// The sharp integral estimate for `dx/dt = -x³ + w`:
/// `∫x⁴ ≤ x0² + 1.2 ∫|w|^{4/3}`.
fn forced_cubic_iss_cert() -> Certificate {
    Certificate::iss(
        CombineMode::Sum,
        ScalarGainFn::power(4.0),
        sq(),
        ScalarGainFn::post_scale(1.2, ScalarGainFn::power(4.0 / 3.0)),
    )
}

/// Criterion 1: the simulated truncated norm of the cubic decay matches the
/// closed form `½ ln 3` on `[0, 1]` at `dt = 1e-4`, in under a second.
fn c1_closed_form() -> Result<(bool, String), GainError> {
    let t0 = Instant::now();
    let traj = integrate(&SystemModel::ex1_cubic(), &[1.0], &InputSignal::Zero, 1.0, 1e-4)?;
    let measured = truncated_l2_sq(&traj);
    let elapsed = t0.elapsed().as_secs_f64();
    let exact = 0.5 * 3.0f64.ln();
    let rel = ((measured - exact) / exact).abs();
    Ok((
        rel <= 1e-5 && elapsed < 1.0,
        format!("rel err {rel:.2e} vs ½ln3, sim {elapsed:.3}s"),
    ))
}

/// Criterion 2: the cubic decay's truncated norm exceeds 4.9 by `t = 1e4`
/// (no plain transient bound exists), while in the well coordinate the same
/// motion obeys `∫|z|² ≤ ½|z(0)|²` on every grid prefix.
fn c2_growth_and_decay() -> Result<(bool, String), GainError> {
    let traj = integrate(&SystemModel::ex1_cubic(), &[1.0], &InputSignal::Zero, 1e4, 1e-2)?;
    let grown = truncated_l2_sq(&traj);

    let z0 = (-0.5f64).exp();
    let ztraj = integrate(
        &SystemModel::ex1_transformed(),
        &[z0],
        &InputSignal::Zero,
        20.0,
        1e-3,
    )?;
    let z_sq: Vec<f64> = ztraj.state_norms().iter().map(|v| v * v).collect();
    let prefix = trapezoid_prefix(&z_sq, ztraj.dt());
    let bound = 0.5 * z0 * z0 * (1.0 + 1e-6);
    let worst = prefix.iter().cloned().fold(0.0f64, f64::max);
    let bounded = prefix.iter().all(|&v| v <= bound);

    Ok((
        grown > 4.9 && bounded,
        format!("∫x² = {grown:.3} > 4.9; sup ∫z² = {worst:.6} ≤ {bound:.6}"),
    ))
}

/// Criterion 3: the transformed forced cubic holds its linear-gain estimate
/// `∫z² ≤ z0² + 4‖w‖²` across a 200-draw batch with amplitudes in [-2, 2].
fn c3_transformed_linear_gain() -> Result<(bool, String), GainError> {
    let cert = Certificate::linear_l2(CombineMode::Sum, sq(), 4.0)?;
    let spec = SamplerSpec {
        trajectories: 200,
        input_amplitude: (-2.0, 2.0),
        t_end: 20.0,
        ..SamplerSpec::default()
    };
    let report = monte_carlo_verify(&SystemModel::ex2_transformed(), &cert, &spec)?;
    Ok((
        report.pass_rate == 1.0 && report.diverged_seeds.is_empty(),
        format!(
            "{}/{} draws passed, worst margin {:.3e}",
            report.passed, report.total, report.worst_margin
        ),
    ))
}

/// Criterion 4: the bilinear squared-norm estimate holds across a 500-draw
/// batch with amplitudes in [-1.5, 1.5].
fn c4_bilinear_gain() -> Result<(bool, String), GainError> {
    let spec = SamplerSpec {
        trajectories: 500,
        input_amplitude: (-1.5, 1.5),
        t_end: 10.0,
        tol: 1e-6,
        ..SamplerSpec::default()
    };
    let report = monte_carlo_verify(&SystemModel::ex3_bilinear(), &bilinear_cert(), &spec)?;
    Ok((
        report.pass_rate == 1.0 && report.diverged_seeds.is_empty(),
        format!(
            "{}/{} draws passed, worst margin {:.3e}",
            report.passed, report.total, report.worst_margin
        ),
    ))
}

/// Criterion 5: the claimed linear-gain estimate `β̂(s) = s²`, `γ̄ = 1` on
/// the bilinear model is falsified from `x0 = 1` by `t* ≤ 3` with more than
/// 10% margin; the accepted horizon is consistent with the analytic test,
/// which first admits `t = 2` (claim 5 against growth ¼(e⁴−1) ≈ 13.4).
fn c5_falsification() -> Result<(bool, String), GainError> {
    let cx = falsify_linear_l2_bilinear(&sq(), 1.0, 1e-3)?;
    let margin = cx.lhs / cx.rhs - 1.0;
    let analytic_at_2 = 1.0 + 2.0 * 1.0 * 2.0 < 0.25 * (4.0f64.exp() - 1.0);
    let pass = (cx.x0 - 1.0).abs() <= 1e-6
        && cx.t_star <= 3.0
        && margin > 0.10
        && analytic_at_2;
    Ok((
        pass,
        format!(
            "x0 = {:.6}, t* = {}, margin {:.1}%, analytic test at t=2: {}",
            cx.x0,
            cx.t_star,
            100.0 * margin,
            analytic_at_2
        ),
    ))
}

/// Random class K-infinity expression trees over the closed grammar; every
/// constructor preserves the class, so generated trees are K-infinity by
/// construction.
fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> ScalarGainFn {
    if depth == 0 || rng.gen_bool(0.35) {
        match rng.gen_range(0..5) {
            0 => ScalarGainFn::identity(),
            1 => ScalarGainFn::power(rng.gen_range(0.5..3.0)),
            2 => ScalarGainFn::linear(rng.gen_range(0.1..10.0)),
            3 => ScalarGainFn::exp_minus_one(),
            _ => ScalarGainFn::log_one_plus(),
        }
    } else {
        let a = random_tree(rng, depth - 1);
        match rng.gen_range(0..6) {
            0 => ScalarGainFn::compose(a, random_tree(rng, depth - 1)),
            1 => ScalarGainFn::pointwise_max(a, random_tree(rng, depth - 1)),
            2 => ScalarGainFn::pointwise_min(a, random_tree(rng, depth - 1)),
            3 => ScalarGainFn::sum(a, random_tree(rng, depth - 1)),
            4 => ScalarGainFn::post_scale(rng.gen_range(0.1..10.0), a),
            _ => ScalarGainFn::pre_scale(rng.gen_range(0.1..10.0), a),
        }
    }
}

/// Axis gains for the diagonal transform families (kept invertible-friendly).
fn random_axis(rng: &mut ChaCha8Rng) -> ScalarGainFn {
    match rng.gen_range(0..5) {
        0 => ScalarGainFn::identity(),
        1 => ScalarGainFn::power(rng.gen_range(0.5..3.0)),
        2 => ScalarGainFn::linear(rng.gen_range(0.1..10.0)),
        3 => ScalarGainFn::log_one_plus(),
        _ => ScalarGainFn::post_scale(
            rng.gen_range(0.2..5.0),
            ScalarGainFn::power(rng.gen_range(0.5..2.0)),
        ),
    }
}

/// Runs one lemma suite to `cases` checked cases, skipping draws whose
/// hygiene preconditions fail (mirroring statistical-test assumptions).
/// Fails if the attempt budget runs out before enough cases check.
fn run_suite(
    name: &str,
    cases: usize,
    seed: u64,
    mut one: impl FnMut(&mut ChaCha8Rng) -> Option<bool>,
) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut attempts = 0usize;
    let budget = cases * 20;
    while checked < cases && attempts < budget {
        attempts += 1;
        match one(&mut rng) {
            Some(ok) => {
                checked += 1;
                if !ok {
                    violations += 1;
                }
            }
            None => {}
        }
    }
    if checked < cases {
        return (
            false,
            format!("{name}: only {checked}/{cases} cases checked in {attempts} attempts"),
        );
    }
    (violations == 0, format!("{name}: {violations} violations in {checked} cases"))
}

/// Criterion 6: five lemma suites at 10⁴ random cases each with zero
/// violations — envelope sandwich, weak triangle, sum lower envelope,
/// max/sum exchange, and the Young split on sampled signal pairs.
fn c6_lemma_suites() -> Result<(bool, String), GainError> {
    let cases = 10_000;
    let grid = RadiusGrid::default();

    // Envelope sandwich: lower(|z|) <= |T(z)| <= upper(|z|) for both
    // diagonal families on radii inside the grid.
    let sandwich = run_suite("sandwich", cases, 601, |rng| {
        let axis = random_axis(rng);
        let dim = rng.gen_range(1..5usize);
        let t = if rng.gen_bool(0.5) {
            build_lower(&axis, dim)
        } else {
            build_upper(&axis, dim)
        }
        .ok()?;
        let bounds = t.numeric_bounds(&grid).ok()?;
        let radius = 10f64.powf(rng.gen_range(-2.0..2.0));
        let mut z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        for v in &mut z {
            *v *= radius / norm;
        }
        let image = t.apply(&z).ok()?;
        let norm_t: f64 = image.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lo = bounds.lower.eval_extended(radius);
        let hi = bounds.upper.eval_extended(radius);
        Some(
            lo <= norm_t * (1.0 + 1e-9) + 1e-300 && norm_t <= hi * (1.0 + 1e-9) + 1e-300,
        )
    });

    // Weak triangle: gamma(a + b) <= max(gamma(rho(a)), gamma(mu(b))) for
    // rho = id + g with g K-infinity.
    let triangle = run_suite("weak triangle", cases, 602, |rng| {
        let gamma = random_tree(rng, 2);
        let g = random_tree(rng, 2);
        let rho = ScalarGainFn::sum(ScalarGainFn::identity(), g);
        if !gamma.certify_default().verdict() {
            return None;
        }
        if !rho_surplus(&rho).certify_default().verdict() {
            return None;
        }
        let a = rng.gen_range(0.0..50.0);
        let b = rng.gen_range(0.0..50.0);
        let lhs = gamma.eval_extended(a + b);
        if lhs >= 1e280 {
            return None;
        }
        let bound = weak_triangle_bound(&gamma, &rho, a, b).ok()?;
        Some(lhs <= bound * (1.0 + 1e-9) + 1e-12)
    });

    // Sum lower envelope: env(a + b) <= alpha1(a) + alpha2(b).
    let envelope = run_suite("lower envelope", cases, 603, |rng| {
        let a1 = random_tree(rng, 2);
        let a2 = random_tree(rng, 2);
        let env = sum_lower_envelope(&a1, &a2);
        let a = rng.gen_range(0.0..100.0);
        let b = rng.gen_range(0.0..100.0);
        let rhs = a1.eval_extended(a) + a2.eval_extended(b);
        if rhs >= 1e280 {
            return None;
        }
        Some(env.eval_extended(a + b) <= rhs * (1.0 + 1e-9) + 1e-12)
    });

    // Max/sum exchange: max(u, v) <= u + v <= max(2u, 2v).
    let exchange = run_suite("max/sum exchange", cases, 604, |rng| {
        let f = random_tree(rng, 2);
        let a = rng.gen_range(0.0..1e6);
        let b = rng.gen_range(0.0..1e6);
        let (fa, fb) = (f.eval_extended(a), f.eval_extended(b));
        if fa + fb >= 1e280 {
            return None;
        }
        Some(fa.max(fb) <= fa + fb && fa + fb <= (2.0 * fa).max(2.0 * fb))
    });

    // Young split on sampled signal pairs via the trapezoid functional.
    let young = run_suite("young split", cases, 605, |rng| {
        let len = rng.gen_range(2..64usize);
        let dt = rng.gen_range(1e-3..1.0);
        let eps = rng.gen_range(0.1..10.0);
        let mut sum_sq = Vec::with_capacity(len);
        let mut a_sq = Vec::with_capacity(len);
        let mut b_sq = Vec::with_capacity(len);
        for _ in 0..len {
            let a: f64 = rng.gen_range(-10.0..10.0);
            let b: f64 = rng.gen_range(-10.0..10.0);
            sum_sq.push((a + b) * (a + b));
            a_sq.push(a * a);
            b_sq.push(b * b);
        }
        let lhs = trapezoid(&sum_sq, dt);
        let rhs = young_split(trapezoid(&a_sq, dt), trapezoid(&b_sq, dt), eps).ok()?;
        Some(lhs <= rhs * (1.0 + 1e-9) + 1e-12)
    });

    let suites = [sandwich, triangle, envelope, exchange, young];
    let pass = suites.iter().all(|(ok, _)| *ok);
    let detail = suites.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join("; ");
    Ok((pass, detail))
}

/// Criterion 7: on the 10x10 grid of linear gain pairs `k_i = 0.2 i`, the
/// no-input feedback composition certifies exactly when `k1 k2 < 1`; the one
/// boundary point is excluded at margin 0.01.
fn c7_small_gain_grid() -> Result<(bool, String), GainError> {
    let mut checked = 0usize;
    let mut wrong = 0usize;
    for i in 1..=10 {
        for j in 1..=10 {
            let k1 = 0.2 * i as f64;
            let k2 = 0.2 * j as f64;
            if (k1 * k2 - 1.0).abs() < 0.01 {
                continue;
            }
            let c1 = Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::linear(k1));
            let c2 = Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::linear(k2));
            let out = feedback_nl2_no_input(&c1, &c2)?;
            if out.is_certified() != (k1 * k2 < 1.0) {
                wrong += 1;
            }
            checked += 1;
        }
    }
    Ok((
        wrong == 0 && checked == 99,
        format!("{checked} grid points classified, {wrong} misclassifications"),
    ))
}

fn certified(outcome: Outcome) -> Result<Certificate, GainError> {
    match outcome {
        Outcome::Certified(c) => Ok(c.certificate),
        Outcome::Failed(f) => Err(GainError::Precondition(format!("composition failed: {f}"))),
    }
}

/// Criterion 8: four composed certificates each hold on 200 simulated
/// interconnected trajectories at tolerance 1e-6, within 60 seconds total.
fn c8_interconnections() -> Result<(bool, String), GainError> {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut all = true;

    let batch = |model: &SystemModel,
                 cert: &Certificate,
                 x0: (f64, f64),
                 amp: (f64, f64),
                 seed: u64|
     -> Result<(bool, f64), GainError> {
        // Composed certificates carry nested numeric inverses, so each grid
        // point costs a warm bisection; dt = 4e-3 keeps the quadrature error
        // two orders below the observed margins while fitting the budget.
        let spec = SamplerSpec {
            trajectories: 200,
            x0_range: x0,
            input_amplitude: amp,
            t_end: 8.0,
            dt: 4e-3,
            seed,
            ..SamplerSpec::default()
        };
        let report = monte_carlo_verify(model, cert, &spec)?;
        Ok((
            report.pass_rate == 1.0 && report.diverged_seeds.is_empty(),
            report.worst_margin,
        ))
    };

    // Cascade of two stable linear subsystems.
    let receiver = SystemModel::linear1d(1.0, 0.5);
    let driver = SystemModel::linear1d(1.0, 0.2);
    let model = SystemModel::cascade(&receiver, &driver)?;
    let cert = certified(cascade_nl2(&linear1d_nl2_cert(0.5), &linear1d_nl2_cert(0.2))?)?;
    let (ok, margin) = batch(&model, &cert, (-2.0, 2.0), (-1.5, 1.5), 21)?;
    all &= ok;
    parts.push(format!("cascade_nl2 margin {margin:.2e}"));

    // Unforced feedback loop under the small-gain condition.
    let side = SystemModel::linear1d(1.0, 0.5);
    let model = SystemModel::feedback_no_input(&side, &side)?;
    let cert = certified(feedback_nl2_no_input(&linear1d_nl2_cert(0.5), &linear1d_nl2_cert(0.5))?)?;
    let (ok, margin) = batch(&model, &cert, (-2.0, 2.0), (0.0, 0.0), 33)?;
    all &= ok;
    parts.push(format!("feedback_nl2_no_input margin {margin:.2e}"));

    // Forced feedback loop in max form.
    let side = SystemModel::linear1d(1.0, 0.25);
    let model = SystemModel::feedback_with_inputs(&side, &side)?;
    let sub = linear1d_nl2_cert(0.25);
    let cert = certified(feedback_nl2_max(&sub, &sub, &SmallGainParams::default())?)?;
    let (ok, margin) = batch(&model, &cert, (-1.5, 1.5), (-1.0, 1.0), 45)?;
    all &= ok;
    parts.push(format!("feedback_nl2_max margin {margin:.2e}"));

    // Direct integral-form cascade: bilinear receiver fed by a forced
    // linear driver, inputs small enough to keep the loop contractive.
    let receiver_iiss = nonlinear_l2_to_iiss(&bilinear_cert())?;
    let driver_iiss = Certificate::iiss(
        CombineMode::Max,
        sq(),
        ScalarGainFn::post_scale(2.0, sq()),
        sq(),
        ScalarGainFn::linear(0.5),
    );
    let cert = certified(cascade_iiss_direct(&receiver_iiss, &driver_iiss, 1.0)?)?;
    let model = SystemModel::cascade(&SystemModel::ex3_bilinear(), &SystemModel::linear1d(1.0, 0.5))?;
    let (ok, margin) = batch(&model, &cert, (-0.75, 0.75), (-1.5, 1.5), 57)?;
    all &= ok;
    parts.push(format!("cascade_iiss_direct margin {margin:.2e}"));

    let elapsed = t0.elapsed().as_secs_f64();
    Ok((
        all && elapsed < 60.0,
        format!("{} ({elapsed:.1}s total)", parts.join(", ")),
    ))
}

/// Criterion 9: the linear-gain rebuild of the forced-cubic integral
/// estimate holds on 100 random trajectories mapped into the transformed
/// coordinates (states through the lower envelope transform, inputs through
/// the input-side transform).
fn c9_equivalence() -> Result<(bool, String), GainError> {
    let tc = iss_to_linear_l2(&forced_cubic_iss_cert(), 1.0, 1, 1)?;
    let model = SystemModel::ex2_cubic_forced();
    let s = Settings {
        dt: 1e-3,
        t_end: 20.0,
        seed: 0,
        trajectories: 100,
        tolerance: 1e-6,
        x0_range: [-2.0, 2.0],
        amplitude: [-2.0, 2.0],
        switches: 4,
    };
    let mut passed = 0usize;
    let mut worst = f64::INFINITY;
    for i in 0..s.trajectories {
        let (_, x0, input) = sample_draw(&model, &s, i);
        let traj = integrate(&model, &x0, &input, s.t_end, s.dt)?;
        let mapped = map_trajectory(&traj, &tc.state_transform, tc.input_transform.as_ref())?;
        let report = verify_certificate(&tc.certificate, &mapped, s.tolerance)?;
        if report.pass {
            passed += 1;
        }
        worst = worst.min(report.worst_margin);
    }
    Ok((
        passed == s.trajectories,
        format!("{passed}/{} transformed draws passed, worst margin {worst:.3e}", s.trajectories),
    ))
}
