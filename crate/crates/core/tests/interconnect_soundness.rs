//! Soundness of composed certificates: whenever a composition operation
//! certifies, the composed bound must hold on simulated trajectories of the
//! actual interconnected system. Also pins the small-gain boundary on a
//! linear-gain grid and the fixed-point property of the implicit solve.

use gaincert_core::certificates::nonlinear_l2_to_iiss;
use gaincert_core::interconnect::{
    cascade_iiss_direct, cascade_nl2, feedback_nl2_max, feedback_nl2_no_input, small_gain_solve,
    Outcome,
};
use gaincert_core::simulate::{integrate, monte_carlo_verify, InputSignal, SamplerSpec, SystemModel};
use gaincert_core::{Certificate, CombineMode, ScalarGainFn, SmallGainParams};
use proptest::prelude::*;

fn sq() -> ScalarGainFn {
    ScalarGainFn::power(2.0)
}

/// The true estimate for `dx/dt = -x + b w`: integrating `(x^2)' <= -x^2 +
/// b^2 w^2` gives `int x^2 <= x0^2 + b^2 int w^2`, doubled into max form.
fn linear1d_nl2_cert(b: f64) -> Certificate {
    Certificate::nonlinear_l2(
        CombineMode::Max,
        ScalarGainFn::post_scale(2.0, sq()),
        ScalarGainFn::linear(2.0 * b * b),
    )
}

fn certified(outcome: Outcome) -> Certificate {
    match outcome {
        Outcome::Certified(c) => c.certificate,
        Outcome::Failed(f) => panic!("composition failed: {f}"),
    }
}

#[test]
fn cascade_certificate_holds_on_cascade_trajectories() {
    let receiver = SystemModel::linear1d(1.0, 0.5);
    let driver = SystemModel::linear1d(1.0, 0.2);
    let model = SystemModel::cascade(&receiver, &driver).unwrap();
    let cert = certified(cascade_nl2(&linear1d_nl2_cert(0.5), &linear1d_nl2_cert(0.2)).unwrap());
    let spec = SamplerSpec {
        trajectories: 10,
        x0_range: (-2.0, 2.0),
        input_amplitude: (-1.5, 1.5),
        t_end: 8.0,
        seed: 21,
        ..SamplerSpec::default()
    };
    let report = monte_carlo_verify(&model, &cert, &spec).unwrap();
    assert_eq!(report.pass_rate, 1.0, "failing seeds {:?}", report.failing_seeds);
    assert!(report.worst_margin > 0.0);
}

#[test]
fn feedback_certificate_holds_on_loop_trajectories() {
    let side = SystemModel::linear1d(1.0, 0.5);
    let model = SystemModel::feedback_no_input(&side, &side).unwrap();
    let cert =
        certified(feedback_nl2_no_input(&linear1d_nl2_cert(0.5), &linear1d_nl2_cert(0.5)).unwrap());
    let spec = SamplerSpec {
        trajectories: 10,
        x0_range: (-2.0, 2.0),
        t_end: 8.0,
        seed: 33,
        ..SamplerSpec::default()
    };
    let report = monte_carlo_verify(&model, &cert, &spec).unwrap();
    assert_eq!(report.pass_rate, 1.0, "failing seeds {:?}", report.failing_seeds);
}

#[test]
fn forced_feedback_certificate_holds_on_forced_loop_trajectories() {
    let side = SystemModel::linear1d(1.0, 0.25);
    let model = SystemModel::feedback_with_inputs(&side, &side).unwrap();
    let sub = linear1d_nl2_cert(0.25);
    let cert = certified(feedback_nl2_max(&sub, &sub, &SmallGainParams::default()).unwrap());
    let spec = SamplerSpec {
        trajectories: 10,
        x0_range: (-1.5, 1.5),
        input_amplitude: (-1.0, 1.0),
        t_end: 8.0,
        seed: 45,
        ..SamplerSpec::default()
    };
    let report = monte_carlo_verify(&model, &cert, &spec).unwrap();
    assert_eq!(report.pass_rate, 1.0, "failing seeds {:?}", report.failing_seeds);
}

#[test]
fn direct_iiss_cascade_certificate_holds_on_bilinear_cascade() {
    // Receiver: the bilinear model driven by the driver's state; its curved
    // estimate comes from the squared-norm certificate. Driver: the linear
    // model under exogenous forcing. Inputs stay small enough that the
    // driver state remains below 1, keeping the bilinear loop contractive.
    let beta1 = ScalarGainFn::sum(sq(), ScalarGainFn::post_scale(0.5, ScalarGainFn::power(4.0)));
    let gamma1 = ScalarGainFn::post_scale(
        0.5,
        ScalarGainFn::compose(sq(), ScalarGainFn::exp_minus_one()),
    );
    let receiver_nl2 = Certificate::nonlinear_l2(CombineMode::Max, beta1, gamma1);
    let receiver_iiss = nonlinear_l2_to_iiss(&receiver_nl2).unwrap();
    let driver_iiss = Certificate::iiss(
        CombineMode::Max,
        sq(),
        ScalarGainFn::post_scale(2.0, sq()),
        sq(),
        ScalarGainFn::linear(0.5),
    );
    let cert = certified(cascade_iiss_direct(&receiver_iiss, &driver_iiss, 1.0).unwrap());

    let model = SystemModel::cascade(
        &SystemModel::ex3_bilinear(),
        &SystemModel::linear1d(1.0, 0.5),
    )
    .unwrap();
    let spec = SamplerSpec {
        trajectories: 10,
        x0_range: (-0.75, 0.75),
        input_amplitude: (-1.5, 1.5),
        t_end: 8.0,
        seed: 57,
        ..SamplerSpec::default()
    };
    let report = monte_carlo_verify(&model, &cert, &spec).unwrap();
    assert_eq!(report.pass_rate, 1.0, "failing seeds {:?}", report.failing_seeds);
    assert!(report.diverged_seeds.is_empty());
}

#[test]
fn linear_gain_grid_matches_small_gain_boundary() {
    // gamma_i = k_i s: the loop certifies exactly when k1 k2 < 1. Points
    // within 0.01 of the boundary are excluded from classification.
    let mut checked = 0;
    for i in 1..=10 {
        for j in 1..=10 {
            let k1 = 0.2 * i as f64;
            let k2 = 0.2 * j as f64;
            if (k1 * k2 - 1.0).abs() < 0.01 {
                continue;
            }
            let c1 = Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::linear(k1));
            let c2 = Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::linear(k2));
            let out = feedback_nl2_no_input(&c1, &c2).unwrap();
            let expect = k1 * k2 < 1.0;
            assert_eq!(
                out.is_certified(),
                expect,
                "k1 = {k1}, k2 = {k2}: expected certified = {expect}, got {:?}",
                out.failure()
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 99);
}

#[test]
fn composed_loop_gains_grow_monotonically() {
    // The composed transient and gain functions are monotone on a grid, and
    // grow pointwise when a subsystem gain grows.
    let cert = |k: f64| Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::linear(k));
    let small = certified(feedback_nl2_no_input(&cert(0.3), &cert(0.3)).unwrap());
    let large = certified(feedback_nl2_no_input(&cert(0.6), &cert(0.6)).unwrap());
    let mut s = 1e-2;
    let mut prev = 0.0;
    while s <= 1e3 {
        let b_small = small.beta().eval_extended(s);
        let b_large = large.beta().eval_extended(s);
        assert!(b_small >= prev, "beta not monotone at {s}");
        assert!(
            b_small <= b_large * (1.0 + 1e-9),
            "larger loop gain shrank the bound at {s}"
        );
        prev = b_small;
        s *= 1.9;
    }
}

#[test]
fn diverging_loop_is_not_certified_and_diverges() {
    // The grid answers "no certificate" for k1 k2 > 1, and the matching
    // linear loop genuinely has an unstable mode: a = 1, b = 1.5 couples to
    // eigenvalue b - a = 0.5 > 0.
    let c = Certificate::nonlinear_l2(CombineMode::Max, sq(), ScalarGainFn::linear(2.0 * 1.5 * 1.5));
    let out = feedback_nl2_no_input(&c, &c).unwrap();
    assert!(!out.is_certified());

    let side = SystemModel::linear1d(1.0, 1.5);
    let model = SystemModel::feedback_no_input(&side, &side).unwrap();
    let run = integrate(&model, &[1.0, 1.0], &InputSignal::Zero, 80.0, 1e-2);
    assert!(matches!(run, Err(gaincert_core::GainError::Diverged { .. })));
}

proptest! {
    /// The small-gain solve is the exact fixed point of its implicit bound:
    /// `u(s) = a(s) + g(u(s))` for `u = (id - g)^{-1} . a`.
    #[test]
    fn small_gain_solve_is_a_fixed_point(
        q in 0.05..0.9f64,
        p in 0.5..2.5f64,
        scale in 0.1..5.0f64,
        s in 1e-3..1e3f64,
    ) {
        let a = ScalarGainFn::post_scale(scale, ScalarGainFn::power(p));
        let g = ScalarGainFn::post_scale(q, ScalarGainFn::identity());
        let u = small_gain_solve(&a, &g).unwrap();
        let us = u.eval_extended(s);
        prop_assume!(us < 1e280);
        let residual = us - (a.eval_extended(s) + g.eval_extended(us));
        prop_assert!(
            residual.abs() <= 1e-6 * us.max(1.0),
            "fixed point defect {residual} at s = {s}"
        );
    }

    /// Same fixed-point identity for a curved, saturating loop gain.
    #[test]
    fn small_gain_solve_fixed_point_curved(
        q in 0.05..0.45f64,
        c in 0.5..2.0f64,
        s in 1e-3..1e3f64,
    ) {
        let a = ScalarGainFn::sum(ScalarGainFn::identity(), ScalarGainFn::power(2.0));
        // g(u) = q ln(1 + c u): slope q c < 0.9 < 1, so id - g certifies.
        let g = ScalarGainFn::post_scale(q, ScalarGainFn::pre_scale(c, ScalarGainFn::log_one_plus()));
        let u = small_gain_solve(&a, &g).unwrap();
        let us = u.eval_extended(s);
        prop_assume!(us < 1e280);
        let residual = us - (a.eval_extended(s) + g.eval_extended(us));
        prop_assert!(
            residual.abs() <= 1e-6 * us.max(1.0),
            "fixed point defect {residual} at s = {s}"
        );
    }
}
