//! End-to-end soundness of certificate conversions: every conversion output
//! must hold on simulated trajectories (transformed where the conversion
//! changes coordinates), and combine-mode conversions must agree on
//! verdicts.

use gaincert_core::certificates::{
    alpha_integrable_to_l2, iss_to_linear_l2, l2_to_alpha_integrable, max_to_sum,
    nonlinear_l2_to_iiss, sum_to_max, TransformedCertificate,
};
use gaincert_core::simulate::{
    integrate, map_trajectory, truncated_l2_sq, verify_certificate, InputSignal, SystemModel,
    Trajectory,
};
use gaincert_core::{Certificate, CombineMode, ScalarGainFn};

fn sq() -> ScalarGainFn {
    ScalarGainFn::power(2.0)
}

/// The sharp estimate for `dx/dt = -x^3 + w`, from `V = x^2/2` and the
/// four-thirds Young split `x w <= x^4/2 + (3/4) 2^{-1/3} |w|^{4/3}`:
///
///   int x^4  <=  x0^2 + 1.2 int |w|^{4/3}.
fn forced_cubic_iss_cert() -> Certificate {
    Certificate::iss(
        CombineMode::Sum,
        ScalarGainFn::power(4.0),
        sq(),
        ScalarGainFn::post_scale(1.2, ScalarGainFn::power(4.0 / 3.0)),
    )
}

/// Deterministic stress battery: sign flips, saturating constants, and a
/// quiet tail, across both signs and several magnitudes of `x0`.
fn battery(model: &SystemModel, t_end: f64) -> Vec<Trajectory> {
    let inputs = vec![
        InputSignal::Zero,
        InputSignal::Constant(vec![2.0]),
        InputSignal::Constant(vec![-1.0]),
        InputSignal::PiecewiseConstant {
            switch_times: vec![t_end / 4.0, t_end / 2.0],
            values: vec![vec![1.5], vec![-2.0], vec![0.25]],
        },
        InputSignal::PiecewiseConstant {
            switch_times: vec![t_end / 8.0],
            values: vec![vec![-0.75], vec![0.0]],
        },
    ];
    let mut out = Vec::new();
    for &x0 in &[-2.0, -0.5, 0.3, 1.0, 2.0] {
        for input in &inputs {
            out.push(integrate(model, &[x0], input, t_end, 1e-3).unwrap());
        }
    }
    out
}

fn assert_all_pass(cert: &Certificate, trajectories: &[Trajectory], label: &str) {
    for traj in trajectories {
        let report = verify_certificate(cert, traj, 1e-6).unwrap();
        assert!(
            report.pass,
            "{label}: margin {} at t = {} (lhs {} vs rhs {})",
            report.worst_margin, report.worst_time, report.lhs_at_worst, report.rhs_at_worst
        );
    }
}

fn assert_all_pass_transformed(tc: &TransformedCertificate, trajectories: &[Trajectory], label: &str) {
    for traj in trajectories {
        let mapped =
            map_trajectory(traj, &tc.state_transform, tc.input_transform.as_ref()).unwrap();
        let report = verify_certificate(&tc.certificate, &mapped, 1e-6).unwrap();
        assert!(
            report.pass,
            "{label}: margin {} at t = {} (lhs {} vs rhs {})",
            report.worst_margin, report.worst_time, report.lhs_at_worst, report.rhs_at_worst
        );
    }
}

#[test]
fn forced_cubic_iss_certificate_is_true() {
    let model = SystemModel::ex2_cubic_forced();
    let cert = forced_cubic_iss_cert();
    assert_all_pass(&cert, &battery(&model, 20.0), "forced cubic integral estimate");
}

#[test]
fn mode_conversions_agree_on_verdicts() {
    let model = SystemModel::ex2_cubic_forced();
    let trajectories = battery(&model, 10.0);

    // Doubling turns the sum estimate into an equivalent max estimate; the
    // free direction turns it back. All three must pass everywhere.
    let sum_cert = forced_cubic_iss_cert();
    let max_cert = sum_to_max(&sum_cert).unwrap();
    let relaxed = max_to_sum(&max_cert).unwrap();
    for traj in &trajectories {
        let a = verify_certificate(&sum_cert, traj, 1e-6).unwrap().pass;
        let b = verify_certificate(&max_cert, traj, 1e-6).unwrap().pass;
        let c = verify_certificate(&relaxed, traj, 1e-6).unwrap().pass;
        assert!(a && b && c, "conversion chain disagreed: {a} {b} {c}");
    }

    // A deliberately shrunken claim fails in both modes on the strongly
    // forced cases: verdicts still agree trajectory by trajectory.
    let bogus_max = Certificate::iss(
        CombineMode::Max,
        ScalarGainFn::power(4.0),
        ScalarGainFn::post_scale(0.01, sq()),
        ScalarGainFn::post_scale(0.012, ScalarGainFn::power(4.0 / 3.0)),
    );
    let bogus_sum = max_to_sum(&bogus_max).unwrap();
    let mut failures = 0;
    for traj in &trajectories {
        let a = verify_certificate(&bogus_max, traj, 1e-6).unwrap().pass;
        let b = verify_certificate(&bogus_sum, traj, 1e-6).unwrap().pass;
        // Sum mode is weaker (larger right side), so a max pass implies a
        // sum pass; a sum failure implies a max failure.
        assert!(!a || b, "max passed but sum failed");
        if !a {
            failures += 1;
        }
    }
    assert!(failures > 0, "shrunken claim never failed; fixture too weak");
}

#[test]
fn iss_to_linear_l2_reproduces_the_estimate_in_new_coordinates() {
    // alpha = s^4 gives T(z) = sgn(z) z^2, sigma = 1.2 s^{4/3} gives
    // |S(w)|^2 = 1.2 |w|^{4/3}; with gain 1 the transformed claim is exactly
    // the original integral estimate.
    let model = SystemModel::ex2_cubic_forced();
    let tc = iss_to_linear_l2(&forced_cubic_iss_cert(), 1.0, 1, 1).unwrap();
    assert_eq!(tc.certificate.mode(), CombineMode::Sum);
    assert_all_pass_transformed(&tc, &battery(&model, 20.0), "transformed forced cubic");
}

#[test]
fn nonlinear_l2_to_iiss_holds_on_bilinear_trajectories() {
    // sigma = s^2 makes the integral-form input identical to the squared
    // L2 norm, so the converted estimate is the same claim in integral form.
    let beta = ScalarGainFn::sum(sq(), ScalarGainFn::post_scale(0.5, ScalarGainFn::power(4.0)));
    let gamma = ScalarGainFn::post_scale(
        0.5,
        ScalarGainFn::compose(sq(), ScalarGainFn::exp_minus_one()),
    );
    let nl2 = Certificate::nonlinear_l2(CombineMode::Max, beta, gamma);
    let iiss = nonlinear_l2_to_iiss(&nl2).unwrap();

    let model = SystemModel::ex3_bilinear();
    let mut trajectories = Vec::new();
    for &x0 in &[-1.0, -0.4, 0.7, 1.2] {
        for amp in [0.0, 0.5, -1.0] {
            let input = InputSignal::Constant(vec![amp]);
            trajectories.push(integrate(&model, &[x0], &input, 8.0, 1e-3).unwrap());
        }
    }
    assert_all_pass(&nl2, &trajectories, "bilinear squared-norm estimate");
    assert_all_pass(&iiss, &trajectories, "bilinear integral-form estimate");
}

#[test]
fn l2_bridges_round_trip_on_the_transformed_cubic() {
    // In the well coordinate the cubic model decays at unit rate, so
    // beta(s) = s^2/2 is a true transient bound for the squared L2 norm.
    let model = SystemModel::ex1_transformed();
    let l2 = Certificate::l2(ScalarGainFn::post_scale(0.5, sq()));
    let mut trajectories = Vec::new();
    for &z0 in &[-1.5, -0.25, 0.1, 0.8, 2.0] {
        trajectories.push(integrate(&model, &[z0], &InputSignal::Zero, 12.0, 1e-3).unwrap());
    }
    assert_all_pass(&l2, &trajectories, "well-coordinate transient bound");

    // Integral form with alpha = s^2 is the identical claim.
    let ai = l2_to_alpha_integrable(&l2).unwrap();
    assert_all_pass(&ai, &trajectories, "integral form of the same bound");

    // And back through the (identity) lower transform of alpha = s^2.
    let tc = alpha_integrable_to_l2(&ai, 1).unwrap();
    assert_all_pass_transformed(&tc, &trajectories, "re-flattened bound");

    // Sanity: the measured norm really is near the claimed bound at the
    // worst case rather than vacuously small.
    let worst = integrate(&model, &[2.0], &InputSignal::Zero, 12.0, 1e-3).unwrap();
    let measured = truncated_l2_sq(&worst);
    assert!(measured > 0.2 * 0.5 * 4.0, "fixture too slack: {measured}");
}
