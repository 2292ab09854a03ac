//! Property tests for the gain-function calculus: random expression trees
//! certify, invert, and satisfy the splitting lemmas the composition
//! machinery relies on.

use gaincert_core::gainfn::{
    inverse_eval, rho_surplus, sum_lower_envelope, weak_triangle_bound, young_split, ScalarGainFn,
};
use gaincert_core::simulate::trapezoid;
use proptest::prelude::*;

/// Growth-friendly random K-infinity trees: every constructor used preserves
/// class K-infinity, so certification must never fail structurally.
fn kinf_tree() -> impl Strategy<Value = ScalarGainFn> {
    let leaf = prop_oneof![
        Just(ScalarGainFn::identity()),
        (0.5..3.0f64).prop_map(ScalarGainFn::power),
        (0.1..10.0f64).prop_map(ScalarGainFn::linear),
        Just(ScalarGainFn::exp_minus_one()),
        Just(ScalarGainFn::log_one_plus()),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarGainFn::compose(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarGainFn::pointwise_max(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarGainFn::pointwise_min(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarGainFn::sum(a, b)),
            (0.1..10.0f64, inner.clone()).prop_map(|(k, f)| ScalarGainFn::post_scale(k, f)),
            (0.1..10.0f64, inner).prop_map(|(k, f)| ScalarGainFn::pre_scale(k, f)),
        ]
    })
}

proptest! {
    /// Every tree in the K-infinity grammar passes the structural checks
    /// (zero at zero, monotone on the default grid). Unboundedness is
    /// advisory only: deep logarithmic composites legitimately stay small.
    #[test]
    fn random_trees_certify_structurally(f in kinf_tree()) {
        let report = f.certify_default();
        prop_assert!(report.zero_at_zero);
        prop_assert!(report.monotone_on_grid, "non-monotone: {f}");
    }

    /// Inversion round-trip in the argument domain: solving `f(s) = f(x)`
    /// recovers `x` to bisection accuracy. Saturation plateaus are excluded
    /// by requiring strict growth just past `x`: on a clamp plateau the
    /// argument is not identifiable (though `f(f^{-1}(y)) = y` still holds).
    #[test]
    fn inversion_round_trips(f in kinf_tree(), x in 1e-3..1e4f64) {
        let y = f.eval_extended(x);
        prop_assume!(y > 0.0);
        prop_assume!(f.eval_extended(x * (1.0 + 1e-6)) > y);
        let s = inverse_eval(&f, y).unwrap();
        prop_assert!(
            (s - x).abs() <= 1e-9 * x.max(1.0),
            "f = {f}: inverted {y} to {s}, expected {x}"
        );
    }

    /// Weak triangle: `gamma(a + b) <= max(gamma(rho(a)), gamma(mu(b)))`
    /// for any `rho = id + g` with `g` K-infinity.
    #[test]
    fn weak_triangle_dominates_the_sum(
        gamma in kinf_tree(),
        g in kinf_tree(),
        a in 0.0..50.0f64,
        b in 0.0..50.0f64,
    ) {
        let rho = ScalarGainFn::sum(ScalarGainFn::identity(), g);
        prop_assume!(gamma.certify_default().verdict());
        prop_assume!(rho_surplus(&rho).certify_default().verdict());
        let lhs = gamma.eval_extended(a + b);
        prop_assume!(lhs < 1e280);
        let bound = weak_triangle_bound(&gamma, &rho, a, b).unwrap();
        prop_assert!(
            lhs <= bound * (1.0 + 1e-9) + 1e-12,
            "gamma = {gamma}: gamma({a} + {b}) = {lhs} > bound {bound}"
        );
    }

    /// Sum lower envelope: `env(a + b) <= alpha1(a) + alpha2(b)` where
    /// `env = min(alpha1(s/2), alpha2(s/2))`.
    #[test]
    fn envelope_lies_below_split_sums(
        a1 in kinf_tree(),
        a2 in kinf_tree(),
        a in 0.0..100.0f64,
        b in 0.0..100.0f64,
    ) {
        let env = sum_lower_envelope(&a1, &a2);
        let lhs = env.eval_extended(a + b);
        let rhs = a1.eval_extended(a) + a2.eval_extended(b);
        prop_assume!(rhs < 1e280);
        prop_assert!(
            lhs <= rhs * (1.0 + 1e-9) + 1e-12,
            "env({a} + {b}) = {lhs} > {rhs}"
        );
    }

    /// Exchanging sums and maxima: `max(a, b) <= a + b <= max(2a, 2b)` for
    /// nonnegative values (the bridge between combine modes).
    #[test]
    fn sum_and_max_exchange(
        f in kinf_tree(),
        a in 0.0..1e6f64,
        b in 0.0..1e6f64,
    ) {
        let (fa, fb) = (f.eval_extended(a), f.eval_extended(b));
        prop_assume!(fa + fb < 1e280);
        prop_assert!(fa.max(fb) <= fa + fb);
        prop_assert!(fa + fb <= (2.0 * fa).max(2.0 * fb));
    }

    /// Young split on scalars: `(a + b)^2` never exceeds the weighted sum.
    #[test]
    fn young_split_scalars(
        a in 0.0..1e3f64,
        b in 0.0..1e3f64,
        eps in 0.1..10.0f64,
    ) {
        let rhs = young_split(a * a, b * b, eps).unwrap();
        let lhs = (a + b) * (a + b);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    /// Young split on sampled signal pairs: the trapezoid functionals of
    /// `|w1 + w2|^2` obey the same weighted inequality, since it holds
    /// pointwise and the quadrature weights are nonnegative.
    #[test]
    fn young_split_signals(
        pairs in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..64),
        dt in 1e-3..1.0f64,
        eps in 0.1..10.0f64,
    ) {
        let sum_sq: Vec<f64> = pairs.iter().map(|(a, b)| (a + b) * (a + b)).collect();
        let a_sq: Vec<f64> = pairs.iter().map(|(a, _)| a * a).collect();
        let b_sq: Vec<f64> = pairs.iter().map(|(_, b)| b * b).collect();
        let lhs = trapezoid(&sum_sq, dt);
        let rhs = (1.0 + eps * eps) * trapezoid(&a_sq, dt)
            + (1.0 + 1.0 / (eps * eps)) * trapezoid(&b_sq, dt);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
    }

    /// Total evaluation: wild arguments never produce NaN, and the odd
    /// extension is exact.
    #[test]
    fn eval_is_total_and_odd(f in kinf_tree(), s in 0.0..1e300f64) {
        let v = f.eval_extended(s);
        prop_assert!(!v.is_nan());
        prop_assert!(v.abs() <= 1e300);
        prop_assert_eq!(f.eval_extended(-s), -v);
        prop_assert_eq!(f.eval_extended(f64::NAN), 0.0);
    }
}
