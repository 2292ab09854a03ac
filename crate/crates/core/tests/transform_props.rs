//! Property tests for coordinate changes: the numeric envelopes sandwich the
//! actual transform norm, and inverses round-trip.

use gaincert_core::transforms::{build_lower, build_upper, CoordinateTransform, RadiusGrid};
use gaincert_core::ScalarGainFn;
use proptest::prelude::*;

fn axis_gain() -> impl Strategy<Value = ScalarGainFn> {
    prop_oneof![
        Just(ScalarGainFn::identity()),
        (0.5..3.0f64).prop_map(ScalarGainFn::power),
        (0.1..10.0f64).prop_map(ScalarGainFn::linear),
        Just(ScalarGainFn::log_one_plus()),
        (0.2..5.0f64, 0.5..2.0f64)
            .prop_map(|(k, p)| ScalarGainFn::post_scale(k, ScalarGainFn::power(p))),
    ]
}

/// Vectors with coordinates spanning several magnitudes but total radius
/// inside the default envelope grid.
fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec((-1.0..1.0f64, -2.0..2.0f64), dim).prop_map(|parts| {
        parts
            .into_iter()
            .map(|(mantissa, exp)| mantissa * 10f64.powf(exp))
            .collect()
    })
}

fn check_sandwich(t: &CoordinateTransform, z: &[f64]) -> Result<(), TestCaseError> {
    let bounds = t.numeric_bounds(&RadiusGrid::default()).unwrap();
    let norm_z = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    prop_assume!(norm_z >= 1e-3 && norm_z <= 1e3);
    let image = t.apply(z).unwrap();
    let norm_t = image.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lo = bounds.lower.eval_extended(norm_z);
    let hi = bounds.upper.eval_extended(norm_z);
    prop_assert!(
        lo <= norm_t * (1.0 + 1e-9) + 1e-300,
        "lower envelope {lo} above |T(z)| = {norm_t} at |z| = {norm_z}"
    );
    prop_assert!(
        norm_t <= hi * (1.0 + 1e-9) + 1e-300,
        "|T(z)| = {norm_t} above upper envelope {hi} at |z| = {norm_z}"
    );
    Ok(())
}

proptest! {
    /// Lower-family diagonal transforms stay inside their envelopes.
    #[test]
    fn lower_family_sandwich(
        axis in axis_gain(),
        dim in 1usize..5,
        zs in vector(4),
    ) {
        let t = build_lower(&axis, dim).unwrap();
        check_sandwich(&t, &zs[..dim])?;
    }

    /// Upper-family diagonal transforms stay inside their envelopes.
    #[test]
    fn upper_family_sandwich(
        axis in axis_gain(),
        dim in 1usize..5,
        zs in vector(4),
    ) {
        let t = build_upper(&axis, dim).unwrap();
        check_sandwich(&t, &zs[..dim])?;
    }

    /// A generic (closure-backed) transform obeys its sampled envelopes at
    /// the sampling resolution: on grid radii the sandwich is exact up to
    /// rounding, and between radii the enclosing nodes bracket the norm.
    /// (The tables interpolate linearly between radii, so they are only as
    /// tight as the grid there; the diagonal families above have analytic
    /// envelopes and cover arbitrary radii exactly.)
    #[test]
    fn generic_transform_sandwich(
        idx in 0usize..127,
        frac in 0.0..1.0f64,
        sign in proptest::bool::ANY,
    ) {
        let t = CoordinateTransform::example2();
        let bounds = t.numeric_bounds(&RadiusGrid::default()).unwrap();
        let radii = RadiusGrid::default().radii();

        let r = radii[idx];
        let z = [if sign { r } else { -r }];
        let norm_t = t.apply(&z).unwrap()[0].abs();
        let lo = bounds.lower.eval_extended(r);
        let hi = bounds.upper.eval_extended(r);
        prop_assert!(lo <= norm_t * (1.0 + 1e-9), "node {r}: lower {lo} above {norm_t}");
        prop_assert!(norm_t <= hi * (1.0 + 1e-9), "node {r}: upper {hi} below {norm_t}");

        let r_mid = radii[idx] * (radii[idx + 1] / radii[idx]).powf(frac);
        let z = [if sign { r_mid } else { -r_mid }];
        let norm_t = t.apply(&z).unwrap()[0].abs();
        let lo = bounds.lower.eval_extended(radii[idx]);
        let hi = bounds.upper.eval_extended(radii[idx + 1]);
        prop_assert!(lo <= norm_t * (1.0 + 1e-9), "cell {idx}: lower {lo} above {norm_t}");
        prop_assert!(norm_t <= hi * (1.0 + 1e-9), "cell {idx}: upper {hi} below {norm_t}");
    }

    /// Diagonal transforms invert: `T^{-1}(T(z)) = z` to bisection accuracy.
    #[test]
    fn diagonal_round_trip(
        axis in axis_gain(),
        dim in 1usize..5,
        zs in vector(4),
    ) {
        let z = &zs[..dim];
        let norm_z = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm_z >= 1e-3 && norm_z <= 1e3);
        for t in [build_lower(&axis, dim).unwrap(), build_upper(&axis, dim).unwrap()] {
            let back = t.apply_inverse(&t.apply(z).unwrap()).unwrap();
            for (orig, rec) in z.iter().zip(&back) {
                prop_assert!(
                    (orig - rec).abs() <= 1e-8 * orig.abs().max(1.0),
                    "round trip {orig} -> {rec}"
                );
            }
        }
    }
}
