//! Property tests for the structural invariants.

use proptest::prelude::*;
use rdwate::bandwidth::couple_bandwidths;
use rdwate::dataset::Side;
use rdwate::estimators::wll_side_fit;
use rdwate::inference::coverage_indicator;
use rdwate::kernels::{Kernel, ALL_KERNELS};

fn any_kernel() -> impl Strategy<Value = Kernel> {
    prop::sample::select(ALL_KERNELS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernel_symmetric_nonnegative_compact(k in any_kernel(), u in -3.0f64..3.0) {
        let v = k.eval(u);
        prop_assert!(v >= 0.0);
        prop_assert!((v - k.eval(-u)).abs() < 1e-15);
        if u.abs() > 1.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn coupling_is_monotone(h1 in 0.01f64..2.0, dh in 0.001f64..1.0, scale in 0.1f64..5.0, pre in any::<bool>()) {
        let a = couple_bandwidths(h1, pre, scale);
        let b = couple_bandwidths(h1 + dh, pre, scale);
        prop_assert!(b.h > a.h && b.h1 > a.h1 && b.h2 > a.h2);
    }

    #[test]
    fn coverage_indicator_is_interval_membership(lo in -5.0f64..5.0, width in 0.0f64..5.0, t in -11.0f64..11.0) {
        let ci = (lo, lo + width);
        let hit = coverage_indicator(ci, t);
        prop_assert_eq!(hit == 1, t >= ci.0 && t <= ci.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn side_fit_translation_and_scale(
        k in any_kernel(),
        shift in -20.0f64..20.0,
        lambda in 1e-3f64..1e3,
        points in prop::collection::vec((0.01f64..0.95, -3.0f64..3.0, 0.05f64..4.0), 8..40),
    ) {
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let w: Vec<f64> = points.iter().map(|p| p.2).collect();
        let base = match wll_side_fit(&x, &y, &w, k, 1.0, 0.0, Side::Above) {
            Ok(f) => f,
            Err(_) => return Ok(()), // degenerate draw (support or collinearity)
        };

        // translating outcomes moves the intercept one for one
        let y2: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let moved = wll_side_fit(&x, &y2, &w, k, 1.0, 0.0, Side::Above).unwrap();
        let scale = 1.0_f64.max(shift.abs());
        prop_assert!((moved.intercept - base.intercept - shift).abs() < 1e-9 * scale);
        prop_assert!((moved.slope - base.slope).abs() < 1e-9 * scale);

        // rescaling every inverse weight leaves the fit unchanged
        let w2: Vec<f64> = w.iter().map(|v| v * lambda).collect();
        let scaled = wll_side_fit(&x, &y, &w2, k, 1.0, 0.0, Side::Above).unwrap();
        prop_assert!((scaled.intercept - base.intercept).abs() < 1e-9);
        prop_assert!((scaled.slope - base.slope).abs() < 1e-9);
    }
}
