//! Preference-surface geometry and appraisal frequencies.

use aida_core::simuser::{appraisal_prob, sample_appraisal, UserPrefs};
use aida_core::rng::seeded;
use proptest::prelude::*;

#[test]
fn appraisal_frequency_within_binomial_interval() {
    let prefs = UserPrefs::<f64>::default();
    let u = [0.8, 0.3];
    let p = appraisal_prob(&u, &prefs);
    let mut rng = seeded(51);
    let n = 100_000;
    let hits = (0..n).filter(|_| sample_appraisal(&u, &prefs, &mut rng)).count();
    let freq = hits as f64 / n as f64;
    assert!((freq - 0.15).abs() < 0.01, "{freq}");
    // Four binomial standard errors around the exact probability.
    assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
}

#[test]
fn seeded_traces_repeat() {
    let prefs = UserPrefs::<f64>::default();
    let draw = |s| {
        let mut rng = seeded(s);
        (0..200).map(|i| sample_appraisal(&[0.75 + 0.001 * i as f64, 0.2], &prefs, &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(3), draw(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decreasing_along_rays(angle in 0.0f64..std::f64::consts::TAU, r in 0.0f64..0.3, dr in 1e-3f64..0.3, l0 in 1.0f64..500.0, l1 in 1.0f64..500.0) {
        let prefs = UserPrefs::new([0.8, 0.2], [l0, l1]).unwrap();
        let at = |rad: f64| appraisal_prob(&[0.8 + rad * angle.cos(), 0.2 + rad * angle.sin()], &prefs);
        prop_assert!(at(r + dr) < at(r));
        prop_assert!(at(r) <= 1.0 && at(r) > 0.0);
    }

    #[test]
    fn reflection_symmetric(dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
        let prefs = UserPrefs::<f64>::default();
        let p = appraisal_prob(&[0.8 + dx, 0.2 + dy], &prefs);
        // Offsets round differently on either side of u*, hence the tolerance.
        let close = |q: f64| (p - q).abs() <= 1e-12 * p.max(1e-300) + 1e-300;
        prop_assert!(close(appraisal_prob(&[0.8 - dx, 0.2 + dy], &prefs)));
        prop_assert!(close(appraisal_prob(&[0.8 + dx, 0.2 - dy], &prefs)));
    }
}
