//! Generators against closed-form moments, an independent root finder and
//! the stationary distribution of the sampled label chain.

mod common;

use aida_core::armodels::{generate_context_dataset, is_stable, simulate_ar, table1_contexts, ArParams};
use aida_core::linalg::Matrix;
use aida_core::rng::seeded;
use common::roots::spectral_radius;

#[test]
fn ar1_stationary_variance() {
    let params = ArParams::new(vec![0.5], 1.0).unwrap();
    let xs = simulate_ar(&params, 1_000_000, &[0.0], &mut seeded(41)).unwrap();
    let burn = &xs[1000..];
    let mean = burn.iter().sum::<f64>() / burn.len() as f64;
    let var = burn.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / burn.len() as f64;
    assert!((var / (4.0 / 3.0) - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn table1_first_row_lag_one_autocorrelation() {
    let params = &table1_contexts::<f64>()[0];
    assert_eq!(params.coefficients, vec![-0.308]);
    assert_eq!(params.precision, 1.0);
    let xs = simulate_ar(params, 100_000, &[0.0], &mut seeded(42)).unwrap();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let c1: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    assert!((c1 / c0 + 0.308).abs() < 0.02, "rho1 {}", c1 / c0);
}

#[test]
fn table1_stability_matches_root_moduli() {
    for p in table1_contexts::<f64>() {
        let radius = spectral_radius(&p.coefficients);
        assert_eq!(is_stable(&p.coefficients), radius < 1.0, "{:?} radius {radius}", p.coefficients);
    }
    let row2 = [0.722, -0.673];
    // Complex pair with modulus √0.673.
    assert!((spectral_radius(&row2) - 0.673_f64.sqrt()).abs() < 1e-12);
    assert!(is_stable(&row2));
    let ar4 = &table1_contexts::<f64>()[3];
    assert_eq!(ar4.coefficients, vec![-1.433, -0.174, 0.757, 0.466]);
    assert_eq!(ar4.precision, 1.0);
}

/// Stationary vector of a column-stochastic matrix by power iteration.
fn stationary(t: &Matrix<f64>) -> Vec<f64> {
    let l = t.rows();
    let mut p = vec![1.0 / l as f64; l];
    for _ in 0..10_000 {
        let next = t.mul_vec(&p);
        let s: f64 = next.iter().sum();
        p = next.iter().map(|v| v / s).collect();
    }
    p
}

#[test]
fn label_marginals_follow_stationary_distribution() {
    let bank = table1_contexts::<f64>();
    for seed in 0..5 {
        let ds = generate_context_dataset(&bank, 1000, 100, &mut seeded(100 + seed)).unwrap();
        let pi = stationary(&ds.transition);
        for (c, target) in pi.iter().enumerate() {
            let freq = ds.labels.iter().filter(|&&l| l == c).count() as f64 / 1000.0;
            assert!((freq - target).abs() < 0.1, "seed {seed}, context {c}: {freq} vs {target}");
        }
        for j in 0..ds.transition.cols() {
            let col: f64 = (0..ds.transition.rows()).map(|i| ds.transition[(i, j)]).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
    }
}
