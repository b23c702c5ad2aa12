//! Polynomial roots by Durand-Kerner iteration, independent of the
//! step-down stability test.

#![allow(dead_code)]

use num_complex::Complex64;

/// Roots of `z^M − θ₁ z^{M−1} − … − θ_M`, the companion eigenvalues.
pub fn ar_roots(theta: &[f64]) -> Vec<Complex64> {
    let m = theta.len();
    // Monic coefficients, highest power first.
    let mut c = vec![1.0];
    c.extend(theta.iter().map(|t| -t));
    let eval = |z: Complex64| c.iter().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
    let bound = 1.0 + theta.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..m).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..2000 {
        let mut delta = 0.0_f64;
        for i in 0..m {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..m {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

pub fn spectral_radius(theta: &[f64]) -> f64 {
    ar_roots(theta).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
