//! Reference posteriors for probit GP classification by tensor-product
//! Gauss-Hermite quadrature over the whitened prior `f = L z`.

#![allow(dead_code)]

use aida_core::gpc::{kernel_matrix, AppraisalDataset, KernelParams, GRAM_JITTER};
use aida_core::linalg::Cholesky;
use aida_core::special::norm_cdf;

/// Nodes and weights for `∫ g(z) N(z; 0, 1) dz`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the orthonormal Hermite recurrence (physicists' form).
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s = std::f64::consts::PI.sqrt();
    (x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(), w.iter().map(|v| v / s).collect())
}

pub struct GridPosterior {
    /// Posterior mean of the latent at each training query.
    pub site_means: Vec<f64>,
    /// `P(r = 1 | D, u)` at each test point.
    pub class_probs: Vec<f64>,
}

pub fn grid_posterior(data: &AppraisalDataset<f64>, params: &KernelParams<f64>, tests: &[Vec<f64>], nodes: usize) -> GridPosterior {
    let n = data.len();
    let mut k = kernel_matrix(&data.queries, params);
    k.add_diag(GRAM_JITTER);
    let chol = Cholesky::new(&k).unwrap();
    let l = chol.l();
    let y: Vec<f64> = data.responses.iter().map(|&r| if r { 1.0 } else { -1.0 }).collect();
    // Predictive mean is a(u)ᵀ z and variance is fixed per test point.
    let proj: Vec<(Vec<f64>, f64)> = tests
        .iter()
        .map(|u| {
            let ks: Vec<f64> = data.queries.iter().map(|q| params.eval(q, u)).collect();
            let a = chol.forward(&ks);
            let v = (params.variance() - a.iter().map(|x| x * x).sum::<f64>()).max(0.0);
            (a, (1.0 + v).sqrt())
        })
        .collect();
    let (zs, ws) = gauss_hermite(nodes);
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    let mut site = vec![0.0; n];
    let mut cls = vec![0.0; tests.len()];
    let mut z = vec![0.0; n];
    let mut f = vec![0.0; n];
    loop {
        let mut weight = 1.0;
        for i in 0..n {
            z[i] = zs[idx[i]];
            weight *= ws[idx[i]];
        }
        for i in 0..n {
            f[i] = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
            weight *= norm_cdf(y[i] * f[i]);
        }
        total += weight;
        for i in 0..n {
            site[i] += weight * f[i];
        }
        for (c, (a, s)) in cls.iter_mut().zip(&proj) {
            let m: f64 = a.iter().zip(&z).map(|(p, q)| p * q).sum();
            *c += weight * norm_cdf(m / s);
        }
        let mut d = 0;
        loop {
            if d == n {
                return GridPosterior {
                    site_means: site.iter().map(|s| s / total).collect(),
                    class_probs: cls.iter().map(|c| c / total).collect(),
                };
            }
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
