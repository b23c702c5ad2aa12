//! Laplace probit classification against numerical integration of the exact
//! posterior, plus the stationarity conditions of the mode and the evidence
//! optimum checked with independently written derivatives.

mod common;

use aida_core::gpc::{kernel_matrix, laplace_fit, log_evidence, optimize_hyperparams, predict, class_prob, AppraisalDataset, KernelParams, GRAM_JITTER};
use aida_core::linalg::Cholesky;
use aida_core::rng::seeded;
use aida_core::special::{norm_cdf, norm_pdf};
use common::quadrature::{gauss_hermite, grid_posterior};
use rand::Rng;

fn random_dataset(rng: &mut impl Rng, n: usize, dim: usize) -> AppraisalDataset<f64> {
    let mut data = AppraisalDataset::default();
    for _ in 0..n {
        let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        data.push(u, rng.random::<bool>());
    }
    data
}

fn random_params(rng: &mut impl Rng) -> KernelParams<f64> {
    KernelParams::new(rng.random_range(0.1..=1.0), rng.random_range(0.1..=1.0)).unwrap()
}

#[test]
fn hermite_rule_integrates_gaussian_moments() {
    let (z, w) = gauss_hermite(12);
    let moment = |k: i32| z.iter().zip(&w).map(|(x, v)| v * x.powi(k)).sum::<f64>();
    assert!((moment(0) - 1.0).abs() < 1e-13);
    assert!(moment(1).abs() < 1e-13);
    assert!((moment(2) - 1.0).abs() < 1e-12);
    assert!((moment(4) - 3.0).abs() < 1e-11);
    assert!((moment(10) - 945.0).abs() < 1e-8);
}

#[test]
fn five_point_site_means_match_quadrature() {
    let data = AppraisalDataset::new(
        vec![vec![0.1], vec![0.3], vec![0.45], vec![0.7], vec![0.9]],
        vec![false, true, true, false, true],
    )
    .unwrap();
    let params = KernelParams::new(0.9, 0.3).unwrap();
    let post = laplace_fit(&data, &params).unwrap();
    let grid = grid_posterior(&data, &params, &[], 20);
    for (m, g) in post.mode.iter().zip(&grid.site_means) {
        assert!((m - g).abs() < 0.1, "mode {m} vs grid mean {g}");
    }
}

#[test]
fn predictive_class_probabilities_match_quadrature() {
    let mut rng = seeded(31);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let dim = 1 + case % 2;
        let n = rng.random_range(1..=6);
        let data = random_dataset(&mut rng, n, dim);
        let params = random_params(&mut rng);
        let tests: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let nodes = if n <= 4 { 16 } else { 10 };
        let grid = grid_posterior(&data, &params, &tests, nodes);
        let post = laplace_fit(&data, &params).unwrap();
        for (u, exact) in tests.iter().zip(&grid.class_probs) {
            let (m, v) = predict(&post, &data, &params, u).unwrap();
            worst = worst.max((class_prob(m, v) - exact).abs());
        }
    }
    assert!(worst < 0.05, "largest class-probability gap {worst}");
}

#[test]
fn mode_satisfies_fixed_point_and_evidence_formula() {
    let mut rng = seeded(32);
    for _ in 0..30 {
        let n = rng.random_range(1..=12);
        let data = random_dataset(&mut rng, n, 2);
        let params = random_params(&mut rng);
        let post = laplace_fit(&data, &params).unwrap();
        let y: Vec<f64> = data.responses.iter().map(|&r| if r { 1.0 } else { -1.0 }).collect();
        let mut k = kernel_matrix(&data.queries, &params);
        k.add_diag(GRAM_JITTER);
        let grad: Vec<f64> = y.iter().zip(&post.mode).map(|(yi, f)| yi * norm_pdf(yi * f) / norm_cdf(yi * f)).collect();
        let kg = k.mul_vec(&grad);
        for (a, b) in kg.iter().zip(&post.mode) {
            assert!((a - b).abs() < 1e-7);
        }
        // ln q = -½ f̂ᵀ∇ + Σ ln Φ(y f̂) - ½ ln|I + W½KW½|, with K⁻¹f̂ = ∇ at the mode.
        let w: Vec<f64> = y
            .iter()
            .zip(&post.mode)
            .map(|(yi, f)| {
                let z = yi * f;
                let r = norm_pdf(z) / norm_cdf(z);
                r * r + z * r
            })
            .collect();
        let mut b = k.clone();
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] *= w[i].sqrt() * w[j].sqrt();
            }
            b[(i, i)] += 1.0;
        }
        let logdet = Cholesky::new(&b).unwrap().log_det();
        let fit: f64 = post.mode.iter().zip(&grad).map(|(f, g)| f * g).sum();
        let lik: f64 = y.iter().zip(&post.mode).map(|(yi, f)| norm_cdf(yi * f).ln()).sum();
        let expected = -0.5 * fit + lik - 0.5 * logdet;
        assert!((post.log_evidence - expected).abs() < 1e-8, "{} vs {expected}", post.log_evidence);
    }
}

fn log_space_gradient(data: &AppraisalDataset<f64>, p: &KernelParams<f64>) -> [f64; 2] {
    let h = 1e-5;
    let at = |ls: f64, ll: f64| log_evidence(data, &KernelParams { sigma: ls.exp(), length: ll.exp() });
    let (ls, ll) = (p.sigma.ln(), p.length.ln());
    [(at(ls + h, ll) - at(ls - h, ll)) / (2.0 * h), (at(ls, ll + h) - at(ls, ll - h)) / (2.0 * h)]
}

#[test]
fn optimizer_reaches_stationary_point_or_boundary() {
    let mut rng = seeded(33);
    let mut interior = 0;
    for _ in 0..30 {
        let n = rng.random_range(4..=15);
        let data = random_dataset(&mut rng, n, 2);
        if !data.has_both_classes() {
            continue;
        }
        let start = KernelParams::default();
        let opt = optimize_hyperparams(&data, &start);
        assert!(log_evidence(&data, &opt) >= log_evidence(&data, &start) - 1e-12);
        let g = log_space_gradient(&data, &opt);
        let margin = 1e-6;
        for (i, v) in [opt.sigma, opt.length].into_iter().enumerate() {
            assert!((0.1 - 1e-12..=1.0 + 1e-12).contains(&v));
            let at_lower = v <= 0.1 + margin;
            let at_upper = v >= 1.0 - margin;
            if at_lower {
                assert!(g[i] <= 1e-4, "lower bound with ascent direction {g:?}");
            } else if at_upper {
                assert!(g[i] >= -1e-4, "upper bound with ascent direction {g:?}");
            } else {
                assert!(g[i].abs() <= 1e-4, "interior gradient {g:?} at {opt:?}");
            }
        }
        if opt.sigma > 0.1 + margin && opt.sigma < 1.0 - margin && opt.length > 0.1 + margin && opt.length < 1.0 - margin {
            interior += 1;
        }
    }
    eprintln!("interior optima: {interior}");
}

#[test]
fn grid_search_never_beats_optimizer_by_much_on_unimodal_surface() {
    // One clear boundary between classes makes the evidence surface smooth and unimodal.
    let data = AppraisalDataset::new(
        (0..10).map(|i| vec![i as f64 / 9.0]).collect(),
        (0..10).map(|i| i >= 5).collect(),
    )
    .unwrap();
    let opt = optimize_hyperparams(&data, &KernelParams::default());
    let best = (0..=45)
        .flat_map(|i| (0..=45).map(move |j| (0.1 + 0.02 * i as f64, 0.1 + 0.02 * j as f64)))
        .map(|(s, l)| log_evidence(&data, &KernelParams::new(s, l).unwrap()))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(log_evidence(&data, &opt) >= best - 1e-6);
}
