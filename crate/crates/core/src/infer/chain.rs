//! Gaussian posteriors over AR coefficients: a random-walk chain smoothed
//! with a Kalman filter and Rauch-Tung-Striebel pass, or a single static
//! vector when the walk variance is zero.

use crate::dists::{Gaussian, NaturalGaussian};
use crate::error::Result;
use crate::linalg::{Cholesky, Matrix};
use crate::real::Real;
use crate::special::LN_2PI;

/// Marginals of `q(θ_{1:W})` together with `E_q[−ln p(θ)] − H[q(θ)]`.
#[derive(Clone, Debug)]
pub(crate) struct CoefficientPosterior<T> {
    marginals: Vec<Gaussian<T>>,
    pub free_term: T,
}

impl<T: Real> CoefficientPosterior<T> {
    pub fn fixed(theta: Gaussian<T>) -> Self {
        Self { marginals: vec![theta], free_term: T::zero() }
    }

    pub fn from_marginals(marginals: Vec<Gaussian<T>>) -> Self {
        Self { marginals, free_term: T::zero() }
    }

    /// Prior-propagated starting point for the iterations.
    pub fn from_prior(prior: &Gaussian<T>, walk: T, len: usize) -> Self {
        if walk > T::zero() {
            let marginals = (1..=len)
                .map(|t| {
                    let mut c = prior.cov().clone();
                    c.add_diag(walk * T::from_usize_lossy(t));
                    Gaussian::from_parts(prior.mean().to_vec(), c)
                })
                .collect();
            Self { marginals, free_term: T::zero() }
        } else {
            Self { marginals: vec![prior.clone()], free_term: T::zero() }
        }
    }

    /// Marginal at time step `t` (zero based).
    pub fn at(&self, t: usize) -> &Gaussian<T> {
        if self.marginals.len() == 1 {
            &self.marginals[0]
        } else {
            &self.marginals[t]
        }
    }

    pub fn expand(&self, len: usize) -> Vec<Gaussian<T>> {
        (0..len).map(|t| self.at(t).clone()).collect()
    }
}

/// `E_{N(m, P)}[−ln N(θ; m0, chol0)]`.
fn gaussian_cross_entropy<T: Real>(m: &[T], p: &Matrix<T>, m0: &[T], chol0: &Cholesky<T>) -> T {
    let d = m.len();
    let diff: Vec<T> = m.iter().zip(m0).map(|(&a, &b)| a - b).collect();
    let z = chol0.forward(&diff);
    let tr = chol0.solve_mat(p).trace();
    T::c(0.5) * (T::from_usize_lossy(d) * T::c(LN_2PI) + chol0.log_det() + tr + crate::linalg::dot(&z, &z))
}

fn entropy_from_logdet<T: Real>(d: usize, log_det: T) -> T {
    T::c(0.5) * (T::from_usize_lossy(d) * (T::c(LN_2PI) + T::one()) + log_det)
}

/// Optimal `q(θ)` for a static coefficient vector with prior `N(m0, P0)`
/// and the given coefficient messages.
pub(crate) fn static_posterior<T: Real>(prior: &Gaussian<T>, messages: &[NaturalGaussian<T>]) -> Result<CoefficientPosterior<T>> {
    let prior_chol = Cholesky::jittered(prior.cov())?;
    let mut lambda = prior_chol.inverse();
    let mut h = prior_chol.solve(prior.mean());
    for msg in messages {
        lambda = lambda.add(&msg.precision);
        for (a, &b) in h.iter_mut().zip(&msg.precision_mean) {
            *a += b;
        }
    }
    let chol = Cholesky::jittered(&lambda)?;
    let mean = chol.solve(&h);
    let cov = chol.inverse().symmetrize();
    let energy = gaussian_cross_entropy(&mean, &cov, prior.mean(), &prior_chol);
    let entropy = entropy_from_logdet(mean.len(), -chol.log_det());
    Ok(CoefficientPosterior { marginals: vec![Gaussian::from_parts(mean, cov)], free_term: energy - entropy })
}

/// Optimal `q(θ_{1:W})` for the random walk `θ_t = θ_{t−1} + N(0, ωI)` with
/// `θ_0 ~ N(m0, P0)` marginalized out, given one coefficient message per step.
pub(crate) fn smoothed_posterior<T: Real>(
    prior: &Gaussian<T>,
    walk: T,
    messages: &[NaturalGaussian<T>],
) -> Result<CoefficientPosterior<T>> {
    let p = prior.dim();
    let len = messages.len();
    let mut pred_cov = prior.cov().clone();
    pred_cov.add_diag(walk);
    let first_chol = Cholesky::jittered(&pred_cov)?;

    let mut fm: Vec<Vec<T>> = Vec::with_capacity(len);
    let mut fp: Vec<Matrix<T>> = Vec::with_capacity(len);
    let mut f_logdet: Vec<T> = Vec::with_capacity(len);
    for (t, msg) in messages.iter().enumerate() {
        let (pred_mean, pred_chol) = if t == 0 {
            (prior.mean().to_vec(), first_chol.clone())
        } else {
            let mut c = fp[t - 1].clone();
            c.add_diag(walk);
            (fm[t - 1].clone(), Cholesky::jittered(&c)?)
        };
        let lambda = pred_chol.inverse().add(&msg.precision);
        let mut h = pred_chol.solve(&pred_mean);
        for (a, &b) in h.iter_mut().zip(&msg.precision_mean) {
            *a += b;
        }
        let chol = Cholesky::jittered(&lambda)?;
        fm.push(chol.solve(&h));
        fp.push(chol.inverse().symmetrize());
        f_logdet.push(-chol.log_det());
    }

    let mut sm = fm.clone();
    let mut sp = fp.clone();
    let mut entropy = entropy_from_logdet(p, f_logdet[len - 1]);
    let mut walk_energy = T::zero();
    let ln_walk = walk.ln();
    let dp = T::from_usize_lossy(p);
    for t in (0..len.saturating_sub(1)).rev() {
        let mut pred = fp[t].clone();
        pred.add_diag(walk);
        let pred_chol = Cholesky::jittered(&pred)?;
        // G = P_f pred⁻¹, obtained as the transpose of pred⁻¹ P_f.
        let g = pred_chol.solve_mat(&fp[t]).transpose();
        let diff: Vec<T> = sm[t + 1].iter().zip(&fm[t]).map(|(&a, &b)| a - b).collect();
        let corr = g.mul_vec(&diff);
        sm[t] = fm[t].iter().zip(&corr).map(|(&a, &b)| a + b).collect();
        let inner = sp[t + 1].sub(&pred);
        sp[t] = fp[t].add(&g.matmul(&inner).matmul(&g.transpose())).symmetrize();

        // Conditional covariance of θ_t given θ_{t+1}: ω P_f pred⁻¹.
        let cond_logdet = dp * ln_walk + f_logdet[t] - pred_chol.log_det();
        entropy += entropy_from_logdet(p, cond_logdet);

        let cross = g.matmul(&sp[t + 1]).trace();
        let dm: T = sm[t + 1].iter().zip(&sm[t]).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let sq = dm + sp[t + 1].trace() + sp[t].trace() - T::c(2.0) * cross;
        walk_energy += T::c(0.5) * (dp * (T::c(LN_2PI) + ln_walk) + sq / walk);
    }

    let first_energy = gaussian_cross_entropy(&sm[0], &sp[0], prior.mean(), &first_chol);
    let marginals = sm.into_iter().zip(sp).map(|(m, c)| Gaussian::from_parts(m, c)).collect();
    Ok(CoefficientPosterior { marginals, free_term: first_energy + walk_energy - entropy })
}

