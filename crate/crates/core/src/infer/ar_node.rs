//! Variational messages of the composite AR factor
//! `f(y, v, θ, γ) = N(y; θᵀv, 1/γ)`, where `y` is the current sample, `v`
//! the lagged state `[y_{t-1}, ..., y_{t-p}]`, `θ` the coefficients and `γ`
//! the innovation precision.
//!
//! Each message is `exp E_q[ln f]` with the expectation taken over every
//! edge except the target. Under the mean-field split between the signal,
//! the coefficients and the precision, the only statistics needed are the
//! first two moments of the stacked vector `u = [y, v]`, the mean and
//! covariance of `θ`, and `E[γ]`, `E[ln γ]`.

use crate::dists::{Gaussian, NaturalGaussian};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;
use crate::special::LN_2PI;

/// Mean and covariance of the stacked vector `u = [y, v]` (dimension `p + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct LagMoments<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

impl<T: Real> LagMoments<T> {
    /// Moments of a known (point-mass) stacked vector.
    pub fn point(u: &[T]) -> Self {
        Self { mean: u.to_vec(), cov: Matrix::zeros(u.len(), u.len()) }
    }

    pub fn order(&self) -> usize {
        self.mean.len() - 1
    }

    /// `E[u uᵀ]`.
    pub fn second_moment(&self) -> Matrix<T> {
        self.cov.add(&Matrix::outer(&self.mean, &self.mean))
    }

    fn check(&self) -> Result<()> {
        if self.mean.iter().any(|v| !v.is_finite()) || !self.cov.is_finite() {
            return Err(Error::NonFinite("AR node signal statistics".into()));
        }
        Ok(())
    }
}

/// `E[(y − θᵀv)²]` under independent `q(u)` and `q(θ)`.
pub fn expected_sq_residual<T: Real>(u: &LagMoments<T>, theta: &Gaussian<T>) -> T {
    let p = u.order();
    let s = u.second_moment();
    let m = theta.mean();
    let c = theta.cov();
    let mut w = Vec::with_capacity(p + 1);
    w.push(T::one());
    w.extend(m.iter().map(|&x| -x));
    let mut q = s.quad_form(&w);
    for k in 0..p {
        for l in 0..p {
            q += c[(k, l)] * s[(k + 1, l + 1)];
        }
    }
    q
}

/// `E[w wᵀ]` for `w = [1, −θ]`.
pub fn coefficient_outer<T: Real>(theta: &Gaussian<T>) -> Matrix<T> {
    let p = theta.dim();
    let m = theta.mean();
    let mut b = Matrix::zeros(p + 1, p + 1);
    b[(0, 0)] = T::one();
    for k in 0..p {
        b[(0, k + 1)] = -m[k];
        b[(k + 1, 0)] = -m[k];
        for l in 0..p {
            b[(k + 1, l + 1)] = m[k] * m[l] + theta.cov()[(k, l)];
        }
    }
    b
}

/// Message towards the precision edge as Gamma increments `(Δshape, Δrate)`.
pub fn message_to_precision<T: Real>(u: &LagMoments<T>, theta: &Gaussian<T>) -> Result<(T, T)> {
    u.check()?;
    let q = expected_sq_residual(u, theta);
    if !q.is_finite() {
        return Err(Error::NonFinite("AR node residual".into()));
    }
    Ok((T::c(0.5), T::c(0.5) * q))
}

/// Message towards the coefficient edge in natural form:
/// precision `E[γ] E[v vᵀ]`, precision-mean `E[γ] E[y v]`.
pub fn message_to_coefficients<T: Real>(u: &LagMoments<T>, mean_precision: T) -> Result<NaturalGaussian<T>> {
    u.check()?;
    let p = u.order();
    let s = u.second_moment();
    let mut precision = Matrix::zeros(p, p);
    let mut precision_mean = vec![T::zero(); p];
    for k in 0..p {
        precision_mean[k] = mean_precision * s[(0, k + 1)];
        for l in 0..p {
            precision[(k, l)] = mean_precision * s[(k + 1, l + 1)];
        }
    }
    Ok(NaturalGaussian { precision, precision_mean })
}

/// Joint message towards the stacked signal edges `u = [y, v]`:
/// precision `E[γ] E[w wᵀ]` with `w = [1, −θ]`, zero precision-mean.
pub fn message_to_states<T: Real>(theta: &Gaussian<T>, mean_precision: T) -> Result<NaturalGaussian<T>> {
    if theta.mean().iter().any(|v| !v.is_finite()) || !theta.cov().is_finite() || !mean_precision.is_finite() {
        return Err(Error::NonFinite("AR node coefficient statistics".into()));
    }
    let p = theta.dim();
    Ok(NaturalGaussian { precision: coefficient_outer(theta).scale(mean_precision), precision_mean: vec![T::zero(); p + 1] })
}

/// Average energy `E_q[−ln f]`.
pub fn average_energy<T: Real>(u: &LagMoments<T>, theta: &Gaussian<T>, mean_precision: T, mean_ln_precision: T) -> T {
    let half = T::c(0.5);
    half * T::c(LN_2PI) - half * mean_ln_precision + half * mean_precision * expected_sq_residual(u, theta)
}
