//! Distribution values used as messages and marginals throughout the engine.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigenvalues, Cholesky, Matrix};
use crate::real::Real;
use crate::special::{digamma, ln_gamma, LN_2PI};

/// Differential (or discrete) entropy in nats.
pub trait Entropy<T> {
    fn entropy(&self) -> Result<T>;
}

/// Reproducible draws from a seeded generator.
pub trait Sample {
    type Value;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Value;
}

/// Multivariate Gaussian in moment form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
}

impl<T: Real> Gaussian<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Empty("gaussian mean"));
        }
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.rows() });
        }
        if !cov.is_finite() || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        if cov.asymmetry() > T::c(1e-10) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let floor = -T::c(1e-10) * cov.trace().abs();
        if symmetric_eigenvalues(&cov).first().is_some_and(|&e| e < floor) {
            return Err(Error::InvalidParameter("covariance is not positive semidefinite".into()));
        }
        Ok(Self { mean, cov })
    }

    /// Construct without the eigenvalue check; callers guarantee validity.
    pub(crate) fn from_parts(mean: Vec<T>, cov: Matrix<T>) -> Self {
        debug_assert_eq!(mean.len(), cov.rows());
        Self { mean, cov }
    }

    pub fn univariate(mean: T, variance: T) -> Result<Self> {
        if !(variance >= T::zero()) {
            return Err(Error::InvalidParameter(format!("variance {variance} < 0")));
        }
        Self::new(vec![mean], Matrix::from_diag(&[variance]))
    }

    pub fn isotropic(mean: Vec<T>, variance: T) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, Matrix::scaled_identity(d, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    /// Variance of a univariate Gaussian (first diagonal entry otherwise).
    pub fn variance(&self) -> T {
        self.cov[(0, 0)]
    }

    /// `E[x xᵀ] = Σ + μ μᵀ`.
    pub fn second_moment(&self) -> Matrix<T> {
        self.cov.add(&Matrix::outer(&self.mean, &self.mean))
    }

    pub fn precision(&self) -> Result<Matrix<T>> {
        Ok(Cholesky::jittered(&self.cov)?.inverse())
    }

    /// Precision-adjusted mean `Λ μ`.
    pub fn precision_mean(&self) -> Result<Vec<T>> {
        Ok(Cholesky::jittered(&self.cov)?.solve(&self.mean))
    }

    pub fn to_natural(&self) -> Result<NaturalGaussian<T>> {
        let chol = Cholesky::jittered(&self.cov)?;
        Ok(NaturalGaussian { precision: chol.inverse(), precision_mean: chol.solve(&self.mean) })
    }

    pub fn from_natural(precision: &Matrix<T>, precision_mean: &[T]) -> Result<Self> {
        if precision.rows() != precision_mean.len() {
            return Err(Error::DimensionMismatch { expected: precision.rows(), got: precision_mean.len() });
        }
        let chol = Cholesky::jittered(precision)?;
        Ok(Self::from_parts(chol.solve(precision_mean), chol.inverse().symmetrize()))
    }

    pub fn log_pdf(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let chol = Cholesky::jittered(&self.cov)?;
        let r: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        let z = chol.forward(&r);
        let d = T::from_usize_lossy(self.dim());
        Ok(-T::c(0.5) * (dot(&z, &z) + chol.log_det() + d * T::c(LN_2PI)))
    }

    /// Marginal over a contiguous index range.
    pub fn marginal(&self, start: usize, len: usize) -> Self {
        Self::from_parts(self.mean[start..start + len].to_vec(), self.cov.block(start, start, len, len))
    }
}

impl<T: Real> Entropy<T> for Gaussian<T> {
    fn entropy(&self) -> Result<T> {
        let chol = Cholesky::new(&self.cov).map_err(|_| Error::Singular("degenerate covariance in entropy"))?;
        let d = T::from_usize_lossy(self.dim());
        Ok(T::c(0.5) * (d * (T::c(LN_2PI) + T::one()) + chol.log_det()))
    }
}

impl<T: Real> Sample for Gaussian<T> {
    type Value = Vec<T>;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let d = self.dim();
        let chol = Cholesky::jittered(&self.cov).unwrap_or_else(|_| {
            // Zero covariance: clamp to a numerically negligible spread.
            let mut c = self.cov.clone();
            c.add_diag(T::c(1e-24));
            Cholesky::jittered(&c).expect("clamped covariance factorizes")
        });
        let z: Vec<T> = (0..d).map(|_| T::c(StandardNormal.sample(rng))).collect();
        let l = chol.l();
        (0..d).map(|i| self.mean[i] + dot(&l.row(i)[..=i], &z[..=i])).collect()
    }
}

/// Unnormalized exponential-quadratic factor `exp(ηᵀx − ½ xᵀΛx)`.
///
/// Zero precision is the uninformative (constant) message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalGaussian<T> {
    pub precision: Matrix<T>,
    pub precision_mean: Vec<T>,
}

impl<T: Real> NaturalGaussian<T> {
    pub fn uninformative(d: usize) -> Self {
        Self { precision: Matrix::zeros(d, d), precision_mean: vec![T::zero(); d] }
    }

    pub fn dim(&self) -> usize {
        self.precision_mean.len()
    }

    /// Product of two factors: natural parameters add.
    pub fn combine(&self, other: &Self) -> Self {
        let mut precision_mean = self.precision_mean.clone();
        for (a, &b) in precision_mean.iter_mut().zip(&other.precision_mean) {
            *a += b;
        }
        Self { precision: self.precision.add(&other.precision), precision_mean }
    }
}

/// Normalized product of two Gaussian densities and the log of
/// `∫ a(x) b(x) dx`.
pub fn gaussian_multiply<T: Real>(a: &Gaussian<T>, b: &Gaussian<T>) -> Result<(Gaussian<T>, T)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    // Scale: N(μa; μb, Σa + Σb).
    let sum_cov = a.cov.add(&b.cov);
    let scale = Gaussian::from_parts(b.mean.clone(), sum_cov).log_pdf(&a.mean)?;
    let na = a.to_natural()?;
    let nb = b.to_natural()?;
    let prod = na.combine(&nb);
    let chol = Cholesky::new(&prod.precision).map_err(|_| Error::Singular("combined precision"))?;
    let g = Gaussian::from_parts(chol.solve(&prod.precision_mean), chol.inverse().symmetrize());
    Ok((g, scale))
}

/// Multiply a Gaussian by an unnormalized natural-form factor; returns the
/// normalized product and `ln ∫ N(x) exp(ηᵀx − ½xᵀΛx) dx`.
pub fn gaussian_multiply_natural<T: Real>(a: &Gaussian<T>, b: &NaturalGaussian<T>) -> Result<(Gaussian<T>, T)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let a_chol = Cholesky::jittered(&a.cov)?;
    let a_prec = a_chol.inverse();
    let a_h = a_chol.solve(&a.mean);
    let prec = a_prec.add(&b.precision);
    let h: Vec<T> = a_h.iter().zip(&b.precision_mean).map(|(&x, &y)| x + y).collect();
    let chol = Cholesky::new(&prec).map_err(|_| Error::Singular("combined precision"))?;
    let mean = chol.solve(&h);
    let half = T::c(0.5);
    let log_scale = -half * a_chol.log_det() - half * chol.log_det() + half * dot(&h, &mean) - half * dot(&a.mean, &a_h);
    Ok((Gaussian::from_parts(mean, chol.inverse().symmetrize()), log_scale))
}

/// Gamma distribution, shape/rate parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma<T> {
    shape: T,
    rate: T,
}

impl<T: Real> Gamma<T> {
    pub fn new(shape: T, rate: T) -> Result<Self> {
        if !(shape > T::zero() && rate > T::zero()) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma shape {shape}, rate {rate}")));
        }
        Ok(Self { shape, rate })
    }

    /// Moment-matched Gamma with the given mean and shape.
    pub fn with_mean(mean: T, shape: T) -> Result<Self> {
        Self::new(shape, shape / mean)
    }

    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn mean(&self) -> T {
        self.shape / self.rate
    }

    pub fn variance(&self) -> T {
        self.shape / (self.rate * self.rate)
    }

    /// `E[ln x] = ψ(α) − ln β`.
    pub fn mean_ln(&self) -> T {
        digamma(self.shape) - self.rate.ln()
    }

    pub fn log_pdf(&self, x: T) -> T {
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - T::one()) * x.ln() - self.rate * x
    }

    /// `E_q[−ln p(x)]` for this density `p` under another Gamma `q`.
    pub fn cross_entropy_from(&self, q: &Gamma<T>) -> T {
        -self.shape * self.rate.ln() + ln_gamma(self.shape) - (self.shape - T::one()) * q.mean_ln() + self.rate * q.mean()
    }
}

impl<T: Real> Entropy<T> for Gamma<T> {
    fn entropy(&self) -> Result<T> {
        let a = self.shape;
        Ok(a - self.rate.ln() + ln_gamma(a) + (T::one() - a) * digamma(a))
    }
}

impl<T: Real> Sample for Gamma<T> {
    type Value = T;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let g = rand_distr::Gamma::new(self.shape.f64(), 1.0 / self.rate.f64()).expect("validated gamma");
        T::c(g.sample(rng))
    }
}

/// Categorical distribution over `L ≥ 1` outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Categorical<T> {
    probs: Vec<T>,
}

impl<T: Real> Categorical<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("categorical"));
        }
        if probs.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(Error::InvalidParameter("negative or non-finite probability".into()));
        }
        let s: T = probs.iter().copied().sum();
        if (s - T::one()).abs() > T::c(1e-9).max(T::epsilon() * T::c(16.0)) {
            return Err(Error::InvalidParameter(format!("probabilities sum to {s}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(l: usize) -> Self {
        assert!(l >= 1);
        Self { probs: vec![T::one() / T::from_usize_lossy(l); l] }
    }

    pub fn one_hot(l: usize, i: usize) -> Self {
        let mut probs = vec![T::zero(); l];
        probs[i] = T::one();
        Self { probs }
    }

    /// Normalize nonnegative weights.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        let s: T = weights.iter().copied().sum();
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidParameter("weights do not normalize".into()));
        }
        Self::new(weights.iter().map(|&w| w / s).collect())
    }

    /// Normalize log-weights in the log domain; `-∞` entries get zero mass.
    pub fn from_log_weights(logw: &[T]) -> Result<Self> {
        let lse = crate::special::log_sum_exp(logw);
        if !lse.is_finite() {
            return Err(Error::NonFinite("log weights".into()));
        }
        let probs: Vec<T> = logw.iter().map(|&w| (w - lse).exp()).collect();
        let s: T = probs.iter().copied().sum();
        Self::new(probs.into_iter().map(|p| p / s).collect())
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

impl<T: Real> Entropy<T> for Categorical<T> {
    fn entropy(&self) -> Result<T> {
        Ok(-self.probs.iter().filter(|&&p| p > T::zero()).map(|&p| p * p.ln()).sum::<T>())
    }
}

impl<T: Real> Sample for Categorical<T> {
    type Value = usize;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::c(rng.random::<f64>());
        let mut acc = T::zero();
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left a sliver above the last cumulative value.
        self.probs.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
    }
}

/// Independent Dirichlet priors over the columns of an `L × L` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletCols<T> {
    alphas: Matrix<T>,
}

impl<T: Real> DirichletCols<T> {
    pub fn new(alphas: Matrix<T>) -> Result<Self> {
        if !alphas.is_square() || alphas.rows() == 0 {
            return Err(Error::InvalidParameter("concentration matrix must be square and nonempty".into()));
        }
        if alphas.as_slice().iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::InvalidParameter("concentrations must be positive".into()));
        }
        Ok(Self { alphas })
    }

    pub fn symmetric(l: usize, alpha: T) -> Result<Self> {
        Self::new(Matrix::from_row_major(l, l, vec![alpha; l * l]))
    }

    pub fn alphas(&self) -> &Matrix<T> {
        &self.alphas
    }

    pub fn dim(&self) -> usize {
        self.alphas.rows()
    }

    /// Column-normalized concentration matrix, `E[T]`.
    pub fn mean_matrix(&self) -> Matrix<T> {
        let l = self.dim();
        let mut m = self.alphas.clone();
        for j in 0..l {
            let s: T = (0..l).map(|i| self.alphas[(i, j)]).sum();
            for i in 0..l {
                m[(i, j)] = self.alphas[(i, j)] / s;
            }
        }
        m
    }

    /// Add pseudo-counts to the concentrations.
    pub fn add_counts(&mut self, counts: &Matrix<T>) -> Result<()> {
        if counts.rows() != self.dim() || counts.cols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: counts.rows() });
        }
        self.alphas = self.alphas.add(counts);
        Ok(())
    }
}

impl<T: Real> Sample for DirichletCols<T> {
    type Value = Matrix<T>;

    /// A column-stochastic matrix with each column drawn from its Dirichlet.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix<T> {
        let l = self.dim();
        let mut m = Matrix::zeros(l, l);
        for j in 0..l {
            let draws: Vec<f64> = (0..l)
                .map(|i| {
                    rand_distr::Gamma::new(self.alphas[(i, j)].f64(), 1.0).expect("positive concentration").sample(rng)
                })
                .collect();
            let s: f64 = draws.iter().sum();
            for i in 0..l {
                m[(i, j)] = T::c(draws[i] / s);
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bernoulli<T> {
    p: T,
}

impl<T: Real> Bernoulli<T> {
    pub fn new(p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidParameter(format!("bernoulli p = {p}")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> T {
        self.p
    }
}

impl<T: Real> Sample for Bernoulli<T> {
    type Value = bool;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        if self.p >= T::one() {
            return true;
        }
        T::c(rng.random::<f64>()) < self.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::{E, PI};

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            s += f(lo + i as f64 * h);
        }
        s * h
    }

    fn npdf(x: f64, m: f64, v: f64) -> f64 {
        (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
    }

    #[test]
    fn standard_product() {
        let a = Gaussian::univariate(0.0_f64, 1.0).unwrap();
        let (g, s) = gaussian_multiply(&a, &a).unwrap();
        assert!(g.mean()[0].abs() < 1e-15);
        assert!((g.variance() - 0.5).abs() < 1e-15);
        assert!((s + 0.5 * (4.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn uninformative_factor_is_identity() {
        let a = Gaussian::new(vec![1.0_f64, -2.0], Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]])).unwrap();
        let (g, s) = gaussian_multiply_natural(&a, &NaturalGaussian::uninformative(2)).unwrap();
        for i in 0..2 {
            assert!((g.mean()[i] - a.mean()[i]).abs() < 1e-12);
            for j in 0..2 {
                assert!((g.cov()[(i, j)] - a.cov()[(i, j)]).abs() < 1e-12);
            }
        }
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn product_matches_quadrature() {
        let a = Gaussian::univariate(1.0_f64, 2.0).unwrap();
        let b = Gaussian::univariate(3.0, 4.0).unwrap();
        let (g, s) = gaussian_multiply(&a, &b).unwrap();
        let f = |x: f64| npdf(x, 1.0, 2.0) * npdf(x, 3.0, 4.0);
        let z = trapezoid(f, -30.0, 30.0, 200_000);
        let m = trapezoid(|x| x * f(x), -30.0, 30.0, 200_000) / z;
        let v = trapezoid(|x| (x - m) * (x - m) * f(x), -30.0, 30.0, 200_000) / z;
        assert!((s.exp() - z).abs() < 1e-6);
        assert!((g.mean()[0] - m).abs() < 1e-6);
        assert!((g.variance() - v).abs() < 1e-6);
    }

    #[test]
    fn singular_combined_precision_errors() {
        let point = Gaussian::univariate(0.0_f64, 0.0).unwrap();
        let flat = NaturalGaussian { precision: Matrix::from_diag(&[-1.0_f64]), precision_mean: vec![0.0] };
        let unit = Gaussian::univariate(0.0_f64, 1.0).unwrap();
        assert!(matches!(gaussian_multiply_natural(&unit, &flat), Err(Error::Singular(_))));
        assert!(point.entropy().is_err());
        let bad = Gaussian::univariate(0.0_f64, 1.0).unwrap();
        let two = Gaussian::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(gaussian_multiply(&bad, &two), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gaussian_entropy_closed_form() {
        let h = Gaussian::univariate(0.0_f64, 1.0).unwrap().entropy().unwrap();
        assert!((h - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-12);
        assert!((h - 1.4189).abs() < 1e-4);
        assert!(Gaussian::univariate(0.0_f64, 0.0).unwrap().entropy().is_err());
    }

    #[test]
    fn categorical_entropy_deterministic_is_zero() {
        let c = Categorical::new(vec![1.0_f64, 0.0, 0.0]).unwrap();
        assert_eq!(c.entropy().unwrap(), 0.0);
    }

    #[test]
    fn gamma_entropy_monte_carlo() {
        let g = Gamma::new(2.0_f64, 3.0).unwrap();
        let mut rng = seeded(11);
        let n = 1_000_000;
        let mc = -(0..n).map(|_| g.log_pdf(g.sample(&mut rng))).sum::<f64>() / n as f64;
        assert!((g.entropy().unwrap() - mc).abs() < 1e-2, "{} vs {mc}", g.entropy().unwrap());
    }

    #[test]
    fn zero_variance_sample_clamps() {
        let g = Gaussian::univariate(5.0_f64, 0.0).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert!((g.sample(&mut rng)[0] - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_categorical_frequencies() {
        let c = Categorical::<f64>::uniform(4);
        let mut rng = seeded(3);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[c.sample(&mut rng)] += 1;
        }
        for k in counts {
            assert!((k as f64 / n as f64 - 0.25).abs() < 0.005);
        }
    }

    #[test]
    fn seeded_replay_is_identical() {
        let g = Gaussian::isotropic(vec![0.0_f64; 3], 2.0).unwrap();
        let a: Vec<Vec<f64>> = {
            let mut r = seeded(99);
            (0..10).map(|_| g.sample(&mut r)).collect()
        };
        let b: Vec<Vec<f64>> = {
            let mut r = seeded(99);
            (0..10).map(|_| g.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_moments_within_three_standard_errors() {
        let mut rng = seeded(5);
        let n = 100_000;
        let g = Gaussian::univariate(2.0_f64, 3.0).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)[0]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        assert!((m - 2.0).abs() < 3.0 * (3.0 / n as f64).sqrt());
        let gm = Gamma::new(3.0_f64, 2.0).unwrap();
        let ys: Vec<f64> = (0..n).map(|_| gm.sample(&mut rng)).collect();
        let my = ys.iter().sum::<f64>() / n as f64;
        assert!((my - 1.5).abs() < 3.0 * (gm.variance() / n as f64).sqrt());
    }

    #[test]
    fn validation_rejects_bad_values() {
        assert!(Gamma::new(0.0_f64, 1.0).is_err());
        assert!(Categorical::new(vec![0.5_f64, 0.4]).is_err());
        assert!(Bernoulli::new(1.5_f64).is_err());
        assert!(DirichletCols::new(Matrix::from_diag(&[1.0_f64, 0.0])).is_err());
        let asym = Matrix::from_rows(&[vec![1.0_f64, 0.5], vec![0.0, 1.0]]);
        assert!(Gaussian::new(vec![0.0, 0.0], asym).is_err());
        let neg = Matrix::from_rows(&[vec![1.0_f64, 2.0], vec![2.0, 1.0]]);
        assert!(Gaussian::new(vec![0.0, 0.0], neg).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let a = Gaussian::<f32>::univariate(1.0, 2.0).unwrap();
        let b = Gaussian::<f32>::univariate(3.0, 4.0).unwrap();
        let (g, _) = gaussian_multiply(&a, &b).unwrap();
        // Precision-weighted mean: (1/2 + 3/4) / (1/2 + 1/4) = 5/3.
        assert!((g.mean()[0] - 5.0 / 3.0).abs() < 1e-5);
    }
}
