//! Gaussian-process classification of binary appraisals with a probit link,
//! fitted by the Laplace approximation.
//!
//! The Newton iteration works in the `a`-parameterization (`f = K a`) with
//! the symmetric `B = I + W½ K W½` factorization, which stays well conditioned
//! even when the Gram matrix is singular (repeated queries).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::real::Real;
use crate::special::{inv_mills, log_norm_cdf, norm_cdf};

/// Lower and upper bound for both kernel hyperparameters.
pub const HYPER_BOX: (f64, f64) = (0.1, 1.0);
/// Diagonal jitter on every Gram matrix.
pub const GRAM_JITTER: f64 = 1e-8;
/// Stationarity tolerance on `‖v̂ − K∇ ln p(r | v̂)‖∞`, relative to `max(1, ‖K‖∞)`.
pub const NEWTON_TOLERANCE: f64 = 1e-8;
pub const MAX_NEWTON_STEPS: usize = 100;

/// Squared-exponential kernel `σ² exp(−‖u − u′‖² / 2l²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    pub sigma: T,
    pub length: T,
}

impl<T: Real> Default for KernelParams<T> {
    fn default() -> Self {
        Self { sigma: T::c(0.5), length: T::c(0.5) }
    }
}

impl<T: Real> KernelParams<T> {
    pub fn new(sigma: T, length: T) -> Result<Self> {
        let (lo, hi) = (T::c(HYPER_BOX.0), T::c(HYPER_BOX.1));
        if !(sigma >= lo && sigma <= hi && length >= lo && length <= hi) {
            return Err(Error::InvalidParameter(format!("kernel params ({sigma}, {length}) outside [0.1, 1]")));
        }
        Ok(Self { sigma, length })
    }

    pub fn eval(&self, u: &[T], v: &[T]) -> T {
        let d2: T = u.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum();
        self.sigma * self.sigma * (-d2 / (T::c(2.0) * self.length * self.length)).exp()
    }

    /// Prior variance `K(u, u)`.
    pub fn variance(&self) -> T {
        self.sigma * self.sigma
    }
}

pub fn kernel_matrix<T: Real>(points: &[Vec<T>], params: &KernelParams<T>) -> Matrix<T> {
    let n = points.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.eval(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Queries and binary responses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppraisalDataset<T> {
    pub queries: Vec<Vec<T>>,
    pub responses: Vec<bool>,
}

impl<T: Real> AppraisalDataset<T> {
    pub fn new(queries: Vec<Vec<T>>, responses: Vec<bool>) -> Result<Self> {
        if queries.len() != responses.len() {
            return Err(Error::DimensionMismatch { expected: queries.len(), got: responses.len() });
        }
        Ok(Self { queries, responses })
    }

    pub fn push(&mut self, u: Vec<T>, r: bool) {
        self.queries.push(u);
        self.responses.push(r);
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.responses.iter().any(|&r| r) && self.responses.iter().any(|&r| !r)
    }

    fn signs(&self) -> Vec<T> {
        self.responses.iter().map(|&r| if r { T::one() } else { -T::one() }).collect()
    }
}

/// Laplace approximation at the posterior mode of the latent function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplacePosterior<T> {
    /// Posterior mode `v̂` at the queries.
    pub mode: Vec<T>,
    /// Negative log-likelihood Hessian diagonal at the mode.
    pub w: Vec<T>,
    /// `∇ ln p(r | v̂)`.
    pub grad: Vec<T>,
    /// Cholesky factor of `I + W½ K W½`.
    pub b_factor: Matrix<T>,
    /// Laplace approximation to the log marginal likelihood.
    pub log_evidence: T,
    pub newton_steps: usize,
}

struct Likelihood<T> {
    log_lik: T,
    grad: Vec<T>,
    w: Vec<T>,
}

fn probit<T: Real>(y: &[T], f: &[T]) -> Likelihood<T> {
    let mut log_lik = T::zero();
    let mut grad = Vec::with_capacity(f.len());
    let mut w = Vec::with_capacity(f.len());
    for (&yi, &fi) in y.iter().zip(f) {
        let z = yi * fi;
        log_lik += log_norm_cdf(z);
        let r = inv_mills(z);
        grad.push(yi * r);
        w.push((r * r + z * r).max(T::zero()));
    }
    Likelihood { log_lik, grad, w }
}

fn gram<T: Real>(data: &AppraisalDataset<T>, params: &KernelParams<T>) -> Matrix<T> {
    let mut k = kernel_matrix(&data.queries, params);
    k.add_diag(T::c(GRAM_JITTER));
    k
}

/// Round-off in `K∇` grows with the Gram norm, so the absolute tolerance is
/// scaled by the largest row sum once that exceeds one.
fn newton_tolerance<T: Real>(k: &Matrix<T>) -> f64 {
    let norm = (0..k.rows()).map(|i| k.row(i).iter().map(|v| v.f64().abs()).sum::<f64>()).fold(1.0, f64::max);
    NEWTON_TOLERANCE * norm
}

fn b_matrix<T: Real>(k: &Matrix<T>, sw: &[T]) -> Matrix<T> {
    let n = sw.len();
    let mut b = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += sw[i] * k[(i, j)] * sw[j];
        }
    }
    b
}

/// Newton iteration for the posterior mode with a backtracking line search
/// on `Ψ(a) = −½ aᵀK a + ln p(r | K a)`.
pub fn laplace_fit<T: Real>(data: &AppraisalDataset<T>, params: &KernelParams<T>) -> Result<LaplacePosterior<T>> {
    let n = data.len();
    let y = data.signs();
    let k = gram(data, params);
    let mut a = vec![T::zero(); n];
    let mut f = vec![T::zero(); n];
    let mut lik = probit(&y, &f);
    let objective = |a: &[T], f: &[T], lik: &Likelihood<T>| -T::c(0.5) * dot(a, f) + lik.log_lik;
    let mut psi = objective(&a, &f, &lik);
    let residual = |f: &[T], k: &Matrix<T>, grad: &[T]| {
        k.mul_vec(grad).iter().zip(f).map(|(&kg, &fi)| (fi - kg).abs()).fold(T::zero(), T::max)
    };
    let tolerance = newton_tolerance(&k);
    let mut res = residual(&f, &k, &lik.grad);
    let mut steps = 0;
    while res.f64() > tolerance {
        if steps == MAX_NEWTON_STEPS {
            return Err(Error::NoConvergence { steps, residual: res.f64() });
        }
        steps += 1;
        let sw: Vec<T> = lik.w.iter().map(|w| w.sqrt()).collect();
        let chol = Cholesky::jittered(&b_matrix(&k, &sw))?;
        let b: Vec<T> = (0..n).map(|i| lik.w[i] * f[i] + lik.grad[i]).collect();
        let kb = k.mul_vec(&b);
        let swkb: Vec<T> = (0..n).map(|i| sw[i] * kb[i]).collect();
        let sol = chol.solve(&swkb);
        let a_newton: Vec<T> = (0..n).map(|i| b[i] - sw[i] * sol[i]).collect();
        let delta: Vec<T> = a_newton.iter().zip(&a).map(|(&x, &y)| x - y).collect();

        let mut eta = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let a_try: Vec<T> = a.iter().zip(&delta).map(|(&x, &d)| x + eta * d).collect();
            let f_try = k.mul_vec(&a_try);
            let lik_try = probit(&y, &f_try);
            let psi_try = objective(&a_try, &f_try, &lik_try);
            let res_try = residual(&f_try, &k, &lik_try.grad);
            // Near the mode Ψ is flat to within round-off; a shrinking
            // stationarity residual then decides.
            let slack = T::epsilon() * T::c(64.0) * (T::one() + psi.abs());
            if psi_try > psi + slack || (psi_try >= psi - slack && res_try < res) {
                a = a_try;
                f = f_try;
                lik = lik_try;
                psi = psi_try;
                res = res_try;
                accepted = true;
                break;
            }
            eta *= T::c(0.5);
        }
        if !accepted {
            if res.f64() > tolerance {
                return Err(Error::NoConvergence { steps, residual: res.f64() });
            }
            break;
        }
    }
    let sw: Vec<T> = lik.w.iter().map(|w| w.sqrt()).collect();
    let chol = Cholesky::jittered(&b_matrix(&k, &sw))?;
    let half_logdet = chol.log_det() * T::c(0.5);
    Ok(LaplacePosterior {
        log_evidence: psi - half_logdet,
        mode: f,
        w: lik.w,
        grad: lik.grad,
        b_factor: chol.l().clone(),
        newton_steps: steps,
    })
}

/// Scalar Gaussian predictive `(μ, σ²)` of the latent at `u`.
pub fn predict<T: Real>(post: &LaplacePosterior<T>, data: &AppraisalDataset<T>, params: &KernelParams<T>, u: &[T]) -> Result<(T, T)> {
    let n = data.len();
    if post.mode.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: post.mode.len() });
    }
    let prior = params.variance();
    if n == 0 {
        return Ok((T::zero(), prior));
    }
    let ks: Vec<T> = data.queries.iter().map(|q| params.eval(q, u)).collect();
    let mean = dot(&ks, &post.grad);
    let v: Vec<T> = (0..n).map(|i| post.w[i].sqrt() * ks[i]).collect();
    let l = &post.b_factor;
    // Forward solve L z = v.
    let mut z = v;
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    let var = (prior - dot(&z, &z)).max(T::zero());
    if !mean.is_finite() || !var.is_finite() {
        return Err(Error::NonFinite("GPC predictive".into()));
    }
    Ok((mean, var))
}

/// `P(r = 1) = Φ(μ / √(σ² + 1))`.
pub fn class_prob<T: Real>(mean: T, var: T) -> T {
    norm_cdf(mean / (var.max(T::zero()) + T::one()).sqrt())
}

/// Laplace log evidence, or `−∞` when the fit fails.
pub fn log_evidence<T: Real>(data: &AppraisalDataset<T>, params: &KernelParams<T>) -> T {
    laplace_fit(data, params).map(|p| p.log_evidence).unwrap_or(T::neg_infinity())
}

fn project(x: [f64; 2]) -> [f64; 2] {
    let (lo, hi) = (HYPER_BOX.0.ln(), HYPER_BOX.1.ln());
    [x[0].clamp(lo, hi), x[1].clamp(lo, hi)]
}

fn objective_log<T: Real>(data: &AppraisalDataset<T>, x: [f64; 2]) -> f64 {
    let params = KernelParams { sigma: T::c(x[0].exp()), length: T::c(x[1].exp()) };
    log_evidence(data, &params).f64()
}

/// Central finite-difference gradient in log space, one-sided at the box.
fn fd_gradient<T: Real>(data: &AppraisalDataset<T>, x: [f64; 2]) -> [f64; 2] {
    let h = 1e-4;
    let (lo, hi) = (HYPER_BOX.0.ln(), HYPER_BOX.1.ln());
    let mut g = [0.0; 2];
    for i in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[i] = (x[i] + h).min(hi);
        xm[i] = (x[i] - h).max(lo);
        let fp = objective_log(data, xp);
        let fm = objective_log(data, xm);
        g[i] = if fp.is_finite() && fm.is_finite() { (fp - fm) / (xp[i] - xm[i]) } else { 0.0 };
    }
    g
}

/// Gradient with components pointing out of the box removed.
fn projected(g: [f64; 2], x: [f64; 2]) -> [f64; 2] {
    let (lo, hi) = (HYPER_BOX.0.ln(), HYPER_BOX.1.ln());
    let mut p = g;
    for i in 0..2 {
        if (x[i] <= lo && g[i] < 0.0) || (x[i] >= hi && g[i] > 0.0) {
            p[i] = 0.0;
        }
    }
    p
}

/// Maximize the Laplace evidence over `(σ, l)` in the box `[0.1, 1]²` by
/// projected Polak-Ribière conjugate gradients in log space.
///
/// Single-class data would push the evidence to a degenerate boundary, so
/// the current parameters are returned unchanged in that case.
pub fn optimize_hyperparams<T: Real>(data: &AppraisalDataset<T>, current: &KernelParams<T>) -> KernelParams<T> {
    if !data.has_both_classes() {
        return *current;
    }
    let mut x = project([current.sigma.f64().ln(), current.length.f64().ln()]);
    let mut fx = objective_log(data, x);
    if !fx.is_finite() {
        return *current;
    }
    let mut g = projected(fd_gradient(data, x), x);
    let mut d = g;
    for _ in 0..200 {
        let gnorm = g[0].abs().max(g[1].abs());
        if gnorm < 1e-7 {
            break;
        }
        let mut slope = g[0] * d[0] + g[1] * d[1];
        if slope <= 0.0 {
            d = g;
            slope = g[0] * g[0] + g[1] * g[1];
        }
        // Initial step: one unit of log-space movement along the direction, capped.
        let dnorm = d[0].abs().max(d[1].abs());
        let mut alpha = (1.0 / dnorm).min(10.0);
        let mut moved = false;
        for _ in 0..60 {
            let xn = project([x[0] + alpha * d[0], x[1] + alpha * d[1]]);
            let fn_ = objective_log(data, xn);
            let gain = g[0] * (xn[0] - x[0]) + g[1] * (xn[1] - x[1]);
            if fn_.is_finite() && fn_ >= fx + 1e-4 * gain.max(0.0) && fn_ >= fx {
                let step = (xn[0] - x[0]).abs().max((xn[1] - x[1]).abs());
                x = xn;
                fx = fn_;
                moved = step > 0.0;
                break;
            }
            alpha *= 0.5;
        }
        let _ = slope;
        if !moved {
            break;
        }
        let g_new = projected(fd_gradient(data, x), x);
        let num = g_new[0] * (g_new[0] - g[0]) + g_new[1] * (g_new[1] - g[1]);
        let den = g[0] * g[0] + g[1] * g[1];
        let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
        d = projected([g_new[0] + beta * d[0], g_new[1] + beta * d[1]], x);
        g = g_new;
    }
    KernelParams { sigma: T::c(x[0].exp()), length: T::c(x[1].exp()) }
}

/// Dataset, hyperparameters and the current fit for one context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpcState<T> {
    pub data: AppraisalDataset<T>,
    pub params: KernelParams<T>,
    pub posterior: LaplacePosterior<T>,
}

impl<T: Real> Default for GpcState<T> {
    fn default() -> Self {
        let data = AppraisalDataset::default();
        let params = KernelParams::default();
        let posterior = laplace_fit(&data, &params).expect("empty fit");
        Self { data, params, posterior }
    }
}

impl<T: Real> GpcState<T> {
    pub fn refit(&mut self) -> Result<()> {
        self.posterior = laplace_fit(&self.data, &self.params)?;
        Ok(())
    }

    pub fn predict(&self, u: &[T]) -> Result<(T, T)> {
        predict(&self.posterior, &self.data, &self.params, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data1d(points: &[(f64, bool)]) -> AppraisalDataset<f64> {
        AppraisalDataset::new(points.iter().map(|p| vec![p.0]).collect(), points.iter().map(|p| p.1).collect()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::new(0.5, 0.5).unwrap();
        assert_eq!(p.eval(&[0.3, 0.1], &[0.3, 0.1]), 0.25);
        assert!(p.eval(&[0.0, 0.0], &[100.0, 0.0]) < 1e-300);
        let expected = 0.25 * (-0.5_f64).exp();
        assert!((p.eval(&[0.0, 0.0], &[0.5, 0.0]) - expected).abs() < 1e-15);
        assert!(KernelParams::new(0.05, 0.5).is_err());
    }

    #[test]
    fn single_positive_pulls_mode_up() {
        let post = laplace_fit(&data1d(&[(0.3, true)]), &KernelParams::default()).unwrap();
        assert!(post.mode[0] > 0.0);
        let post = laplace_fit(&data1d(&[(0.3, false)]), &KernelParams::default()).unwrap();
        assert!(post.mode[0] < 0.0);
    }

    #[test]
    fn contradicting_responses_cancel() {
        let post = laplace_fit(&data1d(&[(0.4, true), (0.4, false)]), &KernelParams::default()).unwrap();
        assert!(post.mode.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn empty_data_predicts_prior() {
        let data = AppraisalDataset::<f64>::default();
        let p = KernelParams::default();
        let post = laplace_fit(&data, &p).unwrap();
        assert_eq!(predict(&post, &data, &p, &[0.2, 0.2]).unwrap(), (0.0, 0.25));
    }

    #[test]
    fn far_point_reverts_to_prior() {
        let data = data1d(&[(0.1, true), (0.2, false), (0.3, true)]);
        let p = KernelParams::default();
        let post = laplace_fit(&data, &p).unwrap();
        let (m, v) = predict(&post, &data, &p, &[20.0]).unwrap();
        assert!(m.abs() < 1e-3 && (v - 0.25).abs() < 1e-3);
    }

    #[test]
    fn class_prob_examples() {
        assert_eq!(class_prob(0.0, 3.0), 0.5);
        assert!((class_prob(1.0_f64, 0.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!(class_prob(40.0, 1.0) > 1.0 - 1e-12);
    }

    #[test]
    fn single_class_guard_keeps_params() {
        let data = data1d(&[(0.1, true), (0.5, true)]);
        let p = KernelParams::new(0.3, 0.7).unwrap();
        assert_eq!(optimize_hyperparams(&data, &p), p);
    }

    #[test]
    fn optimizer_ascends_and_stays_in_box() {
        let data = data1d(&[(0.1, false), (0.3, false), (0.5, true), (0.55, true), (0.9, false)]);
        let start = KernelParams::default();
        let opt = optimize_hyperparams(&data, &start);
        assert!(log_evidence(&data, &opt) >= log_evidence(&data, &start));
        assert!(KernelParams::new(opt.sigma, opt.length).is_ok());
    }
}
