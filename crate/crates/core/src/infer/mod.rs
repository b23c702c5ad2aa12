//! Structured variational inference for a frame of the coupled
//! speech-plus-noise model `x_t = s_t + n_t`, with TVAR speech and AR noise.
//!
//! The observation node is exact, so the noise samples inside the frame are
//! eliminated by the substitution `n_t = x_t − s_t` (unit Jacobian). What
//! remains is one joint Gaussian over the speech samples and any latent
//! initial noise states, updated in a single block; the coefficient chains
//! and the precisions are separate mean-field factors. Every factor update
//! is an exact coordinate minimization, so the free-energy trace never
//! increases (up to floating-point round-off) when damping is off.
//!
//! Channels are described by [`SourceModel`]: an order (zero for white
//! noise), a coefficient prior that is either known or Gaussian with an
//! optional random-walk variance, a precision that is known or Gamma
//! distributed, and the initial state. The speech channel is optional, which
//! turns the engine into a plain AR evidence calculator.

pub mod ar_node;
mod chain;

use serde::{Deserialize, Serialize};

use crate::dists::{Entropy, Gamma, Gaussian, NaturalGaussian};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::real::Real;
use crate::special::LN_2PI;

use ar_node::LagMoments;
use chain::CoefficientPosterior;

/// Prior over the AR coefficients of one channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoefficientPrior<T> {
    Known(Vec<T>),
    /// Gaussian prior on the initial coefficients; a positive walk variance
    /// makes them time-varying (`θ_t = θ_{t−1} + N(0, ωI)`).
    Gaussian { prior: Gaussian<T>, walk_variance: T },
}

/// Prior over the innovation precision of one channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PrecisionPrior<T> {
    Known(T),
    Gamma(Gamma<T>),
}

/// State preceding the first sample of a frame, most recent first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StateInit<T> {
    /// Latent with a Gaussian prior.
    Prior(Gaussian<T>),
    /// Noise only: previous observations `[x_0, x_{-1}, ...]`. The initial
    /// noise state is then `x_j − s_j`, or `x_j` itself without speech.
    Observed(Vec<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceModel<T> {
    pub coefficients: CoefficientPrior<T>,
    pub precision: PrecisionPrior<T>,
    pub init: StateInit<T>,
}

impl<T: Real> SourceModel<T> {
    /// Static AR coefficients with a Gaussian prior.
    pub fn ar(prior: Gaussian<T>, precision: PrecisionPrior<T>, init: StateInit<T>) -> Self {
        Self { coefficients: CoefficientPrior::Gaussian { prior, walk_variance: T::zero() }, precision, init }
    }

    /// Time-varying AR coefficients following a Gaussian random walk.
    pub fn tvar(prior: Gaussian<T>, walk_variance: T, precision: PrecisionPrior<T>, init: StateInit<T>) -> Self {
        Self { coefficients: CoefficientPrior::Gaussian { prior, walk_variance }, precision, init }
    }

    pub fn known(coefficients: Vec<T>, precision: PrecisionPrior<T>, init: StateInit<T>) -> Self {
        Self { coefficients: CoefficientPrior::Known(coefficients), precision, init }
    }

    /// Independent Gaussian samples (order zero).
    pub fn white(precision: PrecisionPrior<T>) -> Self {
        Self { coefficients: CoefficientPrior::Known(Vec::new()), precision, init: StateInit::Observed(Vec::new()) }
    }

    pub fn order(&self) -> usize {
        match &self.coefficients {
            CoefficientPrior::Known(c) => c.len(),
            CoefficientPrior::Gaussian { prior, .. } => prior.dim(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let p = self.order();
        if let CoefficientPrior::Gaussian { walk_variance, .. } = &self.coefficients {
            if !(*walk_variance >= T::zero()) || !walk_variance.is_finite() {
                return Err(Error::InvalidParameter(format!("{name}: walk variance {walk_variance}")));
            }
        }
        if let PrecisionPrior::Known(v) = self.precision {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name}: precision {v}")));
            }
        }
        let init_len = match &self.init {
            StateInit::Prior(g) => g.dim(),
            StateInit::Observed(v) => v.len(),
        };
        if p > 0 && init_len != p {
            return Err(Error::DimensionMismatch { expected: p, got: init_len });
        }
        Ok(())
    }
}

/// Generative model for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledModelSpec<T> {
    pub speech: Option<SourceModel<T>>,
    pub noise: SourceModel<T>,
}

impl<T: Real> CoupledModelSpec<T> {
    pub fn coupled(speech: SourceModel<T>, noise: SourceModel<T>) -> Self {
        Self { speech: Some(speech), noise }
    }

    pub fn noise_only(noise: SourceModel<T>) -> Self {
        Self { speech: None, noise }
    }

    pub fn speech_order(&self) -> usize {
        self.speech.as_ref().map_or(0, SourceModel::order)
    }

    pub fn noise_order(&self) -> usize {
        self.noise.order()
    }

    pub fn validate(&self, frame_len: usize) -> Result<()> {
        let m = self.speech_order();
        let n = self.noise_order();
        if let Some(s) = &self.speech {
            s.validate("speech")?;
            if m == 0 {
                return Err(Error::InvalidParameter("speech order must be at least 1".into()));
            }
            if !matches!(s.init, StateInit::Prior(_)) {
                return Err(Error::InvalidParameter("speech initial state needs a Gaussian prior".into()));
            }
            if matches!(self.noise.init, StateInit::Observed(_)) && n > m {
                return Err(Error::InvalidParameter(format!("observed noise history needs noise order {n} <= speech order {m}")));
            }
        }
        self.noise.validate("noise")?;
        if frame_len < m.max(n) + 1 {
            return Err(Error::InvalidParameter(format!("frame length {frame_len} shorter than order + 1")));
        }
        Ok(())
    }
}

/// Iteration control for [`infer_frame`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmpSchedule {
    pub max_iterations: usize,
    /// Stop once the absolute free-energy change falls below this.
    pub bfe_tolerance: f64,
    /// Weight on the previous iterate for the signal and precision factors.
    pub damping: f64,
}

impl Default for VmpSchedule {
    fn default() -> Self {
        Self { max_iterations: 25, bfe_tolerance: 1e-6, damping: 0.0 }
    }
}

impl VmpSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.bfe_tolerance > 0.0) {
            return Err(Error::InvalidParameter("bfe_tolerance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter("damping must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PrecisionPosterior<T> {
    Known(T),
    Gamma(Gamma<T>),
}

impl<T: Real> PrecisionPosterior<T> {
    pub fn mean(&self) -> T {
        match self {
            Self::Known(v) => *v,
            Self::Gamma(g) => g.mean(),
        }
    }

    pub fn mean_ln(&self) -> T {
        match self {
            Self::Known(v) => v.ln(),
            Self::Gamma(g) => g.mean_ln(),
        }
    }
}

/// Posterior summaries for one source within a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePosterior<T> {
    /// `E[x_t]` for `t = 1..=W`.
    pub mean: Vec<T>,
    /// `Var[x_t]` for `t = 1..=W`.
    pub var: Vec<T>,
    /// `q(θ_t)` for `t = 1..=W` (identical entries for static coefficients).
    pub coefficients: Vec<Gaussian<T>>,
    pub precision: PrecisionPosterior<T>,
}

impl<T: Real> SourcePosterior<T> {
    pub fn marginal(&self, t: usize) -> Gaussian<T> {
        Gaussian::from_parts(vec![self.mean[t]], Matrix::from_diag(&[self.var[t]]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LatentSnapshot<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    log_det_cov: T,
}

/// Variational posteriors for one frame and the free-energy trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posteriors<T> {
    pub speech: Option<SourcePosterior<T>>,
    pub noise: SourcePosterior<T>,
    /// Joint posterior over the last `M` speech samples, most recent first.
    pub speech_tail: Option<Gaussian<T>>,
    /// Free energy after every iteration.
    pub bfe_trace: Vec<T>,
    pub converged: bool,
    latent: LatentSnapshot<T>,
    coefficient_free: [T; 2],
}

impl<T: Real> Posteriors<T> {
    /// Final free energy of the frame.
    pub fn bfe(&self) -> T {
        *self.bfe_trace.last().expect("at least one iteration")
    }

    pub fn iterations(&self) -> usize {
        self.bfe_trace.len()
    }

    /// Model for the following frame: state chains continue from the end of
    /// this frame and, per the policy, parameter posteriors become priors.
    pub fn next_spec(&self, spec: &CoupledModelSpec<T>, x: &[T], policy: CarryPolicy) -> Result<CoupledModelSpec<T>> {
        let carry = |model: &SourceModel<T>, post: &SourcePosterior<T>, params: bool, init: StateInit<T>| {
            let mut next = model.clone();
            next.init = init;
            if params {
                if let CoefficientPrior::Gaussian { walk_variance, .. } = &model.coefficients {
                    next.coefficients = CoefficientPrior::Gaussian {
                        prior: post.coefficients.last().expect("nonempty frame").clone(),
                        walk_variance: *walk_variance,
                    };
                }
                if let PrecisionPosterior::Gamma(g) = post.precision {
                    next.precision = PrecisionPrior::Gamma(g);
                }
            }
            next
        };
        let speech = match (&spec.speech, &self.speech, &self.speech_tail) {
            (Some(model), Some(post), Some(tail)) => Some(carry(model, post, policy.speech_parameters, StateInit::Prior(tail.clone()))),
            (None, _, _) => None,
            _ => return Err(Error::InvalidParameter("posteriors do not match the model".into())),
        };
        let n = spec.noise_order();
        if x.len() < n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let tail: Vec<T> = x.iter().rev().take(n).copied().collect();
        let noise = carry(&spec.noise, &self.noise, policy.noise_parameters, StateInit::Observed(tail));
        Ok(CoupledModelSpec { speech, noise })
    }
}

/// Which parameter posteriors are carried into the next frame as priors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarryPolicy {
    pub speech_parameters: bool,
    pub noise_parameters: bool,
}

impl Default for CarryPolicy {
    fn default() -> Self {
        Self { speech_parameters: true, noise_parameters: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Channel {
    Speech,
    Noise,
}

/// A signal value as an affine function of the latent vector:
/// `coef · z[idx] + offset`, or the constant `offset`.
#[derive(Clone, Copy, Debug)]
struct Affine<T> {
    idx: Option<usize>,
    coef: T,
    offset: T,
}

/// Latent vector layout: speech samples `s_{1−M} ..= s_W` in time order,
/// then latent initial noise samples `n_{1−N} ..= n_0`.
struct Layout<'a, T> {
    x: &'a [T],
    w: usize,
    m: usize,
    n: usize,
    speech: bool,
    noise_history: Option<&'a [T]>,
    dim: usize,
}

impl<'a, T: Real> Layout<'a, T> {
    fn new(spec: &'a CoupledModelSpec<T>, x: &'a [T]) -> Self {
        let w = x.len();
        let m = spec.speech_order();
        let n = spec.noise_order();
        let speech = spec.speech.is_some();
        let noise_history = match &spec.noise.init {
            StateInit::Observed(v) => Some(v.as_slice()),
            StateInit::Prior(_) => None,
        };
        let speech_len = if speech { w + m } else { 0 };
        let dim = speech_len + if noise_history.is_none() { n } else { 0 };
        Self { x, w, m, n, speech, noise_history, dim }
    }

    fn speech_len(&self) -> usize {
        if self.speech {
            self.w + self.m
        } else {
            0
        }
    }

    fn speech_index(&self, t: isize) -> usize {
        (t + self.m as isize - 1) as usize
    }

    fn noise_init_index(&self, j: isize) -> usize {
        self.speech_len() + (j + self.n as isize - 1) as usize
    }

    fn latent(idx: usize, coef: T, offset: T) -> Affine<T> {
        Affine { idx: Some(idx), coef, offset }
    }

    fn constant(offset: T) -> Affine<T> {
        Affine { idx: None, coef: T::zero(), offset }
    }

    fn value(&self, ch: Channel, t: isize) -> Affine<T> {
        match ch {
            Channel::Speech => Self::latent(self.speech_index(t), T::one(), T::zero()),
            Channel::Noise => {
                let observed = if t >= 1 {
                    self.x[(t - 1) as usize]
                } else {
                    match self.noise_history {
                        Some(h) => h[(-t) as usize],
                        None => return Self::latent(self.noise_init_index(t), T::one(), T::zero()),
                    }
                };
                if self.speech {
                    Self::latent(self.speech_index(t), -T::one(), observed)
                } else {
                    Self::constant(observed)
                }
            }
        }
    }

    /// `[value(t), value(t−1), ..., value(t−p)]`.
    fn stacked(&self, ch: Channel, t: isize, p: usize) -> Vec<Affine<T>> {
        (0..=p).map(|k| self.value(ch, t - k as isize)).collect()
    }
}

struct PriorBlock<T> {
    idx: Vec<usize>,
    mean: Vec<T>,
    chol: Cholesky<T>,
}

impl<T: Real> PriorBlock<T> {
    fn energy(&self, latent: &LatentSnapshot<T>) -> T {
        let d = self.idx.len();
        let diff: Vec<T> = self.idx.iter().zip(&self.mean).map(|(&i, &m)| latent.mean[i] - m).collect();
        let mut cov = Matrix::zeros(d, d);
        for (a, &i) in self.idx.iter().enumerate() {
            for (b, &j) in self.idx.iter().enumerate() {
                cov[(a, b)] = latent.cov[(i, j)];
            }
        }
        let z = self.chol.forward(&diff);
        let tr = self.chol.solve_mat(&cov).trace();
        T::c(0.5) * (T::from_usize_lossy(d) * T::c(LN_2PI) + self.chol.log_det() + tr + crate::linalg::dot(&z, &z))
    }
}

fn prior_blocks<T: Real>(spec: &CoupledModelSpec<T>, layout: &Layout<'_, T>) -> Result<Vec<PriorBlock<T>>> {
    let mut blocks = Vec::new();
    if let Some(StateInit::Prior(g)) = spec.speech.as_ref().map(|s| &s.init) {
        blocks.push(PriorBlock {
            idx: (0..layout.m).map(|k| layout.speech_index(-(k as isize))).collect(),
            mean: g.mean().to_vec(),
            chol: Cholesky::jittered(g.cov())?,
        });
    }
    if let StateInit::Prior(g) = &spec.noise.init {
        if layout.n > 0 {
            blocks.push(PriorBlock {
                idx: (0..layout.n).map(|k| layout.noise_init_index(-(k as isize))).collect(),
                mean: g.mean().to_vec(),
                chol: Cholesky::jittered(g.cov())?,
            });
        }
    }
    Ok(blocks)
}

fn moments<T: Real>(aff: &[Affine<T>], latent: &LatentSnapshot<T>) -> LagMoments<T> {
    let k = aff.len();
    let mean = aff
        .iter()
        .map(|a| match a.idx {
            Some(i) => a.coef * latent.mean[i] + a.offset,
            None => a.offset,
        })
        .collect();
    let mut cov = Matrix::zeros(k, k);
    for (r, a) in aff.iter().enumerate() {
        for (c, b) in aff.iter().enumerate() {
            if let (Some(i), Some(j)) = (a.idx, b.idx) {
                cov[(r, c)] = a.coef * b.coef * latent.cov[(i, j)];
            }
        }
    }
    LagMoments { mean, cov }
}

struct ChannelRun<T> {
    ch: Channel,
    order: usize,
    prior: Option<(Gaussian<T>, T)>,
    coeffs: CoefficientPosterior<T>,
    precision_prior: Option<Gamma<T>>,
    precision: PrecisionPosterior<T>,
}

impl<T: Real> ChannelRun<T> {
    fn new(ch: Channel, model: &SourceModel<T>, w: usize, initial_variance: T) -> Result<Self> {
        let (prior, coeffs) = match &model.coefficients {
            CoefficientPrior::Known(c) => {
                let p = c.len();
                (None, CoefficientPosterior::fixed(Gaussian::from_parts(c.clone(), Matrix::zeros(p, p))))
            }
            CoefficientPrior::Gaussian { prior, walk_variance } => {
                (Some((prior.clone(), *walk_variance)), CoefficientPosterior::from_prior(prior, *walk_variance, w))
            }
        };
        let (precision_prior, precision) = match model.precision {
            PrecisionPrior::Known(v) => (None, PrecisionPosterior::Known(v)),
            PrecisionPrior::Gamma(g) => {
                let shape = g.shape() + T::c(0.5) * T::from_usize_lossy(w);
                (Some(g), PrecisionPosterior::Gamma(Gamma::new(shape, shape * initial_variance)?))
            }
        };
        Ok(Self { ch, order: model.order(), prior, coeffs, precision_prior, precision })
    }

    fn lag_moments(&self, layout: &Layout<'_, T>, latent: &LatentSnapshot<T>) -> Vec<LagMoments<T>> {
        (1..=layout.w).map(|t| moments(&layout.stacked(self.ch, t as isize, self.order), latent)).collect()
    }

    fn residuals(&self, lags: &[LagMoments<T>]) -> Vec<T> {
        lags.iter().enumerate().map(|(t, u)| ar_node::expected_sq_residual(u, self.coeffs.at(t))).collect()
    }

    fn update_coefficients(&mut self, lags: &[LagMoments<T>]) -> Result<()> {
        let Some((prior, walk)) = &self.prior else { return Ok(()) };
        let e_prec = self.precision.mean();
        let msgs = lags
            .iter()
            .map(|u| ar_node::message_to_coefficients(u, e_prec))
            .collect::<Result<Vec<NaturalGaussian<T>>>>()?;
        self.coeffs = if *walk > T::zero() {
            chain::smoothed_posterior(prior, *walk, &msgs)?
        } else {
            chain::static_posterior(prior, &msgs)?
        };
        Ok(())
    }

    fn update_precision(&mut self, residuals: &[T], damping: T) -> Result<()> {
        let Some(prior) = self.precision_prior else { return Ok(()) };
        let half = T::c(0.5);
        let shape = prior.shape() + half * T::from_usize_lossy(residuals.len());
        let rate = prior.rate() + half * residuals.iter().copied().sum::<T>();
        let rate = match self.precision {
            PrecisionPosterior::Gamma(old) if damping > T::zero() => damping * old.rate() + (T::one() - damping) * rate,
            _ => rate,
        };
        self.precision = PrecisionPosterior::Gamma(Gamma::new(shape, rate)?);
        Ok(())
    }

    /// Energies of the AR factors plus the coefficient and precision terms.
    fn free_energy(&self, residuals: &[T]) -> Result<T> {
        let half = T::c(0.5);
        let w = T::from_usize_lossy(residuals.len());
        let sq: T = residuals.iter().copied().sum();
        let mut f = w * half * (T::c(LN_2PI) - self.precision.mean_ln()) + half * self.precision.mean() * sq;
        f += self.coeffs.free_term;
        if let (Some(prior), PrecisionPosterior::Gamma(q)) = (self.precision_prior, self.precision) {
            f += prior.cross_entropy_from(&q) - q.entropy()?;
        }
        Ok(f)
    }

    fn posterior(&self, layout: &Layout<'_, T>, latent: &LatentSnapshot<T>) -> SourcePosterior<T> {
        let (mean, var) = (1..=layout.w)
            .map(|t| {
                let a = layout.value(self.ch, t as isize);
                match a.idx {
                    Some(i) => (a.coef * latent.mean[i] + a.offset, a.coef * a.coef * latent.cov[(i, i)]),
                    None => (a.offset, T::zero()),
                }
            })
            .unzip();
        SourcePosterior { mean, var, coefficients: self.coeffs.expand(layout.w), precision: self.precision }
    }
}

struct LatentUpdate<T> {
    lambda: Matrix<T>,
    eta: Vec<T>,
}

fn latent_natural<T: Real>(
    layout: &Layout<'_, T>,
    blocks: &[PriorBlock<T>],
    channels: &[ChannelRun<T>],
) -> Result<LatentUpdate<T>> {
    let d = layout.dim;
    let mut lambda = Matrix::zeros(d, d);
    let mut eta = vec![T::zero(); d];
    for b in blocks {
        let prec = b.chol.inverse();
        let h = b.chol.solve(&b.mean);
        for (a, &i) in b.idx.iter().enumerate() {
            eta[i] += h[a];
            for (c, &j) in b.idx.iter().enumerate() {
                lambda[(i, j)] += prec[(a, c)];
            }
        }
    }
    for run in channels {
        let e_prec = run.precision.mean();
        for t in 1..=layout.w {
            let aff = layout.stacked(run.ch, t as isize, run.order);
            let msg = ar_node::message_to_states(run.coeffs.at(t - 1), e_prec)?;
            for (r, a) in aff.iter().enumerate() {
                let Some(i) = a.idx else { continue };
                for (c, b) in aff.iter().enumerate() {
                    let k = msg.precision[(r, c)] * a.coef;
                    eta[i] -= k * b.offset;
                    if let Some(j) = b.idx {
                        lambda[(i, j)] += k * b.coef;
                    }
                }
            }
        }
    }
    Ok(LatentUpdate { lambda, eta })
}

fn solve_latent<T: Real>(upd: &LatentUpdate<T>) -> Result<LatentSnapshot<T>> {
    if upd.eta.is_empty() {
        return Ok(LatentSnapshot { mean: Vec::new(), cov: Matrix::zeros(0, 0), log_det_cov: T::zero() });
    }
    let chol = Cholesky::jittered(&upd.lambda)?;
    Ok(LatentSnapshot { mean: chol.solve(&upd.eta), cov: chol.inverse(), log_det_cov: -chol.log_det() })
}

fn latent_entropy<T: Real>(latent: &LatentSnapshot<T>) -> T {
    let d = T::from_usize_lossy(latent.mean.len());
    if latent.mean.is_empty() {
        return T::zero();
    }
    T::c(0.5) * (d * (T::c(LN_2PI) + T::one()) + latent.log_det_cov)
}

fn total_free_energy<T: Real>(
    layout: &Layout<'_, T>,
    blocks: &[PriorBlock<T>],
    latent: &LatentSnapshot<T>,
    channels: &[ChannelRun<T>],
) -> Result<T> {
    let mut f = -latent_entropy(latent);
    for b in blocks {
        f += b.energy(latent);
    }
    for run in channels {
        let lags = run.lag_moments(layout, latent);
        f += run.free_energy(&run.residuals(&lags))?;
    }
    Ok(f)
}

fn check_input<T: Real>(x: &[T], spec: &CoupledModelSpec<T>, schedule: &VmpSchedule) -> Result<()> {
    schedule.validate()?;
    spec.validate(x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observations".into()));
    }
    if let StateInit::Observed(h) = &spec.noise.init {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observed noise history".into()));
        }
    }
    Ok(())
}

fn build_channels<T: Real>(x: &[T], spec: &CoupledModelSpec<T>) -> Result<Vec<ChannelRun<T>>> {
    let w = x.len();
    let k = if spec.speech.is_some() { 2.0 } else { 1.0 };
    let power = x.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(w);
    let variance = if power > T::zero() && power.is_finite() { power / T::c(k) } else { T::one() };
    let mut channels = Vec::with_capacity(2);
    if let Some(s) = &spec.speech {
        channels.push(ChannelRun::new(Channel::Speech, s, w, variance)?);
    }
    channels.push(ChannelRun::new(Channel::Noise, &spec.noise, w, variance)?);
    Ok(channels)
}

/// Run the coordinate-descent schedule on one frame of observations.
pub fn infer_frame<T: Real>(x: &[T], spec: &CoupledModelSpec<T>, schedule: &VmpSchedule) -> Result<Posteriors<T>> {
    check_input(x, spec, schedule)?;
    let layout = Layout::new(spec, x);
    let blocks = prior_blocks(spec, &layout)?;
    let mut channels = build_channels(x, spec)?;
    let damping = T::c(schedule.damping);

    let mut previous: Option<LatentUpdate<T>> = None;
    let mut latent = LatentSnapshot { mean: Vec::new(), cov: Matrix::zeros(0, 0), log_det_cov: T::zero() };
    let mut trace: Vec<T> = Vec::with_capacity(schedule.max_iterations);
    let mut converged = false;
    for iteration in 1..=schedule.max_iterations {
        let mut upd = latent_natural(&layout, &blocks, &channels)?;
        if let Some(prev) = &previous {
            if damping > T::zero() {
                upd.lambda = upd.lambda.scale(T::one() - damping).add(&prev.lambda.scale(damping));
                for (a, &b) in upd.eta.iter_mut().zip(&prev.eta) {
                    *a = (T::one() - damping) * *a + damping * b;
                }
            }
        }
        latent = solve_latent(&upd)?;
        previous = Some(upd);

        for run in channels.iter_mut() {
            let lags = run.lag_moments(&layout, &latent);
            run.update_coefficients(&lags)?;
            let residuals = run.residuals(&lags);
            run.update_precision(&residuals, damping)?;
        }

        let f = total_free_energy(&layout, &blocks, &latent, &channels)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteEnergy { iteration });
        }
        let done = trace.last().is_some_and(|&last| (last - f).abs().f64() < schedule.bfe_tolerance);
        trace.push(f);
        if done {
            converged = true;
            break;
        }
    }

    let speech_run = channels.iter().find(|c| c.ch == Channel::Speech);
    let noise_run = channels.iter().find(|c| c.ch == Channel::Noise).expect("noise channel present");
    let speech_tail = speech_run.map(|_| {
        let idx: Vec<usize> = (0..layout.m).map(|k| layout.speech_index((layout.w - k) as isize)).collect();
        let mean = idx.iter().map(|&i| latent.mean[i]).collect();
        let mut cov = Matrix::zeros(layout.m, layout.m);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                cov[(a, b)] = latent.cov[(i, j)];
            }
        }
        Gaussian::from_parts(mean, cov.symmetrize())
    });
    let mut coefficient_free = [T::zero(); 2];
    for run in &channels {
        coefficient_free[run.ch as usize] = run.coeffs.free_term;
    }
    Ok(Posteriors {
        speech: speech_run.map(|r| r.posterior(&layout, &latent)),
        noise: noise_run.posterior(&layout, &latent),
        speech_tail,
        bfe_trace: trace,
        converged,
        latent,
        coefficient_free,
    })
}

/// Free energy of stored posteriors under a model and observations: expected
/// energies of every factor minus the entropies of the posterior factors.
/// On this factorization the Bethe and variational free energies coincide.
pub fn bethe_free_energy<T: Real>(posteriors: &Posteriors<T>, spec: &CoupledModelSpec<T>, x: &[T]) -> Result<T> {
    check_input(x, spec, &VmpSchedule::default())?;
    let layout = Layout::new(spec, x);
    if posteriors.latent.mean.len() != layout.dim || posteriors.speech.is_some() != spec.speech.is_some() {
        return Err(Error::InvalidParameter("posteriors do not match the model".into()));
    }
    let blocks = prior_blocks(spec, &layout)?;
    let mut channels = build_channels(x, spec)?;
    for run in channels.iter_mut() {
        let post = match run.ch {
            Channel::Speech => posteriors.speech.as_ref().expect("checked above"),
            Channel::Noise => &posteriors.noise,
        };
        let mut coeffs = if run.prior.as_ref().is_some_and(|(_, w)| *w > T::zero()) {
            CoefficientPosterior::from_marginals(post.coefficients.clone())
        } else {
            CoefficientPosterior::fixed(post.coefficients[0].clone())
        };
        coeffs.free_term = posteriors.coefficient_free[run.ch as usize];
        run.coeffs = coeffs;
        run.precision = post.precision;
    }
    let f = total_free_energy(&layout, &blocks, &posteriors.latent, &channels)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("free energy".into()));
    }
    Ok(f)
}

#[cfg(test)]
mod tests;
