//! Acoustic context classification by Bayesian model comparison over a bank
//! of clamped-context models, with a Dirichlet-smoothed Markov prior over
//! context switches.
//!
//! Context indices are zero based throughout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armodels::{table1_contexts, ArParams};
use crate::dists::{Categorical, DirichletCols, Gamma, Gaussian};
use crate::error::{Error, Result};
use crate::infer::{infer_frame, CarryPolicy, CoupledModelSpec, Posteriors, PrecisionPrior, SourceModel, StateInit, VmpSchedule};
use crate::linalg::Matrix;
use crate::real::Real;

/// One entry of the bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextModel<T> {
    pub name: String,
    /// Model used on the first frame; later frames continue from carried state.
    pub spec: CoupledModelSpec<T>,
    /// Ground-truth context this model stands for; `None` for catch-all models.
    pub label: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextBank<T> {
    pub models: Vec<ContextModel<T>>,
}

/// Prior widths for the informative context models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankPriors {
    /// Isotropic covariance of the coefficient prior around the known values.
    pub coefficient_variance: f64,
    /// Gamma shape of the precision prior (its mean is the known precision).
    pub precision_shape: f64,
}

impl Default for BankPriors {
    fn default() -> Self {
        Self { coefficient_variance: 0.01, precision_shape: 100.0 }
    }
}

fn unit_init<T: Real>(order: usize) -> Result<StateInit<T>> {
    if order == 0 {
        return Ok(StateInit::Observed(Vec::new()));
    }
    Ok(StateInit::Prior(Gaussian::isotropic(vec![T::zero(); order], T::one())?))
}

/// Noise model with informative priors centered on known AR parameters.
pub fn informative_noise_model<T: Real>(params: &ArParams<T>, priors: BankPriors) -> Result<SourceModel<T>> {
    let p = params.order();
    let coef = Gaussian::new(params.coefficients.clone(), Matrix::scaled_identity(p, T::c(priors.coefficient_variance)))?;
    let shape = T::c(priors.precision_shape);
    let precision = Gamma::new(shape, shape / params.precision)?;
    Ok(SourceModel::ar(coef, PrecisionPrior::Gamma(precision), unit_init(p)?))
}

/// Weakly informative AR noise model: `ζ ~ N(0, I)`, `τ ~ Γ(1, 1)`.
pub fn weak_noise_model<T: Real>(order: usize) -> Result<SourceModel<T>> {
    let gamma = PrecisionPrior::Gamma(Gamma::new(T::one(), T::one())?);
    if order == 0 {
        return Ok(SourceModel::white(gamma));
    }
    Ok(SourceModel::ar(Gaussian::isotropic(vec![T::zero(); order], T::one())?, gamma, unit_init(order)?))
}

impl<T: Real> ContextBank<T> {
    pub fn new(models: Vec<ContextModel<T>>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Empty("context bank"));
        }
        Ok(Self { models })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Noise-only bank: one informative model per context, optionally
    /// followed by a weakly informative AR(5) and an i.i.d. Gaussian model.
    pub fn noise_bank(contexts: &[ArParams<T>], priors: BankPriors, extras: bool) -> Result<Self> {
        let mut models = Vec::with_capacity(contexts.len() + 2);
        for (l, p) in contexts.iter().enumerate() {
            models.push(ContextModel {
                name: format!("AR({}) context {}", p.order(), l + 1),
                spec: CoupledModelSpec::noise_only(informative_noise_model(p, priors)?),
                label: Some(l),
            });
        }
        if extras {
            models.push(ContextModel { name: "AR(5) weak".into(), spec: CoupledModelSpec::noise_only(weak_noise_model(5)?), label: None });
            models.push(ContextModel { name: "i.i.d.".into(), spec: CoupledModelSpec::noise_only(weak_noise_model(0)?), label: None });
        }
        Self::new(models)
    }

    /// The classification bank built from the four tabulated noise contexts.
    pub fn table1(priors: BankPriors, extras: bool) -> Result<Self> {
        Self::noise_bank(&table1_contexts(), priors, extras)
    }

    /// Models that share a speech model and differ in their noise model.
    pub fn with_speech(speech: &SourceModel<T>, noises: Vec<(String, SourceModel<T>, Option<usize>)>) -> Result<Self> {
        Self::new(
            noises
                .into_iter()
                .map(|(name, noise, label)| ContextModel { name, spec: CoupledModelSpec::coupled(speech.clone(), noise), label })
                .collect(),
        )
    }

    pub fn specs(&self) -> Vec<CoupledModelSpec<T>> {
        self.models.iter().map(|m| m.spec.clone()).collect()
    }
}

/// Categorical belief over bank entries for one frame and the per-model scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextBelief<T> {
    pub posterior: Categorical<T>,
    /// Free energy per model; `None` where inference failed.
    pub bfe: Vec<Option<T>>,
}

/// Dirichlet posterior over the columns of the transition matrix.
pub type TransitionPosterior<T> = DirichletCols<T>;

/// Prior for the current context: `E[T]` applied to the previous belief.
pub fn forward_message<T: Real>(prev: &Categorical<T>, trans: &TransitionPosterior<T>) -> Result<Categorical<T>> {
    if prev.len() != trans.dim() {
        return Err(Error::DimensionMismatch { expected: trans.dim(), got: prev.len() });
    }
    let out = trans.mean_matrix().mul_vec(prev.probs());
    Categorical::from_weights(&out)
}

/// Combine a forward message with per-model free energies in the log domain.
pub fn combine_evidence<T: Real>(forward: &Categorical<T>, bfe: &[Option<T>]) -> Result<Categorical<T>> {
    if forward.len() != bfe.len() {
        return Err(Error::DimensionMismatch { expected: forward.len(), got: bfe.len() });
    }
    if bfe.iter().all(Option::is_none) {
        return Err(Error::AllModelsFailed);
    }
    let logw: Vec<T> = forward
        .probs()
        .iter()
        .zip(bfe)
        .map(|(&p, f)| match f {
            Some(f) if p > T::zero() => p.ln() - *f,
            _ => T::neg_infinity(),
        })
        .collect();
    Categorical::from_log_weights(&logw)
}

/// Score every model on one frame and form the posterior over contexts.
///
/// `carried` holds each model's specification for this frame (continued
/// state chains and priors). Models whose inference fails get zero weight.
pub fn classify_frame<T: Real>(
    x: &[T],
    carried: &[CoupledModelSpec<T>],
    prev_belief: &Categorical<T>,
    trans: &TransitionPosterior<T>,
    schedule: &VmpSchedule,
) -> Result<(ContextBelief<T>, Vec<Option<Posteriors<T>>>)> {
    let forward = forward_message(prev_belief, trans)?;
    let results: Vec<Option<Posteriors<T>>> = carried.par_iter().map(|spec| infer_frame(x, spec, schedule).ok()).collect();
    let bfe: Vec<Option<T>> = results.iter().map(|r| r.as_ref().map(Posteriors::bfe)).collect();
    let posterior = combine_evidence(&forward, &bfe)?;
    Ok((ContextBelief { posterior, bfe }, results))
}

/// `α'_{ij} = α_{ij} + b_k[i] · b_{k−1}[j]`.
pub fn update_transition<T: Real>(
    trans: &TransitionPosterior<T>,
    belief: &Categorical<T>,
    prev: &Categorical<T>,
) -> Result<TransitionPosterior<T>> {
    let mut next = trans.clone();
    next.add_counts(&Matrix::outer(belief.probs(), prev.probs()))?;
    Ok(next)
}

/// Most probable context; ties go to the lowest index.
pub fn map_context<T: Real>(belief: &Categorical<T>) -> usize {
    belief.argmax()
}

/// Sequential classifier state: belief, transition counts and per-model
/// continuation of state chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextTracker<T> {
    pub bank: ContextBank<T>,
    pub belief: Categorical<T>,
    pub transition: TransitionPosterior<T>,
    pub carried: Vec<CoupledModelSpec<T>>,
    pub schedule: VmpSchedule,
    pub carry: CarryPolicy,
    pub frames: usize,
}

/// Outcome of one tracked frame.
#[derive(Clone, Debug)]
pub struct FrameClassification<T> {
    pub belief: ContextBelief<T>,
    pub posteriors: Vec<Option<Posteriors<T>>>,
    pub map: usize,
}

impl<T: Real> ContextTracker<T> {
    pub fn new(bank: ContextBank<T>, schedule: VmpSchedule, carry: CarryPolicy) -> Result<Self> {
        let l = bank.len();
        Ok(Self {
            belief: Categorical::uniform(l),
            transition: DirichletCols::symmetric(l, T::one())?,
            carried: bank.specs(),
            bank,
            schedule,
            carry,
            frames: 0,
        })
    }

    pub fn step(&mut self, x: &[T]) -> Result<FrameClassification<T>> {
        let (belief, posteriors) = classify_frame(x, &self.carried, &self.belief, &self.transition, &self.schedule)?;
        for (l, post) in posteriors.iter().enumerate() {
            let template = &self.bank.models[l].spec;
            self.carried[l] = match post {
                Some(p) => p.next_spec(&self.carried[l], x, self.carry)?,
                None => restart_from(template, x)?,
            };
        }
        if self.frames > 0 {
            self.transition = update_transition(&self.transition, &belief.posterior, &self.belief)?;
        }
        self.belief = belief.posterior.clone();
        self.frames += 1;
        let map = map_context(&self.belief);
        Ok(FrameClassification { belief, posteriors, map })
    }
}

/// Fresh copy of a model whose noise history continues from `x`.
fn restart_from<T: Real>(template: &CoupledModelSpec<T>, x: &[T]) -> Result<CoupledModelSpec<T>> {
    let mut spec = template.clone();
    let n = spec.noise_order();
    if spec.speech.is_none() && n > 0 {
        if x.len() < n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        spec.noise.init = StateInit::Observed(x.iter().rev().take(n).copied().collect());
    }
    Ok(spec)
}

/// Categorical accuracy of MAP indices against labels; catch-all models
/// never count as correct.
pub fn accuracy<T: Real>(bank: &ContextBank<T>, maps: &[usize], labels: &[usize]) -> f64 {
    if maps.is_empty() {
        return 0.0;
    }
    let hits = maps.iter().zip(labels).filter(|(&m, &l)| bank.models[m].label == Some(l)).count();
    hits as f64 / maps.len() as f64
}
