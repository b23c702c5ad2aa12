//! Synthetic acoustic environments: a slowly drifting resonant "speech"
//! source mixed with AR noise whose parameters switch between contexts.
//!
//! Every frame draws from its own random stream, so an environment advanced
//! `k` times is the same value no matter how it got there.

use std::fmt;
use std::str::FromStr;

use aida_core::armodels::{is_stable_with_margin, simulate_ar, table1_contexts, ArParams};
use aida_core::context::{informative_noise_model, BankPriors, ContextBank};
use aida_core::dists::{Categorical, DirichletCols, Gamma, Gaussian, Sample};
use aida_core::infer::{PrecisionPrior, SourceModel, StateInit};
use aida_core::linalg::Matrix;
use aida_core::rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Result, SessionError};

/// Coefficients of the speech source before any drift: a resonance at a
/// quarter of the Nyquist band with pole radius 0.9.
pub const SPEECH_THETA0: [f64; 2] = [1.272_792_206_135_785_6, -0.81];
/// Innovation precision of the speech source.
pub const SPEECH_PRECISION: f64 = 4.0;
/// Per-sample random-walk variance of the speech coefficients.
pub const SPEECH_WALK: f64 = 1e-4;
/// Order of the speech model in the bank; at least the largest noise order.
pub const SPEECH_MODEL_ORDER: usize = 4;
/// Frames spent in each context by the alternating environment.
pub const SYNTHETIC_DWELL: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    /// Two noise contexts (the first two tabulated ones), alternating every
    /// [`SYNTHETIC_DWELL`] frames.
    Synthetic,
    /// The four tabulated noise contexts under a random Markov chain.
    Table1,
    /// No generator; frames are supplied by the caller.
    External,
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Synthetic => "synthetic",
            Self::Table1 => "table1",
            Self::External => "external",
        })
    }
}

impl FromStr for EnvironmentKind {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Self::Synthetic),
            "table1" => Ok(Self::Table1),
            "external" => Ok(Self::External),
            other => Err(SessionError::UnknownEnvironment(other.to_string())),
        }
    }
}

impl EnvironmentKind {
    /// Noise contexts the environment switches between.
    pub fn contexts(self) -> Vec<ArParams<f64>> {
        let all = table1_contexts::<f64>();
        match self {
            Self::Synthetic => all[..2].to_vec(),
            Self::Table1 => all,
            Self::External => Vec::new(),
        }
    }

    /// Speech model plus one informative noise model per context.
    pub fn bank(self) -> Result<ContextBank<f64>> {
        let contexts = self.contexts();
        if contexts.is_empty() {
            return Err(SessionError::NoGenerator);
        }
        let speech = speech_model()?;
        let noises = contexts
            .iter()
            .enumerate()
            .map(|(l, p)| Ok((format!("AR({}) context {}", p.order(), l + 1), informative_noise_model(p, BankPriors::default())?, Some(l))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ContextBank::with_speech(&speech, noises)?)
    }
}

/// Time-varying speech model with priors centered on the generating
/// resonance, padded with zero coefficients.
pub fn speech_model() -> Result<SourceModel<f64>> {
    let m = SPEECH_MODEL_ORDER;
    let mut theta = vec![0.0; m];
    theta[..2].copy_from_slice(&SPEECH_THETA0);
    let priors = BankPriors::default();
    let shape = priors.precision_shape;
    Ok(SourceModel::tvar(
        Gaussian::new(theta, Matrix::scaled_identity(m, priors.coefficient_variance))?,
        SPEECH_WALK,
        PrecisionPrior::Gamma(Gamma::new(shape, shape / SPEECH_PRECISION)?),
        StateInit::Prior(Gaussian::isotropic(vec![0.0; m], 1.0)?),
    ))
}

/// One generated frame with its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFrame {
    pub x: Vec<f64>,
    pub speech: Vec<f64>,
    pub noise: Vec<f64>,
    pub label: usize,
}

/// Generator state between frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub kind: EnvironmentKind,
    pub seed: u64,
    pub frame_len: usize,
    pub contexts: Vec<ArParams<f64>>,
    /// Column-stochastic context transition matrix (Markov environments only).
    pub transition: Option<Matrix<f64>>,
    pub label: usize,
    /// Frames generated so far.
    pub frames: usize,
    pub speech_theta: Vec<f64>,
    /// Speech state, most recent first.
    pub speech_state: Vec<f64>,
    /// Noise history, most recent first, long enough for every context.
    pub noise_state: Vec<f64>,
}

impl Environment {
    pub fn new(kind: EnvironmentKind, seed: u64, frame_len: usize) -> Result<Self> {
        if frame_len == 0 {
            return Err(SessionError::InvalidFrame("frame length must be positive".into()));
        }
        let contexts = kind.contexts();
        let mut r = rng::stream(seed, "environment-init", 0);
        let max_order = contexts.iter().map(ArParams::order).max().unwrap_or(0);
        let transition = match kind {
            EnvironmentKind::Table1 => Some(DirichletCols::symmetric(contexts.len(), 1.0)?.sample(&mut r)),
            _ => None,
        };
        let label = match kind {
            EnvironmentKind::Table1 => Categorical::<f64>::uniform(contexts.len()).sample(&mut r),
            _ => 0,
        };
        let speech_state = (0..2).map(|_| normal(&mut r)).collect();
        let noise_state = (0..max_order).map(|_| normal(&mut r)).collect();
        Ok(Self {
            kind,
            seed,
            frame_len,
            contexts,
            transition,
            label,
            frames: 0,
            speech_theta: SPEECH_THETA0.to_vec(),
            speech_state,
            noise_state,
        })
    }

    pub fn is_generator(&self) -> bool {
        !self.contexts.is_empty()
    }

    /// Context of the next frame, advancing the label process.
    fn next_label(&mut self, r: &mut rng::Rng) -> Result<usize> {
        if self.frames == 0 {
            return Ok(self.label);
        }
        Ok(match &self.transition {
            Some(t) => {
                let column: Vec<f64> = (0..self.contexts.len()).map(|i| t[(i, self.label)]).collect();
                Categorical::from_weights(&column)?.sample(r)
            }
            None => (self.frames / SYNTHETIC_DWELL) % self.contexts.len(),
        })
    }

    pub fn next_frame(&mut self) -> Result<GeneratedFrame> {
        if !self.is_generator() {
            return Err(SessionError::NoGenerator);
        }
        let mut r = rng::stream(self.seed, "environment-frame", self.frames as u64);
        let label = self.next_label(&mut r)?;

        // Aggregate the per-sample coefficient walk over the frame; a step
        // that would leave the stability margin is dropped.
        let sd = (SPEECH_WALK * self.frame_len as f64).sqrt();
        let step: Vec<f64> = self.speech_theta.iter().map(|c| c + sd * normal(&mut r)).collect();
        if is_stable_with_margin(&step) {
            self.speech_theta = step;
        }
        let speech = simulate_ar(&ArParams::new(self.speech_theta.clone(), SPEECH_PRECISION)?, self.frame_len, &self.speech_state, &mut r)?;
        let ctx = &self.contexts[label];
        let noise = simulate_ar(ctx, self.frame_len, &self.noise_state[..ctx.order()], &mut r)?;

        self.speech_state = carry_state(&self.speech_state, &speech);
        self.noise_state = carry_state(&self.noise_state, &noise);
        self.label = label;
        self.frames += 1;
        let x = speech.iter().zip(&noise).map(|(s, n)| s + n).collect();
        Ok(GeneratedFrame { x, speech, noise, label })
    }
}

fn normal(r: &mut rng::Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, r)
}

/// New state `[y_W, y_{W−1}, ...]` of the same length as `state`.
fn carry_state(state: &[f64], samples: &[f64]) -> Vec<f64> {
    samples.iter().rev().chain(state.iter()).take(state.len()).copied().collect()
}
