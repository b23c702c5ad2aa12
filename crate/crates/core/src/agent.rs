//! Expected-free-energy trial design over a grid of gain pairs.
//!
//! Each candidate is scored by `efe = −utility_drive − info_gain`, where the
//! utility drive is the expected log goal prior of the predicted appraisal
//! (nats) and the information gain is the probit BALD approximation (bits).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpc::{class_prob, optimize_hyperparams, GpcState, KernelParams};
use crate::real::Real;
use crate::rng;
use crate::simuser::{sample_appraisal, UserPrefs};
use crate::special::binary_entropy_bits;

/// `√(π ln 2 / 2)`.
pub fn bald_c<T: Real>() -> T {
    T::c((std::f64::consts::PI * std::f64::consts::LN_2 / 2.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalPrior<T> {
    pub p_positive: T,
}

impl<T: Real> Default for GoalPrior<T> {
    fn default() -> Self {
        Self { p_positive: T::c(0.8) }
    }
}

impl<T: Real> GoalPrior<T> {
    pub fn new(p_positive: T) -> Result<Self> {
        if !(p_positive > T::zero() && p_positive < T::one()) {
            return Err(Error::InvalidParameter(format!("goal prior p+ = {p_positive} must lie in (0, 1)")));
        }
        Ok(Self { p_positive })
    }
}

/// Rectangular lattice over the gain box. Index `i * res[1] + j` holds
/// `(u_s, u_n) = (lo[0] + i·Δ₀, lo[1] + j·Δ₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid<T> {
    pub lo: [T; 2],
    pub hi: [T; 2],
    pub resolution: [usize; 2],
}

impl<T: Real> Default for CandidateGrid<T> {
    fn default() -> Self {
        Self { lo: [T::zero(); 2], hi: [T::one(); 2], resolution: [21, 21] }
    }
}

impl<T: Real> CandidateGrid<T> {
    pub fn new(lo: [T; 2], hi: [T; 2], resolution: [usize; 2]) -> Result<Self> {
        for a in 0..2 {
            if resolution[a] < 2 || !(lo[a].is_finite() && hi[a].is_finite() && lo[a] < hi[a]) {
                return Err(Error::InvalidParameter(format!("grid axis {a}: [{}, {}] at {}", lo[a], hi[a], resolution[a])));
            }
        }
        Ok(Self { lo, hi, resolution })
    }

    pub fn square(lo: T, hi: T, resolution: usize) -> Result<Self> {
        Self::new([lo; 2], [hi; 2], [resolution; 2])
    }

    pub fn len(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axis(&self, a: usize, i: usize) -> T {
        let step = (self.hi[a] - self.lo[a]) / T::from_usize_lossy(self.resolution[a] - 1);
        if i + 1 == self.resolution[a] {
            self.hi[a]
        } else {
            self.lo[a] + step * T::from_usize_lossy(i)
        }
    }

    pub fn point(&self, index: usize) -> [T; 2] {
        let (i, j) = (index / self.resolution[1], index % self.resolution[1]);
        [self.axis(0, i), self.axis(1, j)]
    }

    pub fn points(&self) -> Vec<[T; 2]> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn contains(&self, u: &[T; 2]) -> bool {
        (0..2).all(|a| u[a] >= self.lo[a] && u[a] <= self.hi[a])
    }

    pub fn clamp(&self, u: [T; 2]) -> [T; 2] {
        [u[0].max(self.lo[0]).min(self.hi[0]), u[1].max(self.lo[1]).min(self.hi[1])]
    }
}

/// `Φ̃ ln p⁺ + (1 − Φ̃) ln(1 − p⁺)` with `Φ̃ = class_prob(μ, σ²)`.
pub fn utility_drive<T: Real>(mean: T, var: T, goal: &GoalPrior<T>) -> T {
    let p = class_prob(mean, var);
    let (a, b) = (goal.p_positive.ln(), (T::one() - goal.p_positive).ln());
    p * a + (T::one() - p) * b
}

/// BALD mutual information between the appraisal and the latent, in bits.
pub fn information_gain<T: Real>(mean: T, var: T) -> T {
    let var = var.max(T::zero());
    let c = bald_c::<T>();
    let c2 = c * c;
    let h = binary_entropy_bits(class_prob(mean, var));
    h - c / (var + c2).sqrt() * (-mean * mean / (T::c(2.0) * (var + c2))).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfeRecord<T> {
    pub u: [T; 2],
    pub mean: T,
    pub var: T,
    pub utility_drive: T,
    pub info_gain: T,
    pub efe: T,
    /// Set when prediction failed at this point; the other fields are then NaN.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfeField<T> {
    pub grid: CandidateGrid<T>,
    pub records: Vec<EfeRecord<T>>,
}

impl<T: Real> EfeField<T> {
    /// Row-major EFE values, suitable for a heatmap.
    pub fn values(&self) -> Vec<T> {
        self.records.iter().map(|r| r.efe).collect()
    }

    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (k, r) in self.records.iter().enumerate() {
            if r.error.is_some() {
                continue;
            }
            if best.is_none_or(|(_, b)| r.efe < b) {
                best = Some((k, r.efe));
            }
        }
        best.map(|(k, _)| k)
    }
}

pub fn efe_field<T: Real>(gpc: &GpcState<T>, grid: &CandidateGrid<T>, goal: &GoalPrior<T>) -> EfeField<T> {
    let records = grid
        .points()
        .into_par_iter()
        .map(|u| match gpc.predict(&u) {
            Ok((mean, var)) => {
                let utility_drive = utility_drive(mean, var, goal);
                let info_gain = information_gain(mean, var);
                EfeRecord { u, mean, var, utility_drive, info_gain, efe: -utility_drive - info_gain, error: None }
            }
            Err(e) => {
                let nan = T::nan();
                EfeRecord { u, mean: nan, var: nan, utility_drive: nan, info_gain: nan, efe: nan, error: Some(e.to_string()) }
            }
        })
        .collect();
    EfeField { grid: *grid, records }
}

/// Grid index of the next proposal: uniform at random on trial 1, otherwise
/// the lowest-index minimizer of the EFE.
pub fn select_proposal<T: Real, R: Rng + ?Sized>(field: &EfeField<T>, rng: &mut R, trial_index: usize) -> Result<usize> {
    if field.records.is_empty() {
        return Err(Error::Empty("EFE field"));
    }
    if trial_index == 1 {
        return Ok(rng.random_range(0..field.records.len()));
    }
    field.argmin().ok_or(Error::NonFinite("every EFE grid point failed".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig<T> {
    pub grid: CandidateGrid<T>,
    pub goal: GoalPrior<T>,
    /// Hyperparameters are re-estimated after every `optimize_every`-th appraisal.
    pub optimize_every: usize,
    pub initial_params: KernelParams<T>,
}

impl<T: Real> Default for AgentConfig<T> {
    fn default() -> Self {
        Self { grid: CandidateGrid::default(), goal: GoalPrior::default(), optimize_every: 5, initial_params: KernelParams::default() }
    }
}

/// Proposal together with the scores of the chosen point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal<T> {
    pub trial: usize,
    pub index: usize,
    pub u: [T; 2],
    pub utility_drive: T,
    pub info_gain: T,
    pub efe: T,
}

/// One preference learner: a GPC plus the trial counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent<T> {
    pub config: AgentConfig<T>,
    pub gpc: GpcState<T>,
    /// Number of proposals made so far.
    pub trials: usize,
}

impl<T: Real> Agent<T> {
    pub fn new(config: AgentConfig<T>) -> Self {
        let mut gpc = GpcState::default();
        gpc.params = config.initial_params;
        Self { config, gpc, trials: 0 }
    }

    pub fn field(&self) -> EfeField<T> {
        efe_field(&self.gpc, &self.config.grid, &self.config.goal)
    }

    pub fn propose<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Proposal<T>> {
        let field = self.field();
        let trial = self.trials + 1;
        let index = select_proposal(&field, rng, trial)?;
        self.trials = trial;
        let r = &field.records[index];
        Ok(Proposal { trial, index, u: r.u, utility_drive: r.utility_drive, info_gain: r.info_gain, efe: r.efe })
    }

    /// Add an appraisal and refit. Returns whether hyperparameters were re-estimated.
    /// On a fit failure the agent is left exactly as before the call.
    pub fn observe(&mut self, u: [T; 2], r: bool) -> Result<bool> {
        let backup = self.gpc.clone();
        self.gpc.data.push(u.to_vec(), r);
        let optimize = self.config.optimize_every > 0 && self.gpc.data.len() % self.config.optimize_every == 0;
        if optimize {
            self.gpc.params = optimize_hyperparams(&self.gpc.data, &self.gpc.params);
        }
        if let Err(e) = self.gpc.refit() {
            self.gpc = backup;
            return Err(e);
        }
        Ok(optimize)
    }

    /// Re-estimate hyperparameters now, guarded by the single-class check.
    pub fn optimize_now(&mut self) -> Result<KernelParams<T>> {
        if !self.gpc.data.has_both_classes() {
            return Err(Error::InvalidParameter("hyperparameter optimization needs both positive and negative appraisals".into()));
        }
        let backup = self.gpc.clone();
        self.gpc.params = optimize_hyperparams(&self.gpc.data, &self.gpc.params);
        if let Err(e) = self.gpc.refit() {
            self.gpc = backup;
            return Err(e);
        }
        Ok(self.gpc.params)
    }
}

/// Per-trial record of an agent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<T> {
    pub trial: usize,
    pub u: [T; 2],
    pub r: bool,
    pub utility_drive: T,
    pub info_gain: T,
    pub efe_min: T,
    pub sigma: T,
    pub length: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRun<T> {
    pub agent: usize,
    pub trials: Vec<TrialRecord<T>>,
    pub error: Option<String>,
}

impl<T: Real> AgentRun<T> {
    /// One-based trial of the first positive appraisal.
    pub fn first_success(&self) -> Option<usize> {
        self.trials.iter().find(|t| t.r).map(|t| t.trial)
    }
}

pub fn proposal_stream(seed: u64, agent: usize) -> rng::Rng {
    rng::stream(seed, "agent-proposal", agent as u64)
}

pub fn user_stream(seed: u64, agent: usize) -> rng::Rng {
    rng::stream(seed, "user-appraisal", agent as u64)
}

/// Propose, ask the simulated user, update; repeated `n_trials` times.
pub fn run_agent<T: Real>(index: usize, n_trials: usize, prefs: &UserPrefs<T>, config: &AgentConfig<T>, seed: u64) -> AgentRun<T> {
    let mut agent = Agent::new(*config);
    let mut prop_rng = proposal_stream(seed, index);
    let mut user_rng = user_stream(seed, index);
    let mut trials = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let step = agent.propose(&mut prop_rng).and_then(|p| {
            let r = sample_appraisal(&p.u, prefs, &mut user_rng);
            agent.observe(p.u, r)?;
            Ok(TrialRecord {
                trial: p.trial,
                u: p.u,
                r,
                utility_drive: p.utility_drive,
                info_gain: p.info_gain,
                efe_min: p.efe,
                sigma: agent.gpc.params.sigma,
                length: agent.gpc.params.length,
            })
        });
        match step {
            Ok(rec) => trials.push(rec),
            Err(e) => return AgentRun { agent: index, trials, error: Some(e.to_string()) },
        }
    }
    AgentRun { agent: index, trials, error: None }
}

/// Independent agents in parallel, each with its own random streams.
pub fn run_ensemble<T: Real>(n_agents: usize, n_trials: usize, prefs: &UserPrefs<T>, config: &AgentConfig<T>, seed: u64) -> Vec<AgentRun<T>> {
    (0..n_agents).into_par_iter().map(|i| run_agent(i, n_trials, prefs, config, seed)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub agents: usize,
    pub failed: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_first_success: Option<f64>,
    pub median_first_success: Option<f64>,
}

pub fn summarize<T: Real>(runs: &[AgentRun<T>]) -> EnsembleSummary {
    let mut firsts: Vec<f64> = runs.iter().filter_map(|r| r.first_success()).map(|t| t as f64).collect();
    firsts.sort_by(|a, b| a.total_cmp(b));
    let n = firsts.len();
    let median = match n {
        0 => None,
        _ if n % 2 == 1 => Some(firsts[n / 2]),
        _ => Some(0.5 * (firsts[n / 2 - 1] + firsts[n / 2])),
    };
    EnsembleSummary {
        agents: runs.len(),
        failed: runs.iter().filter(|r| r.error.is_some()).count(),
        successes: n,
        success_rate: if runs.is_empty() { 0.0 } else { n as f64 / runs.len() as f64 },
        mean_first_success: (n > 0).then(|| firsts.iter().sum::<f64>() / n as f64),
        median_first_success: median,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn utility_examples() {
        let g8 = GoalPrior::new(0.8).unwrap();
        let g5 = GoalPrior::new(0.5).unwrap();
        assert!((utility_drive(1.3, 0.7, &g5) - 0.5_f64.ln()).abs() < 1e-15);
        assert!((utility_drive(50.0, 0.1, &g8) - 0.8_f64.ln()).abs() < 1e-12);
        let expected = 0.5 * 0.8_f64.ln() + 0.5 * 0.2_f64.ln();
        assert!((utility_drive(0.0, 2.0, &g8) - expected).abs() < 1e-15);
        assert!((expected + 0.9163).abs() < 1e-4);
        assert!(GoalPrior::new(1.0).is_err());
    }

    #[test]
    fn information_gain_limits() {
        assert_eq!(information_gain(0.0_f64, 0.0), 0.0);
        assert!((information_gain(0.0_f64, 1e9) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn grid_layout() {
        let g = CandidateGrid::<f64>::default();
        assert_eq!(g.len(), 441);
        assert_eq!(g.point(0), [0.0, 0.0]);
        assert_eq!(g.point(1), [0.0, 0.05]);
        assert_eq!(g.point(21), [0.05, 0.0]);
        assert_eq!(g.point(440), [1.0, 1.0]);
        assert!(CandidateGrid::square(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn empty_agent_field_is_constant_and_picks_origin() {
        let agent = Agent::<f64>::new(AgentConfig::default());
        let field = agent.field();
        assert!(field.records.iter().all(|r| r.mean == 0.0 && r.efe == field.records[0].efe));
        assert_eq!(select_proposal(&field, &mut seeded(0), 2).unwrap(), 0);
    }

    #[test]
    fn first_trial_is_random_and_reproducible() {
        let field = Agent::<f64>::new(AgentConfig::default()).field();
        let a = select_proposal(&field, &mut seeded(5), 1).unwrap();
        let b = select_proposal(&field, &mut seeded(5), 1).unwrap();
        assert_eq!(a, b);
        let picks: std::collections::HashSet<usize> = (0..20).map(|s| select_proposal(&field, &mut seeded(s), 1).unwrap()).collect();
        assert!(picks.len() > 10);
    }

    #[test]
    fn zero_trials_give_empty_traces() {
        let runs = run_ensemble(3, 0, &UserPrefs::<f64>::default(), &AgentConfig::default(), 1);
        assert!(runs.iter().all(|r| r.trials.is_empty() && r.error.is_none()));
        assert_eq!(summarize(&runs).success_rate, 0.0);
    }

    #[test]
    fn observe_triggers_optimization_on_schedule() {
        let mut agent = Agent::<f64>::new(AgentConfig::default());
        let flags: Vec<bool> = (0..10).map(|i| agent.observe([0.1 * i as f64, 0.5], i % 2 == 0).unwrap()).collect();
        assert_eq!(flags, [false, false, false, false, true, false, false, false, false, true]);
    }
}
