//! The hearing-aid loop: frames in, context belief and processed output
//! out, appraisals routed to the agent of the current context.
//!
//! [`SessionState`] is a plain value. Every operation on it returns the
//! journal entries it produced, and [`replay`] folds a journal back into an
//! identical state by re-running the recorded inputs.

use std::path::Path;

use aida_core::agent::{proposal_stream, Agent, AgentConfig, EfeField, Proposal};
use aida_core::context::{ContextBank, ContextTracker};
use aida_core::gpc::KernelParams;
use aida_core::infer::{CarryPolicy, VmpSchedule};
use serde::{Deserialize, Serialize};

use crate::environment::{Environment, EnvironmentKind};
use crate::event::{check_sequence, read_events, Event, EventBody, EventLog};
use crate::{ha_output, segment_index, Result, SessionError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub environment: EnvironmentKind,
    pub seed: u64,
    /// Samples per frame `W`.
    pub frame_len: usize,
    pub agent: AgentConfig<f64>,
    pub schedule: VmpSchedule,
    /// Defaults to carrying no parameters: the environment banks use an
    /// informative speech prior, and letting it adapt lets the speech channel
    /// absorb the noise that distinguishes the contexts.
    pub carry: CarryPolicy,
}

impl SessionConfig {
    pub fn new(environment: EnvironmentKind, seed: u64) -> Self {
        Self {
            environment,
            seed,
            frame_len: 100,
            agent: AgentConfig::default(),
            schedule: VmpSchedule::default(),
            carry: CarryPolicy { speech_parameters: false, noise_parameters: false },
        }
    }
}

/// Outcome of one processed frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    /// Segment index of the frame (one based).
    pub k: usize,
    /// Samples processed up to and including this frame.
    pub t: usize,
    /// Ground-truth context when the frame was generated by the environment.
    pub label: Option<usize>,
    /// MAP context; `None` only if no model produced a score.
    pub map: Option<usize>,
    pub belief: Vec<f64>,
    pub bfe: Vec<Option<f64>>,
    /// Gains applied to this frame.
    pub gains: [f64; 2],
    /// Inference failed for the MAP model; the output is the unprocessed input.
    pub degraded: bool,
    pub x: Vec<f64>,
    pub speech: Vec<f64>,
    pub noise: Vec<f64>,
    pub y: Vec<f64>,
}

/// One answered appraisal, in the agent trace layout plus the context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub context: usize,
    pub trial: usize,
    pub u: [f64; 2],
    pub r: bool,
    pub utility_drive: f64,
    pub info_gain: f64,
    pub efe_min: f64,
    pub sigma: f64,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub config: SessionConfig,
    pub environment: Environment,
    /// Samples processed.
    pub t: usize,
    /// Segment index of the latest frame; 0 before the first frame.
    pub k: usize,
    pub tracker: ContextTracker<f64>,
    /// One agent per bank entry.
    pub agents: Vec<Agent<f64>>,
    /// Active proposal (current gains and their scores) per bank entry.
    pub proposals: Vec<Proposal<f64>>,
    /// MAP context of the most recent frame that had one.
    pub current: Option<usize>,
    pub latest: Option<FrameResult>,
    pub history: Vec<TrialEntry>,
    /// Appraisal events including missing ones.
    pub appraisals: usize,
    /// Sequence number of the last journal entry.
    pub head: u64,
}

impl SessionState {
    /// Fresh session; returns the creation entry.
    pub fn new(config: SessionConfig, bank: ContextBank<f64>) -> Result<(Self, Vec<EventBody>)> {
        if config.frame_len == 0 {
            return Err(SessionError::InvalidFrame("frame length must be positive".into()));
        }
        for m in &bank.models {
            m.spec.validate(config.frame_len)?;
        }
        let environment = Environment::new(config.environment, config.seed, config.frame_len)?;
        let tracker = ContextTracker::new(bank.clone(), config.schedule.clone(), config.carry)?;
        let mut agents: Vec<Agent<f64>> = (0..bank.len()).map(|_| Agent::new(config.agent)).collect();
        let proposals = agents
            .iter_mut()
            .enumerate()
            .map(|(c, a)| a.propose(&mut proposal_stream(config.seed, c)))
            .collect::<aida_core::error::Result<Vec<_>>>()?;
        let state = Self {
            config: config.clone(),
            environment,
            t: 0,
            k: 0,
            tracker,
            agents,
            proposals,
            current: None,
            latest: None,
            history: Vec::new(),
            appraisals: 0,
            head: 1,
        };
        Ok((state, vec![EventBody::SessionCreated { config, bank }]))
    }

    pub fn bank(&self) -> &ContextBank<f64> {
        &self.tracker.bank
    }

    pub fn gains(&self) -> Vec<[f64; 2]> {
        self.proposals.iter().map(|p| p.u).collect()
    }

    fn commit(&mut self, bodies: &[EventBody]) {
        self.head += bodies.len() as u64;
    }

    /// Generate the next frame from the environment and process it.
    pub fn next_frame(&mut self) -> Result<(FrameResult, Vec<EventBody>)> {
        let frame = self.environment.next_frame()?;
        let mut out = self.process(frame.x, true)?;
        out.0.label = Some(frame.label);
        if let Some(latest) = &mut self.latest {
            latest.label = Some(frame.label);
        }
        Ok(out)
    }

    /// Process a caller-supplied frame of exactly `W` samples.
    pub fn process_frame(&mut self, x: Vec<f64>) -> Result<(FrameResult, Vec<EventBody>)> {
        self.process(x, false)
    }

    fn process(&mut self, x: Vec<f64>, generated: bool) -> Result<(FrameResult, Vec<EventBody>)> {
        if x.len() != self.config.frame_len {
            return Err(SessionError::InvalidFrame(format!("expected {} samples, got {}", self.config.frame_len, x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(SessionError::InvalidFrame(format!("sample {i} is not finite")));
        }
        let t = self.t + x.len();
        let k = segment_index(t, self.config.frame_len)?;
        let l = self.bank().len();
        let mut bodies = Vec::new();

        let (map, belief, bfe, estimate) = match self.tracker.step(&x) {
            Ok(fc) => {
                let estimate = fc.posteriors[fc.map].as_ref().map(|p| {
                    let speech = p.speech.as_ref().map_or_else(|| vec![0.0; x.len()], |s| s.mean.clone());
                    (speech, p.noise.mean.clone())
                });
                (Some(fc.map), fc.belief.posterior.probs().to_vec(), fc.belief.bfe, estimate)
            }
            Err(e) => {
                bodies.push(EventBody::Error { context: None, message: format!("frame {k}: {e}") });
                (None, self.tracker.belief.probs().to_vec(), vec![None; l], None)
            }
        };

        let previous = self.current;
        if map.is_some() {
            self.current = map;
        }
        let gains = self.current.map_or([1.0, 1.0], |c| self.proposals[c].u);
        let degraded = estimate.is_none();
        let (speech, noise, y) = match estimate {
            Some((s, n)) => {
                let y = ha_output(&s, &n, gains)?;
                (s, n, y)
            }
            None => (vec![0.0; x.len()], x.clone(), x.clone()),
        };

        let frame = EventBody::FrameProcessed { k, t, generated, x: x.clone(), map, belief: belief.clone(), bfe: bfe.clone(), degraded };
        bodies.insert(0, frame);
        if let Some(to) = map {
            if previous != Some(to) {
                bodies.push(EventBody::ContextSwitch { k, from: previous, to });
            }
        }

        let result = FrameResult { k, t, label: None, map, belief, bfe, gains, degraded, x, speech, noise, y };
        self.t = t;
        self.k = k;
        self.latest = Some(result.clone());
        self.commit(&bodies);
        Ok((result, bodies))
    }

    /// Feed an appraisal of the current gains to the current context's agent.
    /// Returns the new proposal, or `None` for a missing appraisal or a
    /// failed fit (which is journaled as an error).
    pub fn handle_appraisal(&mut self, r: Option<bool>) -> Result<(Option<Proposal<f64>>, Vec<EventBody>)> {
        let c = self.current.ok_or(SessionError::NoFrame)?;
        let u = self.proposals[c].u;
        let mut bodies = vec![EventBody::Appraisal { context: c, u, r }];
        self.appraisals += 1;
        let Some(r) = r else {
            self.commit(&bodies);
            return Ok((None, bodies));
        };

        let active = self.proposals[c].clone();
        let agent = &mut self.agents[c];
        let step = agent.observe(u, r).and_then(|optimized| {
            let next = agent.propose(&mut proposal_stream(self.config.seed, c))?;
            Ok((optimized, next))
        });
        let proposal = match step {
            Ok((optimized, next)) => {
                let params = agent.gpc.params;
                if optimized {
                    bodies.push(EventBody::HyperparamUpdate { context: c, sigma: params.sigma, length: params.length, manual: false });
                }
                self.history.push(TrialEntry {
                    context: c,
                    trial: active.trial,
                    u,
                    r,
                    utility_drive: active.utility_drive,
                    info_gain: active.info_gain,
                    efe_min: active.efe,
                    sigma: params.sigma,
                    length: params.length,
                });
                bodies.push(EventBody::Proposal { context: c, trial: next.trial, u: next.u, efe: next.efe });
                self.proposals[c] = next.clone();
                Some(next)
            }
            Err(e) => {
                bodies.push(EventBody::Error { context: Some(c), message: e.to_string() });
                None
            }
        };
        self.commit(&bodies);
        Ok((proposal, bodies))
    }

    /// Re-estimate the kernel hyperparameters of the current context now.
    pub fn optimize(&mut self) -> Result<(KernelParams<f64>, Vec<EventBody>)> {
        let c = self.current.ok_or(SessionError::NoFrame)?;
        if !self.agents[c].gpc.data.has_both_classes() {
            return Err(SessionError::SingleClass);
        }
        let params = self.agents[c].optimize_now()?;
        let bodies = vec![EventBody::HyperparamUpdate { context: c, sigma: params.sigma, length: params.length, manual: true }];
        self.commit(&bodies);
        Ok((params, bodies))
    }

    /// Context whose agent the UI shows: the current MAP, else the first.
    pub fn focus(&self) -> usize {
        self.current.unwrap_or(0)
    }

    /// EFE field of the focused agent on its own gain box at `resolution`².
    pub fn efe(&self, resolution: usize) -> Result<EfeField<f64>> {
        let agent = &self.agents[self.focus()];
        let grid = aida_core::agent::CandidateGrid::new(agent.config.grid.lo, agent.config.grid.hi, [resolution; 2])?;
        Ok(aida_core::agent::efe_field(&agent.gpc, &grid, &agent.config.goal))
    }
}

/// A live session: state plus its journal.
#[derive(Debug)]
pub struct Session {
    state: SessionState,
    events: Vec<Event>,
    log: Option<EventLog>,
}

impl Session {
    pub fn new(config: SessionConfig, bank: ContextBank<f64>, log: Option<EventLog>) -> Result<Self> {
        let (state, bodies) = SessionState::new(config, bank)?;
        let mut s = Self { state, events: Vec::new(), log };
        s.record(bodies)?;
        Ok(s)
    }

    /// Session over the environment's own bank.
    pub fn for_environment(config: SessionConfig, log: Option<EventLog>) -> Result<Self> {
        let bank = config.environment.bank()?;
        Self::new(config, bank, log)
    }

    /// Rebuild from a journal file and keep appending to it.
    pub fn resume(path: &Path) -> Result<Self> {
        let events = read_events(path)?;
        let state = replay(&events)?;
        Ok(Self { state, events, log: Some(EventLog::append_to(path)?) })
    }

    fn record(&mut self, bodies: Vec<EventBody>) -> Result<()> {
        let first = self.state.head + 1 - bodies.len() as u64;
        for (i, body) in bodies.into_iter().enumerate() {
            let event = Event::now(first + i as u64, body);
            if let Some(log) = &mut self.log {
                log.append(&event)?;
            }
            self.events.push(event);
        }
        Ok(())
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn next_frame(&mut self) -> Result<FrameResult> {
        let (res, bodies) = self.state.next_frame()?;
        self.record(bodies)?;
        Ok(res)
    }

    pub fn process_frame(&mut self, x: Vec<f64>) -> Result<FrameResult> {
        let (res, bodies) = self.state.process_frame(x)?;
        self.record(bodies)?;
        Ok(res)
    }

    pub fn handle_appraisal(&mut self, r: Option<bool>) -> Result<Option<Proposal<f64>>> {
        let (p, bodies) = self.state.handle_appraisal(r)?;
        self.record(bodies)?;
        Ok(p)
    }

    pub fn optimize(&mut self) -> Result<KernelParams<f64>> {
        let (p, bodies) = self.state.optimize()?;
        self.record(bodies)?;
        Ok(p)
    }

    pub fn sync(&mut self) -> Result<()> {
        match &mut self.log {
            Some(log) => log.sync(),
            None => Ok(()),
        }
    }
}

/// Fold a journal into the state it describes.
///
/// Inputs (frames, appraisals, explicit optimizations) are re-executed; every
/// entry they produced must match the journal exactly.
pub fn replay(events: &[Event]) -> Result<SessionState> {
    check_sequence(events)?;
    let (first, rest) = events.split_first().ok_or(SessionError::Replay("empty journal".into()))?;
    let EventBody::SessionCreated { config, bank } = &first.body else {
        return Err(SessionError::Replay("journal does not start with session_created".into()));
    };
    let (mut state, _) = SessionState::new(config.clone(), bank.clone())?;
    let mut i = 0;
    while i < rest.len() {
        let produced = match &rest[i].body {
            EventBody::FrameProcessed { generated: true, x, .. } => {
                let (res, bodies) = state.next_frame()?;
                if &res.x != x {
                    return Err(SessionError::Replay(format!("regenerated frame {} differs from the journal", res.k)));
                }
                bodies
            }
            EventBody::FrameProcessed { generated: false, x, .. } => state.process_frame(x.clone())?.1,
            EventBody::Appraisal { r, .. } => state.handle_appraisal(*r)?.1,
            EventBody::HyperparamUpdate { manual: true, .. } => state.optimize()?.1,
            other => return Err(SessionError::Replay(format!("unexpected {} at sequence {}", other.kind(), rest[i].seq))),
        };
        for body in &produced {
            match rest.get(i) {
                Some(e) if &e.body == body => i += 1,
                Some(e) => return Err(SessionError::Replay(format!("sequence {}: journal has {}, replay produced {}", e.seq, e.body.kind(), body.kind()))),
                None => return Err(SessionError::Replay("journal ends inside a command".into())),
            }
        }
    }
    Ok(state)
}
