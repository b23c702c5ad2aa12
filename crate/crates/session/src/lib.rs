//! Session orchestration for the simulated hearing aid: frame ingestion,
//! context tracking, source separation, output synthesis and the
//! appraisal-driven gain agents, with a replayable JSON-lines journal.

pub mod environment;
pub mod event;
pub mod state;

pub use environment::{Environment, EnvironmentKind, GeneratedFrame};
pub use event::{Event, EventBody, EventLog, EVENT_SCHEMA_VERSION};
pub use state::{replay, FrameResult, Session, SessionConfig, SessionState, TrialEntry};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown environment {0:?} (expected synthetic or table1)")]
    UnknownEnvironment(String),
    #[error("no frame has been processed yet")]
    NoFrame,
    #[error("hyperparameter optimization needs both positive and negative appraisals for the current context")]
    SingleClass,
    #[error("this session has no frame generator")]
    NoGenerator,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("replay: {0}")]
    Replay(String),
    #[error(transparent)]
    Core(#[from] aida_core::error::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SessionError> = std::result::Result<T, E>;

/// Segment index `⌈t / W⌉` of sample `t` (both one based).
pub fn segment_index(t: usize, w: usize) -> Result<usize> {
    if t == 0 || w == 0 {
        return Err(SessionError::InvalidFrame(format!("segment index needs t >= 1 and W >= 1 (t = {t}, W = {w})")));
    }
    Ok(t.div_ceil(w))
}

/// Hearing-aid output `y_t = u_s E[s_t] + u_n E[n_t]`.
pub fn ha_output(speech: &[f64], noise: &[f64], u: [f64; 2]) -> Result<Vec<f64>> {
    if speech.len() != noise.len() {
        return Err(aida_core::error::Error::DimensionMismatch { expected: speech.len(), got: noise.len() }.into());
    }
    Ok(speech.iter().zip(noise).map(|(s, n)| u[0] * s + u[1] * n).collect())
}
