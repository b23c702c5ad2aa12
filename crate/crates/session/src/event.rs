//! Append-only session journal stored as JSON lines.
//!
//! Each line is one [`Event`]: a schema version, a gapless sequence number,
//! a wall-clock timestamp and a `kind`/`payload` pair. Appraisals and
//! session creation are synced to disk before the call returns.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use aida_core::context::ContextBank;
use serde::{Deserialize, Serialize};

use crate::state::SessionConfig;
use crate::{Result, SessionError};

pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionCreated {
        config: SessionConfig,
        bank: ContextBank<f64>,
    },
    FrameProcessed {
        k: usize,
        t: usize,
        /// Whether `x` came from the session's own environment.
        generated: bool,
        x: Vec<f64>,
        map: Option<usize>,
        belief: Vec<f64>,
        bfe: Vec<Option<f64>>,
        degraded: bool,
    },
    ContextSwitch {
        k: usize,
        from: Option<usize>,
        to: usize,
    },
    Appraisal {
        context: usize,
        u: [f64; 2],
        r: Option<bool>,
    },
    Proposal {
        context: usize,
        trial: usize,
        u: [f64; 2],
        efe: f64,
    },
    HyperparamUpdate {
        context: usize,
        sigma: f64,
        length: f64,
        /// Requested explicitly rather than by the appraisal schedule.
        manual: bool,
    },
    Error {
        context: Option<usize>,
        message: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SessionCreated { .. } => "session_created",
            Self::FrameProcessed { .. } => "frame_processed",
            Self::ContextSwitch { .. } => "context_switch",
            Self::Appraisal { .. } => "appraisal",
            Self::Proposal { .. } => "proposal",
            Self::HyperparamUpdate { .. } => "hyperparam_update",
            Self::Error { .. } => "error",
        }
    }

    fn needs_sync(&self) -> bool {
        matches!(self, Self::SessionCreated { .. } | Self::Appraisal { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub v: u32,
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn now(seq: u64, body: EventBody) -> Self {
        let timestamp_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        Self { v: EVENT_SCHEMA_VERSION, seq, timestamp_ms, body }
    }
}

/// Writer half of a journal file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Create a new journal; fails if the file exists.
    pub fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().write(true).create_new(true).open(path)?;
        Ok(Self { path: path.to_path_buf(), file })
    }

    /// Continue an existing journal.
    pub fn append_to(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        if event.body.needs_sync() {
            self.file.sync_data()?;
        }
        Ok(())
    }

    pub fn sync(&mut self) -> Result<()> {
        self.file.flush()?;
        self.file.sync_all()?;
        Ok(())
    }
}

/// Parse one journal line.
pub fn parse_line(line: &str) -> Result<Event> {
    let event: Event = serde_json::from_str(line)?;
    if event.v != EVENT_SCHEMA_VERSION {
        return Err(SessionError::Replay(format!("unsupported event schema version {}", event.v)));
    }
    Ok(event)
}

/// Read a whole journal, checking that sequence numbers start at 1 and have no gaps.
pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(parse_line(&line)?);
    }
    check_sequence(&events)?;
    Ok(events)
}

pub fn check_sequence(events: &[Event]) -> Result<()> {
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 + 1 {
            return Err(SessionError::Replay(format!("event {} has sequence number {}", i + 1, e.seq)));
        }
    }
    Ok(())
}
