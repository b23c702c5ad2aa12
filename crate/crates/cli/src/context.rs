//! Context classification on the tabulated noise contexts.

use std::path::Path;
use std::time::Instant;

use aida_core::armodels::{generate_context_dataset, table1_contexts};
use aida_core::context::{accuracy, BankPriors, ContextBank, ContextTracker};
use aida_core::infer::{CarryPolicy, VmpSchedule};
use aida_core::rng;
use serde::{Deserialize, Serialize};

use crate::report::{companion, write_csv, write_json, Gate, REPORT_SCHEMA_VERSION};

pub const ACCURACY_GATE: f64 = 0.85;
/// Wall-clock budget for the full 1000-frame run.
pub const RUNTIME_GATE_S: f64 = 600.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub seed: u64,
    pub frames: usize,
    pub frame_len: usize,
    pub priors: BankPriors,
    /// Include the weak AR(5) and i.i.d. models in the bank.
    pub extras: bool,
    pub schedule: VmpSchedule,
    pub carry: CarryPolicy,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 1000,
            frame_len: 100,
            priors: BankPriors::default(),
            extras: true,
            schedule: VmpSchedule::default(),
            carry: CarryPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub frame: usize,
    pub label: usize,
    pub map: usize,
    pub map_name: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextReport {
    pub schema_version: u32,
    pub command: String,
    pub config: ContextConfig,
    pub models: Vec<String>,
    pub accuracy: f64,
    /// Rows: true context; columns: MAP bank entry.
    pub confusion: Vec<Vec<usize>>,
    /// Per-model inferences that produced no score.
    pub failed_inferences: usize,
    pub runtime_s: f64,
    pub gates: Vec<Gate>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

pub fn run(config: &ContextConfig) -> anyhow::Result<ContextReport> {
    let started = Instant::now();
    let contexts = table1_contexts::<f64>();
    let mut gen_rng = rng::stream(config.seed, "context-dataset", 0);
    let data = generate_context_dataset(&contexts, config.frames, config.frame_len, &mut gen_rng)?;
    let bank = ContextBank::table1(config.priors, config.extras)?;
    let models: Vec<String> = bank.models.iter().map(|m| m.name.clone()).collect();
    let mut tracker = ContextTracker::new(bank.clone(), config.schedule.clone(), config.carry)?;
    let mut maps = Vec::with_capacity(config.frames);
    let mut failed = 0;
    for frame in &data.frames {
        let step = tracker.step(frame)?;
        failed += step.belief.bfe.iter().filter(|b| b.is_none()).count();
        maps.push(step.map);
    }
    let acc = accuracy(&bank, &maps, &data.labels);
    let mut confusion = vec![vec![0; bank.len()]; contexts.len()];
    for (&m, &l) in maps.iter().zip(&data.labels) {
        confusion[l][m] += 1;
    }
    let trace = maps
        .iter()
        .zip(&data.labels)
        .enumerate()
        .map(|(frame, (&map, &label))| TraceRow { frame, label, map, map_name: models[map].clone(), correct: bank.models[map].label == Some(label) })
        .collect();
    let runtime_s = started.elapsed().as_secs_f64();
    let gates = vec![Gate::at_least("accuracy", acc, ACCURACY_GATE), Gate::at_most("runtime_s", runtime_s, RUNTIME_GATE_S)];
    Ok(ContextReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "verify-context".into(),
        config: config.clone(),
        models,
        accuracy: acc,
        confusion,
        failed_inferences: failed,
        runtime_s,
        gates,
        trace,
    })
}

/// Write the report and its `_trace.csv` (frame, label, MAP).
pub fn write(report: &ContextReport, out: &Path) -> anyhow::Result<()> {
    write_json(out, report)?;
    write_csv(&companion(out, "trace.csv"), &report.trace)
}
