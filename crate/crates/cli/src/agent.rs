//! Ensemble of independent preference-learning agents against the
//! simulated user.

use std::path::Path;
use std::time::Instant;

use aida_core::agent::{run_ensemble, summarize, AgentConfig, AgentRun, EnsembleSummary};
use aida_core::simuser::UserPrefs;
use serde::{Deserialize, Serialize};

use crate::report::{companion, write_csv, write_json, Gate, REPORT_SCHEMA_VERSION};

pub const SUCCESS_GATE: f64 = 0.70;
pub const MEDIAN_GATE: f64 = 45.0;
/// Wall-clock budget for 80 × 80 on 8 workers.
pub const RUNTIME_GATE_S: f64 = 1200.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentExperimentConfig {
    pub seed: u64,
    pub agents: usize,
    pub trials: usize,
    pub prefs: UserPrefs<f64>,
    pub agent: AgentConfig<f64>,
    pub workers: Option<usize>,
}

impl Default for AgentExperimentConfig {
    fn default() -> Self {
        Self { seed: 0, agents: 80, trials: 80, prefs: UserPrefs::default(), agent: AgentConfig::default(), workers: None }
    }
}

/// Trace row in the agent CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub u_s: f64,
    pub u_n: f64,
    pub r: u8,
    pub utility_drive: f64,
    pub info_gain: f64,
    pub efe_min: f64,
    pub sigma: f64,
    pub l: f64,
}

pub const TRACE_COLUMNS: [&str; 9] = ["trial", "u_s", "u_n", "r", "utility_drive", "info_gain", "efe_min", "sigma", "l"];

/// Proposal counts per grid node over all agents and trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub u_s: f64,
    pub u_n: f64,
    pub proposals: usize,
    pub positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstSuccessBin {
    pub first_success_trial: usize,
    pub agents: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub schema_version: u32,
    pub command: String,
    pub config: AgentExperimentConfig,
    pub summary: EnsembleSummary,
    pub success_rate: f64,
    pub mean_first_success: Option<f64>,
    pub median_first_success: Option<f64>,
    pub errors: Vec<String>,
    pub runtime_s: f64,
    pub gates: Vec<Gate>,
    #[serde(skip)]
    pub runs: Vec<AgentRun<f64>>,
}

pub fn run(config: &AgentExperimentConfig) -> anyhow::Result<AgentReport> {
    let started = Instant::now();
    let runs = crate::with_workers(config.workers, || run_ensemble(config.agents, config.trials, &config.prefs, &config.agent, config.seed))?;
    let summary = summarize(&runs);
    let runtime_s = started.elapsed().as_secs_f64();
    let errors: Vec<String> = runs.iter().filter_map(|r| r.error.as_ref().map(|e| format!("agent {}: {e}", r.agent))).collect();
    let gates = vec![
        Gate::at_least("success_rate", summary.success_rate, SUCCESS_GATE),
        Gate::at_most("median_first_success", summary.median_first_success.unwrap_or(f64::INFINITY), MEDIAN_GATE),
        Gate::at_most("crashed_agents", summary.failed as f64, 0.0),
        Gate::at_most("runtime_s", runtime_s, RUNTIME_GATE_S),
    ];
    Ok(AgentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "verify-agent".into(),
        config: config.clone(),
        success_rate: summary.success_rate,
        mean_first_success: summary.mean_first_success,
        median_first_success: summary.median_first_success,
        summary,
        errors,
        runtime_s,
        gates,
        runs,
    })
}

pub fn trace_rows(run: &AgentRun<f64>) -> Vec<TraceRow> {
    run.trials
        .iter()
        .map(|t| TraceRow {
            trial: t.trial,
            u_s: t.u[0],
            u_n: t.u[1],
            r: u8::from(t.r),
            utility_drive: t.utility_drive,
            info_gain: t.info_gain,
            efe_min: t.efe_min,
            sigma: t.sigma,
            l: t.length,
        })
        .collect()
}

pub fn heatmap(report: &AgentReport) -> Vec<HeatmapCell> {
    let grid = report.config.agent.grid;
    let mut cells: Vec<HeatmapCell> = grid.points().into_iter().map(|u| HeatmapCell { u_s: u[0], u_n: u[1], proposals: 0, positives: 0 }).collect();
    for t in report.runs.iter().flat_map(|r| &r.trials) {
        if let Some(c) = cells.iter_mut().find(|c| c.u_s == t.u[0] && c.u_n == t.u[1]) {
            c.proposals += 1;
            c.positives += usize::from(t.r);
        }
    }
    cells
}

pub fn first_success_histogram(report: &AgentReport) -> Vec<FirstSuccessBin> {
    (1..=report.config.trials)
        .map(|k| FirstSuccessBin { first_success_trial: k, agents: report.runs.iter().filter(|r| r.first_success() == Some(k)).count() })
        .collect()
}

/// Write the report, `_heatmap.csv`, `_first_success.csv` and one trace CSV
/// per agent under `_traces/`.
pub fn write(report: &AgentReport, out: &Path) -> anyhow::Result<()> {
    write_json(out, report)?;
    write_csv(&companion(out, "heatmap.csv"), heatmap(report))?;
    write_csv(&companion(out, "first_success.csv"), first_success_histogram(report))?;
    let dir = companion(out, "traces");
    for run in &report.runs {
        write_csv(&dir.join(format!("agent_{:03}.csv", run.agent)), trace_rows(run))?;
    }
    Ok(())
}
