//! Experiment harness: the context-classification, source-separation and
//! agent-ensemble experiments, each producing a JSON report plus CSV
//! companions, and the acceptance gates applied to them.

pub mod agent;
pub mod context;
pub mod report;
pub mod separation;

pub use report::{Gate, REPORT_SCHEMA_VERSION};

/// Run `f` on a dedicated rayon pool with `workers` threads (all cores when `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> anyhow::Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        anyhow::ensure!(w > 0, "--workers must be at least 1");
        builder = builder.num_threads(w);
    }
    Ok(builder.build()?.install(f))
}
