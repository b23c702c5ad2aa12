use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use aida_cli::report::{all_pass, Gate};
use aida_cli::{agent, context, separation};
use aida_core::agent::AgentConfig;
use aida_core::gpc::KernelParams;
use aida_core::simuser::UserPrefs;
use aida_server::ApiConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aida", version, about = "Hearing-aid context inference, source separation and preference learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; CSV companions are written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (all cores by default).
    #[arg(long)]
    workers: Option<usize>,
    /// Exit successfully even when an acceptance gate fails.
    #[arg(long)]
    no_gate: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify frames of the four tabulated noise contexts.
    VerifyContext {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, default_value_t = 100)]
        frame_len: usize,
    },
    /// Joint speech/noise inference on generated coupled datasets.
    VerifySeparation {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        datasets: usize,
    },
    /// Ensemble of agents against the simulated user.
    VerifyAgent {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 80)]
        agents: usize,
        #[arg(long, default_value_t = 80)]
        trials: usize,
        /// Use the nearly flat literal preference weights.
        #[arg(long)]
        literal_prefs: bool,
        /// Initial kernel length scale.
        #[arg(long)]
        initial_length: Option<f64>,
    },
    /// Serve the REST API and, optionally, the built console.
    Serve {
        #[arg(long, env = "AIDA_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, env = "AIDA_DATA_DIR", default_value = "aida-data")]
        data_dir: PathBuf,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn finish(gates: &[Gate], no_gate: bool) -> ExitCode {
    for g in gates {
        println!("{g}");
    }
    if all_pass(gates) || no_gate {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::VerifyContext { common, frames, frame_len } => {
            let config = context::ContextConfig { seed: common.seed, frames, frame_len, ..Default::default() };
            let report = aida_cli::with_workers(common.workers, || context::run(&config))??;
            context::write(&report, &common.out)?;
            println!("accuracy {:.4} over {frames} frames in {:.1}s", report.accuracy, report.runtime_s);
            Ok(finish(&report.gates, common.no_gate))
        }
        Command::VerifySeparation { common, datasets } => {
            let config = separation::SeparationConfig { seed: common.seed, datasets, workers: common.workers, ..Default::default() };
            let report = separation::run(&config)?;
            separation::write(&report, &common.out)?;
            let q = &report.score_quantiles;
            println!(
                "score q10 {:.4} median {:.4}; finite {:.3}; above baseline {:.3}; swaps {}",
                q.q10, q.median, report.finite_fraction, report.above_baseline_fraction, report.swaps
            );
            Ok(finish(&report.gates, common.no_gate))
        }
        Command::VerifyAgent { common, agents, trials, literal_prefs, initial_length } => {
            let mut agent_config = AgentConfig::default();
            if let Some(l) = initial_length {
                agent_config.initial_params = KernelParams { length: l, ..agent_config.initial_params };
            }
            let config = agent::AgentExperimentConfig {
                seed: common.seed,
                agents,
                trials,
                prefs: if literal_prefs { UserPrefs::literal() } else { UserPrefs::default() },
                agent: agent_config,
                workers: common.workers,
            };
            let report = agent::run(&config)?;
            agent::write(&report, &common.out)?;
            println!(
                "success {:.3}; median first success {:?}; {} errors",
                report.success_rate,
                report.median_first_success,
                report.errors.len()
            );
            Ok(finish(&report.gates, common.no_gate))
        }
        Command::Serve { port, bind, data_dir, static_dir } => {
            let config = ApiConfig { bind, port, static_dir, data_dir };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(aida_server::serve(config, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).with_writer(std::io::stderr).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
