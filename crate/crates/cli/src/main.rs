//! `tacfoot`: dataset generation, training, closed-loop runs, flow
//! benchmarking and the live server.
//!
//! Exit codes: 0 ok, 1 usage, 2 runtime error, 3 a requested check failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tacfoot_core::balance::SensorMode;

use commands::{BalanceArgs, BenchArgs, ControllerArg, Ctx, ServeArgs, Status};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tacfoot", version, about = "Tactile foot and gripper simulation toolkit")]
struct Cli {
    /// Seed for data generation, training and simulation noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with optional `dataset`, `train`, `balance`, `grasp` and `flow` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate the tilt grid dataset into <out>/dataset.tfds.
    GenData {
        /// Use the 640×480 camera raster and full-size fields.
        #[arg(long)]
        full: bool,
    },
    /// Train the pose network; writes <out>/model.tfpm and <out>/loss.csv.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Fail with exit code 3 if either held-out RMSE exceeds this, degrees.
        #[arg(long)]
        max_rmse: Option<f64>,
    },
    /// Evaluate a trained network on the held-out split.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Evaluate on every sample instead of the held-out split.
        #[arg(long)]
        all: bool,
    },
    /// Run a balance scenario and write <out>/balance_<mode>.csv.
    RunBalance {
        /// `four-stage`, `lift`, `flat` or a path to a profile JSON file.
        #[arg(long, default_value = "four-stage")]
        profile: String,
        #[arg(long, default_value = "tactile")]
        mode: SensorMode,
        /// Pose network for tactile mode.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset whose sensor setup the network was trained on.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Plate angle at re-contact for the `lift` profile, degrees.
        #[arg(long, default_value_t = 9.0)]
        tilt: f64,
        /// Length of the `flat` profile, s.
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        /// Fail with exit code 3 if the tracking RMSE exceeds this, degrees.
        #[arg(long)]
        max_rmse: Option<f64>,
    },
    /// Run the grasp under a load schedule and write <out>/grasp_<on|off>.csv.
    RunGrasp {
        /// `paired`, `heavy`, `unloaded` or a path to a schedule JSON file.
        #[arg(long, default_value = "paired")]
        schedule: String,
        #[arg(long, value_enum, default_value = "both")]
        controller: ControllerArg,
        /// Fail with exit code 3 unless the controller halves the crossover
        /// time and keeps the grasp.
        #[arg(long)]
        check: bool,
    },
    /// Time and score the flow solver on warped 640×480 patterns.
    FlowBench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        levels: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "8")]
        patches: Vec<usize>,
        /// Random warps per configuration.
        #[arg(long, default_value_t = 5)]
        shifts: usize,
        /// Budget JSON; runs more than 25% slower fail with exit code 3.
        #[arg(long)]
        budget: Option<PathBuf>,
        /// Write the measured timings to --budget instead of checking.
        #[arg(long, requires = "budget")]
        record: bool,
    },
    /// Serve the live simulation over WebSocket at /ws.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "TACFOOT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "tactile")]
        mode: SensorMode,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Simulated seconds per wall second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Plate slew rate, degrees per second.
        #[arg(long, default_value_t = 5.0)]
        slew: f64,
    },
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .with_seed(cli.seed);
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(0),
        cfg,
        out: cli.out,
    };
    match &cli.command {
        Cmd::GenData { full } => commands::gen_data(&ctx, *full),
        Cmd::Train { data, epochs, max_rmse } => commands::train(&ctx, data, *epochs, *max_rmse),
        Cmd::Eval { data, model, all } => commands::eval(&ctx, data, model, *all),
        Cmd::RunBalance {
            profile,
            mode,
            model,
            data,
            tilt,
            duration,
            max_rmse,
        } => commands::run_balance(
            &ctx,
            BalanceArgs {
                profile,
                mode: *mode,
                model,
                data,
                tilt: *tilt,
                duration: *duration,
                max_rmse: *max_rmse,
            },
        ),
        Cmd::RunGrasp {
            schedule,
            controller,
            check,
        } => commands::run_grasp(&ctx, schedule, *controller, *check),
        Cmd::FlowBench {
            levels,
            patches,
            shifts,
            budget,
            record,
        } => commands::flow_bench(
            &ctx,
            BenchArgs {
                levels,
                patches,
                shifts: *shifts,
                budget,
                record: *record,
            },
        ),
        Cmd::Serve {
            host,
            port,
            mode,
            model,
            data,
            speed,
            slew,
        } => commands::serve(
            &ctx,
            ServeArgs {
                host,
                port: *port,
                mode: *mode,
                model,
                data,
                speed: *speed,
                slew: *slew,
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(3),
        Err(e) => {
            // drop causes already in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
