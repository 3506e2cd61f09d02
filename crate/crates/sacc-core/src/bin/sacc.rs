//! Experiment runner for the scale-aware counting loss.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sacc_core::fusion::{layer_table, parse_graph};
use sacc_core::harness::fit::trace_csv;
use sacc_core::harness::{
    all_passed, cmd_fit, cmd_sweep, cmd_synth, generate_scenes, print_table, read_scene_set,
    run_all, sweep_csv, ExperimentConfig, LossKind,
};

#[derive(Parser)]
#[command(
    name = "sacc",
    about = "Synthetic-scene experiments for the scale-aware counting loss",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Key-value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config loss (`scale_aware` or `l2`).
    #[arg(long)]
    loss: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow_like::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(loss) = &self.loss {
            cfg.loss = LossKind::parse(loss)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Minimal error plumbing for the binary; the library carries the typed
/// errors.
mod anyhow_like {
    pub type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic scene set plus manifest.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for scene files and manifest.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit per-scale density predictions to scenes and report counts.
    Fit {
        #[command(flatten)]
        config: ConfigArgs,
        /// Scene directory from `synth`; scenes are regenerated from the
        /// config when omitted.
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a shared scene set across an alpha x beta_1 grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the oracle verification suite; exits nonzero on any failure.
    Verify {
        /// Seed for the suite's random instances.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Count parameters and MACs of a declarative layer graph.
    CountOps {
        /// Graph config: one `kind kernel stride in out` layer per line.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 224)]
        width: usize,
        #[arg(long, default_value_t = 224)]
        height: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> anyhow_like::Result<ExitCode> {
    match Cli::parse().command {
        Command::Synth { config, out_dir } => {
            let cfg = config.load()?;
            let manifest = cmd_synth(&cfg, &out_dir)?;
            print!("{manifest}");
        }
        Command::Fit {
            config,
            scenes,
            out_dir,
        } => {
            let cfg = config.load()?;
            let scene_set = match scenes {
                Some(dir) => read_scene_set(&dir)?,
                None => generate_scenes(&cfg)?,
            };
            let outcome = cmd_fit(&cfg, &scene_set)?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("counts.csv"), outcome.report.counts_csv())?;
            std::fs::write(out_dir.join("summary.csv"), outcome.report.summary_csv())?;
            std::fs::write(out_dir.join("trace.csv"), trace_csv(&outcome.first_trace))?;
            println!(
                "fitted {} scenes with {}: mae {} mse {}",
                outcome.report.rows.len(),
                cfg.loss.name(),
                outcome.report.mae,
                outcome.report.mse
            );
        }
        Command::Sweep { config, out_dir } => {
            let cfg = config.load()?;
            let rows = cmd_sweep(&cfg)?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("sweep.csv"), sweep_csv(&rows))?;
            print!("{}", sweep_csv(&rows));
        }
        Command::Verify { seed } => {
            let results = run_all(seed)?;
            print!("{}", print_table(&results));
            if !all_passed(&results) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::CountOps {
            graph,
            width,
            height,
            channels,
            out,
        } => {
            let text = std::fs::read_to_string(&graph)?;
            let layers = parse_graph(&text)?;
            let rows = layer_table(&layers, (channels, width, height))?;
            let mut csv = String::from("layer,kind,out_channels,out_width,out_height,params,macs\n");
            let mut total_params = 0u64;
            let mut total_macs = 0u64;
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.index,
                    r.kind.name(),
                    r.out_shape.0,
                    r.out_shape.1,
                    r.out_shape.2,
                    r.params,
                    r.macs
                ));
                total_params += r.params;
                total_macs += r.macs;
            }
            csv.push_str(&format!("total,,,,,{total_params},{total_macs}\n"));
            match out {
                Some(path) => std::fs::write(path, &csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
