use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use qbm_core::app::{self, RunOptions, PRESETS};
use qbm_core::Error;

/// Quantum Brownian motion by weighted classical trajectories.
#[derive(Parser)]
#[command(name = "qbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write per-observable CSVs plus a manifest.
    Run {
        /// Config file, or the name of a bundled preset.
        config: String,
        #[command(flatten)]
        common: Common,
        /// Also write every noise path to noise.bin.
        #[arg(long)]
        dump_noise: bool,
        /// Also write every trajectory to trajectories.bin.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Compare the empirical noise autocorrelation with its target.
    NoiseCheck {
        /// Config file, or the name of a bundled preset.
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Bundled experiment configs.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names with a one-line summary.
    List,
    /// Print a preset's config.
    Show { name: String },
}

#[derive(Args)]
struct Common {
    /// Master seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory count; for noise-check, the number of noise paths.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: run.out_dir, then $QBM_OUT_DIR, then .).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            n_traj: self.n_traj,
            workers: self.workers,
            out_dir: self.out_dir.clone(),
            ..Default::default()
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Format { .. } | Error::Io { .. } => 2,
        _ => 1,
    }
}

fn progress_bar() -> Arc<qbm_core::dynamics::ProgressFn> {
    Arc::new(|done, total| {
        let step = (total / 20).max(1);
        if done % step == 0 || done == total {
            eprint!("\r{done}/{total} trajectories");
            if done == total {
                eprintln!();
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            common,
            dump_noise,
            dump_trajectories,
        } => (|| {
            let cfg = app::load_config(&config)?;
            let opts = RunOptions {
                dump_noise,
                dump_trajectories,
                progress: (!common.quiet).then(progress_bar),
                ..common.options()
            };
            let summary = app::run(&cfg, &opts)?;
            for s in &summary.series {
                let low = s.low_effective_n();
                if !low.is_empty() {
                    eprintln!(
                        "warning: {}: effective sample size below {} at {} of {} times",
                        s.name,
                        qbm_core::observables::MIN_EFFECTIVE_N,
                        low.len(),
                        s.len()
                    );
                }
            }
            if summary.failed > 0 {
                eprintln!("warning: {} trajectories failed and were dropped", summary.failed);
            }
            for f in &summary.files {
                println!("{}", f.display());
            }
            eprintln!("done in {:.1} s", summary.wall_time);
            Ok(0)
        })(),
        Command::NoiseCheck { config, common } => (|| {
            let mut cfg = app::load_config(&config)?;
            if let Some(n) = common.n_traj {
                cfg.noise_check.n_paths = n;
            }
            let opts = RunOptions {
                n_traj: None,
                ..common.options()
            };
            let report = app::noise_check(&cfg, &opts)?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            let dir = app::resolve_out_dir(&opts.apply(&cfg)?);
            for f in app::write_noise_report(&dir, &report)? {
                println!("{}", f.display());
            }
            for l in &report.lags {
                eprintln!(
                    "lag {:>10.4}  estimate {:>12.5e}  target {:>12.5e}  z {:>7.2}",
                    l.lag, l.estimate, l.target, l.z
                );
            }
            let verdict = if report.passed { "PASS" } else { "FAIL" };
            eprintln!(
                "{verdict}: max |z| = {:.2} (limit {}), runs-test p = {:.3}",
                report.max_abs_z,
                app::NOISE_CHECK_Z,
                report.runs_p_value
            );
            Ok(if report.passed { 0 } else { 3 })
        })(),
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, text) in PRESETS {
                    println!("{name:<16} {}", app::preset_summary(text));
                }
                Ok(0)
            }
            PresetAction::Show { name } => match app::preset(&name) {
                Some(text) => {
                    print!("{text}");
                    Ok(0)
                }
                None => Err(Error::Misuse(format!("no preset named `{name}`"))),
            },
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
