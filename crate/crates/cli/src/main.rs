use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fwdreg_cli::commands::{run_compare, run_fit, run_simulate, run_sparse_eig, EigMode};
use fwdreg_cli::experiments::{run_rates, run_verify, write_rate_csv, ExperimentOptions, ThresholdPhi};
use fwdreg_cli::{load_sim_config, write_json, CliError, CliResult};

#[derive(Parser)]
#[command(name = "fwdreg", version, about = "Thresholded forward regression experiments")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Fit forward regression to a CSV dataset.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(short = 't', long)]
        threshold: f64,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the finite-sample bounds over simulated replications.
    Verify {
        /// Simulation config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.1)]
        safety: f64,
        /// Sparse-eigenvalue size scaling the oracle threshold [default: 2 s0].
        #[arg(long, conflicts_with = "unit_phi")]
        threshold_eig_size: Option<usize>,
        /// Scale the oracle threshold with phi = 1.
        #[arg(long)]
        unit_phi: bool,
        #[arg(long, default_value_t = 8)]
        max_exact_size: usize,
        /// Record per-replication wall time (makes reports non-reproducible).
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the sample size and fit the error rate.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        safety: f64,
        /// Sparse-eigenvalue size scaling the oracle threshold [default: phi = 1].
        #[arg(long)]
        threshold_eig_size: Option<usize>,
        #[arg(long)]
        timings: bool,
        /// Plot-ready CSV of the sweep.
        #[arg(long)]
        out: PathBuf,
        /// Full JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Minimum sparse eigenvalue of a CSV design's Gram matrix.
    SparseEig {
        #[arg(long)]
        input: PathBuf,
        #[arg(short = 's', long)]
        size: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward regression against exhaustive best subset of the same size.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(short = 't', long)]
        threshold: f64,
        /// Step limit for forward regression.
        #[arg(short = 'k', long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a simulated dataset as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Ground truth (JSON).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Fit {
            input,
            threshold,
            max_steps,
            out,
        } => write_json(out.as_deref(), &run_fit(&input, threshold, max_steps)?),

        Command::Verify {
            config,
            replications,
            seed,
            safety,
            threshold_eig_size,
            unit_phi,
            max_exact_size,
            timings,
            out,
        } => {
            let mut cfg = load_sim_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let mut opts = ExperimentOptions::verify_defaults(&cfg);
            opts.replications = replications;
            opts.safety = safety;
            opts.max_exact_size = max_exact_size;
            opts.timings = timings;
            if unit_phi {
                opts.threshold_phi = ThresholdPhi::Unit;
            } else if let Some(size) = threshold_eig_size {
                opts.threshold_phi = ThresholdPhi::SparseEig { size };
            }
            let report = run_verify(&cfg, &opts)?;
            write_json(out.as_deref(), &report)?;
            let v = report.verdicts.as_ref().expect("verify reports carry verdicts");
            eprintln!(
                "prediction bound {}/{}, selection bound {}/{}, parameter chain {}/{}, inconclusive {}",
                v.pred_bound_pass,
                v.replications,
                v.selection_bound_pass,
                v.replications,
                v.parameter_bound_pass,
                v.replications,
                v.inconclusive
            );
            if v.failed > 0 {
                return Err(CliError::BoundFailure(format!(
                    "{} replication(s) violated a deterministic bound",
                    v.failed
                )));
            }
            Ok(())
        }

        Command::Rates {
            config,
            n_grid,
            replications,
            seed,
            safety,
            threshold_eig_size,
            timings,
            out,
            report,
        } => {
            let mut cfg = load_sim_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let mut opts = ExperimentOptions::rates_defaults();
            opts.replications = replications;
            opts.safety = safety;
            opts.timings = timings;
            if let Some(size) = threshold_eig_size {
                opts.threshold_phi = ThresholdPhi::SparseEig { size };
            }
            let rep = run_rates(&cfg, &n_grid, &opts)?;
            let sweep = rep.rate_sweep.as_ref().expect("rates reports carry a sweep");
            write_rate_csv(&out, sweep)?;
            if let Some(path) = report {
                write_json(Some(&path), &rep)?;
            }
            match (sweep.slope, &sweep.slope_flag) {
                (Some(s), _) => eprintln!(
                    "log-log slope {s:.4}, max median s_hat/s0 {}",
                    sweep.max_median_s_hat_over_s0
                ),
                (None, Some(flag)) => eprintln!("{flag}"),
                (None, None) => eprintln!("slope undefined"),
            }
            Ok(())
        }

        Command::SparseEig {
            input,
            size,
            mode,
            draws,
            seed,
            out,
        } => {
            let mode = match mode {
                Mode::Exact => EigMode::Exact,
                Mode::Sampled => EigMode::Sampled { draws, seed },
            };
            write_json(out.as_deref(), &run_sparse_eig(&input, size, mode)?)
        }

        Command::Compare {
            input,
            threshold,
            k,
            out,
        } => write_json(out.as_deref(), &run_compare(&input, threshold, k)?),

        Command::Simulate {
            config,
            seed,
            out,
            truth,
        } => {
            let mut cfg = load_sim_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let gt = run_simulate(&cfg, &out)?;
            if let Some(path) = truth {
                write_json(Some(&path), &gt)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(CliError::Input(format!("cannot start {threads} threads: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
