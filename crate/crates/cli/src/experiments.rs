//! Replicated simulation experiments: bound verification and rate sweeps.
//!
//! Replications run in parallel on the current rayon pool and are merged in
//! replication order, so a report depends only on its configuration.

use std::time::Instant;

use fwdreg_core::bounds::{EXACT_SUBSET_CAP, GROTHENDIECK_BOUND};
use fwdreg_core::subsets::subsets_up_to;
use fwdreg_core::{
    forward_regression, gram, oracle_threshold, simulate_dataset, sparse_eig_exact,
    check_selection_bounds, check_parameter_bounds, BoundReport, EigSource, SimConfig, StopReason,
};
use fwdreg_core::bounds::ParameterBoundCheck;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::SCHEMA_VERSION;
use crate::error::{CliError, CliResult};
use crate::stats::{ols_slope, Summary};

/// Random subsets drawn when a needed sparse eigenvalue is out of reach of
/// exact enumeration.
const FALLBACK_DRAWS: usize = 20_000;

/// Which sparse eigenvalue scales the oracle threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPhi {
    /// `phi = 1`, i.e. `t = (2 safety ||E_n[x_i eps_i]||_inf)^2`.
    Unit,
    /// Exact `phi_min(size)` of the simulated design.
    SparseEig { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOptions {
    pub replications: usize,
    pub safety: f64,
    pub threshold_phi: ThresholdPhi,
    /// Exact sparse eigenvalues up to this size must be affordable before a
    /// verification run starts.
    pub max_exact_size: usize,
    #[serde(skip)]
    pub timings: bool,
}

impl ExperimentOptions {
    pub fn verify_defaults(cfg: &SimConfig) -> Self {
        Self {
            replications: 200,
            safety: 1.1,
            threshold_phi: ThresholdPhi::SparseEig {
                size: (2 * cfg.s0).clamp(1, cfg.p),
            },
            max_exact_size: 8,
            timings: false,
        }
    }

    pub fn rates_defaults() -> Self {
        Self {
            replications: 100,
            safety: 1.0,
            threshold_phi: ThresholdPhi::Unit,
            max_exact_size: 8,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// A check failed but used a sampled (upper-bound) eigenvalue.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub selection: BoundReport,
    pub parameter: ParameterBoundCheck,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRecord {
    pub n: usize,
    pub seed: u64,
    pub t: f64,
    pub t_floored: bool,
    pub s_hat: usize,
    pub true_selected: usize,
    pub false_selected: usize,
    pub stop_reason: StopReason,
    pub pred_error_norm: f64,
    pub l1: f64,
    pub l2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub replications: usize,
    pub pred_error_norm: Summary,
    pub l1: Summary,
    pub l2: Summary,
    pub s_hat: Summary,
    pub false_selected: Summary,
}

impl Aggregates {
    pub fn of(records: &[SeedRecord]) -> Option<Self> {
        Some(Self {
            replications: records.len(),
            pred_error_norm: Summary::of(records.iter().map(|r| r.pred_error_norm))?,
            l1: Summary::of(records.iter().map(|r| r.l1))?,
            l2: Summary::of(records.iter().map(|r| r.l2))?,
            s_hat: Summary::of(records.iter().map(|r| r.s_hat as f64))?,
            false_selected: Summary::of(records.iter().map(|r| r.false_selected as f64))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    pub replications: usize,
    pub pred_bound_pass: usize,
    pub selection_bound_pass: usize,
    /// Replications where some `m` met the threshold condition.
    pub selection_claim_applies: usize,
    pub parameter_bound_pass: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub all_passed: bool,
    /// `1 + 72 * 1.783^2`, the value of `C2` at `phi = 1`.
    pub c2_floor: f64,
}

impl Verdicts {
    fn of(records: &[SeedRecord]) -> Self {
        let verdicts: Vec<&BoundVerdict> = records.iter().filter_map(|r| r.bounds.as_ref()).collect();
        let count = |f: &dyn Fn(&BoundVerdict) -> bool| verdicts.iter().filter(|v| f(v)).count();
        let failed = count(&|v| v.status == CheckStatus::Fail);
        Self {
            replications: verdicts.len(),
            pred_bound_pass: count(&|v| v.selection.pred_bound_holds),
            selection_bound_pass: count(&|v| v.selection.selection_bound_holds()),
            selection_claim_applies: count(&|v| v.selection.selection_claim_applies),
            parameter_bound_pass: count(&|v| v.parameter.l1_ok && v.parameter.l2_ok),
            inconclusive: count(&|v| v.status == CheckStatus::Inconclusive),
            failed,
            all_passed: failed == 0,
            c2_floor: 1.0 + 72.0 * GROTHENDIECK_BOUND * GROTHENDIECK_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub replications: usize,
    pub median_pred_error: f64,
    pub median_s_hat: f64,
    pub median_s_hat_over_s0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSweep {
    pub rows: Vec<RateRow>,
    /// OLS slope of `ln(median error)` on `ln(n)`.
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_flag: Option<String>,
    pub max_median_s_hat_over_s0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    #[serde(flatten)]
    pub options: ExperimentOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub records: Vec<SeedRecord>,
    pub aggregates: Option<Aggregates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Verdicts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_sweep: Option<RateSweep>,
}

/// Seed of replication `rep` at grid point `grid_index`.
pub fn replicate_seed(base: u64, grid_index: usize, rep: usize) -> u64 {
    base.wrapping_add((grid_index as u64) << 32).wrapping_add(rep as u64)
}

fn run_replication(cfg: &SimConfig, opts: &ExperimentOptions, check_bounds: bool) -> CliResult<SeedRecord> {
    let start = Instant::now();
    let ds = simulate_dataset(cfg)?;
    let g = gram(&ds);
    let phi = match opts.threshold_phi {
        ThresholdPhi::Unit => 1.0,
        ThresholdPhi::SparseEig { size } => sparse_eig_exact(&g, size.clamp(1, cfg.p))?.value,
    };
    let tc = oracle_threshold(&ds, phi, opts.safety)?;
    let fit = forward_regression(&ds, tc.t, None)?;
    let gt = ds.ground_truth.as_ref().expect("simulated");
    let truth = gt.support();
    let true_selected = fit.support.iter().filter(|j| truth.contains(j)).count();

    let bounds = if check_bounds {
        let size = (fit.s_hat() + truth.len()).min(cfg.p).max(1);
        let source = if subsets_up_to(cfg.p, size) <= EXACT_SUBSET_CAP {
            EigSource::Exact
        } else {
            EigSource::Sampled {
                draws: FALLBACK_DRAWS,
                seed: cfg.seed,
            }
        };
        let selection = check_selection_bounds(&fit, &ds, &g, &source)?;
        let eig = source.report(&g, size)?;
        let parameter = check_parameter_bounds(&fit, &ds, &eig)?;
        let ok = selection.pred_bound_holds
            && selection.selection_bound_holds()
            && parameter.l1_ok
            && parameter.l2_ok;
        let sampled = selection.caveat_flag || eig.upper_bound_only;
        let status = match (ok, sampled) {
            (true, _) => CheckStatus::Pass,
            (false, true) => CheckStatus::Inconclusive,
            (false, false) => CheckStatus::Fail,
        };
        Some(BoundVerdict {
            selection,
            parameter,
            status,
        })
    } else {
        None
    };

    Ok(SeedRecord {
        n: cfg.n,
        seed: cfg.seed,
        t: tc.t,
        t_floored: tc.floored,
        s_hat: fit.s_hat(),
        true_selected,
        false_selected: fit.s_hat() - true_selected,
        stop_reason: fit.stop_reason,
        pred_error_norm: fit.pred_error_norm.expect("ground truth"),
        l1: fit.l1_error.expect("ground truth"),
        l2: fit.l2_error.expect("ground truth"),
        runtime_ms: opts
            .timings
            .then(|| start.elapsed().as_secs_f64() * 1e3),
        bounds,
    })
}

fn check_options(cfg: &SimConfig, opts: &ExperimentOptions) -> CliResult<()> {
    cfg.validate()?;
    if opts.replications == 0 {
        return Err(CliError::Input("replications must be >= 1".into()));
    }
    if !(opts.safety >= 1.0) {
        return Err(CliError::Input(format!("safety must be >= 1, got {}", opts.safety)));
    }
    Ok(())
}

/// Simulates, fits with the oracle threshold and checks the prediction,
/// selection-count and parameter-error bounds on every replication.
pub fn run_verify(cfg: &SimConfig, opts: &ExperimentOptions) -> CliResult<ExperimentReport> {
    check_options(cfg, opts)?;
    let size = opts.max_exact_size.clamp(1, cfg.p);
    let required = subsets_up_to(cfg.p, size);
    if required > EXACT_SUBSET_CAP {
        return Err(CliError::Input(format!(
            "exact sparse eigenvalues up to size {size} need {required} subsets at p = {} \
             (cap {EXACT_SUBSET_CAP}); reduce p or --max-exact-size",
            cfg.p
        )));
    }
    if let ThresholdPhi::SparseEig { size } = opts.threshold_phi {
        let required = subsets_up_to(cfg.p, size.clamp(1, cfg.p));
        if required > EXACT_SUBSET_CAP {
            return Err(CliError::Input(format!(
                "threshold eigenvalue size {size} needs {required} subsets (cap {EXACT_SUBSET_CAP})"
            )));
        }
    }

    let records = (0..opts.replications)
        .into_par_iter()
        .map(|rep| run_replication(&cfg.with_seed(replicate_seed(cfg.seed, 0, rep)), opts, true))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        command: "verify",
        config: ExperimentConfig {
            sim: cfg.clone(),
            options: opts.clone(),
            n_grid: None,
        },
        aggregates: Aggregates::of(&records),
        verdicts: Some(Verdicts::of(&records)),
        records,
        rate_sweep: None,
    })
}

/// Sweeps `n` with everything else fixed and fits the log-log slope of the
/// median prediction error.
pub fn run_rates(base: &SimConfig, n_grid: &[usize], opts: &ExperimentOptions) -> CliResult<ExperimentReport> {
    check_options(base, opts)?;
    if n_grid.len() < 4 {
        return Err(CliError::Input("n grid needs at least 4 points".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Input("n grid must be strictly increasing".into()));
    }
    for &n in n_grid {
        base.with_n(n).validate()?;
    }

    let jobs: Vec<(usize, usize)> = (0..n_grid.len())
        .flat_map(|g| (0..opts.replications).map(move |r| (g, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(g, r)| {
            let cfg = SimConfig {
                n: n_grid[g],
                seed: replicate_seed(base.seed, g, r),
                ..base.clone()
            };
            run_replication(&cfg, opts, false)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let s0 = base.s0.max(1) as f64;
    let rows: Vec<RateRow> = n_grid
        .iter()
        .map(|&n| {
            let at_n: Vec<&SeedRecord> = records.iter().filter(|r| r.n == n).collect();
            let pred = Summary::of(at_n.iter().map(|r| r.pred_error_norm)).expect("nonempty");
            let s_hat = Summary::of(at_n.iter().map(|r| r.s_hat as f64)).expect("nonempty");
            RateRow {
                n,
                replications: at_n.len(),
                median_pred_error: pred.median,
                median_s_hat: s_hat.median,
                median_s_hat_over_s0: s_hat.median / s0,
            }
        })
        .collect();

    let degenerate = rows.iter().any(|r| !(r.median_pred_error > 1e-12));
    let (slope, slope_flag) = if degenerate {
        (
            None,
            Some("median prediction error is zero at some n; slope undefined".to_string()),
        )
    } else {
        let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.median_pred_error.ln()).collect();
        (ols_slope(&lx, &ly), None)
    };
    let max_ratio = rows
        .iter()
        .map(|r| r.median_s_hat_over_s0)
        .fold(0.0, f64::max);

    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        command: "rates",
        config: ExperimentConfig {
            sim: base.clone(),
            options: opts.clone(),
            n_grid: Some(n_grid.to_vec()),
        },
        aggregates: Aggregates::of(&records),
        verdicts: None,
        records,
        rate_sweep: Some(RateSweep {
            rows,
            slope,
            slope_flag,
            max_median_s_hat_over_s0: max_ratio,
        }),
    })
}

/// Plot-ready CSV of a rate sweep.
pub fn write_rate_csv(path: &std::path::Path, sweep: &RateSweep) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "n",
        "replications",
        "median_pred_error",
        "median_s_hat",
        "median_s_hat_over_s0",
    ])?;
    for r in &sweep.rows {
        w.write_record([
            r.n.to_string(),
            r.replications.to_string(),
            r.median_pred_error.to_string(),
            r.median_s_hat.to_string(),
            r.median_s_hat_over_s0.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
