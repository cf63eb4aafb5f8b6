//! Single-dataset commands: fit, sparse-eig, compare and simulate.

use std::path::Path;

use fwdreg_core::oracle::best_subset;
use fwdreg_core::{
    forward_regression, gram, simulate_dataset, sparse_eig_exact, sparse_eig_sampled, Dataset,
    SimConfig, SparseEigReport, StopReason,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::table::{centered_dataset, read_table, write_table, Table};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub input: String,
    pub threshold: f64,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub index: usize,
    pub name: String,
    pub gain: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: FitConfig,
    pub n: usize,
    pub p: usize,
    pub covariates: Vec<String>,
    pub support: Vec<usize>,
    pub support_names: Vec<String>,
    /// Slopes in the units of the input columns.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Coefficients on the standardized design.
    pub standardized_coefficients: Vec<f64>,
    /// Mean squared residual of the refit (centered response).
    pub loss: f64,
    /// Mean squared centered response.
    pub null_loss: f64,
    pub stop_reason: StopReason,
    pub budget_exhausted: bool,
    pub trace: Vec<TraceRow>,
}

/// Maps standardized coefficients back to input units:
/// `beta_j = theta_j / scale_j`, `intercept = mean(y) - sum_j beta_j mean_j`.
pub fn to_original_units(theta: &[f64], means: &[f64], scales: &[f64], y_mean: f64) -> (Vec<f64>, f64) {
    let beta: Vec<f64> = theta.iter().zip(scales).map(|(t, s)| t / s).collect();
    let shift: f64 = beta.iter().zip(means).map(|(b, m)| b * m).sum();
    (beta, y_mean - shift)
}

fn check_threshold(t: f64) -> CliResult<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CliError::Input(format!("threshold must be positive, got {t}")))
    }
}

pub fn run_fit(input: &Path, threshold: f64, max_steps: Option<usize>) -> CliResult<FitReport> {
    check_threshold(threshold)?;
    let table = read_table(input)?;
    let (ds, std, y_mean) = centered_dataset(&table)?;
    check_max_steps(&ds, max_steps)?;
    let fit = forward_regression(&ds, threshold, max_steps)?;
    let (coefficients, intercept) =
        to_original_units(&fit.theta_hat, &std.means, &std.scales, y_mean);
    let name = |j: usize| table.covariates[j].clone();
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        config: FitConfig {
            input: input.display().to_string(),
            threshold,
            max_steps,
        },
        n: ds.n(),
        p: ds.p(),
        covariates: table.covariates.clone(),
        support_names: fit.support.iter().map(|&j| name(j)).collect(),
        support: fit.support.clone(),
        coefficients,
        intercept,
        standardized_coefficients: fit.theta_hat.clone(),
        loss: fit.loss,
        null_loss: ds.null_loss(),
        stop_reason: fit.stop_reason,
        budget_exhausted: fit.budget_exhausted,
        trace: fit
            .trace
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| TraceRow {
                step: k + 1,
                index: s.index,
                name: name(s.index),
                gain: s.gain,
                loss_after: s.loss_after,
            })
            .collect(),
    })
}

fn check_max_steps(ds: &Dataset, max_steps: Option<usize>) -> CliResult<()> {
    match max_steps {
        Some(k) if k > ds.n().min(ds.p()) => Err(CliError::Input(format!(
            "step limit {k} exceeds min(n, p) = {}",
            ds.n().min(ds.p())
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigMode {
    Exact,
    Sampled { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseEigConfig {
    pub input: String,
    pub s: usize,
    pub mode: EigMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseEigOutput {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: SparseEigConfig,
    pub n: usize,
    pub p: usize,
    pub report: SparseEigReport,
    pub witness_names: Vec<String>,
}

pub fn run_sparse_eig(input: &Path, s: usize, mode: EigMode) -> CliResult<SparseEigOutput> {
    let table: Table = read_table(input)?;
    let std = table.standardized()?;
    let n = std.x.nrows();
    let ds = Dataset::new(std.x, nalgebra::DVector::zeros(n))?;
    let g = gram(&ds);
    let report = match mode {
        EigMode::Exact => sparse_eig_exact(&g, s)?,
        EigMode::Sampled { draws, seed } => sparse_eig_sampled(&g, s, draws, seed)?,
    };
    Ok(SparseEigOutput {
        schema_version: SCHEMA_VERSION,
        command: "sparse-eig",
        config: SparseEigConfig {
            input: input.display().to_string(),
            s,
            mode,
        },
        n,
        p: ds.p(),
        witness_names: report
            .witness
            .iter()
            .map(|&j| table.covariates[j].clone())
            .collect(),
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareConfig {
    pub input: String,
    pub threshold: f64,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetLoss {
    pub support: Vec<usize>,
    pub support_names: Vec<String>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: CompareConfig,
    pub size: usize,
    pub forward: SubsetLoss,
    pub best_subset: SubsetLoss,
    /// Forward loss minus exhaustive loss; never negative.
    pub gap: f64,
    pub identical_support: bool,
}

/// Forward regression (at most `k` steps when given) against exhaustive best
/// subset of the same size.
pub fn run_compare(input: &Path, threshold: f64, k: Option<usize>) -> CliResult<CompareReport> {
    check_threshold(threshold)?;
    let table = read_table(input)?;
    let (ds, _, _) = centered_dataset(&table)?;
    check_max_steps(&ds, k)?;
    let fit = forward_regression(&ds, threshold, k)?;
    let size = fit.s_hat();
    let (best, best_loss) = best_subset(&ds, size)?;
    let names = |s: &[usize]| s.iter().map(|&j| table.covariates[j].clone()).collect();
    Ok(CompareReport {
        schema_version: SCHEMA_VERSION,
        command: "compare",
        config: CompareConfig {
            input: input.display().to_string(),
            threshold,
            k,
        },
        size,
        identical_support: best == fit.support,
        gap: fit.loss - best_loss,
        forward: SubsetLoss {
            support_names: names(&fit.support),
            support: fit.support,
            loss: fit.loss,
        },
        best_subset: SubsetLoss {
            support_names: names(&best),
            support: best,
            loss: best_loss,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub schema_version: &'static str,
    pub config: SimConfig,
    pub support: Vec<usize>,
    pub theta0: Vec<f64>,
    pub epsilon: Vec<f64>,
}

/// Writes a simulated dataset as CSV (`x0..x{p-1}`, `y`) and returns its
/// ground truth.
pub fn run_simulate(cfg: &SimConfig, out: &Path) -> CliResult<Truth> {
    let ds = simulate_dataset(cfg)?;
    let names: Vec<String> = (0..ds.p()).map(|j| format!("x{j}")).collect();
    write_table(out, &names, &ds.x, &ds.y)?;
    let gt = ds.ground_truth.expect("simulated data carries ground truth");
    Ok(Truth {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        support: gt.support(),
        theta0: gt.theta0.iter().copied().collect(),
        epsilon: gt.epsilon.iter().copied().collect(),
    })
}
