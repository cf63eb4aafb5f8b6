//! Thresholded forward regression.
//!
//! Starting from the empty model, every unselected covariate is scored by the
//! reduction in squared loss it would bring, `-Δ_j l(S) = l(S) - l(S ∪ {j})`.
//! The best covariate enters while its gain is strictly above the threshold
//! `t`; once nothing clears `t` the loop stops and the coefficients are refit
//! by least squares on the selected support.

use nalgebra::{DVector, DVectorView};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    inner, least_squares_on_support, mean_sq, ortho_extend, Dataset, OrthoState, COLLINEAR_TOL,
};

/// Score given to covariates that are already selected or collinear with the
/// support.
pub const EXCLUDED: f64 = f64::NEG_INFINITY;

/// Below this fraction of the column norm the downdated denominator is
/// recomputed by explicit residualization.
const DOWNDATE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionStep {
    pub index: usize,
    /// `-Δ_j l(S)` at the time of selection.
    pub gain: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub threshold: f64,
    pub initial_loss: f64,
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    /// Selected indices in order of entry.
    pub fn chosen(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.index).collect()
    }

    /// Rebuilds the Gram-Schmidt state at the end of the trace.
    pub fn replay(&self, ds: &Dataset) -> Result<OrthoState> {
        self.steps
            .iter()
            .try_fold(OrthoState::new(ds), |st, step| ortho_extend(&st, step.index, ds))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No remaining covariate has a gain strictly above the threshold.
    Threshold,
    /// Every covariate was selected.
    AllSelected,
    /// Every remaining covariate is collinear with the support.
    RankLimit,
    /// The step budget ran out while a candidate still cleared the threshold.
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub trace: SelectionTrace,
    /// Least-squares refit on `support`; zero elsewhere.
    pub theta_hat: Vec<f64>,
    /// Selected indices, ascending.
    pub support: Vec<usize>,
    /// `l(theta_hat)`.
    pub loss: f64,
    pub stop_reason: StopReason,
    pub budget_exhausted: bool,
    pub pred_error_norm: Option<f64>,
    pub l2_error: Option<f64>,
    pub l1_error: Option<f64>,
}

impl FitResult {
    pub fn s_hat(&self) -> usize {
        self.support.len()
    }
}

/// Gains for every covariate against `state`, with [`EXCLUDED`] for selected
/// or collinear columns.
///
/// Each candidate is residualized against the basis explicitly, so this is the
/// reference scoring path; the selection loop uses a cheaper downdate.
pub fn score_all(state: &OrthoState, ds: &Dataset) -> Vec<f64> {
    (0..ds.p())
        .into_par_iter()
        .map(|j| {
            if state.contains(j) {
                EXCLUDED
            } else {
                state.gain(ds.column(j)).unwrap_or(EXCLUDED)
            }
        })
        .collect()
}

/// Running squared projections of each column onto the basis, so a score
/// costs one inner product with the residual: the residual is orthogonal to
/// the basis, hence `<x~_j, r> = <x_j, r>` and
/// `<x~_j, x~_j> = <x_j, x_j> - sum_k <q_k, x_j>^2`.
struct ScoreCache {
    col_norm2: Vec<f64>,
    proj_sq: Vec<f64>,
}

impl ScoreCache {
    fn new(ds: &Dataset) -> Self {
        Self {
            col_norm2: (0..ds.p()).map(|j| mean_sq(ds.column(j))).collect(),
            proj_sq: vec![0.0; ds.p()],
        }
    }

    fn scores(&self, state: &OrthoState, ds: &Dataset, excluded: &[bool]) -> Vec<f64> {
        let r = state.residual().as_view();
        (0..ds.p())
            .into_par_iter()
            .map(|j| {
                if excluded[j] {
                    return EXCLUDED;
                }
                let col = ds.column(j);
                let denom = self.col_norm2[j] - self.proj_sq[j];
                if denom < DOWNDATE_GUARD * self.col_norm2[j] {
                    return state.gain(col).unwrap_or(EXCLUDED);
                }
                if denom <= COLLINEAR_TOL {
                    return EXCLUDED;
                }
                let c = inner(col, r);
                c * c / denom
            })
            .collect()
    }

    fn absorb(&mut self, q: DVectorView<'_, f64>, ds: &Dataset) {
        let upd: Vec<f64> = (0..ds.p())
            .into_par_iter()
            .map(|j| {
                let c = inner(q, ds.column(j));
                c * c
            })
            .collect();
        for (acc, u) in self.proj_sq.iter_mut().zip(upd) {
            *acc += u;
        }
    }
}

/// Index of the largest score strictly above `t`; ties go to the lowest index.
fn best_above(scores: &[f64], t: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &s) in scores.iter().enumerate() {
        if s > t && best.map_or(true, |b| s > scores[b]) {
            best = Some(j);
        }
    }
    best
}

/// Runs forward regression with threshold `t`.
///
/// `max_steps` defaults to `min(n, p)`. The dataset must be standardized.
pub fn forward_regression(ds: &Dataset, t: f64, max_steps: Option<usize>) -> Result<FitResult> {
    ds.check_standardized()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "threshold must be positive and finite, got {t}"
        )));
    }
    let (n, p) = (ds.n(), ds.p());
    let cap = n.min(p);
    let max_steps = max_steps.unwrap_or(cap);
    if max_steps > cap {
        return Err(Error::InvalidConfig(format!(
            "max_steps {max_steps} exceeds min(n, p) = {cap}"
        )));
    }

    let mut state = OrthoState::new(ds);
    let mut cache = ScoreCache::new(ds);
    let mut excluded = vec![false; p];
    let mut steps = Vec::new();

    let stop_reason = loop {
        let scores = cache.scores(&state, ds, &excluded);
        let Some(j) = best_above(&scores, t) else {
            break if state.support().len() == p {
                StopReason::AllSelected
            } else if scores.iter().all(|&s| s == EXCLUDED) {
                StopReason::RankLimit
            } else {
                StopReason::Threshold
            };
        };
        if steps.len() == max_steps {
            break StopReason::MaxSteps;
        }
        let next = match ortho_extend(&state, j, ds) {
            Ok(next) => next,
            // The downdated score said otherwise; trust the explicit check.
            Err(Error::CollinearCandidate(_)) => {
                excluded[j] = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        steps.push(SelectionStep {
            index: j,
            gain: scores[j],
            loss_after: next.residual_loss(),
        });
        excluded[j] = true;
        cache.absorb(next.basis().column(next.support().len() - 1), ds);
        state = next;
    };

    let mut support: Vec<usize> = state.support().to_vec();
    support.sort_unstable();
    let refit = least_squares_on_support(ds, &support)?;
    let theta_hat: Vec<f64> = refit.theta.iter().copied().collect();

    let (pred_error_norm, l2_error, l1_error) = match &ds.ground_truth {
        Some(gt) => {
            let e = parameter_errors(ds, &theta_hat, gt.theta0.as_slice())?;
            (Some(e.pred_norm), Some(e.l2), Some(e.l1))
        }
        None => (None, None, None),
    };

    Ok(FitResult {
        trace: SelectionTrace {
            threshold: t,
            initial_loss: ds.null_loss(),
            steps,
        },
        theta_hat,
        support,
        loss: refit.loss,
        stop_reason,
        budget_exhausted: matches!(stop_reason, StopReason::MaxSteps | StopReason::RankLimit),
        pred_error_norm,
        l2_error,
        l1_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterErrors {
    pub l2: f64,
    pub l1: f64,
    /// `E_n[(x_i'(theta0 - theta_hat))^2]^{1/2}`.
    pub pred_norm: f64,
}

pub fn parameter_errors(ds: &Dataset, theta_hat: &[f64], theta0: &[f64]) -> Result<ParameterErrors> {
    if theta_hat.len() != ds.p() || theta0.len() != ds.p() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vectors must have length p = {}",
            ds.p()
        )));
    }
    let delta = DVector::from_iterator(ds.p(), theta0.iter().zip(theta_hat).map(|(a, b)| a - b));
    let fitted_gap = &ds.x * &delta;
    Ok(ParameterErrors {
        l2: delta.norm(),
        l1: delta.lp_norm(1),
        pred_norm: mean_sq(fitted_gap.as_view()).sqrt(),
    })
}
