//! Minimum sparse eigenvalues and finite-sample bound checks for forward
//! regression.
//!
//! `phi_min(s)` is the smallest eigenvalue over all principal submatrices of
//! the Gram matrix indexed by at most `s` covariates. It enters two
//! constants:
//!
//! * `C1 = sqrt(s_hat + s0) / phi_min(s_hat + s0) * (2 ||E_n[eps_i x_i]||_inf + sqrt(t))`
//!   bounds the prediction error norm;
//! * `C2(m) = 1 + 72 * K^2 / phi_min(m + s0)^5`, with `K` the Grothendieck
//!   constant bound, bounds the number `m` of false selections whenever the
//!   threshold dominates the noise.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inner, Dataset, GramMatrix};
use crate::select::{parameter_errors, FitResult};
use crate::subsets::{binomial, for_each_with_first, subsets_up_to};

/// Upper bound on the real Grothendieck constant.
pub const GROTHENDIECK_BOUND: f64 = 1.783;

/// Largest number of subsets exact enumeration may visit.
pub const EXACT_SUBSET_CAP: u128 = 10_000_000;

/// Relative slack for the deterministic parameter-error inequalities.
pub const CHAIN_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigMethod {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseEigReport {
    pub s: usize,
    pub value: f64,
    pub method: EigMethod,
    pub witness: Vec<usize>,
    pub subsets_examined: u64,
    /// True when `value` only bounds the true minimum from above.
    pub upper_bound_only: bool,
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &nalgebra::DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => f64::INFINITY,
        1 => m[(0, 0)],
        _ => m.symmetric_eigenvalues().min(),
    }
}

/// Running minimum with ties going to the lexicographically smallest subset.
#[derive(Debug, Clone)]
struct Best {
    value: f64,
    witness: Vec<usize>,
    examined: u64,
}

impl Best {
    fn empty() -> Self {
        Self {
            value: f64::INFINITY,
            witness: Vec::new(),
            examined: 0,
        }
    }

    fn offer(&mut self, value: f64, idx: &[usize]) {
        self.examined += 1;
        if value < self.value || (value == self.value && idx < self.witness.as_slice()) {
            self.value = value;
            self.witness = idx.to_vec();
        }
    }

    fn merge(mut self, other: Best) -> Best {
        let examined = self.examined + other.examined;
        if other.value < self.value
            || (other.value == self.value && other.witness < self.witness)
        {
            self = other;
        }
        self.examined = examined;
        self
    }
}

fn scan_size(g: &GramMatrix, k: usize) -> Best {
    let p = g.p();
    (0..p)
        .into_par_iter()
        .map(|first| {
            let mut best = Best::empty();
            for_each_with_first(first, p, k, |idx| {
                best.offer(min_eigenvalue(&g.principal(idx)), idx);
            });
            best
        })
        .reduce(Best::empty, Best::merge)
}

/// Exact `phi_min(s)` by enumeration.
///
/// For `s < p` only subsets of size exactly `s` are scanned: deleting a row
/// and column of a symmetric matrix cannot lower its smallest eigenvalue, so
/// smaller subsets never win. For `s >= p` every subset is scanned.
pub fn sparse_eig_exact(g: &GramMatrix, s: usize) -> Result<SparseEigReport> {
    let p = g.p();
    if s == 0 {
        return Err(Error::InvalidConfig("sparse eigenvalue size must be >= 1".into()));
    }
    let required = subsets_up_to(p, s);
    if required > EXACT_SUBSET_CAP {
        return Err(Error::BudgetExceeded {
            required,
            cap: EXACT_SUBSET_CAP,
        });
    }
    let best = if s < p {
        scan_size(g, s)
    } else {
        (1..=p).map(|k| scan_size(g, k)).fold(Best::empty(), Best::merge)
    };
    Ok(SparseEigReport {
        s,
        value: best.value,
        method: EigMethod::Exact,
        witness: best.witness,
        subsets_examined: best.examined,
        upper_bound_only: false,
    })
}

/// Sampled surrogate for `phi_min(s)` when enumeration is too expensive.
///
/// Scans `draws` uniformly random subsets of size `min(s, p)` together with,
/// for every covariate, the group formed by it and its most correlated
/// partners. The result is a minimum over a subfamily and so an upper bound
/// on the exact value. If `draws` covers every subset the scan is exhaustive
/// and the report is exact.
pub fn sparse_eig_sampled(
    g: &GramMatrix,
    s: usize,
    draws: usize,
    seed: u64,
) -> Result<SparseEigReport> {
    let p = g.p();
    if s == 0 || draws == 0 {
        return Err(Error::InvalidConfig(
            "sampled sparse eigenvalue needs s >= 1 and draws >= 1".into(),
        ));
    }
    let k = s.min(p);
    if binomial(p, k) <= draws as u128 {
        let best = scan_size(g, k);
        return Ok(SparseEigReport {
            s,
            value: best.value,
            method: EigMethod::Exact,
            witness: best.witness,
            subsets_examined: best.examined,
            upper_bound_only: false,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut family: Vec<Vec<usize>> = Vec::with_capacity(draws + p);
    for _ in 0..draws {
        let mut idx = sample(&mut rng, p, k).into_vec();
        idx.sort_unstable();
        family.push(idx);
    }
    let mut groups: Vec<Vec<usize>> = (0..p).map(|j| correlated_group(g, j, k)).collect();
    groups.sort();
    groups.dedup();
    family.extend(groups);

    let best = family
        .par_iter()
        .map(|idx| {
            let mut b = Best::empty();
            b.offer(min_eigenvalue(&g.principal(idx)), idx);
            b
        })
        .reduce(Best::empty, Best::merge);
    Ok(SparseEigReport {
        s,
        value: best.value,
        method: EigMethod::Sampled,
        witness: best.witness,
        subsets_examined: best.examined,
        upper_bound_only: true,
    })
}

/// `j` together with the `k - 1` covariates most correlated with it.
fn correlated_group(g: &GramMatrix, j: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..g.p()).filter(|&i| i != j).collect();
    others.sort_by(|&a, &b| {
        g.g[(j, b)]
            .abs()
            .total_cmp(&g.g[(j, a)].abs())
            .then(a.cmp(&b))
    });
    let mut idx: Vec<usize> = std::iter::once(j).chain(others.into_iter().take(k - 1)).collect();
    idx.sort_unstable();
    idx
}

/// How `check_selection_bounds` obtains sparse eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigSource {
    Exact,
    Sampled { draws: usize, seed: u64 },
}

impl EigSource {
    pub fn report(&self, g: &GramMatrix, s: usize) -> Result<SparseEigReport> {
        match *self {
            EigSource::Exact => sparse_eig_exact(g, s),
            EigSource::Sampled { draws, seed } => sparse_eig_sampled(g, s, draws, seed),
        }
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveEigenvalue(phi))
    }
}

/// `sqrt(s_hat + s0) / phi * (2 noise_sup + sqrt(t))`.
pub fn constant_c1(s_hat: usize, s0: usize, phi: f64, noise_sup: f64, t: f64) -> Result<f64> {
    check_phi(phi)?;
    if !(t > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {t}")));
    }
    Ok(((s_hat + s0) as f64).sqrt() / phi * (2.0 * noise_sup + t.sqrt()))
}

/// `1 + 72 * 1.783^2 / phi^5`, where `phi = phi_min(m + s0)`.
pub fn constant_c2(phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok(1.0 + 72.0 * GROTHENDIECK_BOUND * GROTHENDIECK_BOUND * phi.powi(-5))
}

/// `sqrt(t) >= 2 noise_sup / phi` (non-strict).
pub fn threshold_condition(t: f64, phi: f64, noise_sup: f64) -> bool {
    t.sqrt() >= 2.0 * noise_sup / phi
}

/// `||E_n[eps_i x_i]||_inf`.
pub fn noise_sup(ds: &Dataset) -> Result<f64> {
    let gt = ds.ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
    Ok(ds
        .x
        .column_iter()
        .map(|c| inner(c, gt.epsilon.as_view()).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C2Entry {
    pub m: usize,
    pub phi: f64,
    pub c2: f64,
    /// `m <= C2(m) * s0`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub s_hat: usize,
    pub s0: usize,
    pub false_selections: usize,
    pub t: f64,
    pub noise_sup: f64,
    /// `phi_min(s_hat + s0)`.
    pub phi_hat: f64,
    pub c1: f64,
    pub pred_error_norm: f64,
    pub pred_bound_holds: bool,
    /// One entry per `m` in `0..=false_selections` meeting the threshold
    /// condition at `phi_min(m + s0)`.
    pub c2_of_m: Vec<C2Entry>,
    /// The threshold condition holds for every `m` in `0..=false_selections`.
    pub threshold_ok: bool,
    /// Some `m` met the threshold condition, so a selection-count claim applies.
    pub selection_claim_applies: bool,
    pub eig_method: EigMethod,
    /// Set when any eigenvalue came from sampling: a failed check is then
    /// inconclusive.
    pub caveat_flag: bool,
}

impl BoundReport {
    pub fn selection_bound_holds(&self) -> bool {
        self.c2_of_m.iter().all(|e| e.holds)
    }
}

/// Sparse eigenvalues for sizes `lo..=hi`, keyed by size. Sizes above `p` are
/// clamped (the family of subsets stops growing) and size 0 maps to 1.0,
/// which only ever multiplies a zero.
struct PhiTable {
    lo: usize,
    reports: Vec<Option<SparseEigReport>>,
}

impl PhiTable {
    fn build(g: &GramMatrix, source: &EigSource, lo: usize, hi: usize) -> Result<Self> {
        let p = g.p();
        let mut reports = Vec::with_capacity(hi + 1 - lo);
        for s in lo..=hi {
            let s = s.min(p);
            reports.push(if s == 0 {
                None
            } else {
                Some(source.report(g, s)?)
            });
        }
        Ok(Self { lo, reports })
    }

    fn phi(&self, s: usize) -> f64 {
        self.reports[s - self.lo].as_ref().map_or(1.0, |r| r.value)
    }

    fn any_sampled(&self) -> bool {
        self.reports
            .iter()
            .flatten()
            .any(|r| r.method == EigMethod::Sampled)
    }
}

/// Checks the prediction-error bound `E_n[(x_i'(theta0 - theta_hat))^2]^{1/2} <= C1`
/// and the selection-count bound `m <= C2(m) s0` on a fitted instance.
pub fn check_selection_bounds(
    fr: &FitResult,
    ds: &Dataset,
    g: &GramMatrix,
    source: &EigSource,
) -> Result<BoundReport> {
    let gt = ds.ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
    let t = fr.trace.threshold;
    let true_support = gt.support();
    let s0 = true_support.len();
    let s_hat = fr.s_hat();
    let false_selections = fr
        .support
        .iter()
        .filter(|j| !true_support.contains(j))
        .count();
    let noise_sup = noise_sup(ds)?;
    let pred = parameter_errors(ds, &fr.theta_hat, gt.theta0.as_slice())?.pred_norm;

    // Sizes needed: m + s0 for m in 0..=false_selections, and s_hat + s0.
    let table = PhiTable::build(g, source, s0, s_hat + s0)?;
    let phi_hat = table.phi(s_hat + s0);

    let c1 = if phi_hat > 0.0 {
        constant_c1(s_hat, s0, phi_hat, noise_sup, t)?
    } else {
        f64::INFINITY
    };
    let pred_bound_holds = pred <= c1;

    let mut c2_of_m = Vec::new();
    let mut threshold_ok = true;
    for m in 0..=false_selections {
        let phi = table.phi(m + s0);
        if phi > 0.0 && threshold_condition(t, phi, noise_sup) {
            let c2 = constant_c2(phi)?;
            c2_of_m.push(C2Entry {
                m,
                phi,
                c2,
                holds: m as f64 <= c2 * s0 as f64,
            });
        } else {
            threshold_ok = false;
        }
    }
    let caveat_flag = table.any_sampled();

    Ok(BoundReport {
        s_hat,
        s0,
        false_selections,
        t,
        noise_sup,
        phi_hat,
        c1,
        pred_error_norm: pred,
        pred_bound_holds,
        selection_claim_applies: !c2_of_m.is_empty(),
        c2_of_m,
        threshold_ok,
        eig_method: if caveat_flag {
            EigMethod::Sampled
        } else {
            EigMethod::Exact
        },
        caveat_flag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterBoundCheck {
    pub l1: f64,
    pub l2: f64,
    pub pred_error_norm: f64,
    pub phi: f64,
    /// `sqrt(s_hat + s0)`.
    pub root_size: f64,
    /// `l1 <= sqrt(s_hat + s0) l2`.
    pub l1_ok: bool,
    /// `sqrt(s_hat + s0) l2 <= sqrt(s_hat + s0) pred / phi`.
    pub l2_ok: bool,
}

/// Checks `||d||_1 <= sqrt(s_hat + s0) ||d||_2 <= sqrt(s_hat + s0) / phi *
/// E_n[(x_i'd)^2]^{1/2}` for `d = theta0 - theta_hat`, where `eig` must hold
/// `phi_min(s_hat + s0)`.
pub fn check_parameter_bounds(fr: &FitResult, ds: &Dataset, eig: &SparseEigReport) -> Result<ParameterBoundCheck> {
    let gt = ds.ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
    let s0 = gt.support().len();
    let size = fr.s_hat() + s0;
    if eig.s.min(ds.p()) < size.min(ds.p()) {
        return Err(Error::InvalidConfig(format!(
            "eigenvalue report is for size {}, need {size}",
            eig.s
        )));
    }
    let errs = parameter_errors(ds, &fr.theta_hat, gt.theta0.as_slice())?;
    let root = (size as f64).sqrt();
    let middle = root * errs.l2;
    let l1_ok = errs.l1 <= middle * (1.0 + CHAIN_RTOL);
    let l2_ok = if eig.value > 0.0 {
        middle <= root * errs.pred_norm / eig.value * (1.0 + CHAIN_RTOL)
    } else {
        true
    };
    Ok(ParameterBoundCheck {
        l1: errs.l1,
        l2: errs.l2,
        pred_error_norm: errs.pred_norm,
        phi: eig.value,
        root_size: root,
        l1_ok,
        l2_ok,
    })
}
