//! Dense kernels shared by the selection loop and the bound diagnostics.
//!
//! Vectors in `R^n` are compared with the averaged inner product
//! `<u, v> = (1/n) u'v`. Under that convention a standardized column has unit
//! norm, the Gram matrix is `(1/n) X'X` and the squared-error loss of a
//! residual `r` is simply `<r, r>`.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// Residualized candidates whose squared norm falls below this are treated
/// as lying in the span of the current support.
pub const COLLINEAR_TOL: f64 = 1e-10;

/// A second Gram-Schmidt pass runs when projection shrinks a vector's norm
/// below this fraction of its original norm.
const REORTH_RATIO: f64 = 0.7;

/// Tolerance used when checking that a design is standardized.
pub const STANDARDIZED_TOL: f64 = 1e-9;

/// `(1/n) u'v`.
#[inline]
pub fn inner(u: DVectorView<'_, f64>, v: DVectorView<'_, f64>) -> f64 {
    u.dot(&v) / u.len() as f64
}

/// `(1/n) sum u_i^2`.
#[inline]
pub fn mean_sq(u: DVectorView<'_, f64>) -> f64 {
    u.norm_squared() / u.len() as f64
}

/// True coefficients and disturbances of a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta0: DVector<f64>,
    pub epsilon: DVector<f64>,
}

impl GroundTruth {
    /// Indices of the nonzero entries of `theta0`, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.theta0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Design matrix (`n` observations by `p` covariates), response and optional
/// ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub ground_truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "design must be at least 1x1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "response has length {}, design has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        Ok(Self {
            x,
            y,
            ground_truth: None,
        })
    }

    /// Builds `y = x theta0 + epsilon` and keeps the ground truth alongside.
    pub fn with_ground_truth(
        x: DMatrix<f64>,
        theta0: DVector<f64>,
        epsilon: DVector<f64>,
    ) -> Result<Self> {
        if theta0.len() != x.ncols() || epsilon.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "theta0 length {} / epsilon length {} do not fit a {}x{} design",
                theta0.len(),
                epsilon.len(),
                x.nrows(),
                x.ncols()
            )));
        }
        let y = &x * &theta0 + &epsilon;
        let mut ds = Self::new(x, y)?;
        ds.ground_truth = Some(GroundTruth { theta0, epsilon });
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.x.column(j)
    }

    /// `E_n[y_i^2]`, the loss of the empty model.
    pub fn null_loss(&self) -> f64 {
        mean_sq(self.y.as_view())
    }

    /// Checks every column has mean zero and unit second moment.
    pub fn check_standardized(&self) -> Result<()> {
        for (j, col) in self.x.column_iter().enumerate() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let second_moment = col.norm_squared() / n;
            if mean.abs() > STANDARDIZED_TOL || (second_moment - 1.0).abs() > STANDARDIZED_TOL {
                return Err(Error::NotStandardized {
                    column: j,
                    mean,
                    second_moment,
                });
            }
        }
        Ok(())
    }
}

/// A standardized design together with the affine map that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub x: DMatrix<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Centers each column and divides by the root of its averaged squared
/// deviation, so that `E_n[x_ij] = 0` and `E_n[x_ij^2] = 1`.
pub fn standardize(raw: &DMatrix<f64>) -> Result<Standardized> {
    let (n, p) = raw.shape();
    if n < 2 || p == 0 {
        return Err(Error::DimensionMismatch(format!(
            "standardization needs n >= 2 and p >= 1, got {n}x{p}"
        )));
    }
    let mut x = raw.clone();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let max_abs = col.amax();
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let scale = (col.norm_squared() / n as f64).sqrt();
        if !(scale > 1e-12 * max_abs) || !scale.is_finite() {
            return Err(Error::ZeroVarianceColumn(j));
        }
        col.unscale_mut(scale);
        means.push(mean);
        scales.push(scale);
    }
    Ok(Standardized { x, means, scales })
}

/// Empirical Gram matrix `(1/n) X'X`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub g: DMatrix<f64>,
}

impl GramMatrix {
    pub fn p(&self) -> usize {
        self.g.nrows()
    }

    /// Principal submatrix on `idx`.
    pub fn principal(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.g[(idx[a], idx[b])])
    }
}

pub fn gram(ds: &Dataset) -> GramMatrix {
    let n = ds.n() as f64;
    let mut g = ds.x.tr_mul(&ds.x) / n;
    // tr_mul is symmetric up to summation order; make it exact.
    let p = g.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramMatrix { g }
}

/// Coefficients and loss of the least-squares fit restricted to a support.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportFit {
    /// Length `p`, zero off the support.
    pub theta: DVector<f64>,
    /// `E_n[(y_i - x_i'theta)^2]`.
    pub loss: f64,
}

/// Least squares over vectors supported on `support`, via Gram-Schmidt.
pub fn least_squares_on_support(ds: &Dataset, support: &[usize]) -> Result<SupportFit> {
    let p = ds.p();
    let mut theta = DVector::zeros(p);
    if support.is_empty() {
        return Ok(SupportFit {
            theta,
            loss: ds.null_loss(),
        });
    }
    check_indices(support, p)?;
    if support.len() > ds.n() {
        return Err(Error::RankDeficientSupport);
    }

    let (q, r) = thin_qr(ds, support)?;
    let sv = r.singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficientSupport);
    }

    let qty = q.tr_mul(&ds.y) / ds.n() as f64;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficientSupport)?;
    for (k, &j) in support.iter().enumerate() {
        theta[j] = coef[k];
    }
    let resid = &ds.y - &ds.x * &theta;
    Ok(SupportFit {
        theta,
        loss: mean_sq(resid.as_view()),
    })
}

fn check_indices(support: &[usize], p: usize) -> Result<()> {
    for (k, &j) in support.iter().enumerate() {
        if j >= p {
            return Err(Error::DimensionMismatch(format!(
                "column index {j} out of range for p = {p}"
            )));
        }
        if support[..k].contains(&j) {
            return Err(Error::RankDeficientSupport);
        }
    }
    Ok(())
}

/// Thin QR of `X_S` with `Q` orthonormal under the averaged inner product,
/// so `X_S = Q R`.
fn thin_qr(ds: &Dataset, support: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = ds.n();
    let k = support.len();
    let mut q = DMatrix::zeros(n, k);
    let mut r = DMatrix::zeros(k, k);
    for (c, &j) in support.iter().enumerate() {
        let col = ds.column(j);
        let mut w = col.clone_owned();
        let norm0 = mean_sq(col);
        for pass in 0..2 {
            let before = mean_sq(w.as_view());
            for b in 0..c {
                let qb = q.column(b);
                let coef = inner(qb, w.as_view());
                w.axpy(-coef, &qb, 1.0);
                r[(b, c)] += coef;
            }
            let after = mean_sq(w.as_view());
            if pass == 0 && after >= REORTH_RATIO * REORTH_RATIO * before {
                break;
            }
        }
        let nrm2 = mean_sq(w.as_view());
        if !(nrm2 > 1e-26 * norm0) {
            return Err(Error::RankDeficientSupport);
        }
        let nrm = nrm2.sqrt();
        r[(c, c)] = nrm;
        q.set_column(c, &(w / nrm));
    }
    Ok((q, r))
}

/// Incremental Gram-Schmidt state for a working support.
///
/// `basis` holds the orthonormalized selected columns; `residual` is `y`
/// minus its projection onto their span and `residual_loss = E_n[r_i^2]`
/// equals `l(support)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoState {
    support: Vec<usize>,
    basis: DMatrix<f64>,
    residual: DVector<f64>,
    residual_loss: f64,
}

impl OrthoState {
    /// Empty support: the residual is `y` itself.
    pub fn new(ds: &Dataset) -> Self {
        Self {
            support: Vec::new(),
            basis: DMatrix::zeros(ds.n(), 0),
            residual: ds.y.clone(),
            residual_loss: ds.null_loss(),
        }
    }

    /// Selected columns in the order they entered.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    pub fn residual_loss(&self) -> f64 {
        self.residual_loss
    }

    pub fn contains(&self, j: usize) -> bool {
        self.support.contains(&j)
    }

    /// Projects `v` off the span of the basis (modified Gram-Schmidt with at
    /// most one reorthogonalization pass).
    pub fn residualize(&self, v: DVectorView<'_, f64>) -> DVector<f64> {
        let mut w = v.clone_owned();
        for pass in 0..2 {
            let before = mean_sq(w.as_view());
            for qb in self.basis.column_iter() {
                let coef = inner(qb, w.as_view());
                w.axpy(-coef, &qb, 1.0);
            }
            if pass == 0 && mean_sq(w.as_view()) >= REORTH_RATIO * REORTH_RATIO * before {
                break;
            }
        }
        w
    }

    /// The gain `-Δ_j l(S) = <x~_j, r>^2 / <x~_j, x~_j>` for a column not in
    /// the support, or `None` when the column is (numerically) in the span.
    pub fn gain(&self, col: DVectorView<'_, f64>) -> Option<f64> {
        let w = self.residualize(col);
        let nrm2 = mean_sq(w.as_view());
        if nrm2 <= COLLINEAR_TOL {
            return None;
        }
        let c = inner(w.as_view(), self.residual.as_view());
        Some(c * c / nrm2)
    }
}

/// Extends the support by column `j`, returning a new state.
pub fn ortho_extend(state: &OrthoState, j: usize, ds: &Dataset) -> Result<OrthoState> {
    if j >= ds.p() {
        return Err(Error::DimensionMismatch(format!(
            "column index {j} out of range for p = {}",
            ds.p()
        )));
    }
    if state.residual.len() != ds.n() {
        return Err(Error::DimensionMismatch(
            "state was built for a different dataset".into(),
        ));
    }
    if state.contains(j) {
        return Err(Error::CollinearCandidate(j));
    }
    let w = state.residualize(ds.column(j));
    let nrm2 = mean_sq(w.as_view());
    if nrm2 <= COLLINEAR_TOL {
        return Err(Error::CollinearCandidate(j));
    }
    let q = w / nrm2.sqrt();
    let coef = inner(q.as_view(), state.residual.as_view());
    let mut residual = state.residual.clone();
    residual.axpy(-coef, &q, 1.0);

    let k = state.support.len();
    let mut basis = state.basis.clone().insert_column(k, 0.0);
    basis.set_column(k, &q);
    let mut support = state.support.clone();
    support.push(j);
    let residual_loss = mean_sq(residual.as_view());
    Ok(OrthoState {
        support,
        basis,
        residual,
        residual_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DMatrix::from_fn(n, p, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    fn orthonormal_design() -> DMatrix<f64> {
        // Columns of a 4x3 Hadamard block: mean zero, E_n[x^2] = 1, orthogonal.
        DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 1.0, 1.0, //
                -1.0, 1.0, -1.0, //
                1.0, -1.0, -1.0, //
                -1.0, -1.0, 1.0,
            ],
        )
    }

    #[test]
    fn standardize_two_points() {
        let raw = DMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
        let s = standardize(&raw).unwrap();
        assert_eq!(s.x.as_slice(), &[-1.0, 1.0]);
        assert_eq!(s.means, vec![2.0]);
        assert_eq!(s.scales, vec![1.0]);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 4.0, 5.0, 5.0, 5.0]);
        assert_eq!(standardize(&raw), Err(Error::ZeroVarianceColumn(1)));
        let raw = DMatrix::from_column_slice(3, 1, &[0.1, 0.1, 0.1]);
        assert_eq!(standardize(&raw), Err(Error::ZeroVarianceColumn(0)));
    }

    #[test]
    fn standardize_is_idempotent() {
        let raw = lcg_matrix(17, 5, 3) * 3.0;
        let once = standardize(&raw).unwrap().x;
        let twice = standardize(&once).unwrap().x;
        assert!((&once - &twice).amax() < 1e-12);
        let ds = Dataset::new(once, DVector::zeros(17)).unwrap();
        ds.check_standardized().unwrap();
    }

    #[test]
    fn gram_of_orthonormal_design_is_identity() {
        let ds = Dataset::new(orthonormal_design(), DVector::zeros(4)).unwrap();
        let g = gram(&ds);
        assert_eq!(g.g, DMatrix::identity(3, 3));
    }

    #[test]
    fn gram_of_duplicated_columns_is_all_ones() {
        let x = DMatrix::from_column_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0]);
        let ds = Dataset::new(x, DVector::zeros(2)).unwrap();
        assert_eq!(gram(&ds).g, DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn gram_matches_row_outer_product_sum() {
        let x = standardize(&lcg_matrix(10, 4, 11)).unwrap().x;
        let ds = Dataset::new(x.clone(), DVector::zeros(10)).unwrap();
        let g = gram(&ds);
        let mut brute = DMatrix::<f64>::zeros(4, 4);
        for i in 0..10 {
            for a in 0..4 {
                for b in 0..4 {
                    brute[(a, b)] += x[(i, a)] * x[(i, b)] / 10.0;
                }
            }
        }
        assert!((&g.g - &brute).amax() < 1e-12);
        for a in 0..4 {
            assert!((g.g[(a, a)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_support_fit() {
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.0]);
        let ds = Dataset::new(orthonormal_design(), y).unwrap();
        let fit = least_squares_on_support(&ds, &[]).unwrap();
        assert_eq!(fit.theta, DVector::zeros(3));
        assert_eq!(fit.loss, 14.0 / 4.0);
    }

    #[test]
    fn noiseless_single_covariate_fit() {
        let x = orthonormal_design();
        let y = x.column(1) * 2.0;
        let ds = Dataset::new(x, y).unwrap();
        let fit = least_squares_on_support(&ds, &[1]).unwrap();
        assert!((fit.theta[1] - 2.0).abs() < 1e-15);
        assert_eq!(fit.theta[0], 0.0);
        assert!(fit.loss < 1e-30);
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, -1.0, 0.0, 1.0, -1.0, 0.0]);
        let ds = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(
            least_squares_on_support(&ds, &[0, 1]),
            Err(Error::RankDeficientSupport)
        );
        assert_eq!(
            least_squares_on_support(&ds, &[0, 0]),
            Err(Error::RankDeficientSupport)
        );
    }

    #[test]
    fn first_extension_drops_loss_by_squared_correlation() {
        let x = orthonormal_design();
        let y = DVector::from_vec(vec![0.5, 1.5, -2.0, 0.25]);
        let ds = Dataset::new(x, y).unwrap();
        let s0 = OrthoState::new(&ds);
        for j in 0..3 {
            let c = inner(ds.column(j), ds.y.as_view());
            let s1 = ortho_extend(&s0, j, &ds).unwrap();
            assert!((s0.residual_loss() - s1.residual_loss() - c * c).abs() < 1e-14);
        }
    }

    #[test]
    fn extending_by_a_copy_is_collinear() {
        let mut x = orthonormal_design().insert_column(3, 0.0);
        let c0 = x.column(0).clone_owned();
        x.set_column(3, &c0);
        let ds = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let s = ortho_extend(&OrthoState::new(&ds), 0, &ds).unwrap();
        assert_eq!(ortho_extend(&s, 3, &ds), Err(Error::CollinearCandidate(3)));
        assert_eq!(ortho_extend(&s, 0, &ds), Err(Error::CollinearCandidate(0)));
    }

    #[test]
    fn extension_keeps_basis_orthonormal() {
        let x = standardize(&lcg_matrix(40, 10, 5)).unwrap().x;
        let y = lcg_matrix(40, 1, 6).column(0).clone_owned();
        let ds = Dataset::new(x, y).unwrap();
        let mut st = OrthoState::new(&ds);
        for j in [3, 7, 1, 9] {
            let prev = st.residual_loss();
            st = ortho_extend(&st, j, &ds).unwrap();
            assert!(st.residual_loss() <= prev);
        }
        let n = ds.n() as f64;
        let qtq = st.basis().tr_mul(st.basis()) / n;
        assert!((qtq - DMatrix::identity(4, 4)).amax() < 1e-10);
        let qtr = st.basis().tr_mul(st.residual()) / n;
        assert!(qtr.amax() < 1e-10);
        let direct = least_squares_on_support(&ds, &[3, 7, 1, 9]).unwrap();
        assert!((direct.loss - st.residual_loss()).abs() < 1e-10 * direct.loss);
    }
}
