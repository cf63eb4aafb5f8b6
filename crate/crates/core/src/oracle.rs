//! Slow reference computations.
//!
//! Everything here takes a different numerical route from the fast path:
//! least squares goes through the normal equations and a Cholesky solve
//! instead of Gram-Schmidt, and sparse eigenvalues come from a cyclic Jacobi
//! sweep over every bitmask subset instead of tridiagonalization over
//! fixed-size combinations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{mean_sq, Dataset, GramMatrix};
use crate::subsets::{binomial, for_each_with_first};

/// Largest number of subsets [`best_subset`] will enumerate.
pub const BEST_SUBSET_CAP: u128 = 1_000_000;

/// Least squares on `support` by solving `(X_S'X_S) b = X_S'y`.
pub fn normal_equation_fit(ds: &Dataset, support: &[usize]) -> Result<(DVector<f64>, f64)> {
    let p = ds.p();
    let mut theta = DVector::zeros(p);
    if support.is_empty() {
        return Ok((theta, ds.null_loss()));
    }
    if support.iter().any(|&j| j >= p) {
        return Err(Error::DimensionMismatch("support index out of range".into()));
    }
    let xs = ds.x.select_columns(support);
    let xtx = xs.tr_mul(&xs);
    let xty = xs.tr_mul(&ds.y);
    let chol = xtx.cholesky().ok_or(Error::RankDeficientSupport)?;
    let b = chol.solve(&xty);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficientSupport);
    }
    for (k, &j) in support.iter().enumerate() {
        theta[j] = b[k];
    }
    let resid = &ds.y - &xs * &b;
    Ok((theta, mean_sq(resid.as_view())))
}

/// `Δ_j l(S) = l(S ∪ {j}) - l(S)` from two independent full solves.
pub fn naive_delta_loss(ds: &Dataset, support: &[usize], j: usize) -> Result<f64> {
    if support.contains(&j) {
        return Ok(0.0);
    }
    let (_, base) = normal_equation_fit(ds, support)?;
    let mut bigger = support.to_vec();
    bigger.push(j);
    let (_, ext) = normal_equation_fit(ds, &bigger)?;
    Ok(ext - base)
}

/// `Δ_j l(S)` from Gram-matrix blocks:
/// `-(b_j - g_jS G_SS^{-1} b_S)^2 / (g_jj - g_jS G_SS^{-1} g_Sj)` with
/// `b = E_n[x_i y_i]`.
pub fn block_delta_loss(ds: &Dataset, g: &GramMatrix, support: &[usize], j: usize) -> Result<f64> {
    if support.contains(&j) {
        return Ok(0.0);
    }
    let n = ds.n() as f64;
    let b = ds.x.tr_mul(&ds.y) / n;
    let k = support.len();
    let g_ss = g.principal(support);
    let g_sj = DVector::from_fn(k, |a, _| g.g[(support[a], j)]);
    let b_s = DVector::from_fn(k, |a, _| b[support[a]]);
    let (num, den) = if k == 0 {
        (b[j], g.g[(j, j)])
    } else {
        let chol = g_ss.cholesky().ok_or(Error::RankDeficientSupport)?;
        let u = chol.solve(&g_sj);
        (b[j] - u.dot(&b_s), g.g[(j, j)] - u.dot(&g_sj))
    };
    if !(den > 0.0) {
        return Err(Error::RankDeficientSupport);
    }
    Ok(-num * num / den)
}

/// Exhaustive minimizer of `l(S)` over `|S| = k`. Ties go to the
/// lexicographically smallest subset; rank-deficient subsets are skipped.
pub fn best_subset(ds: &Dataset, k: usize) -> Result<(Vec<usize>, f64)> {
    let p = ds.p();
    if k > p {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds p = {p}")));
    }
    if k == 0 {
        return Ok((Vec::new(), ds.null_loss()));
    }
    let required = binomial(p, k);
    if required > BEST_SUBSET_CAP {
        return Err(Error::BudgetExceeded {
            required,
            cap: BEST_SUBSET_CAP,
        });
    }
    let best = (0..p)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(Vec<usize>, f64)> = None;
            for_each_with_first(first, p, k, |idx| {
                if let Ok((_, loss)) = normal_equation_fit(ds, idx) {
                    if best.as_ref().map_or(true, |(_, b)| loss < *b) {
                        best = Some((idx.to_vec(), loss));
                    }
                }
            });
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        );
    best.ok_or(Error::RankDeficientSupport)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut a = m.clone();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for pi in 0..k {
            for qi in (pi + 1)..k {
                let apq = a[(pi, qi)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(qi, qi)] - a[(pi, pi)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let arp = a[(r, pi)];
                    let arq = a[(r, qi)];
                    a[(r, pi)] = c * arp - s * arq;
                    a[(r, qi)] = s * arp + c * arq;
                }
                for r in 0..k {
                    let apr = a[(pi, r)];
                    let aqr = a[(qi, r)];
                    a[(pi, r)] = c * apr - s * aqr;
                    a[(qi, r)] = s * apr + c * aqr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..k).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `phi_min(s)` by scanning every nonempty subset with at most `s` members
/// (bitmask enumeration, Jacobi eigenvalues). Only for small `p`.
pub fn sparse_eig_bruteforce(g: &GramMatrix, s: usize) -> (f64, Vec<usize>) {
    let p = g.p();
    assert!(p < 26, "bitmask enumeration is limited to p < 26");
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 1u32..(1u32 << p) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let idx: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) != 0).collect();
        let v = jacobi_eigenvalues(&g.principal(&idx))[0];
        if v < best.0 {
            best = (v, idx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gram, inner};

    fn hadamard8() -> DMatrix<f64> {
        DMatrix::from_fn(8, 7, |i, j| {
            if ((i & (j + 1)).count_ones() % 2) == 0 {
                1.0
            } else {
                -1.0
            }
        })
    }

    #[test]
    fn first_step_closed_form() {
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5, -0.7, 1.1, 0.0, 0.9]);
        let ds = Dataset::new(hadamard8(), y).unwrap();
        let g = gram(&ds);
        for j in 0..7 {
            let c = inner(ds.column(j), ds.y.as_view());
            assert!((naive_delta_loss(&ds, &[], j).unwrap() + c * c).abs() < 1e-14);
            assert!((block_delta_loss(&ds, &g, &[], j).unwrap() + c * c).abs() < 1e-14);
        }
    }

    #[test]
    fn column_in_span_adds_nothing() {
        let mut x = hadamard8().insert_column(7, 0.0);
        let combo = x.column(0) * 0.6 + x.column(3) * 0.8;
        x.set_column(7, &combo);
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5, -0.7, 1.1, 0.0, 0.9]);
        let ds = Dataset::new(x, y).unwrap();
        let d = naive_delta_loss(&ds, &[0, 3], 7);
        // Either the solve flags the collinearity or the gain is zero.
        match d {
            Ok(v) => assert!(v.abs() < 1e-10),
            Err(e) => assert_eq!(e, Error::RankDeficientSupport),
        }
    }

    #[test]
    fn best_subset_recovers_noiseless_signal() {
        let x = hadamard8();
        let y = x.column(4) * 2.0;
        let ds = Dataset::new(x, y).unwrap();
        let (s, loss) = best_subset(&ds, 1).unwrap();
        assert_eq!(s, vec![4]);
        assert!(loss < 1e-28);
        let (s, loss) = best_subset(&ds, 0).unwrap();
        assert!(s.is_empty());
        assert_eq!(loss, ds.null_loss());
    }

    #[test]
    fn full_model_is_unrestricted_least_squares() {
        let x = hadamard8();
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5, -0.7, 1.1, 0.0, 0.9]);
        let ds = Dataset::new(x, y).unwrap();
        let (s, loss) = best_subset(&ds, 7).unwrap();
        assert_eq!(s, (0..7).collect::<Vec<_>>());
        let (_, direct) = normal_equation_fit(&ds, &s).unwrap();
        assert_eq!(loss, direct);
    }

    #[test]
    fn jacobi_matches_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let ev = jacobi_eigenvalues(&m);
        assert!((ev[0] - 0.5).abs() < 1e-15 && (ev[1] - 1.5).abs() < 1e-15);
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let ev = jacobi_eigenvalues(&m);
        let expect = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
