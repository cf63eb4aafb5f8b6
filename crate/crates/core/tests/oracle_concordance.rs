//! Fast-path quantities against their independent oracle twins.

mod common;

use common::*;
use fwdreg_core::linalg::mean_sq;
use fwdreg_core::oracle::{block_delta_loss, naive_delta_loss, normal_equation_fit};
use fwdreg_core::{gram, least_squares_on_support, ortho_extend, score_all, OrthoState};
use proptest::prelude::*;
use rand::Rng;

fn state_for(ds: &fwdreg_core::Dataset, support: &[usize]) -> OrthoState {
    support
        .iter()
        .fold(OrthoState::new(ds), |st, &j| ortho_extend(&st, j, ds).unwrap())
}

#[test]
fn least_squares_matches_normal_equations() {
    let mut r = rng(1);
    let ds = random_dataset(&mut r, 50, 8);
    let fit = least_squares_on_support(&ds, &[2, 5]).unwrap();
    let (theta, loss) = normal_equation_fit(&ds, &[2, 5]).unwrap();
    assert!((&fit.theta - &theta).amax() < 1e-10);
    assert!((fit.loss - loss).abs() < 1e-10 * loss);
    for j in [0, 1, 3, 4, 6, 7] {
        assert_eq!(fit.theta[j], 0.0);
    }
}

#[test]
fn extension_matches_full_refit() {
    let mut r = rng(2);
    let ds = random_dataset(&mut r, 40, 10);
    let st = state_for(&ds, &[4, 0, 8]);
    for j in [1, 2, 3, 5, 6, 7, 9] {
        let ext = ortho_extend(&st, j, &ds).unwrap();
        let direct = least_squares_on_support(&ds, &[4, 0, 8, j]).unwrap();
        assert!(rel_err(ext.residual_loss(), direct.loss, direct.loss) < 1e-10);
        let drop = st.residual_loss() - ext.residual_loss();
        let gain = -naive_delta_loss(&ds, &[4, 0, 8], j).unwrap();
        assert!((drop - gain).abs() < 1e-10);
    }
}

#[test]
fn scores_match_refit_differences() {
    let mut r = rng(3);
    let ds = random_dataset(&mut r, 30, 12);
    let support = [7, 1, 10];
    let st = state_for(&ds, &support);
    let scores = score_all(&st, &ds);
    let g = gram(&ds);
    for j in 0..12 {
        if support.contains(&j) {
            assert_eq!(scores[j], f64::NEG_INFINITY);
            continue;
        }
        let base = st.residual_loss();
        let naive = -naive_delta_loss(&ds, &support, j).unwrap();
        let block = -block_delta_loss(&ds, &g, &support, j).unwrap();
        assert!(rel_err(scores[j], naive, scores[j].abs().max(base)) < 1e-9, "j={j}");
        assert!(rel_err(scores[j], block, scores[j].abs()) < 1e-9, "j={j}");
    }
}

#[test]
fn empty_state_scores_are_squared_correlations() {
    let x = nalgebra::DMatrix::from_fn(8, 7, |i, j| {
        if ((i & (j + 1)).count_ones() % 2) == 0 {
            1.0
        } else {
            -1.0
        }
    });
    let y = nalgebra::DVector::from_vec(vec![1.0, 0.5, -0.2, 0.0, 3.0, -1.0, 0.7, 0.1]);
    let ds = fwdreg_core::Dataset::new(x, y).unwrap();
    let scores = score_all(&OrthoState::new(&ds), &ds);
    for (j, s) in scores.iter().enumerate() {
        let c = fwdreg_core::linalg::inner(ds.column(j), ds.y.as_view());
        assert!((s - c * c).abs() < 1e-15);
    }
}

#[test]
fn incremental_and_batch_losses_agree() {
    let mut r = rng(4);
    for _ in 0..120 {
        let n = r.random_range(10..=100);
        let p = r.random_range(2..=30);
        let k = r.random_range(1..=p.min(n - 2).min(12));
        let ds = random_dataset(&mut r, n, p);
        let support = random_support(&mut r, p, k);
        let st = state_for(&ds, &support);
        let direct = least_squares_on_support(&ds, &support).unwrap();
        assert!(
            rel_err(st.residual_loss(), direct.loss, direct.loss) < 1e-9,
            "n={n} p={p} k={k}"
        );
        // Residual orthogonal to every basis column.
        let qtr = st.basis().tr_mul(st.residual()) / n as f64;
        assert!(qtr.amax() < 1e-10 * mean_sq(ds.y.as_view()).sqrt().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_never_increases_when_a_column_joins(seed in any::<u64>(), k in 0usize..6) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, 25, 9);
        let support = random_support(&mut r, 9, k + 1);
        let (base, extra) = support.split_at(k);
        let lo = least_squares_on_support(&ds, base).unwrap().loss;
        let hi = least_squares_on_support(&ds, &support).unwrap().loss;
        prop_assert!(hi <= lo * (1.0 + 1e-12), "{} > {} adding {:?}", hi, lo, extra);
    }

    #[test]
    fn standardization_is_idempotent(seed in any::<u64>(), n in 2usize..40, p in 1usize..6) {
        let mut r = rng(seed);
        let raw = gaussian_matrix(&mut r, n, p) * 7.0;
        let once = fwdreg_core::standardize(&raw).unwrap().x;
        let twice = fwdreg_core::standardize(&once).unwrap().x;
        prop_assert!((&once - &twice).amax() < 1e-12);
        let ds = fwdreg_core::Dataset::new(once, nalgebra::DVector::zeros(n)).unwrap();
        let g = gram(&ds);
        for j in 0..p {
            prop_assert!((g.g[(j, j)] - 1.0).abs() < 1e-10);
        }
        prop_assert!((&g.g - g.g.transpose()).amax() == 0.0);
    }
}
