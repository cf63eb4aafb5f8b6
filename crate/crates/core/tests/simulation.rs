//! Statistical behaviour of the simulator and the oracle threshold.

use fwdreg_core::bounds::noise_sup;
use fwdreg_core::{gram, oracle_threshold, simulate_dataset, Design, SimConfig, ThetaPattern};
use nalgebra::DMatrix;

fn cfg(n: usize, p: usize, design: Design, seed: u64) -> SimConfig {
    SimConfig {
        n,
        p,
        s0: 2,
        design,
        theta_pattern: ThetaPattern::Constant { c: 1.0 },
        noise_sd: 1.0,
        seed,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[test]
fn zero_correlation_gram_concentrates() {
    let n = 10_000;
    let ds = simulate_dataset(&cfg(n, 10, Design::Equicorrelated { rho: 0.0 }, 5)).unwrap();
    let g = gram(&ds);
    let mut max_off: f64 = 0.0;
    for a in 0..10 {
        for b in 0..10 {
            if a != b {
                max_off = max_off.max(g.g[(a, b)].abs());
            }
        }
    }
    assert!(max_off < 6.0 / (n as f64).sqrt(), "max off-diagonal {max_off}");
}

#[test]
fn toeplitz_gram_converges_at_root_n() {
    let p = 8;
    let rho: f64 = 0.6;
    let pop = DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()));
    let dist = |n: usize| {
        median(
            (0..25)
                .map(|seed| {
                    let ds = simulate_dataset(&cfg(n, p, Design::Toeplitz { rho }, seed)).unwrap();
                    (gram(&ds).g - &pop).norm()
                })
                .collect(),
        )
    };
    let ratio = dist(1000) / dist(4000);
    assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "ratio {ratio}");
}

#[test]
fn oracle_threshold_scales_like_log_p_over_n() {
    let (n, p) = (400, 200);
    let (phi, safety) = (1.0, 1.0);
    let ts: Vec<f64> = (0..100)
        .map(|seed| {
            let ds = simulate_dataset(&cfg(n, p, Design::Independent, 300 + seed)).unwrap();
            let tc = oracle_threshold(&ds, phi, safety).unwrap();
            // Independent recomputation of the formula from the raw sup-norm.
            let direct = (2.0 * safety * noise_sup(&ds).unwrap() / phi).powi(2);
            assert!((tc.t - direct).abs() <= 1e-15 * direct);
            tc.t
        })
        .collect();
    let reference = 2.0 * ((2 * p) as f64).ln() / n as f64 / (phi * phi) * safety * safety;
    let ratio = median(ts) / reference;
    assert!(ratio > 0.25 && ratio < 4.0, "ratio {ratio}");
}
