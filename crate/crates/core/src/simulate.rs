//! Seeded sparse linear-model datasets with known ground truth.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::noise_sup;
use crate::error::{Error, Result};
use crate::linalg::{standardize, Dataset};

/// Smallest threshold handed out by [`oracle_threshold`].
pub const THRESHOLD_FLOOR: f64 = 1e-12;

/// Population covariance of the covariate rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Independent,
    /// Unit variances, every off-diagonal entry `rho`.
    Equicorrelated { rho: f64 },
    /// Entry `(j, k)` equal to `rho^|j - k|`.
    Toeplitz { rho: f64 },
}

impl Design {
    pub fn covariance(&self, p: usize) -> DMatrix<f64> {
        match *self {
            Design::Independent => DMatrix::identity(p, p),
            Design::Equicorrelated { rho } => {
                DMatrix::from_fn(p, p, |j, k| if j == k { 1.0 } else { rho })
            }
            Design::Toeplitz { rho } => {
                DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()))
            }
        }
    }

    fn rho(&self) -> Option<f64> {
        match *self {
            Design::Independent => None,
            Design::Equicorrelated { rho } | Design::Toeplitz { rho } => Some(rho),
        }
    }
}

/// Nonzero coefficient values, assigned to the support in draw order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPattern {
    /// Every nonzero coefficient equals `c`.
    Constant { c: f64 },
    /// The `k`-th nonzero coefficient is `c / (k + 1)^rate`.
    Decaying { c: f64, rate: f64 },
    /// The `k`-th nonzero coefficient is `c (-1)^k`.
    SignedAlternating { c: f64 },
}

impl ThetaPattern {
    pub fn value(&self, k: usize) -> f64 {
        match *self {
            ThetaPattern::Constant { c } => c,
            ThetaPattern::Decaying { c, rate } => c / ((k + 1) as f64).powf(rate),
            ThetaPattern::SignedAlternating { c } => {
                if k % 2 == 0 {
                    c
                } else {
                    -c
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub s0: usize,
    pub design: Design,
    pub theta_pattern: ThetaPattern,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.p < 1 {
            return bad("p must be >= 1".into());
        }
        if self.s0 > self.p {
            return bad(format!("s0 = {} exceeds p = {}", self.s0, self.p));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd));
        }
        if let Some(rho) = self.design.rho() {
            if !(rho.abs() < 1.0) {
                return bad(format!("|rho| must be < 1, got {rho}"));
            }
        }
        Ok(())
    }

    /// Same configuration with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Same configuration with a different sample size.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Draws a dataset `y = X theta0 + eps` with standardized `X`.
///
/// Rows are Gaussian with the configured covariance; the design is then
/// standardized and `theta0`, which lives on the standardized scale, is
/// applied to it, so `y = X theta0 + eps` holds exactly as stored.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let raw = match cfg.design {
        Design::Independent => z,
        design => {
            let chol = Cholesky::new(design.covariance(p)).ok_or_else(|| {
                Error::InvalidConfig(format!("{design:?} is not positive definite for p = {p}"))
            })?;
            z * chol.l().transpose()
        }
    };
    let x = standardize(&raw)?.x;

    let mut theta0 = DVector::zeros(p);
    for (k, j) in sample(&mut rng, p, cfg.s0).into_iter().enumerate() {
        theta0[j] = cfg.theta_pattern.value(k);
    }

    let epsilon = if cfg.noise_sd == 0.0 {
        DVector::zeros(n)
    } else {
        DVector::from_fn(n, |_, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            cfg.noise_sd * e
        })
    };
    Dataset::with_ground_truth(x, theta0, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub t: f64,
    /// The formula gave a value below [`THRESHOLD_FLOOR`] and was raised to it.
    pub floored: bool,
    pub noise_sup: f64,
}

/// `t = (safety * 2 ||E_n[x_i eps_i]||_inf / phi)^2`, the smallest threshold
/// (times `safety^2`) satisfying the regularization condition at `phi`.
///
/// Uses the true disturbances, so it is only available for simulated data.
pub fn oracle_threshold(ds: &Dataset, phi: f64, safety: f64) -> Result<ThresholdChoice> {
    if !(phi > 0.0) {
        return Err(Error::NonpositiveEigenvalue(phi));
    }
    if !(safety >= 1.0) {
        return Err(Error::InvalidConfig(format!("safety must be >= 1, got {safety}")));
    }
    let sup = noise_sup(ds)?;
    let t = (safety * 2.0 * sup / phi).powi(2);
    Ok(if t < THRESHOLD_FLOOR {
        ThresholdChoice {
            t: THRESHOLD_FLOOR,
            floored: true,
            noise_sup: sup,
        }
    } else {
        ThresholdChoice {
            t,
            floored: false,
            noise_sup: sup,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::GroundTruth;

    fn base() -> SimConfig {
        SimConfig {
            n: 50,
            p: 12,
            s0: 3,
            design: Design::Toeplitz { rho: 0.5 },
            theta_pattern: ThetaPattern::SignedAlternating { c: 1.5 },
            noise_sd: 0.5,
            seed: 42,
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = simulate_dataset(&base()).unwrap();
        let b = simulate_dataset(&base()).unwrap();
        assert_eq!(a, b);
        let c = simulate_dataset(&base().with_seed(43)).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn generated_data_is_standardized_and_consistent() {
        for design in [
            Design::Independent,
            Design::Equicorrelated { rho: 0.3 },
            Design::Toeplitz { rho: -0.6 },
        ] {
            let ds = simulate_dataset(&SimConfig { design, ..base() }).unwrap();
            ds.check_standardized().unwrap();
            let gt = ds.ground_truth.as_ref().unwrap();
            let recon = &ds.x * &gt.theta0 + &gt.epsilon;
            assert!((recon - &ds.y).amax() <= 1e-12 * ds.y.amax());
            assert_eq!(gt.support().len(), 3);
            let mut vals: Vec<f64> = gt.support().iter().map(|&j| gt.theta0[j]).collect();
            vals.sort_by(f64::total_cmp);
            assert_eq!(vals, vec![-1.5, 1.5, 1.5]);
        }
    }

    #[test]
    fn noiseless_has_zero_epsilon() {
        let ds = simulate_dataset(&SimConfig {
            noise_sd: 0.0,
            ..base()
        })
        .unwrap();
        let GroundTruth { theta0, epsilon } = ds.ground_truth.clone().unwrap();
        assert!(epsilon.iter().all(|&e| e == 0.0));
        assert_eq!(ds.y, &ds.x * theta0);
    }

    #[test]
    fn config_violations_are_rejected() {
        let bad = [
            SimConfig { n: 1, ..base() },
            SimConfig { s0: 13, ..base() },
            SimConfig {
                design: Design::Toeplitz { rho: 1.0 },
                ..base()
            },
            SimConfig {
                noise_sd: -1.0,
                ..base()
            },
            SimConfig {
                design: Design::Equicorrelated { rho: -0.5 },
                ..base()
            },
        ];
        for cfg in bad {
            assert!(matches!(simulate_dataset(&cfg), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn decaying_pattern() {
        let pat = ThetaPattern::Decaying { c: 2.0, rate: 1.0 };
        assert_eq!(pat.value(0), 2.0);
        assert_eq!(pat.value(3), 0.5);
    }

    #[test]
    fn threshold_formula_and_floor() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        // E_n[x eps] = 0.1.
        let eps = DVector::from_vec(vec![0.1, -0.1, 0.1, -0.1]);
        let ds = Dataset::with_ground_truth(x.clone(), DVector::zeros(1), eps).unwrap();
        let tc = oracle_threshold(&ds, 1.0, 1.0).unwrap();
        assert!((tc.t - 0.04).abs() < 1e-15);
        assert!(!tc.floored);

        let ds = Dataset::with_ground_truth(x, DVector::zeros(1), DVector::zeros(4)).unwrap();
        let tc = oracle_threshold(&ds, 1.0, 1.0).unwrap();
        assert_eq!(tc.t, THRESHOLD_FLOOR);
        assert!(tc.floored);

        assert!(matches!(oracle_threshold(&ds, 1.0, 0.5), Err(Error::InvalidConfig(_))));
        let plain = Dataset::new(ds.x.clone(), ds.y.clone()).unwrap();
        assert_eq!(oracle_threshold(&plain, 1.0, 1.0), Err(Error::MissingGroundTruth));
    }
}
