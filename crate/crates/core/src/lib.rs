//! Thresholded forward regression for sparse linear models.
//!
//! The crate is split along the lines of the computation:
//!
//! * [`linalg`]: standardization, Gram matrices, least squares on a support
//!   and the incremental Gram-Schmidt state used for candidate scoring.
//! * [`select`]: the greedy selection loop with a strict threshold and the
//!   final least-squares refit.
//! * [`bounds`]: minimum sparse eigenvalues and the finite-sample bound
//!   constants for prediction error and selection count.
//! * [`simulate`]: seeded sparse linear-model datasets with ground truth.
//! * [`oracle`]: slow, independent reference computations.
//!
//! All geometry in `R^n` uses the averaged inner product `(1/n) u'v`, so
//! losses, Gram entries and scores share one scale.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod select;
pub mod simulate;
pub mod subsets;


pub use bounds::{
    constant_c1, constant_c2, sparse_eig_exact, sparse_eig_sampled, threshold_condition,
    check_selection_bounds, check_parameter_bounds, BoundReport, C2Entry, EigMethod, EigSource,
    SparseEigReport, GROTHENDIECK_BOUND,
};
pub use error::{Error, Result};
pub use linalg::{
    gram, least_squares_on_support, ortho_extend, standardize, Dataset, GramMatrix,
    GroundTruth, OrthoState, Standardized,
};
pub use select::{
    forward_regression, parameter_errors, score_all, FitResult, ParameterErrors,
    SelectionStep, SelectionTrace, StopReason,
};
pub use simulate::{oracle_threshold, simulate_dataset, Design, SimConfig, ThetaPattern,
    ThresholdChoice};
