//! Statistical kernels shared by the probing, steering and geometry code.

pub mod calibration;
pub mod isotonic;
pub mod linalg;
pub mod pca;
pub mod pchip;
pub mod ridge;
pub mod stats;

pub use calibration::{brier_binary, ece, CalibrationBin, CalibrationReport, DEFAULT_BINS};
pub use isotonic::{isotonic_fit, pava, IsotonicModel};
pub use pca::{pca_fit_project, Pca};
pub use pchip::{monotone_interp_fit, monotone_interp_invert, Inversion, MonotoneInterpolant};
pub use ridge::{default_lambdas, fit_ridge, log_grid, r_squared, sweep_ridge, RidgeFit, RidgeSolver};
pub use stats::{cohens_d, mean, pearson_r, quantile, sample_variance, CohensD};
