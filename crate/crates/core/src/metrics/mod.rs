//! Image-quality metrics: Fréchet distance between feature Gaussians and the
//! NIQE no-reference score.

mod features;
mod fid;
mod niqe;

use thiserror::Error;

pub use features::grid_statistics;
pub use fid::{fit_gaussian, fit_gaussian_rows, frechet_distance, sqrtm_psd, GaussianStats};
pub use niqe::{
    downsample_half, fit_aggd, fit_ggd, fit_niqe_model, mscn, niqe_features, niqe_patch_features, niqe_score, Aggd,
    CoeffField, Ggd, NiqeConfig, NiqeModel, FEATURES_PER_SCALE,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("matrix has eigenvalue {0:e}, not positive semidefinite")]
    NotPsd(f64),
    #[error("eigendecomposition did not converge")]
    NoConvergence,
    #[error("non-finite input")]
    NonFinite,
    #[error("image is {width}×{height}, need at least {min}×{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("all samples are zero")]
    AllZero,
    #[error("no patch passes the sharpness gate")]
    NoSharpPatch,
    #[error("invalid configuration: {0}")]
    Config(String),
}
