//! Gaussian-process surrogate over encoded sequences.

mod gp;
mod kernel;
mod optim;

pub use gp::{
    CrossCovariance, FittedGp, GpConfig, GpParams, LikelihoodEval, LikelihoodSurface, NoiseMode,
    Prediction, DEFAULT_NOISE_VARIANCE, LENGTHSCALE_BOUNDS, LENGTHSCALE_PRIOR, NOISE_BOUNDS,
    OUTPUT_SCALE_BOUNDS, OUTPUT_SCALE_PRIOR,
};
pub use kernel::{kernel_eval, tanimoto_similarity, KernelFamily, KernelSpec};
pub use optim::{minimize_bounded, OptimOptions, OptimResult};
