//! Scale-aware crowd-density modeling with annotation-noise correction.
//!
//! The crate models each annotated head as a mixture of per-scale Gaussian
//! kernels whose variances follow a halving schedule derived from the
//! head-size distribution, derives the closed-form mean and covariance of
//! the density map under i.i.d. annotation noise, restricts the covariance
//! to the pixels holding most of the variance mass, truncates it by SVD,
//! and exposes the resulting rank-M Gaussian negative log-likelihood with a
//! count regularizer as a trainable loss over free per-pixel predictions.
//!
//! Alongside the loss live the fusion tensor operations of the companion
//! counting architecture (Interpolation-Down/Up, synthetic scale fusion,
//! intra-block fusion, channel-split blocks, and a parameter/MAC counter)
//! and a CLI harness (`sacc`) for synthetic-scene experiments: scene
//! generation, density fitting, parameter sweeps, and a self-check suite.

pub mod annotation;
pub mod density;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod loss;
pub mod lowrank;
pub mod optim;

pub use annotation::{
    build_scale_params, build_scale_params_with_beta1, rescale_annotations, sample_scene,
    AlphaMode, AnnotatedScene, Annotation, HeadSizeDistribution, PositionKind, ScaleParams,
};
pub use density::{
    approx_cov, approx_cov_selected, approx_diag_var, approx_mean, gaussian_kernel_2d,
    grid_for_scale, mixture_density, render_density, render_density_on_grid, DensityField,
    GaussianApprox, GridDims, MAX_DENSE_COV_PIXELS,
};
pub use error::{Error, Result};
pub use loss::{
    baseline_l2_gradient, baseline_l2_loss, loss_gradient, regularizer, total_loss,
    LossBreakdown, ScalePrecomp, SoftAssign,
};
pub use lowrank::{
    neg_log_likelihood, select_pixels, truncate_cov, truncate_cov_default_jitter, RankMApprox,
    DEFAULT_JITTER_REL,
};
