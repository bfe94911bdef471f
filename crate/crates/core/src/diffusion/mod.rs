//! Denoising diffusion machinery: the forward noising process, ancestral
//! sampling with fixed posterior variance, noise-matching training,
//! variational-bound diagnostics and reconstruction-error scoring.

mod detector;
mod process;
mod schedule;
mod train;

pub use detector::{
    reconstruct_standardized, DiffusionDetector, ScoringConfig, ScoringMode, Standardizer,
    SCORE_GROUP_ROWS,
};
pub use process::{
    denoise_from, model_mean, p_sample, posterior_params, predict_x0, q_sample, sample, vlb_term,
};
pub use schedule::NoiseSchedule;
pub use train::{loss_and_grads, train_ddpm, train_step, TrainConfig};
