//! Noise schedules, the forward process, the corpus posterior-mean denoiser,
//! strided DDPM reverse sampling, and the per-claim stress test.

mod engine;
mod sampler;
mod schedule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{
    read_results_jsonl, write_results_csv, write_results_jsonl, EngineConfig, StressEngine, StressError,
    StressTestResult,
};
pub use sampler::{
    bayes_denoise, bayes_denoise_scaled, decode, forward_diffuse, reverse_sample, timestep_grid, Posterior,
    Reconstruction,
};
pub use schedule::{build_schedule, NoiseSchedule, ScheduleKind, DEFAULT_TIMESTEPS};

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("schedule needs at least one timestep")]
    ZeroTimesteps,
    #[error("unknown schedule kind {0:?} (expected linear or sqrt)")]
    UnknownSchedule(String),
    #[error("timestep {t} outside [1, {max}]")]
    TimestepOutOfRange { t: usize, max: usize },
    #[error("manifold has no rows")]
    EmptyManifold,
    #[error("manifold rows are not aligned with the corpus claims")]
    Misaligned,
    #[error("non-finite value in denoiser input")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{steps} reverse steps requested but t* is only {t_star}")]
    StepsExceedTStar { steps: usize, t_star: usize },
    #[error("invalid stress configuration: {0}")]
    InvalidConfig(String),
}

pub const DEFAULT_T_STAR: usize = 500;
pub const DEFAULT_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StressConfig {
    pub t_star: usize,
    pub steps: usize,
    pub schedule_kind: ScheduleKind,
    pub seed: u64,
    /// Skip the reverse chain and return the posterior mean at t* directly.
    pub single_shot: bool,
    /// Force sigma = 0 on every reverse step.
    pub deterministic_reverse: bool,
    /// Reconstructions per claim; energies are averaged over repeats.
    pub repeats: usize,
    /// Multiplier applied to unit embeddings before diffusion.
    /// `None` means `sqrt(dim)`, i.e. unit variance per coordinate.
    pub signal_scale: Option<f64>,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            t_star: DEFAULT_T_STAR,
            steps: DEFAULT_STEPS,
            schedule_kind: ScheduleKind::default(),
            seed: 0,
            single_shot: false,
            deterministic_reverse: false,
            repeats: 1,
            signal_scale: None,
        }
    }
}

impl StressConfig {
    pub fn signal_scale_for(&self, dim: usize) -> f64 {
        self.signal_scale.unwrap_or((dim as f64).sqrt())
    }

    pub fn validate(&self, timesteps: usize) -> Result<(), DiffusionError> {
        if self.t_star == 0 || self.t_star > timesteps {
            return Err(DiffusionError::TimestepOutOfRange {
                t: self.t_star,
                max: timesteps,
            });
        }
        if self.steps == 0 {
            return Err(DiffusionError::InvalidConfig("steps must be at least 1".into()));
        }
        if self.steps > self.t_star {
            return Err(DiffusionError::StepsExceedTStar {
                steps: self.steps,
                t_star: self.t_star,
            });
        }
        if self.repeats == 0 {
            return Err(DiffusionError::InvalidConfig("repeats must be at least 1".into()));
        }
        if let Some(s) = self.signal_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(DiffusionError::InvalidConfig(format!("signal scale must be positive, got {s}")));
            }
        }
        Ok(())
    }
}
