use rand::Rng;
use rand_distr::StandardNormal;

use super::{DiffusionError, NoiseSchedule, StressConfig};
use crate::claims::ClaimSet;
use crate::embedder::{cosine, dot, CorpusMatrix};

/// `z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps`, `eps ~ N(0, I)`.
pub fn forward_diffuse<R: Rng + ?Sized>(
    z0: &[f64],
    schedule: &NoiseSchedule,
    t: usize,
    rng: &mut R,
) -> Result<Vec<f64>, DiffusionError> {
    schedule.check_t(t)?;
    let ab = schedule.alpha_bar()[t];
    if t == 0 {
        return Ok(z0.to_vec());
    }
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(z0
        .iter()
        .map(|&x| {
            let eps: f64 = rng.sample(StandardNormal);
            signal * x + noise * eps
        })
        .collect())
}

/// Posterior over manifold rows given a noisy point.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `E[z0 | z_t]`, in the same (scaled) space as `z_t`.
    pub mean: Vec<f64>,
    pub weights: Vec<f64>,
    pub entropy: f64,
}

/// Exact posterior mean under a uniform prior over the manifold rows.
pub fn bayes_denoise(
    z_t: &[f64],
    schedule: &NoiseSchedule,
    t: usize,
    manifold: &CorpusMatrix,
) -> Result<Posterior, DiffusionError> {
    bayes_denoise_scaled(z_t, schedule, t, manifold, 1.0)
}

/// As [`bayes_denoise`], with the prior supported on `signal_scale * row`.
pub fn bayes_denoise_scaled(
    z_t: &[f64],
    schedule: &NoiseSchedule,
    t: usize,
    manifold: &CorpusMatrix,
    signal_scale: f64,
) -> Result<Posterior, DiffusionError> {
    if manifold.n_rows() == 0 {
        return Err(DiffusionError::EmptyManifold);
    }
    if t == 0 {
        return Err(DiffusionError::TimestepOutOfRange { t, max: schedule.timesteps() });
    }
    schedule.check_t(t)?;
    if z_t.len() != manifold.dim() {
        return Err(DiffusionError::DimensionMismatch {
            expected: manifold.dim(),
            got: z_t.len(),
        });
    }
    if !signal_scale.is_finite() || z_t.iter().any(|x| !x.is_finite()) {
        return Err(DiffusionError::NonFinite);
    }

    let ab = schedule.alpha_bar()[t];
    let a = ab.sqrt() * signal_scale;
    let var = 1.0 - ab;
    // -||z - a c||^2 / (2 var) up to a row-independent constant
    let log_w: Vec<f64> = manifold
        .rows()
        .map(|row| (a * dot(z_t, row) - 0.5 * a * a * dot(row, row)) / var)
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(DiffusionError::NonFinite);
    }
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut mean = vec![0.0; manifold.dim()];
    for (w, row) in weights.iter().zip(manifold.rows()) {
        if *w == 0.0 {
            continue;
        }
        for (m, x) in mean.iter_mut().zip(row) {
            *m += w * x;
        }
    }
    mean.iter_mut().for_each(|m| *m *= signal_scale);
    let entropy = -weights.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>();

    Ok(Posterior {
        mean,
        weights,
        entropy: entropy.max(0.0),
    })
}

/// Evenly spaced descending grid of `steps` timesteps from `t_star` to 1.
pub fn timestep_grid(t_star: usize, steps: usize) -> Result<Vec<usize>, DiffusionError> {
    if t_star == 0 || steps == 0 {
        return Err(DiffusionError::InvalidConfig("t_star and steps must be positive".into()));
    }
    if steps > t_star {
        return Err(DiffusionError::StepsExceedTStar { steps, t_star });
    }
    if steps == 1 {
        return Ok(vec![t_star]);
    }
    let span = (t_star - 1) as f64;
    Ok((0..steps)
        .map(|k| (t_star as f64 - span * k as f64 / (steps - 1) as f64).round() as usize)
        .collect())
}

/// Output of the reverse process.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub z_hat0: Vec<f64>,
    /// Posterior entropy at the first (t*) denoiser call.
    pub entropy_at_t_star: f64,
    pub denoiser_calls: usize,
}

/// Strided DDPM ancestral sampling from `t_star` down to 0 using the exact
/// posterior-mean denoiser; the last step returns the denoiser output.
pub fn reverse_sample<R: Rng + ?Sized>(
    z_tstar: &[f64],
    schedule: &NoiseSchedule,
    config: &StressConfig,
    manifold: &CorpusMatrix,
    rng: &mut R,
) -> Result<Reconstruction, DiffusionError> {
    config.validate(schedule.timesteps())?;
    let scale = config.signal_scale_for(manifold.dim());
    let grid = if config.single_shot {
        vec![config.t_star]
    } else {
        timestep_grid(config.t_star, config.steps)?
    };

    let ab = schedule.alpha_bar();
    let mut z = z_tstar.to_vec();
    let mut entropy_at_t_star = 0.0;
    for (k, &t) in grid.iter().enumerate() {
        let post = bayes_denoise_scaled(&z, schedule, t, manifold, scale)?;
        if k == 0 {
            entropy_at_t_star = post.entropy;
        }
        let Some(&t_prev) = grid.get(k + 1) else {
            return Ok(Reconstruction {
                z_hat0: post.mean,
                entropy_at_t_star,
                denoiser_calls: k + 1,
            });
        };
        let alpha_eff = ab[t] / ab[t_prev];
        let beta_eff = 1.0 - alpha_eff;
        let denom = 1.0 - ab[t];
        let coef_x0 = ab[t_prev].sqrt() * beta_eff / denom;
        let coef_zt = alpha_eff.sqrt() * (1.0 - ab[t_prev]) / denom;
        let sigma = if config.deterministic_reverse {
            0.0
        } else {
            ((1.0 - ab[t_prev]) / denom * beta_eff).max(0.0).sqrt()
        };
        for (zi, x0) in z.iter_mut().zip(&post.mean) {
            let mu = coef_x0 * x0 + coef_zt * *zi;
            *zi = if sigma > 0.0 {
                let eps: f64 = rng.sample(StandardNormal);
                mu + sigma * eps
            } else {
                mu
            };
        }
    }
    unreachable!("timestep grid is never empty")
}

/// Nearest corpus claim by cosine similarity; ties go to the lowest row.
pub fn decode<'c>(
    z_hat0: &[f64],
    manifold: &CorpusMatrix,
    corpus: &'c ClaimSet,
) -> Result<(&'c str, &'c str), DiffusionError> {
    if manifold.n_rows() == 0 {
        return Err(DiffusionError::EmptyManifold);
    }
    if manifold.n_rows() != corpus.len() {
        return Err(DiffusionError::Misaligned);
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, row) in manifold.rows().enumerate() {
        let c = cosine(z_hat0, row);
        if c > best.1 {
            best = (i, c);
        }
    }
    let claim = &corpus.claims()[best.0];
    if claim.id != manifold.claim_ids()[best.0] {
        return Err(DiffusionError::Misaligned);
    }
    Ok((claim.text.as_str(), claim.id.as_str()))
}
