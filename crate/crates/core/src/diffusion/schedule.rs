use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DiffusionError;

pub const DEFAULT_TIMESTEPS: usize = 1000;

const LINEAR_BETA_START: f64 = 1e-4;
const LINEAR_BETA_END: f64 = 2e-2;
const SQRT_OFFSET: f64 = 1e-4;
const SQRT_ALPHA_BAR_FLOOR: f64 = 1e-6;
const MIN_BETA: f64 = 1e-12;
const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    #[default]
    Sqrt,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Sqrt => "sqrt",
        })
    }
}

impl FromStr for ScheduleKind {
    type Err = DiffusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ScheduleKind::Linear),
            "sqrt" | "square-root" => Ok(ScheduleKind::Sqrt),
            other => Err(DiffusionError::UnknownSchedule(other.to_string())),
        }
    }
}

/// Timestep-indexed noise schedule. Index 0 is the clean signal
/// (`alpha_bar[0] == 1`); indices `1..=T` are diffusion steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    timesteps: usize,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<(), DiffusionError> {
        if t > self.timesteps {
            Err(DiffusionError::TimestepOutOfRange { t, max: self.timesteps })
        } else {
            Ok(())
        }
    }

    fn from_betas(kind: ScheduleKind, beta: Vec<f64>) -> Self {
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        alpha_bar.push(1.0);
        for t in 1..alpha.len() {
            alpha_bar.push(alpha_bar[t - 1] * alpha[t]);
        }
        Self {
            kind,
            timesteps: beta.len() - 1,
            beta,
            alpha,
            alpha_bar,
        }
    }
}

pub fn build_schedule(kind: ScheduleKind, timesteps: usize) -> Result<NoiseSchedule, DiffusionError> {
    if timesteps == 0 {
        return Err(DiffusionError::ZeroTimesteps);
    }
    let mut beta = vec![0.0; timesteps + 1];
    match kind {
        ScheduleKind::Linear => {
            for (t, b) in beta.iter_mut().enumerate().skip(1) {
                *b = if timesteps == 1 {
                    LINEAR_BETA_START
                } else {
                    let frac = (t - 1) as f64 / (timesteps - 1) as f64;
                    LINEAR_BETA_START + frac * (LINEAR_BETA_END - LINEAR_BETA_START)
                };
            }
        }
        ScheduleKind::Sqrt => {
            let target = |t: usize| -> f64 {
                if t == 0 {
                    1.0
                } else {
                    (1.0 - (t as f64 / timesteps as f64 + SQRT_OFFSET).sqrt()).clamp(SQRT_ALPHA_BAR_FLOOR, 1.0)
                }
            };
            for (t, b) in beta.iter_mut().enumerate().skip(1) {
                *b = (1.0 - target(t) / target(t - 1)).clamp(MIN_BETA, MAX_BETA);
            }
        }
    }
    Ok(NoiseSchedule::from_betas(kind, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_endpoints() {
        let s = build_schedule(ScheduleKind::Linear, 1000).unwrap();
        assert_eq!(s.alpha_bar()[0], 1.0);
        assert_eq!(s.beta()[0], 0.0);
        assert!((s.beta()[1] - 1e-4).abs() < 1e-18);
        assert!((s.beta()[1000] - 2e-2).abs() < 1e-15);
    }

    #[test]
    fn sqrt_tracks_closed_form() {
        let s = build_schedule(ScheduleKind::Sqrt, 1000).unwrap();
        for t in [1usize, 10, 250, 500, 750, 999] {
            let expected = 1.0 - (t as f64 / 1000.0 + 1e-4).sqrt();
            assert!((s.alpha_bar()[t] - expected).abs() < 1e-9, "t={t}");
        }
        assert!(s.alpha_bar()[1000] > 0.0);
    }

    #[test]
    fn invariants_hold_for_several_lengths() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Sqrt] {
            for t_max in [1usize, 2, 10, 100, 1000, 20_000] {
                let s = build_schedule(kind, t_max).unwrap();
                assert_eq!(s.alpha_bar().len(), t_max + 1);
                assert_eq!(s.alpha_bar()[0], 1.0);
                for t in 1..=t_max {
                    let (b, ab) = (s.beta()[t], s.alpha_bar()[t]);
                    assert!(b > 0.0 && b < 1.0, "{kind} T={t_max} beta[{t}]={b}");
                    assert!(ab > 0.0 && ab <= 1.0);
                    assert!(ab < s.alpha_bar()[t - 1], "{kind} T={t_max} not decreasing at {t}");
                    assert!((ab - s.alpha_bar()[t - 1] * s.alpha()[t]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(build_schedule(ScheduleKind::Sqrt, 0), Err(DiffusionError::ZeroTimesteps)));
        assert!(matches!("cosine".parse::<ScheduleKind>(), Err(DiffusionError::UnknownSchedule(_))));
        assert_eq!("Linear".parse::<ScheduleKind>().unwrap(), ScheduleKind::Linear);
    }
}
