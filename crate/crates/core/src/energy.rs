//! Reconstruction energies and the hybrid truth score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    pub lambda: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA }
    }
}

impl HybridConfig {
    pub fn new(lambda: f64) -> Result<Self, EnergyError> {
        unit_interval("lambda", lambda)?;
        Ok(Self { lambda })
    }
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64, EnergyError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(EnergyError::OutOfRange { name, value })
    }
}

/// Mean squared difference per dimension.
pub fn mse_energy(z0: &[f64], z_hat0: &[f64]) -> Result<f64, EnergyError> {
    if z0.len() != z_hat0.len() {
        return Err(EnergyError::DimensionMismatch {
            left: z0.len(),
            right: z_hat0.len(),
        });
    }
    if z0.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = z0.iter().zip(z_hat0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / z0.len() as f64)
}

/// `lambda * s_disc + (1 - lambda) * (1 - e_sem)`; higher means more likely true.
pub fn hybrid_score(s_disc: f64, e_sem: f64, lambda: f64) -> Result<f64, EnergyError> {
    unit_interval("s_disc", s_disc)?;
    unit_interval("e_sem", e_sem)?;
    unit_interval("lambda", lambda)?;
    Ok((lambda * s_disc + (1.0 - lambda) * (1.0 - e_sem)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse_energy(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mse_energy(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap(), 0.25);
        assert!(mse_energy(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hybrid_examples() {
        assert_eq!(hybrid_score(0.37, 0.99, 1.0).unwrap(), 0.37);
        assert_eq!(hybrid_score(0.123, 0.4, 0.0).unwrap(), 0.6);
        assert!((hybrid_score(0.8, 0.4, 0.5).unwrap() - 0.7).abs() < 1e-15);
        assert!(hybrid_score(1.2, 0.4, 0.5).is_err());
        assert!(hybrid_score(0.2, -0.1, 0.5).is_err());
        assert!(hybrid_score(0.2, 0.1, f64::NAN).is_err());
        assert!(HybridConfig::new(1.5).is_err());
    }
}
