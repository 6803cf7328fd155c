//! Three-way entailment judges and the scores derived from them.

mod external;
mod schema;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{Claim, Template};

pub use external::ExternalCritic;
pub use schema::SchemaCritic;

pub const DEFAULT_TAUTOLOGY: &str = "This is a true statement";
pub const DEFAULT_TIMEOUT_MS: u64 = 5000;
pub const DEFAULT_BATCH_WINDOW: usize = 64;

/// Verdicts must sum to one within this tolerance.
pub const VERDICT_TOLERANCE: f64 = 1e-9;
/// External critics may be sloppier; their verdicts are renormalized.
pub const EXTERNAL_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CriticError {
    #[error("premise and hypothesis must be non-empty")]
    EmptyInput,
    #[error("invalid verdict ({entailment}, {neutral}, {contradiction})")]
    InvalidVerdict {
        entailment: f64,
        neutral: f64,
        contradiction: f64,
    },
    #[error("external critic needs a command")]
    MissingCommand,
    #[error("cannot launch critic `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("critic did not answer request {id} within {timeout_ms} ms")]
    Timeout { id: u64, timeout_ms: u64 },
    #[error("critic exited with request {id} in flight")]
    ChildExited { id: u64 },
    #[error("malformed critic response to request {id}: {reason}")]
    Malformed { id: u64, reason: String },
    #[error("critic probabilities for request {id} sum to {sum}")]
    NotNormalized { id: u64, sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticVerdict {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl CriticVerdict {
    pub fn new(entailment: f64, neutral: f64, contradiction: f64) -> Result<Self, CriticError> {
        let v = Self {
            entailment,
            neutral,
            contradiction,
        };
        let in_range = [entailment, neutral, contradiction]
            .iter()
            .all(|p| p.is_finite() && (0.0..=1.0).contains(p));
        if !in_range || (v.sum() - 1.0).abs() > VERDICT_TOLERANCE {
            return Err(CriticError::InvalidVerdict {
                entailment,
                neutral,
                contradiction,
            });
        }
        Ok(v)
    }

    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        Self {
            entailment: third,
            neutral: third,
            contradiction: third,
        }
    }

    pub fn sum(&self) -> f64 {
        self.entailment + self.neutral + self.contradiction
    }
}

/// An NLI-style judge. Implementations must be safe to share, but callers
/// should not assume they are reentrant: stateful critics may serialize.
pub trait Critic: Send + Sync {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<CriticVerdict, CriticError>;

    /// Judge many pairs; one result per pair, in order.
    fn judge_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<CriticVerdict, CriticError>> {
        pairs.iter().map(|(p, h)| self.judge(p, h)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    #[default]
    Schema,
    External,
}

/// Which side of the judgment the claim takes when scored against the tautology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TautologyDirection {
    #[default]
    ClaimAsPremise,
    ClaimAsHypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticConfig {
    pub kind: CriticKind,
    pub external_command: Option<String>,
    pub timeout_ms: u64,
    pub tautology_text: String,
    pub tautology_direction: TautologyDirection,
    /// Maximum requests written to an external critic before reading answers.
    pub batch_window: usize,
    /// Template the schema critic parses claims with.
    pub template: Template,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            kind: CriticKind::Schema,
            external_command: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            tautology_text: DEFAULT_TAUTOLOGY.to_string(),
            tautology_direction: TautologyDirection::ClaimAsPremise,
            batch_window: DEFAULT_BATCH_WINDOW,
            template: Template::default(),
        }
    }
}

impl CriticConfig {
    pub fn external(command: impl Into<String>) -> Self {
        Self {
            kind: CriticKind::External,
            external_command: Some(command.into()),
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Critic>, CriticError> {
        Ok(match self.kind {
            CriticKind::Schema => Arc::new(SchemaCritic::new(self.template.clone())),
            CriticKind::External => {
                let command = self.external_command.as_deref().ok_or(CriticError::MissingCommand)?;
                Arc::new(ExternalCritic::new(command, self.timeout_ms, self.batch_window)?)
            }
        })
    }

    /// The (premise, hypothesis) pair used for tautology scoring of `claim_text`.
    pub fn tautology_pair<'a>(&'a self, claim_text: &'a str) -> (&'a str, &'a str) {
        match self.tautology_direction {
            TautologyDirection::ClaimAsPremise => (claim_text, self.tautology_text.as_str()),
            TautologyDirection::ClaimAsHypothesis => (self.tautology_text.as_str(), claim_text),
        }
    }
}

/// Contradiction probability between a claim and its reconstruction.
pub fn semantic_energy(original: &Claim, reconstruction_text: &str, critic: &dyn Critic) -> Result<f64, CriticError> {
    Ok(critic.judge(&original.text, reconstruction_text)?.contradiction)
}

/// Direct-NLI confidence: entailment between the claim and the tautology.
pub fn discriminative_score(claim: &Claim, critic: &dyn Critic, config: &CriticConfig) -> Result<f64, CriticError> {
    let (premise, hypothesis) = config.tautology_pair(&claim.text);
    Ok(critic.judge(premise, hypothesis)?.entailment)
}
