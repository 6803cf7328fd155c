use super::{Critic, CriticError, CriticVerdict};
use crate::claims::Template;

const SAME: CriticVerdict = CriticVerdict {
    entailment: 0.95,
    neutral: 0.04,
    contradiction: 0.01,
};
const CONFLICT: CriticVerdict = CriticVerdict {
    entailment: 0.01,
    neutral: 0.04,
    contradiction: 0.95,
};
const UNRELATED: CriticVerdict = CriticVerdict {
    entailment: 0.05,
    neutral: 0.90,
    contradiction: 0.05,
};

/// Rule-based judge for template-rendered claims. Claims that share subject
/// and relation either agree (same object) or contradict; anything else,
/// including text the template cannot parse, is neutral.
#[derive(Debug, Clone, Default)]
pub struct SchemaCritic {
    template: Template,
}

impl SchemaCritic {
    pub fn new(template: Template) -> Self {
        Self { template }
    }
}

impl Critic for SchemaCritic {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<CriticVerdict, CriticError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(CriticError::EmptyInput);
        }
        let (Some(p), Some(h)) = (self.template.parse(premise), self.template.parse(hypothesis)) else {
            return Ok(UNRELATED);
        };
        Ok(if p.subject != h.subject || p.relation != h.relation {
            UNRELATED
        } else if p.object == h.object {
            SAME
        } else {
            CONFLICT
        })
    }
}
