//! Metrics, significance tests, sensitivity sweeps and ablations.
//!
//! Every ranked quantity is a truth score: higher means more likely true.
//! Energies are negated (`-e_mse`) or complemented (`1 - e_sem`) here.

mod metrics;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::ClaimSet;
use crate::diffusion::{StressEngine, StressError, StressTestResult};
use crate::embedder::stable_hash64;
use crate::energy::{hybrid_score, EnergyError};

pub use metrics::{accuracy, auroc, ScoredSet, ThresholdRule};
pub use stats::{incomplete_beta, ln_gamma, paired_t_test, student_t_two_sided, TTest};

pub const DEFAULT_T_STAR_GRID: [usize; 5] = [100, 250, 500, 750, 900];
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const RANDOM_BASELINE_DOMAIN: u64 = 0x7261_6e64_6f6d_0001;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("AUROC needs both positive and negative labels")]
    SingleClass,
    #[error("non-finite score")]
    NonFinite,
    #[error("claim `{0}` has no label")]
    Unlabeled(String),
    #[error("unknown ablation variant `{0}`")]
    UnknownVariant(String),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("grid value {0} is out of range")]
    OutOfRange(String),
    #[error(transparent)]
    Stress(#[from] StressError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Scoring methods compared by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Random,
    Mse,
    DirectNli,
    Semantic,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Random, Method::Mse, Method::DirectNli, Method::Semantic, Method::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Mse => "mse",
            Method::DirectNli => "direct_nli",
            Method::Semantic => "semantic",
            Method::Hybrid => "hybrid",
        }
    }

    /// Truth score of one result. `seed` only matters for the random baseline.
    pub fn score(self, r: &StressTestResult, seed: u64) -> f64 {
        match self {
            Method::Random => {
                let h = stable_hash64(r.claim_id.as_bytes(), seed ^ RANDOM_BASELINE_DOMAIN);
                (h >> 11) as f64 / (1u64 << 53) as f64
            }
            Method::Mse => -r.e_mse,
            Method::DirectNli => r.s_disc,
            Method::Semantic => 1.0 - r.e_sem,
            Method::Hybrid => r.s_hybrid,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn labels_of(results: &[StressTestResult]) -> Result<Vec<bool>, EvalError> {
    results
        .iter()
        .map(|r| {
            r.label
                .map(|l| l.is_supported())
                .ok_or_else(|| EvalError::Unlabeled(r.claim_id.clone()))
        })
        .collect()
}

pub fn scored_set(results: &[StressTestResult], method: Method, seed: u64) -> Result<ScoredSet, EvalError> {
    let scores = results.iter().map(|r| method.score(r, seed)).collect();
    ScoredSet::new(method.name(), scores, labels_of(results)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// Mean over seeds.
    pub auroc: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub auroc_std: f64,
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auroc_per_seed: Vec<f64>,
    pub accuracy_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Paired test on per-claim truth scores from the first seed.
    pub per_claim: TTest,
    /// Paired test on per-seed AUROCs; absent with fewer than two seeds.
    pub per_seed: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepRow {
    pub t_star: usize,
    pub noise_pct: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub auroc: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweeps {
    pub t_star: Option<Vec<TimestepRow>>,
    pub lambda: Option<Vec<LambdaRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_method: BTreeMap<String, MethodSummary>,
    pub sweeps: Option<Sweeps>,
    pub significance: Option<BTreeMap<String, Significance>>,
    pub ablation: Option<Vec<AblationRow>>,
    pub accuracy_rule: ThresholdRule,
    pub config_echo: serde_json::Value,
    pub seed_list: Vec<u64>,
    pub notes: Vec<String>,
}

impl EvalReport {
    fn empty(engine: &StressEngine, threshold: ThresholdRule, seeds: Vec<u64>) -> Self {
        let mut notes = vec![match threshold {
            ThresholdRule::OracleBest => "accuracy is oracle-threshold accuracy (best cut on this set)".to_string(),
            ThresholdRule::Fixed(tau) => format!("accuracy uses the fixed threshold score >= {tau}"),
        }];
        notes.push(format!(
            "noise schedule: {} (linear 1e-4..2e-2 and sqrt are both available)",
            engine.config().stress.schedule_kind
        ));
        Self {
            per_method: BTreeMap::new(),
            sweeps: None,
            significance: None,
            ablation: None,
            accuracy_rule: threshold,
            config_echo: serde_json::to_value(engine.config()).expect("config serializes"),
            seed_list: seeds,
            notes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per method: `method,auroc,auroc_std,accuracy,accuracy_std,n_pos,n_neg`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "auroc", "auroc_std", "accuracy", "accuracy_std", "n_pos", "n_neg"])?;
        for (name, m) in &self.per_method {
            w.write_record([
                name.clone(),
                m.auroc.to_string(),
                m.auroc_std.to_string(),
                m.accuracy.to_string(),
                m.accuracy_std.to_string(),
                m.n_pos.to_string(),
                m.n_neg.to_string(),
            ])?;
        }
        for row in self.ablation.iter().flatten() {
            w.write_record([
                row.variant.clone(),
                row.auroc.to_string(),
                "0".into(),
                row.accuracy.to_string(),
                "0".into(),
                String::new(),
                String::new(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `method -> AUROC` pairs on one line, for terminal summaries.
    pub fn summary_line(&self) -> String {
        if let Some(rows) = &self.ablation {
            return rows
                .iter()
                .map(|r| format!("{}={:.4}", r.variant, r.auroc))
                .collect::<Vec<_>>()
                .join(" ");
        }
        self.per_method
            .iter()
            .map(|(k, m)| format!("{k}={:.4}", m.auroc))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the stress test once per seed and compares every method.
pub fn evaluate(
    engine: &StressEngine,
    dataset: &ClaimSet,
    seeds: &[u64],
    threshold: ThresholdRule,
) -> Result<EvalReport, EvalError> {
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let mut aurocs: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut accs: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut first_scores: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut counts = (0, 0);
    for (k, &seed) in seeds.iter().enumerate() {
        let results = engine.with_seed(seed).run_batch(dataset.claims())?;
        for method in Method::ALL {
            let set = scored_set(&results, method, seed)?;
            counts = (set.n_pos(), set.n_neg());
            aurocs.entry(method).or_default().push(auroc(&set)?);
            accs.entry(method).or_default().push(accuracy(&set, threshold)?);
            if k == 0 {
                first_scores.insert(method, set.scores);
            }
        }
    }

    let mut report = EvalReport::empty(engine, threshold, seeds.to_vec());
    for method in Method::ALL {
        let (a, a_std) = mean_std(&aurocs[&method]);
        let (c, c_std) = mean_std(&accs[&method]);
        report.per_method.insert(
            method.name().to_string(),
            MethodSummary {
                auroc: a,
                auroc_std: a_std,
                accuracy: c,
                accuracy_std: c_std,
                n_pos: counts.0,
                n_neg: counts.1,
                auroc_per_seed: aurocs[&method].clone(),
                accuracy_per_seed: accs[&method].clone(),
            },
        );
    }

    let mut significance = BTreeMap::new();
    for baseline in [Method::Random, Method::Mse, Method::DirectNli, Method::Semantic] {
        let per_claim = paired_t_test(&first_scores[&Method::Hybrid], &first_scores[&baseline])?;
        let per_seed = if seeds.len() >= 2 {
            Some(paired_t_test(&aurocs[&Method::Hybrid], &aurocs[&baseline])?)
        } else {
            None
        };
        significance.insert(format!("hybrid_vs_{}", baseline.name()), Significance { per_claim, per_seed });
    }
    report.significance = Some(significance);
    report
        .notes
        .push("per_claim tests compare per-claim truth scores from the first seed; per_seed tests compare AUROCs across seeds".into());
    Ok(report)
}

/// Hybrid AUROC at each focal timestep. Per-claim noise is shared across
/// cells, so only t* changes between rows.
pub fn sweep_timestep(engine: &StressEngine, values: &[usize], dataset: &ClaimSet) -> Result<Vec<TimestepRow>, EvalError> {
    let big_t = engine.config().timesteps;
    let mut rows = Vec::with_capacity(values.len());
    for &t_star in values {
        if t_star == 0 || t_star > big_t {
            return Err(EvalError::OutOfRange(format!("t*={t_star}")));
        }
        let mut stress = engine.config().stress.clone();
        stress.t_star = t_star;
        let results = engine.reconfigured(stress)?.run_batch(dataset.claims())?;
        let set = scored_set(&results, Method::Hybrid, engine.config().stress.seed)?;
        rows.push(TimestepRow {
            t_star,
            noise_pct: 100.0 * t_star as f64 / big_t as f64,
            auroc: auroc(&set)?,
        });
    }
    Ok(rows)
}

/// Truth scores obtained by re-mixing stored `(s_disc, e_sem)` with `lambda`.
pub fn remix_scores(results: &[StressTestResult], lambda: f64) -> Result<Vec<f64>, EvalError> {
    results
        .iter()
        .map(|r| Ok(hybrid_score(r.s_disc, r.e_sem, lambda)?))
        .collect()
}

/// Hybrid AUROC per lambda, from stored results only (no diffusion).
pub fn sweep_lambda(values: &[f64], results: &[StressTestResult]) -> Result<Vec<LambdaRow>, EvalError> {
    let labels = labels_of(results)?;
    values
        .iter()
        .map(|&lambda| {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(EvalError::OutOfRange(format!("lambda={lambda}")));
            }
            let set = ScoredSet::new(format!("hybrid@{lambda}"), remix_scores(results, lambda)?, labels.clone())?;
            Ok(LambdaRow {
                lambda,
                auroc: auroc(&set)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Hybrid,
    MseOnly,
    DiscOnly,
    FixedTStar(usize),
}

impl Variant {
    pub fn defaults() -> Vec<Variant> {
        vec![
            Variant::Hybrid,
            Variant::MseOnly,
            Variant::DiscOnly,
            Variant::FixedTStar(250),
            Variant::FixedTStar(750),
        ]
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Hybrid => f.write_str("hybrid"),
            Variant::MseOnly => f.write_str("mse_only"),
            Variant::DiscOnly => f.write_str("disc_only"),
            Variant::FixedTStar(t) => write!(f, "fixed_t_star_{t}"),
        }
    }
}

impl FromStr for Variant {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || EvalError::UnknownVariant(s.to_string());
        match s {
            "hybrid" => Ok(Variant::Hybrid),
            "mse_only" => Ok(Variant::MseOnly),
            "disc_only" => Ok(Variant::DiscOnly),
            _ => s
                .strip_prefix("fixed_t_star_")
                .and_then(|t| t.parse().ok())
                .map(Variant::FixedTStar)
                .ok_or_else(unknown),
        }
    }
}

/// One AUROC row per variant, in the order given.
pub fn run_ablation(
    engine: &StressEngine,
    dataset: &ClaimSet,
    variants: &[Variant],
    threshold: ThresholdRule,
) -> Result<EvalReport, EvalError> {
    let seed = engine.config().stress.seed;
    let mut base: Option<Vec<StressTestResult>> = None;
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let set = match variant {
            Variant::FixedTStar(t_star) => {
                let mut stress = engine.config().stress.clone();
                stress.t_star = t_star;
                let results = engine.reconfigured(stress)?.run_batch(dataset.claims())?;
                scored_set(&results, Method::Hybrid, seed)?
            }
            other => {
                if base.is_none() {
                    base = Some(engine.run_batch(dataset.claims())?);
                }
                let results = base.as_deref().expect("base run exists");
                let method = match other {
                    Variant::Hybrid => Method::Hybrid,
                    Variant::MseOnly => Method::Mse,
                    _ => Method::DirectNli,
                };
                scored_set(results, method, seed)?
            }
        };
        rows.push(AblationRow {
            variant: variant.to_string(),
            auroc: auroc(&set)?,
            accuracy: accuracy(&set, threshold)?,
        });
    }
    let mut report = EvalReport::empty(engine, threshold, vec![seed]);
    report.ablation = Some(rows);
    Ok(report)
}

/// `t_star,noise_pct,auroc` rows.
pub fn write_timestep_csv<W: Write>(rows: &[TimestepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `lambda,auroc` rows.
pub fn write_lambda_csv<W: Write>(rows: &[LambdaRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated two-column data with a `#` header, as gnuplot reads it.
pub fn write_gnuplot<W: Write>(header: (&str, &str), points: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# {} {}", header.0, header.1)?;
    for (x, y) in points {
        writeln!(out, "{x} {y}")?;
    }
    out.flush()
}
