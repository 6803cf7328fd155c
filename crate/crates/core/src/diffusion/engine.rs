use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_schedule, decode, forward_diffuse, reverse_sample, DiffusionError, NoiseSchedule, StressConfig};
use crate::claims::{Claim, ClaimSet, Label};
use crate::critic::{Critic, CriticConfig, CriticError};
use crate::embedder::{embed, embed_corpus, stable_hash64, CorpusMatrix, EmbedError, EmbeddingVector, DEFAULT_DIM};
use crate::energy::{hybrid_score, mse_energy, EnergyError, HybridConfig};

const CLAIM_SEED_DOMAIN: u64 = 0x5eed_c1a1_3000_0001;

#[derive(Debug, Error)]
pub enum StressError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("cannot start critic: {0}")]
    CriticSetup(#[source] CriticError),
    #[error("critic failed on claim `{claim_id}`: {source}")]
    Critic {
        claim_id: String,
        #[source]
        source: CriticError,
    },
    #[error("results line {line}: {message}")]
    Results { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything that determines a stress-test run, apart from parallelism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub dim: usize,
    pub timesteps: usize,
    pub stress: StressConfig,
    pub hybrid: HybridConfig,
    pub critic: CriticConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            timesteps: super::DEFAULT_TIMESTEPS,
            stress: StressConfig::default(),
            hybrid: HybridConfig::default(),
            critic: CriticConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), StressError> {
        if self.dim == 0 {
            return Err(StressError::Config("dim must be positive".into()));
        }
        if self.timesteps == 0 {
            return Err(DiffusionError::ZeroTimesteps.into());
        }
        self.stress.validate(self.timesteps)?;
        HybridConfig::new(self.hybrid.lambda)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressTestResult {
    pub claim_id: String,
    pub label: Option<Label>,
    pub original_text: String,
    pub reconstruction_text: String,
    pub z0: EmbeddingVector,
    pub z_hat0: EmbeddingVector,
    pub e_mse: f64,
    pub e_sem: f64,
    pub s_disc: f64,
    pub s_hybrid: f64,
    pub lambda: f64,
    pub nearest_corpus_id: String,
    pub denoiser_entropy: f64,
}

/// One reconstruction of one claim, before the critic is consulted.
struct Trace {
    z_hat0: Vec<f64>,
    text: String,
    nearest_id: String,
    e_mse: f64,
    entropy: f64,
}

/// Runs the stress test against a fixed corpus. Cheap to clone; corpus,
/// manifold, schedule and critic are shared.
#[derive(Clone)]
pub struct StressEngine {
    corpus: Arc<ClaimSet>,
    manifold: Arc<CorpusMatrix>,
    schedule: Arc<NoiseSchedule>,
    critic: Arc<dyn Critic>,
    config: EngineConfig,
    workers: usize,
    diffusion_calls: Arc<AtomicUsize>,
}

impl std::fmt::Debug for StressEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StressEngine")
            .field("corpus_len", &self.corpus.len())
            .field("config", &self.config)
            .field("workers", &self.workers)
            .finish_non_exhaustive()
    }
}

impl StressEngine {
    /// Embeds `corpus` and starts the configured critic.
    pub fn new(corpus: ClaimSet, config: EngineConfig) -> Result<Self, StressError> {
        config.validate()?;
        let manifold = embed_corpus(&corpus, config.dim)?;
        Self::with_manifold(corpus, manifold, config)
    }

    /// Uses a prebuilt manifold, which must be row-aligned with `corpus`.
    pub fn with_manifold(corpus: ClaimSet, manifold: CorpusMatrix, config: EngineConfig) -> Result<Self, StressError> {
        config.validate()?;
        let critic = config.critic.build().map_err(StressError::CriticSetup)?;
        Self::from_parts(corpus, manifold, config, critic)
    }

    pub fn from_parts(
        corpus: ClaimSet,
        manifold: CorpusMatrix,
        config: EngineConfig,
        critic: Arc<dyn Critic>,
    ) -> Result<Self, StressError> {
        config.validate()?;
        if manifold.dim() != config.dim {
            return Err(DiffusionError::DimensionMismatch {
                expected: config.dim,
                got: manifold.dim(),
            }
            .into());
        }
        if manifold.n_rows() == 0 {
            return Err(DiffusionError::EmptyManifold.into());
        }
        let aligned = manifold.n_rows() == corpus.len()
            && corpus.iter().zip(manifold.claim_ids()).all(|(c, id)| &c.id == id);
        if !aligned {
            return Err(DiffusionError::Misaligned.into());
        }
        let schedule = build_schedule(config.stress.schedule_kind, config.timesteps)?;
        Ok(Self {
            corpus: Arc::new(corpus),
            manifold: Arc::new(manifold),
            schedule: Arc::new(schedule),
            critic,
            config,
            workers: 1,
            diffusion_calls: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_critic(mut self, critic: Arc<dyn Critic>) -> Self {
        self.critic = critic;
        self
    }

    /// Same corpus, manifold and critic with different stress settings.
    pub fn reconfigured(&self, stress: StressConfig) -> Result<Self, StressError> {
        stress.validate(self.config.timesteps)?;
        let mut next = self.clone();
        if stress.schedule_kind != self.config.stress.schedule_kind {
            next.schedule = Arc::new(build_schedule(stress.schedule_kind, self.config.timesteps)?);
        }
        next.config.stress = stress;
        Ok(next)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut next = self.clone();
        next.config.stress.seed = seed;
        next
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, StressError> {
        let mut next = self.clone();
        next.config.hybrid = HybridConfig::new(lambda)?;
        Ok(next)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn corpus(&self) -> &ClaimSet {
        &self.corpus
    }

    pub fn manifold(&self) -> &CorpusMatrix {
        &self.manifold
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn critic(&self) -> &dyn Critic {
        self.critic.as_ref()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Reverse-diffusion runs performed so far by this engine and its clones.
    pub fn diffusion_calls(&self) -> usize {
        self.diffusion_calls.load(Ordering::Relaxed)
    }

    pub fn stress_test(&self, claim: &Claim) -> Result<StressTestResult, StressError> {
        Ok(self.run_batch(std::slice::from_ref(claim))?.remove(0))
    }

    /// Stress-tests every claim. Output order follows input order and the
    /// values do not depend on the worker count.
    pub fn run_batch(&self, claims: &[Claim]) -> Result<Vec<StressTestResult>, StressError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| StressError::Config(e.to_string()))?;
        let traces = pool.install(|| {
            claims
                .par_iter()
                .map(|c| self.reconstruct(c))
                .collect::<Result<Vec<_>, _>>()
        })?;

        let critic_cfg = &self.config.critic;
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        for (claim, (_, reps)) in claims.iter().zip(&traces) {
            pairs.extend(reps.iter().map(|r| (claim.text.as_str(), r.text.as_str())));
            pairs.push(critic_cfg.tautology_pair(&claim.text));
        }
        let mut verdicts = self.critic.judge_batch(&pairs).into_iter();

        let lambda = self.config.hybrid.lambda;
        let mut results = Vec::with_capacity(claims.len());
        for (claim, (z0, mut reps)) in claims.iter().zip(traces) {
            let critic_err = |source| StressError::Critic {
                claim_id: claim.id.clone(),
                source,
            };
            let n = reps.len() as f64;
            let mut e_sem = 0.0;
            for _ in 0..reps.len() {
                e_sem += verdicts.next().expect("verdict per pair").map_err(critic_err)?.contradiction;
            }
            let s_disc = verdicts.next().expect("verdict per pair").map_err(critic_err)?.entailment;
            let e_sem = e_sem / n;
            let e_mse = reps.iter().map(|r| r.e_mse).sum::<f64>() / n;
            let first = reps.swap_remove(0);
            results.push(StressTestResult {
                claim_id: claim.id.clone(),
                label: claim.label,
                original_text: claim.text.clone(),
                reconstruction_text: first.text,
                z0: EmbeddingVector::from_values(z0),
                z_hat0: EmbeddingVector::from_values(first.z_hat0),
                e_mse,
                e_sem,
                s_disc,
                s_hybrid: hybrid_score(s_disc, e_sem, lambda)?,
                lambda,
                nearest_corpus_id: first.nearest_id,
                denoiser_entropy: first.entropy,
            });
        }
        Ok(results)
    }

    fn reconstruct(&self, claim: &Claim) -> Result<(Vec<f64>, Vec<Trace>), StressError> {
        let stress = &self.config.stress;
        let z0 = embed(&claim.text, self.config.dim)?.into_values();
        let scale = stress.signal_scale_for(self.config.dim);
        let scaled: Vec<f64> = z0.iter().map(|x| x * scale).collect();
        let mut reps = Vec::with_capacity(stress.repeats);
        for repeat in 0..stress.repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(claim_seed(stress.seed, &claim.id, repeat));
            let z_t = forward_diffuse(&scaled, &self.schedule, stress.t_star, &mut rng)?;
            let rec = reverse_sample(&z_t, &self.schedule, stress, &self.manifold, &mut rng)?;
            self.diffusion_calls.fetch_add(1, Ordering::Relaxed);
            let z_hat0: Vec<f64> = rec.z_hat0.iter().map(|x| x / scale).collect();
            let (text, nearest_id) = decode(&z_hat0, &self.manifold, &self.corpus)?;
            reps.push(Trace {
                e_mse: mse_energy(&z0, &z_hat0)?,
                text: text.to_string(),
                nearest_id: nearest_id.to_string(),
                z_hat0,
                entropy: rec.entropy_at_t_star,
            });
        }
        Ok((z0, reps))
    }
}

/// Seed of the generator used for one claim and repeat. Independent of batch
/// composition, order and t*, so sweeps share noise across cells.
pub(crate) fn claim_seed(seed: u64, claim_id: &str, repeat: usize) -> u64 {
    let mut bytes = Vec::with_capacity(claim_id.len() + 17);
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(claim_id.as_bytes());
    bytes.push(0xff);
    bytes.extend_from_slice(&(repeat as u64).to_le_bytes());
    stable_hash64(&bytes, CLAIM_SEED_DOMAIN)
}

pub fn write_results_jsonl<W: Write>(results: &[StressTestResult], mut out: W) -> std::io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_results_jsonl<R: BufRead>(input: R) -> Result<Vec<StressTestResult>, StressError> {
    let mut results = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| StressError::Results {
            line: i + 1,
            message: e.to_string(),
        })?;
        results.push(r);
    }
    Ok(results)
}

/// Scalar columns only; embeddings stay in the JSONL form.
pub fn write_results_csv<W: Write>(results: &[StressTestResult], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "claim_id",
        "label",
        "original_text",
        "reconstruction_text",
        "nearest_corpus_id",
        "e_mse",
        "e_sem",
        "s_disc",
        "s_hybrid",
        "lambda",
        "denoiser_entropy",
    ])?;
    for r in results {
        w.write_record([
            r.claim_id.clone(),
            r.label.map(|l| l.as_fever().to_string()).unwrap_or_default(),
            r.original_text.clone(),
            r.reconstruction_text.clone(),
            r.nearest_corpus_id.clone(),
            r.e_mse.to_string(),
            r.e_sem.to_string(),
            r.s_disc.to_string(),
            r.s_hybrid.to_string(),
            r.lambda.to_string(),
            r.denoiser_entropy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
