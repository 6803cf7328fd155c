//! Scores claims as likely true or likely hallucinated by noising their
//! embeddings, reconstructing them against a corpus of known truths, and
//! measuring how far the reconstruction drifts.
//!
//! ```no_run
//! use driftcheck_core::claims::{generate_world, WorldConfig};
//! use driftcheck_core::diffusion::{EngineConfig, StressEngine};
//!
//! let world = generate_world(&WorldConfig::default())?;
//! let engine = StressEngine::new(world.truth_corpus, EngineConfig::default())?;
//! for r in engine.run_batch(world.test_set.claims())? {
//!     println!("{} e_sem={:.2} hybrid={:.2}", r.claim_id, r.e_sem, r.s_hybrid);
//! }
//! # Ok::<(), driftcheck_core::Error>(())
//! ```

pub mod claims;
pub mod critic;
pub mod diffusion;
pub mod embedder;
pub mod energy;
pub mod eval;
pub mod io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Claims(#[from] claims::ClaimError),
    #[error(transparent)]
    Embed(#[from] embedder::EmbedError),
    #[error(transparent)]
    Diffusion(#[from] diffusion::DiffusionError),
    #[error(transparent)]
    Critic(#[from] critic::CriticError),
    #[error(transparent)]
    Energy(#[from] energy::EnergyError),
    #[error(transparent)]
    Stress(#[from] diffusion::StressError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
