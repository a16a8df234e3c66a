//! Samplers for three chaos families returning paired `(F, Γ(F))` draws.
//!
//! Every sample owns its own ChaCha8 stream (`seed`, stream = sample index),
//! so the output depends only on `(seed, n_samples)` and never on how the
//! work is split between threads.

mod batch_io;
pub mod fbm;
pub mod goe;
pub mod homogeneous;

pub use batch_io::{read_batch, write_batch, BatchIoError};
pub use fbm::{fgn_covariance, sample_fbm_hermite, FbmHermiteModel, Regime, Sampler};
pub use goe::{goe_chaos3_projection_coeffs, sample_goe_trace, Chaos3Projection, GoeStatistic, GoeTraceModel};
pub use homogeneous::{lindeberg_discrepancy, sample_homogeneous, HomogeneousSum, Law};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Identifier of the random stream layout recorded in every batch.
pub const GENERATOR_ID: &str = "chacha8-stream-per-sample/v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{0}")]
    Domain(String),
    #[error("covariance factorization failed: pivot {pivot:e} at row {row}")]
    Factorization { row: usize, pivot: f64 },
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("n_samples must be at least 1")]
    NoSamples,
}

/// Draws of `F` and, where defined, `Γ(F, F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// Ordered `key=value` description of the model that produced the batch.
    pub descriptor: Vec<(String, String)>,
    pub seed: u64,
    /// Chaos index `p`, so that `E Γ = p E F²`.
    pub chaos_order: usize,
    pub f: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub generator: String,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn descriptor_value(&self, key: &str) -> Option<&str> {
        self.descriptor
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub(crate) fn from_pairs(
        descriptor: Vec<(String, String)>,
        seed: u64,
        chaos_order: usize,
        pairs: Vec<(f64, f64)>,
    ) -> Self {
        let (f, gamma) = pairs.into_iter().unzip();
        Self {
            descriptor,
            seed,
            chaos_order,
            f,
            gamma: Some(gamma),
            generator: GENERATOR_ID.to_string(),
        }
    }
}

/// Generator for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `draw` once per sample index with per-thread scratch space and
/// collects results in index order.
pub(crate) fn draw_indexed<S, R, I, D>(n_samples: usize, seed: u64, init: I, draw: D) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Sync + Send,
    D: Fn(&mut S, &mut ChaCha8Rng) -> R + Sync + Send,
{
    (0..n_samples)
        .into_par_iter()
        .map_init(init, |scratch, i| {
            let mut rng = sample_rng(seed, i as u64);
            draw(scratch, &mut rng)
        })
        .collect()
}

pub(crate) fn kv(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}
