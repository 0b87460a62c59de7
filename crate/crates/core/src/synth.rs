//! Synthetic datasets with a known latent score.
//!
//! For each record a latent score `s` is drawn uniformly on `[0, 1)`, a view
//! count `V` log-uniformly in the configured range, and the fave count is set
//! to `max(1, round(V^s))` so that `ln F / ln V` recovers `s` up to integer
//! rounding. Features are a seeded linear mix of the nonlinear basis
//! `[s, s², s³, sin 2πs, cos 2πs]` plus Gaussian noise.
//!
//! Stream layout (ChaCha8, `seed_from_u64(seed)`): first the `d_in × 5`
//! mixing matrix in row-major order, then per record `s`, the view draw, and
//! `d_in` noise draws. Normals come from `rand_distr::StandardNormal`.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::rng;

pub const BASIS_DIM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub d_in: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub view_range: (u64, u64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 2000,
            d_in: 16,
            noise_sigma: 0.05,
            seed: 0,
            view_range: (1000, 1_000_000),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.d_in < 2 {
            return Err(Error::Config("d_in must be at least 2".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        let (lo, hi) = self.view_range;
        if lo < 100 {
            return Err(Error::Config(
                "view range lower bound must be >= 100".into(),
            ));
        }
        if lo >= hi {
            return Err(Error::Config("view range must satisfy lo < hi".into()));
        }
        Ok(())
    }

    /// Worst-case `|ln F / ln V - s|` caused by rounding `V^s` to an integer.
    pub fn rounding_bound(&self) -> f64 {
        2f64.ln() / (self.view_range.0 as f64).ln()
    }
}

/// Generated dataset together with the mixing matrix that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// `d_in` rows of length [`BASIS_DIM`], each of unit norm.
    pub mixing: Vec<[f64; BASIS_DIM]>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a SynthConfig,
    rng: &'static str,
    mixing_matrix: &'a [[f64; BASIS_DIM]],
}

impl Synthetic {
    /// Writes the config and mixing matrix as JSON.
    pub fn write_sidecar(&self, config: &SynthConfig, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let sidecar = Sidecar {
            config,
            rng: "ChaCha8Rng::seed_from_u64",
            mixing_matrix: &self.mixing,
        };
        serde_json::to_writer_pretty(BufWriter::new(file), &sidecar)?;
        Ok(())
    }
}

pub fn basis(s: f64) -> [f64; BASIS_DIM] {
    [s, s * s, s * s * s, (TAU * s).sin(), (TAU * s).cos()]
}

pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);

    let mixing: Vec<[f64; BASIS_DIM]> = (0..config.d_in)
        .map(|_| {
            let mut row = [0.0; BASIS_DIM];
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.map(|v| v / norm)
        })
        .collect();

    let (lo, hi) = config.view_range;
    let (log_lo, log_hi) = ((lo as f64).ln(), ((hi + 1) as f64).ln());
    let width = (config.n.max(2) - 1).to_string().len().max(6);

    let mut dataset = Dataset::new();
    for i in 0..config.n {
        let s: f64 = rng.random();
        let u: f64 = rng.random_range(log_lo..log_hi);
        let views = (u.exp().floor() as u64).clamp(lo, hi);
        let faves = ((views as f64).powf(s).round() as u64).clamp(1, views);

        let b = basis(s);
        let features = mixing
            .iter()
            .map(|row| {
                let clean: f64 = row.iter().zip(&b).map(|(m, x)| m * x).sum();
                let eps: f64 = rng.sample(StandardNormal);
                clean + config.noise_sigma * eps
            })
            .collect();

        dataset.push(ImageRecord {
            id: format!("img{i:0width$}"),
            views,
            faves,
            features,
            latent_score: Some(s),
        })?;
    }
    Ok(Synthetic { dataset, mixing })
}
