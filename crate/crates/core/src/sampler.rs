//! Rejection sampling of score-constrained triplets.
//!
//! A triplet `(a, p, n)` is admissible when
//!
//! ```text
//! alpha < |S(a) - S(p)| / |S_ref - S(n)| < beta
//! ```
//!
//! where `S_ref` is the pair mean `(S(a) + S(p)) / 2` by default, or `S(a)`
//! with [`PairRef::Anchor`]. Both inequalities are strict and a zero
//! denominator is a rejection.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Score;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_PROPOSAL_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRef {
    #[default]
    Mean,
    Anchor,
}

impl std::str::FromStr for PairRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PairRef::Mean),
            "anchor" => Ok(PairRef::Anchor),
            other => Err(Error::Config(format!(
                "pair-ref must be `mean` or `anchor`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for PairRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairRef::Mean => "mean",
            PairRef::Anchor => "anchor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub pair_ref: PairRef,
    /// Proposals allowed per `sample` call before reporting starvation.
    pub budget: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            alpha: 0.25,
            beta: 0.75,
            seed: 0,
            pair_ref: PairRef::Mean,
            budget: DEFAULT_PROPOSAL_BUDGET,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha < self.beta) || self.alpha.is_nan() {
            return Err(Error::Config(format!(
                "sampler window needs 0 <= alpha < beta, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.budget == 0 {
            return Err(Error::Config("proposal budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SamplerStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub a: usize,
    pub p: usize,
    pub n: usize,
    /// True when the pair reference score exceeds `S(n)`.
    pub pair_above: bool,
    pub ratio: f64,
}

/// Ratio and `pair_above` flag for an ordered triple, or `None` when the
/// denominator is zero.
pub fn triplet_ratio(sa: f64, sp: f64, sn: f64, pair_ref: PairRef) -> Option<(f64, bool)> {
    let reference = match pair_ref {
        PairRef::Mean => 0.5 * (sa + sp),
        PairRef::Anchor => sa,
    };
    let den = (reference - sn).abs();
    if den == 0.0 {
        return None;
    }
    Some(((sa - sp).abs() / den, reference > sn))
}

/// Triplet sampler owning its RNG stream and acceptance counters.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: SamplerConfig,
    rng: rng::Rng,
    stats: SamplerStats,
}

impl Sampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Sampler {
            config,
            rng: rng::seeded(config.seed),
            stats: SamplerStats::default(),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn stats(&self) -> SamplerStats {
        self.stats
    }

    /// Uniform ordered triple of distinct indices in `0..n`.
    fn propose(&mut self, n: usize) -> (usize, usize, usize) {
        let a = self.rng.random_range(0..n);
        let mut p = self.rng.random_range(0..n - 1);
        if p >= a {
            p += 1;
        }
        let (lo, hi) = if a < p { (a, p) } else { (p, a) };
        let mut k = self.rng.random_range(0..n - 2);
        if k >= lo {
            k += 1;
        }
        if k >= hi {
            k += 1;
        }
        (a, p, k)
    }

    /// Draws proposals until one lands strictly inside `(alpha, beta)`.
    pub fn sample(&mut self, scores: &[Score]) -> Result<Triplet> {
        if scores.len() < 3 {
            return Err(Error::Input(format!(
                "triplet sampling needs at least 3 records, got {}",
                scores.len()
            )));
        }
        let SamplerConfig {
            alpha,
            beta,
            pair_ref,
            budget,
            ..
        } = self.config;
        for _ in 0..budget {
            let (a, p, n) = self.propose(scores.len());
            self.stats.proposed += 1;
            let Some((ratio, pair_above)) = triplet_ratio(
                scores[a].value(),
                scores[p].value(),
                scores[n].value(),
                pair_ref,
            ) else {
                continue;
            };
            if alpha < ratio && ratio < beta {
                self.stats.accepted += 1;
                return Ok(Triplet {
                    a,
                    p,
                    n,
                    pair_above,
                    ratio,
                });
            }
        }
        Err(Error::SamplerStarvation {
            proposed: self.stats.proposed,
            accepted: self.stats.accepted,
            rate: self.stats.acceptance_rate(),
        })
    }
}

/// Fraction of triplets whose pair sits above the negative.
pub fn balance_fraction(triplets: &[Triplet]) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::EmptyInput("balance fraction of no triplets"));
    }
    let above = triplets.iter().filter(|t| t.pair_above).count();
    Ok(above as f64 / triplets.len() as f64)
}

/// Acceptance rate times the number of ordered distinct triples.
pub fn estimate_cardinality(n_images: usize, stats: SamplerStats) -> f64 {
    let n = n_images as f64;
    stats.acceptance_rate() * n * (n - 1.0) * (n - 2.0)
}

pub fn write_triplets_csv(triplets: &[Triplet], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "a,p,n,pair_above,ratio")?;
    for t in triplets {
        writeln!(w, "{},{},{},{},{}", t.a, t.p, t.n, t.pair_above, t.ratio)?;
    }
    Ok(())
}
