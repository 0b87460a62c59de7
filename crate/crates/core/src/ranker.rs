//! Space-to-scale projection and ranking evaluation.
//!
//! The projection score of an embedding is its Euclidean norm. Collections
//! are ranked by descending projection score with ties broken by ascending
//! id.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use crate::data::Dataset;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::loss::norm;

pub fn projection_score(phi: &[f64]) -> f64 {
    norm(phi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    /// Sorts `(id, score)` pairs by descending score, then ascending id.
    pub fn from_scores(mut entries: Vec<(String, f64)>) -> Self {
        entries.sort_by(|(ia, sa), (ib, sb)| sb.total_cmp(sa).then_with(|| ia.cmp(ib)));
        RankedList { entries }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "rank,id,score")?;
        for (i, (id, s)) in self.entries.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, id, s)?;
        }
        Ok(())
    }
}

/// Projection score of every record, in dataset order.
pub fn embed_scores(params: &EncoderParams, dataset: &Dataset) -> Result<Vec<f64>> {
    if let Some(d) = dataset.d_in() {
        if d != params.d_in() {
            return Err(Error::Config(format!(
                "dataset has {d} features but the encoder expects {}",
                params.d_in()
            )));
        }
    }
    dataset
        .records()
        .iter()
        .map(|r| {
            params
                .forward(&r.features)
                .map(|phi| projection_score(&phi))
        })
        .collect()
}

pub fn rank_collection(params: &EncoderParams, dataset: &Dataset) -> Result<RankedList> {
    let scores = embed_scores(params, dataset)?;
    Ok(RankedList::from_scores(
        dataset
            .records()
            .iter()
            .zip(scores)
            .map(|(r, s)| (r.id.clone(), s))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementRow {
    pub delta: f64,
    pub pairs: u64,
    /// `None` when no pair is farther apart than `delta`.
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementTable {
    pub rows: Vec<AgreementRow>,
}

impl AgreementTable {
    pub fn agreement_at(&self, delta: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.delta == delta)
            .and_then(|r| r.agreement)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "delta,pairs,agreement")?;
        for r in &self.rows {
            match r.agreement {
                Some(a) => writeln!(w, "{},{},{}", r.delta, r.pairs, a)?,
                None => writeln!(w, "{},{},NA", r.delta, r.pairs)?,
            }
        }
        Ok(())
    }
}

/// For each threshold, the fraction of pairs with `|true_i - true_j| > delta`
/// whose projection scores are ordered the same way. Projection ties count
/// as disagreement.
pub fn pairwise_agreement(
    projection_scores: &[f64],
    true_scores: &[f64],
    thresholds: &[f64],
) -> Result<AgreementTable> {
    if projection_scores.len() != true_scores.len() {
        return Err(Error::Shape {
            expected: true_scores.len(),
            found: projection_scores.len(),
        });
    }
    if true_scores.len() < 2 {
        return Err(Error::Input(
            "pairwise agreement needs at least 2 items".into(),
        ));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input(
            "thresholds must be strictly increasing".into(),
        ));
    }
    if thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Input("thresholds must lie in (0, 1)".into()));
    }

    let mut pairs = vec![0u64; thresholds.len()];
    let mut agree = vec![0u64; thresholds.len()];
    let n = true_scores.len();
    for i in 0..n {
        for j in i + 1..n {
            let dt = true_scores[i] - true_scores[j];
            let dp = projection_scores[i] - projection_scores[j];
            let ok = (dt > 0.0 && dp > 0.0) || (dt < 0.0 && dp < 0.0);
            let gap = dt.abs();
            // thresholds ascend, so the qualifying ones form a prefix
            for (k, t) in thresholds.iter().enumerate() {
                if gap <= *t {
                    break;
                }
                pairs[k] += 1;
                agree[k] += ok as u64;
            }
        }
    }
    Ok(AgreementTable {
        rows: thresholds
            .iter()
            .zip(pairs.iter().zip(&agree))
            .map(|(&delta, (&p, &a))| AgreementRow {
                delta,
                pairs: p,
                agreement: (p > 0).then(|| a as f64 / p as f64),
            })
            .collect(),
    })
}

/// `(concordant - discordant) / C(n, 2)` over all pairs of items.
pub fn kendall_tau<T: Eq + Hash>(order_a: &[T], order_b: &[T]) -> Result<f64> {
    let n = order_a.len();
    if n != order_b.len() {
        return Err(Error::Input(format!(
            "orders have different lengths ({n} vs {})",
            order_b.len()
        )));
    }
    if n < 2 {
        return Err(Error::Input("Kendall tau needs at least 2 items".into()));
    }
    let pos_b: HashMap<&T, usize> = order_b.iter().enumerate().map(|(i, id)| (id, i)).collect();
    if pos_b.len() != n {
        return Err(Error::Input("duplicate ids in ordering".into()));
    }
    let ranks: Vec<usize> = order_a
        .iter()
        .map(|id| {
            pos_b
                .get(id)
                .copied()
                .ok_or_else(|| Error::Input("orders contain different ids".into()))
        })
        .collect::<Result<_>>()?;
    let mut score: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            score += if ranks[i] < ranks[j] { 1 } else { -1 };
        }
    }
    let total = (n * (n - 1) / 2) as f64;
    Ok(score as f64 / total)
}
