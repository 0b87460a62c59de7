//! Triplet loss, the norm-ordering (directional) term, and their gradients.
//!
//! `L_e = [m + |a - p|² - |a - n|²]₊` pulls the anchor toward the positive
//! and away from the negative. The directional term compares embedding norms
//! with the score ordering of anchor and negative:
//!
//! * hinge form (default): if `S(n) > S(a)`, `[|a| - |n| + m̃]₊`; if
//!   `S(n) < S(a)`, `[|n| - |a| + m̃]₊`; zero on ties.
//! * literal form: `sign(S(n) - S(a)) · [|a| - |n| + m̃]₊`. With a negative
//!   sign this is unbounded below in `|a|`.
//!
//! A hinge `[x]₊` is active only for `x > 0`; at the kink its subgradient is
//! zero. The gradient of `|v|` at `v = 0` is the zero vector.

use serde::{Deserialize, Serialize};

use crate::data::Score;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin_m: f64,
    pub margin_md: f64,
    pub directional_enabled: bool,
    pub literal_sign_form: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin_m: 0.2,
            margin_md: 0.1,
            directional_enabled: true,
            literal_sign_form: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin_m.is_finite() && self.margin_m > 0.0) {
            return Err(Error::Config(format!(
                "triplet margin must be finite and > 0, got {}",
                self.margin_m
            )));
        }
        if !(self.margin_md.is_finite() && self.margin_md >= 0.0) {
            return Err(Error::Config(format!(
                "directional margin must be finite and >= 0, got {}",
                self.margin_md
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletLossResult {
    pub l_e: f64,
    pub l_d: f64,
    pub total: f64,
    pub grad_a: Vec<f64>,
    pub grad_p: Vec<f64>,
    pub grad_n: Vec<f64>,
}

fn check_dims(expected: usize, others: &[&[f64]]) -> Result<()> {
    for v in others {
        if v.len() != expected {
            return Err(Error::Shape {
                expected,
                found: v.len(),
            });
        }
    }
    Ok(())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Euclidean distance between two embeddings.
pub fn distance(phi_i: &[f64], phi_j: &[f64]) -> Result<f64> {
    check_dims(phi_i.len(), &[phi_j])?;
    Ok(squared_distance(phi_i, phi_j).sqrt())
}

pub fn triplet_loss(phi_a: &[f64], phi_p: &[f64], phi_n: &[f64], margin: f64) -> Result<f64> {
    check_dims(phi_a.len(), &[phi_p, phi_n])?;
    let x = margin + squared_distance(phi_a, phi_p) - squared_distance(phi_a, phi_n);
    Ok(x.max(0.0))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Directional term value together with `(dL/d|a|, dL/d|n|)`.
fn directional_parts(
    norm_a: f64,
    norm_n: f64,
    score_a: f64,
    score_n: f64,
    md: f64,
    literal: bool,
) -> (f64, f64, f64) {
    if literal {
        let s = sign(score_n - score_a);
        let h = norm_a - norm_n + md;
        if s == 0.0 || h <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        return (s * h, s, -s);
    }
    if score_n > score_a {
        let h = norm_a - norm_n + md;
        if h > 0.0 {
            return (h, 1.0, -1.0);
        }
    } else if score_n < score_a {
        let h = norm_n - norm_a + md;
        if h > 0.0 {
            return (h, -1.0, 1.0);
        }
    }
    (0.0, 0.0, 0.0)
}

pub fn directional_loss(
    phi_a: &[f64],
    phi_n: &[f64],
    score_a: Score,
    score_n: Score,
    md: f64,
    literal: bool,
) -> Result<f64> {
    check_dims(phi_a.len(), &[phi_n])?;
    let (v, _, _) = directional_parts(
        norm(phi_a),
        norm(phi_n),
        score_a.value(),
        score_n.value(),
        md,
        literal,
    );
    Ok(v)
}

/// `L_e + L_d` with exact gradients for each embedding.
pub fn directional_triplet_loss(
    phi_a: &[f64],
    phi_p: &[f64],
    phi_n: &[f64],
    score_a: Score,
    score_n: Score,
    config: &LossConfig,
) -> Result<TripletLossResult> {
    let d = phi_a.len();
    check_dims(d, &[phi_p, phi_n])?;
    let mut grad_a = vec![0.0; d];
    let mut grad_p = vec![0.0; d];
    let mut grad_n = vec![0.0; d];

    let x = config.margin_m + squared_distance(phi_a, phi_p) - squared_distance(phi_a, phi_n);
    let l_e = x.max(0.0);
    if x > 0.0 {
        for i in 0..d {
            grad_a[i] = 2.0 * (phi_n[i] - phi_p[i]);
            grad_p[i] = 2.0 * (phi_p[i] - phi_a[i]);
            grad_n[i] = 2.0 * (phi_a[i] - phi_n[i]);
        }
    }

    let mut l_d = 0.0;
    if config.directional_enabled {
        let (na, nn) = (norm(phi_a), norm(phi_n));
        let (v, da, dn) = directional_parts(
            na,
            nn,
            score_a.value(),
            score_n.value(),
            config.margin_md,
            config.literal_sign_form,
        );
        l_d = v;
        if da != 0.0 && na > 0.0 {
            for (g, x) in grad_a.iter_mut().zip(phi_a) {
                *g += da * x / na;
            }
        }
        if dn != 0.0 && nn > 0.0 {
            for (g, x) in grad_n.iter_mut().zip(phi_n) {
                *g += dn * x / nn;
            }
        }
    }

    Ok(TripletLossResult {
        l_e,
        l_d,
        total: l_e + l_d,
        grad_a,
        grad_p,
        grad_n,
    })
}
