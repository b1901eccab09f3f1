//! Frobenius and DURA penalties for a single triple, with gradients.
//!
//! DURA for a bilinear model is `‖h‖² + ‖Rt‖² + ‖t‖² + ‖hᵀR‖²`. Applied to the
//! homogeneous STaR matrix it expands to
//!
//! ```text
//! ‖h‖² + ‖t‖² + ‖hᵀR_c + τᵀ‖² + ‖R_c t‖² + (τ·t)² + 2 τ·t + 4
//! ```
//!
//! [`DuraVariant::Exact`] is that expansion minus the constant. The commonly
//! quoted expansion keeps only a single `τ·t` cross term and no square; it is
//! available as [`DuraVariant::Literal`] and is the default.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{backprop_query, query_vector, Relation, ScoreGradient};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    #[default]
    None,
    Fro,
    Dura,
}

impl FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(RegKind::None),
            "fro" | "frobenius" => Ok(RegKind::Fro),
            "dura" => Ok(RegKind::Dura),
            _ => Err(Error::config(
                "reg.kind",
                format!("unknown regularizer '{s}' (expected none, fro or dura)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuraVariant {
    #[default]
    Literal,
    Exact,
}

impl FromStr for DuraVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "literal" => Ok(DuraVariant::Literal),
            "exact" => Ok(DuraVariant::Exact),
            _ => Err(Error::config(
                "reg.dura_variant",
                format!("unknown DURA variant '{s}' (expected literal or exact)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    pub kind: RegKind,
    pub lambda: f64,
    #[serde(default)]
    pub dura_variant: DuraVariant,
}

impl RegConfig {
    pub fn none() -> Self {
        RegConfig::default()
    }

    pub fn fro(lambda: f64) -> Self {
        RegConfig {
            kind: RegKind::Fro,
            lambda,
            dura_variant: DuraVariant::Literal,
        }
    }

    pub fn dura(lambda: f64, variant: DuraVariant) -> Self {
        RegConfig {
            kind: RegKind::Dura,
            lambda,
            dura_variant: variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("reg.lambda", "must be a finite value >= 0"));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.kind != RegKind::None && self.lambda > 0.0
    }

    /// Unweighted penalty of one triple (λ is not applied).
    pub fn penalty(&self, h: &[f64], rel: Relation<'_>, t: &[f64]) -> f64 {
        match self.kind {
            RegKind::None => 0.0,
            RegKind::Fro => fro_penalty(h, rel, t),
            RegKind::Dura => dura_penalty(h, rel, t, self.dura_variant),
        }
    }

    /// Unweighted penalty and its gradient.
    pub fn penalty_with_grad(&self, h: &[f64], rel: Relation<'_>, t: &[f64]) -> (f64, ScoreGradient) {
        match self.kind {
            RegKind::None => {
                let n = h.len();
                (
                    0.0,
                    ScoreGradient {
                        d_h: vec![0.0; n],
                        d_t: vec![0.0; n],
                        d_r_c: vec![0.0; n],
                        d_tau: vec![0.0; n],
                    },
                )
            }
            RegKind::Fro => (fro_penalty(h, rel, t), fro_gradient(h, rel, t)),
            RegKind::Dura => {
                let v = self.dura_variant;
                (dura_penalty(h, rel, t, v), dura_gradient(h, rel, t, v))
            }
        }
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖h‖² + ‖t‖² + ‖r_c‖² + ‖τ‖²`.
pub fn fro_penalty(h: &[f64], rel: Relation<'_>, t: &[f64]) -> f64 {
    sq(h) + sq(t) + sq(rel.r_c) + sq(rel.tau)
}

pub fn fro_gradient(h: &[f64], rel: Relation<'_>, t: &[f64]) -> ScoreGradient {
    let twice = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
    ScoreGradient {
        d_h: twice(h),
        d_t: twice(t),
        d_r_c: twice(rel.r_c),
        d_tau: twice(rel.tau),
    }
}

/// `‖R_c t‖²`, which factorises per block as `(r1² + r2²)(t1² + t2²)`.
fn rotated_tail_sq(rel: Relation<'_>, t: &[f64]) -> f64 {
    (0..t.len() / 2)
        .map(|k| {
            let (i, j) = (2 * k, 2 * k + 1);
            (rel.r_c[i].powi(2) + rel.r_c[j].powi(2)) * (t[i].powi(2) + t[j].powi(2))
        })
        .sum()
}

pub fn dura_penalty(h: &[f64], rel: Relation<'_>, t: &[f64], variant: DuraVariant) -> f64 {
    let q = query_vector(h, rel);
    let tau_t = dot(rel.tau, t);
    let cross = match variant {
        DuraVariant::Literal => tau_t,
        DuraVariant::Exact => tau_t * tau_t + 2.0 * tau_t,
    };
    sq(h) + sq(t) + sq(&q) + rotated_tail_sq(rel, t) + cross
}

pub fn dura_gradient(h: &[f64], rel: Relation<'_>, t: &[f64], variant: DuraVariant) -> ScoreGradient {
    let n = h.len();
    let q = query_vector(h, rel);
    let mut g = ScoreGradient {
        d_h: h.iter().map(|x| 2.0 * x).collect(),
        d_t: t.iter().map(|x| 2.0 * x).collect(),
        d_r_c: vec![0.0; n],
        d_tau: vec![0.0; n],
    };
    let d_q: Vec<f64> = q.iter().map(|x| 2.0 * x).collect();
    backprop_query(&d_q, h, rel, &mut g.d_h, &mut g.d_r_c, &mut g.d_tau);
    for k in 0..n / 2 {
        let (i, j) = (2 * k, 2 * k + 1);
        let r_sq = rel.r_c[i].powi(2) + rel.r_c[j].powi(2);
        let t_sq = t[i].powi(2) + t[j].powi(2);
        g.d_t[i] += 2.0 * r_sq * t[i];
        g.d_t[j] += 2.0 * r_sq * t[j];
        g.d_r_c[i] += 2.0 * rel.r_c[i] * t_sq;
        g.d_r_c[j] += 2.0 * rel.r_c[j] * t_sq;
    }
    let coeff = match variant {
        DuraVariant::Literal => 1.0,
        DuraVariant::Exact => 2.0 * dot(rel.tau, t) + 2.0,
    };
    for (d, &x) in g.d_tau.iter_mut().zip(t) {
        *d += coeff * x;
    }
    for (d, &x) in g.d_t.iter_mut().zip(rel.tau) {
        *d += coeff * x;
    }
    g
}
