//! Inverse link functions and their curvature constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Identity,
    Logistic,
}

impl std::str::FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(LinkKind::Identity),
            "logistic" => Ok(LinkKind::Logistic),
            other => Err(Error::UnsupportedLink(other.to_string())),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᶻ)`, the logistic log-partition function.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Inverse link `μ` together with the constants the confidence sets need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub kind: LinkKind,
    /// Lipschitz constant of `μ`.
    pub k_mu: f64,
    /// `inf μ′` over feasible scores `|xᵀθ| ≤ L·S`.
    pub c_mu: f64,
    pub s: f64,
    pub l: f64,
    /// Upper bound on rewards.
    pub m: f64,
}

impl LinkModel {
    pub fn new(kind: LinkKind, s: f64, l: f64) -> Result<Self> {
        let (k_mu, m) = match kind {
            LinkKind::Identity => (1.0, 1.0),
            LinkKind::Logistic => (0.25, 1.0),
        };
        Ok(Self {
            kind,
            k_mu,
            c_mu: compute_c_mu(kind, s, l)?,
            s,
            l,
            m,
        })
    }

    pub fn mu(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => z,
            LinkKind::Logistic => sigmoid(z),
        }
    }

    pub fn mu_prime(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    pub fn mu_second(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 0.0,
            LinkKind::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    /// Primitive of `μ`, so that the score equation is the gradient of a
    /// strongly convex loss.
    pub(crate) fn mu_primitive(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 0.5 * z * z,
            LinkKind::Logistic => softplus(z),
        }
    }
}

/// `c_μ = inf_{|z| ≤ LS} μ′(z)`.
///
/// `μ′` of the logistic link is symmetric and decreasing in `|z|`, so the
/// infimum sits at `|z| = L·S`.
pub fn compute_c_mu(kind: LinkKind, s: f64, l: f64) -> Result<f64> {
    if !(s > 0.0 && l > 0.0) {
        return Err(Error::Config(format!("S={s} and L={l} must be positive")));
    }
    Ok(match kind {
        LinkKind::Identity => 1.0,
        LinkKind::Logistic => {
            let p = sigmoid(l * s);
            p * (1.0 - p)
        }
    })
}
