//! Maxwell-Boltzmann shaping: `P(c) ∝ exp(-λ |c|²)` on a fixed constellation.
//!
//! `λ` is defined on the un-normalized grid (odd integers for square QAM), so
//! it does not depend on the power normalization of the points.

use crate::signal::{Constellation, ConstellationKind};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MbDistribution {
    lambda: f64,
    /// Base points re-weighted by the MB probabilities and renormalized.
    constellation: Constellation,
}

impl MbDistribution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn probabilities(&self) -> &[f64] {
        self.constellation.probabilities()
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn entropy(&self) -> f64 {
        self.constellation.entropy()
    }

    /// Distribution of the per-dimension amplitude `|a|` for `a = 1, 3, ...`
    /// (square QAM only: the 2D MB law factorizes over the two dimensions).
    pub fn amplitude_distribution(&self) -> Option<Vec<f64>> {
        let levels = self.constellation.pam_levels()?;
        let weights: Vec<f64> = (0..levels / 2)
            .map(|i| {
                let a = (2 * i + 1) as f64;
                (-self.lambda * (a * a - 1.0)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        Some(weights.into_iter().map(|w| w / total).collect())
    }
}

fn grid_energies(base: &Constellation) -> Vec<f64> {
    let s = base.grid_scale();
    base.points().iter().map(|c| (c / s).norm_sqr()).collect()
}

fn weights(energies: &[f64], lambda: f64) -> Vec<f64> {
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-lambda * (e - e_min)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|v| **v > 0.0).map(|v| -v * v.log2()).sum()
}

pub fn mb_distribution(base: &Constellation, lambda: f64) -> Result<MbDistribution> {
    if base.kind() != ConstellationKind::Discrete {
        return Err(Error::Config("MB shaping needs a discrete constellation".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config("MB rate parameter must be non-negative".into()));
    }
    let p = weights(&grid_energies(base), lambda);
    Ok(MbDistribution {
        lambda,
        constellation: base.with_probabilities(p)?,
    })
}

/// Bisection on `λ` for the MB law whose entropy equals `target_entropy` bits.
pub fn mb_fit(base: &Constellation, target_entropy: f64) -> Result<MbDistribution> {
    if base.kind() != ConstellationKind::Discrete {
        return Err(Error::Config("MB shaping needs a discrete constellation".into()));
    }
    let energies = grid_energies(base);
    let h_max = (base.size() as f64).log2();
    if target_entropy > h_max + 1e-12 {
        return Err(Error::Infeasible(format!(
            "target entropy {target_entropy} exceeds log2(M) = {h_max}"
        )));
    }
    if target_entropy >= h_max {
        return mb_distribution(base, 0.0);
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let inner = energies.iter().filter(|e| (**e - e_min).abs() < 1e-9).count();
    let h_min = (inner as f64).log2();
    if target_entropy <= h_min {
        return Err(Error::Infeasible(format!(
            "target entropy {target_entropy} is not above the lambda -> infinity limit {h_min}"
        )));
    }
    let h = |lambda: f64| entropy_bits(&weights(&energies, lambda));
    let mut lo = 0.0;
    let mut hi = 1.0;
    while h(hi) > target_entropy {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > target_entropy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mb_distribution(base, 0.5 * (lo + hi))
}
