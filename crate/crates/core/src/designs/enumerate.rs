//! Exact design probabilities for tiny populations by enumerating all
//! `2^N` samples.

use super::{ConditionalPoisson, DesignKind, InclusionProbs};
use crate::error::{Error, Result};

pub const ENUMERATION_LIMIT: usize = 12;

/// Number of Simpson panels used to integrate Pareto sample probabilities.
const PARETO_PANELS: usize = 4000;

/// Exact probability of every sample `D_N`, indexed by bit mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMass {
    units: usize,
    probs: Vec<f64>,
}

impl DesignMass {
    pub fn units(&self) -> usize {
        self.units
    }

    pub fn probability(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `-sum P log P`.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// `sum (sqrt P - sqrt R)^2` over all samples.
    pub fn hellinger(&self, other: &DesignMass) -> Result<f64> {
        if self.units != other.units {
            return Err(Error::InvalidArgument("designs over different populations".into()));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, r)| (p.sqrt() - r.sqrt()).powi(2))
            .sum())
    }

    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        let mut pi = vec![0.0; self.units];
        for (mask, p) in self.probs.iter().enumerate() {
            for (i, v) in pi.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    *v += p;
                }
            }
        }
        pi
    }

    /// Distance to the rejective design with the same inclusion probabilities.
    pub fn hellinger_to_rejective(&self) -> Result<f64> {
        let pi = self.inclusion_probabilities();
        let n = pi.iter().sum::<f64>().round() as usize;
        let total: f64 = pi.iter().sum();
        let pi: Vec<f64> = pi.iter().map(|p| (p * n as f64 / total).clamp(f64::MIN_POSITIVE, 1.0)).collect();
        let r = enumerate_design(DesignKind::ConditionalPoisson, &InclusionProbs::new(pi, n)?)?;
        self.hellinger(&r)
    }
}

/// Exact mass function of `kind` with first-order probabilities `pi`.
///
/// SRS uses only the sample size; conditional Poisson is calibrated to `pi`
/// exactly; Pareto probabilities come from a one-dimensional integral over
/// the order statistics of the ranking variables.
pub fn enumerate_design(kind: DesignKind, pi: &InclusionProbs) -> Result<DesignMass> {
    let units = pi.population_size();
    if units > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit { size: units, limit: ENUMERATION_LIMIT });
    }
    let n = pi.sample_size();
    let all = 1usize << units;
    let mut probs = vec![0.0; all];
    match kind {
        DesignKind::Srs => {
            let count = (0..all).filter(|m| m.count_ones() as usize == n).count() as f64;
            for (m, p) in probs.iter_mut().enumerate() {
                if m.count_ones() as usize == n {
                    *p = 1.0 / count;
                }
            }
        }
        DesignKind::Poisson => {
            for (m, p) in probs.iter_mut().enumerate() {
                *p = poisson_mass(pi.values(), m);
            }
        }
        DesignKind::ConditionalPoisson => {
            let cp = ConditionalPoisson::calibrate(pi)?;
            let w = cp.working_probabilities();
            let mut total = 0.0;
            for (m, p) in probs.iter_mut().enumerate() {
                if m.count_ones() as usize == n {
                    *p = poisson_mass(w, m);
                    total += *p;
                }
            }
            probs.iter_mut().for_each(|p| *p /= total);
        }
        DesignKind::Pareto => {
            for (m, p) in probs.iter_mut().enumerate() {
                if m.count_ones() as usize == n {
                    *p = pareto_sample_probability(pi.values(), m);
                }
            }
        }
    }
    Ok(DesignMass { units, probs })
}

fn poisson_mass(p: &[f64], mask: usize) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i, &q)| if mask >> i & 1 == 1 { q } else { 1.0 - q })
        .product()
}

/// P(the n smallest ranking variables are exactly the units in `mask`).
///
/// With `theta_i = pi_i / (1 - pi_i)` the ranking variable `Q_i` has
/// `P(Q_i <= q) = q theta_i / (1 + q theta_i)`. Substituting
/// `q = u / (1 - u)` gives `G_i(u) = theta_i u / (1 - u + theta_i u)` on
/// [0, 1], and the probability is
/// `int_0^1 d/du[prod_{i in s} G_i(u)] prod_{j not in s} (1 - G_j(u)) du`.
fn pareto_sample_probability(pi: &[f64], mask: usize) -> f64 {
    let theta: Vec<f64> = pi.iter().map(|&p| if p >= 1.0 { f64::INFINITY } else { p / (1.0 - p) }).collect();
    let integrand = |u: f64| -> f64 {
        let mut inside = 1.0;
        let mut log_deriv_terms = 0.0;
        let mut outside = 1.0;
        for (i, &th) in theta.iter().enumerate() {
            let (g, dg) = if th.is_infinite() {
                (if u > 0.0 { 1.0 } else { 0.0 }, 0.0)
            } else {
                let den = 1.0 - u + th * u;
                (th * u / den, th / (den * den))
            };
            if mask >> i & 1 == 1 {
                inside *= g;
                if g > 0.0 {
                    log_deriv_terms += dg / g;
                }
            } else {
                outside *= 1.0 - g;
            }
        }
        // d/du prod G = prod G * sum G'/G (valid for u > 0)
        inside * log_deriv_terms * outside
    };
    let h = 1.0 / PARETO_PANELS as f64;
    let mut sum = 0.0;
    for k in 0..=PARETO_PANELS {
        let u = k as f64 * h;
        let w = if k == 0 || k == PARETO_PANELS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = if u == 0.0 { integrand(1e-300).max(0.0) } else { integrand(u) };
        sum += w * f;
    }
    sum * h / 3.0
}
