//! Sampling designs with inclusion probabilities proportional to size.

mod conditional_poisson;
mod enumerate;

pub use conditional_poisson::{cp_inclusion_probabilities, ConditionalPoisson};
pub use enumerate::{enumerate_design, DesignMass, ENUMERATION_LIMIT};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// First-order inclusion probabilities summing to the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionProbs {
    pi: Vec<f64>,
    n: usize,
}

impl InclusionProbs {
    /// Wrap probabilities that are already valid: every value in (0, 1] and
    /// the total equal to `n` (relative tolerance 1e-9).
    pub fn new(pi: Vec<f64>, n: usize) -> Result<Self> {
        if pi.is_empty() {
            return invalid("inclusion probabilities must be non-empty");
        }
        if let Some(bad) = pi.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return invalid(format!("inclusion probability {bad} outside (0, 1]"));
        }
        let total: f64 = pi.iter().sum();
        if (total - n as f64).abs() > 1e-9 * (n as f64).max(1.0) {
            return invalid(format!("inclusion probabilities sum to {total}, expected {n}"));
        }
        Ok(InclusionProbs { pi, n })
    }

    pub fn equal(population: usize, n: usize) -> Result<Self> {
        if n == 0 || n > population {
            return invalid(format!("sample size {n} incompatible with population size {population}"));
        }
        Self::new(vec![n as f64 / population as f64; population], n)
    }

    pub fn values(&self) -> &[f64] {
        &self.pi
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn population_size(&self) -> usize {
        self.pi.len()
    }
}

/// `pi_i = n x_i / sum x`, with any value above one clamped to one and the
/// remaining mass rescaled over the unclamped units until all fit.
pub fn inclusion_probs(x: &[f64], n: usize) -> Result<InclusionProbs> {
    let size = x.len();
    if n == 0 || n > size {
        return invalid(format!("sample size {n} incompatible with population size {size}"));
    }
    if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return invalid(format!("size variable must be positive, got {bad}"));
    }
    let mut pi = vec![0.0; size];
    let mut certain = vec![false; size];
    let mut n_certain = 0usize;
    loop {
        let remaining = (n - n_certain) as f64;
        let free_total: f64 = x.iter().zip(&certain).filter(|(_, c)| !**c).map(|(v, _)| v).sum();
        let mut clamped_now = false;
        for i in 0..size {
            if certain[i] {
                pi[i] = 1.0;
                continue;
            }
            let p = remaining * x[i] / free_total;
            if p >= 1.0 {
                certain[i] = true;
                n_certain += 1;
                clamped_now = true;
                pi[i] = 1.0;
            } else {
                pi[i] = p;
            }
        }
        if !clamped_now || n_certain == n {
            break;
        }
    }
    if n_certain == n {
        for (p, c) in pi.iter_mut().zip(&certain) {
            if !c {
                // Nothing left to allocate; keep the unit reachable with a
                // vanishing probability so InclusionProbs stays valid.
                *p = f64::MIN_POSITIVE;
            }
        }
    }
    // Remove rounding drift so the sum is n to machine precision.
    let total: f64 = pi.iter().sum();
    let free: f64 = pi.iter().filter(|p| **p < 1.0).sum();
    if n_certain < n && free > 0.0 {
        let scale = (free + n as f64 - total) / free;
        for p in pi.iter_mut().filter(|p| **p < 1.0) {
            *p *= scale;
        }
    }
    InclusionProbs::new(pi, n)
}

/// Realised inclusion indicators of a draw.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SampleIndicator {
    d: Vec<bool>,
}

impl SampleIndicator {
    pub fn new(d: Vec<bool>) -> Self {
        SampleIndicator { d }
    }

    pub fn from_indices(population: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut d = vec![false; population];
        for i in idx {
            d[i] = true;
        }
        SampleIndicator { d }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.d
    }

    pub fn size(&self) -> usize {
        self.d.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.d.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    /// Bit mask of the draw (unit `i` is bit `i`); only for tiny populations.
    pub fn mask(&self) -> u64 {
        debug_assert!(self.d.len() <= 64);
        self.d.iter().enumerate().fold(0, |m, (i, &b)| if b { m | (1 << i) } else { m })
    }
}

/// The sampling designs available for sampling and resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Srs,
    Poisson,
    ConditionalPoisson,
    Pareto,
}

impl DesignKind {
    pub fn fixed_size(&self) -> bool {
        !matches!(self, DesignKind::Poisson)
    }

    pub fn label(&self) -> &'static str {
        match self {
            DesignKind::Srs => "SRS",
            DesignKind::Poisson => "PO",
            DesignKind::ConditionalPoisson => "CP",
            DesignKind::Pareto => "PA",
        }
    }

    /// Draw one sample with the given inclusion probabilities. SRS ignores
    /// the individual values and uses only `n`.
    pub fn draw<R: Rng + ?Sized>(&self, pi: &InclusionProbs, rng: &mut R) -> Result<SampleIndicator> {
        let s = match self {
            DesignKind::Srs => draw_srs(pi.population_size(), pi.sample_size(), rng)?,
            DesignKind::Poisson => draw_poisson(pi, rng),
            DesignKind::ConditionalPoisson => draw_conditional_poisson(pi, rng)?,
            DesignKind::Pareto => draw_pareto(pi, rng)?,
        };
        debug_assert!(!self.fixed_size() || s.size() == pi.sample_size());
        Ok(s)
    }
}

impl std::str::FromStr for DesignKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srs" => Ok(DesignKind::Srs),
            "poisson" | "po" => Ok(DesignKind::Poisson),
            "conditional-poisson" | "cp" | "rejective" => Ok(DesignKind::ConditionalPoisson),
            "pareto" | "pa" => Ok(DesignKind::Pareto),
            other => invalid(format!("unknown design '{other}'")),
        }
    }
}

pub fn draw_srs<R: Rng + ?Sized>(population: usize, n: usize, rng: &mut R) -> Result<SampleIndicator> {
    if n > population {
        return invalid(format!("sample size {n} exceeds population size {population}"));
    }
    Ok(SampleIndicator::from_indices(population, index::sample(rng, population, n)))
}

pub fn draw_poisson<R: Rng + ?Sized>(pi: &InclusionProbs, rng: &mut R) -> SampleIndicator {
    SampleIndicator::new(pi.values().iter().map(|&p| p >= 1.0 || rng.random::<f64>() < p).collect())
}

/// Calibrates working probabilities and draws once. Callers drawing many
/// samples from the same probabilities should keep a [`ConditionalPoisson`].
pub fn draw_conditional_poisson<R: Rng + ?Sized>(pi: &InclusionProbs, rng: &mut R) -> Result<SampleIndicator> {
    ConditionalPoisson::calibrate(pi)?.draw(rng)
}

/// Rosén's Pareto order sampling: rank `Q_i = U_i (1 - pi_i) / ((1 - U_i) pi_i)`
/// and keep the `n` smallest. Units with `pi_i = 1` always enter.
pub fn draw_pareto<R: Rng + ?Sized>(pi: &InclusionProbs, rng: &mut R) -> Result<SampleIndicator> {
    let n = pi.sample_size();
    let size = pi.population_size();
    if n > size {
        return invalid("sample size exceeds population size");
    }
    let mut keys: Vec<(f64, usize)> = pi
        .values()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let u: f64 = rng.random();
            let q = if p >= 1.0 { -1.0 } else { u * (1.0 - p) / ((1.0 - u) * p) };
            (q, i)
        })
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if n < size {
        keys.select_nth_unstable_by(n, by_key);
    }
    Ok(SampleIndicator::from_indices(size, keys[..n].iter().map(|k| k.1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn pps_probabilities() {
        let p = inclusion_probs(&[3.0; 6], 2).unwrap();
        assert_close(p.values(), &[1.0 / 3.0; 6], 1e-15);
        let p = inclusion_probs(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_close(p.values(), &[0.2, 0.4, 0.6, 0.8], 1e-15);
        // 2*10/14 > 1: clamp unit 0, then spread the remaining unit of mass over four.
        let p = inclusion_probs(&[10.0, 1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_close(p.values(), &[1.0, 0.25, 0.25, 0.25, 0.25], 1e-15);
        assert!((p.values().iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pps_errors() {
        assert!(inclusion_probs(&[1.0, 2.0], 3).is_err());
        assert!(inclusion_probs(&[1.0, 0.0], 1).is_err());
        assert!(inclusion_probs(&[1.0, -2.0], 1).is_err());
        assert!(draw_srs(3, 4, &mut SeedStream::new(0).rng()).is_err());
    }

    #[test]
    fn repeated_clamping() {
        let p = inclusion_probs(&[100.0, 50.0, 1.0, 1.0, 1.0, 1.0], 3).unwrap();
        assert_close(p.values(), &[1.0, 1.0, 0.25, 0.25, 0.25, 0.25], 1e-15);
    }

    #[test]
    fn census_and_certainty() {
        let mut rng = SeedStream::new(1).rng();
        assert_eq!(draw_srs(7, 7, &mut rng).unwrap().size(), 7);
        let all = InclusionProbs::new(vec![1.0; 5], 5).unwrap();
        assert!(draw_poisson(&all, &mut rng).as_slice().iter().all(|b| *b));
    }

    #[test]
    fn srs_is_uniform_over_subsets() {
        let mut rng = SeedStream::new(2).rng();
        let draws = 100_000;
        let mut unit = [0usize; 5];
        let mut subsets = std::collections::HashMap::new();
        for _ in 0..draws {
            let s = draw_srs(5, 2, &mut rng).unwrap();
            for i in s.indices() {
                unit[i] += 1;
            }
            *subsets.entry(s.mask()).or_insert(0usize) += 1;
        }
        assert_eq!(subsets.len(), 10);
        for c in unit {
            assert!((c as f64 / draws as f64 - 0.4).abs() < 0.01);
        }
        for c in subsets.values() {
            assert!((*c as f64 / draws as f64 - 0.1).abs() < 0.01);
        }
    }

    #[test]
    fn poisson_marginals_and_independence() {
        let pi = InclusionProbs::new(vec![0.2, 0.4, 0.6, 0.8], 2).unwrap();
        let mut rng = SeedStream::new(3).rng();
        let draws = 100_000;
        let mut sum = [0.0; 4];
        let mut cross = [[0.0; 4]; 4];
        for _ in 0..draws {
            let d = draw_poisson(&pi, &mut rng);
            let v: Vec<f64> = d.as_slice().iter().map(|&b| b as u8 as f64).collect();
            for i in 0..4 {
                sum[i] += v[i];
                for j in 0..4 {
                    cross[i][j] += v[i] * v[j];
                }
            }
        }
        let m: Vec<f64> = sum.iter().map(|s| s / draws as f64).collect();
        assert_close(&m, pi.values(), 0.01);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let cov = cross[i][j] / draws as f64 - m[i] * m[j];
                    assert!(cov.abs() < 0.01);
                }
            }
        }
    }

    #[test]
    fn pareto_fixed_size_and_exchangeable() {
        let pi = InclusionProbs::equal(5, 2).unwrap();
        let mut rng = SeedStream::new(4).rng();
        let mut subsets = std::collections::HashMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            let s = draw_pareto(&pi, &mut rng).unwrap();
            assert_eq!(s.size(), 2);
            *subsets.entry(s.mask()).or_insert(0usize) += 1;
        }
        for c in subsets.values() {
            assert!((*c as f64 / draws as f64 - 0.1).abs() < 0.01);
        }
    }

    #[test]
    fn pareto_certain_units_always_enter() {
        let pi = inclusion_probs(&[10.0, 1.0, 1.0, 1.0, 1.0], 2).unwrap();
        let mut rng = SeedStream::new(5).rng();
        for _ in 0..1000 {
            let s = draw_pareto(&pi, &mut rng).unwrap();
            assert!(s.as_slice()[0]);
            assert_eq!(s.size(), 2);
        }
    }

    #[test]
    fn inverse_probability_total_concentrates() {
        // N^-1 sum D_i / pi_i is close to one for a high-entropy design.
        let pop = crate::popgen::gen_quantile_model(2000, &mut SeedStream::new(6).rng()).unwrap();
        let pi = inclusion_probs(&pop.x, 200).unwrap();
        let mut rng = SeedStream::new(7).rng();
        let ratios: Vec<f64> = (0..1000)
            .map(|_| {
                let d = draw_pareto(&pi, &mut rng).unwrap();
                d.indices().iter().map(|&i| 1.0 / pi.values()[i]).sum::<f64>() / 2000.0
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (ratios.len() - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(sd < 0.05, "sd {sd}");
    }

    #[test]
    fn design_names_parse() {
        assert_eq!("cp".parse::<DesignKind>().unwrap(), DesignKind::ConditionalPoisson);
        assert_eq!("Pareto".parse::<DesignKind>().unwrap(), DesignKind::Pareto);
        assert!("cluster".parse::<DesignKind>().is_err());
        assert!(!DesignKind::Poisson.fixed_size());
        assert!(DesignKind::Srs.fixed_size());
    }
}
