//! Two-phase pseudo-population bootstrap and its variants.
//!
//! Phase 1 builds a pseudo-population of `N` units by drawing sampled units
//! with probabilities proportional to their design weights. Phase 2 redraws
//! a sample of size `n` from it with a πps design on the replicated size
//! variable. The null variant used for conditional independence testing
//! breaks the link between the two study variables inside each stratum.

mod controls;

pub use controls::{efron_bootstrap, efron_resample, holmberg_pseudo_population};

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::designs::{inclusion_probs, DesignKind, InclusionProbs, SampleIndicator};
use crate::error::{invalid, Error, Result};
use crate::estimate::{Functional, Sample, WeightedEdf};
use crate::par::{map_indexed, Execution};
use crate::rng::SeedStream;

/// Largest share of failed replicates tolerated by a bootstrap run.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// A predicted population built from the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPopulation {
    /// Number of pseudo-units copied from each sampled unit (for the null
    /// variant: copies of each unit's `y`).
    pub counts: Vec<usize>,
    pub y: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub t: Option<Vec<u32>>,
}

impl PseudoPopulation {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Unweighted d.f. of `y` over the pseudo-units.
    pub fn edf(&self) -> Result<WeightedEdf> {
        WeightedEdf::from_weights(&self.y, &vec![1.0; self.len()], self.len() as f64)
    }

    fn from_counts(sample: &Sample, counts: Vec<usize>) -> Self {
        let total = counts.iter().sum();
        let mut y = Vec::with_capacity(total);
        let mut x = Vec::with_capacity(total);
        let mut z = sample.z.as_ref().map(|_| Vec::with_capacity(total));
        let mut t = sample.t.as_ref().map(|_| Vec::with_capacity(total));
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                y.push(sample.y[i]);
                x.push(sample.x[i]);
                if let (Some(z), Some(src)) = (z.as_mut(), sample.z.as_ref()) {
                    z.push(src[i]);
                }
                if let (Some(t), Some(src)) = (t.as_mut(), sample.t.as_ref()) {
                    t.push(src[i]);
                }
            }
        }
        PseudoPopulation { counts, y, z, x, t }
    }
}

fn weight_sampler(weights: &[f64]) -> Result<WeightedAliasIndex<f64>> {
    WeightedAliasIndex::new(weights.to_vec()).map_err(|e| Error::InvalidArgument(format!("design weights: {e}")))
}

/// Phase 1: `N` independent draws of sampled units with probabilities
/// `(1/pi_i) / sum_j (1/pi_j)`; the drawn units keep all their values.
pub fn phase1_pseudo_population<R: Rng + ?Sized>(sample: &Sample, population: usize, rng: &mut R) -> Result<PseudoPopulation> {
    if population < sample.len() {
        return invalid(format!("population size {population} below sample size {}", sample.len()));
    }
    let sampler = weight_sampler(&sample.weights())?;
    let mut counts = vec![0usize; sample.len()];
    for _ in 0..population {
        counts[sampler.sample(rng)] += 1;
    }
    Ok(PseudoPopulation::from_counts(sample, counts))
}

/// Pseudo-population under conditional independence of `y` and `z` given
/// the stratum: stratum labels are drawn with design weights over the whole
/// sample, then `y` and `z` are drawn independently, with design weights,
/// from the sampled units of that stratum. The size variable is the label.
pub fn h0_pseudo_population<R: Rng + ?Sized>(sample: &Sample, population: usize, rng: &mut R) -> Result<PseudoPopulation> {
    let (Some(z), Some(t)) = (&sample.z, &sample.t) else {
        return invalid("null pseudo-population needs a second variable and strata");
    };
    if population < sample.len() {
        return invalid(format!("population size {population} below sample size {}", sample.len()));
    }
    let w = sample.weights();
    let mut labels: Vec<u32> = t.clone();
    labels.sort_unstable();
    labels.dedup();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
    for (i, c) in t.iter().enumerate() {
        members[labels.binary_search(c).unwrap()].push(i);
    }
    let within: Vec<WeightedAliasIndex<f64>> = members
        .iter()
        .zip(&labels)
        .map(|(idx, label)| {
            if idx.is_empty() {
                return Err(Error::DegenerateCell { cell: label.to_string(), reason: "no sampled units".into() });
            }
            weight_sampler(&idx.iter().map(|&i| w[i]).collect::<Vec<_>>())
        })
        .collect::<Result<_>>()?;
    let overall = weight_sampler(&w)?;

    let mut counts = vec![0usize; sample.len()];
    let mut py = Vec::with_capacity(population);
    let mut pz = Vec::with_capacity(population);
    let mut pt = Vec::with_capacity(population);
    for _ in 0..population {
        let cell = labels.binary_search(&t[overall.sample(rng)]).unwrap();
        let iy = members[cell][within[cell].sample(rng)];
        let iz = members[cell][within[cell].sample(rng)];
        counts[iy] += 1;
        py.push(sample.y[iy]);
        pz.push(z[iz]);
        pt.push(labels[cell]);
    }
    let x = pt.iter().map(|&c| f64::from(c)).collect();
    Ok(PseudoPopulation { counts, y: py, z: Some(pz), x, t: Some(pt) })
}

/// Phase 2: draw `n` pseudo-units with `pi* = n x* / sum x*` (clamped).
pub fn phase2_redraw<R: Rng + ?Sized>(
    pp: &PseudoPopulation,
    n: usize,
    design: DesignKind,
    rng: &mut R,
) -> Result<(SampleIndicator, InclusionProbs)> {
    let pi = inclusion_probs(&pp.x, n)?;
    let d = design.draw(&pi, rng)?;
    Ok((d, pi))
}

/// The resampled units as a [`Sample`] carrying the phase-2 probabilities.
pub fn resampled_sample(pp: &PseudoPopulation, d: &SampleIndicator, pi: &InclusionProbs) -> Result<Sample> {
    let idx = d.indices();
    let take = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let mut s = Sample::new(take(&pp.y), take(&pp.x), take(pi.values()))?;
    if let Some(z) = &pp.z {
        s = s.with_z(take(z))?;
    }
    if let Some(t) = &pp.t {
        s = s.with_strata(idx.iter().map(|&i| t[i]).collect())?;
    }
    Ok(s)
}

/// Hájek d.f. over the resampled pseudo-units.
pub fn resampled_hajek(pp: &PseudoPopulation, d: &SampleIndicator, pi: &InclusionProbs) -> Result<WeightedEdf> {
    crate::estimate::hajek_df(&pp.y, pi.values(), d)
}

/// How the pseudo-population of each replicate is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    TwoPhase,
    ConditionalNull,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub population: usize,
    pub design: DesignKind,
    pub scheme: Scheme,
    pub execution: Execution,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, population: usize) -> Self {
        BootstrapConfig {
            replicates,
            population,
            design: DesignKind::Pareto,
            scheme: Scheme::TwoPhase,
            execution: Execution::default(),
        }
    }

    pub fn design(mut self, design: DesignKind) -> Self {
        self.design = design;
        self
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Replicate estimates of one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplingDistribution {
    pub label: String,
    /// The functional at the original sample's Hájek d.f.
    pub centre: f64,
    /// Original sample size.
    pub n: usize,
    /// `theta*_m` for the successful replicates, in replicate order.
    pub estimates: Vec<f64>,
    /// `sqrt(n) (theta*_m - centre)`.
    pub z_values: Vec<f64>,
    /// Sample variance of the z-values.
    pub s2_star: f64,
    pub failed: usize,
}

impl ResamplingDistribution {
    pub fn new(label: String, centre: f64, n: usize, estimates: Vec<f64>, failed: usize) -> Result<Self> {
        if estimates.len() < 2 {
            return invalid("a resampling distribution needs at least two replicates");
        }
        let root_n = (n as f64).sqrt();
        let z_values: Vec<f64> = estimates.iter().map(|e| root_n * (e - centre)).collect();
        let m = z_values.len() as f64;
        let mean = z_values.iter().sum::<f64>() / m;
        let s2_star = z_values.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (m - 1.0);
        Ok(ResamplingDistribution { label, centre, n, estimates, z_values, s2_star, failed })
    }

    pub fn s_star(&self) -> f64 {
        self.s2_star.sqrt()
    }

    pub fn replicates(&self) -> usize {
        self.z_values.len()
    }

    /// Empirical d.f. of the z-values, mass `1/M` each.
    pub fn edf(&self) -> Result<WeightedEdf> {
        let m = self.z_values.len();
        WeightedEdf::from_weights(&self.z_values, &vec![1.0; m], m as f64)
    }
}

/// Run one bootstrap and evaluate several functionals on every replicate.
///
/// Replicate `m` uses the stream `seed.child(m)`, so the result does not
/// depend on scheduling. A replicate is dropped for a functional whose
/// evaluation fails; more than 1% failures aborts the run.
pub fn bootstrap_many(
    functionals: &[&dyn Functional],
    sample: &Sample,
    cfg: &BootstrapConfig,
    seed: &SeedStream,
) -> Result<Vec<ResamplingDistribution>> {
    if cfg.replicates < 2 {
        return invalid("at least two bootstrap replicates are required");
    }
    let centres: Vec<f64> = match cfg.scheme {
        Scheme::TwoPhase => functionals.iter().map(|f| f.evaluate(sample)).collect::<Result<_>>()?,
        // The null distribution is used uncentred.
        Scheme::ConditionalNull => vec![0.0; functionals.len()],
    };
    let n = sample.len();
    let results: Vec<Result<Vec<Result<f64>>>> = map_indexed(cfg.replicates, cfg.execution, |m| {
        let mut rng = seed.child(m as u64).rng();
        let pp = match cfg.scheme {
            Scheme::TwoPhase => phase1_pseudo_population(sample, cfg.population, &mut rng)?,
            Scheme::ConditionalNull => h0_pseudo_population(sample, cfg.population, &mut rng)?,
        };
        let (d, pi) = phase2_redraw(&pp, n, cfg.design, &mut rng)?;
        let star = resampled_sample(&pp, &d, &pi)?;
        Ok(functionals.iter().map(|f| f.evaluate(&star)).collect())
    });

    let mut estimates: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.replicates); functionals.len()];
    let mut failed = vec![0usize; functionals.len()];
    let mut first_error: Option<Error> = None;
    for r in results {
        match r {
            Ok(values) => {
                for (k, v) in values.into_iter().enumerate() {
                    match v {
                        Ok(v) if v.is_finite() => estimates[k].push(v),
                        Ok(v) => {
                            failed[k] += 1;
                            first_error.get_or_insert(Error::NumericFailure(format!("non-finite replicate {v}")));
                        }
                        Err(e) => {
                            failed[k] += 1;
                            first_error.get_or_insert(e);
                        }
                    }
                }
            }
            Err(e) => {
                failed.iter_mut().for_each(|c| *c += 1);
                first_error.get_or_insert(e);
            }
        }
    }
    let limit = (MAX_FAILURE_RATE * cfg.replicates as f64).floor() as usize;
    functionals
        .iter()
        .zip(estimates)
        .zip(centres)
        .zip(failed)
        .map(|(((f, est), centre), fails)| {
            if fails > limit {
                return Err(Error::NumericFailure(format!(
                    "{}: {fails} of {} replicates failed (first error: {})",
                    f.label(),
                    cfg.replicates,
                    first_error.as_ref().map(|e| e.to_string()).unwrap_or_default()
                )));
            }
            if fails > 0 {
                log::warn!("{}: dropped {fails} failed replicate(s)", f.label());
            }
            ResamplingDistribution::new(f.label(), centre, n, est, fails)
        })
        .collect()
}

/// Bootstrap a single functional.
pub fn bootstrap(
    functional: &dyn Functional,
    sample: &Sample,
    cfg: &BootstrapConfig,
    seed: &SeedStream,
) -> Result<ResamplingDistribution> {
    Ok(bootstrap_many(&[functional], sample, cfg, seed)?.remove(0))
}

#[cfg(test)]
mod tests;
