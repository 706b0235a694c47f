//! Resampling schemes that ignore part of the design, kept as negative
//! controls for the two-phase bootstrap.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::{PseudoPopulation, ResamplingDistribution};
use crate::error::{Error, Result};
use crate::estimate::{Functional, Sample};
use crate::par::{map_indexed, Execution};
use crate::rng::SeedStream;

/// Holmberg pseudo-population: unit `i` is copied `floor(1/pi_i)` times plus
/// one more with probability equal to the fractional part of `1/pi_i`. The
/// size is random, with expectation `sum 1/pi_i`.
pub fn holmberg_pseudo_population<R: Rng + ?Sized>(sample: &Sample, rng: &mut R) -> PseudoPopulation {
    let counts = sample
        .pi
        .iter()
        .map(|p| {
            let w = 1.0 / p;
            let whole = w.floor();
            let extra = rng.random::<f64>() < w - whole;
            whole as usize + usize::from(extra)
        })
        .collect();
    PseudoPopulation::from_counts(sample, counts)
}

/// `n` i.i.d. draws from the Hájek d.f. of the sample, returned as an
/// equal-probability sample.
pub fn efron_resample<R: Rng + ?Sized>(sample: &Sample, n: usize, rng: &mut R) -> Result<Sample> {
    let sampler = WeightedAliasIndex::new(sample.weights())
        .map_err(|e| Error::InvalidArgument(format!("design weights: {e}")))?;
    let idx: Vec<usize> = (0..n).map(|_| sampler.sample(rng)).collect();
    let take = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let mut s = Sample::new(take(&sample.y), take(&sample.x), vec![1.0; n])?;
    if let Some(z) = &sample.z {
        s = s.with_z(take(z))?;
    }
    if let Some(t) = &sample.t {
        s = s.with_strata(idx.iter().map(|&i| t[i]).collect())?;
    }
    Ok(s)
}

/// Efron's bootstrap of a functional, i.i.d. from the Hájek d.f.
pub fn efron_bootstrap(
    functional: &dyn Functional,
    sample: &Sample,
    replicates: usize,
    execution: Execution,
    seed: &SeedStream,
) -> Result<ResamplingDistribution> {
    let centre = functional.evaluate(sample)?;
    let n = sample.len();
    let est = map_indexed(replicates, execution, |m| {
        let star = efron_resample(sample, n, &mut seed.child(m as u64).rng())?;
        functional.evaluate(&star)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    ResamplingDistribution::new(functional.label(), centre, n, est, 0)
}
