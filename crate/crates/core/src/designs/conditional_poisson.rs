//! Conditional Poisson (rejective) sampling.
//!
//! Poisson sampling with working probabilities `p` conditioned on the
//! sample size `n` has inclusion probabilities that differ from `p`. The
//! working probabilities are calibrated so the conditioned design hits the
//! target `pi`, then samples are drawn by rejection.

use rand::Rng;

use super::{InclusionProbs, SampleIndicator};
use crate::error::{invalid, Error, Result};

const CALIBRATION_TOLERANCE: f64 = 1e-6;
const MAX_CALIBRATION_ITERATIONS: usize = 200;
const MAX_REJECTIONS: usize = 1_000_000;

/// A calibrated rejective design.
#[derive(Debug, Clone)]
pub struct ConditionalPoisson {
    /// Working probabilities of the underlying Poisson design; 1 for units
    /// included with certainty.
    working: Vec<f64>,
    n: usize,
    iterations: usize,
    max_error: f64,
}

/// Exact first-order inclusion probabilities of Poisson(`p`) conditioned on
/// size `n`.
///
/// `pi_k = p_k P(S_{-k} = n - 1) / P(S = n)`, where `S_{-k}` is the Poisson
/// sample size without unit `k`. The size distributions of every prefix and
/// suffix are tabulated (entries are probabilities, so nothing overflows)
/// and convolved, which costs `O(N n)`.
pub fn cp_inclusion_probabilities(p: &[f64], n: usize) -> Result<Vec<f64>> {
    let size = p.len();
    if n > size {
        return invalid("sample size exceeds population size");
    }
    if p.iter().any(|v| !(0.0..=1.0).contains(v) || v.is_nan()) {
        return invalid("working probabilities must lie in [0, 1]");
    }
    if n == 0 {
        return Ok(vec![0.0; size]);
    }
    let width = n + 1;
    // prefix[i][j] = P(size among units 0..i = j), j <= n
    let mut prefix = vec![0.0; (size + 1) * width];
    prefix[0] = 1.0;
    for i in 0..size {
        let (prev, next) = prefix.split_at_mut((i + 1) * width);
        let prev = &prev[i * width..];
        let next = &mut next[..width];
        let q = p[i];
        next[0] = prev[0] * (1.0 - q);
        for j in 1..width {
            next[j] = prev[j] * (1.0 - q) + prev[j - 1] * q;
        }
    }
    // suffix[i][j] = P(size among units i..N = j)
    let mut suffix = vec![0.0; (size + 1) * width];
    suffix[size * width] = 1.0;
    for i in (0..size).rev() {
        let (cur, next) = suffix.split_at_mut((i + 1) * width);
        let cur = &mut cur[i * width..];
        let next = &next[..width];
        let q = p[i];
        cur[0] = next[0] * (1.0 - q);
        for j in 1..width {
            cur[j] = next[j] * (1.0 - q) + next[j - 1] * q;
        }
    }
    let p_n = prefix[size * width + n];
    if !(p_n > 0.0) {
        return Err(Error::NumericFailure(format!(
            "Poisson design cannot produce a sample of size {n} (probability {p_n})"
        )));
    }
    let mut pi = Vec::with_capacity(size);
    for k in 0..size {
        let before = &prefix[k * width..(k + 1) * width];
        let after = &suffix[(k + 1) * width..(k + 2) * width];
        let without_k: f64 = (0..n).map(|j| before[j] * after[n - 1 - j]).sum();
        pi.push((p[k] * without_k / p_n).min(1.0));
    }
    Ok(pi)
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Shift all log-odds by a constant so the working probabilities sum to
/// `n`. The conditioned design is unchanged; rejection just gets cheaper.
fn centre_log_odds(lambda: &mut [f64], n: usize) {
    let total = |c: f64, l: &[f64]| l.iter().map(|v| logistic(v + c)).sum::<f64>();
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid, lambda) < n as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    lambda.iter_mut().for_each(|v| *v += c);
}

impl ConditionalPoisson {
    /// Calibrate working probabilities by damped fixed-point iteration on
    /// the log-odds scale until the exact conditioned inclusion
    /// probabilities match the target within 1e-6.
    pub fn calibrate(target: &InclusionProbs) -> Result<Self> {
        let pi = target.values();
        let size = pi.len();
        let n = target.sample_size();
        let certain: Vec<bool> = pi.iter().map(|&p| p >= 1.0).collect();
        let free_idx: Vec<usize> = (0..size).filter(|&i| !certain[i]).collect();
        let n_free = n - (size - free_idx.len());
        let mut working = vec![1.0; size];
        if n_free == 0 || n_free == free_idx.len() {
            for &i in &free_idx {
                working[i] = if n_free == 0 { 0.0 } else { 1.0 };
            }
            return Ok(ConditionalPoisson { working, n, iterations: 0, max_error: 0.0 });
        }
        let goal: Vec<f64> = free_idx.iter().map(|&i| pi[i]).collect();
        let goal_logit: Vec<f64> = goal.iter().map(|&g| logit(g)).collect();
        let mut lambda = goal_logit.clone();
        centre_log_odds(&mut lambda, n_free);

        let evaluate = |lambda: &[f64]| -> Result<(Vec<f64>, f64)> {
            let p: Vec<f64> = lambda.iter().map(|&v| logistic(v)).collect();
            let got = cp_inclusion_probabilities(&p, n_free)?;
            let err = got.iter().zip(&goal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok((got, err))
        };

        let (mut got, mut err) = evaluate(&lambda)?;
        let mut iterations = 0;
        let mut step = 1.0;
        while err > CALIBRATION_TOLERANCE {
            if iterations >= MAX_CALIBRATION_ITERATIONS {
                return Err(Error::NumericFailure(format!(
                    "conditional Poisson calibration did not converge after {iterations} iterations \
                     (max |pi - target| = {err:.3e}, N = {size}, n = {n})"
                )));
            }
            iterations += 1;
            let mut candidate: Vec<f64> = lambda
                .iter()
                .zip(&got)
                .zip(&goal_logit)
                .map(|((&l, &g), &t)| {
                    let g = g.clamp(1e-300, 1.0 - 1e-16);
                    l + step * (t - logit(g))
                })
                .collect();
            centre_log_odds(&mut candidate, n_free);
            let (cand_got, cand_err) = evaluate(&candidate)?;
            if cand_err < err || step < 1e-3 {
                lambda = candidate;
                got = cand_got;
                err = cand_err;
                step = (step * 1.5).min(1.0);
            } else {
                step *= 0.5;
            }
        }
        for (k, &i) in free_idx.iter().enumerate() {
            working[i] = logistic(lambda[k]);
        }
        Ok(ConditionalPoisson { working, n, iterations, max_error: err })
    }

    pub fn working_probabilities(&self) -> &[f64] {
        &self.working
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn calibration_error(&self) -> f64 {
        self.max_error
    }

    /// Exact inclusion probabilities implied by the calibrated parameters.
    pub fn inclusion_probabilities(&self) -> Result<Vec<f64>> {
        cp_inclusion_probabilities(&self.working, self.n)
    }

    /// Draw Poisson samples until one has exactly `n` units.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampleIndicator> {
        let size = self.working.len();
        let mut d = vec![false; size];
        for _ in 0..MAX_REJECTIONS {
            let mut count = 0;
            let mut overflow = false;
            for (slot, &p) in d.iter_mut().zip(&self.working) {
                let hit = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
                *slot = hit;
                if hit {
                    count += 1;
                    if count > self.n {
                        overflow = true;
                        break;
                    }
                }
            }
            if !overflow && count == self.n {
                return Ok(SampleIndicator::new(d));
            }
        }
        Err(Error::NumericFailure(format!(
            "conditional Poisson draw rejected {MAX_REJECTIONS} Poisson samples (N = {size}, n = {})",
            self.n
        )))
    }
}
