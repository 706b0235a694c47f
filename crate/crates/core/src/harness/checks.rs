//! Diagnostics of the sampling designs and of the analytic covariance
//! kernel against Monte Carlo.

use serde::Serialize;

use super::config::ScenarioConfig;
use crate::designs::{enumerate_design, inclusion_probs, DesignKind, InclusionProbs, ENUMERATION_LIMIT};
use crate::error::Result;
use crate::estimate::{hajek_df, kernel_c, MomentSet, WeightedEdf};
use crate::par::{map_indexed, Execution};
use crate::rng::SeedStream;

/// Smallest population used to approximate superpopulation quantities.
const MIN_TRUTH_POPULATION: usize = 100_000;

/// One entry of the covariance grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCell {
    pub p_i: f64,
    pub p_j: f64,
    pub y_i: f64,
    pub y_j: f64,
    pub mc_covariance: f64,
    pub kernel: f64,
    /// `|mc - kernel| / sqrt(kernel(y_i, y_i) kernel(y_j, y_j))`.
    pub scaled_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub scenario: String,
    pub design: String,
    pub reps: usize,
    /// Largest scaled error over the grid; on the diagonal it is the
    /// relative error of the variance.
    pub max_scaled_error: f64,
    pub cells: Vec<KernelCell>,
}

fn design_sizes(design: DesignKind, x: &[f64]) -> Vec<f64> {
    if design == DesignKind::Srs {
        vec![1.0; x.len()]
    } else {
        x.to_vec()
    }
}

/// Compare the Monte Carlo covariance of `sqrt(n) (F_H(y) - F(y))` over
/// fresh populations and samples with the analytic kernel, on the
/// quantiles `p_grid` of `y`. `reps` populations are simulated; the truth
/// uses one population of `oracle_sims` units (at least 10^5).
pub fn run_kernel_check(cfg: &ScenarioConfig, execution: Execution) -> Result<KernelReport> {
    cfg.validate()?;
    let base = SeedStream::new(cfg.seed);
    let big_n = cfg.oracle_sims.max(MIN_TRUTH_POPULATION);
    let big = cfg.model.generate(big_n, &mut base.named("truth").rng())?;
    let big_sample = ((cfg.sampling_fraction() * big_n as f64).round() as usize).max(1);
    let moments = MomentSet::from_population(&big.y, &design_sizes(cfg.sampling_design, &big.x), big_sample)?;
    let truth = WeightedEdf::from_weights(&big.y, &vec![1.0; big_n], big_n as f64)?;
    let grid: Vec<f64> = cfg.p_grid.iter().map(|&p| truth.quantile(p)).collect::<Result<_>>()?;
    let f_grid: Vec<f64> = grid.iter().map(|&g| truth.evaluate(g)).collect();

    let root_n = (cfg.sample_size as f64).sqrt();
    let draws: Vec<Result<Vec<f64>>> = map_indexed(cfg.reps, execution, |j| {
        let s = base.named("replicate").child(j as u64);
        let pop = cfg.model.generate(cfg.population, &mut s.child(0).rng())?;
        let pi = inclusion_probs(&design_sizes(cfg.sampling_design, &pop.x), cfg.sample_size)?;
        let d = cfg.sampling_design.draw(&pi, &mut s.child(1).rng())?;
        let fh = hajek_df(&pop.y, pi.values(), &d)?;
        Ok(grid.iter().zip(&f_grid).map(|(&g, &f)| root_n * (fh.evaluate(g) - f)).collect())
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;

    let k = grid.len();
    let r = draws.len() as f64;
    let means: Vec<f64> = (0..k).map(|a| draws.iter().map(|v| v[a]).sum::<f64>() / r).collect();
    let cov = |a: usize, b: usize| {
        draws.iter().map(|v| (v[a] - means[a]) * (v[b] - means[b])).sum::<f64>() / (r - 1.0)
    };
    let cdf = |v: f64| truth.evaluate(v);
    let diag: Vec<f64> = grid.iter().map(|&g| kernel_c(&moments, cdf, g, g)).collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in a..k {
            let kernel = kernel_c(&moments, cdf, grid[a], grid[b])?;
            let mc = cov(a, b);
            cells.push(KernelCell {
                p_i: cfg.p_grid[a],
                p_j: cfg.p_grid[b],
                y_i: grid[a],
                y_j: grid[b],
                mc_covariance: mc,
                kernel,
                scaled_error: (mc - kernel).abs() / (diag[a] * diag[b]).sqrt(),
            });
        }
    }
    let max_scaled_error = cells.iter().map(|c| c.scaled_error).fold(0.0, f64::max);
    Ok(KernelReport {
        scenario: cfg.name.clone(),
        design: cfg.sampling_design.label().to_string(),
        reps: cfg.reps,
        max_scaled_error,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignCheckRow {
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub scenario: String,
    pub design: String,
    pub rows: Vec<DesignCheckRow>,
}

/// Inclusion-probability diagnostics of the sampling design on one
/// population from the model: `reps` draws give empirical inclusion
/// frequencies and the Horvitz-Thompson population-size ratio; for
/// `N <= 12` the exact designs are enumerated as well.
pub fn run_design_check(cfg: &ScenarioConfig, execution: Execution) -> Result<DesignReport> {
    cfg.validate()?;
    let base = SeedStream::new(cfg.seed);
    let pop = cfg.model.generate(cfg.population, &mut base.named("population").rng())?;
    let pi = inclusion_probs(&design_sizes(cfg.sampling_design, &pop.x), cfg.sample_size)?;
    let mut rows = Vec::new();
    let mut push = |q: &str, v: f64| rows.push(DesignCheckRow { quantity: q.to_string(), value: v });
    push("population_size", cfg.population as f64);
    push("sample_size", cfg.sample_size as f64);
    push("min_pi", pi.values().iter().cloned().fold(f64::INFINITY, f64::min));
    push("max_pi", pi.values().iter().cloned().fold(0.0, f64::max));

    if cfg.population <= ENUMERATION_LIMIT {
        exact_rows(&pi, &mut push)?;
    }

    let big_n = cfg.population as f64;
    let draws: Vec<Result<(Vec<usize>, f64)>> = map_indexed(cfg.reps, execution, |j| {
        let d = cfg.sampling_design.draw(&pi, &mut base.named("draw").child(j as u64).rng())?;
        let idx = d.indices();
        let ratio = idx.iter().map(|&i| 1.0 / pi.values()[i]).sum::<f64>() / big_n;
        Ok((idx, ratio))
    });
    let mut hits = vec![0usize; cfg.population];
    let (mut size_sum, mut ratio_sum, mut ratio_sq) = (0.0, 0.0, 0.0);
    for r in draws {
        let (idx, ratio) = r?;
        size_sum += idx.len() as f64;
        ratio_sum += ratio;
        ratio_sq += ratio * ratio;
        for i in idx {
            hits[i] += 1;
        }
    }
    let reps = cfg.reps as f64;
    let max_dev = hits
        .iter()
        .zip(pi.values())
        .map(|(&h, &p)| (h as f64 / reps - p).abs())
        .fold(0.0, f64::max);
    let ratio_mean = ratio_sum / reps;
    push("draws", reps);
    push("mean_sample_size", size_sum / reps);
    push("max_abs_inclusion_deviation", max_dev);
    push("ht_size_ratio_mean", ratio_mean);
    push("ht_size_ratio_sd", (ratio_sq / reps - ratio_mean * ratio_mean).max(0.0).sqrt());
    Ok(DesignReport { scenario: cfg.name.clone(), design: cfg.sampling_design.label().to_string(), rows })
}

fn exact_rows(pi: &InclusionProbs, push: &mut impl FnMut(&str, f64)) -> Result<()> {
    let cp = enumerate_design(DesignKind::ConditionalPoisson, pi)?;
    let pareto = enumerate_design(DesignKind::Pareto, pi)?;
    let srs = enumerate_design(DesignKind::Srs, pi)?;
    let err = |m: &crate::designs::DesignMass| {
        m.inclusion_probabilities().iter().zip(pi.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    push("exact_cp_max_inclusion_error", err(&cp));
    push("exact_pareto_max_inclusion_error", err(&pareto));
    push("entropy_cp", cp.entropy());
    push("entropy_pareto", pareto.entropy());
    push("entropy_srs", srs.entropy());
    push("hellinger_pareto_cp", pareto.hellinger(&cp)?);
    push("hellinger_srs_cp", srs.hellinger(&cp)?);
    Ok(())
}
