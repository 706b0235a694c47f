//! Monte Carlo studies of interval coverage and test rejection rates.

use serde::Serialize;

use super::config::ScenarioConfig;
use crate::designs::inclusion_probs;
use crate::error::{invalid, Error, Result};
use crate::estimate::{check_strata, Functional, MonotoneDependence, Quantile, Sample, Ties};
use crate::functional_refs;
use crate::infer::{ci_from_distribution, cond_test_from_null, marg_test_from_distribution};
use crate::par::{map_indexed, Execution};
use crate::popgen::{true_quantiles_oracle, ModelSpec};
use crate::resample::{bootstrap, bootstrap_many, BootstrapConfig, Scheme};
use crate::rng::SeedStream;

/// `sqrt(r (1 - r) / reps)`.
pub fn rate_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Interval indicators for one `(alpha, p)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileCell {
    pub p: f64,
    pub alpha: f64,
    pub true_quantile: f64,
    pub reps: usize,
    /// Intervals containing the true quantile.
    pub covered: usize,
    /// Intervals entirely above it.
    pub left: usize,
    /// Intervals entirely below it.
    pub right: usize,
    pub cp: f64,
    pub le: f64,
    pub re: f64,
    pub al: f64,
    pub cp_se: f64,
    pub le_se: f64,
    pub re_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileReport {
    pub scenario: String,
    pub population: usize,
    pub sample_size: usize,
    pub replicates: usize,
    pub cells: Vec<QuantileCell>,
}

impl QuantileReport {
    pub fn cell(&self, alpha: f64, p: f64) -> Option<&QuantileCell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.p == p)
    }
}

/// Seeds of the population, the sample and the bootstrap of one replicate.
fn replicate_streams(seed: u64, group: usize, rep: usize) -> (SeedStream, SeedStream, SeedStream) {
    let s = SeedStream::new(seed).named("replicate").child(group as u64).child(rep as u64);
    (s.child(0), s.child(1), s.child(2))
}

fn draw_sample(cfg: &ScenarioConfig, model: &ModelSpec, group: usize, rep: usize) -> Result<(Sample, SeedStream)> {
    let (pop_seed, design_seed, boot_seed) = replicate_streams(cfg.seed, group, rep);
    let pop = model.generate(cfg.population, &mut pop_seed.rng())?;
    let pi = inclusion_probs(&pop.x, cfg.sample_size)?;
    let d = cfg.sampling_design.draw(&pi, &mut design_seed.rng())?;
    Ok((Sample::from_population(&pop, &pi, &d)?, boot_seed))
}

fn bootstrap_config(cfg: &ScenarioConfig) -> BootstrapConfig {
    // Replicates of the study already run in parallel.
    BootstrapConfig::new(cfg.replicates, cfg.population)
        .design(cfg.resampling_design)
        .execution(Execution::Sequential)
}

/// Coverage study of the bootstrap intervals for quantiles.
pub fn run_quantile_study(cfg: &ScenarioConfig, execution: Execution) -> Result<QuantileReport> {
    cfg.validate()?;
    let truth = true_quantiles_oracle(
        &cfg.model,
        &cfg.p_grid,
        cfg.oracle_sims,
        &mut SeedStream::new(cfg.seed).named("oracle").rng(),
    )?;
    let qs = cfg.p_grid.iter().map(|&p| Quantile::new(p)).collect::<Result<Vec<_>>>()?;
    let boot = bootstrap_config(cfg);

    // Per replicate: (lower, upper) for every (alpha, p), alpha-major.
    let per_rep: Vec<Result<Vec<(f64, f64)>>> = map_indexed(cfg.reps, execution, |j| {
        let (sample, seed) = draw_sample(cfg, &cfg.model, 0, j)?;
        let dists = bootstrap_many(&functional_refs(&qs), &sample, &boot, &seed)?;
        let mut out = Vec::with_capacity(cfg.alpha.len() * qs.len());
        for &a in &cfg.alpha {
            for d in &dists {
                let ci = ci_from_distribution(d, a)?;
                out.push((ci.lower, ci.upper));
            }
        }
        Ok(out)
    });
    let per_rep = collect_reps(per_rep, &cfg.name)?;

    let mut cells = Vec::new();
    for (ai, &alpha) in cfg.alpha.iter().enumerate() {
        for (pi, (&p, &q)) in cfg.p_grid.iter().zip(&truth).enumerate() {
            let k = ai * qs.len() + pi;
            let (mut covered, mut left, mut right, mut length) = (0, 0, 0, 0.0);
            for rep in &per_rep {
                let (lo, hi) = rep[k];
                if lo > q {
                    left += 1;
                } else if hi < q {
                    right += 1;
                } else {
                    covered += 1;
                }
                length += hi - lo;
            }
            let r = cfg.reps as f64;
            let (cp, le, re) = (covered as f64 / r, left as f64 / r, right as f64 / r);
            cells.push(QuantileCell {
                p,
                alpha,
                true_quantile: q,
                reps: cfg.reps,
                covered,
                left,
                right,
                cp,
                le,
                re,
                al: length / r,
                cp_se: rate_se(cp, cfg.reps),
                le_se: rate_se(le, cfg.reps),
                re_se: rate_se(re, cfg.reps),
            });
        }
    }
    Ok(QuantileReport {
        scenario: cfg.name.clone(),
        population: cfg.population,
        sample_size: cfg.sample_size,
        replicates: cfg.replicates,
        cells,
    })
}

fn collect_reps<T>(results: Vec<Result<T>>, scenario: &str) -> Result<Vec<T>> {
    results
        .into_iter()
        .enumerate()
        .map(|(j, r)| {
            r.map_err(|e| match e {
                Error::NumericFailure(m) => Error::NumericFailure(format!("scenario `{scenario}`, replicate {j}: {m}")),
                other => other,
            })
        })
        .collect()
}

/// Which independence test a study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// Independence given the strata, null distribution by resampling
    /// under the null.
    Conditional,
    /// Marginal independence by interval inversion.
    Marginal,
}

impl TestKind {
    pub fn label(&self) -> &'static str {
        match self {
            TestKind::Conditional => "conditional",
            TestKind::Marginal => "marginal",
        }
    }
}

/// Reject flag per alpha and the p-value, if the test yields one.
type RepOutcome = (Vec<bool>, Option<f64>);

/// Rejection rate at one `(rho, alpha)` point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestCell {
    pub rho: f64,
    pub alpha: f64,
    /// Replicates that carried the test; rates are over these.
    pub reps: usize,
    /// Samples dropped because a stratum had fewer than 2 units.
    pub skipped: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub se: f64,
    /// Median p-value over the replicates (conditional test only).
    pub median_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub scenario: String,
    pub test: TestKind,
    pub population: usize,
    pub sample_size: usize,
    pub sampling_design: String,
    pub resampling_design: String,
    pub replicates: usize,
    pub cells: Vec<TestCell>,
}

impl TestReport {
    pub fn cell(&self, rho: f64, alpha: f64) -> Option<&TestCell> {
        self.cells.iter().find(|c| c.rho == rho && c.alpha == alpha)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Size and power study of an independence test over `rho_grid`.
pub fn run_test_study(cfg: &ScenarioConfig, test: TestKind, execution: Execution) -> Result<TestReport> {
    cfg.validate()?;
    match test {
        TestKind::Conditional if !cfg.model.has_strata() => {
            return Err(Error::Config(format!("scenario `{}`: conditional test needs a stratified model", cfg.name)))
        }
        TestKind::Marginal if !cfg.model.has_second_variable() => {
            return Err(Error::Config(format!("scenario `{}`: marginal test needs two study variables", cfg.name)))
        }
        _ => {}
    }
    if cfg.rho_grid.is_empty() {
        return invalid("empty rho grid");
    }
    let boot = bootstrap_config(cfg);
    let mut cells = Vec::new();
    for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
        let model = cfg.model.with_rho(rho);
        // Per replicate: reject flag per alpha and the p-value if any, or
        // None when the sample cannot carry the test.
        let per_rep: Vec<Result<Option<RepOutcome>>> = map_indexed(cfg.reps, execution, |j| {
            let (sample, seed) = draw_sample(cfg, &model, ri, j)?;
            match test {
                TestKind::Conditional => {
                    if let Err(e) = check_strata(sample.t.as_deref().unwrap_or_default(), 2) {
                        log::debug!("scenario `{}` rho {rho} rep {j} skipped: {e}", cfg.name);
                        return Ok(None);
                    }
                    let f = MonotoneDependence::spearman(true);
                    let stat = f.evaluate(&sample)?;
                    let null = bootstrap(&f.with_ties(Ties::Ordinal), &sample, &boot.scheme(Scheme::ConditionalNull), &seed)?;
                    let mut rejects = Vec::with_capacity(cfg.alpha.len());
                    let mut p = None;
                    for &a in &cfg.alpha {
                        let r = cond_test_from_null(stat, &null.estimates, a)?;
                        rejects.push(r.reject);
                        p = r.p_value;
                    }
                    Ok(Some((rejects, p)))
                }
                TestKind::Marginal => {
                    let f = MonotoneDependence::gamma_square(false);
                    let dist = bootstrap(&f, &sample, &boot.scheme(Scheme::TwoPhase), &seed)?;
                    let rejects = cfg
                        .alpha
                        .iter()
                        .map(|&a| marg_test_from_distribution(&dist, a).map(|r| r.reject))
                        .collect::<Result<Vec<bool>>>()?;
                    Ok(Some((rejects, None)))
                }
            }
        });
        let per_rep = collect_reps(per_rep, &cfg.name)?;
        let skipped = per_rep.iter().filter(|r| r.is_none()).count();
        let per_rep: Vec<_> = per_rep.into_iter().flatten().collect();
        if skipped > 0 {
            log::warn!("scenario `{}` rho {rho}: {skipped} of {} samples skipped (stratum with fewer than 2 units)", cfg.name, cfg.reps);
        }
        if per_rep.is_empty() {
            return Err(Error::DegenerateCell {
                cell: format!("{} rho={rho}", cfg.name),
                reason: "every sample had a stratum with fewer than 2 units".into(),
            });
        }
        let done = per_rep.len();
        let mut pvals: Vec<f64> = per_rep.iter().filter_map(|r| r.1).collect();
        let median_p = (!pvals.is_empty()).then(|| median(&mut pvals));
        for (ai, &alpha) in cfg.alpha.iter().enumerate() {
            let rejections = per_rep.iter().filter(|r| r.0[ai]).count();
            let rate = rejections as f64 / done as f64;
            cells.push(TestCell {
                rho,
                alpha,
                reps: done,
                skipped,
                rejections,
                rejection_rate: rate,
                se: rate_se(rate, done),
                median_p_value: median_p,
            });
        }
    }
    Ok(TestReport {
        scenario: cfg.name.clone(),
        test,
        population: cfg.population,
        sample_size: cfg.sample_size,
        sampling_design: cfg.sampling_design.label().to_string(),
        resampling_design: cfg.resampling_design.label().to_string(),
        replicates: cfg.replicates,
        cells,
    })
}
