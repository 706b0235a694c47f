//! Finite populations drawn from the superpopulation models used in the
//! simulation studies, plus a brute-force oracle for true quantiles.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A realised finite population.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub y: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub t: Option<Vec<u32>>,
}

impl Population {
    pub fn new(y: Vec<f64>, z: Option<Vec<f64>>, x: Vec<f64>, t: Option<Vec<u32>>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return invalid("population must contain at least one unit");
        }
        if x.len() != n
            || z.as_ref().is_some_and(|z| z.len() != n)
            || t.as_ref().is_some_and(|t| t.len() != n)
        {
            return invalid("population columns must all have length N");
        }
        if let Some(bad) = x.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid(format!("size variable must be positive and finite (unit {bad}: {})", x[bad]));
        }
        if y.iter().chain(z.iter().flatten()).any(|v| !v.is_finite()) {
            return invalid("study variables must be finite");
        }
        Ok(Population { y, z, x, t })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Superpopulation models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// `Y = (12.5 + 3 V^1.2 + 15 e)^2 + 4000` with `V ~ |N(0, 7^2)|`;
    /// size variable `X = Y^0.2 W`, `log W ~ N(0, w_log_var)` (default sd 0.125).
    QuantileModel {
        #[serde(default = "default_quantile_w_var")]
        w_log_var: f64,
    },
    /// Four strata with bivariate normal `(y, z)` and size proportional to
    /// the stratum label.
    StratifiedGaussian { rho_s: f64 },
    /// Cuadras-Augé (Marshall-Olkin) copula for `(y, z)`; size
    /// `X = f(y + z) W` with `f(u) = u^3/3 - u^2/2 + u/10 + 1/2`.
    MarshallOlkin { rho_s: f64, w_log_var: f64 },
    /// `y ~ U(0, 1)` with unit sizes.
    Uniform,
    /// Degenerate `y = value` with unit sizes.
    Constant { value: f64 },
}

fn default_quantile_w_var() -> f64 {
    QUANTILE_MODEL_W_LOG_VAR
}

/// Variance of `log W`: a standard deviation of 0.125.
pub const QUANTILE_MODEL_W_LOG_VAR: f64 = 0.125 * 0.125;

const STRATUM_WEIGHTS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];
const STRATUM_MEANS: [(f64, f64); 4] = [(800.0, 300.0), (900.0, 400.0), (1000.0, 500.0), (1100.0, 600.0)];
const STRATUM_SD: (f64, f64) = (150.0, 60.0);

/// Pearson correlation of a bivariate normal with Spearman coefficient `rho_s`.
pub fn gaussian_pearson_for_spearman(rho_s: f64) -> f64 {
    2.0 * (std::f64::consts::PI * rho_s / 6.0).sin()
}

/// Cuadras-Augé parameter giving Spearman coefficient `rho_s`
/// (inverse of `rho_s = 3a / (4 - a)`).
pub fn cuadras_auge_alpha(rho_s: f64) -> f64 {
    4.0 * rho_s / (3.0 + rho_s)
}

fn mo_size_curve(u: f64) -> f64 {
    u * u * u / 3.0 - 0.5 * u * u + 0.10 * u + 0.5
}

struct Unit {
    y: f64,
    z: f64,
    x: f64,
    t: u32,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::QuantileModel { w_log_var } if !(w_log_var >= 0.0 && w_log_var.is_finite()) => {
                invalid(format!("w_log_var must be non-negative, got {w_log_var}"))
            }
            ModelSpec::StratifiedGaussian { rho_s } if !(0.0..1.0).contains(&rho_s) => {
                invalid(format!("stratified model needs rho_s in [0, 1), got {rho_s}"))
            }
            ModelSpec::MarshallOlkin { rho_s, .. } if !(0.0..=1.0).contains(&rho_s) => {
                invalid(format!("Marshall-Olkin model needs rho_s in [0, 1], got {rho_s}"))
            }
            ModelSpec::MarshallOlkin { w_log_var, .. } if !(w_log_var >= 0.0 && w_log_var.is_finite()) => {
                invalid(format!("w_log_var must be non-negative, got {w_log_var}"))
            }
            ModelSpec::Constant { value } if !value.is_finite() => invalid("constant model value must be finite"),
            _ => Ok(()),
        }
    }

    pub fn has_second_variable(&self) -> bool {
        matches!(self, ModelSpec::StratifiedGaussian { .. } | ModelSpec::MarshallOlkin { .. })
    }

    pub fn has_strata(&self) -> bool {
        matches!(self, ModelSpec::StratifiedGaussian { .. })
    }

    /// Copy of the model with its dependence parameter replaced.
    pub fn with_rho(&self, rho: f64) -> ModelSpec {
        match *self {
            ModelSpec::StratifiedGaussian { .. } => ModelSpec::StratifiedGaussian { rho_s: rho },
            ModelSpec::MarshallOlkin { w_log_var, .. } => ModelSpec::MarshallOlkin { rho_s: rho, w_log_var },
            other => other,
        }
    }

    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Unit {
        match *self {
            ModelSpec::QuantileModel { w_log_var } => {
                let v: f64 = 7.0 * Distribution::<f64>::sample(&StandardNormal, rng).abs();
                let e: f64 = Distribution::<f64>::sample(&StandardNormal, rng);
                let root = 12.5 + 3.0 * v.powf(1.2) + 15.0 * e;
                let y = root * root + 4000.0;
                let w = (w_log_var.sqrt() * Distribution::<f64>::sample(&StandardNormal, rng)).exp();
                Unit { y, z: 0.0, x: y.powf(0.2) * w, t: 0 }
            }
            ModelSpec::StratifiedGaussian { rho_s } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut stratum = STRATUM_WEIGHTS.len() - 1;
                for (k, w) in STRATUM_WEIGHTS.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        stratum = k;
                        break;
                    }
                }
                let r = gaussian_pearson_for_spearman(rho_s);
                let e1: f64 = Distribution::<f64>::sample(&StandardNormal, rng);
                let e2: f64 = Distribution::<f64>::sample(&StandardNormal, rng);
                let (my, mz) = STRATUM_MEANS[stratum];
                let t = stratum as u32 + 1;
                Unit {
                    y: my + STRATUM_SD.0 * e1,
                    z: mz + STRATUM_SD.1 * (r * e1 + (1.0 - r * r).sqrt() * e2),
                    x: t as f64,
                    t,
                }
            }
            ModelSpec::MarshallOlkin { rho_s, w_log_var } => {
                let a = cuadras_auge_alpha(rho_s);
                // Shock model with rates (1 - a, 1 - a, a): each margin is Exp(1).
                let shock = |rate: f64, rng: &mut R| -> f64 {
                    if rate <= 0.0 {
                        f64::INFINITY
                    } else {
                        let e: f64 = Exp1.sample(rng);
                        e / rate
                    }
                };
                let e1 = shock(1.0 - a, rng);
                let e2 = shock(1.0 - a, rng);
                let e12 = shock(a, rng);
                let y = (-e1.min(e12)).exp();
                let z = (-e2.min(e12)).exp();
                let w = (w_log_var.sqrt() * Distribution::<f64>::sample(&StandardNormal, rng)).exp();
                Unit { y, z, x: mo_size_curve(y + z) * w, t: 0 }
            }
            ModelSpec::Uniform => Unit { y: rng.random(), z: 0.0, x: 1.0, t: 0 },
            ModelSpec::Constant { value } => Unit { y: value, z: 0.0, x: 1.0, t: 0 },
        }
    }

    /// Draw a finite population of `size` units.
    pub fn generate<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Population> {
        if size == 0 {
            return invalid("population size must be positive");
        }
        self.validate()?;
        let mut y = Vec::with_capacity(size);
        let mut z = Vec::with_capacity(size);
        let mut x = Vec::with_capacity(size);
        let mut t = Vec::with_capacity(size);
        for _ in 0..size {
            let u = self.draw_unit(rng);
            y.push(u.y);
            z.push(u.z);
            x.push(u.x);
            t.push(u.t);
        }
        let z = self.has_second_variable().then_some(z);
        let t = self.has_strata().then_some(t);
        Population::new(y, z, x, t)
    }

    /// Draw `count` study values `y` directly from the superpopulation.
    pub fn sample_y<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.draw_unit(rng).y).collect()
    }
}

pub fn gen_quantile_model<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Result<Population> {
    ModelSpec::QuantileModel { w_log_var: QUANTILE_MODEL_W_LOG_VAR }.generate(size, rng)
}

pub fn gen_stratified_model<R: Rng + ?Sized>(size: usize, rho_s: f64, rng: &mut R) -> Result<Population> {
    ModelSpec::StratifiedGaussian { rho_s }.generate(size, rng)
}

/// Marshall-Olkin population; `w_log_var` is 0.4 for a 1/10 sampling
/// fraction and 0.08 for 1/3 in the reference scenarios.
pub fn gen_marshall_olkin_model<R: Rng + ?Sized>(
    size: usize,
    rho_s: f64,
    w_log_var: f64,
    rng: &mut R,
) -> Result<Population> {
    ModelSpec::MarshallOlkin { rho_s, w_log_var }.generate(size, rng)
}

/// Size-noise variance used by the Marshall-Olkin scenarios for a given
/// sampling fraction.
pub fn marshall_olkin_w_log_var(fraction: f64) -> f64 {
    if fraction >= 0.2 {
        0.08
    } else {
        0.4
    }
}

pub const MIN_ORACLE_SIMS: usize = 10_000;

/// Empirical `p`-quantile of `sims` independent superpopulation draws.
pub fn true_quantile_oracle<R: Rng + ?Sized>(model: &ModelSpec, p: f64, sims: usize, rng: &mut R) -> Result<f64> {
    Ok(true_quantiles_oracle(model, &[p], sims, rng)?[0])
}

/// Several quantiles from a single batch of draws.
pub fn true_quantiles_oracle<R: Rng + ?Sized>(
    model: &ModelSpec,
    ps: &[f64],
    sims: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return invalid(format!("quantile order must lie in (0, 1), got {p}"));
    }
    if sims < MIN_ORACLE_SIMS {
        return invalid(format!("oracle needs at least {MIN_ORACLE_SIMS} draws, got {sims}"));
    }
    model.validate()?;
    let mut draws = model.sample_y(sims, rng);
    draws.sort_by(f64::total_cmp);
    Ok(ps
        .iter()
        .map(|&p| {
            // inf{y : k/sims >= p}
            let k = ((p * sims as f64).ceil() as usize).clamp(1, sims);
            draws[k - 1]
        })
        .collect())
}
