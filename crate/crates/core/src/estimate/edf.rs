use crate::designs::SampleIndicator;
use crate::error::{invalid, Result};

/// Relative slack used when comparing cumulative mass against a level.
const LEVEL_SLACK: f64 = 1e-12;

/// A step distribution function with point masses at sorted distinct
/// values. Coincident values are merged. The total mass is `sum w / divisor`
/// and equals one for normalized estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEdf {
    values: Vec<f64>,
    cum: Vec<f64>,
    divisor: f64,
}

impl WeightedEdf {
    /// Masses `weights[i] / divisor` at `values[i]`.
    pub fn from_weights(values: &[f64], weights: &[f64], divisor: f64) -> Result<Self> {
        if values.is_empty() {
            return invalid("distribution function needs at least one point");
        }
        if values.len() != weights.len() {
            return invalid("values and weights differ in length");
        }
        if !(divisor.is_finite() && divisor > 0.0) {
            return invalid(format!("divisor must be positive, got {divisor}"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite value");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("weights must be finite and non-negative");
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut out_v: Vec<f64> = Vec::with_capacity(values.len());
        let mut out_c: Vec<f64> = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for i in order {
            acc += weights[i];
            if out_v.last() == Some(&values[i]) {
                *out_c.last_mut().unwrap() = acc;
            } else {
                out_v.push(values[i]);
                out_c.push(acc);
            }
        }
        Ok(WeightedEdf { values: out_v, cum: out_c, divisor })
    }

    /// Masses proportional to `weights`, rescaled to total one.
    pub fn normalized(values: &[f64], weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return invalid("total weight must be positive");
        }
        Self::from_weights(values, weights, total)
    }

    /// `F(y)`, right-continuous.
    pub fn evaluate(&self, y: f64) -> f64 {
        let k = self.values.partition_point(|v| *v <= y);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1] / self.divisor
        }
    }

    /// `F(y-)`, the mass strictly below `y`.
    pub fn evaluate_left(&self, y: f64) -> f64 {
        let k = self.values.partition_point(|v| *v < y);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1] / self.divisor
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.cum[self.cum.len() - 1] / self.divisor
    }

    /// Distinct support points, ascending.
    pub fn support(&self) -> &[f64] {
        &self.values
    }

    /// `(value, mass)` pairs, ascending in value.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let d = self.divisor;
        self.values
            .iter()
            .zip(&self.cum)
            .scan(0.0, move |prev, (&v, &c)| {
                let m = (c - *prev) / d;
                *prev = c;
                Some((v, m))
            })
    }

    /// Left-continuous inverse `inf { y : F(y) >= p }` of the normalized d.f.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return invalid(format!("quantile level {p} outside (0, 1)"));
        }
        let total = self.cum[self.cum.len() - 1];
        let level = p * total - LEVEL_SLACK * total;
        let k = self.cum.partition_point(|c| *c < level);
        Ok(self.values[k.min(self.values.len() - 1)])
    }

    /// `sup_y |F(y) - G(y)|` against a continuous d.f. `g`, checked on both
    /// sides of every jump.
    pub fn sup_distance(&self, g: impl Fn(f64) -> f64) -> f64 {
        let mut prev = 0.0;
        let mut worst: f64 = 0.0;
        for (&v, &c) in self.values.iter().zip(&self.cum) {
            let gv = g(v);
            let here = c / self.divisor;
            worst = worst.max((prev - gv).abs()).max((here - gv).abs());
            prev = here;
        }
        worst
    }
}

/// Hájek estimator: mass at `y_i` proportional to `D_i / pi_i`.
pub fn hajek_df(y: &[f64], pi: &[f64], d: &SampleIndicator) -> Result<WeightedEdf> {
    let (vals, w) = sampled_weights(y, pi, d)?;
    WeightedEdf::normalized(&vals, &w)
}

/// Horvitz-Thompson estimator: mass `D_i / (N pi_i)`, not normalized.
pub fn ht_df(y: &[f64], pi: &[f64], d: &SampleIndicator, population: usize) -> Result<WeightedEdf> {
    let (vals, w) = sampled_weights(y, pi, d)?;
    WeightedEdf::from_weights(&vals, &w, population as f64)
}

/// Ordinary empirical d.f. of the sampled values, ignoring the design.
pub fn naive_edf(y: &[f64], d: &SampleIndicator) -> Result<WeightedEdf> {
    let vals: Vec<f64> = d.indices().into_iter().map(|i| y[i]).collect();
    let n = vals.len() as f64;
    WeightedEdf::from_weights(&vals, &vec![1.0; vals.len()], n)
}

fn sampled_weights(y: &[f64], pi: &[f64], d: &SampleIndicator) -> Result<(Vec<f64>, Vec<f64>)> {
    if y.len() != pi.len() || y.len() != d.as_slice().len() {
        return invalid("population columns and indicator differ in length");
    }
    let idx = d.indices();
    if idx.is_empty() {
        return invalid("empty sample");
    }
    let vals = idx.iter().map(|&i| y[i]).collect();
    let w = idx.iter().map(|&i| 1.0 / pi[i]).collect();
    Ok((vals, w))
}
