use super::Sample;
use crate::designs::inclusion_probs;
use crate::error::{invalid, Error, Result};

/// Moments entering the covariance kernel of the Hájek process: sampling
/// fraction `f`, `d = E[pi (1 - pi)]`, `E[X]`, `E[1/X]`, and the conditional
/// moments `K_l(y) = E[X^l | Y <= y]` for `l = -1, +1` as step functions.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub f: f64,
    pub d: f64,
    pub mean_x: f64,
    pub mean_inv_x: f64,
    grid: Vec<f64>,
    k_minus: Vec<f64>,
    k_plus: Vec<f64>,
}

impl MomentSet {
    /// Build from explicit values. `grid` must be ascending; `k_minus[j]` and
    /// `k_plus[j]` hold the conditional moments for `y` in
    /// `[grid[j], grid[j + 1])`.
    pub fn new(
        f: f64,
        d: f64,
        mean_x: f64,
        mean_inv_x: f64,
        grid: Vec<f64>,
        k_minus: Vec<f64>,
        k_plus: Vec<f64>,
    ) -> Result<Self> {
        if grid.is_empty() || grid.len() != k_minus.len() || grid.len() != k_plus.len() {
            return invalid("conditional moment tables must be non-empty and aligned with the grid");
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("moment grid must be strictly increasing");
        }
        if !(f > 0.0 && f <= 1.0) {
            return invalid(format!("sampling fraction {f} outside (0, 1]"));
        }
        if !(d >= 0.0 && mean_x > 0.0 && mean_inv_x > 0.0) {
            return invalid("moments must be positive");
        }
        Ok(MomentSet { f, d, mean_x, mean_inv_x, grid, k_minus, k_plus })
    }

    /// Moments with `K_{-1}` and `K_{+1}` constant in `y`.
    pub fn constant(f: f64, d: f64, mean_x: f64, mean_inv_x: f64, k_minus: f64, k_plus: f64) -> Result<Self> {
        Self::new(f, d, mean_x, mean_inv_x, vec![f64::NEG_INFINITY], vec![k_minus], vec![k_plus])
    }

    /// Population moments for a πps design of size `n` on `x`.
    pub fn from_population(y: &[f64], x: &[f64], n: usize) -> Result<Self> {
        let pi = inclusion_probs(x, n)?;
        let w = vec![1.0; y.len()];
        let f = n as f64 / y.len() as f64;
        Self::from_weighted(y, x, &w, pi.values(), f)
    }

    /// Hájek plug-in estimates from a sample drawn from `population` units.
    pub fn from_sample(sample: &Sample, population: usize) -> Result<Self> {
        if population < sample.len() {
            return invalid("population smaller than the sample");
        }
        let f = sample.len() as f64 / population as f64;
        Self::from_weighted(&sample.y, &sample.x, &sample.weights(), &sample.pi, f)
    }

    fn from_weighted(y: &[f64], x: &[f64], w: &[f64], pi: &[f64], f: f64) -> Result<Self> {
        if y.is_empty() || x.len() != y.len() || w.len() != y.len() || pi.len() != y.len() {
            return invalid("moment inputs must be non-empty and of equal length");
        }
        let total: f64 = w.iter().sum();
        let wmean = |h: &dyn Fn(usize) -> f64| (0..y.len()).map(|i| w[i] * h(i)).sum::<f64>() / total;
        let d = wmean(&|i| pi[i] * (1.0 - pi[i]));
        let mean_x = wmean(&|i| x[i]);
        let mean_inv_x = wmean(&|i| 1.0 / x[i]);

        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_unstable_by(|&a, &b| y[a].total_cmp(&y[b]));
        let (mut grid, mut k_minus, mut k_plus) = (Vec::new(), Vec::new(), Vec::new());
        let (mut sw, mut s_inv, mut s_x) = (0.0, 0.0, 0.0);
        for (pos, &i) in order.iter().enumerate() {
            sw += w[i];
            s_inv += w[i] / x[i];
            s_x += w[i] * x[i];
            let last_of_tie = order.get(pos + 1).is_none_or(|&j| y[j] != y[i]);
            if last_of_tie {
                grid.push(y[i]);
                k_minus.push(s_inv / sw);
                k_plus.push(s_x / sw);
            }
        }
        Self::new(f, d, mean_x, mean_inv_x, grid, k_minus, k_plus)
    }

    fn step(&self, table: &[f64], y: f64) -> f64 {
        // Below the grid the value at the smallest point is used.
        let k = self.grid.partition_point(|g| *g <= y);
        table[k.saturating_sub(1)]
    }

    /// `E[1/X | Y <= y]`.
    pub fn k_minus(&self, y: f64) -> f64 {
        self.step(&self.k_minus, y)
    }

    /// `E[X | Y <= y]`.
    pub fn k_plus(&self, y: f64) -> f64 {
        self.step(&self.k_plus, y)
    }

    /// `A = E[X] E[1/X] / f`.
    pub fn design_effect(&self) -> f64 {
        self.mean_x * self.mean_inv_x / self.f
    }
}

/// `F(y ∧ t) - F(y) F(t)`.
pub fn kernel_c2(cdf: impl Fn(f64) -> f64, y: f64, t: f64) -> f64 {
    cdf(y.min(t)) - cdf(y) * cdf(t)
}

/// Design component of the kernel, from linearizing the Hájek estimator
/// under a high-entropy πps design.
pub fn kernel_c1(m: &MomentSet, cdf: impl Fn(f64) -> f64, y: f64, t: f64) -> Result<f64> {
    let parts = Parts::new(m, &cdf, y, t)?;
    let third = m.f * ((m.mean_x / m.f) * (parts.km_y + parts.km_t - m.mean_inv_x) - 1.0) * parts.fy * parts.ft;
    Ok(parts.first - parts.second - third)
}

/// The design component with the alternative grouping
/// `(E[X]/f)(K(y) + K(t) - E[1/X] - 1)` in the last term. It coincides with
/// [`kernel_c1`] only when `E[X] = f`, so it depends on the scale of `x`.
pub fn kernel_c1_as_printed(m: &MomentSet, cdf: impl Fn(f64) -> f64, y: f64, t: f64) -> Result<f64> {
    let parts = Parts::new(m, &cdf, y, t)?;
    let third = m.f * ((m.mean_x / m.f) * (parts.km_y + parts.km_t - m.mean_inv_x - 1.0)) * parts.fy * parts.ft;
    Ok(parts.first - parts.second - third)
}

/// Limiting covariance `C = C1 + f C2` of `sqrt(n) (F_H(y) - F(y))`.
pub fn kernel_c(m: &MomentSet, cdf: impl Fn(f64) -> f64, y: f64, t: f64) -> Result<f64> {
    Ok(kernel_c1(m, &cdf, y, t)? + m.f * kernel_c2(&cdf, y, t))
}

struct Parts {
    first: f64,
    second: f64,
    fy: f64,
    ft: f64,
    km_y: f64,
    km_t: f64,
}

impl Parts {
    fn new(m: &MomentSet, cdf: &impl Fn(f64) -> f64, y: f64, t: f64) -> Result<Self> {
        if !(m.d > 0.0) {
            return Err(Error::SingularKernel(format!("d = {} (no design variability)", m.d)));
        }
        let lo = y.min(t);
        let (fy, ft, flo) = (cdf(y), cdf(t), cdf(lo));
        let first = m.f * ((m.mean_x / m.f) * m.k_minus(lo) - 1.0) * flo;
        let second = m.f.powi(3) / m.d
            * (1.0 - m.k_plus(y) / m.mean_x)
            * (1.0 - m.k_plus(t) / m.mean_x)
            * fy
            * ft;
        Ok(Parts { first, second, fy, ft, km_y: m.k_minus(y), km_t: m.k_minus(t) })
    }
}
