//! Design-weighted estimators of distribution functions and of functionals
//! built on them, plus the limiting covariance kernel of the Hájek process.

mod edf;
mod gamma;
mod kernel;

pub use edf::{hajek_df, ht_df, naive_edf, WeightedEdf};
pub use gamma::{check_strata, gamma_g, gamma_g_with_ties, mid_df, ordinal_mid_df, MonotoneDependence, Ties};
pub use kernel::{kernel_c, kernel_c1, kernel_c1_as_printed, kernel_c2, MomentSet};

use crate::designs::{InclusionProbs, SampleIndicator};
use crate::error::{invalid, Result};
use crate::popgen::Population;

/// The sampled units with their design information.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub y: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub t: Option<Vec<u32>>,
    pub pi: Vec<f64>,
}

impl Sample {
    pub fn new(y: Vec<f64>, x: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return invalid("empty sample");
        }
        if x.len() != y.len() || pi.len() != y.len() {
            return invalid("sample columns differ in length");
        }
        if let Some(p) = pi.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return invalid(format!("inclusion probability {p} outside (0, 1]"));
        }
        Ok(Sample { y, z: None, x, t: None, pi })
    }

    pub fn with_z(mut self, z: Vec<f64>) -> Result<Self> {
        if z.len() != self.y.len() {
            return invalid("second study variable has the wrong length");
        }
        self.z = Some(z);
        Ok(self)
    }

    pub fn with_strata(mut self, t: Vec<u32>) -> Result<Self> {
        if t.len() != self.y.len() {
            return invalid("stratum labels have the wrong length");
        }
        self.t = Some(t);
        Ok(self)
    }

    /// Extract the units with `D_i = 1`.
    pub fn from_population(pop: &Population, pi: &InclusionProbs, d: &SampleIndicator) -> Result<Self> {
        if pi.population_size() != pop.len() || d.as_slice().len() != pop.len() {
            return invalid("population, probabilities and indicator differ in size");
        }
        let idx = d.indices();
        let take = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let mut s = Sample::new(take(&pop.y), take(&pop.x), take(pi.values()))?;
        if let Some(z) = &pop.z {
            s.z = Some(take(z));
        }
        if let Some(t) = &pop.t {
            s.t = Some(idx.iter().map(|&i| t[i]).collect());
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Design weights `1 / pi_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.pi.iter().map(|p| 1.0 / p).collect()
    }

    /// Hájek d.f. of `y`.
    pub fn hajek_df(&self) -> Result<WeightedEdf> {
        WeightedEdf::normalized(&self.y, &self.weights())
    }

    /// Hájek d.f. of the second study variable.
    pub fn hajek_df_z(&self) -> Result<WeightedEdf> {
        match &self.z {
            Some(z) => WeightedEdf::normalized(z, &self.weights()),
            None => invalid("sample has no second study variable"),
        }
    }
}

/// A real-valued functional of the distribution estimated from a sample.
pub trait Functional: Send + Sync {
    fn label(&self) -> String;
    fn evaluate(&self, sample: &Sample) -> Result<f64>;
}

/// The p-quantile of the Hájek d.f. of `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub p: f64,
}

impl Quantile {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return invalid(format!("quantile level {p} outside (0, 1)"));
        }
        Ok(Quantile { p })
    }
}

impl Functional for Quantile {
    fn label(&self) -> String {
        format!("quantile({})", self.p)
    }

    fn evaluate(&self, sample: &Sample) -> Result<f64> {
        sample.hajek_df()?.quantile(self.p)
    }
}
