use std::collections::BTreeMap;

use super::{Functional, Sample};
use crate::error::{invalid, Error, Result};

/// Fail with [`Error::DegenerateCell`] naming every stratum with fewer than
/// `min` units.
pub fn check_strata(t: &[u32], min: usize) -> Result<()> {
    let mut cells: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in t {
        *cells.entry(c).or_default() += 1;
    }
    let small: Vec<String> = cells.iter().filter(|(_, n)| **n < min).map(|(c, _)| c.to_string()).collect();
    if small.is_empty() {
        Ok(())
    } else {
        Err(Error::DegenerateCell {
            cell: small.join(","),
            reason: format!("fewer than {min} sampled units"),
        })
    }
}

/// Weighted mid-distribution function at each point: mass strictly below
/// plus half the mass tied with the point, over total mass.
///
/// With equal weights and no ties this is `(rank - 1/2) / n`.
pub fn mid_df(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut below = 0.0;
    let mut start = 0;
    while start < order.len() {
        let v = values[order[start]];
        let mut end = start;
        let mut tied = 0.0;

        while end < order.len() && values[order[end]] == v {
            tied += weights[order[end]];
            end += 1;
        }
        let mid = (below + 0.5 * tied) / total;
        for &i in &order[start..end] {
            out[i] = mid;
        }
        below += tied;
        start = end;
    }
    out
}

/// Like [`mid_df`] but tied values are ordered by position, so each unit
/// gets the mass strictly before it in that order plus half its own.
///
/// When the order of the units is random this breaks ties at random.
pub fn ordinal_mid_df(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut below = 0.0;
    for i in order {
        out[i] = (below + 0.5 * weights[i]) / total;
        below += weights[i];
    }
    out
}

/// How tied values share the d.f. mass at their common value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ties {
    /// Every tied unit gets the mid-d.f. value ([`mid_df`]).
    #[default]
    Mid,
    /// Ties broken by position ([`ordinal_mid_df`]).
    Ordinal,
}

impl Ties {
    fn df(self, values: &[f64], weights: &[f64]) -> Vec<f64> {
        match self {
            Ties::Mid => mid_df(values, weights),
            Ties::Ordinal => ordinal_mid_df(values, weights),
        }
    }
}

/// Plug-in monotone dependence measure
/// `sum w_i [g(|F_i + G_i - 1|) - g(|F_i - G_i|)] / sum w_i`
/// where `F_i`, `G_i` are weighted mid-d.f. values of `y_i` and `z_i`.
///
/// With `strata`, both marginals are computed within each stratum and the
/// average runs over all units. A stratum holding a single unit gives it
/// mid-d.f. values of 1/2 and so contributes zero.
pub fn gamma_g(
    y: &[f64],
    z: &[f64],
    weights: &[f64],
    strata: Option<&[u32]>,
    g: impl Fn(f64) -> f64,
) -> Result<f64> {
    gamma_g_with_ties(y, z, weights, strata, g, Ties::Mid)
}

/// [`gamma_g`] with a choice of tie handling.
pub fn gamma_g_with_ties(
    y: &[f64],
    z: &[f64],
    weights: &[f64],
    strata: Option<&[u32]>,
    g: impl Fn(f64) -> f64,
    ties: Ties,
) -> Result<f64> {
    let n = y.len();
    if n == 0 || z.len() != n || weights.len() != n || strata.is_some_and(|t| t.len() != n) {
        return invalid("gamma needs non-empty columns of equal length");
    }
    let mut f = vec![0.0; n];
    let mut gz = vec![0.0; n];
    match strata {
        None => {
            f = ties.df(y, weights);
            gz = ties.df(z, weights);
        }
        Some(t) => {
            let mut cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (i, &c) in t.iter().enumerate() {
                cells.entry(c).or_default().push(i);
            }
            for idx in cells.into_values() {
                let w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
                let fy = ties.df(&idx.iter().map(|&i| y[i]).collect::<Vec<_>>(), &w);
                let fz = ties.df(&idx.iter().map(|&i| z[i]).collect::<Vec<_>>(), &w);
                for (k, &i) in idx.iter().enumerate() {
                    f[i] = fy[k];
                    gz[i] = fz[k];
                }
            }
        }
    }
    let total: f64 = weights.iter().sum();
    let acc: f64 = (0..n)
        .map(|i| weights[i] * (g((f[i] + gz[i] - 1.0).abs()) - g((f[i] - gz[i]).abs())))
        .sum();
    Ok(acc / total)
}

fn square(s: f64) -> f64 {
    s * s
}

/// `scale * gamma_g` of `(y, z)` as a functional of a sample, optionally
/// conditional on the stratum labels.
#[derive(Debug, Clone, Copy)]
pub struct MonotoneDependence {
    pub g: fn(f64) -> f64,
    pub conditional: bool,
    pub scale: f64,
    pub ties: Ties,
}

impl MonotoneDependence {
    /// `gamma` with `g(s) = s^2`.
    pub fn gamma_square(conditional: bool) -> Self {
        MonotoneDependence { g: square, conditional, scale: 1.0, ties: Ties::Mid }
    }

    pub fn with_ties(mut self, ties: Ties) -> Self {
        self.ties = ties;
        self
    }

    /// `3 gamma` with `g(s) = s^2`, the Spearman-scaled version.
    pub fn spearman(conditional: bool) -> Self {
        MonotoneDependence { g: square, conditional, scale: 3.0, ties: Ties::Mid }
    }
}

impl Functional for MonotoneDependence {
    fn label(&self) -> String {
        let what = if self.scale == 3.0 { "spearman" } else { "gamma" };
        if self.conditional {
            format!("{what}|strata")
        } else {
            what.to_string()
        }
    }

    fn evaluate(&self, s: &Sample) -> Result<f64> {
        let Some(z) = &s.z else {
            return invalid("dependence measure needs a second study variable");
        };
        let strata = if self.conditional {
            match &s.t {
                Some(t) => Some(t.as_slice()),
                None => return invalid("conditional dependence needs stratum labels"),
            }
        } else {
            None
        };
        Ok(self.scale * gamma_g_with_ties(&s.y, z, &s.weights(), strata, self.g, self.ties)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use rand::Rng;

    fn ranks(v: &[f64]) -> Vec<f64> {
        // Brute-force midranks, 1-based.
        v.iter()
            .map(|&a| {
                let below = v.iter().filter(|&&b| b < a).count() as f64;
                let tied = v.iter().filter(|&&b| b == a).count() as f64;
                below + (tied + 1.0) / 2.0
            })
            .collect()
    }

    fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn mid_df_equal_weights_untied() {
        let v = [3.0, 1.0, 2.0, 5.0];
        assert_eq!(mid_df(&v, &[1.0; 4]), vec![0.625, 0.125, 0.375, 0.875]);
        let tied = mid_df(&[1.0, 1.0, 2.0], &[1.0; 3]);
        assert_eq!(tied, vec![1.0 / 3.0, 1.0 / 3.0, 5.0 / 6.0]);
    }

    #[test]
    fn ordinal_ties_follow_position() {
        assert_eq!(ordinal_mid_df(&[2.0, 1.0, 2.0], &[1.0; 3]), vec![0.5, 1.0 / 6.0, 5.0 / 6.0]);
        let v = [0.3, 0.1, 0.2];
        assert_eq!(ordinal_mid_df(&v, &[1.0, 2.0, 1.0]), mid_df(&v, &[1.0, 2.0, 1.0]));
    }

    #[test]
    fn three_gamma_matches_spearman_on_equal_weights() {
        let mut rng = SeedStream::new(3).rng();
        for n in [5usize, 20, 200] {
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let z: Vec<f64> = y.iter().map(|v| v + 0.5 * rng.random::<f64>()).collect();
            let g = gamma_g(&y, &z, &vec![1.0; n], None, square).unwrap();
            let rho = spearman_oracle(&y, &z);
            let nn = n as f64;
            assert!((3.0 * g - rho * (1.0 - 1.0 / (nn * nn))).abs() < 1e-12, "n={n}");
            assert!((3.0 * g - rho).abs() <= 1.0 / (nn * nn) + 1e-12);
        }
    }

    #[test]
    fn comonotone_reaches_one_third() {
        let n = 2000;
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let g = gamma_g(&y, &y, &vec![1.0; n], None, square).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn independent_data_centre_on_zero() {
        let mut rng = SeedStream::new(8).rng();
        let n = 20_000;
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let w: Vec<f64> = (0..n).map(|_| 1.0 + rng.random::<f64>()).collect();
        let g = gamma_g(&y, &z, &w, None, square).unwrap();
        // sd of 3 gamma is about 1/sqrt(n) under independence.
        assert!((3.0 * g).abs() < 3.0 / (n as f64).sqrt(), "{g}");
    }

    #[test]
    fn conditional_version_pools_within_strata() {
        // Perfect dependence within strata, reversed levels across strata.
        let y = [1.0, 2.0, 3.0, 10.0, 20.0, 30.0];
        let z = [30.0, 40.0, 50.0, 1.0, 2.0, 3.0];
        let t = [1, 1, 1, 2, 2, 2];
        let w = [1.0; 6];
        let cond = gamma_g(&y, &z, &w, Some(&t), square).unwrap();
        let within = gamma_g(&y[..3], &z[..3], &w[..3], None, square).unwrap();
        assert!((cond - within).abs() < 1e-15);
        assert!(cond > 0.0);
        assert!(gamma_g(&y, &z, &w, None, square).unwrap() < cond);
    }

    #[test]
    fn singleton_strata() {
        let err = check_strata(&[1, 1, 7, 3], 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { ref cell, .. } if cell == "3,7"));
        assert!(check_strata(&[1, 1, 7, 7], 2).is_ok());
        let with = gamma_g(&[1.0, 2.0, 3.0], &[1.0, 2.0, 9.0], &[1.0; 3], Some(&[1, 1, 7]), square).unwrap();
        let without = gamma_g(&[1.0, 2.0], &[1.0, 2.0], &[1.0; 2], None, square).unwrap();
        assert!((with - without * 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn invariant_under_monotone_transforms() {
        let mut rng = SeedStream::new(5).rng();
        let n = 60;
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let z: Vec<f64> = y.iter().map(|v| v * v + rng.random::<f64>()).collect();
        let t: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
        let w: Vec<f64> = (0..n).map(|_| 1.0 + 4.0 * rng.random::<f64>()).collect();
        let a = gamma_g(&y, &z, &w, Some(&t), square).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| v.exp() * 100.0).collect();
        let z2: Vec<f64> = z.iter().map(|v| v.powi(3) - 7.0).collect();
        let b = gamma_g(&y2, &z2, &w, Some(&t), square).unwrap();
        assert_eq!(a, b);
    }
}
