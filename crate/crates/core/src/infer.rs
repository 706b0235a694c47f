//! Bootstrap confidence intervals for quantiles and tests of (conditional)
//! independence.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::estimate::{check_strata, MonotoneDependence, Quantile, Sample, Ties};
use crate::functional_refs;
use crate::resample::{bootstrap, bootstrap_many, BootstrapConfig, ResamplingDistribution, Scheme};
use crate::rng::SeedStream;

/// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy
/// about 1e-16.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_854_561,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, k| acc * x + k)
    }

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub point: f64,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub p_value: Option<f64>,
    pub alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha {alpha} outside (0, 1)"));
    }
    Ok(())
}

/// Normal-approximation interval `point + z_q S* / sqrt(n)` for
/// `q = alpha/2, 1 - alpha/2`.
pub fn ci_from_distribution(dist: &ResamplingDistribution, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let half = normal_quantile(1.0 - alpha / 2.0) * dist.s_star() / (dist.n as f64).sqrt();
    Ok(ConfidenceInterval {
        lower: dist.centre - half,
        upper: dist.centre + half,
        level: 1.0 - alpha,
        point: dist.centre,
    })
}

/// Interval for the p-quantile of `y` from a two-phase bootstrap.
pub fn quantile_ci(
    sample: &Sample,
    p: f64,
    alpha: f64,
    cfg: &BootstrapConfig,
    seed: &SeedStream,
) -> Result<ConfidenceInterval> {
    Ok(quantile_cis(sample, &[p], alpha, cfg, seed)?.remove(0))
}

/// Intervals for several quantiles from one set of bootstrap replicates.
pub fn quantile_cis(
    sample: &Sample,
    ps: &[f64],
    alpha: f64,
    cfg: &BootstrapConfig,
    seed: &SeedStream,
) -> Result<Vec<ConfidenceInterval>> {
    check_alpha(alpha)?;
    let qs = ps.iter().map(|&p| Quantile::new(p)).collect::<Result<Vec<_>>>()?;
    let dists = bootstrap_many(&functional_refs(&qs), sample, cfg, seed)?;
    dists
        .iter()
        .map(|d| {
            if d.s2_star == 0.0 && sample.y.iter().any(|v| *v != sample.y[0]) {
                log::warn!("{}: zero bootstrap spread, interval collapses to a point", d.label);
            }
            ci_from_distribution(d, alpha)
        })
        .collect()
}

/// Conditional independence test from a statistic and its replicates under
/// the null: `c = (1 - alpha)`-quantile of `|rho*|`, reject when
/// `|rho| > c`, p-value = share of `|rho*| >= |rho|`.
pub fn cond_test_from_null(statistic: f64, null: &[f64], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if null.is_empty() {
        return invalid("empty null distribution");
    }
    let mut abs: Vec<f64> = null.iter().map(|v| v.abs()).collect();
    abs.sort_unstable_by(f64::total_cmp);
    let m = abs.len();
    let k = ((1.0 - alpha) * m as f64 - 1e-9).ceil().max(1.0) as usize;
    let critical_value = abs[k.min(m) - 1];
    let exceed = abs.iter().filter(|v| **v >= statistic.abs()).count();
    Ok(TestResult {
        statistic,
        critical_value,
        reject: statistic.abs() > critical_value,
        p_value: Some(exceed as f64 / m as f64),
        alpha,
    })
}

/// Test of independence of `y` and `z` given the strata, on the Spearman
/// scale, with the null distribution from the conditional-null bootstrap.
pub fn cond_independence_test(
    sample: &Sample,
    alpha: f64,
    cfg: &BootstrapConfig,
    seed: &SeedStream,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    match &sample.t {
        Some(t) => check_strata(t, 2)?,
        None => return invalid("conditional test needs stratum labels"),
    }
    let rho = MonotoneDependence::spearman(true);
    let statistic = crate::Functional::evaluate(&rho, sample)?;
    // null replicates are in random draw order, so positional ties are random ties
    let rho_null = rho.with_ties(Ties::Ordinal);
    let null = bootstrap(&rho_null, sample, &cfg.scheme(Scheme::ConditionalNull), seed)?;
    cond_test_from_null(statistic, &null.estimates, alpha)
}

/// Marginal test: reject when 0 lies outside the interval for `gamma`.
pub fn marg_test_from_distribution(dist: &ResamplingDistribution, alpha: f64) -> Result<TestResult> {
    let ci = ci_from_distribution(dist, alpha)?;
    Ok(TestResult {
        statistic: ci.point,
        critical_value: ci.upper - ci.point,
        reject: !ci.contains(0.0),
        p_value: None,
        alpha,
    })
}

/// Test of marginal independence of `y` and `z` through an interval for
/// `gamma` with `g(s) = s^2` from the two-phase bootstrap.
pub fn marg_independence_test(
    sample: &Sample,
    alpha: f64,
    cfg: &BootstrapConfig,
    seed: &SeedStream,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let gamma = MonotoneDependence::gamma_square(false);
    let dist = bootstrap(&gamma, sample, &cfg.scheme(Scheme::TwoPhase), seed)?;
    marg_test_from_distribution(&dist, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{inclusion_probs, DesignKind};
    use crate::popgen::ModelSpec;

    /// Standard normal c.d.f. by Simpson integration of the density.
    fn phi_by_quadrature(z: f64) -> f64 {
        let steps = 20_000;
        let (a, b) = (0.0, z.abs());
        let h = (b - a) / steps as f64;
        let dens = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = dens(a) + dens(b);
        for k in 1..steps {
            s += dens(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let half = s * h / 3.0;
        if z >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    #[test]
    fn normal_quantile_reference_values() {
        // Reference values from an independent implementation.
        let cases = [
            (0.975, 1.959963984540054),
            (0.95, 1.6448536269514722),
            (0.995, 2.5758293035489004),
            (0.9, 1.2815515655446004),
            (0.3, -0.5244005127080409),
            (0.02425, -1.972961051311885),
            (1e-10, -6.361340902404056),
            (1e-300, -37.0470962993612),
        ];
        for (p, z) in cases {
            assert!((normal_quantile(p) - z).abs() < 1e-8 * z.abs().max(1.0), "p={p}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!(normal_quantile(1.5).is_nan());
        for p in [0.01, 0.2, 0.6, 0.99] {
            assert!((phi_by_quadrature(normal_quantile(p)) - p).abs() < 1e-10);
            assert!((normal_quantile(p) + normal_quantile(1.0 - p)).abs() < 1e-12);
        }
    }

    fn quantile_sample(seed: u64, n: usize) -> Sample {
        let pop = ModelSpec::QuantileModel { w_log_var: 0.125 }
            .generate(10 * n, &mut SeedStream::new(seed).rng())
            .unwrap();
        let pi = inclusion_probs(&pop.x, n).unwrap();
        let d = DesignKind::Pareto.draw(&pi, &mut SeedStream::new(seed + 1).rng()).unwrap();
        Sample::from_population(&pop, &pi, &d).unwrap()
    }

    #[test]
    fn intervals_nest_in_alpha() {
        let s = quantile_sample(1, 50);
        let cfg = BootstrapConfig::new(200, 500);
        let seed = SeedStream::new(3);
        let cis: Vec<ConfidenceInterval> =
            [0.01, 0.05, 0.1].iter().map(|&a| quantile_ci(&s, 0.5, a, &cfg, &seed).unwrap()).collect();
        for w in cis.windows(2) {
            assert!(w[0].lower < w[1].lower && w[1].upper < w[0].upper);
        }
        for ci in &cis {
            assert!(ci.lower <= ci.point && ci.point <= ci.upper);
        }
        // Shared replicates give the same interval as a single call.
        let many = quantile_cis(&s, &[0.25, 0.5], 0.05, &cfg, &seed).unwrap();
        assert_eq!(many[1], cis[1]);
        assert!(quantile_ci(&s, 0.5, 0.0, &cfg, &seed).is_err());
        assert!(quantile_ci(&s, 1.0, 0.05, &cfg, &seed).is_err());
    }

    #[test]
    fn interval_shrinks_to_point_as_alpha_grows() {
        let s = quantile_sample(2, 50);
        let cfg = BootstrapConfig::new(100, 500);
        let ci = quantile_ci(&s, 0.5, 1.0 - 1e-12, &cfg, &SeedStream::new(1)).unwrap();
        assert!(ci.length() < 1e-6 * ci.point.abs());
    }

    #[test]
    fn critical_value_rule() {
        let null: Vec<f64> = (1..=100).map(|k| if k % 2 == 0 { k as f64 } else { -(k as f64) }).collect();
        let r = cond_test_from_null(95.5, &null, 0.05).unwrap();
        assert_eq!(r.critical_value, 95.0);
        assert!(r.reject);
        assert_eq!(r.p_value, Some(0.05));
        let r = cond_test_from_null(-95.0, &null, 0.05).unwrap();
        assert!(!r.reject);
        assert_eq!(r.p_value, Some(0.06));
        let r = cond_test_from_null(0.0, &null, 0.1).unwrap();
        assert_eq!(r.critical_value, 90.0);
        assert_eq!(r.p_value, Some(1.0));
    }

    fn stratified_sample(seed: u64, n: usize, rho: f64) -> Sample {
        let pop = ModelSpec::StratifiedGaussian { rho_s: rho }
            .generate(10 * n, &mut SeedStream::new(seed).rng())
            .unwrap();
        let pi = inclusion_probs(&pop.x, n).unwrap();
        let d = DesignKind::Pareto.draw(&pi, &mut SeedStream::new(seed + 1).rng()).unwrap();
        Sample::from_population(&pop, &pi, &d).unwrap()
    }

    #[test]
    fn conditional_test_rejects_comonotone_data() {
        let mut s = stratified_sample(4, 150, 0.0);
        s.z = Some(s.y.iter().map(|v| 2.0 * v + 1.0).collect());
        let cfg = BootstrapConfig::new(200, 1500);
        let r = cond_independence_test(&s, 0.05, &cfg, &SeedStream::new(5)).unwrap();
        assert!(r.reject);
        assert_eq!(r.p_value, Some(0.0));
        assert!(r.statistic > 0.99);
    }

    #[test]
    fn conditional_test_names_thin_strata() {
        let s = Sample::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 2.0], vec![0.5; 3])
            .unwrap()
            .with_z(vec![3.0, 1.0, 2.0])
            .unwrap()
            .with_strata(vec![1, 1, 2])
            .unwrap();
        let err = cond_independence_test(&s, 0.05, &BootstrapConfig::new(10, 6), &SeedStream::new(1)).unwrap_err();
        assert!(matches!(err, crate::Error::DegenerateCell { ref cell, .. } if cell == "2"));
    }

    #[test]
    fn conditional_statistic_is_rank_invariant() {
        let s = stratified_sample(6, 100, 0.5);
        let mut t = s.clone();
        t.y = s.y.iter().map(|v| (v / 100.0).exp()).collect();
        t.z = Some(s.z.as_ref().unwrap().iter().map(|v| v.powi(3)).collect());
        let f = MonotoneDependence::spearman(true);
        use crate::Functional;
        assert_eq!(f.evaluate(&s).unwrap(), f.evaluate(&t).unwrap());
    }

    #[test]
    fn marginal_test_is_deterministic_and_detects_comonotone() {
        let pop = ModelSpec::MarshallOlkin { rho_s: 1.0, w_log_var: 0.4 }
            .generate(2500, &mut SeedStream::new(8).rng())
            .unwrap();
        let pi = inclusion_probs(&pop.x, 250).unwrap();
        let d = DesignKind::ConditionalPoisson.draw(&pi, &mut SeedStream::new(9).rng()).unwrap();
        let s = Sample::from_population(&pop, &pi, &d).unwrap();
        let cfg = BootstrapConfig::new(200, 2500);
        let a = marg_independence_test(&s, 0.05, &cfg, &SeedStream::new(1)).unwrap();
        let b = marg_independence_test(&s, 0.05, &cfg, &SeedStream::new(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.reject && a.p_value.is_none());
        assert!(a.critical_value > 0.0);
    }
}
