use super::*;
use crate::estimate::{MonotoneDependence, Quantile};

fn toy_sample() -> Sample {
    Sample::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0, 2.0, 4.0, 8.0, 5.0], vec![0.1, 0.2, 0.4, 0.8, 0.5]).unwrap()
}

#[test]
fn phase1_counts_follow_the_multinomial() {
    let s = toy_sample();
    let big_n = 40;
    let runs = 100_000;
    let w = s.weights();
    let total: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|v| v / total).collect();
    let mut sum = [0.0; 5];
    let mut sq = [0.0; 5];
    let mut cross01 = 0.0;
    let seed = SeedStream::new(11);
    for r in 0..runs {
        let pp = phase1_pseudo_population(&s, big_n, &mut seed.child(r).rng()).unwrap();
        assert_eq!(pp.counts.iter().sum::<usize>(), big_n);
        assert_eq!(pp.len(), big_n);
        for i in 0..5 {
            let c = pp.counts[i] as f64;
            sum[i] += c;
            sq[i] += c * c;
        }
        cross01 += (pp.counts[0] * pp.counts[1]) as f64;
    }
    let runs_f = runs as f64;
    let nf = big_n as f64;
    for i in 0..5 {
        let mean = sum[i] / runs_f;
        let var = sq[i] / runs_f - mean * mean;
        let expect_var = nf * p[i] * (1.0 - p[i]);
        assert!((mean - nf * p[i]).abs() < 3.0 * (expect_var / runs_f).sqrt(), "unit {i}: mean {mean}");
        assert!((var / expect_var - 1.0).abs() < 0.03, "unit {i}: var {var} vs {expect_var}");
    }
    let cov = cross01 / runs_f - (sum[0] / runs_f) * (sum[1] / runs_f);
    let expect_cov = -nf * p[0] * p[1];
    assert!((cov / expect_cov - 1.0).abs() < 0.05, "cov {cov} vs {expect_cov}");
}

#[test]
fn phase1_equal_weights_are_symmetric() {
    let s = Sample::new(vec![1.0, 2.0, 3.0, 4.0], vec![1.0; 4], vec![0.4; 4]).unwrap();
    let runs = 20_000;
    let mut sum = [0usize; 4];
    for r in 0..runs {
        let pp = phase1_pseudo_population(&s, 10, &mut SeedStream::new(2).child(r).rng()).unwrap();
        for (i, total) in sum.iter_mut().enumerate() {
            *total += pp.counts[i];
            // Every copy carries its source unit's values.
        }
        for (k, &v) in pp.y.iter().enumerate() {
            assert_eq!(pp.x[k], 1.0);
            assert!(s.y.contains(&v));
        }
    }
    let se = (10.0 * 0.25 * 0.75 / runs as f64).sqrt();
    for c in sum {
        assert!((c as f64 / runs as f64 - 2.5).abs() < 4.0 * se);
    }
}

#[test]
fn phase1_rejects_population_smaller_than_sample() {
    assert!(phase1_pseudo_population(&toy_sample(), 3, &mut SeedStream::new(1).rng()).is_err());
}

#[test]
fn phase2_probabilities_and_size() {
    let s = Sample::new(vec![1.0, 2.0], vec![3.0, 3.0], vec![0.5, 0.5]).unwrap();
    let pp = phase1_pseudo_population(&s, 8, &mut SeedStream::new(1).rng()).unwrap();
    let (d, pi) = phase2_redraw(&pp, 3, DesignKind::Pareto, &mut SeedStream::new(2).rng()).unwrap();
    assert!(pi.values().iter().all(|p| (p - 3.0 / 8.0).abs() < 1e-15));
    assert_eq!(d.size(), 3);

    let pp = phase1_pseudo_population(&toy_sample(), 8, &mut SeedStream::new(3).rng()).unwrap();
    let draws = 200_000;
    let mut hits = [0usize; 8];
    let mut pi_star = None;
    for r in 0..draws {
        let (d, pi) = phase2_redraw(&pp, 3, DesignKind::Pareto, &mut SeedStream::new(4).child(r).rng()).unwrap();
        assert_eq!(d.size(), 3);
        for i in d.indices() {
            hits[i] += 1;
        }
        pi_star = Some(pi);
    }
    for (h, p) in hits.iter().zip(pi_star.unwrap().values()) {
        assert!((*h as f64 / draws as f64 - p).abs() < 0.015);
    }
}

#[test]
fn resampled_hajek_is_proper() {
    let pp = phase1_pseudo_population(&toy_sample(), 20, &mut SeedStream::new(5).rng()).unwrap();
    let (d, pi) = phase2_redraw(&pp, 4, DesignKind::ConditionalPoisson, &mut SeedStream::new(6).rng()).unwrap();
    let f = resampled_hajek(&pp, &d, &pi).unwrap();
    assert!((f.total_mass() - 1.0).abs() < 1e-12);
    let star = resampled_sample(&pp, &d, &pi).unwrap();
    assert_eq!(star.len(), 4);
    assert_eq!(star.hajek_df().unwrap(), f);
}

#[test]
fn degenerate_values_give_zero_spread() {
    let s = Sample::new(vec![7.0; 6], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
    let cfg = BootstrapConfig::new(50, 30);
    let r = bootstrap(&Quantile::new(0.5).unwrap(), &s, &cfg, &SeedStream::new(1)).unwrap();
    assert!(r.z_values.iter().all(|z| *z == 0.0));
    assert_eq!(r.s2_star, 0.0);
    assert_eq!(r.centre, 7.0);
}

#[test]
fn bootstrap_is_deterministic_across_schedules() {
    let s = toy_sample();
    let q = Quantile::new(0.5).unwrap();
    let base = BootstrapConfig::new(64, 25);
    let a = bootstrap(&q, &s, &base.execution(Execution::Sequential), &SeedStream::new(9)).unwrap();
    let b = crate::par::with_threads(Some(4), || bootstrap(&q, &s, &base, &SeedStream::new(9)).unwrap());
    assert_eq!(a, b);
    let c = bootstrap(&q, &s, &base, &SeedStream::new(10)).unwrap();
    assert_ne!(a.estimates, c.estimates);
    let edf = a.edf().unwrap();
    assert!((edf.total_mass() - 1.0).abs() < 1e-12);
    assert!(a.s2_star >= 0.0);
}

#[test]
fn many_functionals_share_replicates() {
    let s = toy_sample();
    let q1 = Quantile::new(0.25).unwrap();
    let q2 = Quantile::new(0.75).unwrap();
    let cfg = BootstrapConfig::new(30, 25);
    let seed = SeedStream::new(3);
    let both = bootstrap_many(&[&q1, &q2], &s, &cfg, &seed).unwrap();
    assert_eq!(both[0], bootstrap(&q1, &s, &cfg, &seed).unwrap());
    assert_eq!(both[1], bootstrap(&q2, &s, &cfg, &seed).unwrap());
}

struct FailsAbove(f64);

impl Functional for FailsAbove {
    fn label(&self) -> String {
        "fails-above".into()
    }

    fn evaluate(&self, s: &Sample) -> Result<f64> {
        let m = s.hajek_df()?.quantile(0.5)?;
        if m > self.0 {
            Err(Error::NumericFailure("too large".into()))
        } else {
            Ok(m)
        }
    }
}

#[test]
fn failures_beyond_one_percent_abort() {
    let s = toy_sample();
    let cfg = BootstrapConfig::new(200, 25);
    let err = bootstrap(&FailsAbove(2.5), &s, &cfg, &SeedStream::new(1)).unwrap_err();
    assert!(matches!(err, Error::NumericFailure(ref m) if m.contains("fails-above")));
    let ok = bootstrap(&FailsAbove(100.0), &s, &cfg, &SeedStream::new(1)).unwrap();
    assert_eq!(ok.failed, 0);
    assert_eq!(ok.replicates(), 200);
}

fn spearman_equal(a: &[f64], b: &[f64]) -> f64 {
    3.0 * crate::estimate::gamma_g(a, b, &vec![1.0; a.len()], None, |s| s * s).unwrap()
}

#[test]
fn null_pseudo_population_breaks_dependence() {
    let n = 60;
    let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let s = Sample::new(y.clone(), vec![1.0; n], vec![0.1; n])
        .unwrap()
        .with_z(y.clone())
        .unwrap()
        .with_strata(vec![1; n])
        .unwrap();
    let reps = 200;
    let big_n = 600;
    let rhos: Vec<f64> = (0..reps)
        .map(|r| {
            let pp = h0_pseudo_population(&s, big_n, &mut SeedStream::new(4).child(r).rng()).unwrap();
            spearman_equal(&pp.y, pp.z.as_ref().unwrap())
        })
        .collect();
    let mean = rhos.iter().sum::<f64>() / reps as f64;
    // sd of a single pseudo-population correlation is about 1/sqrt(N).
    let se = 1.0 / ((big_n * reps as usize) as f64).sqrt();
    assert!(mean.abs() < 3.0 * se * 1.5, "mean rho {mean}");
}

#[test]
fn null_pseudo_population_strata_frequencies() {
    let t = vec![1, 1, 2, 2, 2, 3];
    let pi = vec![0.1, 0.2, 0.4, 0.4, 0.2, 0.05];
    let s = Sample::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![1.0; 6], pi.clone())
        .unwrap()
        .with_z(vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0])
        .unwrap()
        .with_strata(t.clone())
        .unwrap();
    let big_n = 200_000;
    let pp = h0_pseudo_population(&s, big_n, &mut SeedStream::new(7).rng()).unwrap();
    let w: Vec<f64> = pi.iter().map(|p| 1.0 / p).collect();
    let total: f64 = w.iter().sum();
    for label in 1..=3u32 {
        let expect: f64 = t.iter().zip(&w).filter(|(c, _)| **c == label).map(|(_, w)| w / total).sum();
        let got = pp.t.as_ref().unwrap().iter().filter(|c| **c == label).count() as f64 / big_n as f64;
        let se = (expect * (1.0 - expect) / big_n as f64).sqrt();
        assert!((got - expect).abs() < 3.0 * se, "stratum {label}: {got} vs {expect}");
    }
    // Values never cross strata, and the size variable is the label.
    for k in 0..pp.len() {
        let label = pp.t.as_ref().unwrap()[k];
        assert_eq!(pp.x[k], f64::from(label));
        let src = s.y.iter().position(|v| *v == pp.y[k]).unwrap();
        assert_eq!(t[src], label);
    }
}

#[test]
fn conditional_null_bootstrap_is_centred_at_zero() {
    let n = 80;
    let y: Vec<f64> = (0..n).map(|i| (i * 7 % 80) as f64).collect();
    let t: Vec<u32> = (0..n).map(|i| 1 + (i % 2) as u32).collect();
    let s = Sample::new(y.clone(), t.iter().map(|&c| f64::from(c)).collect(), vec![0.1; n])
        .unwrap()
        .with_z(y)
        .unwrap()
        .with_strata(t)
        .unwrap();
    let cfg = BootstrapConfig::new(400, 800).scheme(Scheme::ConditionalNull);
    let r = bootstrap(&MonotoneDependence::spearman(true), &s, &cfg, &SeedStream::new(2)).unwrap();
    assert_eq!(r.centre, 0.0);
    let mean = r.estimates.iter().sum::<f64>() / r.estimates.len() as f64;
    let sd = (r.s2_star / n as f64).sqrt();
    assert!(mean.abs() < 4.0 * sd / (r.estimates.len() as f64).sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn holmberg_counts() {
    let s = Sample::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], vec![0.5, 0.25, 1.0]).unwrap();
    let pp = holmberg_pseudo_population(&s, &mut SeedStream::new(1).rng());
    assert_eq!(pp.counts, vec![2, 4, 1]);

    let s = toy_sample();
    let target: f64 = s.weights().iter().sum();
    let runs = 100_000;
    let var: f64 = s.weights().iter().map(|w| (w - w.floor()) * (1.0 - (w - w.floor()))).sum();
    let mean = (0..runs)
        .map(|r| holmberg_pseudo_population(&s, &mut SeedStream::new(3).child(r).rng()).len() as f64)
        .sum::<f64>()
        / runs as f64;
    assert!((mean - target).abs() < 3.0 * (var / runs as f64).sqrt(), "{mean} vs {target}");
}

#[test]
fn efron_is_deterministic_and_equal_weight() {
    let s = toy_sample();
    let a = efron_resample(&s, 5, &mut SeedStream::new(1).rng()).unwrap();
    let b = efron_resample(&s, 5, &mut SeedStream::new(1).rng()).unwrap();
    assert_eq!(a, b);
    assert!(a.pi.iter().all(|p| *p == 1.0));
    let q = Quantile::new(0.5).unwrap();
    let r1 = efron_bootstrap(&q, &s, 40, Execution::Sequential, &SeedStream::new(2)).unwrap();
    let r2 = efron_bootstrap(&q, &s, 40, Execution::Parallel, &SeedStream::new(2)).unwrap();
    assert_eq!(r1, r2);
}
