use marked_renewal::sim::{batch_sample_epoch_pairs, sample_counts_at, simulate_marked_arrivals};
use marked_renewal::{make_case_laws, CaseDescriptor, EpochPair, ExtendedLaw, RandomStream, SimConfig};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn law(s: &str) -> ExtendedLaw {
    s.parse().unwrap()
}

fn config(t1: &str, t2: &str, p: f64, horizon: f64, seed: u64) -> SimConfig {
    SimConfig::new(law(t1), law(t2), p, horizon, RandomStream::new(seed, 0)).unwrap()
}

/// Two-sample Kolmogorov-Smirnov distance; `∞` sorts above every finite value.
fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn mark_streams_are_exchangeable() {
    let n = 100_000;
    let r1 = |seed| -> Vec<f64> {
        batch_sample_epoch_pairs(&config("exp(rate=1, shift=0.3)", "mix(0.2: point(inf), 0.8: exp(rate=2))", 0.4, 50.0, seed), n)
            .iter()
            .map(|p| p.r1)
            .collect()
    };
    let d = ks_distance(r1(1), r1(2));
    assert!(d < 2.0 * 1.63 / (n as f64).sqrt(), "KS distance {d}");
}

#[test]
fn poisson_counts_for_exponential_waits() {
    let (theta, t, runs) = (1.0, 10.0, 100_000usize);
    let cfg = config("exp(rate=1)", "exp(rate=1)", 0.5, 100.0, 5);
    let totals: Vec<usize> = (0..runs)
        .map(|i| {
            let (a, b) = sample_counts_at(&cfg, cfg.stream.substream(i as u64), t);
            a + b
        })
        .collect();
    let mean = totals.iter().sum::<usize>() as f64 / runs as f64;
    assert!((mean - theta * t).abs() <= 3.0 * (theta * t / runs as f64).sqrt(), "mean {mean}");

    // Pearson chi-square against Pois(θt), pooling tails to expected >= 5.
    let m = theta * t;
    let kmax = 40;
    let mut pmf = vec![(-m).exp()];
    for k in 1..=kmax {
        pmf.push(pmf[k - 1] * m / k as f64);
    }
    let mut observed = vec![0f64; kmax + 1];
    for &c in &totals {
        observed[c.min(kmax)] += 1.0;
    }
    let tail: f64 = 1.0 - pmf[..kmax].iter().sum::<f64>();
    pmf[kmax] = tail;
    let (mut cells, mut acc_o, mut acc_e) = (Vec::new(), 0.0, 0.0);
    for k in 0..=kmax {
        acc_o += observed[k];
        acc_e += pmf[k] * runs as f64;
        if acc_e >= 5.0 && (k == kmax || pmf[k + 1..].iter().sum::<f64>() * runs as f64 >= 5.0) {
            cells.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        let last = cells.last_mut().unwrap();
        last.0 += acc_o;
        last.1 += acc_e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat);
    assert!(p >= 0.01, "chi-square {stat} on {} cells, p = {p}", cells.len());
}

#[test]
fn case_d_margins_and_correlation() {
    let (t1, t2) = make_case_laws(&CaseDescriptor::D { kappa: 0.0, theta: 1.0 }).unwrap();
    let cfg = SimConfig::new(t1, t2, 0.5, 1e3, RandomStream::new(8, 0)).unwrap();
    let pairs: Vec<EpochPair> = batch_sample_epoch_pairs(&cfg, 1_000_000);
    assert!(pairs.iter().all(EpochPair::both_observed));
    let n = pairs.len() as f64;
    let m1 = pairs.iter().map(|p| p.r1).sum::<f64>() / n;
    let m0 = pairs.iter().map(|p| p.r0).sum::<f64>() / n;
    // R1 ~ Exp(pθ) has mean 2.
    assert!((m1 - 2.0).abs() <= 0.006, "mean r1 {m1}");
    let cov = pairs.iter().map(|p| (p.r1 - m1) * (p.r0 - m0)).sum::<f64>() / n;
    let v1 = pairs.iter().map(|p| (p.r1 - m1).powi(2)).sum::<f64>() / n;
    let v0 = pairs.iter().map(|p| (p.r0 - m0).powi(2)).sum::<f64>() / n;
    let corr = cov / (v0 * v1).sqrt();
    assert!(corr.abs() < 0.004, "correlation {corr}");
}

#[test]
fn defect_frequency_matches_case_c() {
    let q0: f64 = 0.5;
    let (t1, t2) = make_case_laws(&CaseDescriptor::C { kappa: 1.0, q0 }).unwrap();
    let cfg = SimConfig::new(t1, t2, 0.5, 10.0, RandomStream::new(4, 0)).unwrap();
    let n = 200_000;
    let pairs = batch_sample_epoch_pairs(&cfg, n);
    let both_inf = pairs.iter().filter(|p| p.r0.is_infinite() && p.r1.is_infinite()).count() as f64 / n as f64;
    // Both unobserved iff T1 = ∞. Exactly one iff T1 = κ and the burst carries a single mark.
    let p_first = 1.0 - q0 * q0;
    let single_mark = 2.0 * 0.5 * q0 / (1.0 - 0.5 * (1.0 - q0));
    let expected = q0 * q0;
    let one_inf = pairs.iter().filter(|p| p.r0.is_infinite() != p.r1.is_infinite()).count() as f64 / n as f64;
    let se = |x: f64| (x * (1.0 - x) / n as f64).sqrt();
    assert!((both_inf - expected).abs() <= 4.0 * se(expected), "{both_inf} vs {expected}");
    assert!((one_inf - p_first * single_mark).abs() <= 4.0 * se(p_first * single_mark));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn thinning_is_consistent(seed in 0u64..1000, p in 0.05..0.95f64, t in 0.0..15.0f64) {
        let cfg = config("mix(0.3: point(0), 0.7: exp(rate=1))", "mix(0.2: point(0), 0.8: erlang(k=2, rate=2))", p, 15.0, seed);
        let seq = simulate_marked_arrivals(&cfg);
        let (n0, n1) = seq.counts_at_time(t);
        prop_assert_eq!(n0 + n1, seq.epochs.iter().filter(|&&e| e <= t).count());
        prop_assert_eq!(sample_counts_at(&cfg, cfg.stream, t), (n0, n1));
    }
}
