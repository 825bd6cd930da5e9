use marked_renewal::sim::batch_sample_epoch_pairs;
use marked_renewal::stats::{chi2_independence_test, permutation_dcov_test};
use marked_renewal::{make_case_laws, CaseDescriptor, EpochPair, EpochStatus, RandomStream, SimConfig};
use rand::Rng;

fn independent_pairs(n: usize, seed: u64) -> Vec<EpochPair> {
    let mut a = RandomStream::new(seed, 0).rng();
    let mut b = RandomStream::new(seed, 1).rng();
    (0..n)
        .map(|_| EpochPair {
            r0: a.random::<f64>(),
            r1: -b.random::<f64>().ln(),
            r0_status: EpochStatus::Observed,
            r1_status: EpochStatus::Observed,
        })
        .collect()
}

#[test]
fn chi_square_size_on_independent_streams() {
    let runs = 500;
    let rejections = (0..runs)
        .filter(|&s| chi2_independence_test(&independent_pairs(2000, s), 4, 0.05).unwrap().rejects())
        .count();
    let rate = rejections as f64 / runs as f64;
    assert!(rate <= 0.07, "rate {rate}");
}

#[test]
fn size_on_independent_cases() {
    let cases = [
        CaseDescriptor::A,
        CaseDescriptor::B { kappa: 1.0 },
        CaseDescriptor::C { kappa: 1.0, q0: 0.5 },
        CaseDescriptor::D { kappa: 0.5, theta: 1.0 },
        CaseDescriptor::E { kappa: 1.0, q0: 0.5, alpha: 1.0 },
    ];
    let seeds = 200u64;
    for case in &cases {
        let (t1, t2) = make_case_laws(case).unwrap();
        let (mut chi, mut perm) = (0usize, 0usize);
        for seed in 0..seeds {
            let cfg = SimConfig::new(t1.clone(), t2.clone(), 0.5, 1e3, RandomStream::new(seed, 0)).unwrap();
            let pairs = batch_sample_epoch_pairs(&cfg, 500);
            chi += usize::from(chi2_independence_test(&pairs, 4, 0.05).unwrap().rejects());
            perm += usize::from(permutation_dcov_test(&pairs, 499, 0.05, seed).unwrap().rejects());
        }
        // 0.05 plus two binomial standard errors at 200 runs.
        let limit = 0.05 + 2.0 * (0.05 * 0.95 / seeds as f64).sqrt();
        for (name, r) in [("chi2", chi), ("perm", perm)] {
            let rate = r as f64 / seeds as f64;
            assert!(rate <= limit, "{} {name}: {rate}", case.label());
        }
    }
}

#[test]
fn permutation_p_values_are_super_uniform() {
    let runs = 200;
    let mut ps: Vec<f64> = (0..runs)
        .map(|s| permutation_dcov_test(&independent_pairs(200, 1000 + s), 199, 0.05, s).unwrap().p_value)
        .collect();
    ps.sort_by(f64::total_cmp);
    let d_plus = ps
        .iter()
        .enumerate()
        .map(|(i, &u)| (i + 1) as f64 / runs as f64 - u)
        .fold(0.0, f64::max);
    assert!(d_plus <= 1.63 / (runs as f64).sqrt(), "D+ {d_plus}");
}

#[test]
fn strong_dependence_is_detected() {
    let mut rng = RandomStream::new(9, 0).rng();
    let pairs: Vec<EpochPair> = (0..500)
        .map(|_| {
            let x: f64 = rng.random();
            EpochPair {
                r0: x,
                r1: x * x + 0.05 * rng.random::<f64>(),
                r0_status: EpochStatus::Observed,
                r1_status: EpochStatus::Observed,
            }
        })
        .collect();
    assert!(chi2_independence_test(&pairs, 4, 0.05).unwrap().p_value < 1e-6);
    let perm = permutation_dcov_test(&pairs, 199, 0.05, 1).unwrap();
    assert!((perm.p_value - 1.0 / 200.0).abs() < 1e-15);
}
