//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! `ACCEPTANCE_ONLY=4,8` restricts the run to the listed criteria.
//! Set `ACCEPTANCE_PILOT=1` to also print the power pilot table that fixed
//! the frozen power thresholds below.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use marked_renewal::analytics::{
    c2_roots, discrete_renewal_mass, incompatibility_polynomials, remark3_incompatibility, remark3_monte_carlo,
    remark3_probs, summed_tail_residual,
};
use marked_renewal::characterization::case_sweep;
use marked_renewal::sim::batch_sample_epoch_pairs;
use marked_renewal::stats::{
    chi2_independence_test, hpp_decision, mc_laplace_estimate, permutation_dcov_test, HppOptions, HppVerdict,
};
use marked_renewal::transforms::{grid_scan, joint_lt, residual_eq1, residual_eq2, Equation, GridSpec};
use marked_renewal::{make_case_laws, CaseDescriptor, EpochPair, ExtendedLaw, RandomStream, SimConfig};
use sha2::{Digest, Sha256};

const ALPHA: f64 = 0.05;
const PERMUTATIONS: usize = 499;
const BINS: usize = 4;
/// Seeds for size and headline power rates.
const SEEDS: u64 = 200;
/// Seeds per sample size in the power-monotonicity sweep.
const SWEEP_SEEDS: u64 = 100;
/// Frozen from the pilot (`ACCEPTANCE_PILOT=1`, seeds 1000..1100), which
/// measured power 1.00 for both tests at every n in {500, 1000, 2000, 5000,
/// 8000} on erlang(2,1) pairs.
const ERLANG_POWER_THRESHOLD: f64 = 0.95;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn law(s: &str) -> ExtendedLaw {
    s.parse().unwrap()
}

fn laws(case: CaseDescriptor) -> (ExtendedLaw, ExtendedLaw) {
    make_case_laws(&case).unwrap()
}

fn sample(t1: &ExtendedLaw, t2: &ExtendedLaw, p: f64, horizon: f64, n: usize, seed: u64) -> Vec<EpochPair> {
    let cfg = SimConfig::new(t1.clone(), t2.clone(), p, horizon, RandomStream::new(seed, 0)).unwrap();
    batch_sample_epoch_pairs(&cfg, n)
}

fn witnesses() -> Vec<(ExtendedLaw, ExtendedLaw)> {
    vec![
        (law("point(1)"), law("point(1)")),
        (law("erlang(k=2, rate=1)"), law("erlang(k=2, rate=1)")),
    ]
}

fn grid() -> GridSpec {
    GridSpec::square(0.0, 5.0, 21)
}

fn c1_eq2_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let cases = case_sweep();
    for case in &cases {
        let (t1, t2) = laws(*case);
        worst = worst.max(grid_scan(&t1, &t2, grid(), Equation::Eq2).unwrap().max_abs);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("{} parameter sets, max |eq2| = {worst:.3e}, {elapsed:.2?}", cases.len()),
    )
}

fn c2_witnesses() -> Outcome {
    let w = witnesses();
    let maxima: Vec<f64> = w
        .iter()
        .map(|(t1, t2)| grid_scan(t1, t2, grid(), Equation::Eq2).unwrap().max_abs)
        .collect();
    let spot: Vec<f64> = w.iter().map(|(t1, t2)| residual_eq2(t1, t2, 1.0, 1.0)).collect();
    let e = |x: f64| (-x).exp();
    // Exact values: point(1) gives 2e⁻³ - e⁻⁴ - e⁻²; erlang(2,1) gives -1/72.
    let exact = [2.0 * e(3.0) - e(4.0) - e(2.0), -1.0 / 72.0];
    let quoted = [-0.054076, -0.0138889];
    let exact_ok = spot.iter().zip(exact).all(|(s, x)| (s - x).abs() <= 1e-9);
    // The quoted spot values carry 6-7 significant digits.
    let quoted_ok = spot.iter().zip(quoted).all(|(s, q)| (s - q).abs() <= 1e-6);
    outcome(
        maxima.iter().all(|&m| m >= 0.01) && exact_ok && quoted_ok,
        format!(
            "max |eq2| = {:.4} / {:.4}; at (1,1): {:.9} / {:.9}",
            maxima[0], maxima[1], spot[0], spot[1]
        ),
    )
}

fn c3_factorization() -> Outcome {
    let start = Instant::now();
    let mut pairs: Vec<(ExtendedLaw, ExtendedLaw)> = case_sweep().into_iter().map(laws).collect();
    pairs.extend(witnesses());
    let axis = grid().axis();
    let mut worst: f64 = 0.0;
    for (t1, t2) in &pairs {
        for p in [0.1, 0.5, 0.9] {
            for &l in &axis {
                for &m in &axis {
                    let denom = (1.0 - (1.0 - p) * t2.laplace(l)) * (1.0 - p * t2.laplace(m));
                    let predicted = p * (1.0 - p) * residual_eq2(t1, t2, l, m) / denom;
                    worst = worst.max((residual_eq1(t1, t2, p, l, m) - predicted).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("{} law pairs x 3 p, max deviation {worst:.3e}, {elapsed:.2?}", pairs.len()),
    )
}

fn representative_cases() -> [CaseDescriptor; 5] {
    [
        CaseDescriptor::A,
        CaseDescriptor::B { kappa: 0.5 },
        CaseDescriptor::C { kappa: 0.5, q0: 0.5 },
        CaseDescriptor::D { kappa: 0.5, theta: 1.0 },
        CaseDescriptor::E {
            kappa: 0.5,
            q0: 0.5,
            alpha: 1.0,
        },
    ]
}

fn c4_mc_laplace() -> Outcome {
    let start = Instant::now();
    let grid = [0.5, 1.0, 2.0];
    let (mut checks, mut misses, mut worst_z) = (0, Vec::new(), 0.0f64);
    for case in representative_cases() {
        let (t1, t2) = laws(case);
        for seed in [1, 2, 3] {
            let pairs = sample(&t1, &t2, 0.5, 1000.0, 1_000_000, seed);
            for &l in &grid {
                for &m in &grid {
                    let (est, se) = mc_laplace_estimate(&pairs, l, m).unwrap();
                    let exact = joint_lt(&t1, &t2, 0.5, l, m);
                    // A degenerate estimator (se = 0) must match to rounding.
                    let ok = (est - exact).abs() <= 3.0 * se + 1e-12;
                    if se > 0.0 {
                        worst_z = worst_z.max((est - exact).abs() / se);
                    }
                    checks += 1;
                    if !ok {
                        misses.push(format!("{} seed {seed} ({l},{m})", case.label()));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        misses.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{checks} comparisons, max |z| = {worst_z:.2}, misses {misses:?}, {elapsed:.2?}"
        ),
    )
}

fn c5_burst_events() -> Outcome {
    let start = Instant::now();
    let cf = remark3_probs(0.5, 0.5).unwrap().as_array();
    let expected = [1.0 / 3.0, 1.0 / 3.0, 3.0 / 32.0, 0.5, 3.0 / 16.0];
    let closed_ok = cf.iter().zip(expected).all(|(a, b)| (a - b).abs() <= 1e-12);
    let mut detail = Vec::new();
    let mut mc_ok = true;
    for (i, case) in [
        CaseDescriptor::E {
            kappa: 1.0,
            q0: 0.5,
            alpha: 1.0,
        },
        CaseDescriptor::C { kappa: 1.0, q0: 0.5 },
    ]
    .into_iter()
    .enumerate()
    {
        let check = remark3_monte_carlo(&case, 0.5, 1_000_000, 100 + i as u64).unwrap();
        let max_z = check.rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
        let gap = check.independence_gap;
        let gap_z = gap.estimate.abs() / gap.stderr;
        mc_ok &= max_z <= 3.0 && gap_z >= 5.0;
        detail.push(format!(
            "{}: max |z| {max_z:.2}, gap {:.5} ({gap_z:.1} se)",
            case.label(),
            gap.estimate
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        closed_ok && mc_ok && elapsed < Duration::from_secs(30),
        format!(
            "closed form {}; {}; {elapsed:.2?}",
            if closed_ok { "exact" } else { "MISMATCH" },
            detail.join("; ")
        ),
    )
}

fn c6_incompatibility() -> Outcome {
    let values: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let mut min_max = f64::INFINITY;
    for &q0 in &values {
        for &p in &values {
            let (c1, c2) = remark3_incompatibility(q0, p).unwrap();
            min_max = min_max.min(c1.abs().max(c2.abs()));
        }
    }
    let mut solved = 0;
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let q0 = 0.05 + 0.1 * k as f64;
        // c2 vanishes only at p = 0 and p = 1, outside the open square.
        for p in c2_roots(q0) {
            let (c1, c2) = incompatibility_polynomials(q0, p);
            let target = q0 * (1.0 + q0) - 2.0 * q0 * q0;
            worst = worst.max(c2.abs()).max((c1 - target).abs());
            solved += 1;
        }
    }
    outcome(
        min_max > 0.0 && solved >= 10 && worst <= 1e-9,
        format!("grid min max(|c1|,|c2|) = {min_max:.4e}; {solved} solved points, max error {worst:.2e}"),
    )
}

fn c7_stationarity() -> Outcome {
    let start = Instant::now();
    let mut dev: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for q0 in [0.2, 0.5, 0.8] {
        let target = (1.0 - q0 * q0) / q0;
        let v = discrete_renewal_mass(q0, 500).unwrap();
        dev = dev.max(v.iter().map(|x| (x - target).abs()).fold(0.0, f64::max));
        tail = tail.max(summed_tail_residual(q0, 500).unwrap());
    }
    let elapsed = start.elapsed();
    outcome(
        dev <= 1e-10 && tail <= 1e-14 && elapsed < Duration::from_secs(1),
        format!("max |v_n - target| = {dev:.2e}, tail residual {tail:.2e}, {elapsed:.2?}"),
    )
}

/// Rejection rates of (chi-square, permutation) over `seeds` samples.
fn rejection_rates(t1: &ExtendedLaw, t2: &ExtendedLaw, n: usize, seeds: std::ops::Range<u64>) -> (f64, f64) {
    let count = (seeds.end - seeds.start) as f64;
    let (mut chi, mut perm) = (0usize, 0usize);
    for seed in seeds {
        let pairs = sample(t1, t2, 0.5, 1e4, n, seed);
        chi += usize::from(chi2_independence_test(&pairs, BINS, ALPHA).unwrap().rejects());
        perm += usize::from(permutation_dcov_test(&pairs, PERMUTATIONS, ALPHA, seed).unwrap().rejects());
    }
    (chi as f64 / count, perm as f64 / count)
}

fn c8_size() -> Outcome {
    let start = Instant::now();
    let (t1, t2) = laws(CaseDescriptor::D { kappa: 0.0, theta: 1.0 });
    let (chi, perm) = rejection_rates(&t1, &t2, 2000, 0..SEEDS);
    let elapsed = start.elapsed();
    outcome(
        chi <= 0.07 && perm <= 0.07 && elapsed < Duration::from_secs(300),
        format!("case D, n=2000, {SEEDS} seeds: chi2 {chi:.3}, perm {perm:.3}, {elapsed:.2?}"),
    )
}

fn c9_power() -> Outcome {
    let point = law("point(1)");
    let erlang = law("erlang(k=2, rate=1)");
    let (chi, perm) = rejection_rates(&point, &point, 2000, 0..SEEDS);
    let mut ok = chi >= 0.95 && perm >= 0.95;
    let mut detail = vec![format!("point n=2000 ({SEEDS} seeds): chi2 {chi:.3}, perm {perm:.3}")];
    for (name, t) in [("point", &point), ("erlang", &erlang)] {
        let rates: Vec<(f64, f64)> = [500, 2000, 8000]
            .iter()
            .map(|&n| rejection_rates(t, t, n, 0..SWEEP_SEEDS))
            .collect();
        let monotone = rates.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        ok &= monotone;
        if name == "erlang" {
            ok &= rates[1].0 >= ERLANG_POWER_THRESHOLD && rates[1].1 >= ERLANG_POWER_THRESHOLD;
        }
        detail.push(format!("{name} n=500/2000/8000: {rates:?}"));
    }
    outcome(ok, detail.join("; "))
}

fn c10_end_to_end() -> Outcome {
    let opts = |seed| HppOptions {
        seed,
        ..HppOptions::default()
    };
    let (t1, t2) = laws(CaseDescriptor::D { kappa: 0.0, theta: 1.0 });
    let consistent = (0..SEEDS)
        .filter(|&s| {
            let pairs = sample(&t1, &t2, 0.5, 1e4, 2000, s);
            hpp_decision(Some((&t1, &t2)), &pairs, &opts(s)).unwrap().verdict == HppVerdict::HppConsistent
        })
        .count() as f64
        / SEEDS as f64;

    let inapplicable = |case: CaseDescriptor| {
        let (a, b) = laws(case);
        let pairs = sample(&a, &b, 0.5, 1e4, 2000, 7);
        matches!(
            hpp_decision(Some((&a, &b)), &pairs, &opts(7)).unwrap().verdict,
            HppVerdict::Theorem1Inapplicable { .. }
        )
    };
    let delayed = inapplicable(CaseDescriptor::D { kappa: 1.0, theta: 1.0 });
    let lattice = [0.0, 0.5].iter().all(|&kappa| {
        inapplicable(CaseDescriptor::E {
            kappa,
            q0: 0.5,
            alpha: 1.0,
        })
    });

    let erlang = law("erlang(k=2, rate=1)");
    let not_hpp = (0..SWEEP_SEEDS)
        .filter(|&s| {
            let pairs = sample(&erlang, &erlang, 0.5, 1e4, 5000, s);
            hpp_decision(Some((&erlang, &erlang)), &pairs, &opts(s)).unwrap().verdict == HppVerdict::NotHpp
        })
        .count() as f64
        / SWEEP_SEEDS as f64;

    outcome(
        consistent >= 0.93 && delayed && lattice && not_hpp >= ERLANG_POWER_THRESHOLD,
        format!(
            "case D consistent {consistent:.3}; delayed D inapplicable {delayed}; \
             case E inapplicable {lattice}; erlang n=5000 not-HPP {not_hpp:.3}"
        ),
    )
}

fn run_cli(args: &[&str], threads: usize, dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_marked-renewal"))
        .args(args)
        .args(["--threads", &threads.to_string()])
        .current_dir(dir)
        .output()
        .expect("binary runs");
    let mut h = Sha256::new();
    h.update(&out.stdout);
    for name in ["out.csv", "out.json"] {
        if let Ok(bytes) = std::fs::read(dir.join(name)) {
            h.update(&bytes);
        }
    }
    let digest = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    (out.status.code().unwrap_or(-1), digest)
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let pairs_csv = dir.path().join("pairs.csv");
    let sim = Command::new(env!("CARGO_BIN_EXE_marked-renewal"))
        .args(["simulate", "--case", "d", "--n", "500", "--seed", "5", "-o"])
        .arg(&pairs_csv)
        .output()
        .unwrap();
    assert!(sim.status.success());
    let pairs = pairs_csv.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--t1", "exp(rate=1)", "--t2", "exp(rate=1)", "--n", "1000", "--seed", "7", "-o", "out.csv"],
        vec!["simulate", "--case", "e", "--n", "300", "--seed", "7", "--format", "json", "-o", "out.json"],
        vec!["verify-eq", "--case", "d", "--expect", "zero", "--format", "csv"],
        vec!["test-independence", "-i", pairs, "--seed", "3"],
        vec!["hpp-test", "--case", "d", "--n", "300", "--permutations", "199", "--seed", "4"],
        vec!["remark-checks", "--n", "20000", "--seed", "3"],
        vec!["stationarity", "--q0", "0.5", "--n-max", "500"],
        vec!["classify", "--t1", "exp(rate=2,shift=1)", "--t2", "exp(rate=2)"],
    ];
    let mut bad = Vec::new();
    for cmd in &commands {
        let runs: Vec<(i32, String)> = [1, 1, 4]
            .iter()
            .map(|&t| {
                for f in ["out.csv", "out.json"] {
                    let _ = std::fs::remove_file(dir.path().join(f));
                }
                run_cli(cmd, t, dir.path())
            })
            .collect();
        if runs[0].0 != 0 || runs.iter().any(|r| r != &runs[0]) {
            bad.push(cmd[0]);
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} commands x (1, 1, 4 threads); differing: {bad:?}", commands.len()),
    )
}

fn pilot() {
    let erlang = law("erlang(k=2, rate=1)");
    let point = law("point(1)");
    for (name, t) in [("erlang(2,1)", &erlang), ("point(1)", &point)] {
        for n in [500, 1000, 2000, 5000, 8000] {
            let (chi, perm) = rejection_rates(t, t, n, 1000..1100);
            println!("pilot {name} n={n}: chi2 {chi:.3}, perm {perm:.3}");
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters: nothing to enumerate.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    if std::env::var_os("ACCEPTANCE_PILOT").is_some() {
        pilot();
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("eq2 identity over the independence cases", c1_eq2_identity),
        ("necessity witnesses", c2_witnesses),
        ("p-invariance factorization", c3_factorization),
        ("Monte Carlo vs closed-form transform", c4_mc_laplace),
        ("burst-event probabilities", c5_burst_events),
        ("incompatibility polynomials", c6_incompatibility),
        ("discrete stationarity", c7_stationarity),
        ("test size on case D", c8_size),
        ("test power on counterexamples", c9_power),
        ("end-to-end HPP decision", c10_end_to_end),
        ("determinism across runs and threads", c11_determinism),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let (mut failed, mut ran) = (0, 0);
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let o = run();
        failed += usize::from(!o.passed);
        println!(
            "{} criterion {:>2} ({name}): {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
