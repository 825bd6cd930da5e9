use marked_renewal::laws::LatticeStart;
use marked_renewal::{ExtendedLaw, LawComponent, RandomStream};
use proptest::prelude::*;

/// Components whose finite support avoids `(0, gap)`.
fn component(gap: f64) -> impl Strategy<Value = LawComponent> {
    let shift = gap..gap + 3.0;
    prop_oneof![
        Just(LawComponent::point(0.0).unwrap()),
        Just(LawComponent::point(f64::INFINITY).unwrap()),
        shift.clone().prop_map(|a| LawComponent::point(a).unwrap()),
        (0.1..5.0f64, shift.clone()).prop_map(|(r, s)| LawComponent::exponential(r, s).unwrap()),
        (1u32..5, 0.1..5.0f64, shift.clone()).prop_map(|(k, r, s)| LawComponent::erlang(k, r, s).unwrap()),
        (shift.clone(), 0.01..2.0f64).prop_map(|(lo, w)| LawComponent::uniform(lo, lo + w).unwrap()),
        (0.05..0.95f64, gap..gap + 2.0, prop::bool::ANY).prop_map(|(s, a, zero)| {
            let start = if zero { LatticeStart::Zero } else { LatticeStart::One };
            LawComponent::lattice(s, a, 0.0, start).unwrap()
        }),
    ]
}

fn law(gap: f64) -> impl Strategy<Value = ExtendedLaw> {
    prop::collection::vec((1u32..10, component(gap)), 1..4).prop_map(|parts| {
        let total: u32 = parts.iter().map(|p| p.0).sum();
        let mut acc = 0.0;
        let n = parts.len();
        let comps = parts
            .into_iter()
            .enumerate()
            .map(|(i, (w, c))| {
                let weight = if i + 1 == n { 1.0 - acc } else { f64::from(w) / f64::from(total) };
                acc += weight;
                (weight, c)
            })
            .collect();
        ExtendedLaw::new(comps).unwrap()
    })
}

proptest! {
    #[test]
    fn laplace_is_nonincreasing(l in law(0.0), a in 0.0..20.0f64, d in 0.0..20.0f64) {
        prop_assert!(l.laplace(a) >= l.laplace(a + d) - 1e-15);
        prop_assert!(l.laplace(0.0) <= 1.0 + 1e-12);
    }

    // With no mass in (0, 0.4), laplace(50) - mass_at(0) <= e^{-20}.
    #[test]
    fn laplace_tends_to_atom_at_zero(l in law(0.4)) {
        prop_assert!((l.laplace(50.0) - l.mass_at(0.0)).abs() <= 1e-8);
    }

    #[test]
    fn print_parse_round_trip(l in law(0.0)) {
        let text = l.to_string();
        let back: ExtendedLaw = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
    }
}

#[test]
fn laplace_matches_monte_carlo() {
    let laws = [
        "exp(rate=1)",
        "exp(rate=2, shift=0.5)",
        "erlang(k=3, rate=2)",
        "unif(0.2, 1.7)",
        "geomN0(s=0.75, scale=1, shift=0.5)",
        "mix(0.25: point(0), 0.25: point(inf), 0.5: geomN(s=0.4, scale=0.5))",
        "mix(0.3: point(1), 0.7: exp(rate=1))",
        "point(inf)",
    ];
    let n = 1_000_000;
    let bound = 4.0 / (n as f64).sqrt();
    for (k, text) in laws.iter().enumerate() {
        let l: ExtendedLaw = text.parse().unwrap();
        let mut rng = RandomStream::new(11, k as u64).rng();
        let draws: Vec<f64> = (0..n).map(|_| l.sample(&mut rng)).collect();
        for lambda in [0.5, 1.0, 2.0] {
            let mc = draws
                .iter()
                .filter(|x| x.is_finite())
                .map(|x| (-lambda * x).exp())
                .sum::<f64>()
                / n as f64;
            let exact = l.laplace(lambda);
            assert!(
                (mc - exact).abs() <= bound,
                "{text} at {lambda}: mc {mc} vs {exact}"
            );
        }
    }
}

#[test]
fn samples_stay_in_support() {
    let l: ExtendedLaw = "mix(0.5: unif(1, 2), 0.5: geomN(s=0.5, scale=0.25, shift=3))"
        .parse()
        .unwrap();
    let mut rng = RandomStream::new(2, 0).rng();
    for _ in 0..10_000 {
        let x = l.sample(&mut rng);
        let on_lattice = ((x - 3.0) / 0.25).fract().abs() < 1e-9 && x >= 3.25;
        assert!((1.0..=2.0).contains(&x) || on_lattice, "{x}");
    }
}
