//! Arithmetic-lattice detection by rational reduction.
//!
//! Lattice membership cannot be decided for arbitrary floating-point reals.
//! Every finite support generator (atom locations, lattice shifts and spans)
//! is reduced to a fraction with denominator at most [`DENOMINATOR_BOUND`];
//! a generator that does not reduce makes the law incommensurable.

use serde::{Deserialize, Serialize};

use super::{ExtendedLaw, LawComponent};

pub const DENOMINATOR_BOUND: u64 = 1_000_000;

/// Relative tolerance for accepting a rational approximation.
const REDUCTION_TOL: f64 = 1e-13;

/// Lattice structure of the finite support of a law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lattice {
    /// Largest span `α` with all finite support in `α·N0`.
    Span(f64),
    /// Finite support is `{0}` or empty, so every span qualifies.
    Trivial,
}

impl Lattice {
    pub fn span(self) -> Option<f64> {
        match self {
            Self::Span(a) => Some(a),
            Self::Trivial => None,
        }
    }
}

/// Best rational approximation `num/den` of `x ≥ 0` with `den ≤ bound`,
/// accepted only if it reproduces `x` to within rounding.
pub fn rational_approx(x: f64, bound: u64) -> Option<(u64, u64)> {
    if !(x.is_finite() && x >= 0.0) || x > 1e12 {
        return None;
    }
    // Continued-fraction convergents h/k.
    let (mut h_prev, mut h) = (1u128, x.floor() as u128);
    let (mut k_prev, mut k) = (0u128, 1u128);
    let mut frac = x - x.floor();
    let mut best = (h, k);
    for _ in 0..64 {
        if close(best.0, best.1, x) || frac <= 0.0 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as u128;
        let h_next = a * h + h_prev;
        let k_next = a * k + k_prev;
        if k_next > u128::from(bound) {
            break;
        }
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
        best = (h, k);
    }
    close(best.0, best.1, x).then(|| (best.0 as u64, best.1 as u64))
}

fn close(num: u128, den: u128, x: f64) -> bool {
    (num as f64 / den as f64 - x).abs() <= REDUCTION_TOL * x.max(1.0)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Finite support generators of a component, or `None` for continuous parts.
fn generators(c: &LawComponent, out: &mut Vec<f64>) -> Option<()> {
    match *c {
        LawComponent::PointMass { at } => {
            if at.is_finite() && at > 0.0 {
                out.push(at);
            }
            Some(())
        }
        // Support κ + α·{start, start+1, ...} spans the lattice gcd(κ, α)·Z.
        LawComponent::LatticeGeometric { scale, shift, .. } => {
            out.push(scale);
            if shift > 0.0 {
                out.push(shift);
            }
            Some(())
        }
        _ => None,
    }
}

pub(super) fn lattice_of(law: &ExtendedLaw) -> Option<Lattice> {
    let mut gens = Vec::new();
    for (_, c) in law.components() {
        generators(c, &mut gens)?;
    }
    if gens.is_empty() {
        return Some(Lattice::Trivial);
    }
    let fracs = gens
        .iter()
        .map(|&g| rational_approx(g, DENOMINATOR_BOUND))
        .collect::<Option<Vec<_>>>()?;
    // gcd(n_i/d_i) = gcd(n_i·L/d_i) / L with L = lcm(d_i).
    let mut lcm: u128 = 1;
    for &(_, d) in &fracs {
        let d = u128::from(d);
        lcm = lcm.checked_mul(d / gcd(lcm, d))?;
    }
    let mut g: u128 = 0;
    for &(n, d) in &fracs {
        let scaled = u128::from(n).checked_mul(lcm / u128::from(d))?;
        g = gcd(g, scaled);
    }
    Some(Lattice::Span(g as f64 / lcm as f64))
}
