//! The five waiting-time families for which `R0` and `R1` are independent,
//! structural classification of law pairs against them, and the side
//! conditions under which independence singles out the homogeneous Poisson
//! process.
//!
//! | case | `L(T1)`                                  | `L(T2)`                                  |
//! |------|------------------------------------------|------------------------------------------|
//! | A    | `δ_∞`                                    | anything                                 |
//! | B    | `δ_κ`                                    | `δ_0`                                    |
//! | C    | `(1-q0²)δ_κ + q0²δ_∞`                    | `(1-q0)δ_0 + q0δ_∞`                      |
//! | D    | `κ + Exp(θ)`                             | `Exp(θ)`                                 |
//! | E    | `κ + α·geom_N0(1-q0²)`                   | `(1-q0)δ_0 + q0·α·geom_N(1-q0²)`         |

use serde::{Deserialize, Serialize};

use crate::laws::{ExtendedLaw, LatticeStart, LawComponent, LawError};

/// Parameter recovery tolerance for structural matching.
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", content = "params")]
pub enum CaseDescriptor {
    A,
    B { kappa: f64 },
    C { kappa: f64, q0: f64 },
    D { kappa: f64, theta: f64 },
    E { kappa: f64, q0: f64, alpha: f64 },
    #[serde(rename = "none")]
    Unmatched,
}

impl CaseDescriptor {
    pub fn label(&self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B { .. } => "B",
            Self::C { .. } => "C",
            Self::D { .. } => "D",
            Self::E { .. } => "E",
            Self::Unmatched => "none",
        }
    }

    /// Same case with parameters equal within [`MATCH_TOL`].
    pub fn approx_eq(&self, other: &Self) -> bool {
        use CaseDescriptor::*;
        let close = |a: f64, b: f64| (a - b).abs() <= MATCH_TOL * a.abs().max(1.0);
        match (*self, *other) {
            (A, A) | (Unmatched, Unmatched) => true,
            (B { kappa: a }, B { kappa: b }) => close(a, b),
            (C { kappa: k1, q0: q1 }, C { kappa: k2, q0: q2 }) => close(k1, k2) && close(q1, q2),
            (D { kappa: k1, theta: t1 }, D { kappa: k2, theta: t2 }) => close(k1, k2) && close(t1, t2),
            (E { kappa: k1, q0: q1, alpha: a1 }, E { kappa: k2, q0: q2, alpha: a2 }) => {
                close(k1, k2) && close(q1, q2) && close(a1, a2)
            }
            _ => false,
        }
    }
}

fn check(ok: bool, what: &str) -> Result<(), LawError> {
    if ok {
        Ok(())
    } else {
        Err(LawError::InvalidParameter(what.to_owned()))
    }
}

/// Canonical `(L(T1), L(T2))` for a case. Case A uses `T2 = δ_∞`.
pub fn make_case_laws(desc: &CaseDescriptor) -> Result<(ExtendedLaw, ExtendedLaw), LawError> {
    let kappa_ok = |k: f64| check(k.is_finite() && k >= 0.0, "kappa must be finite and >= 0");
    let q0_ok = |q: f64| check(q > 0.0 && q < 1.0, "q0 must lie in (0, 1)");
    match *desc {
        CaseDescriptor::A => Ok((ExtendedLaw::point(f64::INFINITY)?, ExtendedLaw::point(f64::INFINITY)?)),
        CaseDescriptor::B { kappa } => {
            kappa_ok(kappa)?;
            Ok((ExtendedLaw::point(kappa)?, ExtendedLaw::point(0.0)?))
        }
        CaseDescriptor::C { kappa, q0 } => {
            kappa_ok(kappa)?;
            q0_ok(q0)?;
            let inf = LawComponent::point(f64::INFINITY)?;
            let t1 = ExtendedLaw::new(vec![(1.0 - q0 * q0, LawComponent::point(kappa)?), (q0 * q0, inf)])?;
            let t2 = ExtendedLaw::new(vec![(1.0 - q0, LawComponent::point(0.0)?), (q0, inf)])?;
            Ok((t1, t2))
        }
        CaseDescriptor::D { kappa, theta } => {
            kappa_ok(kappa)?;
            check(theta.is_finite() && theta > 0.0, "theta must be finite and > 0")?;
            Ok((ExtendedLaw::exponential(theta, kappa)?, ExtendedLaw::exponential(theta, 0.0)?))
        }
        CaseDescriptor::E { kappa, q0, alpha } => {
            kappa_ok(kappa)?;
            q0_ok(q0)?;
            check(alpha.is_finite() && alpha > 0.0, "alpha must be finite and > 0")?;
            let s = 1.0 - q0 * q0;
            let t1 = ExtendedLaw::single(LawComponent::geom_n0(s, alpha, kappa)?)?;
            let t2 = ExtendedLaw::new(vec![
                (1.0 - q0, LawComponent::point(0.0)?),
                (q0, LawComponent::geom_n(s, alpha, 0.0)?),
            ])?;
            Ok((t1, t2))
        }
        CaseDescriptor::Unmatched => Err(LawError::InvalidParameter("no laws for an unmatched case".into())),
    }
}

fn close(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= MATCH_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Atoms and non-atomic parts of a simplified law.
struct Shape {
    atoms: Vec<(f64, f64)>,
    other: Vec<(f64, LawComponent)>,
}

impl Shape {
    fn of(law: &ExtendedLaw) -> Self {
        let mut atoms = Vec::new();
        let mut other = Vec::new();
        for &(w, c) in law.simplified().components() {
            match c {
                LawComponent::PointMass { at } => atoms.push((at, w)),
                c => other.push((w, c)),
            }
        }
        Self { atoms, other }
    }

    fn weight_at(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(at, _)| if x.is_infinite() { at.is_infinite() } else { close(*at, x) })
            .map(|(_, w)| w)
            .sum()
    }
}

fn match_a(t1: &Shape, _t2: &Shape) -> Option<CaseDescriptor> {
    close(t1.weight_at(f64::INFINITY), 1.0).then_some(CaseDescriptor::A)
}

fn match_b(t1: &Shape, t2: &Shape) -> Option<CaseDescriptor> {
    match (t1.atoms.as_slice(), t1.other.is_empty()) {
        ([(kappa, w)], true) if kappa.is_finite() && close(*w, 1.0) && close(t2.weight_at(0.0), 1.0) => {
            Some(CaseDescriptor::B { kappa: *kappa })
        }
        _ => None,
    }
}

fn match_c(t1: &Shape, t2: &Shape) -> Option<CaseDescriptor> {
    if !(t1.other.is_empty() && t2.other.is_empty() && t1.atoms.len() == 2 && t2.atoms.len() == 2) {
        return None;
    }
    let q0 = t2.weight_at(f64::INFINITY);
    if !(q0 > MATCH_TOL && q0 < 1.0 - MATCH_TOL && close(t2.weight_at(0.0), 1.0 - q0)) {
        return None;
    }
    let (kappa, w) = *t1.atoms.iter().find(|(at, _)| at.is_finite())?;
    (close(w, 1.0 - q0 * q0) && close(t1.weight_at(f64::INFINITY), q0 * q0))
        .then_some(CaseDescriptor::C { kappa, q0 })
}

fn match_d(t1: &Shape, t2: &Shape) -> Option<CaseDescriptor> {
    if !(t1.atoms.is_empty() && t2.atoms.is_empty()) {
        return None;
    }
    match (t1.other.as_slice(), t2.other.as_slice()) {
        (
            [(_, LawComponent::Exponential { rate, shift })],
            [(_, LawComponent::Exponential { rate: rate2, shift: shift2 })],
        ) if *shift2 == 0.0 && close(*rate, *rate2) => Some(CaseDescriptor::D {
            kappa: *shift,
            theta: *rate,
        }),
        _ => None,
    }
}

fn match_e(t1: &Shape, t2: &Shape) -> Option<CaseDescriptor> {
    let (s, alpha, kappa) = match (t1.atoms.as_slice(), t1.other.as_slice()) {
        ([], [(_, LawComponent::LatticeGeometric { success, scale, shift, start: LatticeStart::Zero })]) => {
            (*success, *scale, *shift)
        }
        _ => None?,
    };
    // After normalization T2's geom_N part reads α + α·geom_N0(s).
    let (q0, s2, alpha2, shift2) = match (t2.atoms.as_slice(), t2.other.as_slice()) {
        (
            [(zero, w0)],
            [(w, LawComponent::LatticeGeometric { success, scale, shift, start: LatticeStart::Zero })],
        ) if *zero == 0.0 && close(*w0 + *w, 1.0) => (*w, *success, *scale, *shift),
        _ => None?,
    };
    let consistent = q0 > MATCH_TOL
        && q0 < 1.0 - MATCH_TOL
        && close(s, 1.0 - q0 * q0)
        && close(s2, s)
        && close(alpha2, alpha)
        && close(shift2, alpha);
    consistent.then_some(CaseDescriptor::E { kappa, q0, alpha })
}

/// Every case whose shape the pair matches; at most one for valid input.
pub fn matching_cases(t1: &ExtendedLaw, t2: &ExtendedLaw) -> Vec<CaseDescriptor> {
    let (s1, s2) = (Shape::of(t1), Shape::of(t2));
    [match_a, match_b, match_c, match_d, match_e]
        .iter()
        .filter_map(|m| m(&s1, &s2))
        .collect()
}

/// The case of the pair, or [`CaseDescriptor::Unmatched`].
pub fn classify_pair(t1: &ExtendedLaw, t2: &ExtendedLaw) -> CaseDescriptor {
    let found = matching_cases(t1, t2);
    debug_assert!(found.len() <= 1, "cases overlap: {found:?}");
    found.first().copied().unwrap_or(CaseDescriptor::Unmatched)
}

/// Whether `R0` and `R1` are independent for this pair.
pub fn predict_independence(t1: &ExtendedLaw, t2: &ExtendedLaw) -> bool {
    classify_pair(t1, t2) != CaseDescriptor::Unmatched
}

/// Side conditions of the HPP characterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// `P(T1 < ε) > 0` for every `ε > 0`.
    pub support_near_zero: bool,
    pub t2_non_arithmetic: bool,
    /// `P(T1 = 0) = 0`.
    pub t1_no_atom_at_zero: bool,
    pub no_delay: bool,
    pub no_defect: bool,
    pub no_simultaneous_arrivals: bool,
    /// Non-delayed, non-defective and without simultaneous arrivals.
    pub ordinary: bool,
    pub theorem_applies: bool,
    /// Human-readable reasons for the verdict.
    pub notes: Vec<String>,
}

impl Theorem1Report {
    /// First failing condition, if the characterization does not apply.
    pub fn failing_condition(&self) -> Option<&'static str> {
        if self.theorem_applies {
            None
        } else if !self.support_near_zero {
            Some("support of T1 does not reach 0")
        } else {
            Some("T2 is arithmetic and T1 has an atom at 0 (and the process is not ordinary)")
        }
    }
}

fn same_law(a: &ExtendedLaw, b: &ExtendedLaw) -> bool {
    let (a, b) = (a.simplified(), b.simplified());
    a.components().len() == b.components().len()
        && a.components().iter().zip(b.components()).all(|((wa, ca), (wb, cb))| {
            close(*wa, *wb) && ca == cb
        })
}

pub fn theorem1_report(t1: &ExtendedLaw, t2: &ExtendedLaw) -> Theorem1Report {
    let support_near_zero = t1.support_reaches_zero();
    let t2_non_arithmetic = t2.is_arithmetic_on_lattice().is_none();
    let t1_no_atom_at_zero = t1.mass_at(0.0) == 0.0;
    let no_delay = same_law(t1, t2);
    let no_defect = t1.mass_at_infinity() == 0.0 && t2.mass_at_infinity() == 0.0;
    let no_simultaneous_arrivals = t1.mass_at(0.0) == 0.0 && t2.mass_at(0.0) == 0.0;
    let ordinary = no_delay && no_defect && no_simultaneous_arrivals;
    let main_branch = support_near_zero && (t2_non_arithmetic || t1_no_atom_at_zero);
    let ordinary_branch = support_near_zero && ordinary;
    let theorem_applies = main_branch || ordinary_branch;

    let mut notes = Vec::new();
    if ordinary && !support_near_zero {
        notes.push(
            "process is ordinary, but the support of T1 does not reach 0; \
             the near-zero support condition is still required here"
                .to_owned(),
        );
    }
    if !support_near_zero {
        notes.push("T1 keeps away from 0 (e.g. a deterministic delay)".to_owned());
    }
    if support_near_zero && !t2_non_arithmetic && !t1_no_atom_at_zero && !ordinary {
        notes.push("T2 is arithmetic while T1 has an atom at 0".to_owned());
    }
    if theorem_applies {
        notes.push("R0 and R1 are independent if and only if N is a homogeneous Poisson process".to_owned());
    }
    Theorem1Report {
        support_near_zero,
        t2_non_arithmetic,
        t1_no_atom_at_zero,
        no_delay,
        no_defect,
        no_simultaneous_arrivals,
        ordinary,
        theorem_applies,
        notes,
    }
}

/// Parameter sweep used for round-trip and exclusivity checks.
pub fn case_sweep() -> Vec<CaseDescriptor> {
    let kappas = [0.0, 0.5, 2.0];
    let thetas = [0.5, 1.0, 3.0];
    let q0s = [0.2, 0.5, 0.8];
    let alphas = [0.5, 1.0, 2.0];
    let mut out = vec![CaseDescriptor::A];
    for &kappa in &kappas {
        out.push(CaseDescriptor::B { kappa });
        for &q0 in &q0s {
            out.push(CaseDescriptor::C { kappa, q0 });
            for &alpha in &alphas {
                out.push(CaseDescriptor::E { kappa, q0, alpha });
            }
        }
        for &theta in &thetas {
            out.push(CaseDescriptor::D { kappa, theta });
        }
    }
    out
}
