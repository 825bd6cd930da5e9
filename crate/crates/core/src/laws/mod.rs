//! Probability laws on the extended half-line `[0, ∞]`.
//!
//! A law is a finite mixture of [`LawComponent`]s. Mass at `∞` (a defect) is
//! carried by `PointMass(∞)` components; samples use `f64::INFINITY` for it.

mod expr;
mod lattice;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

pub use expr::{parse_law_expr, ParseError};
pub use lattice::{rational_approx, Lattice, DENOMINATOR_BOUND};

/// Tolerance on the sum of mixture weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("mixture weight {0} outside (0, 1]")]
    InvalidWeight(f64),
    #[error("empty mixture")]
    Empty,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Which integer the lattice-geometric support starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeStart {
    /// `P(X = κ + αk) = s(1-s)^k`, `k ≥ 0`.
    Zero,
    /// `P(X = κ + αk) = s(1-s)^(k-1)`, `k ≥ 1`.
    One,
}

impl LatticeStart {
    pub fn offset(self) -> u64 {
        match self {
            Self::Zero => 0,
            Self::One => 1,
        }
    }
}

/// One parametric building block of an [`ExtendedLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LawComponent {
    /// Dirac mass at `at`, which may be `∞`.
    PointMass { at: f64 },
    /// `shift + Exp(rate)`.
    Exponential { rate: f64, shift: f64 },
    /// `shift + Gamma(shape, rate)` with integer shape.
    Erlang { shape: u32, rate: f64, shift: f64 },
    /// Uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// `shift + scale·G` with `G` geometric on `N0` or `N`.
    LatticeGeometric {
        success: f64,
        scale: f64,
        shift: f64,
        start: LatticeStart,
    },
}

fn nonneg(name: &str, v: f64) -> Result<(), LawError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(LawError::InvalidParameter(format!("{name} = {v} must be finite and >= 0")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), LawError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(LawError::InvalidParameter(format!("{name} = {v} must be finite and > 0")))
    }
}

impl LawComponent {
    pub fn point(at: f64) -> Result<Self, LawError> {
        Self::PointMass { at }.validated()
    }

    pub fn exponential(rate: f64, shift: f64) -> Result<Self, LawError> {
        Self::Exponential { rate, shift }.validated()
    }

    pub fn erlang(shape: u32, rate: f64, shift: f64) -> Result<Self, LawError> {
        Self::Erlang { shape, rate, shift }.validated()
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, LawError> {
        Self::Uniform { low, high }.validated()
    }

    pub fn lattice(success: f64, scale: f64, shift: f64, start: LatticeStart) -> Result<Self, LawError> {
        Self::LatticeGeometric {
            success,
            scale,
            shift,
            start,
        }
        .validated()
    }

    /// `geom_N0(s)` scaled by `scale` and shifted by `shift`.
    pub fn geom_n0(success: f64, scale: f64, shift: f64) -> Result<Self, LawError> {
        Self::lattice(success, scale, shift, LatticeStart::Zero)
    }

    /// `geom_N(s)` scaled by `scale` and shifted by `shift`.
    pub fn geom_n(success: f64, scale: f64, shift: f64) -> Result<Self, LawError> {
        Self::lattice(success, scale, shift, LatticeStart::One)
    }

    pub fn validate(&self) -> Result<(), LawError> {
        match *self {
            Self::PointMass { at } => {
                if at.is_nan() || at < 0.0 {
                    return Err(LawError::InvalidParameter(format!("point location {at} must be in [0, inf]")));
                }
                Ok(())
            }
            Self::Exponential { rate, shift } => {
                positive("rate", rate)?;
                nonneg("shift", shift)
            }
            Self::Erlang { shape, rate, shift } => {
                if shape == 0 {
                    return Err(LawError::InvalidParameter("erlang shape must be >= 1".into()));
                }
                positive("rate", rate)?;
                nonneg("shift", shift)
            }
            Self::Uniform { low, high } => {
                nonneg("low", low)?;
                if !(high.is_finite() && high > low) {
                    return Err(LawError::InvalidParameter(format!("uniform needs low < high < inf, got [{low}, {high}]")));
                }
                Ok(())
            }
            Self::LatticeGeometric {
                success, scale, shift, ..
            } => {
                if !(success > 0.0 && success < 1.0) {
                    return Err(LawError::InvalidParameter(format!("success = {success} must be in (0, 1)")));
                }
                positive("scale", scale)?;
                nonneg("shift", shift)
            }
        }
    }

    fn validated(self) -> Result<Self, LawError> {
        self.validate().map(|()| self)
    }

    /// `∫_[0,∞) e^{-λx} dL(x)`.
    pub fn laplace(&self, lambda: f64) -> f64 {
        match *self {
            Self::PointMass { at } => {
                if at.is_infinite() {
                    0.0
                } else {
                    (-lambda * at).exp()
                }
            }
            Self::Exponential { rate, shift } => (-lambda * shift).exp() * rate / (rate + lambda),
            Self::Erlang { shape, rate, shift } => {
                (-lambda * shift).exp() * (rate / (rate + lambda)).powi(shape as i32)
            }
            Self::Uniform { low, high } => {
                let width = high - low;
                let x = lambda * width;
                let ratio = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
                (-lambda * low).exp() * ratio
            }
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start,
            } => {
                let step = (-lambda * scale).exp();
                let first = if start == LatticeStart::One { step } else { 1.0 };
                (-lambda * shift).exp() * success * first / (1.0 - (1.0 - success) * step)
            }
        }
    }

    /// `∫_(0,∞) e^{-λx} dL(x)`: the transform without the atom at zero,
    /// evaluated without cancellation.
    pub fn laplace_positive(&self, lambda: f64) -> f64 {
        match *self {
            Self::PointMass { at } if at == 0.0 => 0.0,
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start: LatticeStart::Zero,
            } if shift == 0.0 => {
                let tail = (1.0 - success) * (-lambda * scale).exp();
                success * tail / (1.0 - tail)
            }
            _ => self.laplace(lambda),
        }
    }

    /// Atom mass at `x` (exact location match up to rounding).
    pub fn mass_at(&self, x: f64) -> f64 {
        match *self {
            Self::PointMass { at } => {
                if same_location(at, x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start,
            } => {
                if !x.is_finite() || x < shift - location_tol(shift) {
                    return 0.0;
                }
                let k = ((x - shift) / scale).round();
                if k < start.offset() as f64 || !same_location(shift + k * scale, x) {
                    return 0.0;
                }
                let failures = k - start.offset() as f64;
                success * (1.0 - success).powf(failures)
            }
            _ => 0.0,
        }
    }

    pub fn mass_at_infinity(&self) -> f64 {
        match *self {
            Self::PointMass { at } if at.is_infinite() => 1.0,
            _ => 0.0,
        }
    }

    /// `E[X; X < ∞]`.
    pub fn mean_finite_part(&self) -> f64 {
        match *self {
            Self::PointMass { at } => {
                if at.is_infinite() {
                    0.0
                } else {
                    at
                }
            }
            Self::Exponential { rate, shift } => shift + 1.0 / rate,
            Self::Erlang { shape, rate, shift } => shift + f64::from(shape) / rate,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start,
            } => {
                let failures = (1.0 - success) / success;
                shift + scale * (failures + start.offset() as f64)
            }
        }
    }

    /// Whether the component has no atoms.
    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            Self::Exponential { .. } | Self::Erlang { .. } | Self::Uniform { .. }
        )
    }

    /// Whether every neighbourhood `[0, ε)` carries positive mass.
    pub fn support_reaches_zero(&self) -> bool {
        match *self {
            Self::PointMass { at } => at == 0.0,
            Self::Exponential { shift, .. } | Self::Erlang { shift, .. } => shift == 0.0,
            Self::Uniform { low, .. } => low == 0.0,
            Self::LatticeGeometric { shift, start, .. } => shift == 0.0 && start == LatticeStart::Zero,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::PointMass { at } => at,
            Self::Exponential { rate, shift } => {
                shift + Exp::new(rate).expect("validated rate").sample(rng)
            }
            Self::Erlang { shape, rate, shift } => {
                let gamma = Gamma::new(f64::from(shape), 1.0 / rate).expect("validated erlang");
                shift + gamma.sample(rng)
            }
            Self::Uniform { low, high } => rng.random_range(low..high),
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start,
            } => {
                let failures = rand_distr::Geometric::new(success)
                    .expect("validated success")
                    .sample(rng);
                shift + scale * (failures + start.offset()) as f64
            }
        }
    }

    /// Equivalent component with `start = Zero` when this is a lattice law.
    ///
    /// `κ + α·geom_N(s)` and `(κ + α) + α·geom_N0(s)` are the same law.
    pub fn normalized(&self) -> Self {
        match *self {
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start: LatticeStart::One,
            } => Self::LatticeGeometric {
                success,
                scale,
                shift: shift + scale,
                start: LatticeStart::Zero,
            },
            Self::Erlang { shape: 1, rate, shift } => Self::Exponential { rate, shift },
            other => other,
        }
    }
}

fn location_tol(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

fn same_location(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        a == b
    } else {
        (a - b).abs() <= location_tol(a.max(b))
    }
}

/// A law on `[0, ∞]` given as a finite mixture of components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedLaw {
    components: Vec<(f64, LawComponent)>,
}

impl ExtendedLaw {
    pub fn new(components: Vec<(f64, LawComponent)>) -> Result<Self, LawError> {
        if components.is_empty() {
            return Err(LawError::Empty);
        }
        let mut total = 0.0;
        for (w, c) in &components {
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(LawError::InvalidWeight(*w));
            }
            c.validate()?;
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(LawError::WeightSum(total));
        }
        Ok(Self { components })
    }

    pub fn single(component: LawComponent) -> Result<Self, LawError> {
        Self::new(vec![(1.0, component)])
    }

    pub fn point(at: f64) -> Result<Self, LawError> {
        Self::single(LawComponent::point(at)?)
    }

    pub fn exponential(rate: f64, shift: f64) -> Result<Self, LawError> {
        Self::single(LawComponent::exponential(rate, shift)?)
    }

    pub fn erlang(shape: u32, rate: f64, shift: f64) -> Result<Self, LawError> {
        Self::single(LawComponent::erlang(shape, rate, shift)?)
    }

    /// Parses the law-expression grammar, e.g. `mix(0.5: point(0), 0.5: exp(rate=2))`.
    pub fn parse(text: &str) -> Result<Self, LawError> {
        parse_law_expr(text)
    }

    pub fn components(&self) -> &[(f64, LawComponent)] {
        &self.components
    }

    pub fn laplace(&self, lambda: f64) -> f64 {
        debug_assert!(lambda >= 0.0, "laplace argument must be nonnegative");
        self.components.iter().map(|(w, c)| w * c.laplace(lambda)).sum()
    }

    pub fn laplace_positive(&self, lambda: f64) -> f64 {
        self.components.iter().map(|(w, c)| w * c.laplace_positive(lambda)).sum()
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, c)| w * c.mass_at(x)).sum()
    }

    pub fn mass_at_infinity(&self) -> f64 {
        self.components.iter().map(|(w, c)| w * c.mass_at_infinity()).sum()
    }

    pub fn mean_finite_part(&self) -> f64 {
        self.components.iter().map(|(w, c)| w * c.mean_finite_part()).sum()
    }

    pub fn has_continuous_part(&self) -> bool {
        self.components.iter().any(|(_, c)| c.is_continuous())
    }

    /// Whether `P(X < ε) > 0` for every `ε > 0`, decided from the components.
    pub fn support_reaches_zero(&self) -> bool {
        self.components.iter().any(|(_, c)| c.support_reaches_zero())
    }

    /// Lattice structure of the finite support, if any.
    ///
    /// Returns the largest span `α` with all finite support points in `α·N0`
    /// or [`Lattice::Trivial`] when the finite support is `{0}` or empty.
    /// Absent for laws with a continuous part or incommensurable atoms.
    pub fn is_arithmetic_on_lattice(&self) -> Option<Lattice> {
        lattice::lattice_of(self)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let [(_, only)] = self.components.as_slice() {
            return only.sample(rng);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, c) in &self.components {
            acc += w;
            if u < acc {
                return c.sample(rng);
            }
        }
        // Weights may sum to 1 - 1e-12; the sliver goes to the last component.
        self.components.last().expect("nonempty").1.sample(rng)
    }

    /// Draws one value from a fresh generator for `stream`.
    pub fn sample_stream(&self, stream: RandomStream) -> f64 {
        self.sample(&mut stream.rng())
    }

    /// Merges duplicate atoms and identical components, normalizes lattice
    /// and Erlang(1) parameterizations, and orders components canonically.
    pub fn simplified(&self) -> Self {
        let mut merged: Vec<(f64, LawComponent)> = Vec::new();
        for (w, c) in &self.components {
            let c = c.normalized();
            match merged.iter_mut().find(|(_, m)| components_match(m, &c)) {
                Some((mw, _)) => *mw += w,
                None => merged.push((*w, c)),
            }
        }
        merged.sort_by(|a, b| component_order(&a.1, &b.1));
        Self { components: merged }
    }
}

fn components_match(a: &LawComponent, b: &LawComponent) -> bool {
    use LawComponent::*;
    match (*a, *b) {
        (PointMass { at: x }, PointMass { at: y }) => same_location(x, y),
        _ => a == b,
    }
}

fn component_order(a: &LawComponent, b: &LawComponent) -> std::cmp::Ordering {
    fn rank(c: &LawComponent) -> (u8, f64) {
        match *c {
            LawComponent::PointMass { at } => (0, at),
            LawComponent::Exponential { shift, .. } => (1, shift),
            LawComponent::Erlang { shift, .. } => (2, shift),
            LawComponent::Uniform { low, .. } => (3, low),
            LawComponent::LatticeGeometric { shift, .. } => (4, shift),
        }
    }
    let (ka, xa) = rank(a);
    let (kb, xb) = rank(b);
    ka.cmp(&kb).then(xa.total_cmp(&xb))
}

fn fmt_real(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x.is_infinite() {
        f.write_str("inf")
    } else {
        write!(f, "{x}")
    }
}

fn fmt_shift(shift: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if shift != 0.0 {
        write!(f, ", shift={shift}")?;
    }
    Ok(())
}

impl fmt::Display for LawComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::PointMass { at } => {
                f.write_str("point(")?;
                fmt_real(at, f)?;
                f.write_str(")")
            }
            Self::Exponential { rate, shift } => {
                write!(f, "exp(rate={rate}")?;
                fmt_shift(shift, f)?;
                f.write_str(")")
            }
            Self::Erlang { shape, rate, shift } => {
                write!(f, "erlang(k={shape}, rate={rate}")?;
                fmt_shift(shift, f)?;
                f.write_str(")")
            }
            Self::Uniform { low, high } => write!(f, "unif({low}, {high})"),
            Self::LatticeGeometric {
                success,
                scale,
                shift,
                start,
            } => {
                let name = match start {
                    LatticeStart::Zero => "geomN0",
                    LatticeStart::One => "geomN",
                };
                write!(f, "{name}(s={success}, scale={scale}")?;
                fmt_shift(shift, f)?;
                f.write_str(")")
            }
        }
    }
}

/// Canonical expression form; [`parse_law_expr`] inverts it exactly.
impl fmt::Display for ExtendedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let [(w, c)] = self.components.as_slice() {
            if *w == 1.0 {
                return write!(f, "{c}");
            }
        }
        f.write_str("mix(")?;
        for (i, (w, c)) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{w}: {c}")?;
        }
        f.write_str(")")
    }
}

impl std::str::FromStr for ExtendedLaw {
    type Err = LawError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_law_expr(s)
    }
}
