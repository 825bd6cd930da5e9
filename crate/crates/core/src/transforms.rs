//! Closed-form Laplace transforms of the first marked epochs `(R1, R0)` and
//! residuals of the functional equations characterizing their independence.
//!
//! Throughout, `fii` is the transform of `L(T1)` and `phi` that of `L(T2)`.
//! All transforms are restricted to the finite part: mass at `∞` contributes
//! nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laws::ExtendedLaw;
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("psi undefined: need P(T2 > 0) = {q0} > 0 and P(T2 = inf) = {defect} < P(T2 > 0)")]
    PsiUndefined { q0: f64, defect: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// `E[e^{-λ R1}; R1 < ∞] = p·fii(λ) / (1 - (1-p)·phi(λ))`.
pub fn marginal_lt_r1(t1: &ExtendedLaw, t2: &ExtendedLaw, p: f64, lambda: f64) -> f64 {
    p * t1.laplace(lambda) / (1.0 - (1.0 - p) * t2.laplace(lambda))
}

/// `E[e^{-μ R0}; R0 < ∞] = (1-p)·fii(μ) / (1 - p·phi(μ))`.
pub fn marginal_lt_r0(t1: &ExtendedLaw, t2: &ExtendedLaw, p: f64, mu: f64) -> f64 {
    (1.0 - p) * t1.laplace(mu) / (1.0 - p * t2.laplace(mu))
}

/// `E[e^{-λ R1 - μ R0}; R1 < ∞, R0 < ∞]`.
///
/// Splits on the first mark: whichever process owns the first arrival starts
/// at `T1`, and the other waits a geometric number of further `T2` steps.
pub fn joint_lt(t1: &ExtendedLaw, t2: &ExtendedLaw, p: f64, lambda: f64, mu: f64) -> f64 {
    let phi_l = t2.laplace(lambda);
    let phi_m = t2.laplace(mu);
    t1.laplace(lambda + mu) * p * (1.0 - p) * (phi_l + phi_m - phi_l * phi_m)
        / ((1.0 - (1.0 - p) * phi_l) * (1.0 - p * phi_m))
}

/// Joint transform minus the product of the marginals.
pub fn residual_eq1(t1: &ExtendedLaw, t2: &ExtendedLaw, p: f64, lambda: f64, mu: f64) -> f64 {
    joint_lt(t1, t2, p, lambda, mu) - marginal_lt_r1(t1, t2, p, lambda) * marginal_lt_r0(t1, t2, p, mu)
}

/// `fii(λ+μ)[phi(λ) + phi(μ) - phi(λ)phi(μ)] - fii(λ)fii(μ)`; free of `p`.
pub fn residual_eq2(t1: &ExtendedLaw, t2: &ExtendedLaw, lambda: f64, mu: f64) -> f64 {
    let phi_l = t2.laplace(lambda);
    let phi_m = t2.laplace(mu);
    t1.laplace(lambda + mu) * (phi_l + phi_m - phi_l * phi_m) - t1.laplace(lambda) * t1.laplace(mu)
}

/// The `ψ` transform of `L(T2)`: `ψ = 1/ξ - 1` with `ξ = (phi - (1-q0))/q0`
/// and `q0 = P(T2 > 0)`.
#[derive(Debug, Clone)]
pub struct PsiTransform<'a> {
    t2: &'a ExtendedLaw,
    q0: f64,
}

impl<'a> PsiTransform<'a> {
    pub fn new(t2: &'a ExtendedLaw) -> Result<Self, TransformError> {
        let q0 = 1.0 - t2.mass_at(0.0);
        let defect = t2.mass_at_infinity();
        if !(q0 > 0.0 && defect < q0) {
            return Err(TransformError::PsiUndefined { q0, defect });
        }
        Ok(Self { t2, q0 })
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    /// `phi - (1 - q0)` is the transform of `L(T2)` off the atom at zero,
    /// taken directly to avoid cancellation for large arguments.
    pub fn xi(&self, lambda: f64) -> f64 {
        self.t2.laplace_positive(lambda) / self.q0
    }

    pub fn psi(&self, lambda: f64) -> f64 {
        1.0 / self.xi(lambda) - 1.0
    }

    /// `ψ(λ+μ) - ψ(λ) - ψ(μ) - ψ(λ)ψ(μ)(1 - q0²)`.
    pub fn residual(&self, lambda: f64, mu: f64) -> f64 {
        let (a, b) = (self.psi(lambda), self.psi(mu));
        self.psi(lambda + mu) - a - b - a * b * (1.0 - self.q0 * self.q0)
    }
}

pub fn residual_eq3(t2: &ExtendedLaw, lambda: f64, mu: f64) -> Result<f64, TransformError> {
    Ok(PsiTransform::new(t2)?.residual(lambda, mu))
}

/// Which functional equation a scan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "equation", rename_all = "lowercase")]
pub enum Equation {
    Eq1 { p: f64 },
    Eq2,
    Eq3,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eq1 { .. } => "eq1",
            Self::Eq2 => "eq2",
            Self::Eq3 => "eq3",
        }
    }
}

/// Evaluation grid: `points` equally spaced values on `[lo, hi]` per axis,
/// plus an optional refined diagonal `λ = μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub diagonal_points: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 5.0,
            points: 21,
            diagonal_points: Some(101),
        }
    }
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            diagonal_points: None,
        }
    }

    fn validate(&self) -> Result<(), TransformError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.hi > self.lo) {
            return Err(TransformError::InvalidGrid(format!(
                "bounds [{}, {}] must be finite with 0 <= lo < hi",
                self.lo, self.hi
            )));
        }
        if self.points < 2 || self.diagonal_points.is_some_and(|d| d < 2) {
            return Err(TransformError::InvalidGrid("need at least 2 points per axis".into()));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Residuals on a rectangular `(λ, μ)` grid; `values[i][j]` is at
/// `(lambdas[i], mus[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtGrid {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub equation: Equation,
    pub spec: GridSpec,
    pub grid: LtGrid,
    /// `(t, residual(t, t))` along the refined diagonal.
    pub diagonal: Vec<(f64, f64)>,
    pub max_abs: f64,
    pub argmax: [f64; 2],
}

impl GridScan {
    /// Every evaluated point as `(λ, μ, residual)`, grid first, then diagonal.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let grid = self.grid.lambdas.iter().enumerate().flat_map(move |(i, &l)| {
            self.grid.mus.iter().enumerate().map(move |(j, &m)| (l, m, self.grid.values[i][j]))
        });
        grid.chain(self.diagonal.iter().map(|&(t, r)| (t, t, r)))
    }
}

/// Evaluates `which` at every grid point and records the largest `|residual|`.
pub fn grid_scan(
    t1: &ExtendedLaw,
    t2: &ExtendedLaw,
    spec: GridSpec,
    which: Equation,
) -> Result<GridScan, TransformError> {
    spec.validate()?;
    let psi = match which {
        Equation::Eq3 => Some(PsiTransform::new(t2)?),
        _ => None,
    };
    if let Equation::Eq1 { p } = which {
        if !(p > 0.0 && p < 1.0) {
            return Err(TransformError::InvalidGrid(format!("p = {p} must lie in (0, 1)")));
        }
    }
    let eval = |l: f64, m: f64| match which {
        Equation::Eq1 { p } => residual_eq1(t1, t2, p, l, m),
        Equation::Eq2 => residual_eq2(t1, t2, l, m),
        Equation::Eq3 => psi.as_ref().expect("built above").residual(l, m),
    };
    let axis = spec.axis();
    let values = parallel::map_indexed(axis.len(), |i| axis.iter().map(|&m| eval(axis[i], m)).collect::<Vec<_>>());
    let diagonal: Vec<(f64, f64)> = spec
        .diagonal_points
        .map(|n| linspace(spec.lo, spec.hi, n).into_iter().map(|t| (t, eval(t, t))).collect())
        .unwrap_or_default();

    let mut max_abs = 0.0;
    let mut argmax = [axis[0], axis[0]];
    let points = axis
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| axis.iter().enumerate().map(move |(j, &m)| (i, j, l, m)))
        .map(|(i, j, l, m)| (l, m, values[i][j]))
        .chain(diagonal.iter().map(|&(t, r)| (t, t, r)));
    for (l, m, r) in points {
        // NaN must surface as a failure, never hide behind a comparison.
        if r.is_nan() || r.abs() > max_abs {
            max_abs = if r.is_nan() { f64::NAN } else { r.abs() };
            argmax = [l, m];
            if r.is_nan() {
                break;
            }
        }
    }
    Ok(GridScan {
        equation: which,
        spec,
        grid: LtGrid {
            lambdas: axis.clone(),
            mus: axis,
            values,
        },
        diagonal,
        max_abs,
        argmax,
    })
}
