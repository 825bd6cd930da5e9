//! Independence tests on samples of `(R0, R1)` and the HPP decision built on
//! them.
//!
//! Unobserved epochs (exact `∞` or censored) are kept as an explicit
//! category: the chi-square test gives them their own row/column, and the
//! rank test assigns them the top rank.

mod chi2;
mod dcov;
mod hpp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::EpochPair;

pub use chi2::{chi2_independence_test, ContingencyTable};
pub use dcov::{dcov_ranked, MAX_RANKED_SAMPLE, PERMUTATION_STREAM_BASE, distance_covariance, midranks, permutation_dcov_test, RankedPairs};
pub use hpp::{hpp_decision, HppOptions, HppVerdict, HppReport};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_PERMUTATIONS: usize = 499;
pub const DEFAULT_BINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("sample size {got} below the minimum {need}")]
    TooFew { got: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Chi2,
    PermDcov,
}

/// Outcome of one independence test.
///
/// A degenerate sample (one margin concentrated in a single category) is
/// untestable: `p_value = 1`, no rejection, and `untestable` names the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub decision: bool,
    pub n: usize,
    pub seed: Option<u64>,
    /// Degrees of freedom after merging (chi-square only).
    pub df: Option<usize>,
    /// Permutation count (permutation test only).
    pub permutations: Option<usize>,
    pub untestable: Option<String>,
}

impl TestReport {
    pub fn rejects(&self) -> bool {
        self.decision
    }

    fn untestable(method: TestMethod, alpha: f64, n: usize, seed: Option<u64>, reason: String) -> Self {
        Self {
            method,
            statistic: 0.0,
            p_value: 1.0,
            alpha,
            decision: false,
            n,
            seed,
            df: None,
            permutations: None,
            untestable: Some(reason),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// Neumaier-compensated sum; keeps the mean of many equal terms exact to
/// rounding.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean of `e^{-λ r1 - μ r0}·1(both observed)` and its standard error.
///
/// Censored pairs count as 0, which biases the estimate down by at most
/// `e^{-min(λ,μ)·horizon}`.
pub fn mc_laplace_estimate(pairs: &[EpochPair], lambda: f64, mu: f64) -> Result<(f64, f64), StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = pairs.len() as f64;
    let value = |p: &EpochPair| {
        if p.both_observed() {
            (-lambda * p.r1 - mu * p.r0).exp()
        } else {
            0.0
        }
    };
    let mean = compensated_sum(pairs.iter().map(value)) / n;
    let var = if pairs.len() > 1 {
        compensated_sum(pairs.iter().map(|p| (value(p) - mean).powi(2))) / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}
