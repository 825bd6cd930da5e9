use serde::{Deserialize, Serialize};

use super::{
    chi2_independence_test, check_alpha, permutation_dcov_test, StatsError, TestReport, DEFAULT_ALPHA, DEFAULT_BINS,
    DEFAULT_PERMUTATIONS,
};
use crate::characterization::{theorem1_report, Theorem1Report};
use crate::laws::ExtendedLaw;
use crate::sim::EpochPair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HppOptions {
    /// Family-wise level; each of the two tests runs at `alpha / 2`.
    pub alpha: f64,
    pub bins: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for HppOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            bins: DEFAULT_BINS,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HppVerdict {
    HppConsistent,
    NotHpp,
    Theorem1Inapplicable { reason: String },
    /// Laws unknown: only the independence statement is available.
    IndependenceOnly { rejected: bool, caveat: String },
}

impl HppVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            Self::HppConsistent => "HPP consistent",
            Self::NotHpp => "not HPP",
            Self::Theorem1Inapplicable { .. } => "Theorem 1 inapplicable",
            Self::IndependenceOnly { rejected: true, .. } => "independence rejected",
            Self::IndependenceOnly { rejected: false, .. } => "independence not rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HppReport {
    pub verdict: HppVerdict,
    pub label: String,
    pub theorem1: Option<Theorem1Report>,
    pub chi2: TestReport,
    pub perm_dcov: TestReport,
}

const UNKNOWN_LAWS_CAVEAT: &str = "inter-arrival laws not declared: the side conditions \
(support near 0, non-arithmetic T2 or no atom of T1 at 0) are unverified, so independence \
of the first epochs does not by itself identify a Poisson process";

/// Runs both independence tests and combines them with the side conditions.
///
/// Independence is rejected when either test rejects at `alpha / 2`, which
/// keeps the family-wise size at `alpha`. An untestable (degenerate) sample
/// never counts as a rejection.
pub fn hpp_decision(
    laws: Option<(&ExtendedLaw, &ExtendedLaw)>,
    pairs: &[EpochPair],
    opts: &HppOptions,
) -> Result<HppReport, StatsError> {
    check_alpha(opts.alpha)?;
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    let level = opts.alpha / 2.0;
    let chi2 = chi2_independence_test(pairs, opts.bins, level)?;
    let perm_dcov = permutation_dcov_test(pairs, opts.permutations, level, opts.seed)?;
    let rejected = chi2.rejects() || perm_dcov.rejects();
    let theorem1 = laws.map(|(t1, t2)| theorem1_report(t1, t2));
    let verdict = match &theorem1 {
        None => HppVerdict::IndependenceOnly {
            rejected,
            caveat: UNKNOWN_LAWS_CAVEAT.to_owned(),
        },
        Some(rep) if !rep.theorem_applies => HppVerdict::Theorem1Inapplicable {
            reason: rep.failing_condition().unwrap_or("side conditions fail").to_owned(),
        },
        Some(_) if rejected => HppVerdict::NotHpp,
        Some(_) => HppVerdict::HppConsistent,
    };
    Ok(HppReport {
        label: verdict.label().to_owned(),
        verdict,
        theorem1,
        chi2,
        perm_dcov,
    })
}
