use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{check_alpha, StatsError, TestMethod, TestReport};
use crate::sim::EpochPair;

/// Minimum expected count per cell after merging.
pub const MIN_EXPECTED: f64 = 5.0;
pub const MIN_SAMPLE: usize = 100;

/// Cross-tabulation of discretized `(R0, R1)`.
///
/// Rows are `R0` categories, columns `R1` categories. Each axis has the
/// quantile bins of its observed values followed by one "not observed"
/// category, so the full table is `(K+1)×(K+1)` before merging (fewer when
/// tied quantiles coincide).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_edges: Vec<f64>,
    pub col_edges: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

fn quantile_edges(observed: &mut [f64], bins: usize) -> Vec<f64> {
    observed.sort_by(f64::total_cmp);
    let m = observed.len();
    let mut edges: Vec<f64> = Vec::new();
    if m == 0 {
        return edges;
    }
    for j in 1..bins {
        let idx = (j * m).div_ceil(bins).saturating_sub(1);
        let e = observed[idx];
        if edges.last().map_or(true, |&last| e > last) {
            edges.push(e);
        }
    }
    // An edge at the maximum would leave the top bin empty.
    if edges.last() == Some(&observed[m - 1]) {
        edges.pop();
    }
    edges
}

fn category(value: Option<f64>, edges: &[f64]) -> usize {
    match value {
        Some(x) => edges.partition_point(|&e| e < x),
        None => edges.len() + 1,
    }
}

impl ContingencyTable {
    pub fn from_pairs(pairs: &[EpochPair], bins: usize) -> Self {
        let obs = |v: f64, ok: bool| ok.then_some(v);
        let r0: Vec<Option<f64>> = pairs.iter().map(|p| obs(p.r0, p.r0_status.is_observed())).collect();
        let r1: Vec<Option<f64>> = pairs.iter().map(|p| obs(p.r1, p.r1_status.is_observed())).collect();
        let row_edges = quantile_edges(&mut r0.iter().flatten().copied().collect::<Vec<_>>(), bins);
        let col_edges = quantile_edges(&mut r1.iter().flatten().copied().collect::<Vec<_>>(), bins);
        let mut counts = vec![vec![0u64; col_edges.len() + 2]; row_edges.len() + 2];
        for (a, b) in r0.iter().zip(&r1) {
            counts[category(*a, &row_edges)][category(*b, &col_edges)] += 1;
        }
        Self {
            row_edges,
            col_edges,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Table with ordered, mergeable categories.
struct Working {
    counts: Vec<Vec<f64>>,
}

impl Working {
    fn row_sums(&self) -> Vec<f64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<f64> {
        (0..self.counts[0].len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    fn transpose(&mut self) {
        let (r, c) = (self.counts.len(), self.counts[0].len());
        self.counts = (0..c).map(|j| (0..r).map(|i| self.counts[i][j]).collect()).collect();
    }

    fn drop_empty(&mut self) {
        self.counts.retain(|r| r.iter().sum::<f64>() > 0.0);
        self.transpose();
        self.counts.retain(|r| r.iter().sum::<f64>() > 0.0);
        self.transpose();
    }

    /// Merges row `i` into its smaller adjacent neighbour.
    fn merge_row(&mut self, i: usize) {
        let sums = self.row_sums();
        let j = match (i.checked_sub(1), (i + 1 < sums.len()).then_some(i + 1)) {
            (Some(a), Some(b)) => {
                if sums[a] <= sums[b] {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => return,
        };
        let row = self.counts.remove(i);
        let j = if j > i { j - 1 } else { j };
        for (t, v) in self.counts[j].iter_mut().zip(row) {
            *t += v;
        }
    }

    fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.counts.first().map_or(0, Vec::len))
    }

    fn min_expected(&self) -> f64 {
        let (rs, cs) = (self.row_sums(), self.col_sums());
        let n: f64 = rs.iter().sum();
        let rmin = rs.iter().copied().fold(f64::INFINITY, f64::min);
        let cmin = cs.iter().copied().fold(f64::INFINITY, f64::min);
        rmin * cmin / n
    }

    /// Greedily merges the smallest-margin category until every expected
    /// count reaches [`MIN_EXPECTED`] or an axis collapses.
    fn merge_sparse(&mut self) {
        while self.shape().0 >= 2 && self.shape().1 >= 2 && self.min_expected() < MIN_EXPECTED {
            let rs = self.row_sums();
            let cs = self.col_sums();
            let (ri, rmin) = argmin(&rs);
            let (ci, cmin) = argmin(&cs);
            if rmin <= cmin {
                self.merge_row(ri);
            } else {
                self.transpose();
                self.merge_row(ci);
                self.transpose();
            }
        }
    }
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, x)| if x < best.1 { (i, x) } else { best })
}

/// Pearson chi-square test of independence on the `(K+1)²` table of
/// quantile bins plus the not-observed category.
pub fn chi2_independence_test(pairs: &[EpochPair], bins: usize, alpha: f64) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    if pairs.len() < MIN_SAMPLE {
        return Err(StatsError::TooFew {
            got: pairs.len(),
            need: MIN_SAMPLE,
        });
    }
    if bins < 2 {
        return Err(StatsError::InvalidArgument(format!("bins = {bins} must be >= 2")));
    }
    let table = ContingencyTable::from_pairs(pairs, bins);
    let mut w = Working {
        counts: table
            .counts
            .iter()
            .map(|r| r.iter().map(|&c| c as f64).collect())
            .collect(),
    };
    let n = pairs.len();
    w.drop_empty();
    let (r, c) = w.shape();
    if r < 2 || c < 2 {
        let axis = if r < 2 { "R0" } else { "R1" };
        return Ok(TestReport::untestable(
            TestMethod::Chi2,
            alpha,
            n,
            None,
            format!("{axis} margin concentrated in one category (trivially independent)"),
        ));
    }
    w.merge_sparse();
    let (r, c) = w.shape();
    if r < 2 || c < 2 {
        return Ok(TestReport::untestable(
            TestMethod::Chi2,
            alpha,
            n,
            None,
            "too few observations per category after merging".to_owned(),
        ));
    }
    let (rs, cs) = (w.row_sums(), w.col_sums());
    let total = n as f64;
    let mut stat = 0.0;
    for i in 0..r {
        for j in 0..c {
            let e = rs[i] * cs[j] / total;
            stat += (w.counts[i][j] - e).powi(2) / e;
        }
    }
    let df = (r - 1) * (c - 1);
    let p_value = ChiSquared::new(df as f64)
        .expect("df >= 1")
        .sf(stat)
        .clamp(0.0, 1.0);
    Ok(TestReport {
        method: TestMethod::Chi2,
        statistic: stat,
        p_value,
        alpha,
        decision: p_value < alpha,
        n,
        seed: None,
        df: Some(df),
        permutations: None,
        untestable: None,
    })
}
