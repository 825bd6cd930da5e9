use rand::seq::SliceRandom;

use super::{check_alpha, StatsError, TestMethod, TestReport};
use crate::parallel;
use crate::rng::RandomStream;
use crate::sim::EpochPair;

pub const MIN_SAMPLE: usize = 50;
pub const MIN_PERMUTATIONS: usize = 199;
/// First stream index used for permutations, kept apart from the low
/// indices that simulation batches draw from.
pub const PERMUTATION_STREAM_BASE: u64 = 1 << 63;

/// Midranks (1-based, ties averaged). Infinite values tie at the top.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    doubled_midranks(values).into_iter().map(|r| r as f64 / 2.0).collect()
}

fn doubled_midranks(values: &[f64]) -> Vec<i64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0i64; n];
    let mut s = 0;
    while s < n {
        let mut e = s + 1;
        while e < n && values[order[e]] == values[order[s]] {
            e += 1;
        }
        // Positions s+1..=e share the rank (s+1+e)/2.
        let r = (s + 1 + e) as i64;
        for &i in &order[s..e] {
            ranks[i] = r;
        }
        s = e;
    }
    ranks
}

/// Doubled midranks of `(R0, R1)`, with unobserved epochs ranked as `+∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedPairs {
    pub r0: Vec<i64>,
    pub r1: Vec<i64>,
}

impl RankedPairs {
    pub fn from_pairs(pairs: &[EpochPair]) -> Self {
        let val = |v: f64, observed: bool| if observed { v } else { f64::INFINITY };
        let r0: Vec<f64> = pairs.iter().map(|p| val(p.r0, p.r0_status.is_observed())).collect();
        let r1: Vec<f64> = pairs.iter().map(|p| val(p.r1, p.r1_status.is_observed())).collect();
        Self {
            r0: doubled_midranks(&r0),
            r1: doubled_midranks(&r1),
        }
    }

    pub fn len(&self) -> usize {
        self.r0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r0.is_empty()
    }
}

trait Scalar:
    Copy
    + Default
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::AddAssign
{
    /// Fenwick cell type; narrower than `Self` where partial sums allow.
    type Cell: Copy + Default + std::ops::AddAssign;
    fn from_usize(n: usize) -> Self;
    fn to_cell(self) -> Self::Cell;
    fn from_cell(c: Self::Cell) -> Self;
}

impl Scalar for i128 {
    type Cell = i64;

    fn from_usize(n: usize) -> Self {
        n as i128
    }

    fn to_cell(self) -> i64 {
        self as i64
    }

    fn from_cell(c: i64) -> Self {
        i128::from(c)
    }
}

impl Scalar for f64 {
    type Cell = f64;

    fn from_usize(n: usize) -> Self {
        n as f64
    }

    fn to_cell(self) -> f64 {
        self
    }

    fn from_cell(c: f64) -> Self {
        c
    }
}

/// `a_i = Σ_j |v_i - v_j|` for every `i`.
fn row_sums<T: Scalar>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
    let mut prefix = vec![T::default(); n + 1];
    for (k, &i) in order.iter().enumerate() {
        prefix[k + 1] = prefix[k] + v[i];
    }
    let total = prefix[n];
    let mut out = vec![T::default(); n];
    for (k, &i) in order.iter().enumerate() {
        let below = v[i] * T::from_usize(k) - prefix[k];
        let above = (total - prefix[k + 1]) - v[i] * T::from_usize(n - k - 1);
        out[i] = below + above;
    }
    out
}

fn dense_ranks<T: Scalar>(v: &[T]) -> (Vec<usize>, usize) {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
    let mut out = vec![0; n];
    let mut r = 0;
    for k in 0..n {
        if k > 0 && v[order[k]] > v[order[k - 1]] {
            r += 1;
        }
        out[order[k]] = r;
    }
    (out, if n == 0 { 0 } else { r + 1 })
}

/// Fenwick tree holding `(count, Σx, Σy, Σxy)` per `y` rank.
struct Fenwick<C> {
    tree: Vec<[C; 4]>,
}

impl<C: Copy + Default + std::ops::AddAssign> Fenwick<C> {
    fn new(size: usize) -> Self {
        Self {
            tree: vec![[C::default(); 4]; size + 1],
        }
    }

    fn add(&mut self, rank: usize, item: [C; 4]) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            for (t, v) in self.tree[i].iter_mut().zip(item) {
                *t += v;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Sums over ranks strictly below `rank`.
    fn below(&self, rank: usize) -> [C; 4] {
        let mut acc = [C::default(); 4];
        let mut i = rank;
        while i > 0 {
            for (a, v) in acc.iter_mut().zip(self.tree[i]) {
                *a += v;
            }
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Precomputed `x`-side quantities; evaluates `n⁴·dCov²` for any `y`.
struct Kernel<T> {
    x: Vec<T>,
    x_order: Vec<usize>,
    a: Vec<T>,
    sum_a: T,
    sum_x: T,
}

impl<T: Scalar> Kernel<T> {
    fn new(x: Vec<T>) -> Self {
        let mut x_order: Vec<usize> = (0..x.len()).collect();
        x_order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("finite values"));
        let a = row_sums(&x);
        let sum_a = a.iter().fold(T::default(), |s, &v| s + v);
        let sum_x = x.iter().fold(T::default(), |s, &v| s + v);
        Self {
            x,
            x_order,
            a,
            sum_a,
            sum_x,
        }
    }

    /// `y` values with their row sums `b` and dense ranks.
    fn eval(&self, y: &[T], b: &[T], y_rank: &[usize], rank_count: usize) -> T {
        let n = self.x.len();
        let nn = T::from_usize(n);
        let mut fw = Fenwick::<T::Cell>::new(rank_count);
        // Σ over concordant pairs of (x_j - x_i)(y_j - y_i).
        let mut concordant = T::default();
        for &j in &self.x_order {
            let (xj, yj) = (self.x[j], y[j]);
            let [c, sx, sy, sxy] = fw.below(y_rank[j]).map(T::from_cell);
            concordant += c * xj * yj + sxy - xj * sy - yj * sx;
            fw.add(y_rank[j], [T::from_usize(1), xj, yj, xj * yj].map(T::to_cell));
        }
        let mut sxy = T::default();
        let mut sab = T::default();
        let mut sy = T::default();
        let mut sb = T::default();
        for i in 0..n {
            sxy += self.x[i] * y[i];
            sab += self.a[i] * b[i];
            sy += y[i];
            sb += b[i];
        }
        let two = T::from_usize(2);
        let four = T::from_usize(4);
        let signed = two * nn * sxy - two * self.sum_x * sy;
        let abs_products = four * concordant - signed;
        nn * nn * abs_products - two * nn * sab + self.sum_a * sb
    }
}

fn dcov_scaled<T: Scalar>(x: &[T], y: &[T]) -> T {
    let kernel = Kernel::new(x.to_vec());
    let b = row_sums(y);
    let (yr, m) = dense_ranks(y);
    kernel.eval(y, &b, &yr, m)
}

/// Largest sample the exact rank statistic supports (Fenwick sums of
/// doubled ranks must fit in `i64`).
pub const MAX_RANKED_SAMPLE: usize = 1_000_000;

/// Exact `n⁴·dCov²_n` of two samples of doubled midranks in `O(n log n)`.
///
/// This is `4n⁴` times the rank distance covariance. Values must lie in
/// `[0, 2n]` and `n` must not exceed [`MAX_RANKED_SAMPLE`].
pub fn dcov_ranked(x: &[i64], y: &[i64]) -> i128 {
    assert_eq!(x.len(), y.len(), "samples must have equal length");
    let n = x.len();
    assert!(n <= MAX_RANKED_SAMPLE, "sample too large for exact ranks");
    let bound = 2 * n as i64;
    assert!(
        x.iter().chain(y).all(|v| (0..=bound).contains(v)),
        "values must be doubled ranks in [0, 2n]"
    );
    let x: Vec<i128> = x.iter().map(|&v| i128::from(v)).collect();
    let y: Vec<i128> = y.iter().map(|&v| i128::from(v)).collect();
    dcov_scaled(&x, &y)
}

/// Squared sample distance covariance (V-statistic) of finite samples.
pub fn distance_covariance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "samples must have equal length");
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    (dcov_scaled(x, y) / n.powi(4)).max(0.0)
}

/// Permutation test of independence using distance covariance of midranks.
///
/// Permutation `b` shuffles the `R1` ranks with stream
/// `(seed, PERMUTATION_STREAM_BASE + b)`; the
/// p-value is `(1 + #{W_b ≥ W_obs}) / (B + 1)`.
pub fn permutation_dcov_test(
    pairs: &[EpochPair],
    permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    if pairs.len() < MIN_SAMPLE {
        return Err(StatsError::TooFew {
            got: pairs.len(),
            need: MIN_SAMPLE,
        });
    }
    if pairs.len() > MAX_RANKED_SAMPLE {
        return Err(StatsError::InvalidArgument(format!(
            "sample size {} exceeds {MAX_RANKED_SAMPLE}",
            pairs.len()
        )));
    }
    if permutations < MIN_PERMUTATIONS {
        return Err(StatsError::InvalidArgument(format!(
            "permutations = {permutations} must be >= {MIN_PERMUTATIONS}"
        )));
    }
    let n = pairs.len();
    let ranked = RankedPairs::from_pairs(pairs);
    let constant = |v: &[i64]| v.iter().all(|&r| r == v[0]);
    if constant(&ranked.r0) || constant(&ranked.r1) {
        let axis = if constant(&ranked.r0) { "R0" } else { "R1" };
        return Ok(TestReport::untestable(
            TestMethod::PermDcov,
            alpha,
            n,
            Some(seed),
            format!("{axis} constant across the sample (trivially independent)"),
        ));
    }
    let x: Vec<i128> = ranked.r0.iter().map(|&v| i128::from(v)).collect();
    let y: Vec<i128> = ranked.r1.iter().map(|&v| i128::from(v)).collect();
    let kernel = Kernel::new(x);
    let b = row_sums(&y);
    let (yr, m) = dense_ranks(&y);
    let observed = kernel.eval(&y, &b, &yr, m);
    let exceed = parallel::map_indexed(permutations, |k| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut RandomStream::new(seed, PERMUTATION_STREAM_BASE + k as u64).rng());
        let yp: Vec<i128> = idx.iter().map(|&i| y[i]).collect();
        let bp: Vec<i128> = idx.iter().map(|&i| b[i]).collect();
        let rp: Vec<usize> = idx.iter().map(|&i| yr[i]).collect();
        kernel.eval(&yp, &bp, &rp, m) >= observed
    })
    .into_iter()
    .filter(|&e| e)
    .count();
    let p_value = (1 + exceed) as f64 / (permutations + 1) as f64;
    let nf = n as f64;
    Ok(TestReport {
        method: TestMethod::PermDcov,
        statistic: observed as f64 / (4.0 * nf.powi(4)),
        p_value,
        alpha,
        decision: p_value < alpha,
        n,
        seed: Some(seed),
        df: None,
        permutations: Some(permutations),
        untestable: None,
    })
}
