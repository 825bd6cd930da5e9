//! Exact event probabilities at the burst epoch `κ` for the lattice and
//! two-point families (cases C and E), and the discrete stationarity of the
//! lattice family.
//!
//! In both families the first arrival lands at `κ` with probability `1 - q0²`
//! and is followed by a geometric burst of simultaneous arrivals (each further
//! waiting time is `0` with probability `1 - q0`). The events
//! `B_i = {N^i_κ = 1}` and `A0 = {N⁰_κ = 0}` therefore have closed forms that
//! expose the dependence between the whole marked processes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characterization::{make_case_laws, CaseDescriptor};
use crate::parallel;
use crate::rng::RandomStream;
use crate::sim::{sample_counts_at, SimConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{name} = {value} must lie strictly inside (0, 1)")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("case must be C or E for burst-event checks")]
    UnsupportedCase,
    #[error("sample size must be positive")]
    EmptySample,
}

fn interior(name: &'static str, value: f64) -> Result<(), AnalyticsError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(AnalyticsError::OutOfRange { name, value })
    }
}

/// `P(B0), P(B1), P(B0 ∩ B1), P(A0), P(A0 ∩ B1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemarkProbs {
    pub p_b0: f64,
    pub p_b1: f64,
    pub p_b0_b1: f64,
    pub p_a0: f64,
    pub p_a0_b1: f64,
}

impl RemarkProbs {
    pub const NAMES: [&'static str; 5] = ["P(B0)", "P(B1)", "P(B0&B1)", "P(A0)", "P(A0&B1)"];

    pub fn as_array(&self) -> [f64; 5] {
        [self.p_b0, self.p_b1, self.p_b0_b1, self.p_a0, self.p_a0_b1]
    }
}

pub fn remark3_probs(q0: f64, p: f64) -> Result<RemarkProbs, AnalyticsError> {
    interior("q0", q0)?;
    interior("p", p)?;
    let first = 1.0 - q0 * q0;
    Ok(RemarkProbs {
        p_b0: q0 * first * (1.0 - p) / (1.0 - (1.0 - q0) * p).powi(2),
        p_b1: q0 * first * p / (1.0 - (1.0 - q0) * (1.0 - p)).powi(2),
        p_b0_b1: 2.0 * first * (1.0 - q0) * q0 * p * (1.0 - p),
        p_a0: q0 * (q0 + p - p * q0) / (1.0 - p + p * q0),
        p_a0_b1: first * p * q0,
    })
}

/// Residuals of the two factorization conditions, as polynomials in `(q0, p)`:
///
/// - `c1 = q0(1+q0) - 2[q0+p-pq0]²[1-p+q0p]²` vanishes iff `P(B0∩B1) = P(B0)P(B1)`;
/// - `c2 = [q0+p-pq0][1-p+q0p] - q0` vanishes iff `P(A0∩B1) = P(A0)P(B1)`.
///
/// Defined for all real arguments; see [`remark3_incompatibility`] for the
/// checked interior version.
pub fn incompatibility_polynomials(q0: f64, p: f64) -> (f64, f64) {
    let a = q0 + p - p * q0;
    let b = 1.0 - p + q0 * p;
    (q0 * (1.0 + q0) - 2.0 * a * a * b * b, a * b - q0)
}

pub fn remark3_incompatibility(q0: f64, p: f64) -> Result<(f64, f64), AnalyticsError> {
    interior("q0", q0)?;
    interior("p", p)?;
    Ok(incompatibility_polynomials(q0, p))
}

/// Roots in `p` of `c2(q0, p) = 0`.
///
/// With `u = p(1-q0)` the condition reads `u(1 - q0 - u) = 0`, a quadratic in
/// `p`; it is solved numerically here so the roots are checked, not assumed.
pub fn c2_roots(q0: f64) -> Vec<f64> {
    // c2 = -(1-q0)² p² + (1-q0)² p, i.e. a p² + b p + c with:
    let a = -(1.0 - q0).powi(2);
    let b = (1.0 - q0).powi(2);
    let c = 0.0;
    let disc = b * b - 4.0 * a * c;
    if a == 0.0 || disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let mut roots = vec![(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)];
    roots.sort_by(f64::total_cmp);
    roots
}

/// Pmf of `U1 ~ geom_N0(1 - q0²)`.
pub fn u1_pmf(q0: f64, k: usize) -> f64 {
    (1.0 - q0 * q0) * q0.powi(2 * k as i32)
}

/// Pmf of `U2 ~ (1-q0)δ0 + q0·geom_N(1 - q0²)`.
pub fn u2_pmf(q0: f64, k: usize) -> f64 {
    if k == 0 {
        1.0 - q0
    } else {
        q0 * (1.0 - q0 * q0) * q0.powi(2 * (k as i32 - 1))
    }
}

/// `P(U2 > k)`.
pub fn u2_tail(q0: f64, k: usize) -> f64 {
    q0 * q0.powi(2 * k as i32)
}

/// `E U2 = q0 / (1 - q0²)`.
pub fn u2_mean(q0: f64) -> f64 {
    q0 / (1.0 - q0 * q0)
}

/// Expected number of renewals at each lattice point `0..=n_max`.
///
/// Solves `v_n = f1(n) + Σ_{m=0..n} f(m) v_{n-m}` for `v_n` by moving the
/// `m = 0` term to the left: `(1 - f(0)) v_n = f1(n) + Σ_{m=1..n} f(m) v_{n-m}`.
pub fn discrete_renewal_mass(q0: f64, n_max: usize) -> Result<Vec<f64>, AnalyticsError> {
    interior("q0", q0)?;
    let f: Vec<f64> = (0..=n_max).map(|k| u2_pmf(q0, k)).collect();
    let denom = 1.0 - f[0];
    let mut v = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let conv: f64 = (1..=n).map(|m| f[m] * v[n - m]).sum();
        v.push((u1_pmf(q0, n) + conv) / denom);
    }
    Ok(v)
}

/// `max_{k ≤ k_max} |P(U1 = k) - P(U2 > k)/E U2|`.
pub fn summed_tail_residual(q0: f64, k_max: usize) -> Result<f64, AnalyticsError> {
    interior("q0", q0)?;
    let mean = u2_mean(q0);
    Ok((0..=k_max)
        .map(|k| (u1_pmf(q0, k) - u2_tail(q0, k) / mean).abs())
        .fold(0.0, f64::max))
}

/// Monte Carlo estimate of one probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl McEstimate {
    pub fn from_hits(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

/// One row of the closed-form vs Monte Carlo report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkRow {
    pub quantity: String,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkCheck {
    pub case: CaseDescriptor,
    pub p: f64,
    pub n: usize,
    pub seed: u64,
    pub closed_form: RemarkProbs,
    pub estimates: [McEstimate; 5],
    pub rows: Vec<RemarkRow>,
    /// Monte Carlo `P(B0∩B1) - P(B0)P(B1)` and its delta-method standard error.
    pub independence_gap: McEstimate,
}

/// Burst cap for the event simulation; a longer burst has probability
/// below `(1-q0)^cap`.
pub const BURST_CAP: usize = 10_000;

/// Estimates the five event probabilities on case C or E laws by simulating
/// `n` trajectories up to `t = κ`.
pub fn remark3_monte_carlo(
    case: &CaseDescriptor,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<RemarkCheck, AnalyticsError> {
    let (kappa, q0) = match *case {
        CaseDescriptor::C { kappa, q0 } | CaseDescriptor::E { kappa, q0, .. } => (kappa, q0),
        _ => return Err(AnalyticsError::UnsupportedCase),
    };
    if n == 0 {
        return Err(AnalyticsError::EmptySample);
    }
    let closed_form = remark3_probs(q0, p)?;
    let (t1, t2) = make_case_laws(case).map_err(|_| AnalyticsError::UnsupportedCase)?;
    let stream = RandomStream::new(seed, 0);
    let cfg = SimConfig::new(t1, t2, p, kappa + 1.0, stream)
        .and_then(|c| c.with_arrival_cap(BURST_CAP))
        .map_err(|_| AnalyticsError::OutOfRange { name: "p", value: p })?;

    // Per replication: bit flags for B0, B1, B0∩B1, A0, A0∩B1.
    let flags = parallel::map_indexed(n, |i| {
        let (n0, n1) = sample_counts_at(&cfg, stream.substream(i as u64), kappa);
        let (b0, b1, a0) = (n0 == 1, n1 == 1, n0 == 0);
        [b0, b1, b0 && b1, a0, a0 && b1]
    });
    let mut hits = [0usize; 5];
    for f in &flags {
        for (h, &b) in hits.iter_mut().zip(f) {
            *h += usize::from(b);
        }
    }
    let estimates = hits.map(|h| McEstimate::from_hits(h, n));
    let rows = RemarkProbs::NAMES
        .iter()
        .zip(closed_form.as_array())
        .zip(&estimates)
        .map(|((name, cf), est)| RemarkRow {
            quantity: (*name).to_owned(),
            closed_form: cf,
            mc_estimate: est.estimate,
            mc_stderr: est.stderr,
            z_score: if est.stderr > 0.0 {
                (est.estimate - cf) / est.stderr
            } else {
                0.0
            },
        })
        .collect();

    // Gap g = mean(b0·b1) - mean(b0)·mean(b1); influence function
    // b0·b1 - b1·m0 - b0·m1 (+ const) gives its standard error.
    let (m0, m1, m01) = (estimates[0].estimate, estimates[1].estimate, estimates[2].estimate);
    let gap = m01 - m0 * m1;
    let infl: Vec<f64> = flags
        .iter()
        .map(|f| {
            let (b0, b1) = (f64::from(u8::from(f[0])), f64::from(u8::from(f[1])));
            b0 * b1 - b1 * m0 - b0 * m1
        })
        .collect();
    let mean_infl = infl.iter().sum::<f64>() / n as f64;
    let var = infl.iter().map(|x| (x - mean_infl).powi(2)).sum::<f64>() / n as f64;
    Ok(RemarkCheck {
        case: *case,
        p,
        n,
        seed,
        closed_form,
        estimates,
        rows,
        independence_gap: McEstimate {
            estimate: gap,
            stderr: (var / n as f64).sqrt(),
        },
    })
}

pub const REMARK_CSV_HEADER: &str = "quantity,closed_form,mc_estimate,mc_stderr,z_score";

pub fn remark_rows_csv(rows: &[RemarkRow]) -> String {
    let mut out = String::from(REMARK_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.quantity, r.closed_form, r.mc_estimate, r.mc_stderr, r.z_score
        ));
    }
    out
}
