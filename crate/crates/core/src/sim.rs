//! Marked renewal trajectories and first epochs of the marked processes.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laws::ExtendedLaw;
use crate::parallel;
use crate::rng::RandomStream;

pub const DEFAULT_ARRIVAL_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("marking probability p = {0} must lie strictly inside (0, 1)")]
    InvalidP(f64),
    #[error("horizon = {0} must be positive and finite")]
    InvalidHorizon(f64),
    #[error("arrival cap must be at least 1")]
    InvalidCap,
    #[error("malformed epoch-pair CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Parameters of one marked renewal experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t1_law: ExtendedLaw,
    pub t2_law: ExtendedLaw,
    pub p: f64,
    pub horizon: f64,
    pub arrival_cap: usize,
    pub stream: RandomStream,
}

impl SimConfig {
    pub fn new(
        t1_law: ExtendedLaw,
        t2_law: ExtendedLaw,
        p: f64,
        horizon: f64,
        stream: RandomStream,
    ) -> Result<Self, SimError> {
        let cfg = Self {
            t1_law,
            t2_law,
            p,
            horizon,
            arrival_cap: DEFAULT_ARRIVAL_CAP,
            stream,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_arrival_cap(mut self, cap: usize) -> Result<Self, SimError> {
        self.arrival_cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn with_stream(mut self, stream: RandomStream) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(SimError::InvalidP(self.p));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidHorizon(self.horizon));
        }
        if self.arrival_cap == 0 {
            return Err(SimError::InvalidCap);
        }
        Ok(())
    }
}

/// Why trajectory generation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The next partial sum exceeded the horizon.
    HorizonReached,
    /// An inter-arrival time of `∞` was drawn.
    InfinityReached,
    /// The arrival cap was hit.
    CapReached,
}

/// Arrival epochs `S_n` with their marks, in draw order.
///
/// Simultaneous arrivals appear as repeated epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedArrivalSequence {
    pub epochs: Vec<f64>,
    pub marks: Vec<u8>,
    pub terminated: Termination,
}

impl MarkedArrivalSequence {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// `(N⁰_t, N¹_t)`: marked arrivals with epoch `≤ t`.
    pub fn counts_at_time(&self, t: f64) -> (usize, usize) {
        let upto = self.epochs.partition_point(|&e| e <= t);
        let ones = self.marks[..upto].iter().filter(|&&m| m == 1).count();
        (upto - ones, ones)
    }

    /// `R0` and `R1`, resolved in draw order.
    pub fn first_epochs(&self) -> EpochPair {
        let mut first = [None, None];
        for (&e, &m) in self.epochs.iter().zip(&self.marks) {
            let slot = &mut first[usize::from(m)];
            if slot.is_none() {
                *slot = Some(e);
                if first.iter().all(Option::is_some) {
                    break;
                }
            }
        }
        let resolve = |v: Option<f64>| match v {
            Some(e) => (e, EpochStatus::Observed),
            None => (f64::INFINITY, self.terminated.unobserved_status()),
        };
        let (r0, r0_status) = resolve(first[0]);
        let (r1, r1_status) = resolve(first[1]);
        EpochPair {
            r0,
            r1,
            r0_status,
            r1_status,
        }
    }
}

impl Termination {
    fn unobserved_status(self) -> EpochStatus {
        match self {
            Self::InfinityReached => EpochStatus::InfiniteExact,
            Self::HorizonReached | Self::CapReached => EpochStatus::HorizonCensored,
        }
    }
}

/// Observation status of one first epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EpochStatus {
    Observed,
    /// An `∞` waiting time was drawn before any arrival with this mark.
    InfiniteExact,
    /// Horizon or arrival cap reached before any arrival with this mark.
    HorizonCensored,
}

impl EpochStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Observed => "Observed",
            Self::InfiniteExact => "InfiniteExact",
            Self::HorizonCensored => "HorizonCensored",
        }
    }

    pub fn is_observed(self) -> bool {
        self == Self::Observed
    }
}

impl fmt::Display for EpochStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EpochStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Observed" => Ok(Self::Observed),
            "InfiniteExact" => Ok(Self::InfiniteExact),
            "HorizonCensored" => Ok(Self::HorizonCensored),
            other => Err(format!("unknown status '{other}'")),
        }
    }
}

/// One realization of `(R0, R1)`. Unobserved epochs hold `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochPair {
    pub r0: f64,
    pub r1: f64,
    pub r0_status: EpochStatus,
    pub r1_status: EpochStatus,
}

impl EpochPair {
    pub fn both_observed(&self) -> bool {
        self.r0_status.is_observed() && self.r1_status.is_observed()
    }
}

/// Draws `(T_n, X_n)` in order and feeds each recorded arrival to `visit`
/// until it returns `false` or a stopping rule triggers.
fn drive<R: Rng + ?Sized>(
    cfg: &SimConfig,
    rng: &mut R,
    mut visit: impl FnMut(f64, u8) -> bool,
) -> Termination {
    let mut epoch = 0.0;
    let mut n = 0usize;
    loop {
        let law = if n == 0 { &cfg.t1_law } else { &cfg.t2_law };
        let t = law.sample(rng);
        if t.is_infinite() {
            return Termination::InfinityReached;
        }
        epoch += t;
        if epoch > cfg.horizon {
            return Termination::HorizonReached;
        }
        let mark = u8::from(rng.random_bool(cfg.p));
        n += 1;
        if !visit(epoch, mark) {
            // Caller has what it needs; the reason is irrelevant.
            return Termination::CapReached;
        }
        if n == cfg.arrival_cap {
            return Termination::CapReached;
        }
    }
}

/// Simulates one trajectory from `cfg.stream`.
pub fn simulate_marked_arrivals(cfg: &SimConfig) -> MarkedArrivalSequence {
    let mut rng = cfg.stream.rng();
    let mut epochs = Vec::new();
    let mut marks = Vec::new();
    let terminated = drive(cfg, &mut rng, |e, m| {
        epochs.push(e);
        marks.push(m);
        true
    });
    MarkedArrivalSequence {
        epochs,
        marks,
        terminated,
    }
}

pub fn first_epochs(seq: &MarkedArrivalSequence) -> EpochPair {
    seq.first_epochs()
}

pub fn counts_at_time(seq: &MarkedArrivalSequence, t: f64) -> (usize, usize) {
    seq.counts_at_time(t)
}

/// First epochs for `stream`, stopping as soon as both marks have appeared.
///
/// Consumes the same draws as [`simulate_marked_arrivals`], so the result
/// equals `first_epochs(simulate_marked_arrivals(cfg))` for that stream.
pub fn sample_epoch_pair(cfg: &SimConfig, stream: RandomStream) -> EpochPair {
    let mut rng = stream.rng();
    let mut first = [None, None];
    let terminated = drive(cfg, &mut rng, |e, m| {
        let slot = &mut first[usize::from(m)];
        if slot.is_none() {
            *slot = Some(e);
        }
        first.iter().any(Option::is_none)
    });
    let resolve = |v: Option<f64>| match v {
        Some(e) => (e, EpochStatus::Observed),
        None => (f64::INFINITY, terminated.unobserved_status()),
    };
    let (r0, r0_status) = resolve(first[0]);
    let (r1, r1_status) = resolve(first[1]);
    EpochPair {
        r0,
        r1,
        r0_status,
        r1_status,
    }
}

/// `(N⁰_t, N¹_t)` for one replication, simulating only up to time `t`.
pub fn sample_counts_at(cfg: &SimConfig, stream: RandomStream, t: f64) -> (usize, usize) {
    let mut rng = stream.rng();
    let mut counts = (0, 0);
    drive(cfg, &mut rng, |e, m| {
        if e > t {
            return false;
        }
        if m == 0 {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
        true
    });
    counts
}

/// `n` independent replications; replication `i` uses `cfg.stream.substream(i)`.
pub fn batch_sample_epoch_pairs(cfg: &SimConfig, n: usize) -> Vec<EpochPair> {
    parallel::map_indexed(n, |i| sample_epoch_pair(cfg, cfg.stream.substream(i as u64)))
}

/// Sequential reference for [`batch_sample_epoch_pairs`].
pub fn batch_sample_epoch_pairs_seq(cfg: &SimConfig, n: usize) -> Vec<EpochPair> {
    parallel::map_indexed_seq(n, |i| sample_epoch_pair(cfg, cfg.stream.substream(i as u64)))
}

pub const CSV_HEADER: &str = "r0,r0_status,r1,r1_status";

fn fmt_epoch(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{x}")
    }
}

/// Writes pairs as CSV with header `r0,r0_status,r1,r1_status`.
pub fn write_pairs_csv<W: io::Write>(mut out: W, pairs: &[EpochPair]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in pairs {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_epoch(p.r0),
            p.r0_status,
            fmt_epoch(p.r1),
            p.r1_status
        )?;
    }
    Ok(())
}

/// Parses the format of [`write_pairs_csv`]. Blank lines and lines starting
/// with `#` are skipped.
pub fn read_pairs_csv(text: &str) -> Result<Vec<EpochPair>, SimError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(SimError::Csv {
                line: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let err = |message: String| SimError::Csv { line: i + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [r0, s0, r1, s1] = fields[..] else {
                return Err(err(format!("expected 4 fields, got {}", fields.len())));
            };
            let num = |s: &str| -> Result<f64, SimError> {
                match s.parse::<f64>() {
                    Ok(v) if v >= 0.0 => Ok(v),
                    _ => Err(err(format!("invalid epoch '{s}'"))),
                }
            };
            Ok(EpochPair {
                r0: num(r0)?,
                r0_status: s0.parse().map_err(err)?,
                r1: num(r1)?,
                r1_status: s1.parse().map_err(err)?,
            })
        })
        .collect()
}
