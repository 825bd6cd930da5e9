//! Simulation and verification toolkit for Bernoulli-thinned renewal processes.
//!
//! A renewal process `N` is built from independent waiting times `T1, T2, ...`
//! on `[0, ∞]` (the first may differ in law, any may be `0` or `∞`). Each
//! arrival receives an independent `Ber(p)` mark, splitting `N` into two
//! marked processes. The first epochs `R0`, `R1` of the marked processes are
//! independent only for five families of waiting-time laws; among ordinary
//! processes whose first waiting time reaches down to zero, only the
//! homogeneous Poisson process qualifies.
//!
//! Modules:
//!
//! - [`laws`]: finite mixtures of parametric laws on `[0, ∞]`, with a small
//!   expression language, sampling and closed-form Laplace transforms.
//! - [`sim`]: marked renewal trajectories and first-epoch extraction.
//! - [`transforms`]: closed-form joint/marginal transforms of `(R1, R0)` and
//!   the residuals of the independence functional equations.
//! - [`characterization`]: the five independence families, classification of
//!   law pairs and the side conditions of the HPP characterization.
//! - [`analytics`]: exact event probabilities at the burst epoch and the
//!   discrete stationarity identity of the lattice family.
//! - [`stats`]: independence tests on simulated `(R0, R1)` samples and the
//!   end-to-end HPP decision.

pub mod analytics;
pub mod characterization;
pub mod laws;
pub mod parallel;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod transforms;

pub use characterization::{classify_pair, make_case_laws, predict_independence, CaseDescriptor};
pub use laws::{ExtendedLaw, LawComponent, LawError};
pub use rng::RandomStream;
pub use sim::{EpochPair, EpochStatus, MarkedArrivalSequence, SimConfig};
