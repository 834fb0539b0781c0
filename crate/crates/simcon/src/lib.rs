//! Concentration-of-measure diagnostics for similarity-search workloads.
//!
//! A similarity workload is a probability metric space (the query domain,
//! its dissimilarity metric, and the query distribution) together with a
//! finite dataset sitting inside it. In high dimension such domains
//! concentrate: every 1-Lipschitz function is nearly constant, nearest
//! neighbours of almost all queries sit at nearly the same distance, and
//! range queries of radius `(1+eps) * d_X(q)` either capture most of the
//! dataset or a number of points growing exponentially with the dimension.
//! This crate provides the machinery to measure all of that:
//!
//! * [`space`] — the supported query domains (spheres, Hamming cubes,
//!   hypercubes, tori, balls) with exact samplers, metrics, and ball
//!   measures (closed-form where available, Monte-Carlo elsewhere);
//! * [`concentration`] — concentration functions `alpha(eps)`: exact
//!   brute force on small Hamming cubes, extremal-ball closed forms,
//!   witness-set lower bounds, and exponential upper bounds for normal
//!   Levy families;
//! * [`workload`] — dataset construction (i.i.d. or greedy packing),
//!   exact brute-force nearest-neighbour and range queries, and workload
//!   profiling (median NN distance, half-measure radii, homogeneity);
//! * [`analysis`] — instability fractions, neighbour-count lower-bound
//!   verification, dimension sweeps, and the separated-dataset stability
//!   check;
//! * [`runner`] — the reproducible experiment runner behind the `simcon`
//!   command-line tool.
//!
//! Every randomized routine takes an explicit 64-bit seed and derives
//! independent sub-streams per task, so results are reproducible and
//! independent of the number of worker threads. See the `examples/`
//! directory for one runnable demonstration per capability.

pub mod analysis;
pub mod concentration;
pub mod rng;
pub mod runner;
pub mod space;
pub mod workload;

pub use analysis::{
    dimension_sweep, epsilon_radius_count, instability_fraction, stable_workload_check,
    verify_count_bound, CountBoundReport, QueryStat, SweepResult, SweepRow,
};
pub use concentration::{
    alpha_brute_force_hamming, alpha_extremal_hamming, alpha_levy_upper, alpha_witness_lower,
    concentration_curve, lipschitz_concentration_check, ConcentrationCurve, LevyConstants,
};
pub use space::{Point, Space, SpaceKind};
pub use workload::{Workload, WorkloadProfile};
