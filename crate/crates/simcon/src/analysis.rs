//! Workload-level measurements: query instability, neighbour counts at
//! radius `(1+eps) d_X`, verification of the exponential count lower
//! bound, dimension sweeps, and the separated-dataset stability check.
//!
//! Conventions. A query is `eps`-unstable when more than half the dataset
//! lies within distance `(1+eps) d_X(q)` of it (closed ball, per the
//! instability definition); the count lower bound is stated for the open
//! ball, so both counts are reported per query. Queries that coincide
//! with a data point (`d_X = 0`) trivially satisfy any bound; they are
//! flagged, excluded from fraction statistics, and reported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concentration::{alpha_levy_upper, LevyConstants};
use crate::rng::{derive_seed, stream, StreamKind};
use crate::space::{Point, Space, SpaceKind};
use crate::workload::{BuildStats, Workload, WorkloadError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("count-bound verification requires 0 < eps < 1, got {0}")]
    EpsOutOfRange(f64),
    #[error("median nearest-neighbour distance {0} is not positive")]
    NonPositiveMedian(f64),
    #[error("every sampled query coincided with a data point")]
    AllQueriesCoincident,
    #[error("need at least {min} queries, got {got}")]
    TooFewQueries { min: usize, got: usize },
    #[error("stability construction requires delta < diameter/8 ({max}), got {delta}")]
    DeltaTooLarge { delta: f64, max: f64 },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

/// Per-query record of an eps-radius neighbour count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryStat {
    /// Index in the query stream; absent for ad-hoc query points.
    pub query_index: Option<u64>,
    /// Distance to the nearest neighbour.
    pub d_x: f64,
    /// Index of the nearest neighbour (lowest on ties).
    pub nn_index: usize,
    /// Points strictly inside the open ball of radius (1+eps) d_x.
    pub count_open: usize,
    /// Points within the closed ball of radius (1+eps) d_x.
    pub count_closed: usize,
    /// count_closed > |X| / 2.
    pub unstable: bool,
    /// d_x == 0 (query sits on a data point).
    pub coincident: bool,
}

fn stat_for(
    workload: &Workload,
    q: &Point,
    eps: f64,
    index: Option<u64>,
    buf: &mut Vec<f64>,
) -> QueryStat {
    workload.distances_unchecked_into(q, buf);
    let mut d_x = f64::INFINITY;
    let mut nn_index = 0;
    for (i, &d) in buf.iter().enumerate() {
        if d < d_x {
            d_x = d;
            nn_index = i;
        }
    }
    let radius = (1.0 + eps) * d_x;
    let mut count_open = 0;
    let mut count_closed = 0;
    for &d in buf.iter() {
        if d < radius {
            count_open += 1;
        }
        if d <= radius {
            count_closed += 1;
        }
    }
    QueryStat {
        query_index: index,
        d_x,
        nn_index,
        count_open,
        count_closed,
        unstable: 2 * count_closed > workload.len(),
        coincident: d_x == 0.0,
    }
}

/// Exact brute-force counts in the ball of radius `(1+eps) d_X(q)`.
pub fn epsilon_radius_count(
    workload: &Workload,
    q: &Point,
    eps: f64,
) -> Result<QueryStat, AnalysisError> {
    workload.space().validate_point(q).map_err(WorkloadError::Space)?;
    Ok(stat_for(workload, q, eps, None, &mut Vec::new()))
}

/// Stats for `num_queries` fresh queries, in query order. Parallel per
/// query with one distance buffer per worker.
pub fn query_stats(
    workload: &Workload,
    eps: f64,
    num_queries: usize,
    seed: u64,
) -> Vec<QueryStat> {
    (0..num_queries as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let q = workload.sample_query(seed, i);
            stat_for(workload, &q, eps, Some(i), buf)
        })
        .collect()
}

/// A binomial fraction estimate over the non-coincident queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionEstimate {
    pub fraction: f64,
    pub stderr: f64,
    /// Queries entering the fraction (non-coincident).
    pub queries_counted: usize,
    pub coincident_excluded: usize,
}

/// Fraction of sampled queries that are eps-unstable. Coincident queries
/// are excluded; if every query coincides the workload is degenerate and
/// an error is returned.
pub fn instability_fraction(
    workload: &Workload,
    eps: f64,
    num_queries: usize,
    seed: u64,
) -> Result<FractionEstimate, AnalysisError> {
    if num_queries < 100 {
        return Err(AnalysisError::TooFewQueries {
            min: 100,
            got: num_queries,
        });
    }
    let stats = query_stats(workload, eps, num_queries, seed);
    instability_from_stats(&stats)
}

/// Instability fraction of an already-evaluated query batch.
pub fn instability_from_stats(stats: &[QueryStat]) -> Result<FractionEstimate, AnalysisError> {
    fraction_of(stats, |s| s.unstable)
}

fn fraction_of(
    stats: &[QueryStat],
    predicate: impl Fn(&QueryStat) -> bool,
) -> Result<FractionEstimate, AnalysisError> {
    let coincident = stats.iter().filter(|s| s.coincident).count();
    let counted = stats.len() - coincident;
    if counted == 0 {
        return Err(AnalysisError::AllQueriesCoincident);
    }
    let hits = stats
        .iter()
        .filter(|s| !s.coincident && predicate(s))
        .count();
    let p = hits as f64 / counted as f64;
    Ok(FractionEstimate {
        fraction: p,
        stderr: (p * (1.0 - p) / counted as f64).sqrt(),
        queries_counted: counted,
        coincident_excluded: coincident,
    })
}

/// Outcome of the weak-homogeneity precondition check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityCheck {
    /// Threshold the R_x spread is held against: m_hat * eps / 6 + 2 tol.
    pub threshold: f64,
    pub r_interval_width: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Verification record for the neighbour-count lower bound: apart from a
/// query set of measure at most `mass_bound`, the open ball of radius
/// `(1+eps) d_X(q)` holds at least `count_bound` data points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBoundReport {
    pub eps: f64,
    /// Median NN distance estimated from the same query stream.
    pub m_hat: f64,
    pub m_hat_stderr: f64,
    /// Fattening argument m_hat * eps / 6.
    pub alpha_arg: f64,
    /// Upper bound on alpha at the argument (true alpha is unavailable in
    /// continuous domains; substituting the upper bound only loosens both
    /// bounds below, so the check stays sound).
    pub alpha_upper_at_arg: f64,
    pub constants: LevyConstants,
    /// 3 * alpha_upper(alpha_arg): allowed measure of bad queries.
    pub mass_bound: f64,
    /// min(|X|, ceil(1 / (2 sqrt(alpha_upper)))): guaranteed neighbours.
    pub count_bound: usize,
    /// Fraction of (non-coincident) queries with count_open < count_bound.
    pub violation_fraction: f64,
    pub violation_stderr: f64,
    pub num_queries: usize,
    pub queries_counted: usize,
    pub coincident_excluded: usize,
    pub homogeneity: HomogeneityCheck,
    /// True when the homogeneity precondition failed; the contract then
    /// has no backing and the run is informational only.
    pub informational: bool,
    /// violation_fraction <= mass_bound + 4 stderr.
    pub contract_ok: bool,
}

/// Measures how often the `(1+eps) d_X`-ball misses the guaranteed
/// neighbour count and compares against the mass bound.
///
/// The workload must pass weak `(m_hat eps/6)`-homogeneity (within twice
/// the bisection tolerance); a failed check downgrades the report to
/// informational instead of erroring, so inhomogeneous datasets can still
/// be explored.
#[allow(clippy::too_many_arguments)]
pub fn verify_count_bound(
    workload: &Workload,
    eps: f64,
    num_queries: usize,
    constants: &LevyConstants,
    tol: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<CountBoundReport, AnalysisError> {
    if num_queries < 100 {
        return Err(AnalysisError::TooFewQueries {
            min: 100,
            got: num_queries,
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AnalysisError::EpsOutOfRange(eps));
    }
    let stats = query_stats(workload, eps, num_queries, seed);
    verify_count_bound_from_stats(workload, eps, &stats, constants, tol, mc_samples, seed)
}

/// [`verify_count_bound`] over an already-evaluated query batch (the
/// stats must come from the same `eps`).
pub fn verify_count_bound_from_stats(
    workload: &Workload,
    eps: f64,
    stats: &[QueryStat],
    constants: &LevyConstants,
    tol: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<CountBoundReport, AnalysisError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AnalysisError::EpsOutOfRange(eps));
    }
    let num_queries = stats.len();
    let mut d: Vec<f64> = stats.iter().map(|s| s.d_x).collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("NaN distance"));
    let m_hat = d[(d.len() - 1) / 2];
    let iqr = d[(3 * d.len()) / 4 - 1] - d[d.len() / 4];
    let m_hat_stderr = iqr / (d.len() as f64).sqrt();
    if m_hat <= 0.0 {
        return Err(AnalysisError::NonPositiveMedian(m_hat));
    }

    let alpha_arg = m_hat * eps / 6.0;
    let alpha_upper = alpha_levy_upper(constants, alpha_arg).clamp(f64::MIN_POSITIVE, 0.5);
    let mass_bound = 3.0 * alpha_upper;
    let count_bound_raw = (1.0 / (2.0 * alpha_upper.sqrt())).ceil() as usize;
    let count_bound = count_bound_raw.max(1).min(workload.len());

    let violation = fraction_of(&stats, |s| s.count_open < count_bound)?;

    let profile = workload.profile(alpha_arg + 2.0 * tol, 100, tol, mc_samples, derive_seed(seed, 1))?;
    let homogeneity = HomogeneityCheck {
        threshold: alpha_arg + 2.0 * tol,
        r_interval_width: profile.r_interval_width,
        tol,
        passed: profile.r_interval_width < alpha_arg + 2.0 * tol,
    };

    Ok(CountBoundReport {
        eps,
        m_hat,
        m_hat_stderr,
        alpha_arg,
        alpha_upper_at_arg: alpha_upper,
        constants: *constants,
        mass_bound,
        count_bound,
        violation_fraction: violation.fraction,
        violation_stderr: violation.stderr,
        num_queries,
        queries_counted: violation.queries_counted,
        coincident_excluded: violation.coincident_excluded,
        homogeneity,
        informational: !homogeneity.passed,
        contract_ok: violation.fraction <= mass_bound + 4.0 * violation.stderr,
    })
}

/// Dataset size rule for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum DatasetSize {
    Fixed { n_points: usize },
    /// n(dim) = ceil(exp(rate * dim)).
    ExpGrowth { rate: f64 },
}

impl DatasetSize {
    pub fn points_for(&self, dim: u32) -> usize {
        match *self {
            DatasetSize::Fixed { n_points } => n_points,
            DatasetSize::ExpGrowth { rate } => (rate * dim as f64).exp().ceil() as usize,
        }
    }
}

/// One dimension of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: u32,
    pub n_points: usize,
    pub m_hat: f64,
    /// Set when the median NN distance fell below the caller's assumed
    /// floor (the bounded-away-from-zero standing assumption).
    pub m_hat_flagged: bool,
    pub instability_fraction: f64,
    pub instability_stderr: f64,
    pub mean_count_closed: f64,
    pub median_count_closed: f64,
    pub count_bound: usize,
    pub mass_bound: f64,
    pub violation_fraction: f64,
    /// Per-query closed counts (kept for the permutation test).
    #[serde(skip)]
    pub counts_closed: Vec<usize>,
}

/// Least-squares slope of log median count against dimension, with a
/// permutation p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// One-sided permutation p-value for slope > 0: dimension labels of
    /// the pooled per-query counts are reshuffled and the median-based
    /// slope recomputed.
    pub p_value: f64,
    pub permutations: usize,
    /// Dimensions entering the fit.
    pub dims_used: Vec<u32>,
    /// True when every row saturated (median count == |X|) and the fit
    /// fell back to all rows instead of the count < |X| subset.
    pub used_saturated_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SpaceKind,
    pub eps: f64,
    pub num_queries: usize,
    pub rows: Vec<SweepRow>,
    /// Absent for single-row sweeps.
    pub slope: Option<SlopeFit>,
}

/// Runs the per-dimension measurements and fits the exponential-growth
/// check. Dimensions must be sorted ascending; `m_floor`, when given,
/// flags rows whose median NN distance drops below it.
#[allow(clippy::too_many_arguments)]
pub fn dimension_sweep(
    kind: SpaceKind,
    dims: &[u32],
    size: DatasetSize,
    eps: f64,
    num_queries: usize,
    seed: u64,
    alpha_overrides: (Option<f64>, Option<f64>),
    m_floor: Option<f64>,
    permutations: usize,
) -> Result<SweepResult, AnalysisError> {
    assert!(
        dims.windows(2).all(|w| w[0] < w[1]),
        "sweep dimensions must be sorted ascending"
    );
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let space = Space::new(kind, dim).map_err(WorkloadError::Space)?;
        let n_points = size.points_for(dim).max(1);
        let workload = Workload::build_iid(space, n_points, derive_seed(seed, dim as u64))?;
        let stats = query_stats(&workload, eps, num_queries, derive_seed(seed, 1 << 32 | dim as u64));
        let mut d: Vec<f64> = stats.iter().map(|s| s.d_x).collect();
        d.sort_by(|a, b| a.partial_cmp(b).expect("NaN distance"));
        let m_hat = d[(d.len() - 1) / 2];

        let constants = LevyConstants::defaults_for(kind, dim)
            .with_overrides(alpha_overrides.0, alpha_overrides.1);
        let alpha_arg = m_hat * eps / 6.0;
        let alpha_upper = alpha_levy_upper(&constants, alpha_arg).clamp(f64::MIN_POSITIVE, 0.5);
        let count_bound = ((1.0 / (2.0 * alpha_upper.sqrt())).ceil() as usize)
            .max(1)
            .min(n_points);

        let instability = fraction_of(&stats, |s| s.unstable)?;
        let violation = fraction_of(&stats, |s| s.count_open < count_bound)?;
        let counts_closed: Vec<usize> = stats.iter().map(|s| s.count_closed).collect();
        let mean = counts_closed.iter().sum::<usize>() as f64 / counts_closed.len() as f64;
        let median = median_usize(&counts_closed);

        rows.push(SweepRow {
            dim,
            n_points,
            m_hat,
            m_hat_flagged: m_floor.is_some_and(|floor| m_hat < floor),
            instability_fraction: instability.fraction,
            instability_stderr: instability.stderr,
            mean_count_closed: mean,
            median_count_closed: median,
            count_bound,
            mass_bound: 3.0 * alpha_upper,
            violation_fraction: violation.fraction,
            counts_closed,
        });
    }
    let slope = fit_log_count_slope(&rows, permutations, derive_seed(seed, u64::MAX));
    Ok(SweepResult {
        kind,
        eps,
        num_queries,
        rows,
        slope,
    })
}

fn median_usize(values: &[usize]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    v[(v.len() - 1) / 2] as f64
}

/// Fits log(median count_closed) against dimension over the rows still
/// below saturation (median < |X|); when fewer than two such rows exist
/// (every ball already holds the whole dataset) the fit uses all rows, in
/// which case the growth being measured is the dataset's own. The
/// p-value comes from permuting dimension labels of the pooled per-query
/// counts.
pub fn fit_log_count_slope(rows: &[SweepRow], permutations: usize, seed: u64) -> Option<SlopeFit> {
    if rows.len() < 2 {
        return None;
    }
    let unsaturated: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| (r.median_count_closed as usize) < r.n_points)
        .collect();
    let (selected, fallback): (Vec<&SweepRow>, bool) = if unsaturated.len() >= 2 {
        (unsaturated, false)
    } else {
        (rows.iter().collect(), true)
    };

    let xs: Vec<f64> = selected.iter().map(|r| r.dim as f64).collect();
    let ys: Vec<f64> = selected
        .iter()
        .map(|r| r.median_count_closed.max(1.0).ln())
        .collect();
    let slope = least_squares_slope(&xs, &ys)?;

    // Pool the per-query counts and reshuffle dimension labels.
    let pooled: Vec<usize> = selected
        .iter()
        .flat_map(|r| r.counts_closed.iter().copied())
        .collect();
    let chunk_sizes: Vec<usize> = selected.iter().map(|r| r.counts_closed.len()).collect();
    let mut rng = stream(seed, StreamKind::Permutation, 0);
    let mut work = pooled.clone();
    let mut at_least = 0usize;
    for _ in 0..permutations {
        shuffle(&mut work, &mut rng);
        let mut offset = 0;
        let mut perm_ys = Vec::with_capacity(chunk_sizes.len());
        for &len in &chunk_sizes {
            perm_ys.push(median_usize(&work[offset..offset + len]).max(1.0).ln());
            offset += len;
        }
        if let Some(s) = least_squares_slope(&xs, &perm_ys) {
            if s >= slope {
                at_least += 1;
            }
        }
    }
    Some(SlopeFit {
        slope,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
        permutations,
        dims_used: selected.iter().map(|r| r.dim).collect(),
        used_saturated_fallback: fallback,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

fn shuffle<T>(v: &mut [T], rng: &mut impl rand::Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Report of the separated-dataset stability construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableCheckReport {
    pub delta: f64,
    pub eps: f64,
    pub n_points: usize,
    pub build_stats: BuildStats,
    pub m_hat: f64,
    pub m_hat_stderr: f64,
    pub num_queries: usize,
    pub coincident_excluded: usize,
    /// Query-stream indices of the eps-unstable queries found.
    pub unstable_query_indices: Vec<u64>,
    /// Largest pairwise distance among unstable query centres; absent
    /// when fewer than two were found.
    pub max_pairwise_distance: Option<f64>,
    /// All unstable centres pairwise within 8 delta (vacuously true for
    /// an empty or singleton set).
    pub within_eight_delta: bool,
}

/// Builds a delta-separated dataset by greedy packing and checks the
/// stability prediction: eps-unstable query centres, if any, must sit
/// inside a ball of radius 4 delta — so pairwise within 8 delta — and the
/// median NN distance should not drop below delta/2.
#[allow(clippy::too_many_arguments)]
pub fn stable_workload_check(
    space: Space,
    delta: f64,
    eps: f64,
    num_queries: usize,
    seed: u64,
    max_rejections: u64,
    max_points: usize,
) -> Result<StableCheckReport, AnalysisError> {
    if delta >= space.diameter() / 8.0 {
        return Err(AnalysisError::DeltaTooLarge {
            delta,
            max: space.diameter() / 8.0,
        });
    }
    let workload = Workload::build_separated(space, delta, seed, max_rejections, max_points)?;
    let query_seed = derive_seed(seed, 2);
    let stats = query_stats(&workload, eps, num_queries, query_seed);

    let mut d: Vec<f64> = stats.iter().map(|s| s.d_x).collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("NaN distance"));
    let m_hat = d[(d.len() - 1) / 2];
    let iqr = d[(3 * d.len()) / 4 - 1] - d[d.len() / 4];

    let unstable: Vec<u64> = stats
        .iter()
        .filter(|s| !s.coincident && s.unstable)
        .map(|s| s.query_index.expect("stream query"))
        .collect();
    let centres: Vec<Point> = unstable
        .iter()
        .map(|&i| workload.sample_query(query_seed, i))
        .collect();
    let mut max_pairwise: Option<f64> = None;
    for (i, a) in centres.iter().enumerate() {
        for b in &centres[i + 1..] {
            let dist = workload.space().distance_unchecked(a, b);
            max_pairwise = Some(max_pairwise.map_or(dist, |m: f64| m.max(dist)));
        }
    }
    Ok(StableCheckReport {
        delta,
        eps,
        n_points: workload.len(),
        build_stats: workload.stats().expect("fresh build"),
        m_hat,
        m_hat_stderr: iqr / (d.len() as f64).sqrt(),
        num_queries,
        coincident_excluded: stats.iter().filter(|s| s.coincident).count(),
        unstable_query_indices: unstable,
        max_pairwise_distance: max_pairwise,
        within_eight_delta: max_pairwise.is_none_or(|m| m <= 8.0 * delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::BitString;

    fn sphere(dim: u32) -> Space {
        Space::new(SpaceKind::SphereGeodesic, dim).unwrap()
    }

    #[test]
    fn singleton_dataset_counts_its_point() {
        let w = Workload::build_iid(sphere(6), 1, 0).unwrap();
        for i in 0..20 {
            let q = w.sample_query(3, i);
            let s = epsilon_radius_count(&w, &q, 0.4).unwrap();
            assert_eq!(s.count_closed, 1);
            assert!(s.count_open <= 1);
        }
    }

    #[test]
    fn tied_neighbours_all_counted() {
        // Query equidistant from several points: closed count covers the
        // whole tie class.
        let space = Space::new(SpaceKind::HammingCube, 2).unwrap();
        let points = vec![
            Point::Bits(BitString::from_word(0b01, 2)),
            Point::Bits(BitString::from_word(0b10, 2)),
        ];
        let w = Workload::from_points(space, points, 0).unwrap();
        let q = Point::Bits(BitString::from_word(0b00, 2));
        let s = epsilon_radius_count(&w, &q, 0.5).unwrap();
        assert_eq!(s.d_x, 0.5);
        assert_eq!(s.nn_index, 0); // lowest index on ties
        assert_eq!(s.count_closed, 2);
    }

    #[test]
    fn counts_match_enumeration_oracle() {
        let space = Space::new(SpaceKind::HammingCube, 3).unwrap();
        let w = Workload::build_iid(space, 4, 8).unwrap();
        for i in 0..40 {
            let q = w.sample_query(5, i);
            let s = epsilon_radius_count(&w, &q, 0.7).unwrap();
            let radius = 1.7 * s.d_x;
            let open = w
                .points()
                .iter()
                .filter(|p| space.distance(&q, p).unwrap() < radius)
                .count();
            let closed = w
                .points()
                .iter()
                .filter(|p| space.distance(&q, p).unwrap() <= radius)
                .count();
            assert_eq!((s.count_open, s.count_closed), (open, closed));
            assert!(s.count_open <= s.count_closed && s.count_closed <= w.len());
            if s.d_x > 0.0 {
                assert!(s.count_closed >= 1);
            }
        }
    }

    #[test]
    fn huge_eps_makes_every_query_unstable() {
        let w = Workload::build_iid(sphere(8), 50, 1).unwrap();
        // (1+eps) d_x >= diameter for any sampled query at eps this size.
        let est = instability_fraction(&w, 1e6, 200, 2).unwrap();
        assert_eq!(est.fraction, 1.0);
    }

    #[test]
    fn fully_covered_finite_space_is_degenerate() {
        let space = Space::new(SpaceKind::HammingCube, 2).unwrap();
        let points = (0u64..4)
            .map(|v| Point::Bits(BitString::from_word(v, 2)))
            .collect();
        let w = Workload::from_points(space, points, 0).unwrap();
        assert!(matches!(
            instability_fraction(&w, 0.5, 200, 0),
            Err(AnalysisError::AllQueriesCoincident)
        ));
    }

    #[test]
    fn instability_nondecreasing_in_eps() {
        let w = Workload::build_iid(sphere(24), 300, 4).unwrap();
        let mut prev: Option<FractionEstimate> = None;
        for eps in [0.1, 0.3, 0.5, 0.8] {
            let est = instability_fraction(&w, eps, 800, 9).unwrap();
            if let Some(p) = prev {
                let tol = 4.0 * (p.stderr * p.stderr + est.stderr * est.stderr).sqrt();
                assert!(est.fraction >= p.fraction - tol);
            }
            prev = Some(est);
        }
    }

    #[test]
    fn instability_at_zero_eps_is_rare_on_continuous_domains() {
        let w = Workload::build_iid(sphere(20), 1000, 5).unwrap();
        let est = instability_fraction(&w, 0.0, 500, 6).unwrap();
        assert!(est.fraction <= 0.01);
    }

    #[test]
    fn count_bound_one_regime_has_zero_violations() {
        // Low dimension: alpha_upper >= 1/4 at the argument, so the bound
        // asks for a single neighbour, which the NN always supplies.
        let w = Workload::build_iid(sphere(10), 200, 7).unwrap();
        let constants = LevyConstants::defaults_for(SpaceKind::SphereGeodesic, 10);
        let report = verify_count_bound(&w, 0.5, 400, &constants, 1e-4, 0, 8).unwrap();
        assert_eq!(report.count_bound, 1);
        assert_eq!(report.violation_fraction, 0.0);
        assert!(report.contract_ok);
        assert!(report.homogeneity.passed);
        assert!(!report.informational);
    }

    #[test]
    fn count_bound_rejects_bad_eps() {
        let w = Workload::build_iid(sphere(5), 10, 0).unwrap();
        let constants = LevyConstants::defaults_for(SpaceKind::SphereGeodesic, 5);
        for eps in [0.0, 1.0, 1.5, -0.2] {
            assert!(matches!(
                verify_count_bound(&w, eps, 200, &constants, 1e-4, 0, 0),
                Err(AnalysisError::EpsOutOfRange(_))
            ));
        }
    }

    #[test]
    fn count_bound_rejects_degenerate_median() {
        // {0,1}^1 fully covered: every query hits a data point, so the
        // median NN distance collapses to zero.
        let space = Space::new(SpaceKind::HammingCube, 1).unwrap();
        let points = vec![
            Point::Bits(BitString::from_word(0, 1)),
            Point::Bits(BitString::from_word(1, 1)),
        ];
        let w = Workload::from_points(space, points, 0).unwrap();
        let constants = LevyConstants::defaults_for(SpaceKind::HammingCube, 1);
        assert!(matches!(
            verify_count_bound(&w, 0.5, 200, &constants, 1e-3, 0, 0),
            Err(AnalysisError::NonPositiveMedian(_))
        ));
    }

    #[test]
    fn tiny_dataset_saturates_open_count() {
        // Corollary regime: with very few points in high dimension, the
        // ball swallows the entire dataset for almost every query.
        let w = Workload::build_iid(sphere(64), 3, 11).unwrap();
        let stats = query_stats(&w, 0.5, 300, 12);
        let saturated = stats.iter().filter(|s| s.count_open == 3).count();
        assert!(saturated as f64 / stats.len() as f64 > 0.95);
    }

    #[test]
    fn sweep_shapes_and_single_row() {
        let sweep = dimension_sweep(
            SpaceKind::SphereGeodesic,
            &[6, 12],
            DatasetSize::Fixed { n_points: 60 },
            0.5,
            150,
            13,
            (None, None),
            None,
            200,
        )
        .unwrap();
        assert_eq!(sweep.rows.len(), 2);
        assert!(sweep.slope.is_some());

        let single = dimension_sweep(
            SpaceKind::SphereGeodesic,
            &[6],
            DatasetSize::Fixed { n_points: 60 },
            0.5,
            150,
            13,
            (None, None),
            None,
            200,
        )
        .unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(single.slope.is_none());
    }

    #[test]
    fn exp_growth_rule_sizes() {
        let rule = DatasetSize::ExpGrowth { rate: 0.01 };
        assert_eq!(rule.points_for(32), 2);
        assert_eq!(rule.points_for(64), 2);
        assert_eq!(rule.points_for(96), 3);
        assert_eq!(rule.points_for(128), 4);
    }

    #[test]
    fn stable_check_rejects_large_delta() {
        let space = Space::new(SpaceKind::Torus, 8).unwrap();
        assert!(matches!(
            stable_workload_check(space, 0.2, 1.0, 200, 0, 100, 50),
            Err(AnalysisError::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn stable_check_small_run() {
        let space = Space::new(SpaceKind::Torus, 4).unwrap();
        let report = stable_workload_check(space, 0.05, 1.0, 300, 3, 1000, 400).unwrap();
        assert!(report.n_points >= 1);
        assert!(report.m_hat > 0.0);
        if report.unstable_query_indices.len() < 2 {
            assert!(report.within_eight_delta);
            assert!(report.max_pairwise_distance.is_none() || report.within_eight_delta);
        }
    }
}
