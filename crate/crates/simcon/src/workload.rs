//! Similarity workloads: a finite dataset living inside a probability
//! metric space, with exact brute-force queries and profiling.
//!
//! Datasets are built either i.i.d. from the space's measure or by greedy
//! packing (keep a candidate iff it is farther than `delta` from every
//! kept point). Queries are answered by exact linear scans; profiling
//! measures the median nearest-neighbour distance, the half-measure
//! radius `R_x` of every data point, and weak homogeneity (all `R_x`
//! within an interval shorter than a threshold).

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, StreamKind};
use crate::space::{BitString, Point, ProximityCheck, Space, SpaceError, SpaceKind};

/// Version tag of the dataset file format.
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("dataset must contain at least one point")]
    EmptyDataset,
    #[error("separation delta {delta} outside (0, {diameter})")]
    InvalidDelta { delta: f64, diameter: f64 },
    #[error("data point index {index} out of range ({len} points)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("need at least {min} queries, got {got}")]
    TooFewQueries { min: usize, got: usize },
    #[error("every sampled query coincided with a data point")]
    AllQueriesCoincident,
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// How a dataset was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BuildMode {
    Iid { n_points: usize },
    Separated { delta: f64 },
    /// Points supplied directly by the caller.
    Explicit,
}

/// Why a greedy packing build stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TargetReached,
    ConsecutiveRejections,
    MaxPoints,
}

/// Build bookkeeping; the packing's rejection counter lives here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub candidates_drawn: u64,
    pub rejections: u64,
    pub stopped_by: StopReason,
}

/// A dataset instance inside a space.
#[derive(Debug, Clone)]
pub struct Workload {
    space: Space,
    points: Vec<Point>,
    build_mode: BuildMode,
    seed: u64,
    /// Present for freshly built datasets, absent after deserialization.
    stats: Option<BuildStats>,
    /// Row-major coordinate cache for real kinds (empty for Hamming).
    /// Keeps brute-force scans on contiguous memory.
    flat: Vec<f64>,
}

fn flatten(space: &Space, points: &[Point]) -> Vec<f64> {
    if space.kind == SpaceKind::HammingCube {
        return Vec::new();
    }
    let mut flat = Vec::with_capacity(points.len() * space.ambient_len());
    for p in points {
        flat.extend_from_slice(p.coords().expect("real point"));
    }
    flat
}

/// Spatial buckets over the leading coordinates for packing builds. Two
/// points at metric distance <= delta displace each bucketed coordinate
/// by at most one cell, so conflict checks only visit the 3^G
/// neighbouring cells. Purely a pruning device: the membership predicate
/// is unchanged, so results match the plain scan exactly.
struct PackingGrid {
    low: f64,
    cell: f64,
    cells: usize,
    coords_used: usize,
    wrap: bool,
    /// cells^coords_used buckets of kept-point indices.
    slots: Vec<Vec<u32>>,
}

impl PackingGrid {
    const MAX_COORDS: usize = 6;
    const MAX_SLOTS: usize = 1 << 20;

    fn try_new(space: &Space, delta: f64) -> Option<PackingGrid> {
        let bound = space.coord_displacement_bound(delta)?;
        let (low, extent, wrap) = space.coord_range()?;
        if !(bound > 0.0) {
            return None;
        }
        let cells = (extent / bound).floor() as usize;
        if cells < 3 {
            return None; // every cell would neighbour every other
        }
        let cells = cells.min(64);
        let mut coords_used = 0;
        let mut slots = 1usize;
        while coords_used < space.ambient_len().min(Self::MAX_COORDS)
            && slots.saturating_mul(cells) <= Self::MAX_SLOTS
        {
            slots *= cells;
            coords_used += 1;
        }
        if coords_used == 0 {
            return None;
        }
        Some(PackingGrid {
            low,
            cell: extent / cells as f64,
            cells,
            coords_used,
            wrap,
            slots: vec![Vec::new(); slots],
        })
    }

    fn cell_of(&self, x: f64) -> usize {
        (((x - self.low) / self.cell) as usize).min(self.cells - 1)
    }

    fn slot_of(&self, coords: &[f64]) -> usize {
        let mut idx = 0;
        for &x in &coords[..self.coords_used] {
            idx = idx * self.cells + self.cell_of(x);
        }
        idx
    }

    fn insert(&mut self, coords: &[f64], point_index: u32) {
        let slot = self.slot_of(coords);
        self.slots[slot].push(point_index);
    }

    /// Whether any kept point within one cell per bucketed coordinate is
    /// metrically within delta of the candidate.
    fn conflicts(
        &self,
        coords: &[f64],
        kept_flat: &[f64],
        width: usize,
        near: &ProximityCheck,
    ) -> bool {
        let g = self.coords_used;
        let mut choices: [[usize; 3]; Self::MAX_COORDS] = [[0; 3]; Self::MAX_COORDS];
        let mut counts = [0usize; Self::MAX_COORDS];
        for (i, &x) in coords[..g].iter().enumerate() {
            let c = self.cell_of(x) as i64;
            let mut k = 0;
            for d in [-1i64, 0, 1] {
                let mut v = c + d;
                if self.wrap {
                    v = v.rem_euclid(self.cells as i64);
                } else if v < 0 || v >= self.cells as i64 {
                    continue;
                }
                // cells >= 3, so wrapped neighbours never collide
                choices[i][k] = v as usize;
                k += 1;
            }
            counts[i] = k;
        }
        let mut odo = [0usize; Self::MAX_COORDS];
        loop {
            let mut slot = 0;
            for i in 0..g {
                slot = slot * self.cells + choices[i][odo[i]];
            }
            for &idx in &self.slots[slot] {
                let row = &kept_flat[idx as usize * width..(idx as usize + 1) * width];
                if near.within_coords(coords, row) {
                    return true;
                }
            }
            // advance the odometer
            let mut i = g;
            loop {
                if i == 0 {
                    return false;
                }
                i -= 1;
                odo[i] += 1;
                if odo[i] < counts[i] {
                    break;
                }
                odo[i] = 0;
            }
        }
    }
}

/// Median estimate with a dispersion-based standard error (IQR / sqrt(m)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub median: f64,
    pub stderr: f64,
    pub num_queries: usize,
}

/// Summary of a workload's geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    /// Empirical median nearest-neighbour distance over sampled queries.
    pub median_nn: f64,
    pub median_nn_stderr: f64,
    /// Half-measure radius of each data point.
    pub r_x: Vec<f64>,
    /// max(r_x) - min(r_x).
    pub r_interval_width: f64,
    pub homogeneity_eps: f64,
    /// Whether `r_interval_width < homogeneity_eps`.
    pub is_weakly_homogeneous: bool,
}

impl Workload {
    /// Samples `n_points` points independently from the space's measure.
    pub fn build_iid(space: Space, n_points: usize, seed: u64) -> Result<Workload, WorkloadError> {
        if n_points == 0 {
            return Err(WorkloadError::EmptyDataset);
        }
        let mut rng = stream(seed, StreamKind::DatasetBuild, 0);
        let points: Vec<Point> = (0..n_points).map(|_| space.sample(&mut rng)).collect();
        Ok(Workload {
            flat: flatten(&space, &points),
            space,
            points,
            build_mode: BuildMode::Iid { n_points },
            seed,
            stats: Some(BuildStats {
                candidates_drawn: n_points as u64,
                rejections: 0,
                stopped_by: StopReason::TargetReached,
            }),
        })
    }

    /// Greedy maximal packing: candidates are drawn from the measure and
    /// kept iff their distance to every kept point exceeds `delta`. The
    /// build stops after `max_rejections` consecutive rejections or once
    /// `max_points` points are kept, whichever comes first. The first
    /// candidate is always accepted.
    pub fn build_separated(
        space: Space,
        delta: f64,
        seed: u64,
        max_rejections: u64,
        max_points: usize,
    ) -> Result<Workload, WorkloadError> {
        let diameter = space.diameter();
        if !(delta > 0.0 && delta < diameter) {
            return Err(WorkloadError::InvalidDelta { delta, diameter });
        }
        if max_points == 0 {
            return Err(WorkloadError::EmptyDataset);
        }
        let near = space.proximity(delta); // d <= delta means conflict
        let hamming = space.kind == SpaceKind::HammingCube;
        let width = space.ambient_len();
        let mut grid = if hamming {
            None
        } else {
            PackingGrid::try_new(&space, delta)
        };
        let mut rng = stream(seed, StreamKind::DatasetBuild, 0);
        let mut kept: Vec<Point> = Vec::new();
        let mut kept_flat: Vec<f64> = Vec::new();
        let mut candidates_drawn = 0u64;
        let mut rejections = 0u64;
        let mut consecutive = 0u64;
        let mut stopped_by = StopReason::MaxPoints;
        const CHUNK: usize = 512;
        'outer: while kept.len() < max_points {
            let batch: Vec<Point> = (0..CHUNK).map(|_| space.sample(&mut rng)).collect();
            // Check the whole batch against the kept set in parallel;
            // conflicts inside the batch are resolved sequentially below,
            // so the result does not depend on thread count.
            let clean_vs_kept: Vec<bool> = if hamming {
                batch
                    .par_iter()
                    .map(|c| !kept.iter().any(|p| near.within(c, p)))
                    .collect()
            } else if let Some(g) = &grid {
                batch
                    .par_iter()
                    .map(|c| !g.conflicts(c.coords().expect("real point"), &kept_flat, width, &near))
                    .collect()
            } else {
                batch
                    .par_iter()
                    .map(|c| {
                        let cc = c.coords().expect("real point");
                        !kept_flat
                            .chunks_exact(width)
                            .any(|row| near.within_coords(cc, row))
                    })
                    .collect()
            };
            let base = kept.len();
            for (cand, clean) in batch.into_iter().zip(clean_vs_kept) {
                candidates_drawn += 1;
                let ok = clean
                    && if hamming {
                        !kept[base..].iter().any(|p| near.within(&cand, p))
                    } else {
                        let cc = cand.coords().expect("real point");
                        !kept_flat[base * width..]
                            .chunks_exact(width)
                            .any(|row| near.within_coords(cc, row))
                    };
                if ok {
                    if !hamming {
                        let cc = cand.coords().expect("real point");
                        if let Some(g) = &mut grid {
                            g.insert(cc, kept.len() as u32);
                        }
                        kept_flat.extend_from_slice(cc);
                    }
                    kept.push(cand);
                    consecutive = 0;
                    if kept.len() == max_points {
                        stopped_by = StopReason::MaxPoints;
                        break 'outer;
                    }
                } else {
                    rejections += 1;
                    consecutive += 1;
                    if consecutive >= max_rejections {
                        stopped_by = StopReason::ConsecutiveRejections;
                        break 'outer;
                    }
                }
            }
        }
        Ok(Workload {
            flat: kept_flat,
            space,
            points: kept,
            build_mode: BuildMode::Separated { delta },
            seed,
            stats: Some(BuildStats {
                candidates_drawn,
                rejections,
                stopped_by,
            }),
        })
    }

    /// Wraps caller-supplied points after validating them.
    pub fn from_points(
        space: Space,
        points: Vec<Point>,
        seed: u64,
    ) -> Result<Workload, WorkloadError> {
        if points.is_empty() {
            return Err(WorkloadError::EmptyDataset);
        }
        for p in &points {
            space.validate_point(p)?;
        }
        Ok(Workload {
            flat: flatten(&space, &points),
            space,
            points,
            build_mode: BuildMode::Explicit,
            seed,
            stats: None,
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn build_mode(&self) -> BuildMode {
        self.build_mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stats(&self) -> Option<BuildStats> {
        self.stats
    }

    /// Exact pairwise separation check (`> delta` for all distinct pairs).
    pub fn is_separated(&self, delta: f64) -> bool {
        let near = self.space.proximity(delta);
        (0..self.points.len()).into_par_iter().all(|i| {
            self.points[i + 1..]
                .iter()
                .all(|q| !near.within(&self.points[i], q))
        })
    }

    /// Distance from `q` to its nearest neighbour, with the argmin index
    /// (lowest index on ties). Exact linear scan.
    pub fn nn_distance(&self, q: &Point) -> Result<(f64, usize), WorkloadError> {
        self.space.validate_point(q)?;
        Ok(self.nn_distance_unchecked(q))
    }

    pub(crate) fn nn_distance_unchecked(&self, q: &Point) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut best_idx = 0;
        if let (Point::Real(qc), false) = (q, self.flat.is_empty()) {
            let width = self.space.ambient_len();
            for (i, row) in self.flat.chunks_exact(width).enumerate() {
                let d = self.space.distance_coords(qc, row);
                if d < best {
                    best = d;
                    best_idx = i;
                }
            }
        } else {
            for (i, p) in self.points.iter().enumerate() {
                let d = self.space.distance_unchecked(q, p);
                if d < best {
                    best = d;
                    best_idx = i;
                }
            }
        }
        (best, best_idx)
    }

    /// Number of data points strictly inside the open ball of radius `r`
    /// about `q`.
    pub fn range_count(&self, q: &Point, r: f64) -> Result<usize, WorkloadError> {
        self.space.validate_point(q)?;
        Ok(self.neighbor_counts_unchecked(q, r).0)
    }

    /// `(open, closed)` counts: points with `d < r` and `d <= r`.
    pub fn neighbor_counts(&self, q: &Point, r: f64) -> Result<(usize, usize), WorkloadError> {
        self.space.validate_point(q)?;
        Ok(self.neighbor_counts_unchecked(q, r))
    }

    pub(crate) fn neighbor_counts_unchecked(&self, q: &Point, r: f64) -> (usize, usize) {
        let mut open = 0;
        let mut closed = 0;
        for p in &self.points {
            let d = self.space.distance_unchecked(q, p);
            if d < r {
                open += 1;
            }
            if d <= r {
                closed += 1;
            }
        }
        (open, closed)
    }

    /// Fills `out` with the distance from `q` to every data point, in
    /// dataset order. Lets per-query evaluations reuse one allocation.
    pub(crate) fn distances_unchecked_into(&self, q: &Point, out: &mut Vec<f64>) {
        out.clear();
        if let (Point::Real(qc), false) = (q, self.flat.is_empty()) {
            let width = self.space.ambient_len();
            out.extend(
                self.flat
                    .chunks_exact(width)
                    .map(|row| self.space.distance_coords(qc, row)),
            );
        } else {
            out.extend(
                self.points
                    .iter()
                    .map(|p| self.space.distance_unchecked(q, p)),
            );
        }
    }

    /// Draws the i-th query point of this workload's query stream.
    pub fn sample_query(&self, seed: u64, index: u64) -> Point {
        let mut rng = stream(seed, StreamKind::Query, index);
        self.space.sample(&mut rng)
    }

    /// Nearest-neighbour distances of `num_queries` fresh query points,
    /// in query order. Parallelized per query, deterministic given seed.
    pub fn query_nn_distances(&self, num_queries: usize, seed: u64) -> Vec<f64> {
        (0..num_queries as u64)
            .into_par_iter()
            .map(|i| self.nn_distance_unchecked(&self.sample_query(seed, i)).0)
            .collect()
    }

    /// Empirical median of the distance-to-dataset function over
    /// `num_queries` independent queries (at least 100).
    pub fn estimate_median_nn(
        &self,
        num_queries: usize,
        seed: u64,
    ) -> Result<MedianEstimate, WorkloadError> {
        if num_queries < 100 {
            return Err(WorkloadError::TooFewQueries {
                min: 100,
                got: num_queries,
            });
        }
        let mut d = self.query_nn_distances(num_queries, seed);
        d.sort_by(|a, b| a.partial_cmp(b).expect("NaN distance"));
        let m = d.len();
        let median = d[(m - 1) / 2];
        let iqr = d[(3 * m) / 4 - 1] - d[m / 4];
        Ok(MedianEstimate {
            median,
            stderr: iqr / (m as f64).sqrt(),
            num_queries,
        })
    }

    /// Half-measure radius of the data point at `x_index`.
    pub fn half_measure_radius(
        &self,
        x_index: usize,
        tol: f64,
        mc_samples: usize,
        seed: u64,
    ) -> Result<f64, WorkloadError> {
        let p = self
            .points
            .get(x_index)
            .ok_or(WorkloadError::IndexOutOfRange {
                index: x_index,
                len: self.points.len(),
            })?;
        Ok(self.space.half_measure_radius(p, tol, mc_samples, seed)?)
    }

    /// Full workload profile: median NN distance, every half-measure
    /// radius, their spread, and the weak-homogeneity verdict.
    pub fn profile(
        &self,
        homogeneity_eps: f64,
        num_queries: usize,
        tol: f64,
        mc_samples: usize,
        seed: u64,
    ) -> Result<WorkloadProfile, WorkloadError> {
        let median = self.estimate_median_nn(num_queries, seed)?;
        let r_x: Result<Vec<f64>, SpaceError> = self
            .points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                self.space
                    .half_measure_radius(p, tol, mc_samples, seed.wrapping_add(i as u64))
            })
            .collect();
        let r_x = r_x?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &r_x {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let width = hi - lo;
        Ok(WorkloadProfile {
            median_nn: median.median,
            median_nn_stderr: median.stderr,
            r_x,
            r_interval_width: width,
            homogeneity_eps,
            is_weakly_homogeneous: width < homogeneity_eps,
        })
    }

    /// Serializes to the versioned dataset format: a JSON document whose
    /// `data` field holds base64 of row-major little-endian f64
    /// coordinates (or packed bits for Hamming datasets).
    pub fn to_json(&self) -> String {
        let mut body: Vec<u8> = Vec::new();
        match self.space.kind {
            SpaceKind::HammingCube => {
                for p in &self.points {
                    body.extend_from_slice(&p.bits().expect("hamming point").to_bytes());
                }
            }
            _ => {
                for p in &self.points {
                    for &x in p.coords().expect("real point") {
                        body.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        let header = DatasetFile {
            format_version: DATASET_FORMAT_VERSION,
            kind: self.space.kind,
            dim: self.space.dim,
            count: self.points.len(),
            seed: self.seed,
            build_mode: self.build_mode,
            data: BASE64.encode(body),
        };
        serde_json::to_string_pretty(&header).expect("dataset serialization")
    }

    /// Parses a dataset file produced by [`Workload::to_json`].
    pub fn from_json(text: &str) -> Result<Workload, WorkloadError> {
        let file: DatasetFile =
            serde_json::from_str(text).map_err(|e| WorkloadError::Format(e.to_string()))?;
        if file.format_version != DATASET_FORMAT_VERSION {
            return Err(WorkloadError::Format(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        let space = Space::new(file.kind, file.dim).map_err(WorkloadError::Space)?;
        let body = BASE64
            .decode(file.data.as_bytes())
            .map_err(|e| WorkloadError::Format(format!("bad base64 body: {e}")))?;
        let mut points = Vec::with_capacity(file.count);
        match file.kind {
            SpaceKind::HammingCube => {
                let stride = (file.dim as usize).div_ceil(8);
                if body.len() != stride * file.count {
                    return Err(WorkloadError::Format(format!(
                        "expected {} body bytes, got {}",
                        stride * file.count,
                        body.len()
                    )));
                }
                for chunk in body.chunks_exact(stride) {
                    let bits = BitString::from_bytes(chunk, file.dim as usize)
                        .ok_or_else(|| WorkloadError::Format("bad bit padding".into()))?;
                    points.push(Point::Bits(bits));
                }
            }
            _ => {
                let stride = space.ambient_len() * 8;
                if body.len() != stride * file.count {
                    return Err(WorkloadError::Format(format!(
                        "expected {} body bytes, got {}",
                        stride * file.count,
                        body.len()
                    )));
                }
                for chunk in body.chunks_exact(stride) {
                    let coords: Vec<f64> = chunk
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                        .collect();
                    points.push(Point::Real(coords));
                }
            }
        }
        for p in &points {
            space.validate_point(p)?;
        }
        if points.is_empty() {
            return Err(WorkloadError::EmptyDataset);
        }
        Ok(Workload {
            flat: flatten(&space, &points),
            space,
            points,
            build_mode: file.build_mode,
            seed: file.seed,
            stats: None,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format_version: u32,
    kind: SpaceKind,
    dim: u32,
    count: usize,
    seed: u64,
    build_mode: BuildMode,
    data: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceKind;

    fn sphere(dim: u32) -> Space {
        Space::new(SpaceKind::SphereGeodesic, dim).unwrap()
    }

    #[test]
    fn iid_build_is_deterministic_and_valid() {
        let space = sphere(12);
        let a = Workload::build_iid(space, 50, 7).unwrap();
        let b = Workload::build_iid(space, 50, 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.len(), 50);
        let c = Workload::build_iid(space, 50, 8).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn singleton_dataset() {
        let w = Workload::build_iid(sphere(4), 1, 0).unwrap();
        assert_eq!(w.len(), 1);
        assert!(Workload::build_iid(sphere(4), 0, 0).is_err());
    }

    #[test]
    fn separated_hamming_pairs_differ_by_two_bits() {
        // delta = 0.4 on {0,1}^3 forces pairwise bit distance >= 2.
        let space = Space::new(SpaceKind::HammingCube, 3).unwrap();
        let w = Workload::build_separated(space, 0.4, 3, 200, 100).unwrap();
        assert!(w.len() >= 2);
        assert!(w.is_separated(0.4));
        for (i, p) in w.points().iter().enumerate() {
            for q in &w.points()[i + 1..] {
                let bits = p.bits().unwrap().hamming(q.bits().unwrap());
                assert!(bits >= 2);
            }
        }
        assert_eq!(
            w.stats().unwrap().stopped_by,
            StopReason::ConsecutiveRejections
        );
    }

    #[test]
    fn separated_near_diameter_keeps_single_point() {
        // Continuous kind: almost nothing sits within delta of the
        // diameter, so only the first candidate survives.
        let w = Workload::build_separated(sphere(6), std::f64::consts::PI - 1e-3, 1, 50, 100)
            .unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(
            w.stats().unwrap().stopped_by,
            StopReason::ConsecutiveRejections
        );
    }

    #[test]
    fn separated_rejects_bad_delta() {
        let space = sphere(4);
        assert!(Workload::build_separated(space, 0.0, 0, 10, 10).is_err());
        assert!(Workload::build_separated(space, 4.0, 0, 10, 10).is_err());
    }

    #[test]
    fn packed_torus_median_stays_above_half_delta() {
        // The packing keeps queries from landing too close to the set:
        // the median NN distance cannot sink below delta/2 (minus noise).
        let space = Space::new(SpaceKind::Torus, 16).unwrap();
        let delta = 0.25;
        let w = Workload::build_separated(space, delta, 8, 10_000, 8000).unwrap();
        assert!(w.is_separated(delta));
        let est = w.estimate_median_nn(600, 9).unwrap();
        assert!(
            est.median >= delta / 2.0 - 0.02,
            "median {} below delta/2 - 0.02",
            est.median
        );
    }

    #[test]
    fn grid_accelerated_packing_matches_plain_separation_check() {
        // delta small enough for the bucket grid to engage; the exact
        // pairwise check (which never uses the grid) must agree.
        let space = Space::new(SpaceKind::Torus, 16).unwrap();
        let a = Workload::build_separated(space, 0.1, 4, 1000, 3000).unwrap();
        assert_eq!(a.len(), 3000);
        assert!(a.is_separated(0.1));
        let b = Workload::build_separated(space, 0.1, 4, 1000, 3000).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn nn_distance_matches_scan_oracle() {
        let space = Space::new(SpaceKind::HammingCube, 3).unwrap();
        let w = Workload::build_iid(space, 4, 5).unwrap();
        for i in 0..50 {
            let q = w.sample_query(99, i);
            let (d, idx) = w.nn_distance(&q).unwrap();
            // Independent oracle: full scan recomputed here.
            let mut best = (f64::INFINITY, usize::MAX);
            for (j, p) in w.points().iter().enumerate() {
                let dj = space.distance(&q, p).unwrap();
                if dj < best.0 {
                    best = (dj, j);
                }
            }
            assert_eq!((d, idx), best);
            // NN distance lower-bounds every pointwise distance.
            for p in w.points() {
                assert!(d <= space.distance(&q, p).unwrap());
            }
        }
    }

    #[test]
    fn nn_of_dataset_member_is_itself() {
        let space = sphere(3);
        let w = Workload::build_iid(space, 10, 2).unwrap();
        let q = w.points()[4].clone();
        assert_eq!(w.nn_distance(&q).unwrap(), (0.0, 4));

        // Two antipodal points: querying one of them hits it exactly.
        let e = Point::Real(vec![1.0, 0.0, 0.0, 0.0]);
        let neg = Point::Real(vec![-1.0, 0.0, 0.0, 0.0]);
        let w = Workload::from_points(space, vec![e.clone(), neg], 0).unwrap();
        assert_eq!(w.nn_distance(&e).unwrap(), (0.0, 0));
    }

    #[test]
    fn range_count_edges_and_monotonicity() {
        let space = Space::new(SpaceKind::HammingCube, 4).unwrap();
        let w = Workload::build_iid(space, 8, 3).unwrap();
        let q = w.sample_query(1, 0);
        assert_eq!(w.range_count(&q, 0.0).unwrap(), 0); // open ball
        assert_eq!(w.range_count(&q, 1.5).unwrap(), w.len());
        let mut prev = 0;
        for i in 0..=8 {
            let c = w.range_count(&q, i as f64 / 8.0).unwrap();
            assert!(c >= prev);
            prev = c;
        }
        // Against an enumeration oracle.
        for r in [0.2, 0.4, 0.6] {
            let oracle = w
                .points()
                .iter()
                .filter(|p| space.distance(&q, p).unwrap() < r)
                .count();
            assert_eq!(w.range_count(&q, r).unwrap(), oracle);
        }
    }

    #[test]
    fn median_nn_of_full_small_cube_is_zero() {
        // All 8 vertices of {0,1}^3: every query lands on a data point.
        let space = Space::new(SpaceKind::HammingCube, 3).unwrap();
        let points: Vec<Point> = (0u64..8)
            .map(|v| Point::Bits(BitString::from_word(v, 3)))
            .collect();
        let w = Workload::from_points(space, points, 0).unwrap();
        let est = w.estimate_median_nn(500, 1).unwrap();
        assert_eq!(est.median, 0.0);
    }

    #[test]
    fn median_nn_singleton_sphere_near_half_pi() {
        // Distance to a single point has median pi/2 by hemisphere
        // symmetry.
        let w = Workload::build_iid(sphere(2), 1, 4).unwrap();
        let est = w.estimate_median_nn(20_000, 5).unwrap();
        assert!((est.median - std::f64::consts::FRAC_PI_2).abs() < 0.05);
    }

    #[test]
    fn median_nn_stable_across_seeds() {
        let w = Workload::build_iid(sphere(16), 200, 6).unwrap();
        let a = w.estimate_median_nn(4000, 100).unwrap();
        let b = w.estimate_median_nn(4000, 200).unwrap();
        let tol = 4.0 * (a.stderr + b.stderr);
        assert!((a.median - b.median).abs() <= tol);
    }

    #[test]
    fn median_nn_rejects_few_queries() {
        let w = Workload::build_iid(sphere(4), 5, 0).unwrap();
        assert!(matches!(
            w.estimate_median_nn(99, 0),
            Err(WorkloadError::TooFewQueries { .. })
        ));
    }

    #[test]
    fn half_measure_radius_per_kind() {
        // Hamming n=3: exact supremum radius 2/3.
        let cube = Space::new(SpaceKind::HammingCube, 3).unwrap();
        let w = Workload::build_iid(cube, 4, 9).unwrap();
        assert_eq!(w.half_measure_radius(0, 1e-3, 0, 0).unwrap(), 2.0 / 3.0);

        // Sphere: pi/2 regardless of the centre.
        let w = Workload::build_iid(sphere(9), 3, 10).unwrap();
        for i in 0..3 {
            let r = w.half_measure_radius(i, 1e-4, 0, 0).unwrap();
            assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-4);
        }

        assert!(matches!(
            w.half_measure_radius(99, 1e-3, 0, 0),
            Err(WorkloadError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn transitive_kinds_are_weakly_homogeneous() {
        let tol = 1e-4;
        let w = Workload::build_iid(sphere(20), 40, 11).unwrap();
        let profile = w.profile(0.3, 200, tol, 0, 12).unwrap();
        assert!(profile.r_interval_width <= 2.0 * tol);
        assert!(profile.is_weakly_homogeneous);

        // Hamming radii are exact, so the spread collapses to zero.
        let cube = Space::new(SpaceKind::HammingCube, 9).unwrap();
        let wc = Workload::build_iid(cube, 30, 11).unwrap();
        let pc = wc.profile(0.2, 200, tol, 0, 12).unwrap();
        assert_eq!(pc.r_interval_width, 0.0);

        // Single point: width exactly zero.
        let w1 = Workload::build_iid(sphere(6), 1, 13).unwrap();
        let p1 = w1.profile(1e-9, 200, tol, 0, 14).unwrap();
        assert_eq!(p1.r_interval_width, 0.0);
        assert!(p1.is_weakly_homogeneous);
    }

    #[test]
    fn ball_shell_homogeneity_depends_on_thickness() {
        // Points of B^n inside a thin shell have nearly equal R_x; a
        // dataset spread across radii does not (for small eps).
        let space = Space::new(SpaceKind::EuclideanBall, 3).unwrap();
        let mut shell = Vec::new();
        let mut spread = Vec::new();
        let mut rng = crate::rng::stream(15, StreamKind::Query, 0);
        for i in 0..6 {
            if let Point::Real(v) = Space::new(SpaceKind::SphereGeodesic, 2).unwrap().sample(&mut rng) {
                let rho_shell = 0.6 + 0.01 * (i as f64 / 6.0);
                shell.push(Point::Real(v.iter().map(|x| x * rho_shell).collect()));
                let rho_spread = 0.1 + 0.8 * (i as f64 / 6.0);
                spread.push(Point::Real(v.iter().map(|x| x * rho_spread).collect()));
            }
        }
        let tol = 5e-3;
        let mc = 40_000;
        let w_shell = Workload::from_points(space, shell, 0).unwrap();
        let p_shell = w_shell.profile(0.08, 100, tol, mc, 16).unwrap();
        assert!(p_shell.is_weakly_homogeneous, "width {}", p_shell.r_interval_width);
        let w_spread = Workload::from_points(space, spread, 0).unwrap();
        let p_spread = w_spread.profile(0.08, 100, tol, mc, 17).unwrap();
        assert!(!p_spread.is_weakly_homogeneous, "width {}", p_spread.r_interval_width);
    }

    #[test]
    fn dataset_roundtrip_preserves_bytes() {
        for kind in [
            SpaceKind::SphereGeodesic,
            SpaceKind::HammingCube,
            SpaceKind::Torus,
        ] {
            let space = Space::new(kind, 9).unwrap();
            let w = Workload::build_iid(space, 17, 21).unwrap();
            let text = w.to_json();
            let back = Workload::from_json(&text).unwrap();
            assert_eq!(back.to_json(), text);
            assert_eq!(back.len(), 17);
            assert_eq!(back.seed(), 21);
        }
    }

    #[test]
    fn dataset_body_is_little_endian_f64() {
        // Golden encoding: one hand-built torus point.
        let space = Space::new(SpaceKind::Torus, 2).unwrap();
        let w = Workload::from_points(space, vec![Point::Real(vec![0.5, 0.25])], 3).unwrap();
        let text = w.to_json();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut want = Vec::new();
        want.extend_from_slice(&0.5f64.to_le_bytes());
        want.extend_from_slice(&0.25f64.to_le_bytes());
        assert_eq!(parsed["data"].as_str().unwrap(), BASE64.encode(want));
        assert_eq!(parsed["format_version"].as_u64(), Some(1));
        assert_eq!(parsed["kind"].as_str(), Some("torus"));
        assert_eq!(parsed["build_mode"]["mode"].as_str(), Some("explicit"));
    }

    #[test]
    fn dataset_rejects_corruption() {
        let space = Space::new(SpaceKind::HammingCube, 5).unwrap();
        let w = Workload::build_iid(space, 3, 0).unwrap();
        let text = w.to_json();
        let bad = text.replace("\"count\": 3", "\"count\": 4");
        assert!(Workload::from_json(&bad).is_err());
        assert!(Workload::from_json("not json").is_err());
    }
}
