//! Probability metric spaces: query domains with a metric, an invariant
//! probability measure, a sampler, and ball-measure evaluation.
//!
//! Metrics are normalized so that every kind has a fixed, dimension-free
//! diameter (see [`Space::diameter`]). Ball measures use closed forms
//! where they exist (Hamming cube: binomial CDF; spheres: cap area via
//! the regularized incomplete beta) and Monte-Carlo estimation elsewhere.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::rng::{stream, StreamKind};

/// Default Monte-Carlo sample count for ball measures. Near a measure of
/// 1/2 this gives an absolute standard error of about 0.0016.
pub const DEFAULT_MEASURE_SAMPLES: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("point has {got} coordinates, space expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point kind does not match space kind")]
    PointKindMismatch,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

/// The supported query-domain kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    /// Unit sphere S^n with geodesic (great-circle) distance and the
    /// rotation-invariant probability measure. Points live in n+1 coords.
    SphereGeodesic,
    /// Unit sphere S^n with chordal (Euclidean) distance.
    SphereEuclidean,
    /// Binary strings {0,1}^n with normalized Hamming distance and the
    /// normalized counting measure.
    HammingCube,
    /// Unit cube [0,1]^n with Euclidean distance divided by sqrt(n).
    HypercubeL2,
    /// Unit cube [0,1]^n with l1 distance divided by n.
    HypercubeL1,
    /// Flat torus (R/Z)^n, per-coordinate circle geodesic in angle
    /// fraction, combined as l2 and scaled by 2/sqrt(n).
    Torus,
    /// Solid unit ball B^n with Euclidean distance and uniform volume.
    EuclideanBall,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 7] = [
        SpaceKind::SphereGeodesic,
        SpaceKind::SphereEuclidean,
        SpaceKind::HammingCube,
        SpaceKind::HypercubeL2,
        SpaceKind::HypercubeL1,
        SpaceKind::Torus,
        SpaceKind::EuclideanBall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::SphereGeodesic => "sphere-geodesic",
            SpaceKind::SphereEuclidean => "sphere-euclidean",
            SpaceKind::HammingCube => "hamming-cube",
            SpaceKind::HypercubeL2 => "hypercube-l2",
            SpaceKind::HypercubeL1 => "hypercube-l1",
            SpaceKind::Torus => "torus",
            SpaceKind::EuclideanBall => "euclidean-ball",
        }
    }

    pub fn parse(name: &str) -> Option<SpaceKind> {
        SpaceKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// A probability metric space: a kind plus its dimension.
///
/// For sphere kinds `dim` is the sphere dimension n (points carry n+1
/// coordinates); for every other kind points carry `dim` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub kind: SpaceKind,
    pub dim: u32,
}

/// A point of some [`Space`]: a real coordinate vector or a bit string.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Real(Vec<f64>),
    Bits(BitString),
}

impl Point {
    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Real(v) => Some(v),
            Point::Bits(_) => None,
        }
    }

    pub fn bits(&self) -> Option<&BitString> {
        match self {
            Point::Real(_) => None,
            Point::Bits(b) => Some(b),
        }
    }
}

/// A fixed-length binary string packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = BitString::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.set(i, true);
            }
        }
        s
    }

    /// Low `len` bits of `value`, bit 0 first.
    pub fn from_word(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        BitString {
            words: vec![value & mask],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let (w, b) = (i / 64, i % 64);
        if value {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    /// Number of positions where the two strings differ.
    pub fn hamming(&self, other: &BitString) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Packs into `ceil(len/8)` bytes, bit i at byte i/8, bit position i%8.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut s = BitString::zeros(len);
        for i in 0..len {
            if (bytes[i / 8] >> (i % 8)) & 1 == 1 {
                s.set(i, true);
            }
        }
        // Padding bits past `len` must be zero.
        for i in len..bytes.len() * 8 {
            if (bytes[i / 8] >> (i % 8)) & 1 == 1 {
                return None;
            }
        }
        Some(s)
    }
}

/// A measure value together with its Monte-Carlo standard error.
/// Closed-form results carry `stderr == 0` and `mc_samples == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub stderr: f64,
    pub mc_samples: usize,
}

impl MeasureEstimate {
    fn exact(value: f64) -> Self {
        MeasureEstimate {
            value,
            stderr: 0.0,
            mc_samples: 0,
        }
    }
}

impl Space {
    pub fn new(kind: SpaceKind, dim: u32) -> Result<Space, SpaceError> {
        if dim == 0 {
            return Err(SpaceError::InvalidDimension);
        }
        Ok(Space { kind, dim })
    }

    /// Number of coordinates (or bits) a point of this space carries.
    pub fn ambient_len(&self) -> usize {
        match self.kind {
            SpaceKind::SphereGeodesic | SpaceKind::SphereEuclidean => self.dim as usize + 1,
            _ => self.dim as usize,
        }
    }

    /// Supremum of pairwise distances, exact per kind.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            SpaceKind::SphereGeodesic => std::f64::consts::PI,
            SpaceKind::SphereEuclidean | SpaceKind::EuclideanBall => 2.0,
            SpaceKind::HammingCube
            | SpaceKind::HypercubeL2
            | SpaceKind::HypercubeL1
            | SpaceKind::Torus => 1.0,
        }
    }

    /// Whether `ball_measure` has a closed form for this kind.
    pub fn has_closed_form_measure(&self) -> bool {
        matches!(
            self.kind,
            SpaceKind::SphereGeodesic | SpaceKind::SphereEuclidean | SpaceKind::HammingCube
        )
    }

    /// Draws one point from the invariant (uniform) measure of the kind.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let n = self.dim as usize;
        match self.kind {
            SpaceKind::SphereGeodesic | SpaceKind::SphereEuclidean => {
                Point::Real(sample_unit_sphere(n + 1, rng))
            }
            SpaceKind::HammingCube => {
                let mut s = BitString::zeros(n);
                for w in 0..s.words.len() {
                    s.words[w] = rng.random::<u64>();
                }
                let spare = s.words.len() * 64 - n;
                if spare > 0 {
                    let last = s.words.len() - 1;
                    s.words[last] &= u64::MAX >> spare;
                }
                Point::Bits(s)
            }
            SpaceKind::HypercubeL2 | SpaceKind::HypercubeL1 | SpaceKind::Torus => {
                Point::Real((0..n).map(|_| rng.random::<f64>()).collect())
            }
            SpaceKind::EuclideanBall => {
                let dir = sample_unit_sphere(n, rng);
                let radius = rng.random::<f64>().powf(1.0 / n as f64);
                Point::Real(dir.into_iter().map(|x| x * radius).collect())
            }
        }
    }

    /// Checks that a point is structurally valid for this space.
    pub fn validate_point(&self, p: &Point) -> Result<(), SpaceError> {
        match (self.kind, p) {
            (SpaceKind::HammingCube, Point::Bits(b)) => {
                if b.len() != self.dim as usize {
                    return Err(SpaceError::DimensionMismatch {
                        expected: self.dim as usize,
                        got: b.len(),
                    });
                }
                Ok(())
            }
            (SpaceKind::HammingCube, Point::Real(_)) => Err(SpaceError::PointKindMismatch),
            (_, Point::Bits(_)) => Err(SpaceError::PointKindMismatch),
            (kind, Point::Real(v)) => {
                if v.len() != self.ambient_len() {
                    return Err(SpaceError::DimensionMismatch {
                        expected: self.ambient_len(),
                        got: v.len(),
                    });
                }
                match kind {
                    SpaceKind::SphereGeodesic | SpaceKind::SphereEuclidean => {
                        let norm = norm2(v);
                        if (norm - 1.0).abs() > 1e-12 {
                            return Err(SpaceError::InvalidPoint(format!(
                                "sphere point norm {norm} not within 1e-12 of 1"
                            )));
                        }
                    }
                    SpaceKind::HypercubeL2 | SpaceKind::HypercubeL1 => {
                        if v.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                            return Err(SpaceError::InvalidPoint(
                                "hypercube coordinate outside [0,1]".into(),
                            ));
                        }
                    }
                    SpaceKind::Torus => {
                        if v.iter().any(|&x| !(0.0..1.0).contains(&x)) {
                            return Err(SpaceError::InvalidPoint(
                                "torus coordinate outside [0,1)".into(),
                            ));
                        }
                    }
                    SpaceKind::EuclideanBall => {
                        let norm = norm2(v);
                        if norm > 1.0 + 1e-12 {
                            return Err(SpaceError::InvalidPoint(format!(
                                "ball point norm {norm} exceeds 1"
                            )));
                        }
                    }
                    SpaceKind::HammingCube => unreachable!(),
                }
                Ok(())
            }
        }
    }

    /// Metric of the space. Errors on dimension or kind mismatch.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, SpaceError> {
        self.validate_point(p)?;
        self.validate_point(q)?;
        Ok(self.distance_unchecked(p, q))
    }

    /// Metric without validation; callers guarantee both points belong to
    /// this space (dataset points are validated once at build time).
    pub fn distance_unchecked(&self, p: &Point, q: &Point) -> f64 {
        match (self.kind, p, q) {
            (SpaceKind::HammingCube, Point::Bits(a), Point::Bits(b)) => {
                a.hamming(b) as f64 / self.dim as f64
            }
            (_, Point::Real(a), Point::Real(b)) => self.distance_coords(a, b),
            _ => panic!("point kind does not match space kind"),
        }
    }

    /// Raw-slice metric for real kinds (hot-scan form).
    #[inline]
    pub(crate) fn distance_coords(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            SpaceKind::SphereGeodesic => {
                // Chord-based form: exact zero at p == q and well
                // conditioned at small angles, unlike acos of the dot.
                2.0 * (euclidean(a, b) / 2.0).clamp(0.0, 1.0).asin()
            }
            SpaceKind::SphereEuclidean | SpaceKind::EuclideanBall => euclidean(a, b),
            SpaceKind::HypercubeL2 => euclidean(a, b) / (self.dim as f64).sqrt(),
            SpaceKind::HypercubeL1 => {
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                s / self.dim as f64
            }
            SpaceKind::Torus => {
                let mut s = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let c = circle_dist(*x, *y);
                    s += c * c;
                }
                2.0 * s.sqrt() / (self.dim as f64).sqrt()
            }
            SpaceKind::HammingCube => panic!("bit points carry no coordinates"),
        }
    }

    /// Measure of the open ball of radius `r` about `center`.
    ///
    /// Closed form for Hamming cubes and spheres; Monte-Carlo with
    /// `mc_samples` draws (seeded by `seed`) for the other kinds.
    /// `r >= diameter` returns 1 by convention.
    pub fn ball_measure(
        &self,
        center: &Point,
        r: f64,
        mc_samples: usize,
        seed: u64,
    ) -> Result<MeasureEstimate, SpaceError> {
        self.validate_point(center)?;
        if r <= 0.0 {
            return Ok(MeasureEstimate::exact(0.0));
        }
        if r >= self.diameter() {
            return Ok(MeasureEstimate::exact(1.0));
        }
        match self.kind {
            SpaceKind::HammingCube => {
                let steps = steps_strictly_below(r, self.dim);
                Ok(MeasureEstimate::exact(hamming_ball_cdf(self.dim, steps)))
            }
            SpaceKind::SphereGeodesic => {
                Ok(MeasureEstimate::exact(sphere_cap_measure(self.dim, r)))
            }
            SpaceKind::SphereEuclidean => {
                let theta = 2.0 * (r / 2.0).clamp(0.0, 1.0).asin();
                Ok(MeasureEstimate::exact(sphere_cap_measure(self.dim, theta)))
            }
            _ => {
                assert!(mc_samples > 0, "Monte-Carlo ball measure needs samples");
                let mut rng = stream(seed, StreamKind::MeasureMc, 0);
                let mut hits = 0usize;
                for _ in 0..mc_samples {
                    let x = self.sample(&mut rng);
                    if self.distance_unchecked(center, &x) < r {
                        hits += 1;
                    }
                }
                let p = hits as f64 / mc_samples as f64;
                Ok(MeasureEstimate {
                    value: p,
                    stderr: (p * (1.0 - p) / mc_samples as f64).sqrt(),
                    mc_samples,
                })
            }
        }
    }

    /// Builds the repeated-use `d <= r` predicate for this space.
    pub fn proximity(&self, r: f64) -> ProximityCheck {
        let n = self.dim as f64;
        if r < 0.0 {
            return ProximityCheck {
                kind: self.kind,
                acc_bound: -1.0,
                max_bits: -1,
            };
        }
        let (acc_bound, max_bits) = match self.kind {
            SpaceKind::HammingCube => (0.0, steps_at_most(r, self.dim)),
            SpaceKind::SphereGeodesic => {
                // d <= r  <=>  chord <= 2 sin(r/2) for r in [0, pi].
                let c = 2.0 * (r.min(std::f64::consts::PI) / 2.0).sin();
                (c * c, 0)
            }
            SpaceKind::SphereEuclidean | SpaceKind::EuclideanBall => (r * r, 0),
            SpaceKind::HypercubeL2 => {
                let s = r * n.sqrt();
                (s * s, 0)
            }
            SpaceKind::Torus => {
                let s = r * n.sqrt() / 2.0;
                (s * s, 0)
            }
            SpaceKind::HypercubeL1 => (r * n, 0),
        };
        ProximityCheck {
            kind: self.kind,
            acc_bound,
            max_bits,
        }
    }

    /// Upper bound on the single-coordinate displacement between two
    /// points at metric distance <= r, for kinds whose points carry real
    /// coordinates. Lets spatial buckets prune pair checks.
    pub(crate) fn coord_displacement_bound(&self, r: f64) -> Option<f64> {
        if r < 0.0 {
            return None;
        }
        let n = self.dim as f64;
        match self.kind {
            SpaceKind::HammingCube => None,
            SpaceKind::SphereGeodesic => {
                Some(2.0 * (r.min(std::f64::consts::PI) / 2.0).sin())
            }
            SpaceKind::SphereEuclidean | SpaceKind::EuclideanBall => Some(r),
            SpaceKind::HypercubeL2 => Some(r * n.sqrt()),
            SpaceKind::HypercubeL1 => Some(r * n),
            SpaceKind::Torus => Some(r * n.sqrt() / 2.0),
        }
    }

    /// Coordinate range of points of this space, as `(low, extent,
    /// wraps)`; `wraps` marks periodic coordinates.
    pub(crate) fn coord_range(&self) -> Option<(f64, f64, bool)> {
        match self.kind {
            SpaceKind::HammingCube => None,
            SpaceKind::Torus => Some((0.0, 1.0, true)),
            SpaceKind::HypercubeL2 | SpaceKind::HypercubeL1 => Some((0.0, 1.0, false)),
            SpaceKind::SphereGeodesic | SpaceKind::SphereEuclidean | SpaceKind::EuclideanBall => {
                Some((-1.0, 2.0, false))
            }
        }
    }

    /// Maximal radius of an open ball about `center` of measure <= 1/2.
    ///
    /// Exact for Hamming cubes (the measure is a step function; the
    /// supremum radius before the jump past 1/2 is returned). Elsewhere a
    /// bisection on the ball measure down to bracket width `tol`,
    /// Monte-Carlo backed where there is no closed form.
    pub fn half_measure_radius(
        &self,
        center: &Point,
        tol: f64,
        mc_samples: usize,
        seed: u64,
    ) -> Result<f64, SpaceError> {
        self.validate_point(center)?;
        if self.kind == SpaceKind::HammingCube {
            let n = self.dim;
            // Largest bit radius whose closed ball keeps measure <= 1/2;
            // the open ball of radius (k*+1)/n is exactly that ball.
            let mut k_star: i64 = -1;
            for k in 0..=n as i64 {
                if hamming_ball_cdf(n, k) <= 0.5 {
                    k_star = k;
                } else {
                    break;
                }
            }
            return Ok((k_star + 1) as f64 / n as f64);
        }
        let mut lo = 0.0;
        let mut hi = self.diameter();
        let mut eval = 0u64;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let m = self.ball_measure(center, mid, mc_samples, seed ^ eval)?;
            eval += 1;
            if m.value <= 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Largest integer strictly below `eps * n`, or -1 when there is none
/// (`eps <= 0`). Used to convert a real fattening radius into whole
/// Hamming steps. The comparison `k < eps * n` is carried out exactly in
/// integer arithmetic on the binary representation of `eps`, so radii
/// sitting on a lattice step 1/n never misround.
pub fn steps_strictly_below(eps: f64, n: u32) -> i64 {
    if !(eps > 0.0) {
        return -1;
    }
    let mut best: i64 = -1;
    for k in 0..=n as i64 {
        if cmp_int_vs_scaled(k as u64, eps, n) == std::cmp::Ordering::Less {
            best = k;
        } else {
            break;
        }
    }
    best
}

/// Largest integer `k <= eps * n`, or -1 for negative `eps`. Exact.
pub fn steps_at_most(eps: f64, n: u32) -> i64 {
    if eps < 0.0 {
        return -1;
    }
    if eps == 0.0 {
        return 0;
    }
    let mut best: i64 = -1;
    for k in 0..=n as i64 {
        if cmp_int_vs_scaled(k as u64, eps, n) != std::cmp::Ordering::Greater {
            best = k;
        } else {
            break;
        }
    }
    best
}

/// Exact three-way comparison of `k` against `eps * n`, `eps > 0` finite.
fn cmp_int_vs_scaled(k: u64, eps: f64, n: u32) -> std::cmp::Ordering {
    debug_assert!(eps > 0.0 && eps.is_finite());
    use std::cmp::Ordering;
    if k == 0 {
        return Ordering::Less; // 0 < eps * n
    }
    let bits = eps.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    // eps = mant * 2^exp2 exactly.
    let (mant, exp2) = if raw_exp == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let rhs = mant as u128 * n as u128; // <= 2^53 * 2^32
    if exp2 >= 0 {
        match rhs.checked_shl(exp2 as u32) {
            Some(r) => (k as u128).cmp(&r),
            None => Ordering::Less, // rhs astronomically large
        }
    } else {
        // compare k << (-exp2) with mant * n
        match (k as u128).checked_shl((-exp2) as u32) {
            Some(lhs) => lhs.cmp(&rhs),
            None => Ordering::Greater, // lhs >= 2^128 > rhs
        }
    }
}

/// Precomputed `d(p, q) <= r` predicate for hot loops (packing builds,
/// separation checks). The per-kind radius transform happens once and
/// the coordinate accumulation exits as soon as the threshold is
/// crossed. Hamming radii are resolved to an exact bit budget; for real
/// kinds the squared-sum comparison may differ from `distance() <= r`
/// by an ulp exactly on the boundary sphere, which has measure zero.
#[derive(Debug, Clone, Copy)]
pub struct ProximityCheck {
    kind: SpaceKind,
    /// Accumulation bound: squared coordinate sum for L2-like kinds,
    /// plain sum for l1. Unused for Hamming.
    acc_bound: f64,
    /// Bit budget for Hamming (-1: nothing is within).
    max_bits: i64,
}

impl ProximityCheck {
    /// Whether `d(p, q) <= r` for the radius this check was built with.
    pub fn within(&self, p: &Point, q: &Point) -> bool {
        match (self.kind, p, q) {
            (SpaceKind::HammingCube, Point::Bits(a), Point::Bits(b)) => {
                self.max_bits >= 0 && a.hamming(b) as i64 <= self.max_bits
            }
            (_, Point::Real(a), Point::Real(b)) => self.within_coords(a, b),
            _ => panic!("point kind does not match space kind"),
        }
    }

    /// Raw-slice form of [`ProximityCheck::within`] for real kinds, so
    /// packed coordinate rows can be scanned without per-point
    /// indirection.
    #[inline]
    pub fn within_coords(&self, a: &[f64], b: &[f64]) -> bool {
        match self.kind {
            SpaceKind::HammingCube => panic!("bit points carry no coordinates"),
            SpaceKind::HypercubeL1 => {
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b) {
                    acc += (x - y).abs();
                    if acc > self.acc_bound {
                        return false;
                    }
                }
                true
            }
            SpaceKind::Torus => {
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let c = circle_dist(*x, *y);
                    acc += c * c;
                    if acc > self.acc_bound {
                        return false;
                    }
                }
                true
            }
            _ => {
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    acc += d * d;
                    if acc > self.acc_bound {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// P(Binomial(n, 1/2) <= k): measure of the Hamming ball of bit radius k.
/// Exact in f64 for every n where the binomial coefficients fit 53 bits.
pub fn hamming_ball_cdf(n: u32, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if k >= n as i64 {
        return 1.0;
    }
    let mut term = 0.5f64.powi(n as i32); // C(n,0) / 2^n
    let mut sum = term;
    for j in 0..k as u64 {
        term = term * (n as u64 - j) as f64 / (j + 1) as f64;
        sum += term;
    }
    sum
}

/// Exact binomial coefficient C(n, k); n <= 127 stays within u128.
pub fn binomial_u128(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// Normalized measure of the geodesic cap of angular radius `theta` on
/// the sphere S^n (rotation-invariant probability measure).
pub fn sphere_cap_measure(n: u32, theta: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    if theta >= std::f64::consts::PI {
        return 1.0;
    }
    let half = std::f64::consts::FRAC_PI_2;
    let a = n as f64 / 2.0;
    if theta <= half {
        0.5 * beta_reg(a, 0.5, theta.sin().powi(2))
    } else {
        let s = (std::f64::consts::PI - theta).sin();
        1.0 - 0.5 * beta_reg(a, 0.5, s * s)
    }
}

fn sample_unit_sphere<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        let norm = norm2(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn circle_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    d.min(1.0 - d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
