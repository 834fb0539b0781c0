//! Concentration functions of probability metric spaces.
//!
//! The concentration function `alpha(eps)` of a space is 1 minus the
//! smallest measure an `eps`-fattening of a half-measure Borel set can
//! have; `alpha(0) = 1/2`. It is not computable exactly in general, so
//! this module brackets it:
//!
//! * exact values on small Hamming cubes by enumerating every subset
//!   ([`alpha_brute_force_hamming`]) and, for odd cube dimensions, by the
//!   extremal-ball closed form ([`alpha_extremal_hamming`]);
//! * statistical lower bounds from a concrete half-measure witness ball
//!   ([`alpha_witness_lower`]);
//! * exponential upper bounds `min(1/2, C1 exp(-C2 eps^2 n))` for normal
//!   Levy families ([`alpha_levy_upper`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, StreamKind};
use crate::space::{
    hamming_ball_cdf, steps_strictly_below, Point, Space, SpaceError, SpaceKind,
};

/// Largest cube dimension for which subset enumeration (2^(2^n) subsets)
/// is tractable.
pub const MAX_BRUTE_FORCE_DIM: u32 = 4;

/// Minimum Monte-Carlo sample count accepted by the estimators here.
pub const MIN_MC_SAMPLES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum ConcentrationError {
    #[error("cube dimension {0} too large for subset enumeration (max {MAX_BRUTE_FORCE_DIM})")]
    DimensionTooLarge(u32),
    #[error("extremal-ball closed form requires an odd cube dimension, got {0}")]
    RequiresOddDimension(u32),
    #[error("dimension {0} exceeds exact binomial range (max 127)")]
    BinomialOverflow(u32),
    #[error("need at least {MIN_MC_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("epsilon grid must be sorted, positive, and at most the diameter: {0}")]
    InvalidEpsilonGrid(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Constants of a normal Levy family bound `C1 exp(-C2 eps^2 n)`.
///
/// `n_exponent` is the dimension figure used in the exponent; for
/// spheres the customary bound uses `n - 1` rather than the sphere
/// dimension itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyConstants {
    pub c1: f64,
    pub c2: f64,
    pub n_exponent: u32,
}

impl LevyConstants {
    pub fn new(c1: f64, c2: f64, n_exponent: u32) -> Self {
        assert!(c1 > 0.0 && c1.is_finite(), "C1 must be finite and positive");
        assert!(c2 > 0.0 && c2.is_finite(), "C2 must be finite and positive");
        LevyConstants { c1, c2, n_exponent }
    }

    /// Default constants per kind.
    ///
    /// Spheres use the classical `sqrt(pi/8) exp(-eps^2 (n-1)/2)`; the
    /// chordal metric dominates the geodesic one, so the same bound
    /// holds. The Hamming cube (and the l1 hypercube, via bounded
    /// differences) gets `exp(-2 eps^2 n)`. For the remaining kinds no
    /// sharp literature constant is pinned here; the defaults below are
    /// conservative and overridable per run.
    pub fn defaults_for(kind: SpaceKind, dim: u32) -> Self {
        match kind {
            SpaceKind::SphereGeodesic | SpaceKind::SphereEuclidean => {
                LevyConstants::new((std::f64::consts::PI / 8.0).sqrt(), 0.5, dim.saturating_sub(1))
            }
            SpaceKind::HammingCube | SpaceKind::HypercubeL1 => LevyConstants::new(1.0, 2.0, dim),
            SpaceKind::HypercubeL2 => LevyConstants::new(1.0, 1.0, dim),
            SpaceKind::Torus | SpaceKind::EuclideanBall => LevyConstants::new(1.0, 0.5, dim),
        }
    }

    /// Same constants with C1 and/or C2 replaced.
    pub fn with_overrides(self, c1: Option<f64>, c2: Option<f64>) -> Self {
        LevyConstants::new(c1.unwrap_or(self.c1), c2.unwrap_or(self.c2), self.n_exponent)
    }
}

/// Normal-Levy upper bound `min(1/2, C1 exp(-C2 eps^2 n))`.
pub fn alpha_levy_upper(constants: &LevyConstants, eps: f64) -> f64 {
    let exponent = -constants.c2 * eps * eps * constants.n_exponent as f64;
    (constants.c1 * exponent.exp()).min(0.5)
}

// ---------------------------------------------------------------------------
// Exact machinery on small Hamming cubes.
//
// Vertices of {0,1}^n are the integers 0..2^n; a subset is a bitmask with
// bit v set when vertex v belongs to it. Everything below is exact
// integer arithmetic in units of 2^-n.
// ---------------------------------------------------------------------------

/// One fattening step: the subset together with all vertices one bit flip
/// away. `n <= 5` so subsets fit in a u32 mask (bit v set = vertex v in).
fn expand_one_step(n: u32, subset: u32) -> u32 {
    let verts = 1u32 << n;
    let mut out = subset;
    for j in 0..n {
        let step = 1u32 << j; // flipping bit j moves the vertex index by +-step
        let mut low = 0u32; // positions of vertices with bit j clear
        for v in 0..verts {
            if v & step == 0 {
                low |= 1 << v;
            }
        }
        out |= (subset & low) << step;
        out |= (subset & !low) >> step;
    }
    out
}

/// The set of vertices within `steps` bit flips of the subset
/// (`steps < 0` leaves it unchanged).
pub fn fatten_subset(n: u32, subset: u32, steps: i64) -> u32 {
    assert!(n <= 5, "subset masks only cover cubes up to n = 5");
    let mut m = subset;
    for _ in 0..steps.max(0) {
        m = expand_one_step(n, m);
    }
    m
}

/// Exact concentration function of the Hamming cube {0,1}^n, n <= 4, by
/// enumerating every Borel (= arbitrary) subset of measure >= 1/2 and
/// minimizing the measure of its open eps-fattening. The result is a
/// dyadic rational with denominator 2^n, represented exactly in f64.
pub fn alpha_brute_force_hamming(n: u32, eps: f64) -> Result<f64, ConcentrationError> {
    if n == 0 || n > MAX_BRUTE_FORCE_DIM {
        return Err(ConcentrationError::DimensionTooLarge(n));
    }
    let verts = 1u32 << n;
    let half = 1u32 << (n - 1);
    let steps = steps_strictly_below(eps, n);
    if steps >= n as i64 {
        return Ok(0.0);
    }
    // Fattening of a subset is the union of fattened singletons; build
    // per-vertex ball masks once.
    let ball: Vec<u32> = (0..verts).map(|v| fatten_subset(n, 1 << v, steps)).collect();
    let mut min_covered = verts;
    for subset in 0..(1u64 << verts) as u64 {
        let subset = subset as u32;
        if subset.count_ones() < half {
            continue;
        }
        let mut fat = 0u32;
        let mut rest = subset;
        while rest != 0 {
            let v = rest.trailing_zeros();
            fat |= ball[v as usize];
            rest &= rest - 1;
        }
        min_covered = min_covered.min(fat.count_ones());
        if min_covered == half {
            break; // cannot go below half measure
        }
    }
    Ok((verts - min_covered) as f64 / verts as f64)
}

/// Exact concentration function of the Hamming cube for odd n via the
/// isoperimetric extremal set: the Hamming ball of bit radius (n-1)/2 has
/// measure exactly 1/2 and minimizes the fattening measure, so
/// `alpha(eps) = 2^-n sum_{j > (n-1)/2 + s} C(n, j)` with `s` the number
/// of whole bit steps strictly below `eps * n`.
pub fn alpha_extremal_hamming(n: u32, eps: f64) -> Result<f64, ConcentrationError> {
    if n == 0 || n % 2 == 0 {
        return Err(ConcentrationError::RequiresOddDimension(n));
    }
    if n > 127 {
        return Err(ConcentrationError::BinomialOverflow(n));
    }
    let steps = steps_strictly_below(eps, n).max(0);
    let cutoff = (n as i64 - 1) / 2 + steps; // fattened ball radius
    if cutoff >= n as i64 {
        return Ok(0.0);
    }
    let mut tail: u128 = 0;
    for j in (cutoff + 1) as u32..=n {
        tail += crate::space::binomial_u128(n, j);
    }
    Ok(tail as f64 / 2f64.powi(n as i32))
}

/// Exact witness lower bound on the Hamming cube: the smallest bit ball
/// of measure >= 1/2 is fattened by whole bit steps and the complement
/// measure evaluated from the binomial CDF. Deterministic counterpart of
/// [`alpha_witness_lower`] for tests and curves.
pub fn alpha_witness_exact_hamming(n: u32, eps: f64) -> f64 {
    let witness_bits = smallest_half_ball_bits(n);
    let steps = steps_strictly_below(eps, n).max(0);
    1.0 - hamming_ball_cdf(n, witness_bits + steps)
}

fn smallest_half_ball_bits(n: u32) -> i64 {
    (0..=n as i64)
        .find(|&k| hamming_ball_cdf(n, k) >= 0.5)
        .expect("full ball has measure 1")
}

/// A Monte-Carlo witness estimate: a statistical lower bound on alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Radius of the half-measure witness ball (bit steps / n for the
    /// Hamming cube).
    pub witness_radius: f64,
}

/// Lower-bounds `alpha(eps)` by evaluating `1 - mu(O_eps(A))` for one
/// concrete witness `A`: the ball around a sampled pole just large enough
/// to hold measure 1/2. The fattening of a ball is a ball, so membership
/// reduces to a distance comparison against `R + eps` (whole bit steps on
/// the Hamming cube). Returns the estimate with its binomial standard
/// error.
pub fn alpha_witness_lower(
    space: &Space,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<WitnessEstimate, ConcentrationError> {
    if samples < MIN_MC_SAMPLES {
        return Err(ConcentrationError::TooFewSamples(samples));
    }
    let mut pole_rng = stream(seed, StreamKind::Pole, 0);
    let pole = space.sample(&mut pole_rng);
    let mut mc = stream(seed, StreamKind::WitnessMc, 0);

    let (witness_radius, outside): (f64, Box<dyn Fn(f64) -> bool>) = match space.kind {
        SpaceKind::HammingCube => {
            let n = space.dim;
            let witness_bits = smallest_half_ball_bits(n);
            let steps = steps_strictly_below(eps, n).max(0);
            let cut = (witness_bits + steps) as f64 / n as f64;
            (
                witness_bits as f64 / n as f64,
                // Outside the fattened bit ball: strictly more than
                // witness_bits + steps flips away. Distances are exact
                // multiples of 1/n, so a midpoint threshold is safe.
                Box::new(move |d: f64| d > cut + 0.5 / n as f64),
            )
        }
        _ => {
            // Pad the bisected radius by its tolerance so the witness
            // ball truly reaches measure >= 1/2; the padding only makes
            // the lower bound more conservative.
            let tol = 1e-6 * space.diameter();
            let mc_samples = if space.has_closed_form_measure() { 0 } else { 20_000 };
            let r = space.half_measure_radius(&pole, tol, mc_samples, seed)? + tol;
            let cut = r + eps;
            (r, Box::new(move |d: f64| d >= cut))
        }
    };

    let mut outside_count = 0usize;
    for _ in 0..samples {
        let x = space.sample(&mut mc);
        if outside(space.distance_unchecked(&pole, &x)) {
            outside_count += 1;
        }
    }
    let p = outside_count as f64 / samples as f64;
    Ok(WitnessEstimate {
        value: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        witness_radius,
    })
}

/// Result of a Lipschitz concentration check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    /// Fraction of samples with `|f(x) - M| >= eps`.
    pub fraction_outside: f64,
    pub stderr: f64,
    /// Empirical (lower) median of f on the sample.
    pub median: f64,
    pub samples: usize,
}

/// Samples the space, takes the empirical median M of a caller-supplied
/// Lipschitz-1 function, and reports the fraction of samples landing
/// outside `(M - eps, M + eps)`. Concentration predicts this fraction is
/// at most `2 alpha(eps)`.
pub fn lipschitz_concentration_check<F>(
    space: &Space,
    f: F,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<LipschitzCheck, ConcentrationError>
where
    F: Fn(&Point) -> f64,
{
    if samples < MIN_MC_SAMPLES {
        return Err(ConcentrationError::TooFewSamples(samples));
    }
    let mut rng = stream(seed, StreamKind::LipschitzMc, 0);
    let values: Vec<f64> = (0..samples).map(|_| f(&space.sample(&mut rng))).collect();
    let median = lower_median(&values);
    let outside = values.iter().filter(|&&v| (v - median).abs() >= eps).count();
    let p = outside as f64 / samples as f64;
    Ok(LipschitzCheck {
        fraction_outside: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        median,
        samples,
    })
}

/// Empirical lower median: the element at rank floor((m-1)/2) of the
/// sorted sample.
pub fn lower_median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    sorted[(sorted.len() - 1) / 2]
}

/// How the entries of a [`ConcentrationCurve`] were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMethod {
    /// Exact subset enumeration (small Hamming cubes): lower == upper.
    BruteForce,
    /// Closed-form extremal Hamming balls; exact for odd cube dimension,
    /// a deterministic lower bound paired with the Levy upper bound for
    /// even ones.
    ExtremalBall,
    /// Monte-Carlo witness lower bound plus the Levy upper bound.
    WitnessMc,
    /// Upper bound only (lower pinned at 0).
    NormalLevyBound,
}

/// A bracket `[alpha_lower, alpha_upper]` over a grid of fattening radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCurve {
    pub epsilons: Vec<f64>,
    pub alpha_lower: Vec<f64>,
    pub alpha_upper: Vec<f64>,
    pub method: CurveMethod,
    pub mc_samples: usize,
    /// Standard errors of the lower entries; zero for exact methods.
    pub stderr: Vec<f64>,
}

/// Brackets the concentration function of `space` over `epsilons`.
///
/// Small Hamming cubes are solved exactly; odd cube dimensions use the
/// extremal closed form; everything else pairs a witness lower bound
/// (Monte-Carlo with `mc_samples` draws, exact bit arithmetic on even
/// Hamming cubes) with the Levy upper bound from `constants`.
pub fn concentration_curve(
    space: &Space,
    epsilons: &[f64],
    constants: &LevyConstants,
    mc_samples: usize,
    seed: u64,
) -> Result<ConcentrationCurve, ConcentrationError> {
    if epsilons.is_empty()
        || epsilons.windows(2).any(|w| w[0] >= w[1])
        || epsilons[0] <= 0.0
        || *epsilons.last().unwrap() > space.diameter()
    {
        return Err(ConcentrationError::InvalidEpsilonGrid(format!(
            "{epsilons:?} for diameter {}",
            space.diameter()
        )));
    }
    let m = epsilons.len();
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut stderr = vec![0.0; m];
    let method;
    match space.kind {
        SpaceKind::HammingCube if space.dim <= MAX_BRUTE_FORCE_DIM => {
            method = CurveMethod::BruteForce;
            for &e in epsilons {
                let a = alpha_brute_force_hamming(space.dim, e)?;
                lower.push(a);
                upper.push(a);
            }
        }
        SpaceKind::HammingCube if space.dim % 2 == 1 && space.dim <= 127 => {
            method = CurveMethod::ExtremalBall;
            for &e in epsilons {
                let a = alpha_extremal_hamming(space.dim, e)?;
                lower.push(a);
                upper.push(a);
            }
        }
        SpaceKind::HammingCube => {
            method = CurveMethod::ExtremalBall;
            for &e in epsilons {
                lower.push(alpha_witness_exact_hamming(space.dim, e));
                upper.push(alpha_levy_upper(constants, e));
            }
        }
        _ => {
            method = CurveMethod::WitnessMc;
            for (i, &e) in epsilons.iter().enumerate() {
                let w = alpha_witness_lower(space, e, mc_samples, seed.wrapping_add(i as u64))?;
                lower.push(w.value);
                stderr[i] = w.stderr;
                upper.push(alpha_levy_upper(constants, e));
            }
        }
    }
    Ok(ConcentrationCurve {
        epsilons: epsilons.to_vec(),
        alpha_lower: lower,
        alpha_upper: upper,
        method,
        mc_samples: if method == CurveMethod::WitnessMc { mc_samples } else { 0 },
        stderr,
    })
}
