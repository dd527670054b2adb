//! Equal-width partitioning of the key universe, plus the binomial tail bound
//! that justifies the chosen number of parts.
//!
//! The partition is sized from the calibration size `n` and the smoothness
//! exponents alone. Nested refinement (each level splits every part of the
//! previous level) bottoms out after `depth` levels, at which point a part is
//! narrow enough that, for any (n^gamma, n^alpha)-smooth source, the
//! probability mass of a single part is O(log n / n). Keys are then addressed
//! by their part index, which compresses the effective key width from `b` bits
//! down to `index_bits`.

use thiserror::Error;

use crate::Key;

/// Errors from universe/partition construction and bound evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("universe bits must lie in 1..=63, got {0}")]
    BadBits(u32),
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("gamma must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("beta must be finite and at least 1, got {0}")]
    BadBeta(f64),
    #[error("c_max must be finite and greater than 1, got {0}")]
    BadCMax(f64),
    #[error("calibration size must be at least 16, got {0}")]
    CalibrationTooSmall(usize),
    #[error("key {key} lies outside the {bits}-bit universe")]
    KeyOutOfRange { key: Key, bits: u32 },
    #[error("deviation bound needs 0 < q < 1 and 0 < a <= 1, got q={q}, a={a}")]
    BadBoundArgs { q: f64, a: f64 },
}

/// A universe of `2^bits` keys, `1 <= bits <= 63`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniverseParams {
    bits: u32,
}

impl UniverseParams {
    pub fn new(bits: u32) -> Result<Self, PartitionError> {
        if bits == 0 || bits > 63 {
            return Err(PartitionError::BadBits(bits));
        }
        Ok(Self { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// `2^bits`, exact in a `u64` since `bits <= 63`.
    pub fn size(self) -> u64 {
        1u64 << self.bits
    }

    pub fn max_key(self) -> Key {
        self.size() - 1
    }

    pub fn contains(self, key: Key) -> bool {
        key < self.size()
    }
}

/// Smoothness exponents and sizing constants.
///
/// A source is (f1, f2)-smooth when every window of width `span/f1(n)` inside
/// an interval of width `span` carries at most `beta * f2(n) / n` of the
/// conditional probability mass. Here `f1(n) = n^gamma` and `f2(n) = n^alpha`.
/// `beta` is carried for reporting only; the partition does not depend on it.
/// `c_max` controls both the calibration oversampling factor and the upper
/// capacity band of the dynamic structure.
#[derive(Debug, Clone, Copy)]
pub struct SmoothParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub c_max: f64,
}

impl SmoothParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, PartitionError> {
        let sp = Self { alpha, gamma, beta: 1.0, c_max: 2.0 };
        sp.validate()?;
        Ok(sp)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, PartitionError> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_c_max(mut self, c_max: f64) -> Result<Self, PartitionError> {
        self.c_max = c_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PartitionError::BadAlpha(self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(PartitionError::BadGamma(self.gamma));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(PartitionError::BadBeta(self.beta));
        }
        if !(self.c_max > 1.0 && self.c_max.is_finite()) {
            return Err(PartitionError::BadCMax(self.c_max));
        }
        Ok(())
    }
}

/// An equal-width partition of `[0, 2^bits)` into `num_parts` parts of width
/// `part_width` (the last part may be shorter).
///
/// Invariants, maintained by construction:
/// * `num_parts = ceil(2^bits / part_width)`, so `part_index` is surjective
///   onto `0..num_parts` and the last key maps to `num_parts - 1`
/// * `index_bits = ceil(log2(num_parts))`, never more than `bits`
/// * `clamped` records that the refinement product exceeded the universe and
///   was cut back to one-key parts
#[derive(Debug, Clone)]
pub struct PartitionPlan {
    n: usize,
    depth: u32,
    num_parts: u64,
    part_width: u64,
    index_bits: u32,
    clamped: bool,
    universe: UniverseParams,
}

/// Sizes the partition for calibration size `n`.
///
/// Refinement depth: with `nu = c_max * n`, the number of levels is
/// `max(1, ceil(ln(ln ln n / ln nu) / ln alpha))`; level `i` splits each part
/// of level `i - 1` into `ceil(nu^(alpha^i * gamma))` subparts. The raw part
/// count is the product over levels `0..=depth`, saturated at the universe
/// size, and then recanonicalized through the equal-width rule above.
pub fn plan_partition(
    n: usize,
    sp: &SmoothParams,
    universe: UniverseParams,
) -> Result<PartitionPlan, PartitionError> {
    sp.validate()?;
    if n < 16 {
        return Err(PartitionError::CalibrationTooSmall(n));
    }
    let nf = n as f64;
    let nu = sp.c_max * nf;
    let depth = {
        // ln ln n > 0 and ln nu > ln n > 1 for n >= 16, so the ratio sits in
        // (0, 1) and the ceiling of its alpha-log is a small positive integer.
        let ratio = nf.ln().ln() / nu.ln();
        let raw = (ratio.ln() / sp.alpha.ln()).ceil();
        if raw < 1.0 {
            1
        } else {
            raw as u32
        }
    };

    let universe_size = universe.size() as u128;
    let mut product: u128 = 1;
    for level in 0..=depth {
        let exponent = sp.alpha.powi(level as i32) * sp.gamma;
        let factor = nu.powf(exponent).ceil();
        debug_assert!(factor >= 1.0 && factor.is_finite());
        product = product.saturating_mul(factor as u128);
        if product >= universe_size {
            product = universe_size;
            break;
        }
    }
    // Per-level ceilings can overshoot the real-valued level product in small
    // corners (each ceiling inflates a factor that may be barely above 1), so
    // cap the count at floor(nu^(gamma / (1 - alpha))). The cap never drops
    // below the un-ceiled product — the geometric exponent sum is strictly
    // less than gamma / (1 - alpha) — so parts never get wider than the
    // refinement yields, and the polynomial part-count bound holds verbatim.
    let bound = nu.powf(sp.gamma / (1.0 - sp.alpha)).floor();
    if bound.is_finite() && bound >= 1.0 && (bound as u128) < product {
        product = bound as u128;
    }
    let clamped = product >= universe_size;

    let raw_parts = product as u64;
    let part_width = div_ceil_u64(universe.size(), raw_parts);
    let num_parts = div_ceil_u64(universe.size(), part_width);
    let index_bits = ceil_log2(num_parts);
    Ok(PartitionPlan { n, depth, num_parts, part_width, index_bits, clamped, universe })
}

impl PartitionPlan {
    /// Partition with an explicit part count (recanonicalized), mainly for
    /// tests and for widening retries.
    pub fn with_num_parts(
        n: usize,
        target_parts: u64,
        universe: UniverseParams,
    ) -> Result<Self, PartitionError> {
        if n < 16 {
            return Err(PartitionError::CalibrationTooSmall(n));
        }
        let target = target_parts.clamp(1, universe.size());
        let part_width = div_ceil_u64(universe.size(), target);
        let num_parts = div_ceil_u64(universe.size(), part_width);
        Ok(Self {
            n,
            depth: 0,
            num_parts,
            part_width,
            index_bits: ceil_log2(num_parts),
            clamped: target_parts >= universe.size(),
            universe,
        })
    }

    /// Part index of `key`: `floor(key / part_width)`.
    pub fn part_index(&self, key: Key) -> Result<u64, PartitionError> {
        if !self.universe.contains(key) {
            return Err(PartitionError::KeyOutOfRange { key, bits: self.universe.bits() });
        }
        Ok(key / self.part_width)
    }

    /// A strictly finer plan with one more index bit, for retrying after a
    /// part-index collision among representatives. `None` once parts are
    /// already single keys.
    pub fn widen(&self) -> Option<Self> {
        if self.part_width == 1 {
            return None;
        }
        let target = (1u64 << (self.index_bits + 1)).min(self.universe.size());
        let mut plan =
            Self::with_num_parts(self.n, target, self.universe).expect("n already validated");
        plan.depth = self.depth;
        Some(plan)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn num_parts(&self) -> u64 {
        self.num_parts
    }

    pub fn part_width(&self) -> u64 {
        self.part_width
    }

    pub fn index_bits(&self) -> u32 {
        self.index_bits
    }

    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn universe(&self) -> UniverseParams {
        self.universe
    }
}

/// Upper bound on the probability that a Binomial(n, q) variable reaches
/// `a * n` successes, for `a > q`:
/// `[(q/a)^a * ((1-q)/(1-a))^(1-a)]^n`, evaluated in log space.
///
/// For `a <= q` the expression is still well defined and is >= 1 (the bound
/// is vacuous there); at `a == q` it is exactly 1. `a == 1` is allowed and
/// gives `q^n`.
pub fn binomial_deviation_bound(q: f64, a: f64, n: u64) -> Result<f64, PartitionError> {
    if !(q > 0.0 && q < 1.0 && a > 0.0 && a <= 1.0) {
        return Err(PartitionError::BadBoundArgs { q, a });
    }
    if a == q {
        return Ok(1.0);
    }
    // a * ln(q/a) + (1-a) * ln((1-q)/(1-a)); the second term vanishes at a=1.
    let mut log_per_trial = a * (q / a).ln();
    if a < 1.0 {
        log_per_trial += (1.0 - a) * ((1.0 - q) / (1.0 - a)).ln();
    }
    Ok((n as f64 * log_per_trial).exp())
}

fn div_ceil_u64(num: u64, den: u64) -> u64 {
    debug_assert!(den > 0);
    num / den + u64::from(num % den != 0)
}

fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x > 0);
    64 - (x - 1).leading_zeros()
}
