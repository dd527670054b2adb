//! Input distributions over the key universe.
//!
//! A [`DistSpec`] is a small textual recipe (`uniform`, `piecewise:...`,
//! `spiky:...`, `zipf:...`). Specs can be materialized into an explicit
//! [`DiscreteDist`] on a grid of at most `2^20` support points, or turned
//! directly into a seeded [`KeySampler`]; uniform, piecewise and spiky
//! sampling is closed-form and works for any universe up to 63 bits, while
//! zipf sampling goes through a materialized grid.
//!
//! [`estimate_beta`] brute-forces the smoothness constant of a small
//! materialized distribution: the smallest `beta` such that every window of
//! width `(c3 - c1) / n^gamma` ending just below a support point `c2` carries
//! conditional mass at most `beta * f2(n) / n` inside `[c1, c3]`.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::partition::UniverseParams;
use crate::Key;

/// Largest materialization grid: explicit pmfs stay comfortably in memory.
pub const MAX_GRID: u64 = 1 << 20;

/// Largest support for brute-force smoothness estimation (O(N^3) triples).
pub const MAX_BETA_SUPPORT: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("unrecognized distribution spec '{0}'")]
    UnknownSpec(String),
    #[error("malformed distribution parameter: {0}")]
    BadParam(String),
    #[error("piecewise starts must begin at 0 and increase strictly")]
    BadBreakpoints,
    #[error("piecewise start {0} does not fit the universe")]
    BreakpointOutOfRange(u64),
    #[error("piece starting at {0} contains no grid point")]
    EmptyPiece(u64),
    #[error("piece weights must be positive and finite")]
    BadWeights,
    #[error("need 1 <= 2*spikes <= grid and spike mass in [0, 1]")]
    BadSpikes,
    #[error("zipf exponent must be finite and non-negative, got {0}")]
    BadZipfExponent(f64),
    #[error("grid must satisfy 1 <= grid <= min(2^20, universe size), got {0}")]
    BadGrid(u64),
    #[error("cannot sample a deletion from an empty store")]
    EmptyStore,
    #[error("smoothness estimation needs support size <= 512, got {0}")]
    SupportTooLarge(usize),
    #[error("n_list must be non-empty")]
    EmptyNList,
    #[error("gamma must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("pmf must be non-negative and sum to 1 within 1e-9")]
    BadPmf,
    #[error("support must be strictly increasing and match the pmf length")]
    BadSupport,
}

/// Recipe for an input distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    /// Uniform over the whole universe.
    Uniform,
    /// Contiguous pieces `[start_i, start_{i+1})` (the last one runs to the
    /// end of the universe), each carrying the given weight uniformly.
    /// Starts are absolute keys; weights are normalized at use.
    Piecewise(Vec<(u64, f64)>),
    /// `spikes` single-point spikes, evenly spread, sharing total mass
    /// `mass`; the remaining `1 - mass` is uniform background.
    Spiky { spikes: u64, mass: f64 },
    /// Grid-truncated zipf: support point of rank `i` (in key order) has
    /// probability proportional to `(i + 1)^-exponent`.
    Zipf { exponent: f64 },
}

impl DistSpec {
    /// Parses the textual grammar:
    /// `uniform` | `piecewise:p0,w0;p1,w1;...` | `spiky:k,m` | `zipf:s`.
    pub fn parse(s: &str) -> Result<Self, DistError> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("uniform", None) => Ok(Self::Uniform),
            ("piecewise", Some(body)) => {
                let mut pieces = Vec::new();
                for item in body.split(';') {
                    let (p, w) = item
                        .split_once(',')
                        .ok_or_else(|| DistError::BadParam(item.to_string()))?;
                    let start: u64 =
                        p.trim().parse().map_err(|_| DistError::BadParam(p.to_string()))?;
                    let weight: f64 =
                        w.trim().parse().map_err(|_| DistError::BadParam(w.to_string()))?;
                    pieces.push((start, weight));
                }
                let spec = Self::Piecewise(pieces);
                spec.validate_shape()?;
                Ok(spec)
            }
            ("spiky", Some(body)) => {
                let (k, m) =
                    body.split_once(',').ok_or_else(|| DistError::BadParam(body.to_string()))?;
                let spikes: u64 =
                    k.trim().parse().map_err(|_| DistError::BadParam(k.to_string()))?;
                let mass: f64 = m.trim().parse().map_err(|_| DistError::BadParam(m.to_string()))?;
                let spec = Self::Spiky { spikes, mass };
                spec.validate_shape()?;
                Ok(spec)
            }
            ("zipf", Some(body)) => {
                let exponent: f64 =
                    body.trim().parse().map_err(|_| DistError::BadParam(body.to_string()))?;
                let spec = Self::Zipf { exponent };
                spec.validate_shape()?;
                Ok(spec)
            }
            _ => Err(DistError::UnknownSpec(s.to_string())),
        }
    }

    /// Universe-independent parameter checks.
    fn validate_shape(&self) -> Result<(), DistError> {
        match self {
            Self::Uniform => Ok(()),
            Self::Piecewise(pieces) => {
                if pieces.is_empty() || pieces[0].0 != 0 {
                    return Err(DistError::BadBreakpoints);
                }
                if !pieces.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(DistError::BadBreakpoints);
                }
                if !pieces.iter().all(|&(_, w)| w > 0.0 && w.is_finite()) {
                    return Err(DistError::BadWeights);
                }
                Ok(())
            }
            Self::Spiky { spikes, mass } => {
                if *spikes == 0 || !(0.0..=1.0).contains(mass) {
                    return Err(DistError::BadSpikes);
                }
                Ok(())
            }
            Self::Zipf { exponent } => {
                if !(exponent.is_finite() && *exponent >= 0.0) {
                    return Err(DistError::BadZipfExponent(*exponent));
                }
                Ok(())
            }
        }
    }

    /// A spiky spec whose spike mass is backed off so the brute-force
    /// smoothness estimate stays at or below `beta_cap` on a `grid`-point
    /// materialization: total spike mass `k*B / (grid + k*B)` makes each
    /// spike weigh `B` background cells.
    pub fn calibrated_spiky(spikes: u64, beta_cap: f64, grid: u64) -> Self {
        let kb = spikes as f64 * beta_cap;
        Self::Spiky { spikes, mass: kb / (grid as f64 + kb) }
    }

    /// Explicit pmf over `grid` evenly spaced support points.
    pub fn materialize(
        &self,
        universe: UniverseParams,
        grid: u64,
    ) -> Result<DiscreteDist, DistError> {
        self.validate_shape()?;
        if grid == 0 || grid > MAX_GRID || grid > universe.size() {
            return Err(DistError::BadGrid(grid));
        }
        let size = universe.size() as u128;
        let support: Vec<u64> =
            (0..grid).map(|i| (i as u128 * size / grid as u128) as u64).collect();
        let pmf = match self {
            Self::Uniform => vec![1.0 / grid as f64; grid as usize],
            Self::Piecewise(pieces) => {
                let starts: Vec<u64> = pieces.iter().map(|&(p, _)| p).collect();
                if let Some(&bad) = starts.iter().find(|&&p| !universe.contains(p)) {
                    return Err(DistError::BreakpointOutOfRange(bad));
                }
                let wsum: f64 = pieces.iter().map(|&(_, w)| w).sum();
                // Count grid points per piece, then spread each weight evenly.
                let piece_of = |key: u64| starts.partition_point(|&p| p <= key) - 1;
                let mut counts = vec![0u64; pieces.len()];
                for &x in &support {
                    counts[piece_of(x)] += 1;
                }
                if let Some(i) = counts.iter().position(|&c| c == 0) {
                    return Err(DistError::EmptyPiece(pieces[i].0));
                }
                support
                    .iter()
                    .map(|&x| {
                        let i = piece_of(x);
                        pieces[i].1 / wsum / counts[i] as f64
                    })
                    .collect()
            }
            Self::Spiky { spikes, mass } => {
                if 2 * spikes > grid {
                    return Err(DistError::BadSpikes);
                }
                let background = (1.0 - mass) / grid as f64;
                let mut pmf = vec![background; grid as usize];
                for j in 0..*spikes {
                    let idx = ((2 * j as u128 + 1) * grid as u128 / (2 * *spikes as u128)) as usize;
                    pmf[idx] += mass / *spikes as f64;
                }
                pmf
            }
            Self::Zipf { exponent } => {
                let raw: Vec<f64> = (0..grid).map(|i| ((i + 1) as f64).powf(-exponent)).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / sum).collect()
            }
        };
        DiscreteDist::new(support, pmf)
    }

    /// Seeded sampler for this spec. Uniform, piecewise and spiky use
    /// closed-form draws over the full universe; zipf materializes on a grid
    /// of `min(2^20, universe size)` points.
    pub fn sampler(
        &self,
        universe: UniverseParams,
        rng: ChaCha8Rng,
    ) -> Result<KeySampler, DistError> {
        self.validate_shape()?;
        let size = universe.size();
        let kind = match self {
            Self::Uniform => SamplerKind::UniformFull { size },
            Self::Piecewise(pieces) => {
                let starts: Vec<u64> = pieces.iter().map(|&(p, _)| p).collect();
                if let Some(&bad) = starts.iter().find(|&&p| !universe.contains(p)) {
                    return Err(DistError::BreakpointOutOfRange(bad));
                }
                let wsum: f64 = pieces.iter().map(|&(_, w)| w).sum();
                let mut bounds = starts;
                bounds.push(size);
                let mut acc = 0.0;
                let cdf: Vec<f64> = pieces
                    .iter()
                    .map(|&(_, w)| {
                        acc += w / wsum;
                        acc
                    })
                    .collect();
                SamplerKind::Piecewise { bounds, cdf }
            }
            Self::Spiky { spikes, mass } => {
                if 2 * spikes > size {
                    return Err(DistError::BadSpikes);
                }
                let positions: Vec<u64> = (0..*spikes)
                    .map(|j| ((2 * j as u128 + 1) * size as u128 / (2 * *spikes as u128)) as u64)
                    .collect();
                SamplerKind::Spiky { positions, mass: *mass, size }
            }
            Self::Zipf { .. } => {
                let dist = self.materialize(universe, MAX_GRID.min(size))?;
                let mut acc = 0.0;
                let cdf: Vec<f64> = dist
                    .pmf()
                    .iter()
                    .map(|&p| {
                        acc += p;
                        acc
                    })
                    .collect();
                SamplerKind::Materialized { support: dist.into_support(), cdf }
            }
        };
        Ok(KeySampler { kind, rng })
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::Piecewise(pieces) => {
                write!(f, "piecewise:")?;
                for (i, (p, w)) in pieces.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{p},{w}")?;
                }
                Ok(())
            }
            Self::Spiky { spikes, mass } => write!(f, "spiky:{spikes},{mass}"),
            Self::Zipf { exponent } => write!(f, "zipf:{exponent}"),
        }
    }
}

/// Explicit distribution: sorted support keys with matching probabilities.
#[derive(Debug, Clone)]
pub struct DiscreteDist {
    support: Vec<Key>,
    pmf: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(support: Vec<Key>, pmf: Vec<f64>) -> Result<Self, DistError> {
        if support.len() != pmf.len()
            || support.is_empty()
            || !support.windows(2).all(|w| w[0] < w[1])
        {
            return Err(DistError::BadSupport);
        }
        if !pmf.iter().all(|&p| p >= 0.0 && p.is_finite()) {
            return Err(DistError::BadPmf);
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistError::BadPmf);
        }
        Ok(Self { support, pmf })
    }

    pub fn support(&self) -> &[Key] {
        &self.support
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    fn into_support(self) -> Vec<Key> {
        self.support
    }
}

/// Streams keys; the engine's calibration and the workload generator both
/// consume through this.
pub trait KeySource {
    fn draw_key(&mut self) -> Key;
}

/// Seeded sampler for a [`DistSpec`].
#[derive(Debug, Clone)]
pub struct KeySampler {
    kind: SamplerKind,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    UniformFull { size: u64 },
    Piecewise { bounds: Vec<u64>, cdf: Vec<f64> },
    Spiky { positions: Vec<u64>, mass: f64, size: u64 },
    Materialized { support: Vec<u64>, cdf: Vec<f64> },
}

impl KeySampler {
    pub fn draw(&mut self) -> Key {
        let rng = &mut self.rng;
        match &self.kind {
            SamplerKind::UniformFull { size } => rng.gen_range(0..*size),
            SamplerKind::Piecewise { bounds, cdf } => {
                let u: f64 = rng.gen();
                let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                rng.gen_range(bounds[i]..bounds[i + 1])
            }
            SamplerKind::Spiky { positions, mass, size } => {
                if *mass > 0.0 && rng.gen_bool(*mass) {
                    positions[rng.gen_range(0..positions.len())]
                } else {
                    rng.gen_range(0..*size)
                }
            }
            SamplerKind::Materialized { support, cdf } => {
                let u: f64 = rng.gen();
                let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                support[i]
            }
        }
    }
}

impl KeySource for KeySampler {
    fn draw_key(&mut self) -> Key {
        self.draw()
    }
}

/// Replays a fixed key sequence; for tests and crafted workloads.
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    keys: Vec<Key>,
    pos: usize,
}

impl ScriptedSource {
    pub fn new(keys: Vec<Key>) -> Self {
        Self { keys, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.keys.len() - self.pos
    }
}

impl KeySource for ScriptedSource {
    fn draw_key(&mut self) -> Key {
        let k = *self.keys.get(self.pos).expect("scripted key source exhausted");
        self.pos += 1;
        k
    }
}

/// Uniform choice among the currently stored keys.
pub fn sample_uniform_deletion(stored: &[Key], rng: &mut impl Rng) -> Result<Key, DistError> {
    if stored.is_empty() {
        return Err(DistError::EmptyStore);
    }
    Ok(stored[rng.gen_range(0..stored.len())])
}

/// Window normalizer `f2` in the smoothness inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum F2 {
    /// `f2(n) = n^alpha`.
    Power(f64),
    /// `f2(n) = n`; every distribution is smooth in this limit.
    Linear,
}

impl F2 {
    fn eval(self, n: u64) -> f64 {
        match self {
            F2::Power(alpha) => (n as f64).powf(alpha),
            F2::Linear => n as f64,
        }
    }
}

/// Brute-force smoothness constant of `dist`.
///
/// Returns the maximum over support triples `c1 < c2 < c3` and over `n` in
/// `n_list` of `P[window] / P[c1..=c3] * n / f2(n)`, where the window is the
/// half-open `[c2 - (c3 - c1)/n^gamma, c2)` intersected with the support (the
/// point `c2` itself is excluded; predecessor structure cares about mass
/// strictly before a query point). Cubic in the support size, hence capped.
pub fn estimate_beta(
    dist: &DiscreteDist,
    gamma: f64,
    f2: F2,
    n_list: &[u64],
) -> Result<f64, DistError> {
    if dist.len() > MAX_BETA_SUPPORT {
        return Err(DistError::SupportTooLarge(dist.len()));
    }
    if n_list.is_empty() {
        return Err(DistError::EmptyNList);
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(DistError::BadGamma(gamma));
    }
    let support = dist.support();
    let pmf = dist.pmf();
    let len = support.len();
    let mut pref = vec![0.0; len + 1];
    for (i, &p) in pmf.iter().enumerate() {
        pref[i + 1] = pref[i] + p;
    }
    let mut best = 0.0f64;
    for i in 0..len {
        for k in (i + 2)..len {
            let span = (support[k] - support[i]) as f64;
            let ptot = pref[k + 1] - pref[i];
            if ptot <= 0.0 {
                continue;
            }
            for &n in n_list {
                let delta = span / (n as f64).powf(gamma);
                let scale = n as f64 / f2.eval(n);
                for j in (i + 1)..k {
                    let low = support[j] as f64 - delta;
                    // First support index in [i, j] whose key reaches `low`;
                    // the window then covers indices lo_idx..j (c2 excluded).
                    let lo_idx = i + support[i..=j].partition_point(|&x| (x as f64) < low);
                    if j <= lo_idx {
                        continue;
                    }
                    let cond = (pref[j] - pref[lo_idx]) / ptot;
                    best = best.max(cond * scale);
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn u(bits: u32) -> UniverseParams {
        UniverseParams::new(bits).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["uniform", "piecewise:0,0.9;128,0.1", "spiky:4,0.05", "zipf:0.3"] {
            let spec = DistSpec::parse(s).unwrap();
            assert_eq!(spec.to_string(), s);
            assert_eq!(DistSpec::parse(&spec.to_string()).unwrap(), spec);
        }
    }

    #[test]
    fn parse_rejects_malformed_specs() {
        assert!(matches!(DistSpec::parse("gaussian"), Err(DistError::UnknownSpec(_))));
        assert!(matches!(DistSpec::parse("piecewise:5,1.0"), Err(DistError::BadBreakpoints)));
        assert!(matches!(
            DistSpec::parse("piecewise:0,1.0;10,0.5;10,0.5"),
            Err(DistError::BadBreakpoints)
        ));
        assert!(matches!(DistSpec::parse("piecewise:0,-1.0"), Err(DistError::BadWeights)));
        assert!(matches!(DistSpec::parse("piecewise:0"), Err(DistError::BadParam(_))));
        assert!(matches!(DistSpec::parse("spiky:0,0.5"), Err(DistError::BadSpikes)));
        assert!(matches!(DistSpec::parse("spiky:4,1.5"), Err(DistError::BadSpikes)));
        assert!(matches!(DistSpec::parse("zipf:-1"), Err(DistError::BadZipfExponent(_))));
        assert!(matches!(DistSpec::parse("zipf:abc"), Err(DistError::BadParam(_))));
    }

    #[test]
    fn materialize_uniform_256() {
        let d = DistSpec::Uniform.materialize(u(8), 256).unwrap();
        assert_eq!(d.len(), 256);
        assert_eq!(d.support()[0], 0);
        assert_eq!(d.support()[255], 255);
        for &p in d.pmf() {
            assert!((p - 1.0 / 256.0).abs() < 1e-15);
        }
    }

    #[test]
    fn materialize_point_mass() {
        let d = DistSpec::Spiky { spikes: 1, mass: 1.0 }.materialize(u(8), 256).unwrap();
        let heavy: Vec<usize> = (0..256).filter(|&i| d.pmf()[i] > 0.0).collect();
        assert_eq!(heavy, vec![128]);
        assert!((d.pmf()[128] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn materialize_piecewise_example() {
        let spec = DistSpec::parse("piecewise:0,0.9;128,0.1").unwrap();
        let d = spec.materialize(u(8), 256).unwrap();
        for i in 0..128 {
            assert!((d.pmf()[i] - 0.9 / 128.0).abs() < 1e-12);
        }
        for i in 128..256 {
            assert!((d.pmf()[i] - 0.1 / 128.0).abs() < 1e-12);
        }
    }

    #[test]
    fn materialize_zipf_is_decreasing_and_normalized() {
        let d = DistSpec::Zipf { exponent: 1.1 }.materialize(u(16), 1024).unwrap();
        assert!(d.pmf().windows(2).all(|w| w[0] >= w[1]));
        let total: f64 = d.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn materialize_validates_grid_and_pieces() {
        assert!(matches!(DistSpec::Uniform.materialize(u(8), 0), Err(DistError::BadGrid(0))));
        assert!(matches!(DistSpec::Uniform.materialize(u(8), 512), Err(DistError::BadGrid(512))));
        assert!(matches!(
            DistSpec::Uniform.materialize(u(63), MAX_GRID + 1),
            Err(DistError::BadGrid(_))
        ));
        // Piece [1,2) falls between the grid points of a 128-point grid on 8
        // bits (stride 2), so it has no support.
        let spec = DistSpec::Piecewise(vec![(0, 0.5), (1, 0.4), (2, 0.1)]);
        assert_eq!(spec.materialize(u(8), 128).unwrap_err(), DistError::EmptyPiece(1));
        let far = DistSpec::Piecewise(vec![(0, 0.5), (300, 0.5)]);
        assert_eq!(far.materialize(u(8), 256).unwrap_err(), DistError::BreakpointOutOfRange(300));
    }

    #[test]
    fn samplers_are_deterministic() {
        for s in ["uniform", "piecewise:0,0.7;1000,0.3", "spiky:4,0.1", "zipf:0.5"] {
            let spec = DistSpec::parse(s).unwrap();
            let mut a = spec.sampler(u(24), rng(11)).unwrap();
            let mut b = spec.sampler(u(24), rng(11)).unwrap();
            let xs: Vec<u64> = (0..1000).map(|_| a.draw()).collect();
            let ys: Vec<u64> = (0..1000).map(|_| b.draw()).collect();
            assert_eq!(xs, ys, "spec {s}");
            assert!(xs.iter().all(|&x| x < u(24).size()));
        }
    }

    #[test]
    fn point_mass_sampler_hits_the_spike() {
        let spec = DistSpec::Spiky { spikes: 1, mass: 1.0 };
        let mut s = spec.sampler(u(16), rng(3)).unwrap();
        for _ in 0..100 {
            assert_eq!(s.draw(), 32768);
        }
    }

    #[test]
    fn uniform_frequencies_within_5_sigma() {
        let mut s = DistSpec::Uniform.sampler(u(8), rng(17)).unwrap();
        let draws = 1_000_000usize;
        let mut counts = [0u32; 256];
        for _ in 0..draws {
            counts[s.draw() as usize] += 1;
        }
        let p = 1.0 / 256.0;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (key, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() <= 5.0 * sigma,
                "key {key}: count {c}, expected {mean:.1} +- {:.1}",
                5.0 * sigma
            );
        }
    }

    #[test]
    fn deletion_sampler_is_uniform_over_store() {
        let mut r = rng(5);
        assert_eq!(sample_uniform_deletion(&[5], &mut r).unwrap(), 5);
        assert_eq!(sample_uniform_deletion(&[], &mut r).unwrap_err(), DistError::EmptyStore);
        let store = [1u64, 2];
        let mut ones = 0u32;
        for _ in 0..10_000 {
            if sample_uniform_deletion(&store, &mut r).unwrap() == 1 {
                ones += 1;
            }
        }
        // 5 sigma around 5000 for Binomial(10^4, 1/2).
        let sigma = (10_000.0f64 * 0.25).sqrt();
        assert!((ones as f64 - 5000.0).abs() <= 5.0 * sigma, "ones = {ones}");
    }

    #[test]
    fn beta_of_uniform_is_near_one() {
        let d = DistSpec::Uniform.materialize(u(8), 256).unwrap();
        let beta = estimate_beta(&d, 0.5, F2::Power(0.5), &[256]).unwrap();
        assert!((beta - 0.995850622406639).abs() < 1e-9, "beta = {beta}");
        assert!(beta <= 2.0);
    }

    #[test]
    fn beta_of_point_mass_is_n_over_f2() {
        let d = DistSpec::Spiky { spikes: 1, mass: 1.0 }.materialize(u(8), 256).unwrap();
        let beta = estimate_beta(&d, 0.5, F2::Power(0.5), &[256]).unwrap();
        // A window swallowing the whole spike has conditional mass 1, so the
        // smallest beta is n / f2(n) = 256 / 16.
        assert!((beta - 16.0).abs() < 1e-9, "beta = {beta}");
    }

    #[test]
    fn linear_f2_makes_everything_smooth() {
        let spike = DistSpec::Spiky { spikes: 1, mass: 1.0 }.materialize(u(8), 256).unwrap();
        let unif = DistSpec::Uniform.materialize(u(8), 256).unwrap();
        for d in [&spike, &unif] {
            let beta = estimate_beta(d, 0.5, F2::Linear, &[256]).unwrap();
            assert!(beta <= 1.0 + 1e-12, "beta = {beta}");
        }
        let b = estimate_beta(&spike, 0.5, F2::Linear, &[256]).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibrated_spiky_respects_its_cap() {
        let spec = DistSpec::calibrated_spiky(4, 8.0, 256);
        let d = spec.materialize(u(8), 256).unwrap();
        let beta = estimate_beta(&d, 0.5, F2::Power(0.5), &[256]).unwrap();
        assert!(beta <= 8.0, "beta = {beta}");
        assert!(beta >= 4.0, "calibration should sit near (not far below) the cap: {beta}");
    }

    #[test]
    fn beta_monotone_in_f2() {
        let d = DistSpec::parse("piecewise:0,0.9;128,0.1").unwrap().materialize(u(8), 256).unwrap();
        let lo = estimate_beta(&d, 0.5, F2::Power(0.5), &[256]).unwrap();
        let hi = estimate_beta(&d, 0.5, F2::Power(0.7), &[256]).unwrap();
        assert!(hi <= lo + 1e-12, "f2 grew but beta did not shrink: {hi} vs {lo}");
    }

    #[test]
    fn beta_guards_support_size() {
        let d = DistSpec::Uniform.materialize(u(16), 600).unwrap();
        assert_eq!(
            estimate_beta(&d, 0.5, F2::Power(0.5), &[256]).unwrap_err(),
            DistError::SupportTooLarge(600)
        );
        let small = DistSpec::Uniform.materialize(u(8), 256).unwrap();
        assert_eq!(
            estimate_beta(&small, 0.5, F2::Power(0.5), &[]).unwrap_err(),
            DistError::EmptyNList
        );
        assert!(matches!(
            estimate_beta(&small, 0.0, F2::Power(0.5), &[256]),
            Err(DistError::BadGamma(_))
        ));
    }

    proptest! {
        #[test]
        fn sampled_keys_stay_in_universe(
            bits in 4u32..=40,
            seed in 0u64..1000,
            pick in 0usize..4,
        ) {
            let specs = [
                DistSpec::Uniform,
                DistSpec::Piecewise(vec![(0, 0.5), (7, 0.5)]),
                DistSpec::Spiky { spikes: 3, mass: 0.2 },
                DistSpec::Zipf { exponent: 0.8 },
            ];
            let universe = u(bits);
            let mut s = specs[pick].clone().sampler(universe, rng(seed)).unwrap();
            for _ in 0..200 {
                prop_assert!(universe.contains(s.draw()));
            }
        }

        #[test]
        fn materialized_pmfs_sum_to_one(
            w1 in 0.01f64..10.0,
            w2 in 0.01f64..10.0,
            mass in 0.0f64..1.0,
        ) {
            let specs = [
                DistSpec::Piecewise(vec![(0, w1), (100, w2)]),
                DistSpec::Spiky { spikes: 5, mass },
            ];
            for spec in specs {
                let d = spec.materialize(u(10), 512).unwrap();
                let total: f64 = d.pmf().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }
}
