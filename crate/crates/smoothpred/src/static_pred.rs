//! Static rank index over reduced keys, tunable by a space knob `kappa`.
//!
//! Layout: van Emde Boas style recursion on the remaining key width. Every
//! node records the minimum and maximum key of its subtree (with their global
//! ranks), so queries outside that range return immediately and subtrees
//! holding at most two keys need nothing else. A wider node either splits its
//! keys on the high half of the remaining bits (children in a hash map, plus
//! a recursive summary over the occupied high halves) or, as soon as the
//! remaining subuniverse is no bigger than `count * 2^kappa` points,
//! tabulates the predecessor rank of every point in a bit-packed table.
//! Larger `kappa` therefore means flatter trees: more space, fewer probes.
//!
//! Queries count "probes" (node visits); the per-query tally is accumulated
//! into shared atomic counters at return, so concurrent readers do not
//! contend mid-descent.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StaticError {
    #[error("cannot build an index over zero keys")]
    EmptyKeys,
    #[error("kappa must be at least 1")]
    BadKappa,
    #[error("key width must lie in 1..=63, got {0}")]
    BadWidth(u32),
    #[error("keys must be sorted and distinct")]
    UnsortedOrDuplicate,
    #[error("key {key} does not fit in {width} bits")]
    KeyTooWide { key: u64, width: u32 },
    #[error("too many keys for 32-bit ranks: {0}")]
    TooManyKeys(usize),
}

/// Preset rules for choosing `kappa` from the calibration size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaMode {
    /// `kappa = ceil(delta * log2 n)`: constant probe regime, polynomial
    /// space factor.
    Const { delta: f64 },
    /// `kappa = ceil(log2 n / log2 log2 n)`: middle regime.
    TriLog,
    /// `kappa = 1`: smallest index, doubly logarithmic probes.
    LinSpace,
}

impl KappaMode {
    pub fn kappa(&self, n: usize) -> u32 {
        let lg = (n.max(2) as f64).log2();
        let k = match self {
            KappaMode::Const { delta } => (delta * lg).ceil(),
            KappaMode::TriLog => (lg / lg.max(2.0).log2()).ceil(),
            KappaMode::LinSpace => 1.0,
        };
        (k as u32).max(1)
    }

    /// Short label for CSV columns.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for KappaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaMode::Const { delta } => write!(f, "const:{delta}"),
            KappaMode::TriLog => write!(f, "trilog"),
            KappaMode::LinSpace => write!(f, "linspace"),
        }
    }
}

impl FromStr for KappaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(d) = s.strip_prefix("const:") {
            let delta: f64 = d.parse().map_err(|_| format!("bad delta in kappa mode '{s}'"))?;
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(format!("delta must be positive, got {delta}"));
            }
            return Ok(KappaMode::Const { delta });
        }
        match s {
            "trilog" => Ok(KappaMode::TriLog),
            "linspace" => Ok(KappaMode::LinSpace),
            _ => Err(format!(
                "unknown kappa mode '{s}' (expected const:<delta>, trilog, or linspace)"
            )),
        }
    }
}

/// Immutable rank index over sorted distinct keys of a fixed width.
#[derive(Debug)]
pub struct StaticPredIndex {
    keys: Vec<u64>,
    width: u32,
    kappa: u32,
    root: Node,
    space_bits: u64,
    build_ops: u64,
    probes: AtomicU64,
    queries: AtomicU64,
}

#[derive(Debug)]
struct Node {
    min_val: u64,
    max_val: u64,
    min_rank: u32,
    max_rank: u32,
    body: Body,
}

#[derive(Debug)]
enum Body {
    /// At most two keys; the min/max header answers everything.
    Thin,
    Table(RankTable),
    Split(SplitNode),
}

/// Packed array: entry at point `p` counts the node's keys `<= p` (0 means
/// none, only reachable for points below the node minimum).
#[derive(Debug)]
struct RankTable {
    entry_bits: u32,
    words: Vec<u64>,
    rank_base: u32,
}

#[derive(Debug)]
struct SplitNode {
    low_bits: u32,
    /// `part_max_rank[i]` caches the max key rank under the i-th occupied
    /// high half (i = the summary's rank of that half), so a query that
    /// falls between parts resolves without touching the child.
    part_max_rank: Vec<u32>,
    summary: Box<Node>,
    children: HashMap<u64, Node>,
}

impl RankTable {
    fn build(keys: &[u64], width: u32, rank_base: u32) -> Self {
        let count = keys.len() as u64;
        let entry_bits = (64 - count.leading_zeros()).max(1);
        let points = 1u64 << width;
        let total_bits = points as usize * entry_bits as usize;
        let mut words = vec![0u64; total_bits.div_ceil(64)];
        let mut covered = 0u64; // keys <= current point
        for p in 0..points {
            while (covered as usize) < keys.len() && keys[covered as usize] <= p {
                covered += 1;
            }
            if covered == 0 {
                continue; // entry stays 0
            }
            let off = p as usize * entry_bits as usize;
            let (word, shift) = (off / 64, off % 64);
            words[word] |= covered << shift;
            if shift + entry_bits as usize > 64 {
                words[word + 1] |= covered >> (64 - shift);
            }
        }
        Self { entry_bits, words, rank_base }
    }

    fn get(&self, p: u64) -> u64 {
        let off = p as usize * self.entry_bits as usize;
        let (word, shift) = (off / 64, off % 64);
        let mut v = self.words[word] >> shift;
        if shift + self.entry_bits as usize > 64 {
            v |= self.words[word + 1] << (64 - shift);
        }
        v & (u64::MAX >> (64 - self.entry_bits))
    }
}

/// Per-node bit accounting: min/max values at the node width plus two ranks.
fn header_bits(width: u32) -> u64 {
    2 * width as u64 + 64
}

fn build_node(
    keys: &[u64],
    rank_base: u32,
    width: u32,
    kappa: u32,
    space: &mut u64,
    ops: &mut u64,
) -> Node {
    debug_assert!(!keys.is_empty());
    debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
    *ops += keys.len() as u64;
    *space += header_bits(width);
    let header = |body| Node {
        min_val: keys[0],
        max_val: keys[keys.len() - 1],
        min_rank: rank_base,
        max_rank: rank_base + keys.len() as u32 - 1,
        body,
    };

    if keys.len() <= 2 {
        return header(Body::Thin);
    }
    // Tabulate once the subuniverse is small relative to count * 2^kappa.
    let points = 1u128 << width;
    if points <= (keys.len() as u128) << kappa.min(64) {
        let table = RankTable::build(keys, width, rank_base);
        *ops += points as u64;
        *space += table.words.len() as u64 * 64 + 32;
        return header(Body::Table(table));
    }

    // Three or more keys in a subuniverse of more than two points means the
    // width is at least 2, so both halves are non-empty.
    let low_bits = width / 2;
    let high_bits = width - low_bits;
    let low_mask = (1u64 << low_bits) - 1;
    let mut parts = Vec::new();
    let mut part_max_rank = Vec::new();
    let mut children = HashMap::new();
    let mut start = 0usize;
    while start < keys.len() {
        let hi = keys[start] >> low_bits;
        let end = start + keys[start..].partition_point(|&k| k >> low_bits == hi);
        let lows: Vec<u64> = keys[start..end].iter().map(|&k| k & low_mask).collect();
        let child = build_node(&lows, rank_base + start as u32, low_bits, kappa, space, ops);
        parts.push(hi);
        part_max_rank.push(child.max_rank);
        children.insert(hi, child);
        start = end;
    }
    let summary = build_node(&parts, 0, high_bits, kappa, space, ops);
    // Per part: its high half, a hash slot, and the cached max rank.
    *space += parts.len() as u64 * (high_bits as u64 + 64 + 32);
    header(Body::Split(SplitNode { low_bits, part_max_rank, summary: Box::new(summary), children }))
}

fn descend(node: &Node, y: u64, probes: &mut u64) -> Option<u32> {
    *probes += 1;
    if y >= node.max_val {
        return Some(node.max_rank);
    }
    if y < node.min_val {
        return None;
    }
    // Here min <= y < max, so the node holds at least two keys.
    match &node.body {
        Body::Thin => Some(node.min_rank),
        Body::Table(t) => {
            let covered = t.get(y);
            debug_assert!(covered > 0);
            Some(t.rank_base + covered as u32 - 1)
        }
        Body::Split(s) => {
            let hi = y >> s.low_bits;
            let lo = y & ((1u64 << s.low_bits) - 1);
            if let Some(child) = s.children.get(&hi) {
                if lo >= child.min_val {
                    return descend(child, lo, probes);
                }
            }
            // Answer is the max of the nearest occupied high half below hi.
            // hi is above the minimum's high half (else the header or the
            // child branch would have resolved), so the summary must answer;
            // the cached rank then avoids a visit to that child.
            debug_assert!(hi > 0);
            let pos = descend(&s.summary, hi - 1, probes).expect("summary covers lower part");
            Some(s.part_max_rank[pos as usize])
        }
    }
}

/// Builds the index. `keys` must be sorted, distinct, and fit in `width`
/// bits; `kappa >= 1` sets the table/split trade-off.
pub fn build_static(keys: &[u64], width: u32, kappa: u32) -> Result<StaticPredIndex, StaticError> {
    if keys.is_empty() {
        return Err(StaticError::EmptyKeys);
    }
    if kappa == 0 {
        return Err(StaticError::BadKappa);
    }
    if width == 0 || width > 63 {
        return Err(StaticError::BadWidth(width));
    }
    if keys.len() >= u32::MAX as usize {
        return Err(StaticError::TooManyKeys(keys.len()));
    }
    if !keys.windows(2).all(|w| w[0] < w[1]) {
        return Err(StaticError::UnsortedOrDuplicate);
    }
    let limit = 1u64 << width;
    if let Some(&bad) = keys.iter().find(|&&k| k >= limit) {
        return Err(StaticError::KeyTooWide { key: bad, width });
    }
    let mut space = 0u64;
    let mut ops = 0u64;
    let root = build_node(keys, 0, width, kappa, &mut space, &mut ops);
    Ok(StaticPredIndex {
        keys: keys.to_vec(),
        width,
        kappa,
        root,
        space_bits: space,
        build_ops: ops,
        probes: AtomicU64::new(0),
        queries: AtomicU64::new(0),
    })
}

impl StaticPredIndex {
    /// Rank of the largest stored key `<= y`, or `None` when every stored key
    /// exceeds `y`.
    pub fn pred(&self, y: u64) -> Option<u32> {
        debug_assert!(y < 1u64 << self.width, "query {y} outside {}-bit universe", self.width);
        let mut tally = 0u64;
        let rank = descend(&self.root, y, &mut tally);
        self.probes.fetch_add(tally, Ordering::Relaxed);
        self.queries.fetch_add(1, Ordering::Relaxed);
        rank
    }

    /// The stored key itself rather than its rank.
    pub fn pred_key(&self, y: u64) -> Option<u64> {
        self.pred(y).map(|r| self.keys[r as usize])
    }

    pub fn key_at(&self, rank: u32) -> Option<u64> {
        self.keys.get(rank as usize).copied()
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Accounted size of headers, tables, and child maps, in bits.
    pub fn space_bits(&self) -> u64 {
        self.space_bits
    }

    /// The implementation constant `c` in the space shape
    /// `space_bits <= c * len * 2^kappa * width`.
    pub fn space_factor(&self) -> f64 {
        let budget =
            self.keys.len() as f64 * (self.kappa.min(63) as f64).exp2() * self.width as f64;
        self.space_bits as f64 / budget
    }

    /// Node-visit work performed by the build, in units of keys touched plus
    /// table points written.
    pub fn build_ops(&self) -> u64 {
        self.build_ops
    }

    pub fn probe_count(&self) -> u64 {
        self.probes.load(Ordering::Relaxed)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_probe_counters(&self) {
        self.probes.store(0, Ordering::Relaxed);
        self.queries.store(0, Ordering::Relaxed);
    }

    pub fn mean_probes(&self) -> f64 {
        let q = self.query_count();
        if q == 0 {
            0.0
        } else {
            self.probe_count() as f64 / q as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_pred_rank(keys: &[u64], y: u64) -> Option<u32> {
        let upto = keys.partition_point(|&k| k <= y);
        upto.checked_sub(1).map(|i| i as u32)
    }

    fn random_keys(rng: &mut ChaCha8Rng, count: usize, width: u32) -> Vec<u64> {
        let limit = 1u64 << width;
        assert!(count as u64 <= limit);
        let mut set = std::collections::BTreeSet::new();
        while set.len() < count {
            set.insert(rng.gen_range(0..limit));
        }
        set.into_iter().collect()
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(build_static(&[], 8, 1).unwrap_err(), StaticError::EmptyKeys);
        assert_eq!(build_static(&[1], 8, 0).unwrap_err(), StaticError::BadKappa);
        assert_eq!(build_static(&[1], 0, 1).unwrap_err(), StaticError::BadWidth(0));
        assert_eq!(build_static(&[1], 64, 1).unwrap_err(), StaticError::BadWidth(64));
        assert_eq!(build_static(&[3, 2], 8, 1).unwrap_err(), StaticError::UnsortedOrDuplicate);
        assert_eq!(build_static(&[2, 2], 8, 1).unwrap_err(), StaticError::UnsortedOrDuplicate);
        assert_eq!(
            build_static(&[1, 256], 8, 1).unwrap_err(),
            StaticError::KeyTooWide { key: 256, width: 8 }
        );
    }

    #[test]
    fn singleton_answers_everything() {
        let idx = build_static(&[0], 8, 3).unwrap();
        assert_eq!(idx.pred(0), Some(0));
        assert_eq!(idx.pred(255), Some(0));
        assert_eq!(idx.pred_key(77), Some(0));
        let idx2 = build_static(&[9], 8, 3).unwrap();
        assert_eq!(idx2.pred(8), None);
        assert_eq!(idx2.pred(9), Some(0));
    }

    #[test]
    fn four_key_example() {
        let keys = [0u64, 3, 10, 200];
        let idx = build_static(&keys, 8, 1).unwrap();
        assert_eq!(idx.pred(9), Some(1));
        assert_eq!(idx.pred_key(9), Some(3));
        assert_eq!(idx.pred(200), Some(3)); // exact hit returns the key itself
        assert_eq!(idx.pred(255), Some(3));
        assert_eq!(idx.pred(2), Some(0));
        assert_eq!(idx.key_at(3), Some(200));
        // Small tree: headers plus one tiny split level.
        assert!(idx.space_bits() <= 4096, "space {}", idx.space_bits());
        assert!(idx.build_ops() > 0);
    }

    #[test]
    fn exhaustive_oracle_sweep_small_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for width in [4u32, 8, 12] {
            let max = 1usize << width;
            for count in [1usize, 2, 3, 7, 100] {
                if count > max {
                    continue;
                }
                for kappa in [1u32, 2, 8, 16] {
                    let keys = random_keys(&mut rng, count, width);
                    let idx = build_static(&keys, width, kappa).unwrap();
                    for y in 0..(1u64 << width) {
                        assert_eq!(
                            idx.pred(y),
                            sorted_pred_rank(&keys, y),
                            "width {width} count {count} kappa {kappa} query {y}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_oracle_sweep_width_16() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for count in [100usize, 1000] {
            for kappa in [1u32, 8, 16] {
                let keys = random_keys(&mut rng, count, 16);
                let idx = build_static(&keys, 16, kappa).unwrap();
                for y in 0..(1u64 << 16) {
                    assert_eq!(idx.pred(y), sorted_pred_rank(&keys, y));
                }
            }
        }
    }

    #[test]
    fn dense_set_is_identity() {
        let keys: Vec<u64> = (0..1024).collect();
        let idx = build_static(&keys, 10, 1).unwrap();
        for y in 0..1024u64 {
            assert_eq!(idx.pred(y), Some(y as u32));
        }
    }

    #[test]
    fn probe_counters_track_queries() {
        let keys = [5u64, 900];
        let idx = build_static(&keys, 10, 1).unwrap();
        assert_eq!(idx.pred(7), Some(0));
        // Two keys make a thin root: every query is exactly one probe.
        assert_eq!(idx.query_count(), 1);
        assert_eq!(idx.probe_count(), 1);
        idx.pred(950);
        assert_eq!(idx.probe_count(), 2);
        idx.reset_probe_counters();
        assert_eq!(idx.probe_count(), 0);
        assert_eq!(idx.query_count(), 0);
        assert_eq!(idx.mean_probes(), 0.0);
    }

    #[test]
    fn larger_kappa_never_probes_more() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let keys = random_keys(&mut rng, 4000, 24);
        let queries: Vec<u64> = (0..20_000).map(|_| rng.gen_range(0..1u64 << 24)).collect();
        let mut prev = f64::INFINITY;
        for kappa in [1u32, 4, 8, 12] {
            let idx = build_static(&keys, 24, kappa).unwrap();
            for &q in &queries {
                idx.pred(q);
            }
            let mean = idx.mean_probes();
            assert!(mean >= 1.0);
            assert!(
                mean <= prev + 1e-9,
                "kappa {kappa} probed more than a smaller kappa: {mean} > {prev}"
            );
            prev = mean;
        }
    }

    #[test]
    fn space_stays_within_linear_in_two_to_kappa() {
        // Raw bits need not grow monotonically in kappa (a packed table can
        // be smaller than the split tree it replaces); the guarantee is that
        // the budget constant space_bits / (len * 2^kappa * width) stays
        // bounded, i.e. space grows at most linearly in 2^kappa.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let keys = random_keys(&mut rng, 2000, 20);
        for kappa in 1..=10 {
            let idx = build_static(&keys, 20, kappa).unwrap();
            assert!(idx.space_factor() < 64.0, "kappa {kappa}: factor {}", idx.space_factor());
        }
    }

    #[test]
    fn shuffled_queries_agree_with_oracle_on_wide_universe() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let keys = random_keys(&mut rng, 3000, 40);
        let idx = build_static(&keys, 40, 2).unwrap();
        let mut queries: Vec<u64> = keys.clone();
        queries.extend((0..3000).map(|_| rng.gen_range(0..1u64 << 40)));
        queries.shuffle(&mut rng);
        for y in queries {
            assert_eq!(idx.pred(y), sorted_pred_rank(&keys, y));
        }
    }

    proptest! {
        #[test]
        fn matches_oracle_with_bounded_probes(
            width in 3u32..=32,
            kappa in 1u32..=20,
            seed in 0u64..10_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let limit = 1u64 << width;
            let count = rng.gen_range(1..=200u64.min(limit)) as usize;
            let keys = random_keys(&mut rng, count, width);
            let idx = build_static(&keys, width, kappa).unwrap();
            for _ in 0..64 {
                let y = rng.gen_range(0..limit);
                let before = idx.probe_count();
                prop_assert_eq!(idx.pred(y), sorted_pred_rank(&keys, y));
                // Each level halves the width; allow the extra closing probe.
                prop_assert!(idx.probe_count() - before <= 12);
            }
        }
    }
}
