//! The full dynamic predecessor structure.
//!
//! Construction (`preprocess`) runs the calibration phase: draw `n` keys from
//! the input source, sort them, keep every `(c4 * log2 n)`-th order statistic
//! as a representative, partition the universe, map representatives to their
//! part indices (widening the partition on the rare collision), and freeze a
//! static rank index over those reduced representatives. The calibration keys
//! are then discarded and `n` fresh keys are inserted through the ordinary
//! insert path, so the stored set is distributed like the live input rather
//! than like the calibration sample.
//!
//! Operationally, every key belongs to the bucket of the representative
//! interval `[r_i, r_{i+1})` it falls in. Buckets have a fixed capacity
//! `C = ceil(c_cap * log2 n)`; a per-bucket counter `c_i` tracks how many
//! stored keys belong there, whether or not they fit. Two tree sets absorb
//! the irregularities: `b1` holds the indices of non-empty buckets (so a
//! predecessor query that lands in an empty or too-small bucket can hop to
//! the nearest earlier non-empty one), and `b2` holds the keys that arrived
//! at a full bucket. Under smooth inputs both stay nearly idle, which is the
//! entire point: the expected op cost is one static-index descent plus one
//! short sorted-vector operation.
//!
//! The store also enforces an occupancy band: inserts are refused once
//! `n_t + 1` would reach `ceil(c_max * n)` and deletes once `n_t - 1` would
//! drop below `ceil(c_min * n)`. Callers (and the workload generator) are
//! expected to stay inside the band; the guarantees above are conditioned on
//! it.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::bucket::{Bucket, BucketError, DeleteOutcome, InsertOutcome};
use crate::fallback::{DynPredSet, TreeSet};
use crate::partition::{
    plan_partition, PartitionError, PartitionPlan, SmoothParams, UniverseParams,
};
use crate::sampler::KeySource;
use crate::static_pred::{build_static, KappaMode, StaticError, StaticPredIndex};
use crate::Key;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Static(#[from] StaticError),
    #[error("bad engine config: {0}")]
    BadConfig(String),
    #[error("key {0} is already stored")]
    Duplicate(Key),
    #[error("key {0} is not stored")]
    Absent(Key),
    #[error("insert refused: {n_t} keys stored, occupancy band tops out below {bound}")]
    BandFull { n_t: u64, bound: u64 },
    #[error("delete refused: {n_t} keys stored, occupancy band floor is {floor}")]
    BandEmpty { n_t: u64, floor: u64 },
    #[error(
        "representatives collide (duplicate values or shared partition parts) \
         after {0} widenings; the input source is too clustered for this configuration"
    )]
    SmoothnessViolated(u32),
    #[error("key source failed to yield {needed} distinct keys within {attempts} draws")]
    SourceExhausted { needed: usize, attempts: u64 },
}

/// Construction parameters. `smooth.c_max` doubles as the upper occupancy
/// band constant.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Calibration size: keys drawn for calibration, and the stored count
    /// right after construction.
    pub n: usize,
    pub universe: UniverseParams,
    pub smooth: SmoothParams,
    /// Representative spacing constant: one representative every
    /// `c4 * log2 n` order statistics. At least 1.
    pub c4: f64,
    pub kappa_mode: KappaMode,
    /// Bucket capacity constant: `C = ceil(c_cap * log2 n)`; `None` defaults
    /// to `4 * c4`.
    pub c_cap: Option<f64>,
    /// Lower occupancy band constant, in `(0, 1]`.
    pub c_min: f64,
    /// Keep the calibration keys as the initial store (deduplicated, topped
    /// up to `n` with fresh draws) instead of redrawing all `n`.
    pub keep_calibration: bool,
    /// Run the full accounting invariant scan after every update (slow;
    /// meant for tests).
    pub debug_checks: bool,
}

impl EngineConfig {
    pub fn new(n: usize, universe: UniverseParams, smooth: SmoothParams) -> Self {
        Self {
            n,
            universe,
            smooth,
            c4: 2.0,
            kappa_mode: KappaMode::TriLog,
            c_cap: None,
            c_min: 0.5,
            keep_calibration: false,
            debug_checks: false,
        }
    }

    fn resolve(&self) -> Result<Resolved, EngineError> {
        self.smooth.validate()?;
        if self.n < 16 {
            return Err(PartitionError::CalibrationTooSmall(self.n).into());
        }
        if !(self.c4 >= 1.0 && self.c4.is_finite()) {
            return Err(EngineError::BadConfig(format!("c4 must be >= 1, got {}", self.c4)));
        }
        if !(self.c_min > 0.0 && self.c_min <= 1.0) {
            return Err(EngineError::BadConfig(format!(
                "c_min must lie in (0, 1], got {}",
                self.c_min
            )));
        }
        let c_cap = self.c_cap.unwrap_or(4.0 * self.c4);
        if !(c_cap > 0.0 && c_cap.is_finite()) {
            return Err(EngineError::BadConfig(format!("c_cap must be positive, got {c_cap}")));
        }
        let nf = self.n as f64;
        let spacing = self.c4 * nf.log2();
        let rho = (nf / spacing).floor() as usize;
        if rho < 2 {
            return Err(EngineError::BadConfig(format!(
                "need at least 2 buckets, got rho = {rho} (n too small for c4 = {})",
                self.c4
            )));
        }
        Ok(Resolved {
            spacing,
            rho,
            capacity: (c_cap * nf.log2()).ceil() as usize,
            kappa: self.kappa_mode.kappa(self.n),
            band_floor: (self.c_min * nf).ceil() as u64,
            band_top: (self.smooth.c_max * nf).ceil() as u64,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Resolved {
    spacing: f64,
    rho: usize,
    capacity: usize,
    kappa: u32,
    band_floor: u64,
    band_top: u64,
}

/// Representative keys: `values[0] = 0`, `values[rho] = 2^b` (sentinel), all
/// strictly increasing; `reduced[i]` is the part index of `values[i]` for
/// `i < rho`, also strictly increasing.
#[derive(Debug, Clone)]
struct Representatives {
    values: Vec<Key>,
    reduced: Vec<u64>,
}

#[derive(Debug, Default)]
struct EventCounters {
    b1_touches: AtomicU64,
    b2_touches: AtomicU64,
    overflow_events: AtomicU64,
    empty_events: AtomicU64,
    transfer_events: AtomicU64,
}

impl EventCounters {
    fn reset(&self) {
        self.b1_touches.store(0, Ordering::Relaxed);
        self.b2_touches.store(0, Ordering::Relaxed);
        self.overflow_events.store(0, Ordering::Relaxed);
        self.empty_events.store(0, Ordering::Relaxed);
        self.transfer_events.store(0, Ordering::Relaxed);
    }

    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }
}

/// Point-in-time statistics snapshot.
#[derive(Debug, Clone)]
pub struct EngineStats {
    pub n_t: u64,
    pub rho: usize,
    pub capacity: usize,
    pub kappa: u32,
    pub index_bits: u32,
    pub num_parts: u64,
    pub part_width: u64,
    pub plan_depth: u32,
    pub plan_clamped: bool,
    pub plan_widenings: u32,
    /// Per-bucket counters `c_i` (bucket keys plus spilled keys).
    pub loads: Vec<u32>,
    pub max_load: u32,
    pub min_load: u32,
    pub b1_len: usize,
    pub b2_len: usize,
    pub b1_touches: u64,
    pub b2_touches: u64,
    pub overflow_events: u64,
    pub empty_events: u64,
    pub transfer_events: u64,
    pub static_space_bits: u64,
    pub static_build_ops: u64,
    pub static_probes: u64,
    pub static_queries: u64,
}

/// Dynamic predecessor structure over `b`-bit keys.
#[derive(Debug)]
pub struct Engine {
    cfg: EngineConfig,
    resolved: Resolved,
    plan: PartitionPlan,
    widenings: u32,
    reps: Representatives,
    sdx: StaticPredIndex,
    buckets: Vec<Bucket>,
    counters: Vec<u32>,
    b1: TreeSet,
    b2: TreeSet,
    n_t: u64,
    events: EventCounters,
}

/// Builds the structure from a key source (see the module docs for the two
/// phases). Consumes `2n` draws in the default mode: `n` for calibration and
/// `n` fresh keys for the initial store, plus retries for duplicates.
pub fn preprocess(cfg: EngineConfig, source: &mut dyn KeySource) -> Result<Engine, EngineError> {
    preprocess_impl(cfg, source, None)
}

fn preprocess_impl(
    cfg: EngineConfig,
    source: &mut dyn KeySource,
    plan_override: Option<PartitionPlan>,
) -> Result<Engine, EngineError> {
    let resolved = cfg.resolve()?;
    let universe = cfg.universe;
    let n = cfg.n;

    // Calibration sample: a multiset, duplicates and all.
    let mut calibration = Vec::with_capacity(n);
    for _ in 0..n {
        let y = source.draw_key();
        if !universe.contains(y) {
            return Err(PartitionError::KeyOutOfRange { key: y, bits: universe.bits() }.into());
        }
        calibration.push(y);
    }
    calibration.sort_unstable();

    // Representatives: r_0 = 0 and r_rho = 2^b are sentinels; r_i for
    // 0 < i < rho is the floor(i * spacing)-th order statistic (1-based).
    let rho = resolved.rho;
    let mut values = Vec::with_capacity(rho + 1);
    values.push(0u64);
    for i in 1..rho {
        let pos = ((i as f64 * resolved.spacing).floor() as usize).clamp(1, n);
        values.push(calibration[pos - 1]);
    }
    values.push(universe.size());
    if !values[..rho].windows(2).all(|w| w[0] < w[1]) {
        // Duplicate representative values; no partition refinement can
        // separate equal keys.
        return Err(EngineError::SmoothnessViolated(0));
    }

    // Partition; on a part-index collision among representatives, refine and
    // retry a bounded number of times.
    let mut plan = match plan_override {
        Some(p) => p,
        None => plan_partition(n, &cfg.smooth, universe)?,
    };
    let mut widenings = 0u32;
    let reduced = loop {
        let reduced: Vec<u64> = values[..rho]
            .iter()
            .map(|&r| plan.part_index(r).expect("representatives lie in the universe"))
            .collect();
        if reduced.windows(2).all(|w| w[0] < w[1]) {
            break reduced;
        }
        if widenings >= 3 {
            return Err(EngineError::SmoothnessViolated(widenings));
        }
        match plan.widen() {
            Some(p) => {
                plan = p;
                widenings += 1;
            }
            None => return Err(EngineError::SmoothnessViolated(widenings)),
        }
    };

    let sdx = build_static(&reduced, plan.index_bits(), resolved.kappa)?;
    let buckets: Vec<Bucket> =
        (0..rho).map(|i| Bucket::new(values[i], values[i + 1], resolved.capacity)).collect();

    let mut engine = Engine {
        cfg: cfg.clone(),
        resolved,
        plan,
        widenings,
        reps: Representatives { values, reduced },
        sdx,
        buckets,
        counters: vec![0; rho],
        b1: TreeSet::new(),
        b2: TreeSet::new(),
        n_t: 0,
        events: EventCounters::default(),
    };

    // Initial store. Default: discard the calibration multiset and insert n
    // fresh draws, so the store reflects live input. keep_calibration mode
    // reuses the calibration keys (deduplicated) and only tops up the gap.
    if cfg.keep_calibration {
        calibration.dedup();
        for &y in &calibration {
            engine.insert_routed(y).expect("deduplicated calibration keys cannot collide");
        }
    }
    drop(calibration);
    let mut attempts = 0u64;
    let attempt_cap = 64 * n as u64;
    while engine.n_t < n as u64 {
        if attempts >= attempt_cap {
            return Err(EngineError::SourceExhausted { needed: n, attempts });
        }
        attempts += 1;
        let y = source.draw_key();
        if !universe.contains(y) {
            return Err(PartitionError::KeyOutOfRange { key: y, bits: universe.bits() }.into());
        }
        if engine.member(y).expect("key already range-checked") {
            continue;
        }
        engine.insert_routed(y).expect("membership just checked");
    }

    // Counters describe the operational phase only.
    engine.events.reset();
    engine.sdx.reset_probe_counters();
    if engine.cfg.debug_checks {
        engine.check_full_invariants();
    }
    Ok(engine)
}

impl Engine {
    /// Bucket index `i` with `r_i <= y < r_{i+1}`.
    pub fn find_bucket(&self, y: Key) -> Result<usize, EngineError> {
        let part = self.plan.part_index(y)?;
        let rank = self.sdx.pred(part).expect("representative 0 covers every part") as usize;
        // Part indexing is lossy within one part: the representative sharing
        // y's part may still exceed y, in which case y belongs one bucket
        // earlier.
        if self.reps.values[rank] > y {
            debug_assert!(rank > 0, "r_0 = 0 cannot exceed any key");
            Ok(rank - 1)
        } else {
            Ok(rank)
        }
    }

    /// Inserts a new key. Refused (before any other check) when the store is
    /// at the top of its occupancy band.
    pub fn insert(&mut self, y: Key) -> Result<(), EngineError> {
        let i = self.find_bucket(y)?;
        self.check_fresh(i, y)?;
        // A duplicate request is a no-op and reports as such above; only an
        // insert that would actually grow the store can breach the band.
        if self.n_t + 1 >= self.resolved.band_top {
            return Err(EngineError::BandFull { n_t: self.n_t, bound: self.resolved.band_top });
        }
        self.insert_at(i, y);
        if self.cfg.debug_checks {
            self.check_full_invariants();
        }
        Ok(())
    }

    /// Construction-time insert: no occupancy band yet.
    fn insert_routed(&mut self, y: Key) -> Result<(), EngineError> {
        let i = self.find_bucket(y)?;
        self.check_fresh(i, y)?;
        self.insert_at(i, y);
        Ok(())
    }

    /// `Duplicate` when `y` already lives in bucket `i` or, while that bucket
    /// is overflown, in the spill set.
    fn check_fresh(&self, i: usize, y: Key) -> Result<(), EngineError> {
        if self.buckets[i].contains(y) {
            return Err(EngineError::Duplicate(y));
        }
        if self.spill(i) > 0 {
            EventCounters::bump(&self.events.b2_touches);
            if self.b2.member(y) {
                return Err(EngineError::Duplicate(y));
            }
        }
        Ok(())
    }

    fn insert_at(&mut self, i: usize, y: Key) {
        if self.counters[i] as usize >= self.resolved.capacity {
            // Bucket full: the key is stored in the spill set but still
            // counted against its bucket.
            EventCounters::bump(&self.events.b2_touches);
            self.b2.insert(y).expect("membership checked above");
            EventCounters::bump(&self.events.overflow_events);
        } else {
            match self.buckets[i].insert(y) {
                Ok(InsertOutcome::Inserted) => {}
                Ok(InsertOutcome::Full) => {
                    unreachable!("counter below capacity implies bucket below capacity")
                }
                Err(BucketError::Duplicate(_)) => unreachable!("duplicate checked above"),
            }
        }
        self.counters[i] += 1;
        if self.counters[i] == 1 {
            EventCounters::bump(&self.events.b1_touches);
            self.b1.insert(i as u64).expect("0 -> 1 transition");
        }
        self.n_t += 1;
    }

    /// Deletes a stored key. Refused when the store is at the bottom of its
    /// occupancy band.
    pub fn delete(&mut self, y: Key) -> Result<(), EngineError> {
        let i = self.find_bucket(y)?;
        let in_bucket = self.buckets[i].contains(y);
        let had_spill = self.spill(i) > 0;
        let in_spill = !in_bucket && had_spill && {
            EventCounters::bump(&self.events.b2_touches);
            self.b2.member(y)
        };
        if !in_bucket && !in_spill {
            return Err(EngineError::Absent(y));
        }
        // An absent request is a no-op and reports as such above; only a
        // delete that would actually shrink the store can breach the floor
        // (presence implies n_t >= 1).
        if self.n_t - 1 < self.resolved.band_floor {
            return Err(EngineError::BandEmpty { n_t: self.n_t, floor: self.resolved.band_floor });
        }
        if in_bucket {
            let removed = self.buckets[i].delete(y);
            debug_assert_eq!(removed, DeleteOutcome::Removed);
            if had_spill {
                // Refill the freed slot from the spill set so spilled keys
                // never linger while their bucket has room.
                let (lo, hi) = self.buckets[i].interval();
                EventCounters::bump(&self.events.b2_touches);
                let moved = self
                    .b2
                    .pred_at_least(hi - 1, lo)
                    .expect("positive spill means a spilled key in range");
                EventCounters::bump(&self.events.b2_touches);
                self.b2.delete(moved).expect("key just found");
                let outcome = self.buckets[i].insert(moved).expect("distinct spilled key");
                debug_assert_eq!(outcome, InsertOutcome::Inserted);
                EventCounters::bump(&self.events.transfer_events);
            }
        } else {
            EventCounters::bump(&self.events.b2_touches);
            self.b2.delete(y).expect("membership checked above");
        }
        self.counters[i] -= 1;
        if self.counters[i] == 0 {
            EventCounters::bump(&self.events.b1_touches);
            self.b1.delete(i as u64).expect("1 -> 0 transition");
        }
        self.n_t -= 1;
        if self.cfg.debug_checks {
            self.check_full_invariants();
        }
        Ok(())
    }

    pub fn member(&self, y: Key) -> Result<bool, EngineError> {
        let i = self.find_bucket(y)?;
        if self.buckets[i].contains(y) {
            return Ok(true);
        }
        if self.spill(i) > 0 {
            EventCounters::bump(&self.events.b2_touches);
            return Ok(self.b2.member(y));
        }
        Ok(false)
    }

    /// Largest stored key `<= y`, or `None` when `y` precedes everything.
    pub fn pred(&self, y: Key) -> Result<Option<Key>, EngineError> {
        let i = self.find_bucket(y)?;
        let mut candidate = self.buckets[i].pred(y);
        if self.spill(i) > 0 {
            EventCounters::bump(&self.events.b2_touches);
            let lo = self.buckets[i].interval().0;
            candidate = candidate.max(self.b2.pred_at_least(y, lo));
        }
        if candidate.is_some() {
            return Ok(candidate);
        }
        if self.counters[i] == 0 {
            EventCounters::bump(&self.events.empty_events);
        }
        // Nothing at or below y in bucket i: hop to the nearest earlier
        // non-empty bucket and take its maximum.
        EventCounters::bump(&self.events.b1_touches);
        let j = if self.counters[i] == 0 {
            self.b1.pred(i as u64)
        } else if i == 0 {
            None
        } else {
            self.b1.pred(i as u64 - 1)
        };
        let Some(j) = j else {
            return Ok(None);
        };
        let j = j as usize;
        let mut best = self.buckets[j].max();
        if self.spill(j) > 0 {
            EventCounters::bump(&self.events.b2_touches);
            let (lo, hi) = self.buckets[j].interval();
            best = best.max(self.b2.pred_at_least(hi - 1, lo));
        }
        debug_assert!(best.is_some(), "b1 only tracks non-empty buckets");
        Ok(best)
    }

    pub fn len(&self) -> usize {
        self.n_t as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n_t == 0
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn capacity(&self) -> usize {
        self.resolved.capacity
    }

    /// `(floor, top)`: legal stored counts satisfy `floor <= n_t < top`.
    pub fn band(&self) -> (u64, u64) {
        (self.resolved.band_floor, self.resolved.band_top)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Representative keys, sentinels included (`rho + 1` values).
    pub fn representatives(&self) -> &[Key] {
        &self.reps.values
    }

    /// Part indices of the representatives (`rho` values).
    pub fn reduced_representatives(&self) -> &[u64] {
        &self.reps.reduced
    }

    pub fn static_index(&self) -> &StaticPredIndex {
        &self.sdx
    }

    pub fn partition(&self) -> &PartitionPlan {
        &self.plan
    }

    /// All stored keys in sorted order (buckets plus spill set).
    pub fn stored_keys(&self) -> Vec<Key> {
        let mut keys: Vec<Key> = Vec::with_capacity(self.n_t as usize);
        for b in &self.buckets {
            keys.extend_from_slice(b.keys());
        }
        keys.extend(self.b2.iter());
        keys.sort_unstable();
        keys
    }

    /// Keys belonging to bucket `i`, spilled ones included, sorted.
    pub fn bucket_keys(&self, i: usize) -> Vec<Key> {
        let mut keys: Vec<Key> = self.buckets[i].keys().to_vec();
        if self.spill(i) > 0 {
            let (lo, hi) = self.buckets[i].interval();
            keys.extend(self.b2.range_inclusive(lo, hi - 1));
            keys.sort_unstable();
        }
        keys
    }

    pub fn stats(&self) -> EngineStats {
        let loads = self.counters.clone();
        EngineStats {
            n_t: self.n_t,
            rho: self.buckets.len(),
            capacity: self.resolved.capacity,
            kappa: self.sdx.kappa(),
            index_bits: self.plan.index_bits(),
            num_parts: self.plan.num_parts(),
            part_width: self.plan.part_width(),
            plan_depth: self.plan.depth(),
            plan_clamped: self.plan.clamped(),
            plan_widenings: self.widenings,
            max_load: loads.iter().copied().max().unwrap_or(0),
            min_load: loads.iter().copied().min().unwrap_or(0),
            loads,
            b1_len: self.b1.len(),
            b2_len: self.b2.len(),
            b1_touches: self.events.b1_touches.load(Ordering::Relaxed),
            b2_touches: self.events.b2_touches.load(Ordering::Relaxed),
            overflow_events: self.events.overflow_events.load(Ordering::Relaxed),
            empty_events: self.events.empty_events.load(Ordering::Relaxed),
            transfer_events: self.events.transfer_events.load(Ordering::Relaxed),
            static_space_bits: self.sdx.space_bits(),
            static_build_ops: self.sdx.build_ops(),
            static_probes: self.sdx.probe_count(),
            static_queries: self.sdx.query_count(),
        }
    }

    /// Zeroes the event counters (static-index probe counters are reset
    /// through `static_index()`).
    pub fn reset_event_counters(&self) {
        self.events.reset();
    }

    fn spill(&self, i: usize) -> usize {
        let c = self.counters[i] as usize;
        let len = self.buckets[i].len();
        debug_assert!(c >= len, "counter below bucket size");
        c - len
    }

    /// Full accounting scan; O(rho + |b2| log rho). Panics on violation.
    fn check_full_invariants(&self) {
        let rho = self.buckets.len();
        let mut counted = 0u64;
        let mut sizes = 0u64;
        let mut non_empty = 0usize;
        for i in 0..rho {
            let c = self.counters[i] as usize;
            let len = self.buckets[i].len();
            assert!(c >= len, "bucket {i}: counter {c} below size {len}");
            if c > len {
                assert_eq!(len, self.resolved.capacity, "bucket {i} spilled while below capacity");
            }
            assert_eq!(c > 0, self.b1.member(i as u64), "b1 mismatch at bucket {i}");
            counted += c as u64;
            sizes += len as u64;
            non_empty += usize::from(c > 0);
        }
        assert_eq!(counted, self.n_t, "counters do not sum to n_t");
        assert_eq!(sizes + self.b2.len() as u64, self.n_t, "sizes + |b2| != n_t");
        assert_eq!(self.b1.len(), non_empty, "b1 size mismatch");
        let mut spills = vec![0usize; rho];
        for k in self.b2.iter() {
            let i = self.reps.values.partition_point(|&r| r <= k) - 1;
            spills[i] += 1;
        }
        for i in 0..rho {
            assert_eq!(spills[i], self.spill(i), "b2 attribution mismatch at bucket {i}");
        }
    }
}
