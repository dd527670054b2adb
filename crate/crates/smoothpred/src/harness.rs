//! Experiment driver: deterministic workload generation, oracle-checked
//! replay, and probe/load/space sweeps with CSV output.
//!
//! Everything here is reproducible from `(RunConfig, workload file)`. Random
//! state is carved into fixed ChaCha streams per role: stream 0 feeds
//! construction (calibration and initial fill), stream 1 feeds workload keys
//! (inserts and query points), stream 2 drives workload control choices (op
//! kinds, deletion victims), and stream 3 feeds sweep queries. Replaying a
//! generated workload therefore reproduces exactly the engine state it was
//! generated against.
//!
//! Wall-clock latencies are collected and reported but are never part of any
//! correctness or performance gate; probe and touch counters are the
//! machine-independent measure.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as IoWrite};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{preprocess, Engine, EngineConfig, EngineError, EngineStats};
use crate::oracle::OracleSet;
use crate::sampler::{DistError, DistSpec, KeySource};
use crate::static_pred::KappaMode;
use crate::Key;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: cannot parse op from {text:?}")]
    ParseOp { line: usize, text: String },
    #[error("bad op mix {0:?}: expected four non-negative integers i:d:p:m, not all zero")]
    BadMix(String),
    #[error(
        "op slot {at}: no feasible op kind (mix weights vs occupancy band \
         leave nothing to emit)"
    )]
    InfeasibleMix { at: usize },
    #[error("op {at} ({op}) violates the occupancy band; workload does not fit this config")]
    BandViolation { at: usize, op: String },
    #[error("op {at} ({op}): engine answered {engine}, oracle answered {oracle}")]
    Mismatch { at: usize, op: String, engine: String, oracle: String },
}

/// One replayable operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Insert(Key),
    Delete(Key),
    Pred(Key),
    Member(Key),
}

impl Op {
    pub fn key(&self) -> Key {
        match *self {
            Op::Insert(k) | Op::Delete(k) | Op::Pred(k) | Op::Member(k) => k,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Op::Insert(k) => write!(f, "I {k}"),
            Op::Delete(k) => write!(f, "D {k}"),
            Op::Pred(k) => write!(f, "P {k}"),
            Op::Member(k) => write!(f, "M {k}"),
        }
    }
}

impl FromStr for Op {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let mut it = s.split_whitespace();
        let tag = it.next().ok_or(())?;
        let key: Key = it.next().ok_or(())?.parse().map_err(|_| ())?;
        if it.next().is_some() {
            return Err(());
        }
        match tag {
            "I" => Ok(Op::Insert(key)),
            "D" => Ok(Op::Delete(key)),
            "P" => Ok(Op::Pred(key)),
            "M" => Ok(Op::Member(key)),
            _ => Err(()),
        }
    }
}

/// Provenance of a generated workload. Informational; replay needs only the
/// ops plus the `RunConfig` they were generated for.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadMeta {
    pub seed: u64,
    pub op_dist: String,
    pub c_min: f64,
    pub c_max: f64,
}

/// A replayable op sequence. Generated workloads keep the stored-key count
/// inside the occupancy band by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub ops: Vec<Op>,
    pub meta: Option<WorkloadMeta>,
}

impl Workload {
    pub fn from_ops(ops: Vec<Op>) -> Self {
        Self { ops, meta: None }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Writes one op per line (`I <key>` / `D <key>` / `P <key>` /
    /// `M <key>`), newline-terminated.
    pub fn write_to(&self, path: &Path) -> Result<(), HarnessError> {
        let mut out = BufWriter::new(File::create(path)?);
        for op in &self.ops {
            writeln!(out, "{op}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a workload file; blank lines are ignored.
    pub fn read_from(path: &Path) -> Result<Self, HarnessError> {
        let reader = BufReader::new(File::open(path)?);
        let mut ops = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let op = text
                .parse()
                .map_err(|()| HarnessError::ParseOp { line: idx + 1, text: text.to_string() })?;
            ops.push(op);
        }
        Ok(Self::from_ops(ops))
    }
}

/// Op-kind proportions, parsed from `i:d:p:m` (e.g. `1:1:2:2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mix {
    pub insert: u32,
    pub delete: u32,
    pub pred: u32,
    pub member: u32,
}

impl Mix {
    pub fn new(insert: u32, delete: u32, pred: u32, member: u32) -> Result<Self, HarnessError> {
        let mix = Self { insert, delete, pred, member };
        if mix.total() == 0 {
            return Err(HarnessError::BadMix(mix.to_string()));
        }
        Ok(mix)
    }

    fn total(&self) -> u64 {
        self.insert as u64 + self.delete as u64 + self.pred as u64 + self.member as u64
    }

    fn weight(&self, kind: OpKind) -> u32 {
        match kind {
            OpKind::Insert => self.insert,
            OpKind::Delete => self.delete,
            OpKind::Pred => self.pred,
            OpKind::Member => self.member,
        }
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.insert, self.delete, self.pred, self.member)
    }
}

impl FromStr for Mix {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::BadMix(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let mut w = [0u32; 4];
        for (slot, part) in w.iter_mut().zip(&parts) {
            *slot = part.trim().parse().map_err(|_| bad())?;
        }
        Mix::new(w[0], w[1], w[2], w[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Insert,
    Delete,
    Pred,
    Member,
}

const KIND_ORDER: [OpKind; 4] = [OpKind::Insert, OpKind::Delete, OpKind::Pred, OpKind::Member];

/// Everything a reproducible trial needs. `calib_dist` feeds construction
/// (calibration and initial fill); `op_dist` feeds workload keys, so
/// distribution-shift scenarios calibrate on one distribution and operate
/// under another.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub calib_dist: DistSpec,
    pub op_dist: DistSpec,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(engine: EngineConfig, dist: DistSpec, seed: u64) -> Self {
        Self { engine, calib_dist: dist.clone(), op_dist: dist, seed }
    }

    pub fn with_op_dist(mut self, dist: DistSpec) -> Self {
        self.op_dist = dist;
        self
    }

    fn stream_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Builds the engine for a trial: calibration and fill consume ChaCha
/// stream 0 of `cfg.seed`, so the result is a pure function of the config.
pub fn build_engine(cfg: &RunConfig) -> Result<Engine, HarnessError> {
    let mut source = cfg.calib_dist.sampler(cfg.engine.universe, cfg.stream_rng(0))?;
    Ok(preprocess(cfg.engine.clone(), &mut source)?)
}

/// Generates `length` ops against the engine's current contents.
///
/// Kinds are drawn in the `mix` proportions; insert keys come from
/// `cfg.op_dist` (fresh keys only — up to 64 draws per slot), deletions are
/// uniform over the keys stored at that point, and the occupancy band is
/// respected by construction: a kind that is infeasible at its slot (band
/// edge reached, or no fresh insert key found) falls back to the next
/// feasible kind with positive mix weight. A slot where nothing is feasible
/// is an `InfeasibleMix` error.
pub fn gen_workload(
    cfg: &RunConfig,
    engine: &Engine,
    length: usize,
    mix: Mix,
) -> Result<Workload, HarnessError> {
    let (floor, top) = engine.band();
    let mut shadow = OracleSet::from_sorted(engine.stored_keys());
    let mut keys = cfg.op_dist.sampler(cfg.engine.universe, cfg.stream_rng(1))?;
    let mut ctl = cfg.stream_rng(2);
    let total = mix.total();
    let mut ops = Vec::with_capacity(length);

    for slot in 0..length {
        let mut roll = ctl.gen_range(0..total);
        let mut chosen = OpKind::Member;
        for kind in KIND_ORDER {
            let w = mix.weight(kind) as u64;
            if roll < w {
                chosen = kind;
                break;
            }
            roll -= w;
        }
        let mut emitted = false;
        let candidates =
            std::iter::once(chosen).chain(KIND_ORDER.into_iter().filter(|&k| k != chosen));
        for kind in candidates {
            if mix.weight(kind) == 0 {
                continue;
            }
            match kind {
                OpKind::Insert => {
                    if shadow.len() as u64 + 1 >= top {
                        continue;
                    }
                    let Some(fresh) = (0..64).map(|_| keys.draw_key()).find(|&y| !shadow.member(y))
                    else {
                        continue;
                    };
                    shadow.insert(fresh).expect("membership just checked");
                    ops.push(Op::Insert(fresh));
                }
                OpKind::Delete => {
                    if shadow.is_empty() || shadow.len() as u64 - 1 < floor {
                        continue;
                    }
                    let victim =
                        shadow.key_at(ctl.gen_range(0..shadow.len())).expect("index in range");
                    shadow.delete(victim).expect("drawn from stored keys");
                    ops.push(Op::Delete(victim));
                }
                OpKind::Pred => ops.push(Op::Pred(keys.draw_key())),
                OpKind::Member => ops.push(Op::Member(keys.draw_key())),
            }
            emitted = true;
            break;
        }
        if !emitted {
            return Err(HarnessError::InfeasibleMix { at: slot });
        }
    }
    Ok(Workload {
        ops,
        meta: Some(WorkloadMeta {
            seed: cfg.seed,
            op_dist: cfg.op_dist.to_string(),
            c_min: cfg.engine.c_min,
            c_max: cfg.engine.smooth.c_max,
        }),
    })
}

/// Ops that delete every stored key in buckets `lo_bucket..hi_bucket`, then
/// probe the emptied range with predecessor and membership queries. Replay
/// drives the empty-bucket fallback; the caller keeps the deletion count
/// above the band floor.
pub fn bucket_drain_ops(engine: &Engine, lo_bucket: usize, hi_bucket: usize) -> Vec<Op> {
    let reps = engine.representatives();
    assert!(lo_bucket < hi_bucket && hi_bucket < reps.len(), "bucket range out of bounds");
    let lo = reps[lo_bucket];
    let hi = reps[hi_bucket];
    let mut ops: Vec<Op> =
        engine.stored_keys().into_iter().filter(|&k| lo <= k && k < hi).map(Op::Delete).collect();
    for i in lo_bucket..hi_bucket {
        let (a, b) = (reps[i], reps[i + 1]);
        ops.push(Op::Pred(a));
        ops.push(Op::Pred(a + (b - a) / 2));
        ops.push(Op::Pred(b - 1));
        ops.push(Op::Member(a + (b - a) / 2));
    }
    ops
}

/// Nearest-rank percentiles over per-op wall-clock times. Reported for
/// orientation only; no gate reads them.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatencySummary {
    pub p50_ns: u64,
    pub p90_ns: u64,
    pub p99_ns: u64,
    pub total_ns: u64,
}

impl LatencySummary {
    fn from_samples(mut samples: Vec<u64>, total_ns: u64) -> Self {
        if samples.is_empty() {
            return Self { total_ns, ..Self::default() };
        }
        samples.sort_unstable();
        let at =
            |pct: usize| samples[((samples.len() * pct / 100).max(1) - 1).min(samples.len() - 1)];
        Self { p50_ns: at(50), p90_ns: at(90), p99_ns: at(99), total_ns }
    }
}

/// Outcome of an oracle-checked replay.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub inserts: u64,
    pub deletes: u64,
    pub preds: u64,
    pub members: u64,
    /// Duplicate inserts / absent deletes on which engine and oracle agreed.
    pub rejected_inserts: u64,
    pub rejected_deletes: u64,
    pub stats: EngineStats,
    pub latency: LatencySummary,
}

impl RunReport {
    pub fn total_ops(&self) -> u64 {
        self.inserts
            + self.deletes
            + self.preds
            + self.members
            + self.rejected_inserts
            + self.rejected_deletes
    }
}

/// Rebuilds the engine for `cfg` and replays the workload against it and a
/// reference oracle in lockstep. Any divergence is an error: answer
/// mismatches are `Mismatch`, band overruns are `BandViolation` (a generated
/// workload never contains either). Event counters in the report cover the
/// replay only.
pub fn run(cfg: &RunConfig, workload: &Workload) -> Result<RunReport, HarnessError> {
    let mut engine = build_engine(cfg)?;
    let mut oracle = OracleSet::from_sorted(engine.stored_keys());
    engine.reset_event_counters();
    engine.static_index().reset_probe_counters();

    let mut report = RunReport {
        inserts: 0,
        deletes: 0,
        preds: 0,
        members: 0,
        rejected_inserts: 0,
        rejected_deletes: 0,
        stats: engine.stats(),
        latency: LatencySummary::default(),
    };
    let mut samples = Vec::with_capacity(workload.ops.len());
    let started = Instant::now();

    for (at, &op) in workload.ops.iter().enumerate() {
        let mismatch = |engine: String, oracle: String| HarnessError::Mismatch {
            at,
            op: op.to_string(),
            engine,
            oracle,
        };
        let t0 = Instant::now();
        match op {
            Op::Insert(k) => {
                let e = engine.insert(k);
                samples.push(t0.elapsed().as_nanos() as u64);
                match e {
                    Ok(()) => {
                        oracle
                            .insert(k)
                            .map_err(|_| mismatch("inserted".into(), "duplicate".into()))?;
                        report.inserts += 1;
                    }
                    Err(EngineError::Duplicate(_)) => {
                        oracle
                            .insert(k)
                            .map_ok_swapped(|| mismatch("duplicate".into(), "inserted".into()))?;
                        report.rejected_inserts += 1;
                    }
                    Err(e @ EngineError::BandFull { .. }) => {
                        return Err(HarnessError::BandViolation { at, op: e.to_string() })
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Op::Delete(k) => {
                let e = engine.delete(k);
                samples.push(t0.elapsed().as_nanos() as u64);
                match e {
                    Ok(()) => {
                        oracle
                            .delete(k)
                            .map_err(|_| mismatch("deleted".into(), "absent".into()))?;
                        report.deletes += 1;
                    }
                    Err(EngineError::Absent(_)) => {
                        oracle
                            .delete(k)
                            .map_ok_swapped(|| mismatch("absent".into(), "deleted".into()))?;
                        report.rejected_deletes += 1;
                    }
                    Err(e @ EngineError::BandEmpty { .. }) => {
                        return Err(HarnessError::BandViolation { at, op: e.to_string() })
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Op::Pred(k) => {
                let e = engine.pred(k)?;
                samples.push(t0.elapsed().as_nanos() as u64);
                let o = oracle.pred(k);
                if e != o {
                    return Err(mismatch(format!("{e:?}"), format!("{o:?}")));
                }
                report.preds += 1;
            }
            Op::Member(k) => {
                let e = engine.member(k)?;
                samples.push(t0.elapsed().as_nanos() as u64);
                let o = oracle.member(k);
                if e != o {
                    return Err(mismatch(e.to_string(), o.to_string()));
                }
                report.members += 1;
            }
        }
    }
    report.latency = LatencySummary::from_samples(samples, started.elapsed().as_nanos() as u64);
    report.stats = engine.stats();
    Ok(report)
}

/// Helper: convert `Ok` into the given error, pass `Err` through as success.
/// Used where the oracle must also reject for the outcomes to agree.
trait MapOkSwapped {
    fn map_ok_swapped<F: FnOnce() -> HarnessError>(self, err: F) -> Result<(), HarnessError>;
}

impl<E> MapOkSwapped for Result<(), E> {
    fn map_ok_swapped<F: FnOnce() -> HarnessError>(self, err: F) -> Result<(), HarnessError> {
        match self {
            Ok(()) => Err(err()),
            Err(_) => Ok(()),
        }
    }
}

/// One measured point of a probe/load/space sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub mode: String,
    pub seed: u64,
    pub kappa: u32,
    pub rho: usize,
    pub capacity: usize,
    pub index_bits: u32,
    pub num_parts: u64,
    pub mean_probes: f64,
    pub max_load: u32,
    pub min_load: u32,
    pub space_bits: u64,
}

/// Builds one engine per `(n, mode, seed)` from the template config, issues
/// `queries` predecessor queries with keys from `op_dist`, and records mean
/// static-index probes per query, extreme bucket loads, and index size.
pub fn sweep(
    template: &RunConfig,
    ns: &[usize],
    modes: &[KappaMode],
    seeds: &[u64],
    queries: usize,
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rows = Vec::with_capacity(ns.len() * modes.len() * seeds.len());
    for &n in ns {
        for &mode in modes {
            for &seed in seeds {
                let mut engine_cfg = template.engine.clone();
                engine_cfg.n = n;
                engine_cfg.kappa_mode = mode;
                let cfg = RunConfig { engine: engine_cfg, seed, ..template.clone() };
                let engine = build_engine(&cfg)?;
                engine.reset_event_counters();
                engine.static_index().reset_probe_counters();
                let mut keys = cfg.op_dist.sampler(cfg.engine.universe, cfg.stream_rng(3))?;
                for _ in 0..queries {
                    engine.pred(keys.draw_key())?;
                }
                let stats = engine.stats();
                debug_assert_eq!(stats.static_queries, queries as u64);
                rows.push(SweepRow {
                    n,
                    mode: mode.to_string(),
                    seed,
                    kappa: stats.kappa,
                    rho: stats.rho,
                    capacity: stats.capacity,
                    index_bits: stats.index_bits,
                    num_parts: stats.num_parts,
                    mean_probes: stats.static_probes as f64 / stats.static_queries.max(1) as f64,
                    max_load: stats.max_load,
                    min_load: stats.min_load,
                    space_bits: stats.static_space_bits,
                });
            }
        }
    }
    Ok(rows)
}

/// Fixed-order CSV for sweep rows; identical inputs produce identical bytes.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "n,mode,seed,kappa,rho,capacity,index_bits,num_parts,mean_probes,max_load,min_load,space_bits\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{},{},{}\n",
            r.n,
            r.mode,
            r.seed,
            r.kappa,
            r.rho,
            r.capacity,
            r.index_bits,
            r.num_parts,
            r.mean_probes,
            r.max_load,
            r.min_load,
            r.space_bits,
        ));
    }
    out
}

/// Fixed-order CSV of per-bucket loads for one engine state.
pub fn loads_csv(stats: &EngineStats) -> String {
    let mut out = String::from("bucket,load\n");
    for (i, &c) in stats.loads.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{SmoothParams, UniverseParams};
    use std::path::PathBuf;

    fn scratch(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("smoothpred-harness-{}-{name}", std::process::id()));
        p
    }

    fn base_cfg(n: usize, bits: u32, seed: u64) -> RunConfig {
        let engine = EngineConfig::new(
            n,
            UniverseParams::new(bits).unwrap(),
            SmoothParams::new(0.5, 1.0).unwrap(),
        );
        RunConfig::new(engine, DistSpec::Uniform, seed)
    }

    #[test]
    fn mix_parsing() {
        let mix: Mix = "1:2:3:4".parse().unwrap();
        assert_eq!(mix, Mix { insert: 1, delete: 2, pred: 3, member: 4 });
        assert_eq!(mix.to_string(), "1:2:3:4");
        assert!(matches!("0:0:0:0".parse::<Mix>(), Err(HarnessError::BadMix(_))));
        assert!(matches!("1:2:3".parse::<Mix>(), Err(HarnessError::BadMix(_))));
        assert!(matches!("a:1:1:1".parse::<Mix>(), Err(HarnessError::BadMix(_))));
        assert!(matches!("1:1:1:-1".parse::<Mix>(), Err(HarnessError::BadMix(_))));
    }

    #[test]
    fn workload_file_roundtrip() {
        let wl = Workload::from_ops(vec![
            Op::Insert(5),
            Op::Delete(5),
            Op::Pred(17),
            Op::Member(0),
            Op::Insert(u64::MAX / 2),
        ]);
        let path = scratch("roundtrip.ops");
        wl.write_to(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "I 5\nD 5\nP 17\nM 0\nI 9223372036854775807\n");
        let back = Workload::read_from(&path).unwrap();
        assert_eq!(back.ops, wl.ops);

        std::fs::write(&path, "I 5\nX 9\n").unwrap();
        match Workload::read_from(&path) {
            Err(HarnessError::ParseOp { line: 2, text }) => assert_eq!(text, "X 9"),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn generated_workload_respects_band_and_replays() {
        let cfg = base_cfg(256, 32, 11);
        let engine = build_engine(&cfg).unwrap();
        let (floor, top) = engine.band();
        let mix: Mix = "1:1:0:0".parse().unwrap();
        let wl = gen_workload(&cfg, &engine, 4000, mix).unwrap();
        assert_eq!(wl.len(), 4000);

        // The running count stays inside the band at every prefix.
        let mut n_t = engine.len() as i64;
        for op in &wl.ops {
            match op {
                Op::Insert(_) => n_t += 1,
                Op::Delete(_) => n_t -= 1,
                _ => {}
            }
            assert!(n_t as u64 >= floor && (n_t as u64) < top, "band left: n_t = {n_t}");
        }

        let report = run(&cfg, &wl).unwrap();
        assert_eq!(report.total_ops(), 4000);
        assert_eq!(report.rejected_inserts, 0);
        assert_eq!(report.rejected_deletes, 0);
        assert_eq!(report.stats.n_t, n_t as u64);
        assert!(report.latency.p50_ns <= report.latency.p99_ns);

        // Query-only mix leaves the stored count unchanged.
        let queries = gen_workload(&cfg, &engine, 500, "0:0:1:1".parse().unwrap()).unwrap();
        assert!(queries.ops.iter().all(|op| matches!(op, Op::Pred(_) | Op::Member(_))));
        let report = run(&cfg, &queries).unwrap();
        assert_eq!(report.stats.n_t, engine.len() as u64);
    }

    #[test]
    fn generation_and_replay_are_deterministic() {
        let cfg = base_cfg(128, 16, 77);
        let engine = build_engine(&cfg).unwrap();
        let mix: Mix = "2:1:2:1".parse().unwrap();
        let a = gen_workload(&cfg, &engine, 2000, mix).unwrap();
        let b = gen_workload(&cfg, &engine, 2000, mix).unwrap();
        assert_eq!(a, b);

        let pa = scratch("det-a.ops");
        let pb = scratch("det-b.ops");
        a.write_to(&pa).unwrap();
        b.write_to(&pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        std::fs::remove_file(&pa).unwrap();
        std::fs::remove_file(&pb).unwrap();

        let ra = run(&cfg, &a).unwrap();
        let rb = run(&cfg, &b).unwrap();
        assert_eq!(ra.stats.loads, rb.stats.loads);
        assert_eq!(ra.stats.n_t, rb.stats.n_t);
        assert_eq!(
            (ra.inserts, ra.deletes, ra.preds, ra.members),
            (rb.inserts, rb.deletes, rb.preds, rb.members)
        );
    }

    #[test]
    fn replay_counts_rejections_and_flags_band_violations() {
        let cfg = base_cfg(64, 16, 3);
        let engine = build_engine(&cfg).unwrap();
        let stored = engine.stored_keys();
        let absent = (0..).find(|k| !stored.contains(k)).unwrap();

        // Duplicate insert and absent delete: engine and oracle agree, so
        // both count as rejections rather than mismatches.
        let wl = Workload::from_ops(vec![
            Op::Insert(stored[0]),
            Op::Delete(absent),
            Op::Pred(stored[0]),
        ]);
        let report = run(&cfg, &wl).unwrap();
        assert_eq!(report.rejected_inserts, 1);
        assert_eq!(report.rejected_deletes, 1);
        assert_eq!(report.preds, 1);

        // Blowing past the band top is a workload error, not a mismatch.
        let (_, top) = engine.band();
        let room = (top - 1 - engine.len() as u64) as usize;
        let mut ops: Vec<Op> =
            (0..).filter(|k| !stored.contains(k)).take(room + 1).map(Op::Insert).collect();
        assert_eq!(ops.len(), room + 1);
        let wl = Workload::from_ops(std::mem::take(&mut ops));
        match run(&cfg, &wl) {
            Err(HarnessError::BandViolation { at, .. }) => assert_eq!(at, room),
            other => panic!("expected band violation, got {other:?}"),
        }
    }

    #[test]
    fn delete_only_mix_at_band_floor_is_infeasible() {
        let mut cfg = base_cfg(64, 16, 5);
        cfg.engine.c_min = 1.0; // floor == n: no delete is ever legal
        let engine = build_engine(&cfg).unwrap();
        match gen_workload(&cfg, &engine, 10, "0:1:0:0".parse().unwrap()) {
            Err(HarnessError::InfeasibleMix { at: 0 }) => {}
            other => panic!("expected infeasible mix, got {other:?}"),
        }
    }

    #[test]
    fn point_mass_op_dist_falls_back_to_queries() {
        let cfg = base_cfg(64, 16, 9).with_op_dist(DistSpec::Spiky { spikes: 1, mass: 1.0 });
        let engine = build_engine(&cfg).unwrap();
        // Insert-or-query mix: after the single spike key is stored, every
        // insert slot runs out of fresh keys and degrades to a query.
        let wl = gen_workload(&cfg, &engine, 300, "1:0:1:0".parse().unwrap()).unwrap();
        let inserts = wl.ops.iter().filter(|op| matches!(op, Op::Insert(_))).count();
        assert!(inserts <= 1, "point mass yielded {inserts} distinct inserts");
        let report = run(&cfg, &wl).unwrap();
        assert_eq!(report.total_ops(), 300);
    }

    #[test]
    fn draining_buckets_trips_the_empty_fallback() {
        let cfg = base_cfg(1024, 32, 21);
        let engine = build_engine(&cfg).unwrap();
        let ops = bucket_drain_ops(&engine, 3, 7);
        assert!(ops.iter().any(|op| matches!(op, Op::Delete(_))));
        let report = run(&cfg, &Workload::from_ops(ops)).unwrap();
        assert!(report.stats.empty_events > 0, "drained range never hit the empty fallback");
        assert_eq!(report.rejected_deletes, 0);
    }

    #[test]
    fn sweep_emits_stable_csv() {
        let cfg = base_cfg(1 << 10, 32, 1);
        let ns = [1 << 10, 1 << 11];
        let modes = [KappaMode::TriLog];
        let seeds = [1, 2];
        let rows = sweep(&cfg, &ns, &modes, &seeds, 2000).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.mean_probes >= 1.0, "every query probes at least the root");
            assert!(r.space_bits > 0);
            assert!(r.max_load >= r.min_load);
        }
        let csv_a = sweep_csv(&rows);
        let rows_b = sweep(&cfg, &ns, &modes, &seeds, 2000).unwrap();
        assert_eq!(csv_a, sweep_csv(&rows_b));
        assert_eq!(csv_a.lines().count(), 5);
        assert!(csv_a.starts_with("n,mode,seed,"));
    }
}
