//! Randomized end-to-end properties. Op tapes are replayed against the
//! sorted-vec oracle with full invariant checking switched on, so every case
//! validates answers, rejection symmetry, counter bookkeeping, and fallback
//! attribution at once.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};

use proptest::prelude::*;
use smoothpred::engine::EngineConfig;
use smoothpred::harness::{run, Op, RunConfig, Workload};
use smoothpred::partition::{SmoothParams, UniverseParams};
use smoothpred::sampler::DistSpec;

fn decode(kind: u8, key: u64) -> Op {
    match kind % 4 {
        0 => Op::Insert(key),
        1 => Op::Delete(key),
        2 => Op::Pred(key),
        _ => Op::Member(key),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Any in-band op tape over a small universe replays cleanly: `run`
    /// errors on the first answer divergence, asymmetric rejection, band
    /// breach, or structural invariant failure, so `Ok` is the property.
    /// Tiny bucket capacity keeps the overflow and transfer paths hot.
    #[test]
    fn arbitrary_tapes_match_the_oracle(
        seed in 0u64..1 << 32,
        raw_ops in proptest::collection::vec((0u8..4, 0u64..1 << 16), 1..400),
    ) {
        let universe = UniverseParams::new(16).unwrap();
        let mut engine_cfg =
            EngineConfig::new(64, universe, SmoothParams::new(0.5, 1.0).unwrap());
        engine_cfg.c_cap = Some(1.0);
        engine_cfg.debug_checks = true;
        let cfg = RunConfig::new(engine_cfg, DistSpec::Uniform, seed);

        // Keep the tape inside the occupancy band by simulating the stored
        // set: updates that the engine would reject as duplicate/absent do
        // not move n_t and stay in the tape (rejection must agree on both
        // sides); updates that would breach the band are dropped.
        let engine = smoothpred::harness::build_engine(&cfg).unwrap();
        let mut shadow: BTreeSet<u64> = engine.stored_keys().into_iter().collect();
        let (floor, top) = engine.band();
        let mut ops = Vec::with_capacity(raw_ops.len());
        for (kind, key) in raw_ops {
            let op = decode(kind, key);
            match op {
                Op::Insert(k) if !shadow.contains(&k) => {
                    if shadow.len() as u64 + 1 < top {
                        shadow.insert(k);
                        ops.push(op);
                    }
                }
                Op::Delete(k) if shadow.contains(&k) => {
                    if shadow.len() as u64 - 1 >= floor {
                        shadow.remove(&k);
                        ops.push(op);
                    }
                }
                _ => ops.push(op),
            }
        }

        let total = ops.len() as u64;
        let report = run(&cfg, &Workload::from_ops(ops)).unwrap();
        prop_assert_eq!(report.total_ops(), total);
    }

    /// Workload files round-trip through write/read for arbitrary tapes,
    /// including keys far outside any engine's universe.
    #[test]
    fn workload_files_round_trip(
        raw_ops in proptest::collection::vec((0u8..4, any::<u64>()), 0..200),
    ) {
        static CASE: AtomicU64 = AtomicU64::new(0);
        let ops: Vec<Op> = raw_ops.into_iter().map(|(k, key)| decode(k, key)).collect();
        let path = std::env::temp_dir().join(format!(
            "smoothpred-roundtrip-{}-{}.ops",
            std::process::id(),
            CASE.fetch_add(1, Ordering::Relaxed),
        ));
        let workload = Workload::from_ops(ops.clone());
        workload.write_to(&path).unwrap();
        let back = Workload::read_from(&path).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(back.ops, ops);
    }
}
