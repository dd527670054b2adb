//! Build the structure over a uniform calibration sample, run a few
//! operations by hand, and print the resulting shape.

use smoothpred::engine::EngineConfig;
use smoothpred::harness::{build_engine, RunConfig};
use smoothpred::partition::{SmoothParams, UniverseParams};
use smoothpred::sampler::DistSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 32-bit keys; calibration draws 4096 keys from a uniform source.
    let universe = UniverseParams::new(32)?;
    let smooth = SmoothParams::new(0.5, 1.0)?;
    let cfg = EngineConfig::new(4096, universe, smooth);
    let mut engine = build_engine(&RunConfig::new(cfg, DistSpec::Uniform, 7))?;

    engine.insert(123_456)?;
    assert!(engine.member(123_456)?);
    // pred(y) is the largest stored key <= y.
    assert!(engine.pred(123_457)? >= Some(123_456));
    engine.delete(123_456)?;

    let stats = engine.stats();
    println!(
        "{} keys in {} buckets; loads in [{}, {}]; {} parts behind a {}-bit static index",
        stats.n_t,
        stats.loads.len(),
        stats.min_load,
        stats.max_load,
        stats.num_parts,
        stats.static_space_bits,
    );
    Ok(())
}
