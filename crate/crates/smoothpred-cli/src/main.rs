//! Experiment driver for the smooth-input predecessor structure.
//!
//! Every subcommand is deterministic given its flags; any oracle mismatch or
//! invalid input exits nonzero with a diagnostic on stderr.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use smoothpred::engine::EngineConfig;
use smoothpred::harness::{
    bucket_drain_ops, build_engine, gen_workload, loads_csv, run, sweep, sweep_csv, Mix, RunConfig,
    RunReport, Workload,
};
use smoothpred::partition::{SmoothParams, UniverseParams};
use smoothpred::sampler::{estimate_beta, DistSpec, F2};
use smoothpred::static_pred::KappaMode;

#[derive(Parser)]
#[command(
    name = "smoothpred",
    version,
    about = "Predecessor-search experiments: oracle checks, load and probe statistics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a mixed workload against the structure and a reference oracle
    Verify(VerifyArgs),
    /// Report per-bucket load statistics after update churn
    Loads(LoadsArgs),
    /// Sweep mean probe counts and index size across n and kappa modes
    Probes(ProbesArgs),
    /// Estimate the smoothness constant of a distribution spec
    Smoothness(SmoothnessArgs),
    /// Measure wall-clock latency percentiles (informational only)
    Bench(BenchArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Calibration size: keys drawn during construction
    #[arg(long, default_value_t = 1 << 14)]
    n: usize,
    /// Universe bit width b; keys live in [0, 2^b)
    #[arg(long, default_value_t = 32)]
    bits: u32,
    /// Smoothness mass exponent: f2(n) = n^alpha
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Smoothness window exponent: f1(n) = n^gamma
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Representative spacing constant: one representative per c4*log2(n) keys
    #[arg(long, default_value_t = 2.0)]
    c4: f64,
    /// Bucket capacity constant: capacity = ceil(c_cap*log2(n)); default 4*c4
    #[arg(long)]
    c_cap: Option<f64>,
    /// Index trade-off: const:<delta> | trilog | linspace
    #[arg(long, default_value = "trilog")]
    kappa_mode: KappaMode,
    /// Operational key distribution: uniform | piecewise:p,w;... | spiky:k,m | zipf:s
    #[arg(long, default_value = "uniform", value_parser = DistSpec::parse)]
    dist: DistSpec,
    /// Calibration distribution; defaults to --dist
    #[arg(long, value_parser = DistSpec::parse)]
    calib_dist: Option<DistSpec>,
    /// Occupancy band constants cmin:cmax; stored count stays in [cmin*n, cmax*n)
    #[arg(long, default_value = "0.5:2")]
    band: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Keep the calibration sample as the initial store instead of redrawing
    #[arg(long)]
    keep_calibration: bool,
    /// Run the full accounting scan after every update (slow)
    #[arg(long)]
    debug_checks: bool,
}

impl CommonArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let (c_min, c_max) = parse_band(&self.band)?;
        let universe = UniverseParams::new(self.bits)?;
        let smooth = SmoothParams::new(self.alpha, self.gamma)?.with_c_max(c_max)?;
        let engine = EngineConfig {
            c4: self.c4,
            kappa_mode: self.kappa_mode,
            c_cap: self.c_cap,
            c_min,
            keep_calibration: self.keep_calibration,
            debug_checks: self.debug_checks,
            ..EngineConfig::new(self.n, universe, smooth)
        };
        let cfg = RunConfig::new(engine, self.dist.clone(), self.seed);
        Ok(match &self.calib_dist {
            Some(d) => RunConfig { calib_dist: d.clone(), ..cfg },
            None => cfg,
        })
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of operations to replay
    #[arg(long, default_value_t = 100_000)]
    ops: usize,
    /// Op proportions insert:delete:pred:member
    #[arg(long, default_value = "1:1:1:1")]
    mix: Mix,
    /// Replay this workload file instead of generating one
    #[arg(long)]
    workload_in: Option<PathBuf>,
    /// Write the replayed workload to this file
    #[arg(long)]
    workload_out: Option<PathBuf>,
    /// Before the mixed ops, drain this bucket range ("lo..hi") to exercise
    /// the empty-bucket fallback
    #[arg(long)]
    drain_buckets: Option<String>,
}

#[derive(Args)]
struct LoadsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Round-robin insert/delete steps before measuring; defaults to n
    #[arg(long)]
    updates: Option<usize>,
    /// Write the per-bucket load table here as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ProbesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated calibration sizes
    #[arg(long, default_value = "1024,4096,16384,65536,262144")]
    n_list: String,
    /// Comma-separated kappa modes
    #[arg(long, default_value = "const:1,trilog,linspace")]
    kappa_modes: String,
    /// Comma-separated seeds; one engine per (n, mode, seed)
    #[arg(long, default_value = "1,2,3")]
    seeds: String,
    /// Predecessor queries per engine
    #[arg(long, default_value_t = 10_000)]
    queries: usize,
    /// Write the sweep table here; stdout when omitted
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Defaults form a self-consistent resolution: on a 256-point step-1 grid
/// with gamma = 0.5, the widest window spans ~16 support points.
#[derive(Args)]
struct SmoothnessArgs {
    /// Distribution spec to analyze
    #[arg(long, default_value = "uniform", value_parser = DistSpec::parse)]
    dist: DistSpec,
    /// Universe bit width
    #[arg(long, default_value_t = 8)]
    bits: u32,
    /// Window exponent gamma
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Mass exponent alpha for f2(n) = n^alpha
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Use f2(n) = n instead of n^alpha (every distribution is smooth then)
    #[arg(long)]
    f2_linear: bool,
    /// Support points for the brute-force scan (cubic cost; <= 512)
    #[arg(long, default_value_t = 256)]
    grid: u64,
    /// Comma-separated n values to maximize over
    #[arg(long, default_value = "256")]
    n_list: String,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 100_000)]
    ops: usize,
    #[arg(long, default_value = "1:1:1:1")]
    mix: Mix,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Loads(a) => cmd_loads(a),
        Cmd::Probes(a) => cmd_probes(a),
        Cmd::Smoothness(a) => cmd_smoothness(a),
        Cmd::Bench(a) => cmd_bench(a),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let engine = build_engine(&cfg)?;
    let mut ops = Vec::new();
    if let Some(range) = &args.drain_buckets {
        let (lo, hi) = parse_bucket_range(range, engine.bucket_count())?;
        ops.extend(bucket_drain_ops(&engine, lo, hi));
    }
    let workload = match &args.workload_in {
        Some(path) => {
            let wl = Workload::read_from(path)
                .with_context(|| format!("reading workload {}", path.display()))?;
            if !ops.is_empty() {
                bail!("--drain-buckets cannot be combined with --workload-in");
            }
            wl
        }
        None => {
            let mut wl = gen_workload(&cfg, &engine, args.ops, args.mix)?;
            ops.extend(std::mem::take(&mut wl.ops));
            Workload { ops, meta: wl.meta }
        }
    };
    if let Some(path) = &args.workload_out {
        workload.write_to(path)?;
    }
    let report = run(&cfg, &workload)?;
    print_report(&report);
    println!(
        "verify: OK — {} ops replayed against the oracle with zero mismatches",
        report.total_ops()
    );
    Ok(())
}

fn cmd_loads(args: LoadsArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let engine = build_engine(&cfg)?;
    let updates = args.updates.unwrap_or(cfg.engine.n);
    let workload = gen_workload(&cfg, &engine, updates, Mix::new(1, 1, 0, 0)?)?;
    let report = run(&cfg, &workload)?;
    let s = &report.stats;
    let log2n = (cfg.engine.n as f64).log2();
    println!(
        "loads: n = {}, buckets = {}, capacity = {}, after {} update steps",
        cfg.engine.n, s.rho, s.capacity, updates
    );
    println!(
        "  max load = {} ({:.2} * log2 n), min load = {} ({:.2} * log2 n)",
        s.max_load,
        s.max_load as f64 / log2n,
        s.min_load,
        s.min_load as f64 / log2n
    );
    println!(
        "  overflow events = {}, empty-bucket events = {}, transfers = {}",
        s.overflow_events, s.empty_events, s.transfer_events
    );
    if let Some(path) = &args.csv {
        std::fs::write(path, loads_csv(s))?;
        println!("  per-bucket loads written to {}", path.display());
    }
    Ok(())
}

fn cmd_probes(args: ProbesArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let ns = parse_list::<usize>(&args.n_list).context("--n-list")?;
    let seeds = parse_list::<u64>(&args.seeds).context("--seeds")?;
    let modes = args
        .kappa_modes
        .split(',')
        .map(|s| s.trim().parse::<KappaMode>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()
        .context("--kappa-modes")?;
    let rows = sweep(&cfg, &ns, &modes, &seeds, args.queries)?;
    let csv = sweep_csv(&rows);
    match &args.csv {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("probes: {} rows written to {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_smoothness(args: SmoothnessArgs) -> Result<()> {
    let universe = UniverseParams::new(args.bits)?;
    let dist = args.dist.materialize(universe, args.grid)?;
    let f2 = if args.f2_linear { F2::Linear } else { F2::Power(args.alpha) };
    let n_list = parse_list::<u64>(&args.n_list).context("--n-list")?;
    // The scan only sees mass that a window [c2 - span/n^gamma, c2) can
    // cover. When even the widest window is narrower than one support step,
    // every window is empty and the estimate degenerates to 0.
    let support = dist.support();
    let max_span = (support[support.len() - 1] - support[0]) as f64;
    let min_step = support.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(1) as f64;
    let min_n = n_list.iter().copied().min().unwrap_or(1) as f64;
    if max_span / min_n.powf(args.gamma) < min_step {
        eprintln!(
            "warning: windows are narrower than the support step ({} points over span {}); \
             the estimate will be 0 — raise --grid or lower --gamma/--n-list",
            support.len(),
            max_span
        );
    }
    let beta = estimate_beta(&dist, args.gamma, f2, &n_list)?;
    let f2_name = if args.f2_linear { "n".into() } else { format!("n^{}", args.alpha) };
    println!(
        "smoothness: beta = {beta:.6} for {} (gamma = {}, f2 = {f2_name}, grid = {}, n in {:?})",
        args.dist, args.gamma, args.grid, n_list
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = args.common.run_config()?;
    let engine = build_engine(&cfg)?;
    let workload = gen_workload(&cfg, &engine, args.ops, args.mix)?;
    let report = run(&cfg, &workload)?;
    let l = &report.latency;
    let secs = l.total_ns as f64 / 1e9;
    println!(
        "bench: {} ops in {:.3} s ({:.0} ops/s), oracle checks included",
        report.total_ops(),
        secs,
        report.total_ops() as f64 / secs
    );
    println!(
        "  per-op latency p50 = {} ns, p90 = {} ns, p99 = {} ns (informational; probe counters are the portable measure)",
        l.p50_ns, l.p90_ns, l.p99_ns
    );
    print_report(&report);
    Ok(())
}

fn print_report(report: &RunReport) {
    let s = &report.stats;
    println!(
        "  ops: {} inserts, {} deletes, {} pred, {} member ({} duplicate inserts, {} absent deletes)",
        report.inserts, report.deletes, report.preds, report.members, report.rejected_inserts,
        report.rejected_deletes
    );
    println!(
        "  stored = {}, buckets = {}, loads in [{}, {}], capacity = {}",
        s.n_t, s.rho, s.min_load, s.max_load, s.capacity
    );
    println!(
        "  events: b1 = {}, b2 = {}, overflow = {}, empty = {}, transfer = {}",
        s.b1_touches, s.b2_touches, s.overflow_events, s.empty_events, s.transfer_events
    );
    if s.static_queries > 0 {
        println!(
            "  static index: {:.3} probes/query over {} queries, {} bits, kappa = {}",
            s.static_probes as f64 / s.static_queries as f64,
            s.static_queries,
            s.static_space_bits,
            s.kappa
        );
    }
}

fn parse_band(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(':').context("--band wants cmin:cmax (e.g. 0.5:2)")?;
    let c_min: f64 = lo.trim().parse().context("--band cmin")?;
    let c_max: f64 = hi.trim().parse().context("--band cmax")?;
    Ok((c_min, c_max))
}

fn parse_bucket_range(s: &str, buckets: usize) -> Result<(usize, usize)> {
    let (lo, hi) = s.split_once("..").context("--drain-buckets wants lo..hi")?;
    let lo: usize = lo.trim().parse().context("--drain-buckets lo")?;
    let hi: usize = hi.trim().parse().context("--drain-buckets hi")?;
    if lo >= hi || hi > buckets {
        bail!("--drain-buckets {lo}..{hi} out of range (structure has {buckets} buckets)");
    }
    Ok((lo, hi))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',').map(|item| item.trim().parse::<T>().map_err(Into::into)).collect()
}
