use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use rogue_walk::experiment::{
    estimate_wc_with_progress, fit_power_law, linspace, run_ensemble, run_sweep, CriticalDisorder,
    EnsembleConfig, Estimate, HistogramBinning, PowerLawFit, RunLength, SweepMetadata,
};
use rogue_walk::output::{
    write_ensemble_csv, write_sweep_csv, OutputBundle, RunManifest, Timings, MANIFEST_FILE,
};
use rogue_walk::rogue::{
    analyze_table, detect_events, snapshot_thresholds, EventCsvWriter, EventFractions,
    RogueThreshold,
};
use rogue_walk::{
    CoinAngle, DisorderStrength, Error, FractionMode, PhaseCoupling, PhaseField, Result, SeedSpec,
    SpaceTimeTable, WalkState,
};

#[derive(Debug, Parser)]
#[command(
    name = "rogue-walk",
    version,
    about = "Rogue amplitudes in phase-disordered discrete-time quantum walks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one realization and write its space-time table, threshold,
    /// events and histogram
    Run(RunArgs),
    /// Aggregate many seeded realizations at one (theta, W, N)
    Ensemble(EnsembleArgs),
    /// Ensembles over a grid of theta, W and N
    Sweep(SweepArgs),
    /// Critical disorder W_c for several sizes plus a power-law fit
    Scaling(ScalingArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("coin").required(true).args(["theta", "theta_pi"])))]
pub struct CoinArgs {
    /// Coin angle in radians, within [0, pi/2]
    #[arg(long, value_parser = parse_theta)]
    pub theta: Option<CoinAngle>,
    /// Coin angle as a multiple of pi (0.25 is the Hadamard coin)
    #[arg(long, value_parser = parse_theta_pi)]
    pub theta_pi: Option<CoinAngle>,
}

impl CoinArgs {
    fn coin(&self) -> CoinAngle {
        self.theta
            .or(self.theta_pi)
            .expect("clap enforces one coin flag")
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed; every random draw derives from it
    #[arg(long)]
    pub seed: u64,
    /// Record every k-th step
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Draw one phase per site shared by both coin states
    #[arg(long)]
    pub site_locked_phases: bool,
    /// Histogram bin count
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// Upper histogram edge in units of the mean probability 1/N
    #[arg(long, default_value_t = 10.0)]
    pub hist_max: f64,
    /// Log-spaced histogram bins starting at --hist-min / N
    #[arg(long)]
    pub log_bins: bool,
    /// Lower edge for --log-bins, in units of 1/N
    #[arg(long, default_value_t = 0.01)]
    pub hist_min: f64,
    /// Add wall-clock timings to the manifest (makes reruns differ)
    #[arg(long)]
    pub record_timings: bool,
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl CommonArgs {
    fn binning(&self) -> HistogramBinning {
        if self.log_bins {
            HistogramBinning::Log {
                lower_over_mean: self.hist_min,
                upper_over_mean: self.hist_max,
                bins: self.bins as usize,
            }
        } else {
            HistogramBinning::Linear {
                upper_over_mean: self.hist_max,
                bins: self.bins as usize,
            }
        }
    }

    fn coupling(&self) -> PhaseCoupling {
        if self.site_locked_phases {
            PhaseCoupling::SiteLocked
        } else {
            PhaseCoupling::Independent
        }
    }
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Realizations per ensemble
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub realizations: u64,
    /// Fraction reported as the headline value
    #[arg(long, default_value = "timestep", value_parser = parse_mode)]
    pub fraction_mode: FractionMode,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub coin: CoinArgs,
    /// Disorder strength W
    #[arg(long, value_parser = parse_w)]
    pub w: DisorderStrength,
    /// Number of sites N
    #[arg(long, value_parser = parse_sites)]
    pub sites: usize,
    /// Time steps (default 100 N)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: Option<u64>,
    /// Realization stream index
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
    /// Comma-separated times whose full profile goes to snapshots.csv
    #[arg(long, value_delimiter = ',')]
    pub snapshot_times: Vec<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub coin: CoinArgs,
    /// Disorder strength W
    #[arg(long, value_parser = parse_w)]
    pub w: DisorderStrength,
    /// Number of sites N
    #[arg(long, value_parser = parse_sites)]
    pub sites: usize,
    /// Time steps (default 100 N)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: Option<u64>,
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("thetas").required(true).args(["theta_grid", "theta_pi_grid"])))]
pub struct SweepArgs {
    /// Coin grid in radians: `lo:hi:count`, `a,b,c` or a single value
    #[arg(long, value_parser = parse_grid)]
    pub theta_grid: Option<Grid>,
    /// Coin grid in multiples of pi
    #[arg(long, value_parser = parse_grid)]
    pub theta_pi_grid: Option<Grid>,
    /// Disorder grid: `lo:hi:count`, `a,b,c` or a single value
    #[arg(long, value_parser = parse_grid)]
    pub w_grid: Grid,
    /// Comma-separated chain sizes
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_sites)]
    pub sites: Vec<usize>,
    /// Fixed step count for every size
    #[arg(long, conflicts_with = "steps_per_site", value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: Option<u64>,
    /// Steps per site, t = k N
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps_per_site: u64,
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub coin: CoinArgs,
    /// Comma-separated chain sizes (at least 3)
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_sites)]
    pub sizes: Vec<usize>,
    /// Ascending disorder scan: `lo:hi:count` or `a,b,c`
    #[arg(long, value_parser = parse_grid, required_unless_present = "synthetic_prefactor")]
    pub w_scan: Option<Grid>,
    /// Mean event fraction above which rogue events count as present
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Steps per site, t = k N
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps_per_site: u64,
    /// Test hook: skip simulation and use W_c = prefactor / sqrt(N)
    #[arg(long, hide = true)]
    pub synthetic_prefactor: Option<f64>,
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Strictly increasing list of grid values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid(pub Vec<f64>);

fn parse_theta(s: &str) -> std::result::Result<CoinAngle, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    CoinAngle::new(v).map_err(|e| e.to_string())
}

fn parse_theta_pi(s: &str) -> std::result::Result<CoinAngle, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    CoinAngle::from_pi_fraction(v).map_err(|e| e.to_string())
}

fn parse_w(s: &str) -> std::result::Result<DisorderStrength, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    DisorderStrength::new(v).map_err(|e| e.to_string())
}

fn parse_sites(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 2 {
        return Err(Error::InvalidSize(n).to_string());
    }
    Ok(n)
}

fn parse_mode(s: &str) -> std::result::Result<FractionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(format!("expected lo:hi:count, got `{s}`"));
        };
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("bad point count `{count}`"))?;
        if count == 0 {
            return Err("grid needs at least one point".into());
        }
        linspace(num(lo)?, num(hi)?, count)
    } else {
        s.split(',')
            .map(num)
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format!("grid `{s}` has non-finite values"));
    }
    if values.windows(2).any(|p| p[0] >= p[1]) {
        return Err(format!("grid `{s}` must be strictly increasing"));
    }
    Ok(Grid(values))
}

/// Error plus the exit code it maps to.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_usage() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

pub fn execute(cli: Cli) -> std::result::Result<(), Failure> {
    let threads = match &cli.command {
        Command::Run(a) => a.common.threads,
        Command::Ensemble(a) => a.common.threads,
        Command::Sweep(a) => a.common.threads,
        Command::Scaling(a) => a.common.threads,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure {
            code: 3,
            message: e.to_string(),
        })?;
    pool.install(|| match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Scaling(a) => cmd_scaling(a),
    })
}

fn timings(common: &CommonArgs, start: Instant) -> Option<Timings> {
    common.record_timings.then(|| Timings {
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

fn base_config(
    coin: CoinAngle,
    w: DisorderStrength,
    n_sites: usize,
    run_length: RunLength,
    realizations: u64,
    fraction_mode: FractionMode,
    common: &CommonArgs,
) -> Result<EnsembleConfig> {
    let mut config = EnsembleConfig::new(coin, w, n_sites, common.seed)
        .with_realizations(realizations)
        .with_run_length(run_length);
    config.record_stride = common.stride;
    config.fraction_mode = fraction_mode;
    config.phase_coupling = common.coupling();
    config.histogram = common.binning();
    config.validate()?;
    if w.exceeds_full_circle() {
        eprintln!(
            "warning: W = {} exceeds 0.5; phases already cover the full circle at 0.5",
            w.value()
        );
    }
    Ok(config)
}

#[derive(Serialize)]
struct RunConfig<'a> {
    ensemble: &'a EnsembleConfig,
    steps: u64,
    realization: u64,
    snapshot_times: &'a [u64],
}

#[derive(Serialize)]
struct ThresholdReport {
    manifest: &'static str,
    realization: u64,
    p_bar_third: f64,
    p_th: f64,
    fractions: EventFractions,
    event_count: u64,
    cells: u64,
    max_probability: f64,
}

fn cmd_run(args: RunArgs) -> std::result::Result<(), Failure> {
    let start = Instant::now();
    let common = &args.common;
    let run_length = args.steps.map_or(RunLength::PerSite(100), RunLength::Fixed);
    let config = base_config(
        args.coin.coin(),
        args.w,
        args.sites,
        run_length,
        1,
        FractionMode::Timestep,
        common,
    )?;
    let steps = config.steps();
    let snapshots: BTreeSet<u64> = args.snapshot_times.iter().copied().collect();
    if let Some(&t) = snapshots.iter().find(|&&t| t == 0 || t > steps) {
        return Err(usage(format!(
            "--snapshot-times: time {t} is outside 1..={steps}"
        )));
    }

    let run_config = RunConfig {
        ensemble: &config,
        steps,
        realization: args.realization,
        snapshot_times: &args.snapshot_times,
    };
    let manifest = RunManifest::new(
        "run",
        common.seed,
        config.fraction_mode.as_str(),
        &run_config,
    )?;
    let mut bundle = OutputBundle::create(&common.out, manifest)?;

    let seed = SeedSpec::new(config.master_seed, args.realization);
    let field = PhaseField::generate(config.n_sites, config.w, seed, config.phase_coupling)?;
    bundle.write_file("field.csv", |out| field.write_csv(out))?;

    let mut table =
        SpaceTimeTable::try_with_rows(config.n_sites, (steps / config.record_stride) as usize)?;
    let mut snapshot_table = SpaceTimeTable::new(config.n_sites);
    let mut state = WalkState::initial(config.n_sites)?;
    let stride = config.record_stride;
    state.evolve(config.theta, &field, steps, 1, &mut |t: u64, p: &[f64]| {
        if t.is_multiple_of(stride) {
            table.push(t, p);
        }
        if snapshots.contains(&t) {
            snapshot_table.push(t, p);
        }
    })?;

    bundle.write_file("probabilities.csv", |out| table.write_csv(out))?;
    let threshold = rogue_walk::compute_threshold(table.values())?;
    let events = detect_events(&table, &threshold);
    bundle.write_file("events.csv", |out| {
        let mut w = EventCsvWriter::new(out)?;
        w.write_events(args.realization, &events)?;
        w.finish()
    })?;
    let analysis = analyze_table(table, &config.histogram.spec(config.n_sites))?;
    bundle.write_file("histogram.csv", |out| analysis.histogram.write_csv(out))?;
    bundle.write_json(
        "threshold.json",
        &ThresholdReport {
            manifest: MANIFEST_FILE,
            realization: args.realization,
            p_bar_third: threshold.p_bar_third,
            p_th: threshold.p_th,
            fractions: analysis.fractions,
            event_count: analysis.event_count,
            cells: analysis.cells,
            max_probability: analysis.max_probability,
        },
    )?;
    if !snapshot_table.is_empty() {
        let per_snapshot = snapshot_thresholds(&snapshot_table)?;
        bundle.write_file("snapshots.csv", |out| {
            write_snapshots(out, &snapshot_table, &per_snapshot, &threshold)
        })?;
    }
    bundle.finish(timings(common, start))?;
    Ok(())
}

/// `t,site,probability,p_th,snapshot_p_th`: the run-wide threshold and the
/// one computed from that snapshot alone.
fn write_snapshots<W: std::io::Write>(
    out: W,
    table: &SpaceTimeTable,
    per_snapshot: &[RogueThreshold],
    run_threshold: &RogueThreshold,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "site", "probability", "p_th", "snapshot_p_th"])?;
    let p_th = run_threshold.p_th.to_string();
    for ((t, row), th) in table.rows().zip(per_snapshot) {
        let (t, snap) = (t.to_string(), th.p_th.to_string());
        for (site, p) in row.iter().enumerate() {
            wtr.write_record([t.as_str(), &site.to_string(), &p.to_string(), &p_th, &snap])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryReport<'a> {
    manifest: &'static str,
    config: &'a EnsembleConfig,
    summary: &'a rogue_walk::EnsembleSummary,
}

fn cmd_ensemble(args: EnsembleArgs) -> std::result::Result<(), Failure> {
    let start = Instant::now();
    let common = &args.common;
    let run_length = args.steps.map_or(RunLength::PerSite(100), RunLength::Fixed);
    let config = base_config(
        args.coin.coin(),
        args.w,
        args.sites,
        run_length,
        args.pool.realizations,
        args.pool.fraction_mode,
        common,
    )?;
    let manifest = RunManifest::new(
        "ensemble",
        common.seed,
        config.fraction_mode.as_str(),
        &config,
    )?;
    let mut bundle = OutputBundle::create(&common.out, manifest)?;
    let summary = run_ensemble(&config)?;
    bundle.write_json(
        "summary.json",
        &SummaryReport {
            manifest: MANIFEST_FILE,
            config: &config,
            summary: &summary,
        },
    )?;
    bundle.write_file("summary.csv", |out| {
        write_ensemble_csv(out, &config, &summary)
    })?;
    bundle.write_file("histogram.csv", |out| {
        summary.pooled_histogram.write_csv(out)
    })?;
    bundle.finish(timings(common, start))?;
    Ok(())
}

#[derive(Serialize)]
struct SweepConfig<'a> {
    base: &'a EnsembleConfig,
    theta_grid: &'a [f64],
    w_grid: &'a [f64],
    sites: &'a [usize],
}

#[derive(Serialize)]
struct SweepCellReport {
    theta: f64,
    w: f64,
    n: usize,
    fraction_timestep: Estimate,
    fraction_cell: Estimate,
    fraction_realization: Estimate,
    p_max: Estimate,
    threshold_mean: f64,
    event_count_total: u64,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    manifest: &'static str,
    theta_axis: &'a [f64],
    w_axis: &'a [f64],
    n_axis: &'a [usize],
    metadata: &'a SweepMetadata,
    cells: Vec<SweepCellReport>,
}

fn cmd_sweep(args: SweepArgs) -> std::result::Result<(), Failure> {
    let start = Instant::now();
    let common = &args.common;
    let thetas: Vec<f64> = match (&args.theta_grid, &args.theta_pi_grid) {
        (Some(g), _) => g.0.clone(),
        (None, Some(g)) => g.0.iter().map(|f| f * std::f64::consts::PI).collect(),
        (None, None) => unreachable!("clap enforces a coin grid"),
    };
    for &t in &thetas {
        CoinAngle::new(t).map_err(|e| usage(format!("--theta-grid: {e}")))?;
    }
    for &w in &args.w_grid.0 {
        DisorderStrength::new(w).map_err(|e| usage(format!("--w-grid: {e}")))?;
    }
    let mut sites = args.sites.clone();
    sites.sort_unstable();
    sites.dedup();
    let run_length = args
        .steps
        .map_or(RunLength::PerSite(args.steps_per_site), RunLength::Fixed);
    let mut base = base_config(
        CoinAngle::new(thetas[0])?,
        DisorderStrength::new(args.w_grid.0[0])?,
        sites[0],
        run_length,
        args.pool.realizations,
        args.pool.fraction_mode,
        common,
    )?;
    for &n in &sites {
        base = base.with_sites(n);
        base.validate()?;
    }

    let sweep_config = SweepConfig {
        base: &base,
        theta_grid: &thetas,
        w_grid: &args.w_grid.0,
        sites: &sites,
    };
    let manifest = RunManifest::new(
        "sweep",
        common.seed,
        base.fraction_mode.as_str(),
        &sweep_config,
    )?;
    let mut bundle = OutputBundle::create(&common.out, manifest)?;
    let result = run_sweep(
        &thetas,
        &args.w_grid.0,
        &sites,
        &base,
        &mut |done, total| {
            eprintln!("sweep: {done}/{total} cells");
        },
    )?;
    bundle.write_file("sweep.csv", |out| write_sweep_csv(out, &result))?;
    let cells = result
        .cells
        .iter()
        .map(|c| SweepCellReport {
            theta: c.theta,
            w: c.w,
            n: c.n_sites,
            fraction_timestep: c.summary.fractions.timestep,
            fraction_cell: c.summary.fractions.cell,
            fraction_realization: c.summary.fractions.realization,
            p_max: c.summary.mean_max_probability,
            threshold_mean: c.summary.mean_threshold,
            event_count_total: c.summary.event_count_total,
        })
        .collect();
    bundle.write_json(
        "sweep.json",
        &SweepReport {
            manifest: MANIFEST_FILE,
            theta_axis: &result.theta_axis,
            w_axis: &result.w_axis,
            n_axis: &result.n_axis,
            metadata: &result.metadata,
            cells,
        },
    )?;
    bundle.finish(timings(common, start))?;
    Ok(())
}

#[derive(Serialize)]
struct ScalingConfig<'a> {
    base: &'a EnsembleConfig,
    sizes: &'a [usize],
    w_scan: Option<&'a [f64]>,
    epsilon: f64,
    synthetic_prefactor: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    manifest: &'static str,
    theta: f64,
    epsilon: f64,
    points: Vec<(usize, f64)>,
    fit: Option<PowerLawFit>,
    error: Option<String>,
}

fn cmd_scaling(args: ScalingArgs) -> std::result::Result<(), Failure> {
    let start = Instant::now();
    let common = &args.common;
    let mut sizes = args.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(usage(format!(
            "--sizes: power-law fit needs at least 3 distinct sizes, got {}",
            sizes.len()
        )));
    }
    if args.epsilon.is_nan() || args.epsilon <= 0.0 {
        return Err(usage(format!(
            "--epsilon: must be positive, got {}",
            args.epsilon
        )));
    }
    let theta = args.coin.coin();
    let scan_start = args.w_scan.as_ref().map_or(0.0, |g| g.0[0]);
    let base = base_config(
        theta,
        DisorderStrength::new(scan_start).map_err(|e| usage(format!("--w-scan: {e}")))?,
        sizes[0],
        RunLength::PerSite(args.steps_per_site),
        args.pool.realizations,
        args.pool.fraction_mode,
        common,
    )?;
    let scaling_config = ScalingConfig {
        base: &base,
        sizes: &sizes,
        w_scan: args.w_scan.as_ref().map(|g| g.0.as_slice()),
        epsilon: args.epsilon,
        synthetic_prefactor: args.synthetic_prefactor,
    };
    let manifest = RunManifest::new(
        "scaling",
        common.seed,
        base.fraction_mode.as_str(),
        &scaling_config,
    )?;
    let mut bundle = OutputBundle::create(&common.out, manifest)?;

    let mut rows: Vec<(usize, std::result::Result<CriticalDisorder, String>)> = Vec::new();
    for &n in &sizes {
        let result = match (args.synthetic_prefactor, &args.w_scan) {
            (Some(k), _) => Ok(CriticalDisorder {
                w_c: k / (n as f64).sqrt(),
                n_sites: n,
                theta,
                detection_epsilon: args.epsilon,
                bracket_lo: f64::NAN,
                bracket_hi: f64::NAN,
                fraction_at_w_c: Estimate::default(),
            }),
            (None, Some(scan)) => {
                estimate_wc_with_progress(theta, n, &scan.0, args.epsilon, &base, &mut |w, f| {
                    eprintln!(
                        "scaling: N={n} W={w} fraction={} (se {})",
                        f.mean, f.std_error
                    );
                })
            }
            (None, None) => unreachable!("clap requires --w-scan"),
        };
        match result {
            Ok(c) => rows.push((n, Ok(c))),
            Err(Error::BoundaryNotBracketed(reason)) => {
                eprintln!("scaling: N={n} not bracketed: {reason}");
                rows.push((n, Err(reason)));
            }
            Err(e) => return Err(e.into()),
        }
    }
    bundle.write_file("scaling.csv", |out| write_scaling_csv(out, &rows))?;

    let points: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|(n, r)| r.as_ref().ok().map(|c| (*n, c.w_c)))
        .collect();
    let fit = fit_power_law(
        &points
            .iter()
            .map(|&(n, w)| (n as f64, w))
            .collect::<Vec<_>>(),
    );
    let report = FitReport {
        manifest: MANIFEST_FILE,
        theta: theta.radians(),
        epsilon: args.epsilon,
        points,
        fit: fit.as_ref().ok().copied(),
        error: fit.as_ref().err().map(|e| e.to_string()),
    };
    bundle.write_json("fit.json", &report)?;
    bundle.finish(timings(common, start))?;
    match fit {
        Ok(_) => Ok(()),
        Err(e) => Err(Failure {
            code: 3,
            message: e.to_string(),
        }),
    }
}

/// `n,w_c,bracket_lo,bracket_hi,fraction_at_w_c,fraction_se,status`.
fn write_scaling_csv<W: std::io::Write>(
    out: W,
    rows: &[(usize, std::result::Result<CriticalDisorder, String>)],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "n",
        "w_c",
        "bracket_lo",
        "bracket_hi",
        "fraction_at_w_c",
        "fraction_se",
        "status",
    ])?;
    for (n, row) in rows {
        match row {
            Ok(c) => wtr.write_record([
                n.to_string(),
                c.w_c.to_string(),
                c.bracket_lo.to_string(),
                c.bracket_hi.to_string(),
                c.fraction_at_w_c.mean.to_string(),
                c.fraction_at_w_c.std_error.to_string(),
                "ok".to_string(),
            ])?,
            Err(e) => wtr.write_record([
                n.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("not-bracketed: {e}"),
            ])?,
        }
    }
    wtr.flush()?;
    Ok(())
}
