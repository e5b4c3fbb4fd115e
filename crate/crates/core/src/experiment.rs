//! Seeded ensembles, parameter sweeps and the critical-disorder scan.
//!
//! Realizations run on the current rayon pool. Each one derives its field from
//! `(master_seed, index)`, reduces its own space-time table to scalars and a
//! histogram, and the per-realization results are folded in index order, so
//! summaries are bit-identical for any thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderStrength, PhaseCoupling, PhaseField, SeedSpec, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::rogue::{
    analyze_and_clear, BinSpec, FractionMode, ProbabilityHistogram, RealizationAnalysis,
    SpaceTimeTable,
};
use crate::walk::{CoinAngle, WalkState};

/// Number of time steps in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunLength {
    Fixed(u64),
    /// `factor * N` steps.
    PerSite(u64),
}

impl RunLength {
    pub fn steps(&self, n_sites: usize) -> u64 {
        match *self {
            RunLength::Fixed(steps) => steps,
            RunLength::PerSite(factor) => factor * n_sites as u64,
        }
    }
}

impl Default for RunLength {
    fn default() -> Self {
        RunLength::PerSite(100)
    }
}

/// Pooled-histogram binning: `bins` linear bins over `[0, upper_over_mean / N]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "lowercase")]
pub enum HistogramBinning {
    Linear {
        upper_over_mean: f64,
        bins: usize,
    },
    Log {
        lower_over_mean: f64,
        upper_over_mean: f64,
        bins: usize,
    },
}

impl HistogramBinning {
    pub fn spec(&self, n_sites: usize) -> BinSpec {
        let mean = 1.0 / n_sites as f64;
        match *self {
            HistogramBinning::Linear {
                upper_over_mean,
                bins,
            } => BinSpec::Linear {
                lo: 0.0,
                hi: upper_over_mean * mean,
                bins,
            },
            HistogramBinning::Log {
                lower_over_mean,
                upper_over_mean,
                bins,
            } => BinSpec::Log {
                lo: lower_over_mean * mean,
                hi: upper_over_mean * mean,
                bins,
            },
        }
    }
}

impl Default for HistogramBinning {
    fn default() -> Self {
        HistogramBinning::Linear {
            upper_over_mean: 10.0,
            bins: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub theta: CoinAngle,
    pub w: DisorderStrength,
    pub n_sites: usize,
    pub run_length: RunLength,
    pub realizations: u64,
    pub master_seed: u64,
    pub record_stride: u64,
    pub fraction_mode: FractionMode,
    pub phase_coupling: PhaseCoupling,
    pub histogram: HistogramBinning,
}

impl EnsembleConfig {
    /// Defaults: `100 N` steps, 500 realizations, every step recorded.
    pub fn new(theta: CoinAngle, w: DisorderStrength, n_sites: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            theta,
            w,
            n_sites,
            run_length: RunLength::default(),
            realizations: 500,
            master_seed,
            record_stride: 1,
            fraction_mode: FractionMode::default(),
            phase_coupling: PhaseCoupling::default(),
            histogram: HistogramBinning::default(),
        }
    }

    pub fn with_realizations(mut self, realizations: u64) -> Self {
        self.realizations = realizations;
        self
    }

    pub fn with_run_length(mut self, run_length: RunLength) -> Self {
        self.run_length = run_length;
        self
    }

    pub fn with_theta(mut self, theta: CoinAngle) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_w(mut self, w: DisorderStrength) -> Self {
        self.w = w;
        self
    }

    pub fn with_sites(mut self, n_sites: usize) -> Self {
        self.n_sites = n_sites;
        self
    }

    pub fn steps(&self) -> u64 {
        self.run_length.steps(self.n_sites)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidSize(self.n_sites));
        }
        if self.steps() == 0 {
            return Err(Error::InvalidSteps);
        }
        if self.realizations == 0 {
            return Err(Error::InvalidConfig(
                "realizations must be at least 1".into(),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig(
                "record stride must be at least 1".into(),
            ));
        }
        if self.steps() < self.record_stride {
            return Err(Error::InvalidConfig(format!(
                "record stride {} exceeds run length {}, nothing would be recorded",
                self.record_stride,
                self.steps()
            )));
        }
        self.histogram.spec(self.n_sites).validate()
    }

    fn recorded_rows(&self) -> usize {
        (self.steps() / self.record_stride) as usize
    }
}

/// Evolves realization `index` and returns its recorded table. Used by the
/// ensemble workers and by single-run commands.
pub fn simulate_realization(
    config: &EnsembleConfig,
    index: u64,
) -> Result<(PhaseField, SpaceTimeTable)> {
    let mut table = SpaceTimeTable::new(config.n_sites);
    let field = simulate_into(config, index, &mut table)?;
    Ok((field, table))
}

/// Records realization `index` into `table`, replacing its contents.
fn simulate_into(
    config: &EnsembleConfig,
    index: u64,
    table: &mut SpaceTimeTable,
) -> Result<PhaseField> {
    let seed = SeedSpec::new(config.master_seed, index);
    let field = PhaseField::generate(config.n_sites, config.w, seed, config.phase_coupling)?;
    let mut state = WalkState::initial(config.n_sites)?;
    if table.n_sites() != config.n_sites {
        *table = SpaceTimeTable::new(config.n_sites);
    }
    table.clear();
    table.try_reserve_rows(config.recorded_rows())?;
    state.evolve(
        config.theta,
        &field,
        config.steps(),
        config.record_stride,
        table,
    )?;
    Ok(field)
}

pub fn analyze_realization(config: &EnsembleConfig, index: u64) -> Result<RealizationAnalysis> {
    analyze_with_buffer(config, index, &mut SpaceTimeTable::new(config.n_sites))
}

fn analyze_with_buffer(
    config: &EnsembleConfig,
    index: u64,
    table: &mut SpaceTimeTable,
) -> Result<RealizationAnalysis> {
    simulate_into(config, index, table)?;
    analyze_and_clear(table, &config.histogram.spec(config.n_sites))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Standard error from the unbiased sample variance; zero for one sample.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        if samples.is_empty() {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Estimate {
                mean,
                std_error: 0.0,
            };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionEstimates {
    pub timestep: Estimate,
    pub cell: Estimate,
    pub realization: Estimate,
}

impl FractionEstimates {
    pub fn get(&self, mode: FractionMode) -> Estimate {
        match mode {
            FractionMode::Timestep => self.timestep,
            FractionMode::Cell => self.cell,
            FractionMode::Realization => self.realization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub realizations: u64,
    pub fraction_mode: FractionMode,
    /// Event fraction under `fraction_mode`.
    pub mean_event_fraction: Estimate,
    pub fractions: FractionEstimates,
    pub mean_max_probability: Estimate,
    pub mean_threshold: f64,
    pub event_count_total: u64,
    pub cell_count_total: u64,
    pub pooled_histogram: ProbabilityHistogram,
}

impl EnsembleSummary {
    /// Share of all pooled cells that exceeded their realization's threshold.
    pub fn tail_mass(&self) -> f64 {
        self.event_count_total as f64 / self.cell_count_total as f64
    }

    fn reduce(config: &EnsembleConfig, runs: &[RealizationAnalysis]) -> Result<Self> {
        let collect =
            |f: &dyn Fn(&RealizationAnalysis) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        let fractions = FractionEstimates {
            timestep: Estimate::from_samples(&collect(&|r| r.fractions.timestep)),
            cell: Estimate::from_samples(&collect(&|r| r.fractions.cell)),
            realization: Estimate::from_samples(&collect(&|r| r.fractions.realization)),
        };
        let mut pooled = ProbabilityHistogram::empty(config.histogram.spec(config.n_sites))?;
        for r in runs {
            pooled.merge(&r.histogram)?;
        }
        Ok(EnsembleSummary {
            realizations: runs.len() as u64,
            fraction_mode: config.fraction_mode,
            mean_event_fraction: fractions.get(config.fraction_mode),
            fractions,
            mean_max_probability: Estimate::from_samples(&collect(&|r| r.max_probability)),
            mean_threshold: Estimate::from_samples(&collect(&|r| r.threshold.p_th)).mean,
            event_count_total: runs.iter().map(|r| r.event_count).sum(),
            cell_count_total: runs.iter().map(|r| r.cells).sum(),
            pooled_histogram: pooled,
        })
    }
}

/// Runs every realization of `config` and aggregates the results.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleSummary> {
    config.validate()?;
    let runs = (0..config.realizations)
        .into_par_iter()
        // one table per worker; the allocation is reused across realizations
        .map_init(
            || SpaceTimeTable::new(config.n_sites),
            |table, i| analyze_with_buffer(config, i, table),
        )
        .collect::<Result<Vec<_>>>()?;
    EnsembleSummary::reduce(config, &runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta: f64,
    pub w: f64,
    pub n_sites: usize,
    pub summary: EnsembleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub master_seed: u64,
    pub run_length: RunLength,
    pub realizations: u64,
    pub record_stride: u64,
    pub fraction_mode: FractionMode,
    pub phase_coupling: PhaseCoupling,
    pub rng: String,
    pub version: String,
    /// Wall-clock seconds; not serialized so that outputs stay reproducible.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl SweepMetadata {
    fn from_base(base: &EnsembleConfig) -> Self {
        SweepMetadata {
            master_seed: base.master_seed,
            run_length: base.run_length,
            realizations: base.realizations,
            record_stride: base.record_stride,
            fraction_mode: base.fraction_mode,
            phase_coupling: base.phase_coupling,
            rng: RNG_ALGORITHM.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            elapsed_secs: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub theta_axis: Vec<f64>,
    pub w_axis: Vec<f64>,
    pub n_axis: Vec<usize>,
    /// Ordered by `n`, then `w`, then `theta`.
    pub cells: Vec<SweepCell>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn cell(&self, theta_index: usize, w_index: usize, n_index: usize) -> &SweepCell {
        let (nt, nw) = (self.theta_axis.len(), self.w_axis.len());
        &self.cells[(n_index * nw + w_index) * nt + theta_index]
    }
}

fn check_axis<T: PartialOrd + Copy + std::fmt::Debug>(name: &str, axis: &[T]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} grid is empty")));
    }
    if axis.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidConfig(format!(
            "{name} grid must be strictly increasing: {axis:?}"
        )));
    }
    Ok(())
}

/// Ensemble at every `(theta, w, n)` grid point. Cells run one after the
/// other; `progress` gets `(completed, total)` after each.
pub fn run_sweep(
    theta_grid: &[f64],
    w_grid: &[f64],
    n_grid: &[usize],
    base: &EnsembleConfig,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<SweepResult> {
    check_axis("theta", theta_grid)?;
    check_axis("w", w_grid)?;
    check_axis("n", n_grid)?;
    let thetas = theta_grid
        .iter()
        .map(|&t| CoinAngle::new(t))
        .collect::<Result<Vec<_>>>()?;
    let ws = w_grid
        .iter()
        .map(|&w| DisorderStrength::new(w))
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let total = thetas.len() * ws.len() * n_grid.len();
    let mut cells = Vec::with_capacity(total);
    for &n in n_grid {
        for &w in &ws {
            for &theta in &thetas {
                let config = base.clone().with_theta(theta).with_w(w).with_sites(n);
                let summary = run_ensemble(&config)?;
                cells.push(SweepCell {
                    theta: theta.radians(),
                    w: w.value(),
                    n_sites: n,
                    summary,
                });
                progress(cells.len(), total);
            }
        }
    }
    let mut metadata = SweepMetadata::from_base(base);
    metadata.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(SweepResult {
        theta_axis: theta_grid.to_vec(),
        w_axis: w_grid.to_vec(),
        n_axis: n_grid.to_vec(),
        cells,
        metadata,
    })
}

/// Coin sweep at several disorder strengths (max-amplitude curves).
pub fn sweep_theta(
    w_list: &[f64],
    theta_grid: &[f64],
    base: &EnsembleConfig,
) -> Result<SweepResult> {
    run_sweep(theta_grid, w_list, &[base.n_sites], base, &mut |_, _| {})
}

/// Full `(theta, W)` grid of event fractions.
pub fn sweep_heatmap(
    theta_grid: &[f64],
    w_grid: &[f64],
    base: &EnsembleConfig,
) -> Result<SweepResult> {
    run_sweep(theta_grid, w_grid, &[base.n_sites], base, &mut |_, _| {})
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// Smallest disorder at which rogue events emerge for one `(theta, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalDisorder {
    pub w_c: f64,
    pub n_sites: usize,
    pub theta: CoinAngle,
    pub detection_epsilon: f64,
    /// Largest evaluated W at or below epsilon.
    pub bracket_lo: f64,
    /// Smallest scan-grid W above epsilon.
    pub bracket_hi: f64,
    /// Mean event fraction at `w_c`.
    pub fraction_at_w_c: Estimate,
}

/// Scans `w_scan` upward until the mean event fraction exceeds `epsilon`,
/// then evaluates the midpoint of the bracketing pair once. The result is the
/// smallest evaluated W above `epsilon`.
pub fn estimate_wc(
    theta: CoinAngle,
    n_sites: usize,
    w_scan: &[f64],
    epsilon: f64,
    base: &EnsembleConfig,
) -> Result<CriticalDisorder> {
    estimate_wc_with_progress(theta, n_sites, w_scan, epsilon, base, &mut |_, _| {})
}

/// [`estimate_wc`] reporting each evaluated `(w, mean fraction)`.
pub fn estimate_wc_with_progress(
    theta: CoinAngle,
    n_sites: usize,
    w_scan: &[f64],
    epsilon: f64,
    base: &EnsembleConfig,
    progress: &mut dyn FnMut(f64, Estimate),
) -> Result<CriticalDisorder> {
    let config = base.clone().with_theta(theta).with_sites(n_sites);
    let bracket = search_critical_disorder(w_scan, epsilon, |w| {
        let summary = run_ensemble(&config.clone().with_w(DisorderStrength::new(w)?))?;
        progress(w, summary.mean_event_fraction);
        Ok(summary.mean_event_fraction)
    })?;
    Ok(CriticalDisorder {
        w_c: bracket.w_c,
        n_sites,
        theta,
        detection_epsilon: epsilon,
        bracket_lo: bracket.lo,
        bracket_hi: bracket.hi,
        fraction_at_w_c: bracket.fraction,
    })
}

/// Outcome of [`search_critical_disorder`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WcBracket {
    pub w_c: f64,
    pub lo: f64,
    pub hi: f64,
    pub fraction: Estimate,
}

/// Scans `w_scan` upward until `fraction_at(w)` exceeds `epsilon`, then
/// bisects the bracket once. `w_c` is the smallest evaluated W above
/// `epsilon`. Any caching of `fraction_at` is left to the caller.
pub fn search_critical_disorder<F>(
    w_scan: &[f64],
    epsilon: f64,
    mut fraction_at: F,
) -> Result<WcBracket>
where
    F: FnMut(f64) -> Result<Estimate>,
{
    check_axis("w scan", w_scan)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut below: Option<f64> = None;
    for &w in w_scan {
        let f = fraction_at(w)?;
        if f.mean <= epsilon {
            below = Some(w);
            continue;
        }
        let Some(lo) = below else {
            return Err(Error::BoundaryNotBracketed(format!(
                "fraction {} already exceeds epsilon {epsilon} at the first scan point W = {w}",
                f.mean
            )));
        };
        let mid = 0.5 * (lo + w);
        let fm = fraction_at(mid)?;
        return Ok(if fm.mean > epsilon {
            WcBracket {
                w_c: mid,
                lo,
                hi: mid,
                fraction: fm,
            }
        } else {
            WcBracket {
                w_c: w,
                lo: mid,
                hi: w,
                fraction: f,
            }
        });
    }
    Err(Error::BoundaryNotBracketed(format!(
        "fraction never exceeds epsilon {epsilon} up to W = {}",
        w_scan[w_scan.len() - 1]
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.prefactor * n.powf(self.exponent)
    }
}

/// Least-squares line through `(ln N, ln w_c)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints(points.len()));
    }
    if let Some(&(n, w)) = points.iter().find(|(n, w)| !(*n > 0.0 && *w > 0.0)) {
        return Err(Error::NonPositive(n, w));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, w)| (n.ln(), w.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig(
            "power-law fit needs at least two distinct sizes".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}
