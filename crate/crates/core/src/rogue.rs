//! Rogue-wave threshold, event detection and probability distributions.
//!
//! A rogue event is a recorded cell `(t, n)` whose occupation probability
//! exceeds `P_th = 2 * P_1/3`, where `P_1/3` is the mean of the largest third
//! of all recorded values.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walk::ProbabilityRecorder;

/// Recorded probabilities, one row of `n_sites` values per recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeTable {
    n_sites: usize,
    times: Vec<u64>,
    values: Vec<f64>,
    row_max: Vec<f64>,
}

impl SpaceTimeTable {
    pub fn new(n_sites: usize) -> Self {
        SpaceTimeTable {
            n_sites,
            times: Vec::new(),
            values: Vec::new(),
            row_max: Vec::new(),
        }
    }

    /// Preallocates room for `rows` profiles, failing cleanly instead of
    /// aborting when memory is short.
    pub fn try_with_rows(n_sites: usize, rows: usize) -> Result<Self> {
        let mut table = Self::new(n_sites);
        table.try_reserve_rows(rows)?;
        Ok(table)
    }

    pub fn from_rows<I, R>(n_sites: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, R)>,
        R: AsRef<[f64]>,
    {
        let mut table = Self::new(n_sites);
        for (t, row) in rows {
            let row = row.as_ref();
            if row.len() != n_sites {
                return Err(Error::ShapeMismatch {
                    expected: n_sites,
                    found: row.len(),
                });
            }
            table.push(t, row);
        }
        Ok(table)
    }

    /// Drops all rows but keeps the allocation for reuse.
    pub fn clear(&mut self) {
        self.times.clear();
        self.values.clear();
        self.row_max.clear();
    }

    /// Makes room for `rows` more profiles without aborting on failure.
    pub fn try_reserve_rows(&mut self, rows: usize) -> Result<()> {
        let cells = rows
            .checked_mul(self.n_sites)
            .ok_or(Error::ResourceExhausted(usize::MAX))?;
        self.values
            .try_reserve_exact(cells)
            .map_err(|_| Error::ResourceExhausted(cells))?;
        self.times
            .try_reserve_exact(rows)
            .map_err(|_| Error::ResourceExhausted(cells))?;
        self.row_max
            .try_reserve_exact(rows)
            .map_err(|_| Error::ResourceExhausted(cells))?;
        Ok(())
    }

    pub fn push(&mut self, time: u64, row: &[f64]) {
        assert_eq!(row.len(), self.n_sites, "row length must equal n_sites");
        self.times.push(time);
        self.values.extend_from_slice(row);
        self.row_max
            .push(row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    /// All cells, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.times
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.n_sites))
    }

    pub fn row(&self, index: usize) -> Option<(u64, &[f64])> {
        let t = *self.times.get(index)?;
        Some((
            t,
            &self.values[index * self.n_sites..(index + 1) * self.n_sites],
        ))
    }

    /// Long-format CSV `t,site,probability`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "site", "probability"])?;
        for (t, row) in self.rows() {
            let t = t.to_string();
            for (site, p) in row.iter().enumerate() {
                wtr.write_record([t.as_str(), &site.to_string(), &p.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    fn ensure_non_empty(&self, what: &'static str) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyData(what))
        } else {
            Ok(())
        }
    }
}

impl ProbabilityRecorder for SpaceTimeTable {
    fn record(&mut self, time: u64, probabilities: &[f64]) {
        self.push(time, probabilities);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RogueThreshold {
    /// Mean of the largest `ceil(M/3)` recorded values.
    pub p_bar_third: f64,
    /// Always exactly `2 * p_bar_third`.
    pub p_th: f64,
}

impl RogueThreshold {
    pub fn from_p_bar_third(p_bar_third: f64) -> Self {
        RogueThreshold {
            p_bar_third,
            p_th: 2.0 * p_bar_third,
        }
    }
}

pub fn compute_threshold(values: &[f64]) -> Result<RogueThreshold> {
    let mut scratch = values.to_vec();
    threshold_in_place(&mut scratch)
}

/// Same as [`compute_threshold`] but reorders `values` instead of copying.
pub fn threshold_in_place(values: &mut [f64]) -> Result<RogueThreshold> {
    if values.is_empty() {
        return Err(Error::EmptyData("threshold"));
    }
    let m = values.len();
    let k = m.div_ceil(3);
    let (_, pivot, upper) = values.select_nth_unstable_by(m - k, f64::total_cmp);
    // Mean as pivot + mean offset; exact whenever all top values are equal.
    let base = *pivot;
    let excess: f64 = upper.iter().map(|v| v - base).sum();
    Ok(RogueThreshold::from_p_bar_third(base + excess / k as f64))
}

/// One threshold per recorded snapshot, for per-snapshot visualisation.
pub fn snapshot_thresholds(table: &SpaceTimeTable) -> Result<Vec<RogueThreshold>> {
    table.ensure_non_empty("snapshot thresholds")?;
    table
        .rows()
        .map(|(_, row)| compute_threshold(row))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: u64,
    pub site: usize,
    pub probability: f64,
    /// `probability / p_th`, always above 1.
    pub exceedance: f64,
}

/// Every cell with `P_n(t) > p_th`, in ascending `(t, n)` order.
pub fn detect_events(table: &SpaceTimeTable, threshold: &RogueThreshold) -> Vec<EventRecord> {
    let p_th = threshold.p_th;
    let mut events = Vec::new();
    for (time, row) in table.rows() {
        for (site, &p) in row.iter().enumerate() {
            if p > p_th {
                events.push(EventRecord {
                    time,
                    site,
                    probability: p,
                    exceedance: p / p_th,
                });
            }
        }
    }
    events
}

/// CSV with header `realization,t,site,probability,exceedance`.
pub struct EventCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EventCsvWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(["realization", "t", "site", "probability", "exceedance"])?;
        Ok(EventCsvWriter { inner })
    }

    pub fn write_events(&mut self, realization: u64, events: &[EventRecord]) -> Result<()> {
        let r = realization.to_string();
        for e in events {
            self.inner.write_record([
                r.as_str(),
                &e.time.to_string(),
                &e.site.to_string(),
                &e.probability.to_string(),
                &e.exceedance.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// How event occurrences are turned into a single fraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FractionMode {
    /// Share of recorded time steps with at least one event.
    #[default]
    Timestep,
    /// Events divided by recorded cells.
    Cell,
    /// 1 if any event occurred, else 0.
    Realization,
}

impl FractionMode {
    pub const ALL: [FractionMode; 3] = [
        FractionMode::Timestep,
        FractionMode::Cell,
        FractionMode::Realization,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FractionMode::Timestep => "timestep",
            FractionMode::Cell => "cell",
            FractionMode::Realization => "realization",
        }
    }
}

impl fmt::Display for FractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FractionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "timestep" => Ok(FractionMode::Timestep),
            "cell" => Ok(FractionMode::Cell),
            "realization" => Ok(FractionMode::Realization),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// Event fractions under all three modes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventFractions {
    pub timestep: f64,
    pub cell: f64,
    pub realization: f64,
}

impl EventFractions {
    pub fn get(&self, mode: FractionMode) -> f64 {
        match mode {
            FractionMode::Timestep => self.timestep,
            FractionMode::Cell => self.cell,
            FractionMode::Realization => self.realization,
        }
    }

    fn from_counts(event_rows: usize, rows: usize, events: usize, cells: usize) -> Self {
        EventFractions {
            timestep: event_rows as f64 / rows as f64,
            cell: events as f64 / cells as f64,
            realization: if events > 0 { 1.0 } else { 0.0 },
        }
    }
}

pub fn event_fractions(
    table: &SpaceTimeTable,
    threshold: &RogueThreshold,
) -> Result<EventFractions> {
    table.ensure_non_empty("event fraction")?;
    let p_th = threshold.p_th;
    let events = table.values.iter().filter(|&&p| p > p_th).count();
    let event_rows = table.row_max.iter().filter(|&&m| m > p_th).count();
    Ok(EventFractions::from_counts(
        event_rows,
        table.n_rows(),
        events,
        table.values.len(),
    ))
}

pub fn event_fraction(
    table: &SpaceTimeTable,
    threshold: &RogueThreshold,
    mode: FractionMode,
) -> Result<f64> {
    Ok(event_fractions(table, threshold)?.get(mode))
}

pub fn max_probability(table: &SpaceTimeTable) -> Result<f64> {
    table.ensure_non_empty("max probability")?;
    Ok(table
        .row_max
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Histogram binning. Values outside `[lo, hi]` are counted in the edge bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "lowercase")]
pub enum BinSpec {
    Linear {
        lo: f64,
        hi: f64,
        bins: usize,
    },
    /// Log-spaced edges; needs `lo > 0`. Zero and negative values land in the
    /// first bin.
    Log {
        lo: f64,
        hi: f64,
        bins: usize,
    },
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi, bins) = match *self {
            BinSpec::Linear { lo, hi, bins } | BinSpec::Log { lo, hi, bins } => (lo, hi, bins),
        };
        if bins == 0 {
            return Err(Error::InvalidBins("at least one bin is required".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidBins(format!(
                "need finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if matches!(self, BinSpec::Log { .. }) && lo <= 0.0 {
            return Err(Error::InvalidBins(format!(
                "log bins need lo > 0, got {lo}"
            )));
        }
        Ok(())
    }

    pub fn edges(&self) -> Vec<f64> {
        match *self {
            BinSpec::Linear { lo, hi, bins } => {
                let width = (hi - lo) / bins as f64;
                (0..=bins)
                    .map(|i| if i == bins { hi } else { lo + width * i as f64 })
                    .collect()
            }
            BinSpec::Log { lo, hi, bins } => {
                let ratio = (hi / lo).ln();
                (0..=bins)
                    .map(|i| {
                        if i == bins {
                            hi
                        } else {
                            lo * (ratio * i as f64 / bins as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }

    fn binner(&self) -> Binner {
        match *self {
            BinSpec::Linear { lo, hi, bins } => Binner {
                log: false,
                origin: lo,
                scale: bins as f64 / (hi - lo),
                last: bins - 1,
            },
            BinSpec::Log { lo, hi, bins } => Binner {
                log: true,
                origin: lo.ln(),
                scale: bins as f64 / (hi / lo).ln(),
                last: bins - 1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Binner {
    log: bool,
    origin: f64,
    scale: f64,
    last: usize,
}

impl Binner {
    fn index(&self, value: f64) -> usize {
        let x = if self.log {
            if value <= 0.0 {
                return 0;
            }
            value.ln()
        } else {
            value
        };
        // NaN and negative positions fall to bin 0 via the saturating cast
        (((x - self.origin) * self.scale) as usize).min(self.last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityHistogram {
    spec: BinSpec,
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl ProbabilityHistogram {
    pub fn empty(spec: BinSpec) -> Result<Self> {
        spec.validate()?;
        let bins = spec.edges().len() - 1;
        Ok(ProbabilityHistogram {
            spec,
            bin_edges: spec.edges(),
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn add(&mut self, value: f64) {
        self.extend(std::iter::once(&value));
    }

    pub fn extend<'a, I: IntoIterator<Item = &'a f64>>(&mut self, values: I) {
        let binner = self.spec.binner();
        for &v in values {
            self.counts[binner.index(v)] += 1;
            self.total += 1;
        }
    }

    /// Adds another histogram's counts; both must share one binning.
    pub fn merge(&mut self, other: &ProbabilityHistogram) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::InvalidBins(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn spec(&self) -> &BinSpec {
        &self.spec
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Normalized density per bin (integrates to 1).
    pub fn density(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / (self.total as f64 * (e[1] - e[0])))
            .collect()
    }

    /// CSV with header `bin_lo,bin_hi,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["bin_lo", "bin_hi", "count"])?;
        for (e, c) in self.bin_edges.windows(2).zip(&self.counts) {
            wtr.write_record([e[0].to_string(), e[1].to_string(), c.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn histogram(values: &[f64], spec: &BinSpec) -> Result<ProbabilityHistogram> {
    if values.is_empty() {
        return Err(Error::EmptyData("histogram"));
    }
    let mut h = ProbabilityHistogram::empty(*spec)?;
    h.extend(values);
    Ok(h)
}

/// Everything an ensemble needs from one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationAnalysis {
    pub threshold: RogueThreshold,
    pub fractions: EventFractions,
    pub event_count: u64,
    pub cells: u64,
    pub max_probability: f64,
    pub histogram: ProbabilityHistogram,
}

/// Full single-realization analysis.
pub fn analyze_table(mut table: SpaceTimeTable, bins: &BinSpec) -> Result<RealizationAnalysis> {
    analyze_and_clear(&mut table, bins)
}

/// Like [`analyze_table`], but leaves `table` empty with its allocation
/// intact. The threshold selection reorders the cells in place, so the table
/// cannot be used afterwards anyway.
pub fn analyze_and_clear(
    table: &mut SpaceTimeTable,
    bins: &BinSpec,
) -> Result<RealizationAnalysis> {
    table.ensure_non_empty("analysis")?;
    let histogram = histogram(&table.values, bins)?;
    let max_probability = max_probability(table)?;
    let rows = table.n_rows();
    let threshold = threshold_in_place(&mut table.values)?;
    let p_th = threshold.p_th;
    let events = table.values.iter().filter(|&&p| p > p_th).count();
    let event_rows = table.row_max.iter().filter(|&&m| m > p_th).count();
    let cells = table.values.len();
    table.clear();
    Ok(RealizationAnalysis {
        threshold,
        fractions: EventFractions::from_counts(event_rows, rows, events, cells),
        event_count: events as u64,
        cells: cells as u64,
        max_probability,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn uniform_table(n: usize, rows: u64) -> SpaceTimeTable {
        let row = vec![1.0 / n as f64; n];
        SpaceTimeTable::from_rows(n, (1..=rows).map(|t| (t, row.clone()))).unwrap()
    }

    #[test]
    fn threshold_of_six_values() {
        let th = compute_threshold(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert!((th.p_bar_third - 0.55).abs() < 1e-15);
        assert!((th.p_th - 1.1).abs() < 1e-15);
        assert_eq!(th.p_th, 2.0 * th.p_bar_third);
    }

    #[test]
    fn threshold_of_uniform_values_is_exact() {
        for n in [3, 7, 100, 333] {
            let v = vec![1.0 / n as f64; n * 31];
            let th = compute_threshold(&v).unwrap();
            assert_eq!(th.p_th, 2.0 / n as f64);
        }
    }

    #[test]
    fn threshold_of_single_value() {
        let th = compute_threshold(&[0.37]).unwrap();
        assert_eq!(th.p_bar_third, 0.37);
        assert_eq!(th.p_th, 0.74);
    }

    #[test]
    fn threshold_rejects_empty() {
        assert!(matches!(compute_threshold(&[]), Err(Error::EmptyData(_))));
    }

    #[test]
    fn uniform_table_has_no_events() {
        let t = uniform_table(10, 50);
        let th = compute_threshold(t.values()).unwrap();
        assert!(detect_events(&t, &th).is_empty());
        for mode in FractionMode::ALL {
            assert_eq!(event_fraction(&t, &th, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_spike_in_300_cells() {
        // 10 sites x 30 rows = 300 cells at 1/N, one raised to 3/N. The top
        // 100 values are the spike plus 99 cells at 1/N, so
        // p_bar_third = (3 + 99) / (100 N) and p_th = 2.04 / N < 3 / N.
        let n = 10;
        let mut rows: Vec<(u64, Vec<f64>)> = (1..=30).map(|t| (t, vec![0.1; n])).collect();
        rows[17].1[4] = 0.3;
        let t = SpaceTimeTable::from_rows(n, rows).unwrap();
        let th = compute_threshold(t.values()).unwrap();
        assert!((th.p_bar_third - 1.02 / n as f64).abs() < 1e-15);
        let events = detect_events(&t, &th);
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].time, events[0].site), (18, 4));
        assert!((events[0].exceedance - 0.3 / 0.204).abs() < 1e-12);
        let f = event_fractions(&t, &th).unwrap();
        assert!((f.timestep - 1.0 / 30.0).abs() < 1e-15);
        assert!((f.cell - 1.0 / 300.0).abs() < 1e-15);
        assert_eq!(f.realization, 1.0);
    }

    #[test]
    fn events_sorted_by_time_then_site() {
        let t = SpaceTimeTable::from_rows(
            3,
            vec![
                (1, vec![0.0, 0.9, 0.9]),
                (2, vec![0.9, 0.0, 0.0]),
                (3, vec![0.0, 0.0, 0.9]),
            ],
        )
        .unwrap();
        let events = detect_events(&t, &RogueThreshold::from_p_bar_third(0.2));
        let keys: Vec<_> = events.iter().map(|e| (e.time, e.site)).collect();
        assert_eq!(keys, vec![(1, 1), (1, 2), (2, 0), (3, 2)]);
        let f = event_fractions(&t, &RogueThreshold::from_p_bar_third(0.2)).unwrap();
        assert_eq!(f.timestep, 1.0);
    }

    #[test]
    fn fraction_mode_parsing() {
        assert_eq!("cell".parse::<FractionMode>().unwrap(), FractionMode::Cell);
        assert_eq!(FractionMode::Timestep.to_string(), "timestep");
        assert!(matches!(
            "peak".parse::<FractionMode>(),
            Err(Error::UnknownMode(_))
        ));
    }

    #[test]
    fn empty_table_errors() {
        let t = SpaceTimeTable::new(4);
        let th = RogueThreshold::from_p_bar_third(0.1);
        assert!(event_fractions(&t, &th).is_err());
        assert!(max_probability(&t).is_err());
        assert!(snapshot_thresholds(&t).is_err());
        assert!(analyze_table(
            t,
            &BinSpec::Linear {
                lo: 0.0,
                hi: 1.0,
                bins: 4
            }
        )
        .is_err());
    }

    #[test]
    fn max_probability_cases() {
        assert_eq!(max_probability(&uniform_table(8, 5)).unwrap(), 0.125);
        let t = SpaceTimeTable::from_rows(2, vec![(1, [0.5, 0.5]), (2, [1.0, 0.0])]).unwrap();
        assert_eq!(max_probability(&t).unwrap(), 1.0);
    }

    #[test]
    fn histogram_of_repeated_value() {
        let h = histogram(
            &[0.25; 100],
            &BinSpec::Linear {
                lo: 0.0,
                hi: 1.0,
                bins: 10,
            },
        )
        .unwrap();
        assert_eq!(h.total(), 100);
        assert_eq!(h.counts().iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts()[2], 100);
    }

    #[test]
    fn log_histogram_and_clamping() {
        let spec = BinSpec::Log {
            lo: 1e-4,
            hi: 1.0,
            bins: 4,
        };
        let h = histogram(&[0.0, 5e-4, 5e-3, 0.05, 0.5, 7.0], &spec).unwrap();
        assert_eq!(h.counts(), &[2, 1, 1, 2]);
        let e = h.bin_edges();
        assert!((e[1] - 1e-3).abs() < 1e-15 && (e[2] - 1e-2).abs() < 1e-15);
        let d: f64 = h
            .density()
            .iter()
            .zip(e.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_bins() {
        for spec in [
            BinSpec::Linear {
                lo: 0.0,
                hi: 1.0,
                bins: 0,
            },
            BinSpec::Linear {
                lo: 1.0,
                hi: 1.0,
                bins: 3,
            },
            BinSpec::Log {
                lo: 0.0,
                hi: 1.0,
                bins: 3,
            },
            BinSpec::Linear {
                lo: f64::NAN,
                hi: 1.0,
                bins: 3,
            },
        ] {
            assert!(matches!(
                histogram(&[0.5], &spec),
                Err(Error::InvalidBins(_))
            ));
        }
        assert!(histogram(
            &[],
            &BinSpec::Linear {
                lo: 0.0,
                hi: 1.0,
                bins: 3
            }
        )
        .is_err());
    }

    #[test]
    fn merge_requires_same_bins() {
        let a = BinSpec::Linear {
            lo: 0.0,
            hi: 1.0,
            bins: 4,
        };
        let mut h = histogram(&[0.1, 0.9], &a).unwrap();
        h.merge(&histogram(&[0.6], &a).unwrap()).unwrap();
        assert_eq!(h.counts(), &[1, 0, 1, 1]);
        assert_eq!(h.total(), 3);
        let b = BinSpec::Linear {
            lo: 0.0,
            hi: 2.0,
            bins: 4,
        };
        assert!(h.merge(&histogram(&[0.6], &b).unwrap()).is_err());
    }

    #[test]
    fn snapshot_thresholds_per_row() {
        let t =
            SpaceTimeTable::from_rows(3, vec![(1, [0.1, 0.2, 0.7]), (2, [0.3, 0.3, 0.4])]).unwrap();
        let ths = snapshot_thresholds(&t).unwrap();
        assert_eq!(ths.len(), 2);
        assert_eq!(ths[0].p_bar_third, 0.7);
        assert_eq!(ths[1].p_bar_third, 0.4);
    }

    #[test]
    fn csv_outputs() {
        let t = SpaceTimeTable::from_rows(2, vec![(5, [0.25, 0.75])]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,site,probability\n5,0,0.25\n5,1,0.75\n"
        );

        let mut buf = Vec::new();
        let mut w = EventCsvWriter::new(&mut buf).unwrap();
        let events = detect_events(&t, &RogueThreshold::from_p_bar_third(0.25));
        w.write_events(3, &events).unwrap();
        w.finish().unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "realization,t,site,probability,exceedance\n3,5,1,0.75,1.5\n"
        );

        let mut buf = Vec::new();
        histogram(
            &[0.1, 0.6],
            &BinSpec::Linear {
                lo: 0.0,
                hi: 1.0,
                bins: 2,
            },
        )
        .unwrap()
        .write_csv(&mut buf)
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_lo,bin_hi,count\n0,0.5,1\n0.5,1,1\n"
        );
    }

    fn table_strategy() -> impl Strategy<Value = SpaceTimeTable> {
        (2usize..12, 1usize..20).prop_flat_map(|(n, rows)| {
            prop::collection::vec(0.0..1.0f64, n * rows).prop_map(move |v| {
                SpaceTimeTable::from_rows(
                    n,
                    v.chunks(n)
                        .enumerate()
                        .map(|(t, r)| (t as u64 + 1, r.to_vec())),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn top_third_mean_dominates_overall_mean(v in prop::collection::vec(0.0..1.0f64, 1..300)) {
            let th = compute_threshold(&v).unwrap();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!(th.p_bar_third >= mean - 1e-12);
            prop_assert_eq!(th.p_th, 2.0 * th.p_bar_third);
        }

        #[test]
        fn small_value_never_raises_threshold(v in prop::collection::vec(0.01..1.0f64, 1..300), below in 0.0..1.0f64) {
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let before = compute_threshold(&v).unwrap();
            let mut w = v.clone();
            w.push(min * below);
            let after = compute_threshold(&w).unwrap();
            prop_assert!(after.p_th <= before.p_th * (1.0 + 1e-14));
        }

        #[test]
        fn detected_events_match_cell_fraction(t in table_strategy()) {
            let th = compute_threshold(t.values()).unwrap();
            let events = detect_events(&t, &th);
            let f = event_fractions(&t, &th).unwrap();
            prop_assert_eq!(events.len() as f64 / t.values().len() as f64, f.cell);
            prop_assert!(events.iter().all(|e| e.probability > th.p_th && e.exceedance > 1.0));
        }

        #[test]
        fn analysis_agrees_with_separate_operations(t in table_strategy()) {
            let spec = BinSpec::Linear { lo: 0.0, hi: 1.0, bins: 7 };
            let th = compute_threshold(t.values()).unwrap();
            let fractions = event_fractions(&t, &th).unwrap();
            let hist = histogram(t.values(), &spec).unwrap();
            let max = max_probability(&t).unwrap();
            let cells = t.values().len() as u64;
            let a = analyze_table(t, &spec).unwrap();
            prop_assert!((a.threshold.p_th - th.p_th).abs() <= 1e-15);
            prop_assert_eq!(a.fractions, fractions);
            prop_assert_eq!(a.histogram.total(), cells);
            prop_assert_eq!(a.histogram, hist);
            prop_assert_eq!(a.max_probability, max);
        }
    }
}
