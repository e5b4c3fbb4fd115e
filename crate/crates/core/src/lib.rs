//! Discrete-time quantum walks on a phase-disordered N-cycle and the
//! statistics of their rogue (extreme) occupation probabilities.
//!
//! - [`walk`]: state-vector evolution under shift * coin * phase
//! - [`disorder`]: seeded static phase fields
//! - [`rogue`]: threshold, event detection, histograms
//! - [`experiment`]: ensembles, sweeps, critical disorder and power-law fits
//! - [`output`]: manifests and plot-ready CSV/JSON bundles

pub mod disorder;
pub mod error;
pub mod experiment;
pub mod output;
pub mod rogue;
pub mod walk;

pub use disorder::{DisorderStrength, PhaseCoupling, PhaseField, SeedSpec};
pub use error::{Error, Result};
pub use experiment::{
    estimate_wc, fit_power_law, run_ensemble, search_critical_disorder, sweep_heatmap, sweep_theta,
    CriticalDisorder, EnsembleConfig, EnsembleSummary, PowerLawFit, RunLength, SweepResult,
};
pub use rogue::{
    compute_threshold, detect_events, event_fraction, histogram, max_probability, BinSpec,
    EventRecord, FractionMode, ProbabilityHistogram, RogueThreshold, SpaceTimeTable,
};
pub use walk::{CoinAngle, ProbabilityProfile, ProbabilityRecorder, WalkState};
