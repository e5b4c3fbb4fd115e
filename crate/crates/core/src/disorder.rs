//! Static random phase disorder `F(c, n) = 2 pi nu`, `nu ~ U[-W, W]`.
//!
//! Every realization draws from its own ChaCha8 stream: the generator is
//! seeded with the master seed and the realization index selects the stream,
//! so fields never depend on how realizations are scheduled across threads.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the per-realization generator, recorded in run manifests.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9): seed_from_u64(master_seed), set_stream(realization_index)";

/// Half-width `W` of the uniform distribution of `nu`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DisorderStrength(f64);

impl DisorderStrength {
    /// At `W = 0.5` the phases already cover the full circle.
    pub const FULL_CIRCLE: f64 = 0.5;

    pub fn new(w: f64) -> Result<Self> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidDisorder(w));
        }
        Ok(DisorderStrength(w))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Values above 0.5 are accepted but add nothing new.
    pub fn exceeds_full_circle(&self) -> bool {
        self.0 > Self::FULL_CIRCLE
    }
}

impl TryFrom<f64> for DisorderStrength {
    type Error = Error;

    fn try_from(w: f64) -> Result<Self> {
        Self::new(w)
    }
}

impl From<DisorderStrength> for f64 {
    fn from(w: DisorderStrength) -> f64 {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub realization_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, realization_index: u64) -> Self {
        SeedSpec {
            master_seed,
            realization_index,
        }
    }
}

/// Random stream for one realization; a pure function of the seed spec.
pub fn derive_stream(seed: SeedSpec) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
    rng.set_stream(seed.realization_index);
    rng
}

/// Whether the two coin states at a site share one phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseCoupling {
    /// `nu` drawn independently for every (coin state, site) pair.
    #[default]
    Independent,
    /// `F(up, n) = F(down, n)`.
    SiteLocked,
}

/// Per-(coin state, site) phases, fixed for the lifetime of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    up_phases: Vec<f64>,
    down_phases: Vec<f64>,
    up_factors: Vec<Complex64>,
    down_factors: Vec<Complex64>,
}

impl PhaseField {
    /// Draws `nu` for every up site in ascending order, then every down site
    /// (skipped when site-locked). This order is part of the reproducibility
    /// contract.
    pub fn generate(
        n_sites: usize,
        w: DisorderStrength,
        seed: SeedSpec,
        coupling: PhaseCoupling,
    ) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidSize(n_sites));
        }
        let mut rng = derive_stream(seed);
        let w = w.value();
        // u in [0, 1); the `+ 0.0` folds -0.0 into 0.0 when w == 0
        let mut draw = || TAU * (w * (2.0 * rng.random::<f64>() - 1.0) + 0.0);
        let up: Vec<f64> = (0..n_sites).map(|_| draw()).collect();
        let down = match coupling {
            PhaseCoupling::Independent => (0..n_sites).map(|_| draw()).collect(),
            PhaseCoupling::SiteLocked => up.clone(),
        };
        Self::from_phases(up, down)
    }

    pub fn from_phases(up_phases: Vec<f64>, down_phases: Vec<f64>) -> Result<Self> {
        if up_phases.len() < 2 {
            return Err(Error::InvalidSize(up_phases.len()));
        }
        if down_phases.len() != up_phases.len() {
            return Err(Error::ShapeMismatch {
                expected: up_phases.len(),
                found: down_phases.len(),
            });
        }
        let factors = |phases: &[f64]| phases.iter().map(|&p| Complex64::cis(p)).collect();
        Ok(PhaseField {
            up_factors: factors(&up_phases),
            down_factors: factors(&down_phases),
            up_phases,
            down_phases,
        })
    }

    pub fn zeros(n_sites: usize) -> Result<Self> {
        Self::from_phases(vec![0.0; n_sites], vec![0.0; n_sites])
    }

    pub fn n_sites(&self) -> usize {
        self.up_phases.len()
    }

    pub fn up_phases(&self) -> &[f64] {
        &self.up_phases
    }

    pub fn down_phases(&self) -> &[f64] {
        &self.down_phases
    }

    /// `exp(i F(up, n))`.
    pub fn up_factors(&self) -> &[Complex64] {
        &self.up_factors
    }

    /// `exp(i F(down, n))`.
    pub fn down_factors(&self) -> &[Complex64] {
        &self.down_factors
    }

    /// CSV dump with header `site,up_phase,down_phase`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["site", "up_phase", "down_phase"])?;
        for (site, (u, d)) in self.up_phases.iter().zip(&self.down_phases).enumerate() {
            wtr.write_record([site.to_string(), u.to_string(), d.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
