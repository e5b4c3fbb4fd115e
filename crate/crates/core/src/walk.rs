//! State-vector evolution of a two-state walker on an N-cycle.
//!
//! One step applies the phase gain, then the coin, then the conditional
//! shift. Amplitudes live in two parallel arrays, one per coin state, so every
//! sub-operator is a single contiguous pass. Evolution is purely unitary: no
//! renormalization happens unless [`WalkState::renormalize`] is called
//! explicitly.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disorder::PhaseField;
use crate::error::{Error, Result};

/// Coin parameter in `[0, pi/2]`: 0 is Pauli-Z, pi/4 Hadamard, pi/2 Pauli-X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CoinAngle {
    theta: f64,
    cos: f64,
    sin: f64,
}

impl CoinAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::InvalidAngle(theta));
        }
        Ok(CoinAngle {
            theta,
            cos: theta.cos(),
            sin: theta.sin(),
        })
    }

    /// Angle given as a multiple of pi, so `from_pi_fraction(0.25)` is pi/4.
    pub fn from_pi_fraction(fraction: f64) -> Result<Self> {
        Self::new(fraction * PI)
    }

    pub fn hadamard() -> Self {
        Self::new(std::f64::consts::FRAC_PI_4).unwrap()
    }

    pub fn radians(&self) -> f64 {
        self.theta
    }

    pub fn cos(&self) -> f64 {
        self.cos
    }

    pub fn sin(&self) -> f64 {
        self.sin
    }
}

impl TryFrom<f64> for CoinAngle {
    type Error = Error;

    fn try_from(theta: f64) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<CoinAngle> for f64 {
    fn from(coin: CoinAngle) -> f64 {
        coin.theta
    }
}

/// Occupation probabilities `P_n = |a_n|^2 + |b_n|^2` at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityProfile {
    pub time: u64,
    pub values: Vec<f64>,
}

impl ProbabilityProfile {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Receives probability profiles during [`WalkState::evolve`].
pub trait ProbabilityRecorder {
    fn record(&mut self, time: u64, probabilities: &[f64]);
}

impl<F> ProbabilityRecorder for F
where
    F: FnMut(u64, &[f64]),
{
    fn record(&mut self, time: u64, probabilities: &[f64]) {
        self(time, probabilities)
    }
}

/// Walker wavefunction: `up[n]` is `a_n`, `down[n]` is `b_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    up: Vec<Complex64>,
    down: Vec<Complex64>,
    time: u64,
}

impl WalkState {
    /// Uniform superposition `(|up> + i|down>) / sqrt(2N)` on every site.
    pub fn initial(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidSize(n_sites));
        }
        let amp = 1.0 / (2.0 * n_sites as f64).sqrt();
        Ok(WalkState {
            up: vec![Complex64::new(amp, 0.0); n_sites],
            down: vec![Complex64::new(0.0, amp); n_sites],
            time: 0,
        })
    }

    /// Builds a state at `t = 0` from explicit amplitudes. Normalization is
    /// left to the caller.
    pub fn from_amplitudes(up: Vec<Complex64>, down: Vec<Complex64>) -> Result<Self> {
        if up.len() < 2 {
            return Err(Error::InvalidSize(up.len()));
        }
        if down.len() != up.len() {
            return Err(Error::ShapeMismatch {
                expected: up.len(),
                found: down.len(),
            });
        }
        Ok(WalkState { up, down, time: 0 })
    }

    pub fn n_sites(&self) -> usize {
        self.up.len()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn up(&self) -> &[Complex64] {
        &self.up
    }

    pub fn down(&self) -> &[Complex64] {
        &self.down
    }

    /// `sum_n |a_n|^2 + |b_n|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.up.iter().chain(&self.down).map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> ProbabilityProfile {
        let mut values = vec![0.0; self.n_sites()];
        self.probabilities_into(&mut values);
        ProbabilityProfile {
            time: self.time,
            values,
        }
    }

    /// Writes `P_n` into `out`, which must hold exactly `n_sites` values.
    pub fn probabilities_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_sites());
        for ((p, a), b) in out.iter_mut().zip(&self.up).zip(&self.down) {
            *p = a.norm_sqr() + b.norm_sqr();
        }
    }

    /// Diagnostic only; experiments never call this.
    pub fn renormalize(&mut self) {
        let scale = 1.0 / self.norm_sqr().sqrt();
        for z in self.up.iter_mut().chain(self.down.iter_mut()) {
            *z *= scale;
        }
    }

    /// `(a, b) <- (a cos + b sin, a sin - b cos)` on every site.
    pub fn apply_coin(&mut self, coin: CoinAngle) {
        let (c, s) = (coin.cos, coin.sin);
        for (a, b) in self.up.iter_mut().zip(self.down.iter_mut()) {
            let (a0, b0) = (*a, *b);
            *a = a0 * c + b0 * s;
            *b = a0 * s - b0 * c;
        }
    }

    /// Up amplitudes move one site right, down amplitudes one site left,
    /// wrapping around the cycle.
    pub fn apply_shift(&mut self) {
        self.up.rotate_right(1);
        self.down.rotate_left(1);
    }

    pub fn apply_phase(&mut self, field: &PhaseField) -> Result<()> {
        self.check_field(field)?;
        for (a, f) in self.up.iter_mut().zip(field.up_factors()) {
            *a *= f;
        }
        for (b, f) in self.down.iter_mut().zip(field.down_factors()) {
            *b *= f;
        }
        Ok(())
    }

    /// One application of shift * coin * phase; advances time by one.
    pub fn step(&mut self, coin: CoinAngle, field: &PhaseField) -> Result<()> {
        self.check_field(field)?;
        self.step_unchecked(coin, field);
        Ok(())
    }

    // Fused phase + coin pass. Performs the same floating-point operations as
    // apply_phase followed by apply_coin, so results are bit-identical.
    fn step_unchecked(&mut self, coin: CoinAngle, field: &PhaseField) {
        let (c, s) = (coin.cos, coin.sin);
        let sites = self
            .up
            .iter_mut()
            .zip(self.down.iter_mut())
            .zip(field.up_factors().iter().zip(field.down_factors()));
        for ((a, b), (fu, fd)) in sites {
            let a0 = *a * fu;
            let b0 = *b * fd;
            *a = a0 * c + b0 * s;
            *b = a0 * s - b0 * c;
        }
        self.apply_shift();
        self.time += 1;
    }

    /// Applies [`step`](Self::step) `steps` times, handing the probability
    /// profile to `recorder` after every step whose time is a multiple of
    /// `stride`.
    pub fn evolve<R>(
        &mut self,
        coin: CoinAngle,
        field: &PhaseField,
        steps: u64,
        stride: u64,
        recorder: &mut R,
    ) -> Result<()>
    where
        R: ProbabilityRecorder + ?Sized,
    {
        if steps == 0 {
            return Err(Error::InvalidSteps);
        }
        if stride == 0 {
            return Err(Error::InvalidConfig(
                "record stride must be at least 1".into(),
            ));
        }
        self.check_field(field)?;
        let mut profile = vec![0.0; self.n_sites()];
        for _ in 0..steps {
            self.step_unchecked(coin, field);
            if self.time.is_multiple_of(stride) {
                self.probabilities_into(&mut profile);
                recorder.record(self.time, &profile);
            }
        }
        Ok(())
    }

    fn check_field(&self, field: &PhaseField) -> Result<()> {
        if field.n_sites() != self.n_sites() {
            return Err(Error::ShapeMismatch {
                expected: self.n_sites(),
                found: field.n_sites(),
            });
        }
        Ok(())
    }
}
