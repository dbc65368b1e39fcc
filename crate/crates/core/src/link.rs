//! Per-symbol quadrant outputs under OOK and their aggregation over an
//! observation window.
//!
//! Signals are in normalized units with unit responsivity. A one-bit is sent
//! at optical power `2 p_t` and a zero-bit at 0, so `p_t` is the average power.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{background_power, BackgroundParams, Capture, HoverGeometry};

/// Receiver noise. The signal-independent variance is
/// `sigma_0_sq = sigma_b_sq + sigma_th_sq`; the shot-noise variance of a
/// quadrant receiving signal `x` is `sigma_s_sq * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_s_sq: f64,
    pub sigma_th_sq: f64,
    pub sigma_b_sq: f64,
}

impl NoiseModel {
    pub fn new(sigma_s_sq: f64, sigma_th_sq: f64, sigma_b_sq: f64) -> Result<Self> {
        let n = Self {
            sigma_s_sq,
            sigma_th_sq,
            sigma_b_sq,
        };
        n.validate()?;
        Ok(n)
    }

    /// Background variance proportional to the collected background power,
    /// `sigma_b_sq = kappa * p_b`.
    pub fn with_background_power(
        sigma_s_sq: f64,
        sigma_th_sq: f64,
        kappa: f64,
        p_b: f64,
    ) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::domain("kappa", kappa, "must be non-negative and finite"));
        }
        Self::new(sigma_s_sq, sigma_th_sq, kappa * p_b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_s_sq", self.sigma_s_sq),
            ("sigma_th_sq", self.sigma_th_sq),
            ("sigma_b_sq", self.sigma_b_sq),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "must be non-negative and finite"));
            }
        }
        if !(self.sigma_0_sq() > 0.0) {
            return Err(Error::domain(
                "sigma_0_sq",
                self.sigma_0_sq(),
                "background plus thermal variance must be positive",
            ));
        }
        Ok(())
    }

    pub fn sigma_0_sq(&self) -> f64 {
        self.sigma_b_sq + self.sigma_th_sq
    }

    /// Variance of one symbol at a quadrant receiving signal `x`.
    pub fn symbol_variance(&self, x: f64) -> f64 {
        self.sigma_s_sq * x + self.sigma_0_sq()
    }
}

/// Ties the background variance to the background power collected through
/// the detector geometry, `sigma_b_sq = kappa * P_b(r_a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundCoupling {
    pub background: BackgroundParams,
    pub kappa: f64,
}

impl BackgroundCoupling {
    /// `base` with its background variance replaced by the coupled value.
    pub fn noise_for(&self, base: &NoiseModel, geom: &HoverGeometry) -> Result<NoiseModel> {
        NoiseModel::with_background_power(
            base.sigma_s_sq,
            base.sigma_th_sq,
            self.kappa,
            background_power(geom, &self.background),
        )
    }
}

/// Optical amplitude of one OOK symbol.
pub fn symbol_amplitude(bit: bool, p_t: f64) -> f64 {
    if bit {
        2.0 * p_t
    } else {
        0.0
    }
}

/// Summed quadrant outputs over one observation window, together with the
/// conditioning quantities the tracker is allowed to know.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowObservation {
    pub r_prime: [f64; 4],
    pub l_s: u32,
    /// Number of one-bits in the window.
    pub m: u32,
    pub h: f64,
    pub p_t: f64,
    pub true_capture: Capture,
}

impl WindowObservation {
    /// Aggregated signal mean at the illuminated quadrant, `h m (2 p_t)`.
    pub fn signal_mean(&self) -> f64 {
        self.h * self.m as f64 * 2.0 * self.p_t
    }

    /// Variance of the aggregated output at quadrant `slot`.
    pub fn variance(&self, noise: &NoiseModel, slot: usize) -> f64 {
        let target = self.true_capture.indicators()[slot];
        aggregated_variance(noise, self.h, self.m, self.l_s, self.p_t, target)
    }
}

/// Variance of an aggregated quadrant output:
/// `sigma_s_sq h D m (2 p_t) + l_s sigma_0_sq`.
pub fn aggregated_variance(noise: &NoiseModel, h: f64, m: u32, l_s: u32, p_t: f64, target: bool) -> f64 {
    let signal = if target { h * m as f64 * 2.0 * p_t } else { 0.0 };
    noise.sigma_s_sq * signal + l_s as f64 * noise.sigma_0_sq()
}

pub fn generate_bits<R: Rng + ?Sized>(rng: &mut R, l_s: usize) -> Vec<bool> {
    let mut bits = Vec::with_capacity(l_s);
    fill_bits(rng, l_s, &mut bits);
    bits
}

pub(crate) fn fill_bits<R: Rng + ?Sized>(rng: &mut R, l_s: usize, bits: &mut Vec<bool>) {
    bits.clear();
    bits.extend((0..l_s).map(|_| rng.random::<bool>()));
}

/// The four quadrant samples for one symbol. All four noise terms are drawn
/// even when they are not needed, so the stream position after a symbol never
/// depends on the bit or the capture state.
pub fn receive_symbol<R: Rng + ?Sized>(
    rng: &mut R,
    bit: bool,
    h: f64,
    capture: Capture,
    noise: &NoiseModel,
    p_t: f64,
) -> [f64; 4] {
    let s = symbol_amplitude(bit, p_t);
    let d = capture.indicators();
    let mut out = [0.0; 4];
    for (i, r) in out.iter_mut().enumerate() {
        let x = if d[i] { h * s } else { 0.0 };
        let z: f64 = StandardNormal.sample(rng);
        *r = x + noise.symbol_variance(x).sqrt() * z;
    }
    out
}

/// Componentwise sum of the per-symbol samples of one window.
pub fn aggregate_window(
    samples: &[[f64; 4]],
    bits: &[bool],
    h: f64,
    p_t: f64,
    true_capture: Capture,
) -> WindowObservation {
    debug_assert_eq!(samples.len(), bits.len());
    let mut r_prime = [0.0; 4];
    for s in samples {
        for (acc, v) in r_prime.iter_mut().zip(s) {
            *acc += v;
        }
    }
    WindowObservation {
        r_prime,
        l_s: bits.len() as u32,
        m: bits.iter().filter(|&&b| b).count() as u32,
        h,
        p_t,
        true_capture,
    }
}

/// Reusable buffers for the bits and per-symbol samples of one window.
#[derive(Debug, Default, Clone)]
pub struct WindowBuffer {
    pub bits: Vec<bool>,
    pub samples: Vec<[f64; 4]>,
}

impl WindowBuffer {
    /// Draw bits and symbols for a fresh window and return its aggregate.
    pub fn simulate<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        l_s: usize,
        h: f64,
        capture: Capture,
        noise: &NoiseModel,
        p_t: f64,
    ) -> WindowObservation {
        fill_bits(rng, l_s, &mut self.bits);
        self.samples.clear();
        for &bit in &self.bits {
            self.samples.push(receive_symbol(rng, bit, h, capture, noise, p_t));
        }
        aggregate_window(&self.samples, &self.bits, h, p_t, capture)
    }
}
