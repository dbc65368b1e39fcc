//! Closed-form high-SNR approximation of the tracking-error probability,
//! averaged over the composite fading, and the detector-size optimizer.
//!
//! For a window with `m` one-bits the correct quadrant beats one rival when a
//! Gaussian statistic is positive. Its quadratic noise terms are dropped at
//! high SNR and the three pairwise comparisons are treated as independent.

mod audit;
mod optimize;

pub use audit::{audit_approximation, AuditConfig, AuditRow};
pub use optimize::{minimize_on_grid, optimal_detector_size, DetectorScenario, Optimum};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, ChannelSampler, CompositeFading};
use crate::error::{Error, Result};
use crate::geometry::misalignment_probability;
use crate::link::NoiseModel;
use crate::quadrature::Tolerance;
use crate::rng::{substream, AUX_STREAM_BASE};
use crate::special::{one_minus_cube_complement, q_function};
use crate::tracking::LinkConfig;

/// Conditional tracking error of an all-zero window: the four metrics tie and
/// the uniform tie-break is right one time in four.
pub const ALL_ZERO_ERROR: f64 = 0.75;

/// Inputs of the analytic evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConfig {
    pub link: LinkConfig,
    pub quadrature: Tolerance,
}

impl AnalyticConfig {
    pub fn new(link: LinkConfig) -> Self {
        Self {
            link,
            quadrature: default_tolerance(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        let t = &self.quadrature;
        if !(t.rel > 0.0 || t.abs > 0.0) || t.rel < 0.0 || t.abs < 0.0 {
            return Err(Error::domain("quadrature.rel", t.rel, "tolerance must be positive"));
        }
        if t.max_intervals == 0 {
            return Err(Error::domain(
                "quadrature.max_intervals",
                0.0,
                "at least one interval is required",
            ));
        }
        Ok(())
    }
}

pub fn default_tolerance() -> Tolerance {
    Tolerance::relative(1e-7).with_abs(1e-14)
}

/// Standard deviation of the linearized pairwise statistic
/// `2 mu (A n_1 - B n_2)` with `mu = h m (2 p_t)`,
/// `A = sigma_s^2 mu + L_s sigma_0^2` and `B = L_s sigma_0^2`.
pub fn sigma_tc(h: f64, m: u32, noise: &NoiseModel, l_s: u32, p_t: f64) -> f64 {
    let (mu, a, b) = pairwise_terms(h, m, noise, l_s, p_t);
    let ta = 2.0 * mu * a;
    let tb = 2.0 * mu * b;
    (ta * ta * a + b * tb * tb).sqrt()
}

fn pairwise_terms(h: f64, m: u32, noise: &NoiseModel, l_s: u32, p_t: f64) -> (f64, f64, f64) {
    let mu = h * m as f64 * 2.0 * p_t;
    let b = l_s as f64 * noise.sigma_0_sq();
    (mu, noise.sigma_s_sq * mu + b, b)
}

/// Argument of the Gaussian tail in the pairwise correct-decision probability,
/// `mu^2 (sigma_s^2 mu + 2 B) / sigma_tc`.
fn pairwise_snr(h: f64, m: u32, noise: &NoiseModel, l_s: u32, p_t: f64) -> f64 {
    let (mu, a, b) = pairwise_terms(h, m, noise, l_s, p_t);
    // mu cancels between numerator and sigma_tc
    (mu * (a + b)) / (2.0 * (a * a * a + b * b * b).sqrt())
}

/// High-SNR probability that the illuminated quadrant beats one given rival,
/// `1 - Q(mu^2 (sigma_s^2 mu + 2 B) / sigma_tc)`.
pub fn correct_track_prob_cond(h: f64, m: u32, noise: &NoiseModel, l_s: u32, p_t: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain(
            "m",
            0.0,
            "an all-zero window ties every quadrant; use the tie value",
        ));
    }
    if m > l_s {
        return Err(Error::domain("m", m as f64, "cannot exceed the window length"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain("h", h, "must be positive and finite"));
    }
    Ok(1.0 - q_function(pairwise_snr(h, m, noise, l_s, p_t)))
}

/// Approximate tracking error given `(h, m)`: `1 - P^3` with `P` the pairwise
/// probability, or the exact tie value when `m = 0`.
pub fn conditional_error(h: f64, m: u32, noise: &NoiseModel, l_s: u32, p_t: f64) -> f64 {
    if m == 0 {
        return ALL_ZERO_ERROR;
    }
    if h <= 0.0 {
        return one_minus_cube_complement(0.5);
    }
    one_minus_cube_complement(q_function(pairwise_snr(h, m, noise, l_s, p_t)))
}

/// Binomial weights `C(l_s, m) 2^-l_s` for `m = 0..=l_s`.
pub fn window_weights(l_s: u32) -> Vec<f64> {
    let mut w = Vec::with_capacity(l_s as usize + 1);
    let mut ln_c = 0.0f64;
    let ln_half = -(l_s as f64) * std::f64::consts::LN_2;
    for m in 0..=l_s {
        if m > 0 {
            ln_c += ((l_s - m + 1) as f64).ln() - (m as f64).ln();
        }
        w.push((ln_c + ln_half).exp());
    }
    w
}

/// Way of computing `E[g(h)]` over the composite fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingExpectation {
    Quadrature(Tolerance),
    /// Sample mean over `samples` fading draws from substreams of `seed`.
    MonteCarlo { samples: u64, seed: u64 },
}

/// Value of an expectation together with its error estimate (quadrature
/// error bound, or the standard error for Monte Carlo).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub value: f64,
    pub error: f64,
}

/// `E[g(h)] = int_0^inf g(h) f_h(h) dh`.
pub fn integrate_over_fading<G>(g: G, channel: &ChannelParams, method: FadingExpectation) -> Result<Expectation>
where
    G: Fn(f64) -> f64 + Sync,
{
    match method {
        FadingExpectation::Quadrature(tol) => {
            let fading = CompositeFading::new(channel)?;
            let r = fading.expectation(&g, tol)?;
            Ok(Expectation {
                value: r.value,
                error: r.error,
            })
        }
        FadingExpectation::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::domain("samples", samples as f64, "need at least two draws"));
            }
            fading_monte_carlo(&g, channel, samples, seed)
        }
    }
}

fn fading_monte_carlo<G>(g: &G, channel: &ChannelParams, samples: u64, seed: u64) -> Result<Expectation>
where
    G: Fn(f64) -> f64 + Sync,
{
    use rand_distr::Distribution;
    const CHUNK: u64 = 1 << 16;
    channel.validate()?;
    let sampler = ChannelSampler::new(channel);
    let chunks = samples.div_ceil(CHUNK);
    // per-chunk partial sums are reduced in chunk order for reproducibility
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, AUX_STREAM_BASE + c);
            let n = CHUNK.min(samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let v = g(sampler.sample(&mut rng));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    if !s.is_finite() || !s2.is_finite() {
        return Err(Error::NonFinite {
            what: "Monte-Carlo expectation",
        });
    }
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Expectation {
        value: mean,
        error: (var / n).sqrt(),
    })
}

/// Components of the analytic tracking-error probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBreakdown {
    /// Full misalignment probability.
    pub p_f: f64,
    /// Contribution `(3/4) 2^-L_s` of all-zero windows.
    pub all_zero: f64,
    /// Fading-averaged conditional error from windows with `m >= 1`.
    pub signal: Expectation,
    pub p_te: f64,
}

/// `P_te = P_f + (1 - P_f) [ (3/4) 2^-L_s + sum_{m>=1} C(L_s, m) 2^-L_s E_h(1 - P^3) ]`.
pub fn tracking_error_breakdown(cfg: &AnalyticConfig, method: FadingExpectation) -> Result<AnalyticBreakdown> {
    cfg.validate()?;
    let link = &cfg.link;
    let weights = window_weights(link.l_s);
    let noise = link.noise;
    let (l_s, p_t) = (link.l_s, link.p_t);
    let g = |h: f64| -> f64 {
        weights
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, w)| w * conditional_error(h, m as u32, &noise, l_s, p_t))
            .sum()
    };
    let signal = integrate_over_fading(g, &link.channel, method)?;
    let p_f = misalignment_probability(&link.geometry);
    let all_zero = ALL_ZERO_ERROR * weights[0];
    let conditional = (all_zero + signal.value).clamp(0.0, 1.0);
    let p_te = p_f + (1.0 - p_f) * conditional;
    if !p_te.is_finite() {
        return Err(Error::NonFinite {
            what: "analytic tracking error",
        });
    }
    Ok(AnalyticBreakdown {
        p_f,
        all_zero,
        signal,
        p_te,
    })
}

pub fn tracking_error_analytic(cfg: &AnalyticConfig) -> Result<f64> {
    Ok(tracking_error_breakdown(cfg, FadingExpectation::Quadrature(cfg.quadrature))?.p_te)
}

/// High-power limit `P_f + (1 - P_f) (3/4) 2^-L_s`.
pub fn tracking_error_floor(link: &LinkConfig) -> f64 {
    let p_f = misalignment_probability(&link.geometry);
    p_f + (1.0 - p_f) * ALL_ZERO_ERROR * 2f64.powi(-(link.l_s as i32))
}
