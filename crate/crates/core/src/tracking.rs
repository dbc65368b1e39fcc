//! Maximum-likelihood quadrant tracking and Monte-Carlo estimation of the
//! tracking-error probability and the bit-error rate.

use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, ChannelSampler};
use crate::error::{Error, Result};
use crate::geometry::{capture_quadrant, sample_orientation, Capture, HoverGeometry, Quadrant};
use crate::link::{aggregated_variance, NoiseModel, WindowBuffer, WindowObservation};
use crate::rng::{substream, SimRng};

/// Trials per parallel work unit. Fixed so the partition of trials, and hence
/// every reduction, is independent of the number of worker threads.
const BLOCK: u64 = 4096;

const Z_95: f64 = 1.959_963_984_540_054;

/// Everything needed to simulate one observation window end to end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub channel: ChannelParams,
    pub geometry: HoverGeometry,
    pub noise: NoiseModel,
    pub l_s: u32,
    pub p_t: f64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.geometry.validate()?;
        self.noise.validate()?;
        if self.l_s == 0 {
            return Err(Error::domain("l_s", 0.0, "window must hold at least one bit"));
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(Error::domain("p_t", self.p_t, "must be positive and finite"));
        }
        Ok(())
    }
}

/// Metric of quadrant `slot`:
/// `(r_i - mu)^2 / (sigma_s^2 mu + L_s sigma_0^2) + sum_{j != i} r_j^2 / (L_s sigma_0^2)`
/// with `mu = h m (2 p_t)`.
///
/// The four per-quadrant terms are summed in a fixed order, so when `m = 0`
/// all four metrics are bit-for-bit equal.
pub fn tracking_metric(obs: &WindowObservation, noise: &NoiseModel, slot: usize) -> f64 {
    let mu = obs.signal_mean();
    let var_target = aggregated_variance(noise, obs.h, obs.m, obs.l_s, obs.p_t, true);
    let var_other = aggregated_variance(noise, obs.h, obs.m, obs.l_s, obs.p_t, false);
    obs.r_prime
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            if j == slot {
                (r - mu) * (r - mu) / var_target
            } else {
                r * r / var_other
            }
        })
        .sum()
}

pub fn tracking_metrics(obs: &WindowObservation, noise: &NoiseModel) -> [f64; 4] {
    std::array::from_fn(|slot| tracking_metric(obs, noise, slot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingDecision {
    pub chosen: Quadrant,
    pub metrics: [f64; 4],
    pub tie_broken: bool,
}

/// Arg-min over the four metrics. Exact ties are broken uniformly at random;
/// the generator is only advanced when a tie occurs.
pub fn decide_quadrant<R: Rng + ?Sized>(metrics: [f64; 4], rng: &mut R) -> Result<TrackingDecision> {
    if metrics.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite {
            what: "tracking metric",
        });
    }
    let min = metrics.iter().copied().fold(f64::INFINITY, f64::min);
    let mut tied = [0usize; 4];
    let mut n = 0;
    for (slot, &m) in metrics.iter().enumerate() {
        if m == min {
            tied[n] = slot;
            n += 1;
        }
    }
    let slot = if n == 1 { tied[0] } else { tied[rng.random_range(0..n)] };
    Ok(TrackingDecision {
        chosen: Quadrant::from_slot(slot).expect("slot below four"),
        metrics,
        tie_broken: n > 1,
    })
}

/// Maximum-likelihood decision on one symbol sample of the tracked quadrant
/// with known `h`: Gaussian one-hypothesis versus Gaussian zero-hypothesis,
/// allowing for the extra shot-noise variance under a one.
pub fn detect_bit(r: f64, h: f64, noise: &NoiseModel, p_t: f64) -> bool {
    let a = h * 2.0 * p_t;
    let v1 = noise.symbol_variance(a);
    let v0 = noise.sigma_0_sq();
    let ll1 = -0.5 * v1.ln() - (r - a) * (r - a) / (2.0 * v1);
    let ll0 = -0.5 * v0.ln() - r * r / (2.0 * v0);
    ll1 > ll0
}

/// Monte-Carlo probability estimate with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub point_estimate: f64,
    pub half_width_95: f64,
    /// Independent trials (observation windows).
    pub trials: u64,
    /// Counted error events.
    pub events: u64,
    /// Opportunities for an error; equals `trials` for tracking and
    /// `trials * l_s` for bit errors.
    pub opportunities: u64,
    pub seed: u64,
}

impl McEstimate {
    fn binomial(events: u64, trials: u64, seed: u64) -> Self {
        let p = events as f64 / trials as f64;
        Self {
            point_estimate: p,
            half_width_95: Z_95 * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            events,
            opportunities: trials,
            seed,
        }
    }

    /// Rate of events per opportunity where each trial contributes up to
    /// `per_trial` correlated events; the interval uses the between-trial
    /// variance of the per-trial counts.
    fn clustered(sum: u64, sum_sq: u64, trials: u64, per_trial: u64, seed: u64) -> Self {
        let n = trials as f64;
        let mean = sum as f64 / n;
        let var = if trials > 1 {
            ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let k = per_trial as f64;
        Self {
            point_estimate: mean / k,
            half_width_95: Z_95 * (var / n).sqrt() / k,
            trials,
            events: sum,
            opportunities: trials * per_trial,
            seed,
        }
    }

    pub fn lower(&self) -> f64 {
        self.point_estimate - self.half_width_95
    }

    pub fn upper(&self) -> f64 {
        self.point_estimate + self.half_width_95
    }

    /// Half-width relative to the estimate; infinite when nothing was counted.
    pub fn relative_half_width(&self) -> f64 {
        if self.point_estimate > 0.0 {
            self.half_width_95 / self.point_estimate
        } else {
            f64::INFINITY
        }
    }
}

/// Sum of per-trial event counts and of their squares over `trials`
/// independent trials, each on its own substream of `seed`.
fn run_trials<F>(trials: u64, seed: u64, trial: F) -> Result<(u64, u64)>
where
    F: Fn(&mut SimRng, &mut WindowBuffer) -> Result<u64> + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let partial: Result<Vec<(u64, u64)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut buf = WindowBuffer::default();
            let (mut s, mut s2) = (0u64, 0u64);
            for i in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                let mut rng = substream(seed, i);
                let e = trial(&mut rng, &mut buf)?;
                s += e;
                s2 += e * e;
            }
            Ok((s, s2))
        })
        .collect();
    Ok(partial?
        .into_iter()
        .fold((0, 0), |(a, b), (c, d)| (a + c, b + d)))
}

/// A validated link configuration with its fading sampler prepared once.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: LinkConfig,
    sampler: ChannelSampler,
}

impl Simulator {
    pub fn new(cfg: &LinkConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            sampler: ChannelSampler::new(&cfg.channel),
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    /// Draws shared by every trial: fading, orientation, and the resulting capture.
    fn draw_link_state(&self, rng: &mut SimRng) -> (f64, Capture) {
        let h = self.sampler.sample(rng);
        let (tx, ty) = sample_orientation(rng, &self.cfg.geometry);
        (h, capture_quadrant(tx, ty, &self.cfg.geometry))
    }

    /// One tracking trial; true when the tracker fails or the beam misses.
    pub fn tracking_trial(&self, rng: &mut SimRng, buf: &mut WindowBuffer) -> Result<bool> {
        let cfg = &self.cfg;
        let (h, capture) = self.draw_link_state(rng);
        let Capture::Quadrant(truth) = capture else {
            return Ok(true);
        };
        let obs = buf.simulate(rng, cfg.l_s as usize, h, capture, &cfg.noise, cfg.p_t);
        let decision = decide_quadrant(tracking_metrics(&obs, &cfg.noise), rng)?;
        Ok(decision.chosen != truth)
    }

    /// One BER trial: track on the window, then detect every bit from the
    /// chosen quadrant's symbol samples. Returns the number of bit errors.
    pub fn ber_trial(&self, rng: &mut SimRng, buf: &mut WindowBuffer) -> Result<u64> {
        let cfg = &self.cfg;
        let (h, capture) = self.draw_link_state(rng);
        let obs = buf.simulate(rng, cfg.l_s as usize, h, capture, &cfg.noise, cfg.p_t);
        let slot = decide_quadrant(tracking_metrics(&obs, &cfg.noise), rng)?.chosen.slot();
        Ok(buf
            .bits
            .iter()
            .zip(&buf.samples)
            .filter(|(&bit, s)| detect_bit(s[slot], h, &cfg.noise, cfg.p_t) != bit)
            .count() as u64)
    }

    pub fn tracking_error(&self, trials: u64, seed: u64) -> Result<McEstimate> {
        check_trials(trials)?;
        let (errors, _) = run_trials(trials, seed, |rng, buf| {
            self.tracking_trial(rng, buf).map(u64::from)
        })?;
        Ok(McEstimate::binomial(errors, trials, seed))
    }

    pub fn ber(&self, trials: u64, seed: u64) -> Result<McEstimate> {
        check_trials(trials)?;
        let (sum, sum_sq) = run_trials(trials, seed, |rng, buf| self.ber_trial(rng, buf))?;
        Ok(McEstimate::clustered(sum, sum_sq, trials, self.cfg.l_s as u64, seed))
    }
}

pub fn simulate_tracking_error(cfg: &LinkConfig, trials: u64, seed: u64) -> Result<McEstimate> {
    Simulator::new(cfg)?.tracking_error(trials, seed)
}

pub fn simulate_ber(cfg: &LinkConfig, trials: u64, seed: u64) -> Result<McEstimate> {
    Simulator::new(cfg)?.ber(trials, seed)
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::domain("trials", 0.0, "at least one trial is required"));
    }
    Ok(())
}
