//! Audit of the high-SNR approximation against exact Monte-Carlo decisions at
//! fixed `(h, m)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{conditional_error, correct_track_prob_cond, pairwise_snr};
use crate::error::{Error, Result};
use crate::geometry::{Capture, Quadrant};
use crate::link::{aggregated_variance, NoiseModel, WindowObservation};
use crate::rng::{substream, AUX_STREAM_BASE};
use crate::tracking::{decide_quadrant, tracking_metrics};

/// Offset keeping audit streams apart from the fading cross-check streams.
const AUDIT_STREAM_OFFSET: u64 = 1 << 40;

/// Relative discrepancy in an error probability tolerated before a regime is
/// flagged, once the difference is also statistically significant.
const FLAG_RELATIVE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub noise: NoiseModel,
    pub l_s: u32,
    pub p_t: f64,
    pub h_values: Vec<f64>,
    pub m_values: Vec<u32>,
    /// Monte-Carlo draws per `(h, m)` cell.
    pub draws: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub h: f64,
    pub m: u32,
    /// Aggregated signal mean `h m (2 p_t)`.
    pub mu: f64,
    /// Argument of the pairwise Gaussian tail.
    pub snr: f64,
    /// Approximate probability of losing one pairwise comparison.
    pub pairwise_approx: f64,
    pub pairwise_mc: f64,
    pub pairwise_se: f64,
    /// Approximate conditional tracking error `1 - P^3`.
    pub conditional_approx: f64,
    pub conditional_mc: f64,
    pub conditional_se: f64,
    /// Pairwise linearization consistent with the exact comparison.
    pub linearization_ok: bool,
    /// Cube of independent comparisons consistent with the exact four-way
    /// decision.
    pub independence_ok: bool,
}

/// Whether the Monte-Carlo rate is compatible with the approximation. The
/// sampling spread is taken under both the estimate and the approximation so
/// that an empty count against a tiny approximate rate is not flagged.
fn consistent(approx: f64, mc: f64, se: f64, draws: u64) -> bool {
    let diff = (approx - mc).abs();
    let se_null = (approx * (1.0 - approx) / draws as f64).sqrt();
    diff <= 3.0 * se.max(se_null) || diff <= FLAG_RELATIVE * mc
}

/// Evaluate every `(h, m)` cell of the audit grid.
pub fn audit_approximation(cfg: &AuditConfig) -> Result<Vec<AuditRow>> {
    cfg.noise.validate()?;
    if cfg.draws < 2 {
        return Err(Error::domain("draws", cfg.draws as f64, "need at least two draws"));
    }
    let cells: Vec<(f64, u32)> = cfg
        .m_values
        .iter()
        .flat_map(|&m| cfg.h_values.iter().map(move |&h| (h, m)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(h, m))| audit_cell(cfg, h, m, idx as u64))
        .collect()
}

fn audit_cell(cfg: &AuditConfig, h: f64, m: u32, idx: u64) -> Result<AuditRow> {
    let noise = &cfg.noise;
    let (l_s, p_t) = (cfg.l_s, cfg.p_t);
    let pairwise_approx = 1.0 - correct_track_prob_cond(h, m, noise, l_s, p_t)?;
    let conditional_approx = conditional_error(h, m, noise, l_s, p_t);

    let mu = h * m as f64 * 2.0 * p_t;
    let sd_target = aggregated_variance(noise, h, m, l_s, p_t, true).sqrt();
    let sd_other = aggregated_variance(noise, h, m, l_s, p_t, false).sqrt();
    let mut rng = substream(cfg.seed, AUX_STREAM_BASE + AUDIT_STREAM_OFFSET + idx);
    let (mut pair_losses, mut track_errors) = (0u64, 0u64);
    for _ in 0..cfg.draws {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let obs = WindowObservation {
            r_prime: [
                mu + sd_target * z[0],
                sd_other * z[1],
                sd_other * z[2],
                sd_other * z[3],
            ],
            l_s,
            m,
            h,
            p_t,
            true_capture: Capture::Quadrant(Quadrant::Q1),
        };
        let t = tracking_metrics(&obs, noise);
        if t[1] <= t[0] {
            pair_losses += 1;
        }
        if decide_quadrant(t, &mut rng)?.chosen != Quadrant::Q1 {
            track_errors += 1;
        }
    }
    let n = cfg.draws as f64;
    let rate = |k: u64| {
        let p = k as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    };
    let (pairwise_mc, pairwise_se) = rate(pair_losses);
    let (conditional_mc, conditional_se) = rate(track_errors);
    Ok(AuditRow {
        h,
        m,
        mu,
        snr: pairwise_snr(h, m, noise, l_s, p_t),
        pairwise_approx,
        pairwise_mc,
        pairwise_se,
        conditional_approx,
        conditional_mc,
        conditional_se,
        linearization_ok: consistent(pairwise_approx, pairwise_mc, pairwise_se, cfg.draws),
        independence_ok: consistent(conditional_approx, conditional_mc, conditional_se, cfg.draws),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sigma_s_sq: f64) -> AuditConfig {
        AuditConfig {
            noise: NoiseModel::new(sigma_s_sq, 1.0, 0.0).unwrap(),
            l_s: 20,
            p_t: 1.0,
            h_values: vec![0.05, 0.5, 2.0],
            m_values: vec![1, 10],
            draws: 200_000,
            seed: 40,
        }
    }

    #[test]
    fn grid_shape_and_reproducibility() {
        let cfg = config(0.0);
        let a = audit_approximation(&cfg).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, audit_approximation(&cfg).unwrap());
        assert_eq!((a[0].h, a[0].m), (0.05, 1));
        assert_eq!((a[5].h, a[5].m), (2.0, 10));
    }

    #[test]
    fn linearization_exact_without_shot_noise() {
        for row in audit_approximation(&config(0.0)).unwrap() {
            assert!(row.linearization_ok, "{row:?}");
        }
    }

    #[test]
    fn independent_comparisons_overstate_error() {
        let rows = audit_approximation(&config(0.0)).unwrap();
        let low = rows.iter().find(|r| r.h == 0.05 && r.m == 1).unwrap();
        assert!(low.conditional_approx > low.conditional_mc + 3.0 * low.conditional_se);
        assert!(!low.independence_ok, "{low:?}");
        assert!((low.conditional_mc - 0.75).abs() < 0.02);
    }

    #[test]
    fn strong_shot_noise_breaks_linearization() {
        let cfg = AuditConfig {
            noise: NoiseModel::new(5.0, 1.0, 0.0).unwrap(),
            h_values: vec![2.0],
            m_values: vec![2],
            ..config(0.0)
        };
        let row = audit_approximation(&cfg).unwrap()[0];
        assert!(!row.linearization_ok, "{row:?}");
    }

    #[test]
    fn empty_windows_are_rejected() {
        let cfg = AuditConfig {
            m_values: vec![0],
            ..config(0.0)
        };
        assert!(audit_approximation(&cfg).is_err());
    }
}
