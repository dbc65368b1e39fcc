//! Detector-size optimization: global grid search followed by golden-section
//! refinement between the neighbours of the best grid point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tracking_error_analytic, AnalyticConfig};
use crate::error::{Error, Result};
use crate::link::BackgroundCoupling;

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const GOLDEN_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub r_a: f64,
    pub value: f64,
    /// False when the best grid point is an end of the range, in which case
    /// the minimum is not bracketed and no refinement is attempted.
    pub interior: bool,
    /// The `(r_a, objective)` grid in increasing `r_a`.
    pub grid: Vec<(f64, f64)>,
}

/// Minimize `f` over `[lo, hi]` on `points` equally spaced nodes, then refine
/// by golden-section search on the bracket around the best node.
pub fn minimize_on_grid<F>(f: F, lo: f64, hi: f64, points: usize) -> Result<Optimum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain("range", hi - lo, "need finite bounds with min < max"));
    }
    if points < 3 {
        return Err(Error::domain("points", points as f64, "need at least three grid points"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + i as f64 * step })
        .collect();
    let values: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let grid: Vec<(f64, f64)> = xs.iter().copied().zip(values.iter().copied()).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < values[b] { i } else { b });
    if best == 0 || best + 1 == points {
        return Ok(Optimum {
            r_a: xs[best],
            value: values[best],
            interior: false,
            grid,
        });
    }
    let (x, v) = golden_section(&f, xs[best - 1], xs[best + 1], 1e-6 * step)?;
    let (r_a, value) = if v <= values[best] { (x, v) } else { (xs[best], values[best]) };
    Ok(Optimum {
        r_a,
        value,
        interior: true,
        grid,
    })
}

fn golden_section<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_MAX_ITERATIONS {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// An analytic configuration whose detector radius is the free variable. When
/// a background coupling is present the background variance follows the
/// detector area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorScenario {
    pub base: AnalyticConfig,
    pub background: Option<BackgroundCoupling>,
}

impl DetectorScenario {
    pub fn at(&self, r_a: f64) -> Result<AnalyticConfig> {
        let mut cfg = self.base;
        cfg.link.geometry = cfg.link.geometry.with_r_a(r_a);
        cfg.link.geometry.validate()?;
        if let Some(coupling) = &self.background {
            cfg.link.noise = coupling.noise_for(&cfg.link.noise, &cfg.link.geometry)?;
        }
        Ok(cfg)
    }
}

/// Detector radius minimizing the analytic tracking error over `[lo, hi]`.
pub fn optimal_detector_size(scenario: &DetectorScenario, lo: f64, hi: f64, points: usize) -> Result<Optimum> {
    if !(lo > 0.0) {
        return Err(Error::domain("r_a min", lo, "must be positive"));
    }
    minimize_on_grid(|r_a| tracking_error_analytic(&scenario.at(r_a)?), lo, hi, points)
}
