//! Composite fading channel `h = h_l * h_a * h_p`.
//!
//! `h_a` is unit-mean Gamma-Gamma turbulence, `h_p` the pointing-loss factor
//! with density `gamma^2 x^(gamma^2 - 1) / A0^(gamma^2)` on `(0, A0]`, and
//! `h_l` a deterministic attenuation. The density of `h` is evaluated as a
//! one-dimensional integral over the turbulence state instead of through the
//! Meijer-G closed form.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, gauss_kronrod_21, Integral, Tolerance};
use crate::special::ln_bessel_k;

/// Upper-tail mass of the turbulence factor ignored by the quadratures.
const TURBULENCE_TAIL_MASS: f64 = 1e-12;
/// Target mass of `h` left below the lower integration limit.
const LOWER_TAIL_MASS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Large-scale eddy shape.
    pub alpha: f64,
    /// Small-scale eddy shape.
    pub beta: f64,
    /// Equivalent beam radius over pointing jitter.
    pub gamma_ratio: f64,
    /// Maximal collected-power fraction.
    pub a0: f64,
    /// Deterministic attenuation.
    pub h_l: f64,
}

impl ChannelParams {
    pub fn new(alpha: f64, beta: f64, gamma_ratio: f64, a0: f64, h_l: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma_ratio,
            a0,
            h_l,
        };
        p.validate()?;
        Ok(p)
    }

    /// Shapes from the plane-wave Rytov-variance model.
    pub fn from_rytov(rytov_variance: f64, gamma_ratio: f64, a0: f64, h_l: f64) -> Result<Self> {
        let (alpha, beta) = gg_params_from_rytov(rytov_variance)?;
        Self::new(alpha, beta, gamma_ratio, a0, h_l)
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("gamma_ratio", self.gamma_ratio)?;
        if !(self.a0 > 0.0 && self.a0 <= 1.0) {
            return Err(Error::domain("a0", self.a0, "must lie in (0, 1]"));
        }
        if !(self.h_l > 0.0 && self.h_l <= 1.0) {
            return Err(Error::domain("h_l", self.h_l, "must lie in (0, 1]"));
        }
        Ok(())
    }

    fn gamma_sq(&self) -> f64 {
        self.gamma_ratio * self.gamma_ratio
    }

    /// Largest value of `h` for unit turbulence, `h_l * A0`.
    pub fn scale(&self) -> f64 {
        self.h_l * self.a0
    }

    /// `E[h] = h_l A0 gamma^2 / (gamma^2 + 1)`.
    pub fn mean(&self) -> f64 {
        let g2 = self.gamma_sq();
        self.scale() * g2 / (g2 + 1.0)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "must be positive and finite"))
    }
}

/// Plane-wave Gamma-Gamma shapes `(alpha, beta)` for a Rytov variance.
pub fn gg_params_from_rytov(rytov_variance: f64) -> Result<(f64, f64)> {
    if !(rytov_variance > 0.0 && rytov_variance.is_finite()) {
        return Err(Error::domain(
            "rytov_variance",
            rytov_variance,
            "must be positive and finite",
        ));
    }
    let s2 = rytov_variance;
    let s125 = s2.powf(1.2);
    let large = 0.49 * s2 / (1.0 + 1.11 * s125).powf(7.0 / 6.0);
    let small = 0.51 * s2 / (1.0 + 0.69 * s125).powf(5.0 / 6.0);
    Ok((1.0 / large.exp_m1(), 1.0 / small.exp_m1()))
}

/// One unit-mean Gamma-Gamma draw as the product of two unit-mean Gamma
/// variates.
pub fn sample_turbulence<R: Rng + ?Sized>(rng: &mut R, alpha: f64, beta: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    let ga = unit_mean_gamma(alpha);
    let gb = unit_mean_gamma(beta);
    Ok(ga.sample(rng) * gb.sample(rng))
}

fn unit_mean_gamma(shape: f64) -> Gamma<f64> {
    Gamma::new(shape, 1.0 / shape).expect("shape checked positive")
}

/// Pointing factor for a uniform variate `u` in `(0, 1]` (inverse CDF).
pub fn pointing_from_uniform(u: f64, gamma_ratio: f64, a0: f64) -> f64 {
    a0 * u.powf(1.0 / (gamma_ratio * gamma_ratio))
}

pub fn sample_pointing<R: Rng + ?Sized>(rng: &mut R, gamma_ratio: f64, a0: f64) -> Result<f64> {
    positive("gamma_ratio", gamma_ratio)?;
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::domain("a0", a0, "must lie in (0, 1]"));
    }
    Ok(pointing_from_uniform(uniform_open_closed(rng), gamma_ratio, a0))
}

/// Uniform on `(0, 1]`.
fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, params: &ChannelParams) -> f64 {
    ChannelSampler::new(params).sample(rng)
}

/// Reusable sampler for `h`; holds the prepared Gamma generators.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    large: Gamma<f64>,
    small: Gamma<f64>,
    inv_gamma_sq: f64,
    scale: f64,
}

impl ChannelSampler {
    pub fn new(params: &ChannelParams) -> Self {
        Self {
            large: unit_mean_gamma(params.alpha),
            small: unit_mean_gamma(params.beta),
            inv_gamma_sq: 1.0 / params.gamma_sq(),
            scale: params.scale(),
        }
    }
}

impl Distribution<f64> for ChannelSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let turbulence = self.large.sample(rng) * self.small.sample(rng);
        let pointing = uniform_open_closed(rng).powf(self.inv_gamma_sq);
        self.scale * turbulence * pointing
    }
}

/// Unit-mean Gamma-Gamma density.
pub fn gamma_gamma_pdf(a: f64, alpha: f64, beta: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    ln_gamma_gamma_pdf(a, alpha, beta, gg_ln_norm(alpha, beta)).exp()
}

fn gg_ln_norm(alpha: f64, beta: f64) -> f64 {
    std::f64::consts::LN_2 + 0.5 * (alpha + beta) * (alpha * beta).ln()
        - ln_gamma(alpha)
        - ln_gamma(beta)
}

fn ln_gamma_gamma_pdf(a: f64, alpha: f64, beta: f64, ln_norm: f64) -> f64 {
    ln_norm + (0.5 * (alpha + beta) - 1.0) * a.ln()
        + ln_bessel_k(alpha - beta, 2.0 * (alpha * beta * a).sqrt())
}

/// Density of the composite coefficient `h`; zero for `h <= 0`.
pub fn combined_pdf(h: f64, params: &ChannelParams) -> Result<f64> {
    CompositeFading::new(params)?.pdf(h)
}

/// Prepared evaluator for the composite density and expectations under it.
#[derive(Debug, Clone)]
pub struct CompositeFading {
    params: ChannelParams,
    ln_norm: f64,
    /// Turbulence value beyond which the tail mass is negligible.
    a_max: f64,
    h_min: f64,
    h_max: f64,
    inner_tol: Tolerance,
}

impl CompositeFading {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        let a_max = turbulence_upper_limit(params.alpha, params.beta);
        let k = params.gamma_sq().min(params.alpha).min(params.beta);
        let delta = LOWER_TAIL_MASS.powf(1.0 / k.min(1.0)).max(1e-300);
        Ok(Self {
            params: *params,
            ln_norm: gg_ln_norm(params.alpha, params.beta),
            a_max,
            h_min: params.scale() * delta,
            h_max: params.scale() * a_max,
            inner_tol: Tolerance::relative(1e-10),
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    /// Integration range `(h_min, h_max)` holding all but a negligible mass.
    pub fn support(&self) -> (f64, f64) {
        (self.h_min, self.h_max)
    }

    pub fn pdf(&self, h: f64) -> Result<f64> {
        if h <= 0.0 || !h.is_finite() {
            return Ok(0.0);
        }
        let t = h / self.params.scale();
        if t >= self.a_max {
            return Ok(0.0);
        }
        let g2 = self.params.gamma_sq();
        let inner = self.pointing_weighted_tail(t)?;
        if inner <= 0.0 {
            return Ok(0.0);
        }
        Ok((g2.ln() - h.ln() + g2 * t.ln() + inner.ln()).exp())
    }

    /// `int_t^inf a^(-gamma^2) f_GG(a) da`, integrated on a log axis.
    fn pointing_weighted_tail(&self, t: f64) -> Result<f64> {
        let ChannelParams { alpha, beta, .. } = self.params;
        let power = 1.0 - self.params.gamma_sq();
        let ln_norm = self.ln_norm;
        let integrand = |s: f64| {
            let a = s.exp();
            (power * s + ln_gamma_gamma_pdf(a, alpha, beta, ln_norm)).exp()
        };
        let lo = t.ln();
        let hi = self.a_max.ln();
        let mut breaks = vec![lo];
        // GG mode sits near a ~ 1 for moderate shapes
        for b in [-2.0, 0.0, 1.0] {
            if b > lo && b < hi {
                breaks.push(b);
            }
        }
        breaks.push(hi);
        let r = quadrature::integrate_with_breaks(
            integrand,
            &breaks,
            self.inner_tol,
            "composite density inner integral",
        )?;
        Ok(r.value)
    }

    /// `E[g(h)]` by adaptive quadrature against the density on a log-h axis.
    pub fn expectation<G: FnMut(f64) -> f64>(&self, mut g: G, tol: Tolerance) -> Result<Integral> {
        let mut failure = None;
        let integrand = |s: f64| {
            let h = s.exp();
            match self.pdf(h) {
                Ok(p) => p * h * g(h),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let breaks = self.log_breaks();
        let r = quadrature::integrate_with_breaks(
            integrand,
            &breaks,
            tol,
            "expectation over composite fading",
        );
        if let Some(e) = failure {
            return Err(e);
        }
        r
    }

    fn log_breaks(&self) -> Vec<f64> {
        let lo = self.h_min.ln();
        let hi = self.h_max.ln();
        let c = self.params.scale().ln();
        let mut breaks = vec![lo];
        for b in [c - 20.0, c - 10.0, c - 5.0, c - 2.0, c - 1.0, c, c + 1.0] {
            if b > lo && b < hi {
                breaks.push(b);
            }
        }
        breaks.push(hi);
        breaks
    }

    /// Cumulative distribution tabulated on `panels` equal log-h panels by
    /// integrating the density panel by panel.
    pub fn cdf_table(&self, panels: usize) -> Result<CdfTable> {
        assert!(panels >= 1);
        let lo = self.h_min.ln();
        let hi = self.h_max.ln();
        let width = (hi - lo) / panels as f64;
        let mut ln_h = Vec::with_capacity(panels + 1);
        let mut cdf = Vec::with_capacity(panels + 1);
        ln_h.push(lo);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut failure = None;
        let mut f = |s: f64| {
            let h = s.exp();
            match self.pdf(h) {
                Ok(p) => p * h,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        };
        for i in 0..panels {
            let a = lo + i as f64 * width;
            let b = if i + 1 == panels { hi } else { a + width };
            let (v, _) = gauss_kronrod_21(&mut f, a, b);
            acc += v;
            ln_h.push(b);
            cdf.push(acc);
        }
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(CdfTable { ln_h, cdf })
    }
}

/// Smallest `t` (a power of two) with union-bound tail `P(a > t)` below the
/// ignored mass.
fn turbulence_upper_limit(alpha: f64, beta: f64) -> f64 {
    let tail = |t: f64| {
        let r = t.sqrt();
        gamma_ur(alpha, alpha * r) + gamma_ur(beta, beta * r)
    };
    let mut t = 2.0;
    while tail(t) > TURBULENCE_TAIL_MASS && t < 1e12 {
        t *= 2.0;
    }
    t
}

/// Piecewise-linear (in `ln h`) tabulated CDF.
#[derive(Debug, Clone)]
pub struct CdfTable {
    ln_h: Vec<f64>,
    cdf: Vec<f64>,
}

impl CdfTable {
    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().expect("non-empty")
    }

    pub fn cdf(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let s = h.ln();
        let n = self.ln_h.len();
        if s <= self.ln_h[0] {
            return 0.0;
        }
        if s >= self.ln_h[n - 1] {
            return self.cdf[n - 1];
        }
        let i = self.ln_h.partition_point(|&x| x <= s) - 1;
        let w = (s - self.ln_h[i]) / (self.ln_h[i + 1] - self.ln_h[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Kolmogorov-Smirnov distance between this CDF and the empirical CDF of
    /// `sorted` samples.
    pub fn ks_statistic(&self, sorted: &[f64]) -> f64 {
        let n = sorted.len() as f64;
        sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = self.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}
