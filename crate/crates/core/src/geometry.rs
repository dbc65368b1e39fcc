//! Receiver geometry: field of view, background power, and the hover-induced
//! angle-of-arrival model that decides which quadrant captures the beam.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::q_function;

const M_TO_CM: f64 = 100.0;

/// Orientation jitter and detector/lens geometry. Lengths in metres, angles
/// in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoverGeometry {
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Quadrant radius.
    pub r_a: f64,
    /// Focal length.
    pub f_c: f64,
}

impl HoverGeometry {
    pub fn new(sigma_x: f64, sigma_y: f64, r_a: f64, f_c: f64) -> Result<Self> {
        let g = Self {
            sigma_x,
            sigma_y,
            r_a,
            f_c,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
            ("r_a", self.r_a),
            ("f_c", self.f_c),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Per-axis angular half-width of the capture region, `atan(r_a / f_c)`.
    pub fn capture_half_angle(&self) -> f64 {
        (self.r_a / self.f_c).atan()
    }

    pub fn with_r_a(mut self, r_a: f64) -> Self {
        self.r_a = r_a;
        self
    }
}

/// Background radiation inputs in the customary optical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundParams {
    /// Spectral radiance, W/(cm^2 um sr).
    pub n_b: f64,
    /// Optical filter bandwidth, um.
    pub b_o: f64,
    /// Lens area, cm^2.
    pub a_a: f64,
}

impl BackgroundParams {
    pub fn new(n_b: f64, b_o: f64, a_a: f64) -> Result<Self> {
        for (name, v) in [("n_b", n_b), ("b_o", b_o), ("a_a", a_a)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "must be non-negative and finite"));
            }
        }
        Ok(Self { n_b, b_o, a_a })
    }

    /// Lens area from an aperture radius given in metres.
    pub fn with_aperture_radius(n_b: f64, b_o: f64, radius_m: f64) -> Result<Self> {
        let r_cm = radius_m * M_TO_CM;
        Self::new(n_b, b_o, std::f64::consts::PI * r_cm * r_cm)
    }
}

pub fn theta_fov(r_a: f64, f_c: f64) -> Result<f64> {
    if !(r_a > 0.0) {
        return Err(Error::domain("r_a", r_a, "must be positive"));
    }
    if !(f_c > 0.0) {
        return Err(Error::domain("f_c", f_c, "must be positive"));
    }
    Ok(2.0 * r_a / f_c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidAngle {
    /// `(pi/2) (1 - cos(theta/2))`.
    pub exact: f64,
    /// `pi theta^2 / 16`, i.e. `pi r_a^2 / (4 f_c^2)`.
    pub small_angle: f64,
}

pub fn solid_angle_fov(theta_fov: f64) -> Result<SolidAngle> {
    if !(theta_fov >= 0.0 && theta_fov < std::f64::consts::PI) {
        return Err(Error::domain("theta_fov", theta_fov, "must lie in [0, pi)"));
    }
    let half = 0.5 * theta_fov;
    // 1 - cos(x) = 2 sin^2(x/2)
    let s = (0.5 * half).sin();
    Ok(SolidAngle {
        exact: std::f64::consts::FRAC_PI_2 * 2.0 * s * s,
        small_angle: std::f64::consts::PI * theta_fov * theta_fov / 16.0,
    })
}

/// Collected background power in watts, small-angle form.
pub fn background_power(geom: &HoverGeometry, bg: &BackgroundParams) -> f64 {
    let r_a = geom.r_a * M_TO_CM;
    let f_c = geom.f_c * M_TO_CM;
    std::f64::consts::PI * r_a * r_a * bg.n_b * bg.b_o * bg.a_a / (4.0 * f_c * f_c)
}

/// Detector quadrant under the labelling 1 = (+,+), 2 = (-,+), 3 = (-,-),
/// 4 = (+,-) in `(theta_x, theta_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4];

    /// Zero-based position, used to index per-quadrant arrays.
    pub fn slot(self) -> usize {
        self as usize
    }

    /// One-based label.
    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_slot(slot: usize) -> Option<Self> {
        Self::ALL.get(slot).copied()
    }
}

/// Where the beam lands for one observation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Capture {
    Quadrant(Quadrant),
    Miss,
}

impl Capture {
    pub fn quadrant(self) -> Option<Quadrant> {
        match self {
            Capture::Quadrant(q) => Some(q),
            Capture::Miss => None,
        }
    }

    /// Signal indicators `D_i`.
    pub fn indicators(self) -> [bool; 4] {
        let mut d = [false; 4];
        if let Capture::Quadrant(q) = self {
            d[q.slot()] = true;
        }
        d
    }
}

pub fn sample_orientation<R: Rng + ?Sized>(rng: &mut R, geom: &HoverGeometry) -> (f64, f64) {
    let zx: f64 = StandardNormal.sample(rng);
    let zy: f64 = StandardNormal.sample(rng);
    (geom.sigma_x * zx, geom.sigma_y * zy)
}

/// Quadrant hit by a beam arriving at `(theta_x, theta_y)`.
///
/// The capture region is the per-axis square `|theta| <= atan(r_a / f_c)`.
/// Points on a quadrant border go to the smallest adjacent index.
pub fn capture_quadrant(theta_x: f64, theta_y: f64, geom: &HoverGeometry) -> Capture {
    let bound = geom.capture_half_angle();
    if !(theta_x.abs() <= bound && theta_y.abs() <= bound) {
        return Capture::Miss;
    }
    let q = if theta_y >= 0.0 {
        if theta_x >= 0.0 {
            Quadrant::Q1
        } else {
            Quadrant::Q2
        }
    } else if theta_x > 0.0 {
        Quadrant::Q4
    } else {
        Quadrant::Q3
    };
    Capture::Quadrant(q)
}

/// Probability `P_D1` that the beam lands in one given quadrant.
pub fn capture_probability(geom: &HoverGeometry) -> f64 {
    let bound = geom.capture_half_angle();
    (0.5 - q_function(bound / geom.sigma_x)) * (0.5 - q_function(bound / geom.sigma_y))
}

/// Probability `P_f = 1 - 4 P_D1` of full misalignment.
pub fn misalignment_probability(geom: &HoverGeometry) -> f64 {
    let bound = geom.capture_half_angle();
    let qx = q_function(bound / geom.sigma_x);
    let qy = q_function(bound / geom.sigma_y);
    // expanded so tiny values keep their relative precision
    2.0 * qx + 2.0 * qy - 4.0 * qx * qy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn reference_geometry(sigma: f64, r_a: f64) -> HoverGeometry {
        HoverGeometry::new(sigma, sigma, r_a, 0.05).unwrap()
    }

    #[test]
    fn fov_values() {
        assert!((theta_fov(5e-3, 5e-2).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(theta_fov(0.025, 0.05).unwrap(), 1.0);
        assert_eq!(
            theta_fov(2.0 * 3e-3, 0.05).unwrap(),
            2.0 * theta_fov(3e-3, 0.05).unwrap()
        );
        assert!(theta_fov(0.0, 0.05).is_err());
        assert!(theta_fov(1e-3, -0.05).is_err());
    }

    #[test]
    fn solid_angle_closed_forms() {
        let s = solid_angle_fov(0.2).unwrap();
        assert!((s.exact - 7.847_438_830_551_530e-3).abs() < 1e-15, "{}", s.exact);
        assert!((s.small_angle - 7.853_981_633_974_482e-3).abs() < 1e-15);
        assert!((s.small_angle - s.exact) / s.exact < 1e-3);
        assert_eq!(solid_angle_fov(0.0).unwrap().exact, 0.0);
        assert!(solid_angle_fov(4.0).is_err());
        assert!(solid_angle_fov(-0.1).is_err());
    }

    #[test]
    fn exact_solid_angle_never_exceeds_approximation() {
        for i in 1..2000 {
            let t = std::f64::consts::PI * i as f64 / 2000.0;
            let s = solid_angle_fov(t).unwrap();
            assert!(s.exact <= s.small_angle, "theta={t}");
            if t <= 0.2 {
                assert!((s.small_angle - s.exact) / s.exact < 1e-3);
            }
        }
    }

    #[test]
    fn background_power_with_reference_optics() {
        let g = reference_geometry(5e-3, 5e-3);
        let bg = BackgroundParams::with_aperture_radius(1e-3, 0.01, 0.05).unwrap();
        let p = background_power(&g, &bg);
        assert!((p - 6.168_502_750_680_849e-6).abs() < 1e-18, "{p}");
        let dark = BackgroundParams::new(0.0, 0.01, bg.a_a).unwrap();
        assert_eq!(background_power(&g, &dark), 0.0);
        let p2 = background_power(&g.with_r_a(1e-2), &bg);
        assert!((p2 / p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_variance_and_independence() {
        let g = reference_geometry(5e-3, 5e-3);
        let mut rng = substream(1, 0);
        let n = 1_000_000;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (x, y) = sample_orientation(&mut rng, &g);
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let n = n as f64;
        assert!((sxx / n / 2.5e-5 - 1.0).abs() < 0.01);
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 3.0 / n.sqrt(), "{corr}");
    }

    #[test]
    fn quadrant_labels_and_miss() {
        let g = HoverGeometry::new(5e-3, 5e-3, 5e-3, 5e-2).unwrap();
        let e = 1e-4;
        assert_eq!(capture_quadrant(e, e, &g), Capture::Quadrant(Quadrant::Q1));
        assert_eq!(capture_quadrant(-e, e, &g), Capture::Quadrant(Quadrant::Q2));
        assert_eq!(capture_quadrant(-e, -e, &g), Capture::Quadrant(Quadrant::Q3));
        assert_eq!(capture_quadrant(e, -e, &g), Capture::Quadrant(Quadrant::Q4));
        assert_eq!(capture_quadrant(0.2, 0.0, &g), Capture::Miss);
        assert_eq!(capture_quadrant(0.0, -0.0998, &g), Capture::Miss);
    }

    #[test]
    fn border_ties_go_to_smaller_index() {
        let g = HoverGeometry::new(5e-3, 5e-3, 5e-3, 5e-2).unwrap();
        let e = 1e-3;
        assert_eq!(capture_quadrant(0.0, 0.0, &g), Capture::Quadrant(Quadrant::Q1));
        assert_eq!(capture_quadrant(0.0, e, &g), Capture::Quadrant(Quadrant::Q1));
        assert_eq!(capture_quadrant(e, 0.0, &g), Capture::Quadrant(Quadrant::Q1));
        assert_eq!(capture_quadrant(-e, 0.0, &g), Capture::Quadrant(Quadrant::Q2));
        assert_eq!(capture_quadrant(0.0, -e, &g), Capture::Quadrant(Quadrant::Q3));
        let b = g.capture_half_angle();
        assert_eq!(capture_quadrant(b, b, &g), Capture::Quadrant(Quadrant::Q1));
    }

    #[test]
    fn capture_probability_limits() {
        let tight = reference_geometry(1e-9, 5e-3);
        assert!((capture_probability(&tight) - 0.25).abs() < 1e-15);
        assert_eq!(misalignment_probability(&tight), 0.0);
        let loose = reference_geometry(1e9, 5e-3);
        assert!(capture_probability(&loose) < 1e-20);
        assert!((misalignment_probability(&loose) - 1.0).abs() < 1e-12);
        let reference = reference_geometry(5e-3, 5e-3);
        assert_eq!(capture_probability(&reference), 0.25);
        assert!(misalignment_probability(&reference) < 1e-80);
    }

    #[test]
    fn probabilities_partition_unity() {
        for sigma in [1e-3, 2e-3, 5e-3, 1e-2, 3e-2] {
            for r_a in [5e-4, 1e-3, 2e-3, 5e-3] {
                let g = reference_geometry(sigma, r_a);
                let total = 4.0 * capture_probability(&g) + misalignment_probability(&g);
                assert!((total - 1.0).abs() < 4.0 * f64::EPSILON, "{sigma} {r_a}: {total}");
            }
        }
    }

    #[test]
    fn capture_probability_monotone() {
        let mut prev = 0.0;
        for i in 1..50 {
            let p = capture_probability(&reference_geometry(5e-3, 1e-4 * i as f64));
            assert!(p >= prev);
            prev = p;
        }
        let mut prev = 1.0;
        for i in 1..50 {
            let p = capture_probability(&reference_geometry(5e-4 * i as f64, 1e-3));
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn miss_frequency_matches_misalignment_probability() {
        let g = reference_geometry(5e-3, 1e-3);
        let mut rng = substream(2, 0);
        let n = 1_000_000u32;
        let mut counts = [0u32; 5];
        for _ in 0..n {
            let (x, y) = sample_orientation(&mut rng, &g);
            match capture_quadrant(x, y, &g) {
                Capture::Quadrant(q) => counts[q.slot()] += 1,
                Capture::Miss => counts[4] += 1,
            }
        }
        let n = n as f64;
        let pf = misalignment_probability(&g);
        let sd = (pf * (1.0 - pf) / n).sqrt();
        assert!((counts[4] as f64 / n - pf).abs() < 3.0 * sd);
        let pd = capture_probability(&g);
        let sd = (pd * (1.0 - pd) / n).sqrt();
        for c in &counts[..4] {
            assert!((*c as f64 / n - pd).abs() < 3.0 * sd);
        }
    }
}
