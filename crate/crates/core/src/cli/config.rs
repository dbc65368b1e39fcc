//! Experiment configuration: a sectioned TOML file whose every key has a
//! default, so a file holding only a `[sweep]` table is complete.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalyticConfig, DetectorScenario};
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::{BackgroundParams, HoverGeometry};
use crate::link::{BackgroundCoupling, NoiseModel};
use crate::quadrature::Tolerance;
use crate::tracking::LinkConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub rytov_variance: f64,
    /// Explicit Gamma-Gamma shapes; when both are given they replace the
    /// values derived from the Rytov variance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub gamma: f64,
    pub a0: f64,
    pub h_l: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            rytov_variance: 1.0,
            alpha: None,
            beta: None,
            gamma: 1.0,
            a0: 0.0198,
            h_l: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// Hovering standard deviations, rad.
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Quadrant radius, m.
    pub r_a: f64,
    /// Focal length, m.
    pub f_c: f64,
    /// Lens aperture radius, m.
    pub aperture_radius: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            sigma_x: 5e-3,
            sigma_y: 5e-3,
            r_a: 5e-3,
            f_c: 0.05,
            aperture_radius: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    /// Spectral radiance, W/(cm^2 um sr).
    pub n_b: f64,
    /// Optical filter bandwidth, um.
    pub b_o: f64,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        Self { n_b: 1e-3, b_o: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_s_sq: f64,
    pub sigma_th_sq: f64,
    /// Fixed background variance. Mutually exclusive with `background_gain`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b_sq: Option<f64>,
    /// Proportionality constant turning the collected background power into
    /// a background variance, so that it follows the detector size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_gain: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma_s_sq: 0.01,
            sigma_th_sq: 1.0,
            sigma_b_sq: None,
            background_gain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub l_s: u32,
    /// Average transmitted optical power, normalized units.
    pub p_t: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self { l_s: 20, p_t: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tracking,
    Ber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mc,
    Analytic,
    Both,
}

impl Mode {
    pub fn monte_carlo(self) -> bool {
        matches!(self, Mode::Mc | Mode::Both)
    }

    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }
}

/// Parameters that may be swept. `sigma` sets both hovering deviations.
pub const SWEEPABLE: &[&str] = &[
    "p_t",
    "l_s",
    "r_a",
    "f_c",
    "sigma",
    "sigma_x",
    "sigma_y",
    "rytov_variance",
    "gamma",
    "a0",
    "h_l",
    "sigma_s_sq",
    "sigma_th_sq",
    "sigma_b_sq",
    "background_gain",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_metric() -> Metric {
    Metric::Tracking
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            mode: Mode::Both,
            trials: 100_000,
            seed: 1,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let t = crate::analysis::default_tolerance();
        Self {
            rel_tol: t.rel,
            abs_tol: t.abs,
            max_intervals: t.max_intervals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    /// File name stem shared by every emitted format.
    pub name: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "results".into(),
            name: "sweep".into(),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub geometry: GeometrySection,
    pub background: BackgroundSection,
    pub noise: NoiseSection,
    pub link: LinkSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    pub engine: EngineSection,
    pub quadrature: QuadratureSection,
    pub output: OutputSection,
}

/// A fully resolved operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub analytic: AnalyticConfig,
    pub coupling: Option<BackgroundCoupling>,
}

impl OperatingPoint {
    pub fn link(&self) -> &LinkConfig {
        &self.analytic.link
    }

    /// The same point with the detector radius left free.
    pub fn detector_scenario(&self) -> DetectorScenario {
        DetectorScenario {
            base: self.analytic,
            background: self.coupling,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Parse and validate a configuration from its text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| translate_toml_error(text, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Name of the innermost `[table]` header opening before `offset`.
fn section_at(text: &str, offset: usize) -> Option<String> {
    text[..offset.min(text.len())]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && !l.starts_with("[["))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
}

fn translate_toml_error(text: &str, e: &toml::de::Error) -> Error {
    let span = e.span();
    let line = span.as_ref().map(|s| line_of(text, s.start));
    let message = e.message().to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        let key = rest.split('`').next().unwrap_or_default();
        let qualified = match span.as_ref().and_then(|s| section_at(text, s.start)) {
            Some(section) if section != key => format!("{section}.{key}"),
            _ => key.to_string(),
        };
        return Error::UnknownKey {
            key: qualified,
            line,
        };
    }
    Error::ConfigParse { line, message }
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(field, message))
    }
}

fn positive(v: f64, field: &str) -> Result<()> {
    check(v > 0.0 && v.is_finite(), field, "must be positive and finite")
}

fn non_negative(v: f64, field: &str) -> Result<()> {
    check(v >= 0.0 && v.is_finite(), field, "must be non-negative and finite")
}

impl ExperimentConfig {
    /// Check every field and every sweep point; errors name the offending
    /// field as `section.key`.
    pub fn validate(&self) -> Result<()> {
        self.validate_fields()?;
        self.engine_checks()?;
        if let Some(sweep) = &self.sweep {
            check(!sweep.values.is_empty(), "sweep.values", "must hold at least one value")?;
            check(
                SWEEPABLE.contains(&sweep.parameter.as_str()),
                "sweep.parameter",
                &format!("unknown parameter; expected one of {}", SWEEPABLE.join(", ")),
            )?;
            for (i, &v) in sweep.values.iter().enumerate() {
                self.with_value(&sweep.parameter, v)
                    .and_then(|c| c.validate_fields())
                    .map_err(|e| match e {
                        Error::ConfigValidation { field, message } => Error::ConfigValidation {
                            field: format!("sweep.values[{i}]"),
                            message: format!("{field}: {message}"),
                        },
                        other => other,
                    })?;
            }
        }
        Ok(())
    }

    fn validate_fields(&self) -> Result<()> {
        let c = &self.channel;
        positive(c.rytov_variance, "channel.rytov_variance")?;
        match (c.alpha, c.beta) {
            (Some(a), Some(b)) => {
                positive(a, "channel.alpha")?;
                positive(b, "channel.beta")?;
            }
            (None, None) => {}
            (Some(_), None) => return Err(Error::validation("channel.beta", "required when alpha is set")),
            (None, Some(_)) => return Err(Error::validation("channel.alpha", "required when beta is set")),
        }
        positive(c.gamma, "channel.gamma")?;
        check(c.a0 > 0.0 && c.a0 <= 1.0, "channel.a0", "must lie in (0, 1]")?;
        check(c.h_l > 0.0 && c.h_l <= 1.0, "channel.h_l", "must lie in (0, 1]")?;

        let g = &self.geometry;
        positive(g.sigma_x, "geometry.sigma_x")?;
        positive(g.sigma_y, "geometry.sigma_y")?;
        positive(g.r_a, "geometry.r_a")?;
        positive(g.f_c, "geometry.f_c")?;
        positive(g.aperture_radius, "geometry.aperture_radius")?;

        non_negative(self.background.n_b, "background.n_b")?;
        non_negative(self.background.b_o, "background.b_o")?;

        let n = &self.noise;
        non_negative(n.sigma_s_sq, "noise.sigma_s_sq")?;
        non_negative(n.sigma_th_sq, "noise.sigma_th_sq")?;
        if let Some(v) = n.sigma_b_sq {
            non_negative(v, "noise.sigma_b_sq")?;
        }
        if let Some(v) = n.background_gain {
            non_negative(v, "noise.background_gain")?;
            check(
                n.sigma_b_sq.is_none(),
                "noise.background_gain",
                "cannot be combined with noise.sigma_b_sq",
            )?;
        }

        check(self.link.l_s >= 1, "link.l_s", "window must hold at least one bit")?;
        positive(self.link.p_t, "link.p_t")?;

        let q = &self.quadrature;
        non_negative(q.rel_tol, "quadrature.rel_tol")?;
        non_negative(q.abs_tol, "quadrature.abs_tol")?;
        check(q.rel_tol > 0.0 || q.abs_tol > 0.0, "quadrature.rel_tol", "a tolerance must be positive")?;
        check(q.max_intervals >= 1, "quadrature.max_intervals", "must be at least 1")?;

        // remaining physics constraints, e.g. a positive signal-independent variance
        self.operating_point()
            .map(|_| ())
            .map_err(|e| match e {
                Error::Domain { name, reason, .. } => Error::validation(field_of(name), reason),
                other => other,
            })
    }

    fn engine_checks(&self) -> Result<()> {
        check(self.engine.trials >= 1, "engine.trials", "must be at least 1")?;
        if let Some(w) = self.engine.workers {
            check(w >= 1, "engine.workers", "must be at least 1")?;
        }
        check(!self.output.formats.is_empty(), "output.formats", "must list at least one format")?;
        check(!self.output.name.trim().is_empty(), "output.name", "must not be empty")?;
        Ok(())
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_value(&self, parameter: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match parameter {
            "p_t" => c.link.p_t = value,
            "l_s" => {
                check(
                    value.fract() == 0.0 && value >= 0.0 && value <= u32::MAX as f64,
                    "link.l_s",
                    "must be a whole number",
                )?;
                c.link.l_s = value as u32;
            }
            "r_a" => c.geometry.r_a = value,
            "f_c" => c.geometry.f_c = value,
            "sigma" => {
                c.geometry.sigma_x = value;
                c.geometry.sigma_y = value;
            }
            "sigma_x" => c.geometry.sigma_x = value,
            "sigma_y" => c.geometry.sigma_y = value,
            "rytov_variance" => c.channel.rytov_variance = value,
            "gamma" => c.channel.gamma = value,
            "a0" => c.channel.a0 = value,
            "h_l" => c.channel.h_l = value,
            "sigma_s_sq" => c.noise.sigma_s_sq = value,
            "sigma_th_sq" => c.noise.sigma_th_sq = value,
            "sigma_b_sq" => c.noise.sigma_b_sq = Some(value),
            "background_gain" => c.noise.background_gain = Some(value),
            other => {
                return Err(Error::validation(
                    "sweep.parameter",
                    format!("`{other}` cannot be swept"),
                ))
            }
        }
        Ok(c)
    }

    /// The base operating point, ignoring the sweep.
    pub fn operating_point(&self) -> Result<OperatingPoint> {
        let c = &self.channel;
        let channel = match (c.alpha, c.beta) {
            (Some(alpha), Some(beta)) => ChannelParams::new(alpha, beta, c.gamma, c.a0, c.h_l)?,
            _ => ChannelParams::from_rytov(c.rytov_variance, c.gamma, c.a0, c.h_l)?,
        };
        let g = &self.geometry;
        let geometry = HoverGeometry::new(g.sigma_x, g.sigma_y, g.r_a, g.f_c)?;
        let n = &self.noise;
        let base_noise = NoiseModel {
            sigma_s_sq: n.sigma_s_sq,
            sigma_th_sq: n.sigma_th_sq,
            sigma_b_sq: n.sigma_b_sq.unwrap_or(0.0),
        };
        let coupling = match n.background_gain {
            Some(kappa) => Some(BackgroundCoupling {
                background: BackgroundParams::with_aperture_radius(
                    self.background.n_b,
                    self.background.b_o,
                    g.aperture_radius,
                )?,
                kappa,
            }),
            None => None,
        };
        let noise = match &coupling {
            Some(cp) => cp.noise_for(&base_noise, &geometry)?,
            None => {
                base_noise.validate()?;
                base_noise
            }
        };
        let link = LinkConfig {
            channel,
            geometry,
            noise,
            l_s: self.link.l_s,
            p_t: self.link.p_t,
        };
        link.validate()?;
        let q = &self.quadrature;
        Ok(OperatingPoint {
            analytic: AnalyticConfig {
                link,
                quadrature: Tolerance {
                    rel: q.rel_tol,
                    abs: q.abs_tol,
                    max_intervals: q.max_intervals,
                },
            },
            coupling,
        })
    }

    pub fn sweep(&self) -> Result<&SweepSection> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::validation("sweep", "a [sweep] table is required for this command"))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Config field behind a low-level parameter name.
fn field_of(name: &str) -> String {
    match name {
        "sigma_0_sq" => "noise.sigma_th_sq".into(),
        "alpha" | "beta" | "gamma_ratio" | "a0" | "h_l" | "rytov_variance" => {
            format!("channel.{}", if name == "gamma_ratio" { "gamma" } else { name })
        }
        "sigma_x" | "sigma_y" | "r_a" | "f_c" => format!("geometry.{name}"),
        "n_b" | "b_o" => format!("background.{name}"),
        "a_a" => "geometry.aperture_radius".into(),
        "kappa" => "noise.background_gain".into(),
        "sigma_s_sq" | "sigma_th_sq" | "sigma_b_sq" => format!("noise.{name}"),
        "l_s" | "p_t" => format!("link.{name}"),
        other => other.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[sweep]\nparameter = \"p_t\"\nvalues = [1.0, 10.0]\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.link.l_s, 20);
        assert_eq!(cfg.channel.a0, 0.0198);
        assert_eq!(cfg.geometry.sigma_x, 5e-3);
        assert_eq!(cfg.geometry.aperture_radius, 0.05);
        assert_eq!(cfg.background.n_b, 1e-3);
        assert_eq!(cfg.background.b_o, 0.01);
        assert_eq!(cfg.engine.trials, 100_000);
        assert_eq!(cfg.engine.mode, Mode::Both);
        assert_eq!(cfg.sweep().unwrap().metric, Metric::Tracking);
        let point = cfg.operating_point().unwrap();
        assert!((point.link().channel.alpha - 4.393_859_025_392_147).abs() < 1e-12);
    }

    #[test]
    fn zero_window_names_the_field() {
        let err = parse_config(&format!("[link]\nl_s = 0\n{MINIMAL}")).unwrap_err();
        match err {
            Error::ConfigValidation { field, .. } => assert_eq!(field, "link.l_s"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_reports_section_and_line() {
        let err = parse_config(&format!("{MINIMAL}\n[link]\nl_s = 10\ncolour = 3\n")).unwrap_err();
        match err {
            Error::UnknownKey { key, line } => {
                assert_eq!(key, "link.colour");
                assert_eq!(line, Some(7));
            }
            other => panic!("{other}"),
        }
        assert!(matches!(parse_config("[bogus]\nx = 1\n"), Err(Error::UnknownKey { .. })));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_config("[link]\nl_s = =\n").unwrap_err();
        match err {
            Error::ConfigParse { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let err = parse_config("[sweep]\nparameter = \"p_t\"\nvalues = []\n").unwrap_err();
        assert!(matches!(err, Error::ConfigValidation { ref field, .. } if field == "sweep.values"), "{err}");
    }

    #[test]
    fn bad_sweep_point_is_located() {
        let err = parse_config("[sweep]\nparameter = \"r_a\"\nvalues = [1e-3, -1.0]\n").unwrap_err();
        match err {
            Error::ConfigValidation { field, message } => {
                assert_eq!(field, "sweep.values[1]");
                assert!(message.contains("geometry.r_a"), "{message}");
            }
            other => panic!("{other}"),
        }
        let err = parse_config("[sweep]\nparameter = \"l_s\"\nvalues = [2.5]\n").unwrap_err();
        assert!(err.to_string().contains("link.l_s"), "{err}");
        let err = parse_config("[sweep]\nparameter = \"colour\"\nvalues = [1]\n").unwrap_err();
        assert!(err.to_string().contains("sweep.parameter"), "{err}");
    }

    #[test]
    fn noise_physics_is_checked() {
        let err = parse_config("[noise]\nsigma_th_sq = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("noise.sigma_th_sq"), "{err}");
        let err = parse_config("[noise]\nsigma_b_sq = 1.0\nbackground_gain = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("noise.background_gain"), "{err}");
    }

    #[test]
    fn background_gain_couples_to_detector_size() {
        let cfg = parse_config("[noise]\nbackground_gain = 1e5\n").unwrap();
        let small = cfg.with_value("r_a", 1e-3).unwrap().operating_point().unwrap();
        let large = cfg.with_value("r_a", 2e-3).unwrap().operating_point().unwrap();
        let ratio = large.link().noise.sigma_b_sq / small.link().noise.sigma_b_sq;
        assert!((ratio - 4.0).abs() < 1e-12);
        assert!(small.coupling.is_some());
    }

    #[test]
    fn explicit_shapes_override_rytov() {
        let cfg = parse_config("[channel]\nalpha = 3.0\nbeta = 2.0\n").unwrap();
        let p = cfg.operating_point().unwrap();
        assert_eq!((p.link().channel.alpha, p.link().channel.beta), (3.0, 2.0));
        assert!(parse_config("[channel]\nalpha = 3.0\n").is_err());
    }

    #[test]
    fn sigma_sweep_sets_both_axes() {
        let cfg = parse_config(MINIMAL).unwrap().with_value("sigma", 1e-2).unwrap();
        assert_eq!((cfg.geometry.sigma_x, cfg.geometry.sigma_y), (1e-2, 1e-2));
    }

    #[test]
    fn serialized_config_parses_back() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.noise.background_gain = Some(3.0);
        cfg.engine.workers = Some(2);
        let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
