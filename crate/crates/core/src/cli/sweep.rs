//! Sweep driver: evaluates every sweep point in order and collects one row
//! per point.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Metric};
use crate::analysis::tracking_error_analytic;
use crate::error::{Error, Result};
use crate::tracking::{simulate_ber, simulate_tracking_error, McEstimate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    /// Monte-Carlo trials at this point; zero when only the analytic value
    /// was computed.
    pub trials: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub version: String,
    pub parameter: String,
    pub metric: Metric,
    pub seed: u64,
    /// The resolved configuration, defaults included.
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

/// Evaluate the configured sweep. Every point uses the same seed, so Monte
/// Carlo estimates at neighbouring points share their random numbers.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let sweep = cfg.sweep()?;
    let engine = &cfg.engine;
    let mut rows = Vec::with_capacity(sweep.values.len());
    for (index, &value) in sweep.values.iter().enumerate() {
        let started = Instant::now();
        let row = evaluate_point(cfg, &sweep.parameter, value, sweep.metric).map_err(|source| Error::SweepPoint {
            index,
            parameter: sweep.parameter.clone(),
            value,
            source: Box::new(source),
        })?;
        let (mc, analytic) = row;
        rows.push(SweepRow {
            value,
            trials: mc.map_or(0, |m| m.trials),
            mc,
            analytic,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(SweepResult {
        version: VERSION.to_string(),
        parameter: sweep.parameter.clone(),
        metric: sweep.metric,
        seed: engine.seed,
        config: cfg.clone(),
        rows,
    })
}

fn evaluate_point(
    cfg: &ExperimentConfig,
    parameter: &str,
    value: f64,
    metric: Metric,
) -> Result<(Option<McEstimate>, Option<f64>)> {
    let point = cfg.with_value(parameter, value)?.operating_point()?;
    let engine = &cfg.engine;
    let mc = if engine.mode.monte_carlo() {
        Some(match metric {
            Metric::Tracking => simulate_tracking_error(point.link(), engine.trials, engine.seed)?,
            Metric::Ber => simulate_ber(point.link(), engine.trials, engine.seed)?,
        })
    } else {
        None
    };
    let analytic = match (engine.mode.analytic(), metric) {
        (true, Metric::Tracking) => Some(tracking_error_analytic(&point.analytic)?),
        _ => None,
    };
    Ok((mc, analytic))
}
