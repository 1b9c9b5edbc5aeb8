//! Fits the loss curve by re-simulating connect scenarios.

use rayon::prelude::*;

use crate::channel::{
    calibrate_per_curve, CalibrationOptions, CalibrationReport, CalibrationTarget, ChannelError,
    PerCurve,
};

use super::scenario::{run_scenario, ScenarioConfig, ScenarioError, ScenarioKind};

/// Mean non-safety connect duration per target row under `curve`; `None`
/// where the scenario is infeasible.
pub fn simulate_connect_means(
    base: &ScenarioConfig,
    curve: &PerCurve,
    targets: &[CalibrationTarget],
) -> Result<Vec<Option<f64>>, ScenarioError> {
    targets
        .par_iter()
        .map(|t| {
            let cfg = ScenarioConfig {
                kind: ScenarioKind::RoamingConnect,
                safety: false,
                attenuation_on_db: t.attenuation_db,
                per_curve: *curve,
                ..base.clone()
            };
            match run_scenario(&cfg) {
                Ok(series) => {
                    let s = series.seconds();
                    Ok(Some(s.iter().sum::<f64>() / s.len() as f64))
                }
                Err(ScenarioError::TooManyDiscards { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Calibrates `base.per_curve` against non-safety connect means.
pub fn calibrate_connect(
    base: &ScenarioConfig,
    targets: &[CalibrationTarget],
    options: CalibrationOptions,
) -> Result<CalibrationReport, ChannelError> {
    base.validate()
        .map_err(|e| ChannelError::InvalidParameter(e.to_string()))?;
    calibrate_per_curve(
        targets,
        |curve| {
            simulate_connect_means(base, curve, targets)
                .expect("validated scenario only fails by discards")
        },
        options,
    )
}
