//! Fit a [`PerCurve`] so that simulated mean connect durations track a set of
//! reference means.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ChannelError, PerCurve};

/// Rows at or above this RSSI count as strong/moderate signal; their fit
/// error decides whether calibration converged.
pub const STRONG_RSSI_DBM: f64 = -70.0;

/// Relative error above which a strong-signal row counts as diverged.
const DIVERGENCE_LIMIT: f64 = 0.25;

/// Relative error charged for a row the simulator could not complete.
const INFEASIBLE_PENALTY: f64 = 10.0;

const GRID_STEP_DB: f64 = 4.0;
const GRID_MARGIN_DB: f64 = 12.0;

const MID_BOUNDS: (f64, f64) = (-110.0, -40.0);
const SLOPE_BOUNDS: (f64, f64) = (0.05, 3.0);
const FLOOR_BOUNDS: (f64, f64) = (0.0, 0.04);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub attenuation_db: f64,
    pub rssi_dbm: f64,
    pub mean_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub start: PerCurve,
    /// Iterations: the first is a coarse scan of the midpoint, each further
    /// one a coordinate-descent sweep over (rssi_mid, slope, floor).
    pub budget: u32,
}

impl CalibrationOptions {
    /// Starts from a gentle curve centred on the reference RSSI span.
    pub fn for_targets(targets: &[CalibrationTarget], budget: u32) -> Self {
        let (lo, hi) = targets.iter().fold((f64::MAX, f64::MIN), |(lo, hi), t| {
            (lo.min(t.rssi_dbm), hi.max(t.rssi_dbm))
        });
        Self {
            start: PerCurve {
                rssi_mid: ((lo + hi) / 2.0).round(),
                slope: 0.5,
                floor: 0.01,
            },
            budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub target: CalibrationTarget,
    /// `None` when the simulator found the row infeasible.
    pub simulated_mean_s: Option<f64>,
}

impl Residual {
    pub fn relative_error(&self) -> f64 {
        match self.simulated_mean_s {
            Some(m) => (m - self.target.mean_s).abs() / self.target.mean_s,
            None => f64::INFINITY,
        }
    }

    pub fn is_strong(&self) -> bool {
        self.target.rssi_dbm >= STRONG_RSSI_DBM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub curve: PerCurve,
    pub residuals: Vec<Residual>,
    pub objective: f64,
    pub evaluations: u32,
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "rssi_mid={:.3} slope={:.4} floor={:.5} objective={:.6} evaluations={}",
            self.curve.rssi_mid,
            self.curve.slope,
            self.curve.floor,
            self.objective,
            self.evaluations
        )?;
        for r in &self.residuals {
            let sim = r
                .simulated_mean_s
                .map_or_else(|| "infeasible".to_string(), |m| format!("{m:.4}"));
            writeln!(
                f,
                "  {:>5.1} dB {:>6.1} dBm ref={:.4} sim={} rel_err={:.2}%",
                r.target.attenuation_db,
                r.target.rssi_dbm,
                r.target.mean_s,
                sim,
                r.relative_error() * 100.0
            )?;
        }
        Ok(())
    }
}

fn objective(residuals: &[Residual]) -> f64 {
    residuals
        .iter()
        .map(|r| r.relative_error().min(INFEASIBLE_PENALTY).powi(2))
        .sum()
}

fn clamp_curve(c: PerCurve) -> PerCurve {
    PerCurve {
        rssi_mid: c.rssi_mid.clamp(MID_BOUNDS.0, MID_BOUNDS.1),
        slope: c.slope.clamp(SLOPE_BOUNDS.0, SLOPE_BOUNDS.1),
        floor: c.floor.clamp(FLOOR_BOUNDS.0, FLOOR_BOUNDS.1),
    }
}

/// Coarse midpoint scan followed by coordinate descent with step halving.
///
/// `simulate` returns one simulated mean per target, in order, or `None` for a
/// row that cannot complete. It must be deterministic for the fit to be.
pub fn calibrate_per_curve<F>(
    targets: &[CalibrationTarget],
    mut simulate: F,
    options: CalibrationOptions,
) -> Result<CalibrationReport, ChannelError>
where
    F: FnMut(&PerCurve) -> Vec<Option<f64>>,
{
    if targets.len() < 4 {
        return Err(ChannelError::InvalidParameter(format!(
            "calibration needs at least 4 reference rows, got {}",
            targets.len()
        )));
    }
    if targets.iter().any(|t| !(t.mean_s > 0.0)) {
        return Err(ChannelError::InvalidParameter(
            "reference means must be positive".into(),
        ));
    }
    options.start.validate()?;

    let mut evaluations = 0u32;
    let mut evaluate = |curve: &PerCurve| -> Vec<Residual> {
        evaluations += 1;
        let means = simulate(curve);
        assert_eq!(
            means.len(),
            targets.len(),
            "simulator must return one mean per target"
        );
        targets
            .iter()
            .zip(means)
            .map(|(&target, simulated_mean_s)| Residual {
                target,
                simulated_mean_s,
            })
            .collect()
    };

    let mut best = clamp_curve(options.start);
    let mut best_residuals = evaluate(&best);
    let mut best_obj = objective(&best_residuals);
    let mut consider = |cand: PerCurve,
                        best: &mut PerCurve,
                        best_obj: &mut f64,
                        best_residuals: &mut Vec<Residual>|
     -> bool {
        let cand = clamp_curve(cand);
        if cand == *best {
            return false;
        }
        let residuals = evaluate(&cand);
        let obj = objective(&residuals);
        if obj < *best_obj {
            *best = cand;
            *best_obj = obj;
            *best_residuals = residuals;
            true
        } else {
            false
        }
    };

    // The first unit of budget scans the midpoint across the reference RSSI
    // span; infeasible rows make the objective flat far from the optimum.
    if options.budget > 0 {
        let (lo, hi) = targets.iter().fold((f64::MAX, f64::MIN), |(lo, hi), t| {
            (lo.min(t.rssi_dbm), hi.max(t.rssi_dbm))
        });
        let start = best;
        let mut mid = hi;
        while mid >= lo - GRID_MARGIN_DB {
            let cand = PerCurve {
                rssi_mid: mid,
                ..start
            };
            consider(cand, &mut best, &mut best_obj, &mut best_residuals);
            mid -= GRID_STEP_DB;
        }
    }

    let mut steps = [GRID_STEP_DB / 2.0, 0.25, 0.005];
    for _ in 1..options.budget {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut cand = best;
                match axis {
                    0 => cand.rssi_mid += sign * steps[0],
                    1 => cand.slope += sign * steps[1],
                    _ => cand.floor += sign * steps[2],
                }
                if consider(cand, &mut best, &mut best_obj, &mut best_residuals) {
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s /= 2.0;
            }
        }
    }

    let report = CalibrationReport {
        curve: best,
        residuals: best_residuals,
        objective: best_obj,
        evaluations,
    };
    let diverged = report
        .residuals
        .iter()
        .any(|r| r.is_strong() && r.relative_error() > DIVERGENCE_LIMIT);
    if diverged {
        log::warn!("calibration diverged:\n{report}");
        return Err(ChannelError::CalibrationDiverged(Box::new(report)));
    }
    Ok(report)
}
