//! Calibration of the rot accrual rate: bisect `rot_pct_per_day` until the
//! uncontrolled baseline lands inside a target total-spoilage band.

use serde::{Deserialize, Serialize};

use super::runner::run_scenario;
use super::scenario::Scenario;
use super::HarnessError;

/// Search bounds for the rot rate, %/day.
pub const ROT_RATE_BOUNDS: (f64, f64) = (0.0, 5.0);
/// Bisection iteration cap.
pub const MAX_ITERATIONS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    /// The rate that puts the baseline inside the band.
    pub rot_pct_per_day: f64,
    /// Baseline total spoilage achieved at that rate, percent.
    pub achieved_total_pct: f64,
    /// Scenario evaluations spent.
    pub iterations: u32,
}

/// Bisect the rot rate until the baseline run's total spoilage falls inside
/// `band` (inclusive). The controller and telemetry are forced off for every
/// evaluation. Total spoilage grows monotonically with the rate, so plain
/// bisection converges or proves the band unreachable.
pub fn calibrate_rot_rate(
    scenario: &Scenario,
    band: (f64, f64),
) -> Result<CalibrationOutcome, HarnessError> {
    let (band_low, band_high) = band;
    if !(band_low.is_finite() && band_high.is_finite()) || band_low > band_high || band_low < 0.0 {
        return Err(HarnessError::Scenario(format!(
            "calibration band [{band_low}, {band_high}] is not a valid range"
        )));
    }
    let mut base = scenario.clone();
    base.controller_enabled = false;
    base.telemetry.enabled = false;

    let mut iterations = 0u32;
    let eval = |iterations: &mut u32, rate: f64| -> Result<f64, HarnessError> {
        *iterations += 1;
        let out = run_scenario(&base.with_rot_rate(rate))?;
        Ok(out.report.total_spoilage_pct)
    };

    let (mut lo, mut hi) = ROT_RATE_BOUNDS;
    let at_lo = eval(&mut iterations, lo)?;
    if at_lo > band_high {
        return Err(HarnessError::CalibrationUnreachable(format!(
            "baseline spoils {at_lo:.2}% even at zero rot rate, above the band top {band_high}%"
        )));
    }
    if (band_low..=band_high).contains(&at_lo) {
        return Ok(CalibrationOutcome {
            rot_pct_per_day: lo,
            achieved_total_pct: at_lo,
            iterations,
        });
    }
    let at_hi = eval(&mut iterations, hi)?;
    if at_hi < band_low {
        return Err(HarnessError::CalibrationUnreachable(format!(
            "baseline reaches only {at_hi:.2}% at the maximum rate {hi} %/day, below the band floor {band_low}%"
        )));
    }
    if (band_low..=band_high).contains(&at_hi) {
        return Ok(CalibrationOutcome {
            rot_pct_per_day: hi,
            achieved_total_pct: at_hi,
            iterations,
        });
    }

    while iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let total = eval(&mut iterations, mid)?;
        if (band_low..=band_high).contains(&total) {
            return Ok(CalibrationOutcome {
                rot_pct_per_day: mid,
                achieved_total_pct: total,
                iterations,
            });
        }
        if total < band_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(HarnessError::CalibrationUnreachable(format!(
        "no rate found inside [{band_low}, {band_high}]% within {MAX_ITERATIONS} evaluations"
    )))
}
