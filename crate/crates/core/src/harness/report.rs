//! End-of-run reports, the cost model, and the baseline-vs-controlled
//! comparison.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::spoilage::SpoilageLedger;

use super::HarnessError;

/// Capex anchors and operating-cost constants, Indian rupees.
///
/// The smart-storage capex defaults to the midpoint of the reported
/// 60k-70k INR band; cold storage is pinned at ten times that. Actuator
/// rated powers are declared assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub system_capex_inr: f64,
    pub cold_storage_capex_inr: f64,
    pub traditional_capex_inr: f64,
    pub fan_power_w: f64,
    pub dehumidifier_power_w: f64,
    pub cooler_power_w: f64,
    pub uvc_power_w: f64,
    pub energy_price_inr_per_kwh: f64,
    pub onion_price_inr_per_kg: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            system_capex_inr: 65_000.0,
            cold_storage_capex_inr: 650_000.0,
            traditional_capex_inr: 0.0,
            fan_power_w: 200.0,
            dehumidifier_power_w: 300.0,
            cooler_power_w: 150.0,
            uvc_power_w: 40.0,
            energy_price_inr_per_kwh: 6.0,
            onion_price_inr_per_kg: 20.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fields = [
            self.system_capex_inr,
            self.cold_storage_capex_inr,
            self.traditional_capex_inr,
            self.fan_power_w,
            self.dehumidifier_power_w,
            self.cooler_power_w,
            self.uvc_power_w,
            self.energy_price_inr_per_kwh,
            self.onion_price_inr_per_kg,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(HarnessError::Scenario(
                "cost model values must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Rated power for a relay channel name, watts.
    pub fn power_w(&self, relay: &str) -> f64 {
        match relay {
            "fan" => self.fan_power_w,
            "dehumidifier" => self.dehumidifier_power_w,
            "cooler" => self.cooler_power_w,
            "uvc" => self.uvc_power_w,
            _ => 0.0,
        }
    }
}

/// Per-actuator usage accounting over one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActuatorStats {
    /// Fraction of run time the relay was latched on, in [0, 1].
    pub duty_cycle: f64,
    /// Number of relay transitions over the run.
    pub transitions: u64,
    /// Rated power x on-time.
    pub energy_kwh: f64,
}

/// End-of-scenario summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub seed: u64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub ticks: u64,
    pub ledger: SpoilageLedger,
    pub total_spoilage_pct: f64,
    pub market_value_loss_pct: f64,
    pub actuators: BTreeMap<String, ActuatorStats>,
    pub energy_kwh_total: f64,
    pub alarm_counts: BTreeMap<String, u64>,
    pub peak_temp_c: f64,
    pub peak_rh_pct: f64,
    pub peak_gas_ppm: f64,
    pub onion_mass_kg: f64,
    pub telemetry_sent: u64,
    pub telemetry_dropped: u64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "run report: {}", self.scenario_id)?;
        writeln!(
            f,
            "  duration: {:.1} days ({} ticks of {} s), seed {}",
            self.duration_s / 86_400.0,
            self.ticks,
            self.dt_s,
            self.seed
        )?;
        writeln!(
            f,
            "  spoilage: total {:.2}% (weight loss {:.2}%, rot {:.2}%, sprout {:.2}%, mold index {:.3})",
            self.total_spoilage_pct,
            self.ledger.weight_loss_pct,
            self.ledger.rot_pct,
            self.ledger.sprout_pct,
            self.ledger.mold_index
        )?;
        writeln!(f, "  market value loss: {:.2}%", self.market_value_loss_pct)?;
        writeln!(
            f,
            "  peaks: {:.2} degC / {:.2} %RH / {:.2} ppm",
            self.peak_temp_c, self.peak_rh_pct, self.peak_gas_ppm
        )?;
        writeln!(f, "  energy: {:.2} kWh total", self.energy_kwh_total)?;
        for (name, stats) in &self.actuators {
            writeln!(
                f,
                "    {:<13} duty {:>6.2}%  transitions {:>6}  {:>8.2} kWh",
                name,
                stats.duty_cycle * 100.0,
                stats.transitions,
                stats.energy_kwh
            )?;
        }
        if self.alarm_counts.is_empty() {
            writeln!(f, "  alarms: none")?;
        } else {
            let summary: Vec<String> = self
                .alarm_counts
                .iter()
                .map(|(k, n)| format!("{k} x{n}"))
                .collect();
            writeln!(f, "  alarms: {}", summary.join(", "))?;
        }
        if self.telemetry_sent > 0 || self.telemetry_dropped > 0 {
            writeln!(
                f,
                "  telemetry: {} samples sent, {} dropped",
                self.telemetry_sent, self.telemetry_dropped
            )?;
        }
        Ok(())
    }
}

/// One row of the three-way storage comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageOption {
    pub name: String,
    pub capex_inr: f64,
    /// None when the option is not simulated (cold storage).
    pub spoilage_pct: Option<f64>,
}

/// Baseline-vs-controlled outcome plus the economics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub duration_s: f64,
    pub onion_mass_kg: f64,
    pub baseline_spoilage_pct: f64,
    pub controlled_spoilage_pct: f64,
    pub absolute_reduction_pct: f64,
    /// Reduction relative to the baseline; None when the baseline is zero.
    pub relative_reduction: Option<f64>,
    pub saved_crop_value_inr: f64,
    pub energy_kwh: f64,
    pub energy_cost_inr: f64,
    /// Seasons for the capex to pay back out of net savings; None when the
    /// run saves nothing.
    pub payback_seasons: Option<f64>,
    pub options: Vec<StorageOption>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

/// Compare a baseline (controller off) run against a controlled run.
///
/// Saved crop value = mass x price x avoided loss fraction. Simple payback =
/// capex / (saved value per season - energy cost).
pub fn compare(
    baseline: &RunReport,
    controlled: &RunReport,
    costs: &CostModel,
) -> Result<ComparisonReport, HarnessError> {
    costs.validate()?;
    if (baseline.duration_s - controlled.duration_s).abs() > f64::EPSILON {
        return Err(HarnessError::DurationMismatch {
            baseline_s: baseline.duration_s,
            controlled_s: controlled.duration_s,
        });
    }
    let absolute_reduction_pct = baseline.total_spoilage_pct - controlled.total_spoilage_pct;
    let relative_reduction = if baseline.total_spoilage_pct > 0.0 {
        Some(absolute_reduction_pct / baseline.total_spoilage_pct)
    } else {
        None
    };
    let mass = controlled.onion_mass_kg;
    let saved_crop_value_inr =
        mass * costs.onion_price_inr_per_kg * (absolute_reduction_pct / 100.0);
    let energy_kwh = controlled.energy_kwh_total;
    let energy_cost_inr = energy_kwh * costs.energy_price_inr_per_kwh;
    let net_saving = saved_crop_value_inr - energy_cost_inr;
    let payback_seasons = (net_saving > 0.0).then(|| costs.system_capex_inr / net_saving);

    Ok(ComparisonReport {
        duration_s: baseline.duration_s,
        onion_mass_kg: mass,
        baseline_spoilage_pct: baseline.total_spoilage_pct,
        controlled_spoilage_pct: controlled.total_spoilage_pct,
        absolute_reduction_pct,
        relative_reduction,
        saved_crop_value_inr,
        energy_kwh,
        energy_cost_inr,
        payback_seasons,
        options: vec![
            StorageOption {
                name: "traditional".into(),
                capex_inr: costs.traditional_capex_inr,
                spoilage_pct: Some(baseline.total_spoilage_pct),
            },
            StorageOption {
                name: "smart storage".into(),
                capex_inr: costs.system_capex_inr,
                spoilage_pct: Some(controlled.total_spoilage_pct),
            },
            StorageOption {
                name: "cold storage".into(),
                capex_inr: costs.cold_storage_capex_inr,
                spoilage_pct: None,
            },
        ],
    })
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "comparison over {:.1} days, {:.0} kg stored",
            self.duration_s / 86_400.0,
            self.onion_mass_kg
        )?;
        writeln!(
            f,
            "  spoilage: baseline {:.2}% -> controlled {:.2}% (reduction {:.2} points{})",
            self.baseline_spoilage_pct,
            self.controlled_spoilage_pct,
            self.absolute_reduction_pct,
            match self.relative_reduction {
                Some(r) => format!(", {:.1}% relative", r * 100.0),
                None => String::new(),
            }
        )?;
        writeln!(
            f,
            "  saved crop value: {:.0} INR/season",
            self.saved_crop_value_inr
        )?;
        writeln!(
            f,
            "  energy: {:.1} kWh -> {:.0} INR/season",
            self.energy_kwh, self.energy_cost_inr
        )?;
        match self.payback_seasons {
            Some(p) => writeln!(f, "  simple payback: {p:.1} seasons")?,
            None => writeln!(f, "  simple payback: undefined (no net saving)")?,
        }
        writeln!(
            f,
            "  {:<15} {:>12}  {:>10}",
            "option", "capex (INR)", "spoilage"
        )?;
        for option in &self.options {
            let spoilage = match option.spoilage_pct {
                Some(pct) => format!("{pct:.1}%"),
                None => "n/a".to_string(),
            };
            writeln!(
                f,
                "  {:<15} {:>12.0}  {:>10}",
                option.name, option.capex_inr, spoilage
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(total: f64, duration_s: f64, energy_kwh: f64) -> RunReport {
        RunReport {
            scenario_id: "t".into(),
            seed: 1,
            duration_s,
            dt_s: 60.0,
            ticks: (duration_s / 60.0) as u64,
            ledger: SpoilageLedger {
                rot_pct: total,
                ..SpoilageLedger::default()
            },
            total_spoilage_pct: total,
            market_value_loss_pct: total,
            actuators: BTreeMap::new(),
            energy_kwh_total: energy_kwh,
            alarm_counts: BTreeMap::new(),
            peak_temp_c: 30.0,
            peak_rh_pct: 80.0,
            peak_gas_ppm: 5.0,
            onion_mass_kg: 10_000.0,
            telemetry_sent: 0,
            telemetry_dropped: 0,
        }
    }

    #[test]
    fn saved_value_matches_hand_arithmetic() {
        // 42% -> 18% on 10,000 kg at 20 INR/kg saves 0.24 * 10,000 * 20 = 48,000 INR
        let costs = CostModel::default();
        let cmp = compare(
            &report(42.0, 1000.0, 0.0),
            &report(18.0, 1000.0, 100.0),
            &costs,
        )
        .unwrap();
        assert!((cmp.saved_crop_value_inr - 48_000.0).abs() < 1e-9);
        assert!((cmp.absolute_reduction_pct - 24.0).abs() < 1e-12);
        assert!((cmp.energy_cost_inr - 600.0).abs() < 1e-9);
        let payback = cmp.payback_seasons.unwrap();
        assert!((payback - 65_000.0 / 47_400.0).abs() < 1e-9);
    }

    #[test]
    fn identical_reports_flag_undefined_payback() {
        let costs = CostModel::default();
        let a = report(30.0, 500.0, 50.0);
        let cmp = compare(&a, &a.clone(), &costs).unwrap();
        assert_eq!(cmp.absolute_reduction_pct, 0.0);
        assert!(cmp.payback_seasons.is_none());
    }

    #[test]
    fn duration_mismatch_rejected() {
        let costs = CostModel::default();
        let err = compare(
            &report(40.0, 1000.0, 0.0),
            &report(20.0, 2000.0, 0.0),
            &costs,
        );
        assert!(matches!(err, Err(HarnessError::DurationMismatch { .. })));
    }

    #[test]
    fn capex_table_anchors() {
        let costs = CostModel::default();
        assert!((60_000.0..=70_000.0).contains(&costs.system_capex_inr));
        assert_eq!(costs.cold_storage_capex_inr, 10.0 * costs.system_capex_inr);
        let cmp = compare(
            &report(42.0, 1000.0, 0.0),
            &report(18.0, 1000.0, 0.0),
            &costs,
        )
        .unwrap();
        assert_eq!(cmp.options.len(), 3);
        assert_eq!(cmp.options[0].capex_inr, 0.0);
        assert_eq!(cmp.options[2].capex_inr, 650_000.0);
        assert!(cmp.options[2].spoilage_pct.is_none());
    }
}
