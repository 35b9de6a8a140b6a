//! Scenario configuration: a single TOML file with nested sections mirroring
//! the module configs. Unknown keys are rejected. Built-in ambient generators
//! cover a mild constant climate, a diurnal cycle, and the monsoon regime.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControllerConfig;
use crate::env::{AmbientProfile, AmbientSample, ChamberParams, ChamberState};
use crate::sensing::{Dht22Model, FaultPlan, FaultWindow, Mq135Model};
use crate::spoilage::SpoilageRates;

use super::report::CostModel;
use super::HarnessError;

/// Ambient weather source for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmbientSpec {
    /// Fixed conditions for the whole run.
    Constant { temp_c: f64, rh_pct: f64 },
    /// Sinusoidal day/night cycle; humidity swings opposite to temperature.
    Diurnal {
        temp_mean_c: f64,
        temp_amplitude_c: f64,
        rh_mean_pct: f64,
        rh_amplitude_pct: f64,
        #[serde(default = "default_period_s")]
        period_s: f64,
    },
    /// Hot-humid monsoon storage season: constant 34 degC / 85 %RH.
    Monsoon,
    /// Piecewise-linear profile from a `t_s,temp_c,rh_pct` CSV file.
    Csv { path: PathBuf },
}

fn default_period_s() -> f64 {
    86_400.0
}

/// Monsoon regime anchor conditions.
pub const MONSOON_TEMP_C: f64 = 34.0;
pub const MONSOON_RH_PCT: f64 = 85.0;

impl AmbientSpec {
    /// Materialize the spec into an interpolatable profile covering
    /// `duration_s`.
    pub fn to_profile(&self, duration_s: f64) -> Result<AmbientProfile, HarnessError> {
        let profile = match self {
            AmbientSpec::Constant { temp_c, rh_pct } => AmbientProfile::constant(*temp_c, *rh_pct)?,
            AmbientSpec::Monsoon => AmbientProfile::constant(MONSOON_TEMP_C, MONSOON_RH_PCT)?,
            AmbientSpec::Diurnal {
                temp_mean_c,
                temp_amplitude_c,
                rh_mean_pct,
                rh_amplitude_pct,
                period_s,
            } => {
                if !(*period_s > 0.0) {
                    return Err(HarnessError::Scenario(
                        "diurnal period_s must be > 0".into(),
                    ));
                }
                let step = (period_s / 96.0).max(1.0); // 96 samples per cycle
                let n = (duration_s / step).ceil() as usize + 2;
                let mut samples = Vec::with_capacity(n);
                for k in 0..n {
                    let t_s = k as f64 * step;
                    let phase = std::f64::consts::TAU * t_s / period_s;
                    // temperature peaks mid-period; humidity bottoms out there
                    let temp_c = temp_mean_c - temp_amplitude_c * phase.cos();
                    let rh_pct = (rh_mean_pct + rh_amplitude_pct * phase.cos()).clamp(0.0, 100.0);
                    samples.push(AmbientSample {
                        t_s,
                        temp_c,
                        rh_pct,
                    });
                }
                AmbientProfile::new(samples)?
            }
            AmbientSpec::Csv { path } => AmbientProfile::from_csv_path(path)?,
        };
        Ok(profile)
    }
}

/// Chamber contents and conditions at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub temp_c: f64,
    pub rh_pct: f64,
    pub gas_ppm: f64,
    pub onion_mass_kg: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            temp_c: 25.0,
            rh_pct: 60.0,
            gas_ppm: 2.0,
            onion_mass_kg: 10_000.0,
        }
    }
}

impl InitialState {
    pub fn to_chamber_state(self) -> ChamberState {
        ChamberState {
            temp_c: self.temp_c,
            rh_pct: self.rh_pct,
            gas_ppm: self.gas_ppm,
            onion_mass_kg: self.onion_mass_kg,
            t_s: 0.0,
        }
    }
}

/// Spoilage model parameters: regime rates plus pathogen/lamp/gas constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpoilageParams {
    pub weight_loss_pct_per_day: f64,
    pub sprout_pct_per_day: f64,
    pub rot_pct_per_day: f64,
    pub rot_pathogen_coupling: f64,
    pub mold_growth_rate_per_day: f64,
    pub mold_rh_threshold_pct: f64,
    /// UV-C fluence for one decade of pathogen inactivation, J/m^2.
    pub d90_dose_j_m2: f64,
    /// Irradiance at the crop surface while the lamp runs, W/m^2.
    pub uvc_intensity_w_m2: f64,
    /// Gas source per (rot %/s x kg), ppm/s.
    pub gas_emission_coeff_ppm_per_pct_kg: f64,
    /// Mold index above which the market applies the black-mold penalty.
    pub mold_visible_threshold: f64,
}

impl Default for SpoilageParams {
    fn default() -> Self {
        let rates = SpoilageRates::default();
        Self {
            weight_loss_pct_per_day: rates.weight_loss_pct_per_day,
            sprout_pct_per_day: rates.sprout_pct_per_day,
            rot_pct_per_day: rates.rot_pct_per_day,
            rot_pathogen_coupling: rates.rot_pathogen_coupling,
            mold_growth_rate_per_day: rates.mold_growth_rate_per_day,
            mold_rh_threshold_pct: rates.mold_rh_threshold_pct,
            d90_dose_j_m2: 40.0,
            uvc_intensity_w_m2: 0.5,
            gas_emission_coeff_ppm_per_pct_kg: 0.002,
            mold_visible_threshold: 0.1,
        }
    }
}

impl SpoilageParams {
    pub fn rates(&self) -> SpoilageRates {
        SpoilageRates {
            weight_loss_pct_per_day: self.weight_loss_pct_per_day,
            sprout_pct_per_day: self.sprout_pct_per_day,
            rot_pct_per_day: self.rot_pct_per_day,
            rot_pathogen_coupling: self.rot_pathogen_coupling,
            mold_growth_rate_per_day: self.mold_growth_rate_per_day,
            mold_rh_threshold_pct: self.mold_rh_threshold_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorsSpec {
    pub dht22: Dht22Model,
    pub mq135: Mq135Model,
}

/// MQTT publishing settings for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetrySpec {
    pub enabled: bool,
    pub broker_addr: String,
    pub store_id: String,
    pub client_id: String,
    pub keep_alive_s: u16,
    /// Outbound queue capacity in tick batches; overflow drops qos-0 samples.
    pub queue_capacity: usize,
}

impl Default for TelemetrySpec {
    fn default() -> Self {
        Self {
            enabled: false,
            broker_addr: "127.0.0.1:1883".into(),
            store_id: "store1".into(),
            client_id: "onionstore-sim".into(),
            keep_alive_s: 30,
            queue_capacity: 4096,
        }
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub duration_s: f64,
    pub dt_s: f64,
    pub seed: u64,
    pub controller_enabled: bool,
    pub ambient: AmbientSpec,
    pub initial: InitialState,
    pub chamber: ChamberParams,
    pub spoilage: SpoilageParams,
    pub sensors: SensorsSpec,
    pub controller: ControllerConfig,
    pub faults: Vec<FaultWindow>,
    pub telemetry: TelemetrySpec,
    pub cost: CostModel,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            id: "scenario".into(),
            duration_s: 90.0 * 86_400.0,
            dt_s: 60.0,
            seed: 42,
            controller_enabled: true,
            ambient: AmbientSpec::Constant {
                temp_c: 25.0,
                rh_pct: 60.0,
            },
            initial: InitialState::default(),
            chamber: ChamberParams::default(),
            spoilage: SpoilageParams::default(),
            sensors: SensorsSpec::default(),
            controller: ControllerConfig::default(),
            faults: Vec::new(),
            telemetry: TelemetrySpec::default(),
            cost: CostModel::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Load and validate a scenario file; a relative ambient CSV path is
    /// resolved against the scenario file's directory.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let mut scenario: Scenario = toml::from_str(&text)?;
        if let AmbientSpec::Csv { path: csv_path } = &mut scenario.ambient {
            if csv_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv_path = dir.join(&csv_path);
                }
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of whole ticks the run covers.
    pub fn ticks(&self) -> u64 {
        (self.duration_s / self.dt_s).floor() as u64
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if self.id.is_empty() {
            return bad("id must be non-empty".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be > 0, got {}", self.duration_s));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return bad(format!("dt_s must be > 0, got {}", self.dt_s));
        }
        self.chamber.validate()?;
        if self.dt_s > self.chamber.max_stable_dt_s() {
            return bad(format!(
                "dt_s {} violates the stability guard (max {} for these chamber time constants)",
                self.dt_s,
                self.chamber.max_stable_dt_s()
            ));
        }
        if self.ticks() > 20_000_000 {
            return bad(format!(
                "{} ticks is beyond the supported run length",
                self.ticks()
            ));
        }
        if !(0.0..=100.0).contains(&self.initial.rh_pct) {
            return bad(format!(
                "initial rh_pct {} outside [0, 100]",
                self.initial.rh_pct
            ));
        }
        if self.initial.gas_ppm < 0.0 || self.initial.onion_mass_kg < 0.0 {
            return bad("initial gas_ppm and onion_mass_kg must be >= 0".into());
        }
        self.spoilage.rates().validate()?;
        if !(self.spoilage.d90_dose_j_m2 > 0.0) {
            return bad("d90_dose_j_m2 must be > 0".into());
        }
        if self.spoilage.uvc_intensity_w_m2 < 0.0
            || self.spoilage.gas_emission_coeff_ppm_per_pct_kg < 0.0
            || self.spoilage.mold_visible_threshold < 0.0
        {
            return bad("spoilage parameters must be >= 0".into());
        }
        self.sensors.dht22.validate()?;
        self.sensors.mq135.validate()?;
        self.controller.validate()?;
        FaultPlan {
            windows: self.faults.clone(),
        }
        .validate()?;
        self.cost.validate()?;
        if let AmbientSpec::Constant { rh_pct, .. } = self.ambient {
            if !(0.0..=100.0).contains(&rh_pct) {
                return bad(format!("ambient rh_pct {rh_pct} outside [0, 100]"));
            }
        }
        Ok(())
    }

    pub fn fault_plan(&self) -> FaultPlan {
        FaultPlan {
            windows: self.faults.clone(),
        }
    }

    /// Same scenario with the controller forced on or off.
    pub fn with_controller(&self, enabled: bool) -> Self {
        let mut s = self.clone();
        s.controller_enabled = enabled;
        s.id = format!(
            "{}-{}",
            self.id,
            if enabled { "controlled" } else { "baseline" }
        );
        s
    }

    /// Same scenario with a different rot accrual rate (used by calibration).
    pub fn with_rot_rate(&self, rot_pct_per_day: f64) -> Self {
        let mut s = self.clone();
        s.spoilage.rot_pct_per_day = rot_pct_per_day;
        s
    }

    /// The monsoon storage season: hot, saturated, the worst case the
    /// controller has to handle.
    pub fn monsoon_preset(days: f64, controller_enabled: bool) -> Self {
        Scenario {
            id: "monsoon".into(),
            duration_s: days * 86_400.0,
            controller_enabled,
            ambient: AmbientSpec::Monsoon,
            initial: InitialState {
                temp_c: 32.0,
                rh_pct: 80.0,
                ..InitialState::default()
            },
            ..Scenario::default()
        }
    }

    /// Mild constant climate; the controller should stay almost idle.
    pub fn constant_preset(days: f64) -> Self {
        Scenario {
            id: "constant".into(),
            duration_s: days * 86_400.0,
            ambient: AmbientSpec::Constant {
                temp_c: 25.0,
                rh_pct: 60.0,
            },
            ..Scenario::default()
        }
    }

    /// Day/night cycle whose afternoons breach both thresholds.
    pub fn diurnal_preset(days: f64) -> Self {
        Scenario {
            id: "diurnal".into(),
            duration_s: days * 86_400.0,
            ambient: AmbientSpec::Diurnal {
                temp_mean_c: 28.0,
                temp_amplitude_c: 6.0,
                rh_mean_pct: 68.0,
                rh_amplitude_pct: 12.0,
                period_s: 86_400.0,
            },
            initial: InitialState {
                temp_c: 26.0,
                rh_pct: 65.0,
                ..InitialState::default()
            },
            ..Scenario::default()
        }
    }
}
