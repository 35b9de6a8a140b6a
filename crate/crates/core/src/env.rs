//! Discrete-time physics of the storage chamber.
//!
//! Temperature and humidity relax exponentially toward ambient (or toward the
//! evaporative-cooling target while the cooler runs); fans speed up both
//! couplings and vent spoilage gas; the dehumidifier is a linear %RH/hour
//! sink. All stepping is purely functional over value types, so scenarios can
//! run in parallel with no shared state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default simulation tick, seconds. Slow storage dynamics do not need more.
pub const DEFAULT_DT_S: f64 = 60.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error(
        "dt of {dt_s} s violates the stability guard (max {max_s} s for these time constants)"
    )]
    UnstableDt { dt_s: f64, max_s: f64 },
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("wet-bulb input out of range: {temp_c} degC / {rh_pct} %RH")]
    WetBulbRange { temp_c: f64, rh_pct: f64 },
    #[error("cooling effectiveness {0} outside [0, 1]")]
    BadEffectiveness(f64),
    #[error("invalid chamber params: {0}")]
    BadParams(String),
    #[error("ambient profile is empty")]
    EmptyProfile,
    #[error("ambient sample {index}: {reason}")]
    BadSample { index: usize, reason: String },
    #[error("ambient CSV line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Instantaneous environment of the store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamberState {
    /// Air temperature inside the chamber, degrees Celsius.
    pub temp_c: f64,
    /// Relative humidity, percent, always in [0, 100].
    pub rh_pct: f64,
    /// Aggregate spoilage-gas concentration (NH3 + H2S proxy), ppm, >= 0.
    pub gas_ppm: f64,
    /// Stored crop mass, kilograms.
    pub onion_mass_kg: f64,
    /// Simulation time, seconds, non-decreasing across steps.
    pub t_s: f64,
}

/// Actuator command flags applied during a chamber step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuatorInputs {
    pub fan_on: bool,
    pub dehumidifier_on: bool,
    pub cooler_on: bool,
    pub uvc_on: bool,
}

/// Physical coupling constants of the chamber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChamberParams {
    /// Thermal coupling time constant to ambient, seconds.
    pub tau_thermal_s: f64,
    /// Humidity coupling time constant to ambient, seconds.
    pub tau_moisture_s: f64,
    /// Factor (>= 1) applied to both couplings while fans run.
    pub fan_exchange_multiplier: f64,
    /// Evaporative pad effectiveness toward the wet-bulb limit, in [0, 1].
    pub cooler_effectiveness: f64,
    /// Humidification added by the running cooler pads, %RH per hour.
    pub cooler_rh_bias_per_hour: f64,
    /// %RH removed per hour while the dehumidifier runs.
    pub dehumidifier_rh_per_hour: f64,
    /// Fraction of gas removed per reference step while fans run, in [0, 1].
    pub gas_vent_fraction_per_step: f64,
    /// Reference step length for `gas_vent_fraction_per_step`, seconds.
    pub gas_vent_ref_dt_s: f64,
    /// Chamber volume, cubic metres (recorded geometry; not used by stepping).
    pub volume_m3: f64,
}

impl Default for ChamberParams {
    fn default() -> Self {
        Self {
            tau_thermal_s: 3600.0,
            tau_moisture_s: 10800.0,
            fan_exchange_multiplier: 2.0,
            cooler_effectiveness: 0.7,
            cooler_rh_bias_per_hour: 5.0,
            dehumidifier_rh_per_hour: 10.0,
            gas_vent_fraction_per_step: 0.5,
            gas_vent_ref_dt_s: DEFAULT_DT_S,
            volume_m3: 40.0,
        }
    }
}

impl ChamberParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::BadParams(m.to_string()));
        if !(self.tau_thermal_s > 0.0) {
            return bad("tau_thermal_s must be > 0");
        }
        if !(self.tau_moisture_s > 0.0) {
            return bad("tau_moisture_s must be > 0");
        }
        if !(self.fan_exchange_multiplier >= 1.0) {
            return bad("fan_exchange_multiplier must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.cooler_effectiveness) {
            return bad("cooler_effectiveness must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gas_vent_fraction_per_step) {
            return bad("gas_vent_fraction_per_step must be in [0, 1]");
        }
        if !(self.gas_vent_ref_dt_s > 0.0) {
            return bad("gas_vent_ref_dt_s must be > 0");
        }
        if self.dehumidifier_rh_per_hour < 0.0 || self.cooler_rh_bias_per_hour < 0.0 {
            return bad("RH rates must be >= 0");
        }
        Ok(())
    }

    /// Largest tick the stability guard accepts for these time constants.
    pub fn max_stable_dt_s(&self) -> f64 {
        self.tau_thermal_s.min(self.tau_moisture_s) / 10.0
    }
}

/// One ambient weather sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientSample {
    pub t_s: f64,
    pub temp_c: f64,
    pub rh_pct: f64,
}

/// Piecewise-linear ambient weather, clamped outside the covered range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientProfile {
    samples: Vec<AmbientSample>,
}

impl AmbientProfile {
    pub fn new(samples: Vec<AmbientSample>) -> Result<Self, EnvError> {
        if samples.is_empty() {
            return Err(EnvError::EmptyProfile);
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t_s.is_finite() && s.temp_c.is_finite() && s.rh_pct.is_finite()) {
                return Err(EnvError::BadSample {
                    index: i,
                    reason: "non-finite value".into(),
                });
            }
            if !(0.0..=100.0).contains(&s.rh_pct) {
                return Err(EnvError::BadSample {
                    index: i,
                    reason: format!("rh {} outside [0, 100]", s.rh_pct),
                });
            }
            if i > 0 && s.t_s <= samples[i - 1].t_s {
                return Err(EnvError::BadSample {
                    index: i,
                    reason: "sample times must be strictly increasing".into(),
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn constant(temp_c: f64, rh_pct: f64) -> Result<Self, EnvError> {
        Self::new(vec![AmbientSample {
            t_s: 0.0,
            temp_c,
            rh_pct,
        }])
    }

    pub fn samples(&self) -> &[AmbientSample] {
        &self.samples
    }

    /// Parse from CSV with header `t_s,temp_c,rh_pct`, one sample per row.
    pub fn from_csv_str(text: &str) -> Result<Self, EnvError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(EnvError::EmptyProfile)?;
        if header.trim() != "t_s,temp_c,rh_pct" {
            return Err(EnvError::BadCsv {
                line: 1,
                reason: format!(
                    "expected header `t_s,temp_c,rh_pct`, got `{}`",
                    header.trim()
                ),
            });
        }
        let mut samples = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(EnvError::BadCsv {
                    line: i + 1,
                    reason: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str, name: &str| {
                s.trim().parse::<f64>().map_err(|e| EnvError::BadCsv {
                    line: i + 1,
                    reason: format!("bad {name}: {e}"),
                })
            };
            samples.push(AmbientSample {
                t_s: parse(fields[0], "t_s")?,
                temp_c: parse(fields[1], "temp_c")?,
                rh_pct: parse(fields[2], "rh_pct")?,
            });
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self, EnvError> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// Interpolated ambient conditions at time `t_s`, clamped to the profile ends.
pub fn ambient_at(profile: &AmbientProfile, t_s: f64) -> (f64, f64) {
    let samples = &profile.samples;
    let first = samples[0];
    let last = samples[samples.len() - 1];
    if t_s <= first.t_s {
        return (first.temp_c, first.rh_pct);
    }
    if t_s >= last.t_s {
        return (last.temp_c, last.rh_pct);
    }
    // index of the first sample strictly after t_s
    let hi = samples.partition_point(|s| s.t_s <= t_s);
    let (a, b) = (samples[hi - 1], samples[hi]);
    let frac = (t_s - a.t_s) / (b.t_s - a.t_s);
    (
        a.temp_c + frac * (b.temp_c - a.temp_c),
        a.rh_pct + frac * (b.rh_pct - a.rh_pct),
    )
}

/// Wet-bulb temperature from the Stull (2011) empirical fit, degrees Celsius.
///
/// Valid for temp in [-20, 50] degC and rh in (0, 100]. The raw fit can land
/// a few hundredths above the dry-bulb near saturation; the result is clamped
/// so it never exceeds `temp_c`.
pub fn wet_bulb(temp_c: f64, rh_pct: f64) -> Result<f64, EnvError> {
    if !(temp_c.is_finite() && rh_pct.is_finite()) {
        return Err(EnvError::NonFinite("wet_bulb input"));
    }
    if !(-20.0..=50.0).contains(&temp_c) || rh_pct <= 0.0 || rh_pct > 100.0 {
        return Err(EnvError::WetBulbRange { temp_c, rh_pct });
    }
    let tw = temp_c * (0.151977 * (rh_pct + 8.313659).sqrt()).atan() + (temp_c + rh_pct).atan()
        - (rh_pct - 1.676331).atan()
        + 0.00391838 * rh_pct.powf(1.5) * (0.023101 * rh_pct).atan()
        - 4.686035;
    Ok(tw.min(temp_c))
}

/// Coldest air an evaporative pad of the given effectiveness can deliver.
///
/// `T_db - effectiveness * (T_db - T_wb)`; equals the dry-bulb at zero
/// effectiveness and the wet-bulb at one.
pub fn evaporative_cooling_target(
    ambient_temp_c: f64,
    ambient_rh_pct: f64,
    effectiveness: f64,
) -> Result<f64, EnvError> {
    if !(0.0..=1.0).contains(&effectiveness) {
        return Err(EnvError::BadEffectiveness(effectiveness));
    }
    let wb = wet_bulb(ambient_temp_c, ambient_rh_pct)?;
    Ok(ambient_temp_c - effectiveness * (ambient_temp_c - wb))
}

fn check_finite(
    state: &ChamberState,
    ambient: (f64, f64),
    gas_source_ppm_per_s: f64,
) -> Result<(), EnvError> {
    if !(state.temp_c.is_finite()
        && state.rh_pct.is_finite()
        && state.gas_ppm.is_finite()
        && state.onion_mass_kg.is_finite()
        && state.t_s.is_finite())
    {
        return Err(EnvError::NonFinite("chamber state"));
    }
    if !(ambient.0.is_finite() && ambient.1.is_finite()) {
        return Err(EnvError::NonFinite("ambient"));
    }
    if !gas_source_ppm_per_s.is_finite() {
        return Err(EnvError::NonFinite("gas source"));
    }
    Ok(())
}

/// Advance the chamber by `dt_s` seconds under the given actuator flags.
///
/// Rejects non-finite inputs and any `dt_s` above one tenth of the smaller
/// coupling time constant.
pub fn step_chamber(
    state: &ChamberState,
    ambient: (f64, f64),
    act: ActuatorInputs,
    params: &ChamberParams,
    gas_source_ppm_per_s: f64,
    dt_s: f64,
) -> Result<ChamberState, EnvError> {
    let max_dt = params.max_stable_dt_s();
    if dt_s > max_dt {
        return Err(EnvError::UnstableDt {
            dt_s,
            max_s: max_dt,
        });
    }
    step_chamber_unchecked(state, ambient, act, params, gas_source_ppm_per_s, dt_s)
}

/// `step_chamber` without the dt stability guard.
///
/// The exponential update is unconditionally stable; the guard on the public
/// entry point only bounds per-step discretization error for the linear
/// dehumidifier/bias terms. Long-dt experiments may call this directly.
pub fn step_chamber_unchecked(
    state: &ChamberState,
    ambient: (f64, f64),
    act: ActuatorInputs,
    params: &ChamberParams,
    gas_source_ppm_per_s: f64,
    dt_s: f64,
) -> Result<ChamberState, EnvError> {
    if !dt_s.is_finite() {
        return Err(EnvError::NonFinite("dt"));
    }
    if dt_s <= 0.0 {
        return Err(EnvError::NonPositiveDt(dt_s));
    }
    check_finite(state, ambient, gas_source_ppm_per_s)?;
    params.validate()?;

    let (ambient_temp, ambient_rh) = ambient;
    let exchange = if act.fan_on {
        params.fan_exchange_multiplier
    } else {
        1.0
    };

    let temp_target = if act.cooler_on {
        evaporative_cooling_target(ambient_temp, ambient_rh, params.cooler_effectiveness)?
    } else {
        ambient_temp
    };
    let temp_c = temp_target
        + (state.temp_c - temp_target) * (-exchange * dt_s / params.tau_thermal_s).exp();

    let mut rh_pct =
        ambient_rh + (state.rh_pct - ambient_rh) * (-exchange * dt_s / params.tau_moisture_s).exp();
    if act.cooler_on {
        rh_pct += params.cooler_rh_bias_per_hour * dt_s / 3600.0;
    }
    if act.dehumidifier_on {
        rh_pct -= params.dehumidifier_rh_per_hour * dt_s / 3600.0;
    }
    rh_pct = rh_pct.clamp(0.0, 100.0);

    let mut gas_ppm = state.gas_ppm + gas_source_ppm_per_s * dt_s;
    if act.fan_on {
        let kept = 1.0 - params.gas_vent_fraction_per_step * dt_s / params.gas_vent_ref_dt_s;
        gas_ppm *= kept.max(0.0);
    }
    gas_ppm = gas_ppm.max(0.0);

    Ok(ChamberState {
        temp_c,
        rh_pct,
        gas_ppm,
        onion_mass_kg: state.onion_mass_kg,
        t_s: state.t_s + dt_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Stull formula evaluated by hand (independent of the implementation):
    //   wet_bulb(20, 50)  = 13.699342
    //   wet_bulb(30, 50)  = 22.296834
    //   wet_bulb(35, 40)  = 24.514154
    const WB_20_50: f64 = 13.699342;
    const WB_30_50: f64 = 22.296834;
    const WB_35_40: f64 = 24.514154;

    fn state(temp_c: f64, rh_pct: f64, gas_ppm: f64) -> ChamberState {
        ChamberState {
            temp_c,
            rh_pct,
            gas_ppm,
            onion_mass_kg: 1000.0,
            t_s: 0.0,
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let s = state(25.0, 60.0, 0.0);
        let next = step_chamber(
            &s,
            (25.0, 60.0),
            ActuatorInputs::default(),
            &ChamberParams::default(),
            0.0,
            60.0,
        )
        .unwrap();
        assert_eq!(next.temp_c, 25.0);
        assert_eq!(next.rh_pct, 60.0);
        assert_eq!(next.gas_ppm, 0.0);
        assert_eq!(next.t_s, 60.0);
    }

    #[test]
    fn relaxation_stays_bounded_and_monotonic() {
        // dt equal to tau is far past the guard; the exponential form still
        // lands strictly inside (20, 30).
        let params = ChamberParams {
            tau_thermal_s: 3600.0,
            ..ChamberParams::default()
        };
        let mut s = state(20.0, 60.0, 0.0);
        let mut prev = s.temp_c;
        for _ in 0..5 {
            s = step_chamber_unchecked(
                &s,
                (30.0, 60.0),
                ActuatorInputs::default(),
                &params,
                0.0,
                3600.0,
            )
            .unwrap();
            assert!(
                s.temp_c > prev && s.temp_c < 30.0,
                "temp {} prev {}",
                s.temp_c,
                prev
            );
            prev = s.temp_c;
        }
    }

    #[test]
    fn cooler_targets_evaporative_limit() {
        let params = ChamberParams {
            cooler_effectiveness: 0.6,
            ..ChamberParams::default()
        };
        let act = ActuatorInputs {
            cooler_on: true,
            ..ActuatorInputs::default()
        };
        let target = 30.0 - 0.6 * (30.0 - WB_30_50);
        // Step long enough (via repeated guarded steps) to converge close to target.
        let mut s = state(30.0, 50.0, 0.0);
        for _ in 0..2000 {
            s = step_chamber(&s, (30.0, 50.0), act, &params, 0.0, 60.0).unwrap();
        }
        assert!(
            (s.temp_c - target).abs() < 0.05,
            "temp {} target {}",
            s.temp_c,
            target
        );
    }

    #[test]
    fn wet_bulb_saturated_air() {
        let wb = wet_bulb(20.0, 100.0).unwrap();
        assert!((wb - 20.0).abs() < 0.5);
        assert!(wb <= 20.0);
    }

    #[test]
    fn wet_bulb_matches_hand_evaluation() {
        assert!((wet_bulb(20.0, 50.0).unwrap() - WB_20_50).abs() < 1e-4);
        assert!(wet_bulb(20.0, 50.0).unwrap() > 13.0 && wet_bulb(20.0, 50.0).unwrap() < 14.0);
        assert!((wet_bulb(35.0, 40.0).unwrap() - WB_35_40).abs() < 1e-4);
    }

    #[test]
    fn wet_bulb_monotone_in_rh() {
        assert!(wet_bulb(20.0, 30.0).unwrap() < wet_bulb(20.0, 80.0).unwrap());
    }

    #[test]
    fn wet_bulb_rejects_out_of_range() {
        assert!(wet_bulb(60.0, 50.0).is_err());
        assert!(wet_bulb(20.0, 0.0).is_err());
        assert!(wet_bulb(20.0, 101.0).is_err());
        assert!(wet_bulb(f64::NAN, 50.0).is_err());
    }

    #[test]
    fn evap_target_endpoints_and_midpoint() {
        assert_eq!(evaporative_cooling_target(35.0, 40.0, 0.0).unwrap(), 35.0);
        let full = evaporative_cooling_target(35.0, 40.0, 1.0).unwrap();
        assert!((full - WB_35_40).abs() < 1e-4);
        let half = evaporative_cooling_target(35.0, 40.0, 0.5).unwrap();
        assert!((half - (35.0 + full) / 2.0).abs() < 1e-9);
        assert!(evaporative_cooling_target(35.0, 40.0, 1.5).is_err());
    }

    #[test]
    fn ambient_profile_clamps_and_interpolates() {
        let single = AmbientProfile::constant(30.0, 70.0).unwrap();
        assert_eq!(ambient_at(&single, 999.0), (30.0, 70.0));

        let two = AmbientProfile::new(vec![
            AmbientSample {
                t_s: 0.0,
                temp_c: 20.0,
                rh_pct: 50.0,
            },
            AmbientSample {
                t_s: 100.0,
                temp_c: 30.0,
                rh_pct: 70.0,
            },
        ])
        .unwrap();
        assert_eq!(ambient_at(&two, 50.0), (25.0, 60.0));
        assert_eq!(ambient_at(&two, -10.0), (20.0, 50.0));
        assert_eq!(ambient_at(&two, 1e9), (30.0, 70.0));
    }

    #[test]
    fn ambient_profile_rejects_bad_input() {
        assert!(matches!(
            AmbientProfile::new(vec![]),
            Err(EnvError::EmptyProfile)
        ));
        let dup = AmbientProfile::new(vec![
            AmbientSample {
                t_s: 0.0,
                temp_c: 20.0,
                rh_pct: 50.0,
            },
            AmbientSample {
                t_s: 0.0,
                temp_c: 21.0,
                rh_pct: 50.0,
            },
        ]);
        assert!(dup.is_err());
        let bad_rh = AmbientProfile::new(vec![AmbientSample {
            t_s: 0.0,
            temp_c: 20.0,
            rh_pct: 101.0,
        }]);
        assert!(bad_rh.is_err());
    }

    #[test]
    fn ambient_csv_round_trip() {
        let text = "t_s,temp_c,rh_pct\n0,20,50\n100,30.5,70\n";
        let p = AmbientProfile::from_csv_str(text).unwrap();
        assert_eq!(p.samples().len(), 2);
        assert_eq!(ambient_at(&p, 100.0), (30.5, 70.0));

        assert!(AmbientProfile::from_csv_str("time,temp,rh\n0,1,2\n").is_err());
        assert!(AmbientProfile::from_csv_str("t_s,temp_c,rh_pct\n0,abc,50\n").is_err());
    }

    #[test]
    fn dt_guard_enforced() {
        let s = state(25.0, 60.0, 0.0);
        let params = ChamberParams::default(); // min tau 3600 -> max dt 360
        let err = step_chamber(
            &s,
            (25.0, 60.0),
            ActuatorInputs::default(),
            &params,
            0.0,
            400.0,
        );
        assert!(matches!(err, Err(EnvError::UnstableDt { .. })));
        assert!(step_chamber(
            &s,
            (25.0, 60.0),
            ActuatorInputs::default(),
            &params,
            0.0,
            360.0
        )
        .is_ok());
        assert!(step_chamber(
            &s,
            (25.0, 60.0),
            ActuatorInputs::default(),
            &params,
            0.0,
            0.0
        )
        .is_err());
        assert!(step_chamber(
            &s,
            (25.0, f64::NAN),
            ActuatorInputs::default(),
            &params,
            0.0,
            60.0
        )
        .is_err());
    }

    #[test]
    fn gap_decays_within_five_tau() {
        let params = ChamberParams::default();
        let mut s = state(20.0, 60.0, 0.0);
        let ambient = (30.0, 60.0);
        let dt = 60.0;
        let steps = (5.0 * params.tau_thermal_s / dt).ceil() as usize;
        let gap0 = (s.temp_c - ambient.0).abs();
        let mut prev_gap = gap0;
        for _ in 0..steps {
            s = step_chamber(&s, ambient, ActuatorInputs::default(), &params, 0.0, dt).unwrap();
            let gap = (s.temp_c - ambient.0).abs();
            assert!(gap <= prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 0.01 * gap0);
    }

    #[test]
    fn step_is_deterministic() {
        let s = state(28.3, 71.2, 4.5);
        let act = ActuatorInputs {
            fan_on: true,
            dehumidifier_on: true,
            cooler_on: true,
            uvc_on: false,
        };
        let params = ChamberParams::default();
        let a = step_chamber(&s, (31.0, 80.0), act, &params, 1e-4, 60.0).unwrap();
        let b = step_chamber(&s, (31.0, 80.0), act, &params, 1e-4, 60.0).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn rh_and_gas_stay_in_range(
            temp in -10.0..45.0f64,
            rh in 0.0..100.0f64,
            gas in 0.0..50.0f64,
            amb_t in -10.0..45.0f64,
            amb_rh in 0.0..100.0f64,
            source in 0.0..0.01f64,
            fan in any::<bool>(),
            dehum in any::<bool>(),
            cooler in any::<bool>(),
        ) {
            let s = state(temp, rh, gas);
            let act = ActuatorInputs { fan_on: fan, dehumidifier_on: dehum, cooler_on: cooler, uvc_on: false };
            // cooler needs wet-bulb-valid ambient
            let amb_rh = if cooler { amb_rh.max(1.0) } else { amb_rh };
            let next = step_chamber(&s, (amb_t, amb_rh), act, &ChamberParams::default(), source, 60.0).unwrap();
            prop_assert!((0.0..=100.0).contains(&next.rh_pct));
            prop_assert!(next.gas_ppm >= 0.0);
            prop_assert!(next.t_s == 60.0);
        }

        #[test]
        fn evap_target_monotone_in_effectiveness(e1 in 0.0..1.0f64, e2 in 0.0..1.0f64) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = evaporative_cooling_target(35.0, 40.0, lo).unwrap();
            let b = evaporative_cooling_target(35.0, 40.0, hi).unwrap();
            prop_assert!(b <= a + 1e-12);
        }
    }
}
