//! Sensor models for the DHT22 temperature/humidity probe and the MQ-135
//! spoilage-gas channel: range clamping, resolution, Gaussian noise, ADC
//! quantization, the controller-side inverse calibration, and fault injection.
//!
//! Every sampler takes an explicit seeded RNG stream so a scenario replays
//! bit-identically.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("invalid sensor model: {0}")]
    BadModel(String),
    #[error("fault window {index}: start {start_s} must precede end {end_s}")]
    BadFaultWindow {
        index: usize,
        start_s: f64,
        end_s: f64,
    },
}

/// DHT22 measurement limits, degrees Celsius.
pub const DHT22_TEMP_RANGE_C: (f64, f64) = (-40.0, 80.0);
/// DHT22 humidity limits, percent.
pub const DHT22_RH_RANGE_PCT: (f64, f64) = (0.0, 100.0);
/// Reported resolution of both DHT22 channels.
pub const DHT22_RESOLUTION: f64 = 0.1;
/// The sensor cannot be polled faster than this; callers must space samples.
pub const DHT22_MIN_SAMPLE_INTERVAL_S: f64 = 2.0;

/// DHT22 noise model. Ranges and resolution are fixed hardware properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dht22Model {
    /// Temperature noise standard deviation, degC.
    pub temp_noise_sd: f64,
    /// Humidity noise standard deviation, %RH.
    pub rh_noise_sd: f64,
}

impl Default for Dht22Model {
    fn default() -> Self {
        Self {
            temp_noise_sd: 0.5,
            rh_noise_sd: 2.0,
        }
    }
}

impl Dht22Model {
    pub fn validate(&self) -> Result<(), SensingError> {
        if self.temp_noise_sd < 0.0 || self.rh_noise_sd < 0.0 {
            return Err(SensingError::BadModel("noise SDs must be >= 0".into()));
        }
        Ok(())
    }
}

/// MQ-135 divider model: `Rs = R0 * a * ppm^b` with b < 0, read through a
/// load-resistor divider into an ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mq135Model {
    /// Calibration resistance in clean air, ohms.
    pub r0_ohm: f64,
    /// Power-law prefactor of Rs/R0.
    pub curve_a: f64,
    /// Power-law exponent; negative, resistance falls as gas rises.
    pub curve_b: f64,
    /// ADC word width, bits.
    pub adc_bits: u8,
    /// ADC full-scale voltage (supply-referenced), volts.
    pub adc_vref: f64,
    /// Divider load resistor, ohms.
    pub load_resistor_ohm: f64,
    /// Log-normal multiplicative noise on Rs, standard deviation in ln-space.
    pub rs_noise_sd: f64,
    /// Detectable range endpoints used for rail readings, ppm.
    pub ppm_detect_min: f64,
    pub ppm_detect_max: f64,
}

impl Default for Mq135Model {
    fn default() -> Self {
        Self {
            // R0 chosen so a ~10 ppm clean-air aggregate reads near mid-scale.
            r0_ohm: 6800.0,
            curve_a: 3.6,
            curve_b: -0.38,
            adc_bits: 10,
            adc_vref: 5.0,
            load_resistor_ohm: 10_000.0,
            rs_noise_sd: 0.05,
            ppm_detect_min: 1.0,
            ppm_detect_max: 10_000.0,
        }
    }
}

impl Mq135Model {
    pub fn validate(&self) -> Result<(), SensingError> {
        if !(self.curve_b < 0.0) {
            return Err(SensingError::BadModel("curve_b must be < 0".into()));
        }
        if !(self.r0_ohm > 0.0 && self.curve_a > 0.0 && self.load_resistor_ohm > 0.0) {
            return Err(SensingError::BadModel(
                "resistances and curve_a must be > 0".into(),
            ));
        }
        if self.adc_bits == 0 || self.adc_bits > 16 {
            return Err(SensingError::BadModel("adc_bits must be in 1..=16".into()));
        }
        if self.rs_noise_sd < 0.0 {
            return Err(SensingError::BadModel("rs_noise_sd must be >= 0".into()));
        }
        if !(self.ppm_detect_min > 0.0 && self.ppm_detect_max > self.ppm_detect_min) {
            return Err(SensingError::BadModel(
                "detectable range must satisfy 0 < min < max".into(),
            ));
        }
        Ok(())
    }

    /// Largest ADC count for the configured width.
    pub fn adc_max(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }

    /// Sensor resistance for a gas concentration, ohms.
    fn rs_ohm(&self, ppm: f64) -> f64 {
        self.r0_ohm * self.curve_a * ppm.powf(self.curve_b)
    }

    /// Fraction of vref seen across the load resistor (monotone in ppm).
    fn divider_fraction(&self, rs_ohm: f64) -> f64 {
        self.load_resistor_ohm / (self.load_resistor_ohm + rs_ohm)
    }
}

/// One timestamped sensor value. `ok = false` readings hold the last valid
/// value so downstream consumers can distinguish stale data from fresh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub value: f64,
    pub t_s: f64,
    pub ok: bool,
}

impl SensorReading {
    pub fn new(value: f64, t_s: f64) -> Self {
        Self {
            value,
            t_s,
            ok: true,
        }
    }
}

/// Sensor channel identifiers for fault plans and telemetry topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Temp,
    Rh,
    Gas,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Temp, Channel::Rh, Channel::Gas];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Temp => "temp",
            Channel::Rh => "rh",
            Channel::Gas => "gas",
        }
    }

    fn index(&self) -> usize {
        match self {
            Channel::Temp => 0,
            Channel::Rh => 1,
            Channel::Gas => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// Value freezes at the last valid reading but still claims to be good.
    Stuck,
    /// Reading flagged invalid; value stale-holds.
    Dropout,
}

/// One fault interval on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultWindow {
    pub channel: Channel,
    pub start_s: f64,
    pub end_s: f64,
    pub mode: FaultMode,
}

/// A schedule of sensor faults to inject into a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub windows: Vec<FaultWindow>,
}

impl FaultPlan {
    pub fn validate(&self) -> Result<(), SensingError> {
        for (index, w) in self.windows.iter().enumerate() {
            if !(w.start_s < w.end_s) {
                return Err(SensingError::BadFaultWindow {
                    index,
                    start_s: w.start_s,
                    end_s: w.end_s,
                });
            }
        }
        Ok(())
    }

    /// The fault active on `channel` at time `t_s`, if any.
    pub fn active(&self, channel: Channel, t_s: f64) -> Option<FaultMode> {
        self.windows
            .iter()
            .find(|w| w.channel == channel && w.start_s <= t_s && t_s < w.end_s)
            .map(|w| w.mode)
    }
}

/// Applies a [`FaultPlan`] to a reading stream, holding per-channel state for
/// stuck/stale values.
#[derive(Debug, Clone)]
pub struct FaultInjector {
    plan: FaultPlan,
    last_valid: [Option<f64>; 3],
}

impl FaultInjector {
    pub fn new(plan: FaultPlan) -> Result<Self, SensingError> {
        plan.validate()?;
        Ok(Self {
            plan,
            last_valid: [None; 3],
        })
    }

    pub fn apply(&mut self, channel: Channel, reading: SensorReading) -> SensorReading {
        let idx = channel.index();
        match self.plan.active(channel, reading.t_s) {
            None => {
                self.last_valid[idx] = Some(reading.value);
                reading
            }
            Some(FaultMode::Stuck) => SensorReading {
                value: self.last_valid[idx].unwrap_or(reading.value),
                t_s: reading.t_s,
                ok: true,
            },
            Some(FaultMode::Dropout) => SensorReading {
                value: self.last_valid[idx].unwrap_or(reading.value),
                t_s: reading.t_s,
                ok: false,
            },
        }
    }
}

fn gaussian(rng: &mut impl Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("finite sd").sample(rng)
    } else {
        0.0
    }
}

fn quantize(value: f64, resolution: f64) -> f64 {
    (value / resolution).round() * resolution
}

/// Sample the DHT22: Gaussian noise, range clamp, then 0.1-unit resolution.
///
/// Returns `(temperature, humidity)` readings stamped at `t_s`. The hardware
/// minimum sample spacing ([`DHT22_MIN_SAMPLE_INTERVAL_S`]) is the caller's
/// responsibility.
pub fn sample_dht22(
    true_temp_c: f64,
    true_rh_pct: f64,
    model: &Dht22Model,
    rng: &mut impl Rng,
    t_s: f64,
) -> (SensorReading, SensorReading) {
    let temp = (true_temp_c + gaussian(rng, model.temp_noise_sd))
        .clamp(DHT22_TEMP_RANGE_C.0, DHT22_TEMP_RANGE_C.1);
    let rh = (true_rh_pct + gaussian(rng, model.rh_noise_sd))
        .clamp(DHT22_RH_RANGE_PCT.0, DHT22_RH_RANGE_PCT.1);
    (
        SensorReading::new(quantize(temp, DHT22_RESOLUTION), t_s),
        SensorReading::new(quantize(rh, DHT22_RESOLUTION), t_s),
    )
}

/// Sample the MQ-135: multiplicative log-normal noise on Rs, divider voltage,
/// ADC quantization. Counts rise with gas concentration.
pub fn sample_mq135(true_ppm: f64, model: &Mq135Model, rng: &mut impl Rng) -> u16 {
    let mut rs = model.rs_ohm(true_ppm.max(0.0));
    if model.rs_noise_sd > 0.0 {
        rs *= gaussian(rng, model.rs_noise_sd).exp();
    }
    let fraction = model.divider_fraction(rs);
    let max = model.adc_max();
    let counts = (fraction * max as f64).round();
    counts.clamp(0.0, max as f64) as u16
}

/// Invert the noiseless MQ-135 forward model.
///
/// Returns the ppm estimate and whether the ADC sat at a rail. Rail readings
/// map to the detectable-range endpoints and should be treated as invalid by
/// the caller (`ok = false` semantics).
pub fn adc_to_ppm(adc_counts: u16, model: &Mq135Model) -> (f64, bool) {
    let max = model.adc_max();
    if adc_counts == 0 {
        return (model.ppm_detect_min, true);
    }
    if adc_counts >= max {
        return (model.ppm_detect_max, true);
    }
    let rs = model.load_resistor_ohm * (max - adc_counts) as f64 / adc_counts as f64;
    let ppm = (rs / (model.r0_ohm * model.curve_a)).powf(1.0 / model.curve_b);
    (ppm.clamp(model.ppm_detect_min, model.ppm_detect_max), false)
}
