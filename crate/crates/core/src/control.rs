//! Threshold controller with hysteresis: fans and cooler on over-temperature,
//! dehumidifier and UV-C lamp on over-humidity, UV-C and fan on gas spikes.
//! Requests pass through minimum on/off timers and a rolling 24 h UV-C duty
//! cap before latching relays. `tick` is a pure transition function over
//! value-typed state, so traces replay deterministically.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::ActuatorInputs;
use crate::sensing::SensorReading;

/// Rolling window over which UV-C duty is capped, seconds.
pub const UVC_DUTY_WINDOW_S: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("time went backwards: tick at {now_s} s after {last_s} s")]
    TimeWentBackwards { last_s: f64, now_s: f64 },
    #[error("invalid controller config: {0}")]
    BadConfig(String),
}

/// Controller thresholds and timing limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Fan/cooler request ON at or above this temperature, degC.
    pub temp_high_on_c: f64,
    /// Fan/cooler release below `temp_high_on_c - temp_hyst_c`.
    pub temp_hyst_c: f64,
    /// Dehumidifier/UV-C request ON at or above this humidity, %RH.
    pub rh_high_on_pct: f64,
    /// Dehumidifier/UV-C release below `rh_high_on_pct - rh_hyst_pct`.
    pub rh_hyst_pct: f64,
    /// A reading this many times the rolling baseline counts as a spike.
    pub gas_spike_factor: f64,
    /// Time constant of the rolling gas baseline, seconds.
    pub gas_baseline_window_s: f64,
    /// Readings below this absolute level never count as spikes, ppm.
    pub gas_abs_floor_ppm: f64,
    /// Maximum UV-C on-time as a fraction of each rolling 24 h.
    pub uvc_max_duty: f64,
    pub uvc_min_on_s: f64,
    pub uvc_min_off_s: f64,
    /// Minimum on/off times for fan, dehumidifier, and cooler relays.
    pub actuator_min_on_s: f64,
    pub actuator_min_off_s: f64,
    /// Raise a SensorFault alarm whenever a reading arrives with ok = false.
    pub alarm_on_sensor_fault: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            temp_high_on_c: 30.0,
            temp_hyst_c: 2.0,
            rh_high_on_pct: 75.0,
            rh_hyst_pct: 5.0,
            gas_spike_factor: 3.0,
            gas_baseline_window_s: 3600.0,
            gas_abs_floor_ppm: 5.0,
            uvc_max_duty: 0.25,
            uvc_min_on_s: 600.0,
            uvc_min_off_s: 600.0,
            actuator_min_on_s: 300.0,
            actuator_min_off_s: 300.0,
            alarm_on_sensor_fault: true,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::BadConfig(m.to_string()));
        if !(self.temp_hyst_c > 0.0 && self.rh_hyst_pct > 0.0) {
            return bad("hysteresis bands must be > 0");
        }
        if !(self.uvc_max_duty > 0.0 && self.uvc_max_duty <= 1.0) {
            return bad("uvc_max_duty must be in (0, 1]");
        }
        if !(self.gas_baseline_window_s > 0.0) {
            return bad("gas_baseline_window_s must be > 0");
        }
        if !(self.gas_spike_factor > 1.0) {
            return bad("gas_spike_factor must be > 1");
        }
        if self.uvc_min_on_s < 0.0
            || self.uvc_min_off_s < 0.0
            || self.actuator_min_on_s < 0.0
            || self.actuator_min_off_s < 0.0
        {
            return bad("minimum on/off times must be >= 0");
        }
        Ok(())
    }
}

/// Latched relay outputs, one channel per actuator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayBank {
    pub fan: bool,
    pub dehumidifier: bool,
    pub cooler: bool,
    pub uvc: bool,
}

impl RelayBank {
    pub const CHANNEL_NAMES: [&'static str; 4] = ["fan", "dehumidifier", "cooler", "uvc"];

    pub fn channels(&self) -> [bool; 4] {
        [self.fan, self.dehumidifier, self.cooler, self.uvc]
    }

    fn get(&self, idx: usize) -> bool {
        self.channels()[idx]
    }

    fn set(&mut self, idx: usize, on: bool) {
        match idx {
            FAN => self.fan = on,
            DEHUMIDIFIER => self.dehumidifier = on,
            COOLER => self.cooler = on,
            UVC => self.uvc = on,
            _ => unreachable!(),
        }
    }
}

impl From<RelayBank> for ActuatorInputs {
    fn from(relays: RelayBank) -> Self {
        ActuatorInputs {
            fan_on: relays.fan,
            dehumidifier_on: relays.dehumidifier,
            cooler_on: relays.cooler,
            uvc_on: relays.uvc,
        }
    }
}

const FAN: usize = 0;
const DEHUMIDIFIER: usize = 1;
const COOLER: usize = 2;
const UVC: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlarmKind {
    OverTemp,
    OverHumidity,
    GasSpike,
    SensorFault,
}

impl AlarmKind {
    pub const ALL: [AlarmKind; 4] = [
        AlarmKind::OverTemp,
        AlarmKind::OverHumidity,
        AlarmKind::GasSpike,
        AlarmKind::SensorFault,
    ];

    fn index(&self) -> usize {
        match self {
            AlarmKind::OverTemp => 0,
            AlarmKind::OverHumidity => 1,
            AlarmKind::GasSpike => 2,
            AlarmKind::SensorFault => 3,
        }
    }

    /// Bit for the CSV `alarm_flags` column.
    pub fn bit(&self) -> u8 {
        1 << self.index()
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlarmKind::OverTemp => "over_temp",
            AlarmKind::OverHumidity => "over_humidity",
            AlarmKind::GasSpike => "gas_spike",
            AlarmKind::SensorFault => "sensor_fault",
        }
    }
}

/// An alarm episode. Raised events carry `cleared_at_s = None`; the matching
/// clear event repeats the kind with both timestamps set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub kind: AlarmKind,
    pub raised_at_s: f64,
    pub cleared_at_s: Option<f64>,
}

/// Exponentially-weighted rolling gas baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GasBaseline {
    /// Current baseline estimate; None until the first sample sets it.
    pub baseline_ppm: Option<f64>,
    last_t_s: f64,
}

/// Update the rolling baseline and test the reading for a spike.
///
/// A spike is a reading at least `gas_spike_factor` times the baseline and at
/// least `gas_abs_floor_ppm`. Spiking samples do not feed the baseline, so a
/// spike cannot mask itself.
pub fn detect_gas_spike(
    state: GasBaseline,
    reading_ppm: f64,
    config: &ControllerConfig,
    t_s: f64,
) -> (GasBaseline, bool) {
    let Some(baseline) = state.baseline_ppm else {
        return (
            GasBaseline {
                baseline_ppm: Some(reading_ppm),
                last_t_s: t_s,
            },
            false,
        );
    };
    let spike = reading_ppm >= config.gas_spike_factor * baseline
        && reading_ppm >= config.gas_abs_floor_ppm;
    let next = if spike {
        GasBaseline {
            baseline_ppm: Some(baseline),
            last_t_s: t_s,
        }
    } else {
        let dt = (t_s - state.last_t_s).max(0.0);
        let alpha = 1.0 - (-dt / config.gas_baseline_window_s).exp();
        GasBaseline {
            baseline_ppm: Some(baseline + alpha * (reading_ppm - baseline)),
            last_t_s: t_s,
        }
    };
    (next, spike)
}

/// Full controller state between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub relays: RelayBank,
    temp_high: bool,
    rh_high: bool,
    gas_spike: bool,
    last_transition_s: [f64; 4],
    uvc_spans: VecDeque<(f64, f64)>,
    uvc_on_since: Option<f64>,
    pub gas_baseline: GasBaseline,
    alarm_raised_at: [Option<f64>; 4],
    last_t_s: f64,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self::new()
    }
}

impl ControllerState {
    pub fn new() -> Self {
        Self {
            relays: RelayBank::default(),
            temp_high: false,
            rh_high: false,
            gas_spike: false,
            last_transition_s: [f64::NEG_INFINITY; 4],
            uvc_spans: VecDeque::new(),
            uvc_on_since: None,
            gas_baseline: GasBaseline::default(),
            alarm_raised_at: [None; 4],
            last_t_s: f64::NEG_INFINITY,
        }
    }

    /// UV-C on-time accumulated inside the trailing window ending at `t_s`.
    pub fn uvc_on_time_in_window(&self, t_s: f64, window_s: f64) -> f64 {
        let lo = t_s - window_s;
        let mut used: f64 = self
            .uvc_spans
            .iter()
            .map(|&(start, end)| (end.min(t_s) - start.max(lo)).max(0.0))
            .sum();
        if let Some(on_since) = self.uvc_on_since {
            used += (t_s - on_since.max(lo)).max(0.0);
        }
        used
    }

    /// Bitmask of currently active alarms (see [`AlarmKind::bit`]).
    pub fn alarm_flags(&self) -> u8 {
        let mut flags = 0;
        for kind in AlarmKind::ALL {
            if self.alarm_raised_at[kind.index()].is_some() {
                flags |= kind.bit();
            }
        }
        flags
    }
}

/// Whether the UV-C lamp may be (or stay) ON at `t_s`.
///
/// A lamp that is already on may continue while the trailing-window usage is
/// under the duty budget. Starting a new burst additionally requires enough
/// remaining budget to honor a full minimum on-time and the minimum off
/// spacing since the last transition.
pub fn uvc_duty_guard(
    state: &ControllerState,
    request_on: bool,
    config: &ControllerConfig,
    t_s: f64,
) -> bool {
    if !request_on {
        return true;
    }
    let budget_s = config.uvc_max_duty * UVC_DUTY_WINDOW_S;
    let used_s = state.uvc_on_time_in_window(t_s, UVC_DUTY_WINDOW_S);
    if state.relays.uvc {
        used_s < budget_s
    } else {
        used_s + config.uvc_min_on_s <= budget_s
            && t_s - state.last_transition_s[UVC] >= config.uvc_min_off_s
    }
}

fn min_time_satisfied(currently_on: bool, since_s: f64, min_on_s: f64, min_off_s: f64) -> bool {
    if currently_on {
        since_s >= min_on_s
    } else {
        since_s >= min_off_s
    }
}

/// Advance the controller by one sample set.
///
/// Readings with `ok = false` (or non-finite values) leave the corresponding
/// comparator and spike state untouched, so faulty sensors hold the last
/// action rather than flipping relays.
pub fn tick(
    state: ControllerState,
    temp: SensorReading,
    rh: SensorReading,
    gas: SensorReading,
    config: &ControllerConfig,
    t_s: f64,
) -> Result<(ControllerState, RelayBank, Vec<Alarm>), ControlError> {
    config.validate()?;
    if t_s < state.last_t_s {
        return Err(ControlError::TimeWentBackwards {
            last_s: state.last_t_s,
            now_s: t_s,
        });
    }
    let mut state = state;
    state.last_t_s = t_s;

    if temp.ok && temp.value.is_finite() {
        if temp.value >= config.temp_high_on_c {
            state.temp_high = true;
        } else if temp.value <= config.temp_high_on_c - config.temp_hyst_c {
            state.temp_high = false;
        }
    }
    if rh.ok && rh.value.is_finite() {
        if rh.value >= config.rh_high_on_pct {
            state.rh_high = true;
        } else if rh.value <= config.rh_high_on_pct - config.rh_hyst_pct {
            state.rh_high = false;
        }
    }
    if gas.ok && gas.value.is_finite() {
        let (baseline, spike) = detect_gas_spike(state.gas_baseline, gas.value, config, t_s);
        state.gas_baseline = baseline;
        state.gas_spike = spike;
    }

    let requests = [
        state.temp_high || state.gas_spike, // fan also vents gas spikes
        state.rh_high,
        state.temp_high,
        state.rh_high || state.gas_spike,
    ];

    for idx in [FAN, DEHUMIDIFIER, COOLER] {
        let cur = state.relays.get(idx);
        if requests[idx] != cur
            && min_time_satisfied(
                cur,
                t_s - state.last_transition_s[idx],
                config.actuator_min_on_s,
                config.actuator_min_off_s,
            )
        {
            state.relays.set(idx, requests[idx]);
            state.last_transition_s[idx] = t_s;
        }
    }

    // UV-C: duty-capped over the rolling day.
    if state.relays.uvc {
        let over_budget = !uvc_duty_guard(&state, true, config, t_s);
        let released = !requests[UVC]
            && min_time_satisfied(
                true,
                t_s - state.last_transition_s[UVC],
                config.uvc_min_on_s,
                config.uvc_min_off_s,
            );
        if released || over_budget {
            state.relays.uvc = false;
            state.last_transition_s[UVC] = t_s;
            if let Some(on_since) = state.uvc_on_since.take() {
                state.uvc_spans.push_back((on_since, t_s));
            }
        }
    } else if requests[UVC] && uvc_duty_guard(&state, true, config, t_s) {
        state.relays.uvc = true;
        state.last_transition_s[UVC] = t_s;
        state.uvc_on_since = Some(t_s);
    }
    while let Some(&(_, end)) = state.uvc_spans.front() {
        if end < t_s - UVC_DUTY_WINDOW_S {
            state.uvc_spans.pop_front();
        } else {
            break;
        }
    }

    let any_fault = !(temp.ok && rh.ok && gas.ok);
    let conditions = [
        (AlarmKind::OverTemp, state.temp_high),
        (AlarmKind::OverHumidity, state.rh_high),
        (AlarmKind::GasSpike, state.gas_spike),
        (
            AlarmKind::SensorFault,
            config.alarm_on_sensor_fault && any_fault,
        ),
    ];
    let mut events = Vec::new();
    for (kind, active) in conditions {
        let slot = &mut state.alarm_raised_at[kind.index()];
        match (active, *slot) {
            (true, None) => {
                *slot = Some(t_s);
                events.push(Alarm {
                    kind,
                    raised_at_s: t_s,
                    cleared_at_s: None,
                });
            }
            (false, Some(raised_at_s)) => {
                *slot = None;
                events.push(Alarm {
                    kind,
                    raised_at_s,
                    cleared_at_s: Some(t_s),
                });
            }
            _ => {}
        }
    }

    let relays = state.relays;
    Ok((state, relays, events))
}
