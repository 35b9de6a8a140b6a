//! The scenario loop: ambient -> chamber step -> sensors -> controller ->
//! spoilage -> gas feedback, one tick at a time, with CSV logging and
//! optional MQTT publishing through a decoupled outbound queue.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{self, ControllerState, RelayBank};
use crate::env::{ambient_at, step_chamber, ActuatorInputs};
use crate::mqtt::{alarm_topic, relay_topic, sensor_topic, MqttClient, TelemetrySample};
use crate::sensing::{
    adc_to_ppm, sample_dht22, sample_mq135, Channel, FaultInjector, SensorReading,
};
use crate::spoilage::{
    classify_regime, gas_emission_rate, market_value_loss_pct_with, step_mold, step_spoilage,
    uvc_survival, SpoilageLedger,
};

use super::report::{ActuatorStats, RunReport};
use super::scenario::Scenario;
use super::HarnessError;

/// Header of the per-tick CSV log.
pub const CSV_HEADER: &str =
    "t_s,temp_c,rh_pct,gas_ppm,regime,weight_loss_pct,rot_pct,sprout_pct,mold_index,fan,dehum,cooler,uvc,alarm_flags";

/// A finished run: the summary report plus the full time-series log.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    /// CSV text, one row per tick, LF endings. Byte-identical for identical
    /// scenario + seed.
    pub csv: String,
}

/// Alarm raise events are published with the kind code as the value.
fn alarm_sample(t_s: f64, kind_code: f64) -> TelemetrySample {
    TelemetrySample::new(t_s, "alarm", kind_code, true)
}

type TickBatch = Vec<(String, TelemetrySample)>;

struct Publisher {
    sender: SyncSender<TickBatch>,
    dropped: Arc<AtomicU64>,
    handle: JoinHandle<u64>,
}

impl Publisher {
    /// Connect synchronously (so connection problems surface before the loop
    /// starts) and move the session into a drain thread.
    fn start(
        addr: &str,
        client_id: &str,
        keep_alive_s: u16,
        capacity: usize,
    ) -> Result<Self, HarnessError> {
        let client = MqttClient::connect(addr, client_id, keep_alive_s)?;
        // a stalled broker must surface as drops, never as a blocked run
        client.set_write_timeout(Some(std::time::Duration::from_secs(2)))?;
        let (sender, receiver): (SyncSender<TickBatch>, Receiver<TickBatch>) =
            sync_channel(capacity.max(1));
        let dropped = Arc::new(AtomicU64::new(0));
        let thread_dropped = Arc::clone(&dropped);
        let handle = std::thread::Builder::new()
            .name("telemetry-publisher".into())
            .spawn(move || {
                let mut client = client;
                let mut sent: u64 = 0;
                let mut broken = false;
                while let Ok(batch) = receiver.recv() {
                    if broken {
                        thread_dropped.fetch_add(batch.len() as u64, Ordering::Relaxed);
                        continue;
                    }
                    for (topic, sample) in &batch {
                        match client.publish_sample(topic, sample) {
                            Ok(()) => sent += 1,
                            Err(_) => {
                                // broker gone; keep draining so the simulation
                                // loop never blocks on telemetry
                                thread_dropped.fetch_add(1, Ordering::Relaxed);
                                broken = true;
                            }
                        }
                    }
                }
                let _ = client.disconnect();
                sent
            })
            .map_err(HarnessError::Io)?;
        Ok(Self {
            sender,
            dropped,
            handle,
        })
    }

    fn push(&self, batch: TickBatch) {
        let len = batch.len() as u64;
        match self.sender.try_send(batch) {
            Ok(()) => {}
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                self.dropped.fetch_add(len, Ordering::Relaxed);
            }
        }
    }

    fn finish(self) -> (u64, u64) {
        drop(self.sender);
        let sent = self.handle.join().unwrap_or(0);
        (sent, self.dropped.load(Ordering::Relaxed))
    }
}

/// Run a scenario to completion.
///
/// All configuration problems are reported before the first tick; the loop
/// itself only fails on numerical poisoning (non-finite state), which the
/// validation bounds rule out for well-formed scenarios.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    scenario.validate()?;
    let profile = scenario.ambient.to_profile(scenario.duration_s)?;
    let rates = scenario.spoilage.rates();
    let dt = scenario.dt_s;
    let ticks = scenario.ticks();

    // Independent per-channel RNG streams so fault plans or config toggles on
    // one channel never shift another channel's draws.
    let mut rng_dht =
        ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_mul(0x9E37_79B9).wrapping_add(1));
    let mut rng_gas =
        ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_mul(0x9E37_79B9).wrapping_add(2));

    let mut faults = FaultInjector::new(scenario.fault_plan())?;
    let publisher = if scenario.telemetry.enabled {
        Some(Publisher::start(
            &scenario.telemetry.broker_addr,
            &scenario.telemetry.client_id,
            scenario.telemetry.keep_alive_s,
            scenario.telemetry.queue_capacity,
        )?)
    } else {
        None
    };
    let store_id = scenario.telemetry.store_id.clone();

    let mut state = scenario.initial.to_chamber_state();
    let mut ledger = SpoilageLedger::default();
    let mut controller = ControllerState::new();
    let mut relays = RelayBank::default();
    let mut actuators = ActuatorInputs::default();
    let mut gas_source_ppm_per_s = 0.0;

    let mut csv = String::with_capacity((ticks as usize + 1) * 96);
    csv.push_str(CSV_HEADER);
    csv.push('\n');

    let mut on_ticks = [0u64; 4];
    let mut transitions = [0u64; 4];
    let mut alarm_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut peak_temp = state.temp_c;
    let mut peak_rh = state.rh_pct;
    let mut peak_gas = state.gas_ppm;

    for _ in 0..ticks {
        let ambient = ambient_at(&profile, state.t_s);
        state = step_chamber(
            &state,
            ambient,
            actuators,
            &scenario.chamber,
            gas_source_ppm_per_s,
            dt,
        )?;
        let t = state.t_s;

        let (temp_reading, rh_reading) = sample_dht22(
            state.temp_c,
            state.rh_pct,
            &scenario.sensors.dht22,
            &mut rng_dht,
            t,
        );
        let counts = sample_mq135(state.gas_ppm, &scenario.sensors.mq135, &mut rng_gas);
        let (ppm_estimate, at_rail) = adc_to_ppm(counts, &scenario.sensors.mq135);
        let gas_reading = SensorReading {
            value: ppm_estimate,
            t_s: t,
            ok: !at_rail,
        };

        let temp_reading = faults.apply(Channel::Temp, temp_reading);
        let rh_reading = faults.apply(Channel::Rh, rh_reading);
        let gas_reading = faults.apply(Channel::Gas, gas_reading);

        let mut alarm_events = Vec::new();
        if scenario.controller_enabled {
            let (next, bank, events) = control::tick(
                controller,
                temp_reading,
                rh_reading,
                gas_reading,
                &scenario.controller,
                t,
            )?;
            controller = next;
            for (idx, (was, is)) in relays.channels().iter().zip(bank.channels()).enumerate() {
                if *was != is {
                    transitions[idx] += 1;
                }
            }
            relays = bank;
            alarm_events = events;
        }
        // controller output drives the *next* environment step (one-tick
        // sensor -> relay latency)
        actuators = relays.into();

        let regime = classify_regime(state.temp_c, state.rh_pct)?;
        let lamp_intensity = if relays.uvc {
            scenario.spoilage.uvc_intensity_w_m2
        } else {
            0.0
        };
        let survival = uvc_survival(lamp_intensity, dt, scenario.spoilage.d90_dose_j_m2)?;
        ledger.mold_index = step_mold(&ledger, state.rh_pct, survival, &rates, dt)?;
        let rot_before = ledger.rot_pct;
        ledger = step_spoilage(&ledger, state.temp_c, state.rh_pct, &rates, dt)?;
        gas_source_ppm_per_s = gas_emission_rate(
            (ledger.rot_pct - rot_before) / dt,
            state.onion_mass_kg,
            scenario.spoilage.gas_emission_coeff_ppm_per_pct_kg,
        );

        for (idx, on) in relays.channels().iter().enumerate() {
            if *on {
                on_ticks[idx] += 1;
            }
        }
        for event in &alarm_events {
            if event.cleared_at_s.is_none() {
                *alarm_counts
                    .entry(event.kind.name().to_string())
                    .or_insert(0) += 1;
            }
        }
        peak_temp = peak_temp.max(state.temp_c);
        peak_rh = peak_rh.max(state.rh_pct);
        peak_gas = peak_gas.max(state.gas_ppm);

        if let Some(publisher) = &publisher {
            let mut batch: TickBatch = Vec::with_capacity(8 + alarm_events.len());
            for (channel, reading) in [
                (Channel::Temp, temp_reading),
                (Channel::Rh, rh_reading),
                (Channel::Gas, gas_reading),
            ] {
                batch.push((
                    sensor_topic(&store_id, channel.name()),
                    TelemetrySample::new(t, channel.name(), reading.value, reading.ok),
                ));
            }
            for (name, on) in RelayBank::CHANNEL_NAMES.iter().zip(relays.channels()) {
                batch.push((
                    relay_topic(&store_id, name),
                    TelemetrySample::new(t, *name, f64::from(u8::from(on)), true),
                ));
            }
            for event in &alarm_events {
                if event.cleared_at_s.is_none() {
                    batch.push((
                        alarm_topic(&store_id),
                        alarm_sample(t, event.kind.bit() as f64),
                    ));
                }
            }
            publisher.push(batch);
        }

        let alarm_flags = if scenario.controller_enabled {
            controller.alarm_flags()
        } else {
            0
        };
        let relay_bits = relays.channels().map(u8::from);
        csv.push_str(&format!(
            "{:.1},{:.4},{:.4},{:.5},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{}\n",
            t,
            state.temp_c,
            state.rh_pct,
            state.gas_ppm,
            regime,
            ledger.weight_loss_pct,
            ledger.rot_pct,
            ledger.sprout_pct,
            ledger.mold_index,
            relay_bits[0],
            relay_bits[1],
            relay_bits[2],
            relay_bits[3],
            alarm_flags,
        ));
    }

    let (telemetry_sent, telemetry_dropped) = match publisher {
        Some(p) => p.finish(),
        None => (0, 0),
    };

    let mut actuator_stats = BTreeMap::new();
    let mut energy_total = 0.0;
    for (idx, name) in RelayBank::CHANNEL_NAMES.iter().enumerate() {
        let on_time_s = on_ticks[idx] as f64 * dt;
        let energy_kwh = scenario.cost.power_w(name) * on_time_s / 3.6e6;
        energy_total += energy_kwh;
        actuator_stats.insert(
            name.to_string(),
            ActuatorStats {
                duty_cycle: if ticks > 0 {
                    on_ticks[idx] as f64 / ticks as f64
                } else {
                    0.0
                },
                transitions: transitions[idx],
                energy_kwh,
            },
        );
    }

    let report = RunReport {
        scenario_id: scenario.id.clone(),
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        dt_s: dt,
        ticks,
        ledger,
        total_spoilage_pct: ledger.total_spoilage_pct(),
        market_value_loss_pct: market_value_loss_pct_with(
            &ledger,
            scenario.spoilage.mold_visible_threshold,
        ),
        actuators: actuator_stats,
        energy_kwh_total: energy_total,
        alarm_counts,
        peak_temp_c: peak_temp,
        peak_rh_pct: peak_rh,
        peak_gas_ppm: peak_gas,
        onion_mass_kg: state.onion_mass_kg,
        telemetry_sent,
        telemetry_dropped,
    };

    Ok(RunOutput { report, csv })
}
