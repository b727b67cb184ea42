//! Flight computer: mission phases, calibration, unit conversion and framing.
//!
//! The OBC only ever sees [`RawSensorFrame`]s and bus readings; truth state
//! stays on the simulator side of that boundary.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sensors::{
    accel_from_raw, altitude_from_pressure, attitude_from_imu, parse_gga, ppm_from_adc, uv_from_adc,
    Attitude, CalibrationState, Calibrator, RawSensorFrame,
};
use crate::telemetry::{encode_frame, FRAME_LEN};

/// Mission phase. Transitions only move forward through the declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum FlightPhase {
    #[default]
    Boot = 0,
    Calibrating = 1,
    Ready = 2,
    Ascent = 3,
    Descent = 4,
    Landed = 5,
}

impl FlightPhase {
    pub const ALL: [FlightPhase; 6] = [
        FlightPhase::Boot,
        FlightPhase::Calibrating,
        FlightPhase::Ready,
        FlightPhase::Ascent,
        FlightPhase::Descent,
        FlightPhase::Landed,
    ];

    pub fn from_u8(value: u8) -> Option<Self> {
        Self::ALL.get(usize::from(value)).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FlightPhase::Boot => "BOOT",
            FlightPhase::Calibrating => "CALIBRATING",
            FlightPhase::Ready => "READY",
            FlightPhase::Ascent => "ASCENT",
            FlightPhase::Descent => "DESCENT",
            FlightPhase::Landed => "LANDED",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == name)
    }
}

impl fmt::Display for FlightPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One telemetry sample in engineering units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TelemetryRecord {
    pub t_ms: u32,
    pub phase: FlightPhase,
    pub temperature_c: f64,
    pub pressure_pa: f64,
    pub altitude_m: f64,
    pub uv_adc: u16,
    pub uv_index: u8,
    pub air_quality_ppm: f64,
    pub accel_mps2: [f64; 3],
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub yaw_deg: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub bus_voltage_v: f64,
    pub bus_current_ma: f64,
}

/// Input voltage and current as measured by the controller's ADC.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BusReading {
    pub voltage_v: f64,
    pub current_ma: f64,
}

/// Phase-detection thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseThresholds {
    /// Rise above the pad that declares liftoff.
    pub liftoff_m: f64,
    /// Drop below the running maximum that declares apogee passed.
    pub apogee_drop_m: f64,
    pub landed_altitude_m: f64,
    pub landed_rate_mps: f64,
    pub landed_dwell_samples: usize,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self {
            liftoff_m: 2.0,
            apogee_drop_m: 1.0,
            landed_altitude_m: 1.0,
            landed_rate_mps: 0.2,
            landed_dwell_samples: 3,
        }
    }
}

/// Least-squares slope of evenly spaced samples.
fn fitted_rate(samples: &[f64], dt_s: f64) -> f64 {
    let n = samples.len() as f64;
    if samples.len() < 2 || dt_s <= 0.0 {
        return 0.0;
    }
    let mean_i = (n - 1.0) / 2.0;
    let mean_h = samples.iter().sum::<f64>() / n;
    let (num, den) = samples.iter().enumerate().fold((0.0, 0.0), |(num, den), (i, h)| {
        let di = i as f64 - mean_i;
        (num + di * (h - mean_h), den + di * di)
    });
    num / den / dt_s
}

/// Next phase given the recent altitude window (oldest first).
///
/// Only the flight transitions READY→ASCENT→DESCENT→LANDED are decided here,
/// at most one per call. Histories shorter than three samples leave the phase
/// unchanged.
pub fn detect_phase(
    history: &[f64],
    current: FlightPhase,
    running_max_m: f64,
    sample_period_s: f64,
    thresholds: &PhaseThresholds,
) -> FlightPhase {
    let Some(&latest) = history.last() else {
        return current;
    };
    if history.len() < 3 {
        return current;
    }
    match current {
        FlightPhase::Ready if latest > thresholds.liftoff_m => FlightPhase::Ascent,
        FlightPhase::Ascent if latest < running_max_m - thresholds.apogee_drop_m => FlightPhase::Descent,
        FlightPhase::Descent => {
            let dwell = thresholds.landed_dwell_samples.max(2);
            if history.len() < dwell {
                return current;
            }
            let window = &history[history.len() - dwell..];
            let low = window.iter().all(|h| *h < thresholds.landed_altitude_m);
            let still = fitted_rate(window, sample_period_s).abs() < thresholds.landed_rate_mps;
            if low && still {
                FlightPhase::Landed
            } else {
                current
            }
        }
        _ => current,
    }
}

/// Last good values substituted when a conversion fails.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeldValues {
    pub attitude: Attitude<f64>,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub altitude_m: f64,
}

/// Applies every onboard conversion to one raw frame.
///
/// Failed conversions (degenerate accelerometer vector, unparsable GGA,
/// non-positive pressure) fall back to `held` and update it otherwise.
pub fn build_record(
    raw: &RawSensorFrame,
    cal: &CalibrationState,
    t_ms: u32,
    phase: FlightPhase,
    bus: BusReading,
    reference_pressure_pa: f64,
    held: &mut HeldValues,
) -> TelemetryRecord {
    let pressure_pa = f64::from(raw.bmp_pressure_pa);
    if let Ok(alt) = altitude_from_pressure(pressure_pa, reference_pressure_pa) {
        held.altitude_m = alt;
    }
    let (_, uv_index) = uv_from_adc::<f64>(raw.uv_adc);
    let accel_mps2 = [0, 1, 2].map(|axis| accel_from_raw::<f64>(raw.accel_raw[axis], cal.accel_offset_raw[axis]));
    let mag = raw.mag_raw.map(f64::from);
    if let Ok(att) = attitude_from_imu(accel_mps2, mag) {
        held.attitude = att;
    }
    if let Ok(fix) = parse_gga(&raw.gga_sentence) {
        held.lat_deg = fix.lat_deg;
        held.lon_deg = fix.lon_deg;
    }
    TelemetryRecord {
        t_ms,
        phase,
        temperature_c: f64::from(raw.bmp_temp_centi_c) / 100.0,
        pressure_pa,
        altitude_m: held.altitude_m,
        uv_adc: raw.uv_adc,
        uv_index,
        air_quality_ppm: ppm_from_adc(raw.mq_adc),
        accel_mps2,
        pitch_deg: held.attitude.pitch_deg,
        roll_deg: held.attitude.roll_deg,
        yaw_deg: held.attitude.yaw_deg,
        lat_deg: held.lat_deg,
        lon_deg: held.lon_deg,
        bus_voltage_v: bus.voltage_v,
        bus_current_ma: bus.current_ma,
    }
}

/// Static OBC settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ObcConfig {
    pub sample_period_s: f64,
    pub calibration_window_s: f64,
    /// Altimeter reference. `None` uses the pad pressure measured during calibration.
    pub reference_pressure_pa: Option<f64>,
    pub thresholds: PhaseThresholds,
    pub history_len: usize,
}

impl Default for ObcConfig {
    fn default() -> Self {
        Self {
            sample_period_s: 1.0,
            calibration_window_s: 2.0,
            reference_pressure_pa: None,
            thresholds: PhaseThresholds::default(),
            history_len: 8,
        }
    }
}

/// A frame ready for the radio, with the record it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFrame {
    pub seq: u16,
    pub record: TelemetryRecord,
    pub bytes: [u8; FRAME_LEN],
}

/// Onboard computer state, advanced once per sample period.
#[derive(Debug, Clone)]
pub struct Obc {
    config: ObcConfig,
    phase: FlightPhase,
    seq: u16,
    frames_emitted: u64,
    calibrator: Calibrator,
    calibration: Option<CalibrationState>,
    altitude_history: VecDeque<f64>,
    running_max_m: f64,
    held: HeldValues,
}

impl Obc {
    pub fn new(config: ObcConfig) -> Self {
        let calibrator = Calibrator::new(config.calibration_window_s, config.sample_period_s);
        Self {
            altitude_history: VecDeque::with_capacity(config.history_len),
            config,
            phase: FlightPhase::Boot,
            seq: 0,
            frames_emitted: 0,
            calibrator,
            calibration: None,
            running_max_m: f64::NEG_INFINITY,
            held: HeldValues::default(),
        }
    }

    pub fn phase(&self) -> FlightPhase {
        self.phase
    }

    pub fn calibration(&self) -> Option<&CalibrationState> {
        self.calibration.as_ref()
    }

    pub fn frames_emitted(&self) -> u64 {
        self.frames_emitted
    }

    /// Sequence number the next frame will carry.
    pub fn next_seq(&self) -> u16 {
        self.seq
    }

    pub fn config(&self) -> &ObcConfig {
        &self.config
    }

    /// Altimeter reference in use, once known.
    pub fn reference_pressure_pa(&self) -> Option<f64> {
        self.config
            .reference_pressure_pa
            .or_else(|| self.calibration.as_ref().map(|c| c.pad_pressure_pa))
    }

    /// One mission-clock tick.
    ///
    /// BOOT moves to CALIBRATING on the first tick; calibration frames are
    /// consumed until the window is covered, after which every tick yields
    /// exactly one frame.
    pub fn step(&mut self, t_s: f64, raw: &RawSensorFrame, bus: BusReading) -> Option<EmittedFrame> {
        match self.phase {
            FlightPhase::Boot | FlightPhase::Calibrating => {
                self.phase = FlightPhase::Calibrating;
                if let Some(cal) = self.calibrator.push(raw.clone(), t_s) {
                    self.calibration = Some(cal);
                    self.phase = FlightPhase::Ready;
                }
                None
            }
            _ => Some(self.sample(t_s, raw, bus)),
        }
    }

    fn sample(&mut self, t_s: f64, raw: &RawSensorFrame, bus: BusReading) -> EmittedFrame {
        let cal = self.calibration.clone().expect("calibrated before READY");
        let reference = self.reference_pressure_pa().unwrap_or(cal.pad_pressure_pa);
        let t_ms = (t_s * 1000.0).round().clamp(0.0, f64::from(u32::MAX)) as u32;

        let mut record = build_record(raw, &cal, t_ms, self.phase, bus, reference, &mut self.held);

        if self.altitude_history.len() == self.config.history_len.max(3) {
            self.altitude_history.pop_front();
        }
        self.altitude_history.push_back(record.altitude_m);
        if self.phase == FlightPhase::Ascent {
            self.running_max_m = self.running_max_m.max(record.altitude_m);
        }
        let history: Vec<f64> = self.altitude_history.iter().copied().collect();
        let next = detect_phase(
            &history,
            self.phase,
            self.running_max_m,
            self.config.sample_period_s,
            &self.config.thresholds,
        );
        if next == FlightPhase::Ascent && self.phase == FlightPhase::Ready {
            self.running_max_m = record.altitude_m;
        }
        self.phase = next;
        record.phase = next;

        let record = record.clamped_to_wire();
        let bytes = encode_frame(&record, self.seq).expect("clamped record fits the wire format");
        let record = crate::telemetry::decode_frame(&bytes)
            .expect("freshly encoded frame decodes")
            .record;
        let emitted = EmittedFrame {
            seq: self.seq,
            record,
            bytes,
        };
        self.seq = self.seq.wrapping_add(1);
        self.frames_emitted += 1;
        emitted
    }
}
