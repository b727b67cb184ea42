//! Sensor forward models (truth → registers/ADC counts) and the onboard
//! inverse conversions (registers/ADC counts → engineering units).
//!
//! Channels modelled: BMP180 temperature and pressure, MPU6050 accelerometer
//! and gyroscope, HMC5883L magnetometer, GUVA-S12SD UV photodiode, MQ-135 gas
//! sensor and the Neo-6M GPS (as NMEA GGA text).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::atmos::{
    wrap_degrees, EnvironmentState, BAROMETRIC_EXPONENT, CELSIUS_TO_KELVIN, LAPSE_RATE_K_PER_M,
    MAX_AIR_QUALITY_PPM, STANDARD_GRAVITY, STANDARD_TEMPERATURE_C,
};
use crate::nmea;
use crate::scalar::Real;

/// Full-scale count of the 12-bit analog channels.
pub const ADC_MAX: u16 = 4095;
/// ADC reference voltage.
pub const ADC_VREF_V: f64 = 3.3;
/// GUVA-S12SD output per UV index unit.
pub const UV_VOLTS_PER_INDEX: f64 = 0.1;

/// MQ-135 CO₂ curve `ppm = a·(Rs/R0)^b`.
pub const MQ135_CURVE_A: f64 = 116.602;
pub const MQ135_CURVE_B: f64 = -2.769;
/// Sensor resistance in clean reference air, kΩ.
pub const MQ135_R0_KOHM: f64 = 76.63;
/// Load resistor, kΩ.
pub const MQ135_RL_KOHM: f64 = 10.0;
/// Heater/divider supply.
pub const MQ135_SUPPLY_V: f64 = 5.0;

/// MPU6050 at ±2 g.
pub const ACCEL_LSB_PER_G: f64 = 16384.0;
/// MPU6050 at ±250 °/s.
pub const GYRO_LSB_PER_DPS: f64 = 131.0;
/// HMC5883L at gain 1.
pub const MAG_LSB_PER_GAUSS: f64 = 1090.0;

/// Horizontal component of the local geomagnetic field, gauss.
pub const GEOMAG_HORIZONTAL_GAUSS: f64 = 0.38;
/// Downward component of the local geomagnetic field, gauss.
pub const GEOMAG_DOWN_GAUSS: f64 = 0.18;

/// Smallest specific force accepted for tilt estimation.
pub const MIN_ACCEL_FOR_ATTITUDE_MPS2: f64 = 0.1;

const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("gas concentration must be positive, got {0} ppm")]
    NonPositiveConcentration(f64),
    #[error("pressure must be positive (p = {pressure_pa} Pa, p0 = {reference_pa} Pa)")]
    NonPositivePressure { pressure_pa: f64, reference_pa: f64 },
    #[error("accelerometer magnitude {0} m/s² too small to resolve attitude")]
    DegenerateAccel(f64),
    #[error("calibration needs at least 2 frames, got {0}")]
    InsufficientSamples(usize),
}

/// One acquisition cycle as read off the sensor buses.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawSensorFrame {
    pub bmp_temp_centi_c: i32,
    pub bmp_pressure_pa: u32,
    pub uv_adc: u16,
    pub mq_adc: u16,
    pub accel_raw: [i16; 3],
    pub gyro_raw: [i16; 3],
    pub mag_raw: [i16; 3],
    pub gga_sentence: String,
}

/// Accelerometer and gyroscope zero offsets measured on the pad.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationState {
    pub accel_offset_raw: [i32; 3],
    pub gyro_bias_raw: [i32; 3],
    /// Mean barometer reading over the calibration window.
    pub pad_pressure_pa: f64,
    pub calibrated_at_s: f64,
}

/// Error model of the sensor suite.
///
/// `temp_sigma_c` and `pressure_sigma_pa` describe absolute accuracy: each
/// mission draws one fixed offset with that standard deviation. The
/// `*_jitter_*` fields are the per-sample noise on top of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorNoiseConfig {
    pub temp_sigma_c: f64,
    pub temp_jitter_c: f64,
    pub pressure_sigma_pa: f64,
    pub pressure_jitter_pa: f64,
    pub uv_sigma_counts: f64,
    pub mq_sigma_counts: f64,
    pub accel_sigma_mg: f64,
    pub gyro_sigma_dps: f64,
    pub mag_sigma_counts: f64,
    pub gps_sigma_m: f64,
    /// Fixed accelerometer zero-g offset, LSB.
    pub accel_bias_lsb: [i32; 3],
    /// Fixed gyroscope zero-rate offset, LSB.
    pub gyro_bias_lsb: [i32; 3],
}

impl Default for SensorNoiseConfig {
    fn default() -> Self {
        Self {
            temp_sigma_c: 0.33,
            temp_jitter_c: 0.02,
            pressure_sigma_pa: 12.0,
            pressure_jitter_pa: 3.0,
            uv_sigma_counts: 2.0,
            mq_sigma_counts: 2.0,
            accel_sigma_mg: 4.0,
            gyro_sigma_dps: 0.05,
            mag_sigma_counts: 2.0,
            gps_sigma_m: 2.0,
            accel_bias_lsb: [2736, -1695, 1112],
            gyro_bias_lsb: [0, 0, 0],
        }
    }
}

impl SensorNoiseConfig {
    /// No noise, no bias: forward models become exact transfer functions.
    pub fn noiseless() -> Self {
        Self {
            temp_sigma_c: 0.0,
            temp_jitter_c: 0.0,
            pressure_sigma_pa: 0.0,
            pressure_jitter_pa: 0.0,
            uv_sigma_counts: 0.0,
            mq_sigma_counts: 0.0,
            accel_sigma_mg: 0.0,
            gyro_sigma_dps: 0.0,
            mag_sigma_counts: 0.0,
            gps_sigma_m: 0.0,
            accel_bias_lsb: [0; 3],
            gyro_bias_lsb: [0; 3],
        }
    }

    /// Datasheet GPS accuracy instead of the field-observed one.
    pub fn with_datasheet_gps(mut self) -> Self {
        self.gps_sigma_m = 10.0;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let sigmas = [
            ("temp_sigma_c", self.temp_sigma_c),
            ("temp_jitter_c", self.temp_jitter_c),
            ("pressure_sigma_pa", self.pressure_sigma_pa),
            ("pressure_jitter_pa", self.pressure_jitter_pa),
            ("uv_sigma_counts", self.uv_sigma_counts),
            ("mq_sigma_counts", self.mq_sigma_counts),
            ("accel_sigma_mg", self.accel_sigma_mg),
            ("gyro_sigma_dps", self.gyro_sigma_dps),
            ("mag_sigma_counts", self.mag_sigma_counts),
            ("gps_sigma_m", self.gps_sigma_m),
        ];
        for (name, value) in sigmas {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(format!("{name} must be a finite value >= 0"));
            }
        }
        Ok(())
    }
}

fn adc_counts_from_volts<T: Real>(volts: T) -> T {
    volts / T::lit(ADC_VREF_V) * T::lit(f64::from(ADC_MAX))
}

fn volts_from_adc_counts<T: Real>(counts: T) -> T {
    counts / T::lit(f64::from(ADC_MAX)) * T::lit(ADC_VREF_V)
}

fn quantize_adc(counts: f64) -> u16 {
    if counts.is_nan() {
        return 0;
    }
    counts.round().clamp(0.0, f64::from(ADC_MAX)) as u16
}

fn quantize_i16(value: f64) -> i16 {
    if value.is_nan() {
        return 0;
    }
    value.round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
}

/// Unquantized UV channel reading in ADC counts.
pub fn uv_counts<T: Real>(uv_index_true: T) -> T {
    adc_counts_from_volts(uv_index_true.max(T::zero()) * T::lit(UV_VOLTS_PER_INDEX))
}

/// UV index → 12-bit ADC count; clamps above the 3.3 V rail.
pub fn uv_forward<T: Real>(uv_index_true: T) -> u16 {
    quantize_adc(uv_counts(uv_index_true).as_f64())
}

/// ADC count → (sensor voltage, integer UV index).
///
/// The index is `floor(10·V)`, evaluated in integer arithmetic so that
/// boundary counts never fall on the wrong side of an integer.
pub fn uv_from_adc<T: Real>(adc: u16) -> (T, u8) {
    let adc = adc.min(ADC_MAX);
    let volts = volts_from_adc_counts(T::lit(f64::from(adc)));
    // floor(10 · adc · 3.3 / 4095) == floor(33 · adc / 4095)
    let index = (u32::from(adc) * 33) / u32::from(ADC_MAX);
    (volts, index as u8)
}

/// Unquantized MQ-135 divider output in ADC counts.
pub fn mq135_counts<T: Real>(ppm: T) -> Result<T, SensorError> {
    if !(ppm > T::zero()) {
        return Err(SensorError::NonPositiveConcentration(ppm.as_f64()));
    }
    let rs = T::lit(MQ135_R0_KOHM) * (ppm / T::lit(MQ135_CURVE_A)).powf(T::lit(1.0 / MQ135_CURVE_B));
    let rl = T::lit(MQ135_RL_KOHM);
    let vout = T::lit(MQ135_SUPPLY_V) * rl / (rl + rs);
    Ok(adc_counts_from_volts(vout))
}

/// Gas concentration → 12-bit ADC count.
pub fn mq135_forward<T: Real>(ppm: T) -> Result<u16, SensorError> {
    Ok(quantize_adc(mq135_counts(ppm)?.as_f64()))
}

/// Continuous inverse of [`mq135_counts`], clamped to `[0, 2000]` ppm.
pub fn ppm_from_counts<T: Real>(counts: T) -> T {
    if !(counts > T::zero()) {
        return T::zero();
    }
    let vout = volts_from_adc_counts(counts);
    let supply = T::lit(MQ135_SUPPLY_V);
    if !(vout < supply) {
        return T::lit(MAX_AIR_QUALITY_PPM);
    }
    let rs = T::lit(MQ135_RL_KOHM) * (supply - vout) / vout;
    let ppm = T::lit(MQ135_CURVE_A) * (rs / T::lit(MQ135_R0_KOHM)).powf(T::lit(MQ135_CURVE_B));
    ppm.max(T::zero()).min(T::lit(MAX_AIR_QUALITY_PPM))
}

/// ADC count → gas concentration in ppm. A zero count means no signal and maps to 0.
pub fn ppm_from_adc<T: Real>(adc: u16) -> T {
    ppm_from_counts(T::lit(f64::from(adc.min(ADC_MAX))))
}

/// Barometric altitude of `p_pa` above the level where the pressure is `p0_pa`.
///
/// `h = (T0/L)·(1 − (p/p0)^(1/5.255))` with the standard `T0 = 288.15 K`;
/// `T0/L` is the 44330.77 m scale height of the usual BMP180 formula.
pub fn altitude_from_pressure<T: Real>(p_pa: T, p0_pa: T) -> Result<T, SensorError> {
    if !(p_pa > T::zero() && p0_pa > T::zero()) {
        return Err(SensorError::NonPositivePressure {
            pressure_pa: p_pa.as_f64(),
            reference_pa: p0_pa.as_f64(),
        });
    }
    let scale_height = T::lit((STANDARD_TEMPERATURE_C + CELSIUS_TO_KELVIN) / LAPSE_RATE_K_PER_M);
    Ok(scale_height * (T::one() - (p_pa / p0_pa).powf(T::one() / T::lit(BAROMETRIC_EXPONENT))))
}

/// Raw accelerometer count with zero offset removed, in m/s².
pub fn accel_from_raw<T: Real>(raw: i16, offset: i32) -> T {
    let counts = i64::from(raw) - i64::from(offset);
    T::lit(counts as f64) / T::lit(ACCEL_LSB_PER_G) * T::lit(STANDARD_GRAVITY)
}

/// Euler angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Attitude<T: Real> {
    pub pitch_deg: T,
    pub roll_deg: T,
    pub yaw_deg: T,
}

/// Tilt from the gravity vector, heading from the tilt-compensated magnetometer.
pub fn attitude_from_imu<T: Real>(accel_mps2: [T; 3], mag: [T; 3]) -> Result<Attitude<T>, SensorError> {
    let [ax, ay, az] = accel_mps2;
    let norm = (ax * ax + ay * ay + az * az).sqrt();
    if !(norm >= T::lit(MIN_ACCEL_FOR_ATTITUDE_MPS2)) {
        return Err(SensorError::DegenerateAccel(norm.as_f64()));
    }
    let pitch = (-ax).atan2((ay * ay + az * az).sqrt());
    let roll = ay.atan2(az);

    // De-rotate the field by −roll about x, then −pitch about y.
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let [mx, my, mz] = mag;
    let my_level = cr * my - sr * mz;
    let mz_roll = sr * my + cr * mz;
    let mx_level = cp * mx + sp * mz_roll;
    let yaw = my_level.atan2(mx_level);

    Ok(Attitude {
        pitch_deg: pitch.to_degrees(),
        roll_deg: wrap_degrees(roll.to_degrees()),
        yaw_deg: wrap_degrees(yaw.to_degrees()),
    })
}

/// Geomagnetic field seen in the body frame at the given attitude, gauss.
///
/// Exact forward counterpart of [`attitude_from_imu`]'s tilt compensation.
pub fn magnetic_field_body<T: Real>(pitch_deg: T, roll_deg: T, yaw_deg: T) -> [T; 3] {
    let (sy, cy) = yaw_deg.to_radians().sin_cos();
    let h = T::lit(GEOMAG_HORIZONTAL_GAUSS);
    // body z points up on the pad, so the downward field is negative z
    let level = [h * cy, h * sy, -T::lit(GEOMAG_DOWN_GAUSS)];
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    let (sr, cr) = roll_deg.to_radians().sin_cos();
    // rotate by +pitch about y, then +roll about x
    let w = [cp * level[0] - sp * level[2], level[1], sp * level[0] + cp * level[2]];
    [w[0], cr * w[1] + sr * w[2], -sr * w[1] + cr * w[2]]
}

pub use crate::nmea::{parse_gga, GgaFix, NmeaError};

/// GGA sentence for the true position and MSL altitude in `env`.
pub fn emit_gga(env: &EnvironmentState<f64>, utc_s: f64) -> String {
    nmea::emit_gga(env.lat_deg, env.lon_deg, env.altitude_msl_m, utc_s)
}

/// Averages stationary pad frames into zero offsets.
///
/// The accelerometer offset is the mean reading minus the ideal one-g `(0, 0, 16384)`.
pub fn calibrate(raw_frames: &[RawSensorFrame], calibrated_at_s: f64) -> Result<CalibrationState, SensorError> {
    if raw_frames.len() < 2 {
        return Err(SensorError::InsufficientSamples(raw_frames.len()));
    }
    let n = raw_frames.len() as f64;
    let mean_axis = |pick: &dyn Fn(&RawSensorFrame) -> i16| -> f64 {
        raw_frames.iter().map(|f| f64::from(pick(f))).sum::<f64>() / n
    };
    let mut accel_offset_raw = [0i32; 3];
    let mut gyro_bias_raw = [0i32; 3];
    for axis in 0..3 {
        accel_offset_raw[axis] = mean_axis(&|f| f.accel_raw[axis]).round() as i32;
        gyro_bias_raw[axis] = mean_axis(&|f| f.gyro_raw[axis]).round() as i32;
    }
    accel_offset_raw[2] -= ACCEL_LSB_PER_G as i32;
    let pad_pressure_pa = raw_frames.iter().map(|f| f64::from(f.bmp_pressure_pa)).sum::<f64>() / n;
    Ok(CalibrationState {
        accel_offset_raw,
        gyro_bias_raw,
        pad_pressure_pa,
        calibrated_at_s,
    })
}

/// Gathers pad frames until the calibration window is covered.
///
/// Each frame stands for one sample period, so a 2.0 s window at 1 Hz
/// completes on the second frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrator {
    window_s: f64,
    sample_period_s: f64,
    frames: Vec<RawSensorFrame>,
}

impl Calibrator {
    pub fn new(window_s: f64, sample_period_s: f64) -> Self {
        Self {
            window_s,
            sample_period_s,
            frames: Vec::new(),
        }
    }

    pub fn covered_s(&self) -> f64 {
        self.frames.len() as f64 * self.sample_period_s
    }

    /// Adds a frame; returns the calibration once the window is covered.
    pub fn push(&mut self, frame: RawSensorFrame, t_s: f64) -> Option<CalibrationState> {
        self.frames.push(frame);
        if self.frames.len() >= 2 && self.covered_s() + 1e-9 >= self.window_s {
            calibrate(&self.frames, t_s).ok()
        } else {
            None
        }
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    // always draw so that zeroing one sigma does not shift later draws
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

/// The onboard sensor set with its per-mission fixed errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSuite {
    noise: SensorNoiseConfig,
    temp_offset_c: f64,
    pressure_offset_pa: f64,
}

impl SensorSuite {
    /// Draws the per-mission accuracy offsets from `rng`.
    pub fn new<R: Rng + ?Sized>(noise: SensorNoiseConfig, rng: &mut R) -> Self {
        let temp_offset_c = gauss(rng, noise.temp_sigma_c);
        let pressure_offset_pa = gauss(rng, noise.pressure_sigma_pa);
        Self {
            noise,
            temp_offset_c,
            pressure_offset_pa,
        }
    }

    pub fn noise(&self) -> &SensorNoiseConfig {
        &self.noise
    }

    pub fn temperature_offset_c(&self) -> f64 {
        self.temp_offset_c
    }

    pub fn pressure_offset_pa(&self) -> f64 {
        self.pressure_offset_pa
    }

    /// Reads every sensor once. `utc_s` is the GPS time of day in seconds.
    pub fn sample<R: Rng + ?Sized>(&self, env: &EnvironmentState<f64>, utc_s: f64, rng: &mut R) -> RawSensorFrame {
        let n = &self.noise;

        let temp = env.temperature_c + self.temp_offset_c + gauss(rng, n.temp_jitter_c);
        let bmp_temp_centi_c = (temp * 100.0).round() as i32;
        let pressure = env.pressure_pa + self.pressure_offset_pa + gauss(rng, n.pressure_jitter_pa);
        let bmp_pressure_pa = pressure.round().clamp(0.0, f64::from(u32::MAX)) as u32;

        let uv_adc = quantize_adc(uv_counts(env.uv_index_true) + gauss(rng, n.uv_sigma_counts));
        let mq_counts = mq135_counts(env.air_quality_ppm.min(MAX_AIR_QUALITY_PPM)).unwrap_or(0.0);
        let mq_adc = quantize_adc(mq_counts + gauss(rng, n.mq_sigma_counts));

        let accel_sigma_counts = n.accel_sigma_mg * ACCEL_LSB_PER_G / 1000.0;
        let mut accel_raw = [0i16; 3];
        for ((raw, a), bias) in accel_raw.iter_mut().zip(env.accel_body_mps2).zip(n.accel_bias_lsb) {
            let counts = a / STANDARD_GRAVITY * ACCEL_LSB_PER_G;
            *raw = quantize_i16(counts + f64::from(bias) + gauss(rng, accel_sigma_counts));
        }
        let mut gyro_raw = [0i16; 3];
        for ((raw, w), bias) in gyro_raw.iter_mut().zip(env.gyro_rate_dps).zip(n.gyro_bias_lsb) {
            let counts = w * GYRO_LSB_PER_DPS;
            *raw = quantize_i16(counts + f64::from(bias) + gauss(rng, n.gyro_sigma_dps * GYRO_LSB_PER_DPS));
        }
        let field = magnetic_field_body(env.pitch_deg, env.roll_deg, env.yaw_deg);
        let mut mag_raw = [0i16; 3];
        for axis in 0..3 {
            mag_raw[axis] = quantize_i16(field[axis] * MAG_LSB_PER_GAUSS + gauss(rng, n.mag_sigma_counts));
        }

        let north_m = gauss(rng, n.gps_sigma_m);
        let east_m = gauss(rng, n.gps_sigma_m);
        let up_m = gauss(rng, n.gps_sigma_m);
        let lat = (env.lat_deg + (north_m / EARTH_RADIUS_M).to_degrees()).clamp(-90.0, 90.0);
        let cos_lat = env.lat_deg.to_radians().cos().max(1e-6);
        let lon = wrap_degrees(env.lon_deg + (east_m / (EARTH_RADIUS_M * cos_lat)).to_degrees());
        let gga_sentence = nmea::emit_gga(lat, lon, env.altitude_msl_m + up_m, utc_s);

        RawSensorFrame {
            bmp_temp_centi_c,
            bmp_pressure_pa,
            uv_adc,
            mq_adc,
            accel_raw,
            gyro_raw,
            mag_raw,
            gga_sentence,
        }
    }
}
