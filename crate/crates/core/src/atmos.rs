//! Ground-truth atmosphere and flight kinematics.
//!
//! The pressure column follows the standard-atmosphere troposphere law with a
//! 6.5 K/km lapse rate and the 5.255 exponent, which is the same law the
//! onboard altimeter inverts in [`crate::sensors::altitude_from_pressure`].
//! Kinematics are piecewise linear: pad, constant-rate ascent to apogee,
//! constant-rate parachute descent, landed.

use thiserror::Error;

use crate::scalar::Real;

/// Temperature lapse rate, K/m.
pub const LAPSE_RATE_K_PER_M: f64 = 0.0065;
/// Exponent of the troposphere pressure law.
pub const BAROMETRIC_EXPONENT: f64 = 5.255;
/// Standard sea-level temperature, °C.
pub const STANDARD_TEMPERATURE_C: f64 = 15.0;
/// Standard sea-level pressure, Pa.
pub const STANDARD_PRESSURE_PA: f64 = 101_325.0;
/// Kelvin offset of the Celsius scale.
pub const CELSIUS_TO_KELVIN: f64 = 273.15;
/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Highest admissible ambient gas concentration, ppm.
pub const MAX_AIR_QUALITY_PPM: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtmosError {
    #[error("altitude {altitude_m} m is at or above the troposphere singularity {limit_m} m")]
    AltitudeOutOfDomain { altitude_m: f64, limit_m: f64 },
    #[error("reference pressure must be positive, got {0} Pa")]
    NonPositivePressure(f64),
    #[error("invalid flight profile: {0}")]
    InvalidProfile(String),
}

/// Flight profile and ambient conditions for one mission.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightProfile<T: Real> {
    pub ground_altitude_m: T,
    pub apogee_agl_m: T,
    pub ascent_rate_mps: T,
    pub descent_rate_mps: T,
    pub launch_time_s: T,
    pub ground_temperature_c: T,
    pub sea_level_pressure_pa: T,
    pub base_uv_index: T,
    pub cloud_factor: T,
    pub base_air_quality_ppm: T,
    pub ground_lat_deg: T,
    pub ground_lon_deg: T,
    pub drift_rate_deg_per_s: T,
    /// Direction of descent drift, degrees clockwise from north.
    pub drift_bearing_deg: T,
    /// Heading held on the pad and during ascent.
    pub heading_deg: T,
    pub oscillation_amplitude_deg: T,
    pub oscillation_period_s: T,
    /// Yaw spin rate under the parachute.
    pub descent_spin_dps: T,
}

impl<T: Real> Default for FlightProfile<T> {
    fn default() -> Self {
        Self {
            ground_altitude_m: T::zero(),
            apogee_agl_m: T::lit(60.0),
            ascent_rate_mps: T::lit(10.0),
            descent_rate_mps: T::lit(4.0),
            launch_time_s: T::lit(10.0),
            ground_temperature_c: T::lit(32.66),
            sea_level_pressure_pa: T::lit(STANDARD_PRESSURE_PA),
            base_uv_index: T::lit(2.7),
            cloud_factor: T::zero(),
            base_air_quality_ppm: T::lit(83.0),
            ground_lat_deg: T::lit(20.278863),
            ground_lon_deg: T::lit(72.878662),
            drift_rate_deg_per_s: T::lit(2.0e-6),
            drift_bearing_deg: T::lit(45.0),
            heading_deg: T::zero(),
            oscillation_amplitude_deg: T::lit(15.0),
            oscillation_period_s: T::lit(4.0),
            descent_spin_dps: T::lit(6.0),
        }
    }
}

impl<T: Real> FlightProfile<T> {
    pub fn validate(&self) -> Result<(), AtmosError> {
        let bad = |msg: &str| Err(AtmosError::InvalidProfile(msg.to_owned()));
        if !(self.apogee_agl_m > T::zero()) {
            return bad("apogee_agl_m must be > 0");
        }
        if !(self.ascent_rate_mps > T::zero()) {
            return bad("ascent_rate_mps must be > 0");
        }
        if !(self.descent_rate_mps > T::zero()) {
            return bad("descent_rate_mps must be > 0");
        }
        if !(self.cloud_factor >= T::zero() && self.cloud_factor <= T::one()) {
            return bad("cloud_factor must lie in [0, 1]");
        }
        if !(self.base_air_quality_ppm >= T::zero()
            && self.base_air_quality_ppm <= T::lit(MAX_AIR_QUALITY_PPM))
        {
            return bad("base_air_quality_ppm must lie in [0, 2000]");
        }
        if !(self.base_uv_index >= T::zero()) {
            return bad("base_uv_index must be >= 0");
        }
        if !(self.sea_level_pressure_pa > T::zero()) {
            return bad("sea_level_pressure_pa must be > 0");
        }
        if !(self.launch_time_s >= T::zero()) {
            return bad("launch_time_s must be >= 0");
        }
        if !(self.oscillation_amplitude_deg >= T::zero()
            && self.oscillation_amplitude_deg <= T::lit(20.0))
        {
            return bad("oscillation_amplitude_deg must lie in [0, 20]");
        }
        if !(self.oscillation_period_s > T::zero()) {
            return bad("oscillation_period_s must be > 0");
        }
        if !(self.ground_lat_deg.abs() <= T::lit(90.0) && self.ground_lon_deg.abs() <= T::lit(180.0)) {
            return bad("ground position out of range");
        }
        Ok(())
    }

    /// Time at which the vehicle reaches apogee.
    pub fn apogee_time_s(&self) -> T {
        self.launch_time_s + self.apogee_agl_m / self.ascent_rate_mps
    }

    /// Time at which the vehicle touches down.
    pub fn landing_time_s(&self) -> T {
        self.apogee_time_s() + self.apogee_agl_m / self.descent_rate_mps
    }

    /// Piecewise-linear altitude above the pad.
    pub fn altitude_agl_at(&self, t_s: T) -> T {
        let apogee_t = self.apogee_time_s();
        let landing_t = self.landing_time_s();
        if t_s <= self.launch_time_s {
            T::zero()
        } else if t_s <= apogee_t {
            (t_s - self.launch_time_s) * self.ascent_rate_mps
        } else if t_s < landing_t {
            (self.apogee_agl_m - (t_s - apogee_t) * self.descent_rate_mps).max(T::zero())
        } else {
            T::zero()
        }
    }
}

/// True physical state of the vehicle and its surroundings at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentState<T: Real> {
    pub t_s: T,
    pub altitude_agl_m: T,
    /// Altitude above mean sea level (pad elevation plus AGL).
    pub altitude_msl_m: T,
    pub temperature_c: T,
    pub pressure_pa: T,
    pub uv_index_true: T,
    pub air_quality_ppm: T,
    pub lat_deg: T,
    pub lon_deg: T,
    pub pitch_deg: T,
    pub roll_deg: T,
    pub yaw_deg: T,
    /// Specific force in the body frame (gravity reaction included).
    pub accel_body_mps2: [T; 3],
    pub gyro_rate_dps: [T; 3],
}

/// Troposphere pressure at `h_m` above the reference level.
///
/// `p = p0 · (1 − L·h/T0)^5.255` with `T0` the reference temperature in kelvin.
pub fn pressure_at_altitude<T: Real>(h_m: T, p0_pa: T, t0_c: T) -> Result<T, AtmosError> {
    if !(p0_pa > T::zero()) {
        return Err(AtmosError::NonPositivePressure(p0_pa.as_f64()));
    }
    let t0_k = t0_c + T::lit(CELSIUS_TO_KELVIN);
    let lapse = T::lit(LAPSE_RATE_K_PER_M);
    let limit = t0_k / lapse;
    if !(h_m < limit) {
        return Err(AtmosError::AltitudeOutOfDomain {
            altitude_m: h_m.as_f64(),
            limit_m: limit.as_f64(),
        });
    }
    let base = T::one() - lapse * h_m / t0_k;
    Ok(p0_pa * base.powf(T::lit(BAROMETRIC_EXPONENT)))
}

/// Linear lapse: `ground_temp_c − 0.0065·h_m`.
pub fn temperature_at_altitude<T: Real>(h_m: T, ground_temp_c: T) -> T {
    ground_temp_c - T::lit(LAPSE_RATE_K_PER_M) * h_m
}

/// UV index grows 1% per 100 m and is attenuated by up to 50% under full cloud.
pub fn uv_index_at_altitude<T: Real>(h_m: T, base_uv: T, cloud_factor: T) -> T {
    let gain = T::one() + T::lit(1.0e-4) * h_m.max(T::zero());
    let cloud = cloud_factor.max(T::zero()).min(T::one());
    let attenuation = T::one() - T::lit(0.5) * cloud;
    (base_uv * gain * attenuation).max(T::zero())
}

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_degrees<T: Real>(deg: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut wrapped = (deg + half) % full;
    if wrapped < T::zero() {
        wrapped = wrapped + full;
    }
    let out = wrapped - half;
    if out >= half {
        out - full
    } else {
        out
    }
}

/// Gravity reaction seen by a body-fixed accelerometer at the given attitude.
///
/// Matches the inverse used by [`crate::sensors::attitude_from_imu`]:
/// `(−g·sinθ, g·cosθ·sinφ, g·cosθ·cosφ)`.
pub fn gravity_reaction_body<T: Real>(pitch_deg: T, roll_deg: T) -> [T; 3] {
    let g = T::lit(STANDARD_GRAVITY);
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    let (sr, cr) = roll_deg.to_radians().sin_cos();
    [-g * sp, g * cp * sr, g * cp * cr]
}

/// Ground-truth state at `t_s` seconds after boot.
pub fn environment_at<T: Real>(t_s: T, profile: &FlightProfile<T>) -> EnvironmentState<T> {
    let t_s = t_s.max(T::zero());
    let agl = profile.altitude_agl_at(t_s);
    let msl = profile.ground_altitude_m + agl;

    // The pressure column uses the standard reference temperature so that the
    // pad-referenced altimeter inverts it exactly; `ground_temperature_c` only
    // drives the thermometer truth.
    let pressure = pressure_at_altitude(msl, profile.sea_level_pressure_pa, T::lit(STANDARD_TEMPERATURE_C))
        .unwrap_or(T::zero());

    let apogee_t = profile.apogee_time_s();
    let landing_t = profile.landing_time_s();
    let descending = t_s > apogee_t && t_s < landing_t;
    let descent_elapsed = if t_s <= apogee_t {
        T::zero()
    } else {
        t_s.min(landing_t) - apogee_t
    };

    let (pitch, roll, yaw, rates) = if descending {
        let omega = T::lit(2.0) * T::PI() / profile.oscillation_period_s;
        let amp = profile.oscillation_amplitude_deg;
        let phase = omega * descent_elapsed;
        let (s, c) = phase.sin_cos();
        let pitch = amp * s;
        let roll = amp * c;
        let yaw = wrap_degrees(profile.heading_deg + profile.descent_spin_dps * descent_elapsed);
        // x: roll rate, y: pitch rate, z: yaw rate
        let rates = [-amp * omega * s, amp * omega * c, profile.descent_spin_dps];
        (pitch, roll, yaw, rates)
    } else {
        let yaw = wrap_degrees(profile.heading_deg + profile.descent_spin_dps * descent_elapsed);
        (T::zero(), T::zero(), yaw, [T::zero(); 3])
    };

    let bearing = profile.drift_bearing_deg.to_radians();
    let drift = profile.drift_rate_deg_per_s * descent_elapsed;
    let lat = (profile.ground_lat_deg + drift * bearing.cos()).max(T::lit(-90.0)).min(T::lit(90.0));
    let lon = wrap_degrees(profile.ground_lon_deg + drift * bearing.sin());

    EnvironmentState {
        t_s,
        altitude_agl_m: agl,
        altitude_msl_m: msl,
        temperature_c: temperature_at_altitude(agl, profile.ground_temperature_c),
        pressure_pa: pressure,
        uv_index_true: uv_index_at_altitude(agl, profile.base_uv_index, profile.cloud_factor),
        air_quality_ppm: profile.base_air_quality_ppm,
        lat_deg: lat,
        lon_deg: lon,
        pitch_deg: pitch,
        roll_deg: roll,
        yaw_deg: yaw,
        accel_body_mps2: gravity_reaction_body(pitch, roll),
        gyro_rate_dps: rates,
    }
}
