//! Mission configuration file.
//!
//! ```text
//! # comment
//! [mission]
//! duration_s = 120
//! seed = 42
//!
//! [profile]
//! apogee_agl_m = 60
//!
//! [power]
//! hc12.typical_current_ma = 19
//! ```
//!
//! Every key is optional and defaults to the module default. Unknown keys,
//! repeated keys and unknown sections are errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::atmos::FlightProfile;
use crate::obc::{ObcConfig, PhaseThresholds};
use crate::power::{default_components, Battery, PowerComponent, DEFAULT_BUS_JITTER_V, DEFAULT_BUS_VOLTAGE_V};
use crate::radio::LinkConfig;
use crate::sensors::SensorNoiseConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type {
        key: String,
        expected: &'static str,
        value: String,
        line: usize,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSettings {
    pub duration_s: f64,
    pub seed: u64,
    pub sample_period_s: f64,
    pub calibration_window_s: f64,
    pub link_distance_m: f64,
    /// When set, the slant range ramps linearly from `link_distance_m` at
    /// boot to this value at the end of the mission.
    pub link_distance_end_m: Option<f64>,
    /// Altimeter reference; the pad pressure measured during calibration when absent.
    pub reference_pressure_pa: Option<f64>,
    /// UTC time of day at boot, seconds.
    pub utc_start_s: f64,
    pub bus_voltage_v: f64,
    pub bus_jitter_v: f64,
    pub thresholds: PhaseThresholds,
    pub history_len: usize,
}

impl Default for MissionSettings {
    fn default() -> Self {
        let obc = ObcConfig::default();
        Self {
            duration_s: 120.0,
            seed: 42,
            sample_period_s: obc.sample_period_s,
            calibration_window_s: obc.calibration_window_s,
            link_distance_m: 800.0,
            link_distance_end_m: None,
            reference_pressure_pa: obc.reference_pressure_pa,
            utc_start_s: 36_900.0,
            bus_voltage_v: DEFAULT_BUS_VOLTAGE_V,
            bus_jitter_v: DEFAULT_BUS_JITTER_V,
            thresholds: obc.thresholds,
            history_len: obc.history_len,
        }
    }
}

impl MissionSettings {
    pub fn obc_config(&self) -> ObcConfig {
        ObcConfig {
            sample_period_s: self.sample_period_s,
            calibration_window_s: self.calibration_window_s,
            reference_pressure_pa: self.reference_pressure_pa,
            thresholds: self.thresholds.clone(),
            history_len: self.history_len,
        }
    }

    /// Slant range to the ground station at time `t_s`.
    pub fn link_distance_at(&self, t_s: f64) -> f64 {
        match self.link_distance_end_m {
            Some(end) if self.duration_s > 0.0 => {
                let f = (t_s / self.duration_s).clamp(0.0, 1.0);
                self.link_distance_m + (end - self.link_distance_m) * f
            }
            _ => self.link_distance_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSettings {
    pub components: Vec<PowerComponent<f64>>,
    pub battery: Battery<f64>,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            components: default_components(),
            battery: Battery::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MissionConfig {
    pub mission: MissionSettings,
    pub profile: FlightProfile<f64>,
    pub noise: SensorNoiseConfig,
    pub link: LinkConfig<f64>,
    pub power: PowerSettings,
}

/// Lower-case alphanumerics of a component name, used as its key prefix.
pub fn component_key(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

struct Entry<'a> {
    section: &'a str,
    key: &'a str,
    value: &'a str,
    line: usize,
}

impl Entry<'_> {
    fn type_error(&self, expected: &'static str) -> ConfigError {
        ConfigError::Type {
            key: self.key.to_owned(),
            expected,
            value: self.value.to_owned(),
            line: self.line,
        }
    }

    fn unknown(&self) -> ConfigError {
        ConfigError::UnknownKey {
            section: self.section.to_owned(),
            key: self.key.to_owned(),
            line: self.line,
        }
    }

    fn float(&self) -> Result<f64, ConfigError> {
        match self.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.type_error("a finite number")),
        }
    }

    fn opt_float(&self) -> Result<Option<f64>, ConfigError> {
        if self.value.eq_ignore_ascii_case("none") {
            Ok(None)
        } else {
            self.float().map(Some).map_err(|_| self.type_error("a finite number or `none`"))
        }
    }

    fn int<T: std::str::FromStr>(&self) -> Result<T, ConfigError> {
        self.value.parse().map_err(|_| self.type_error("a non-negative integer"))
    }

    fn triple(&self) -> Result<[i32; 3], ConfigError> {
        let parts: Vec<&str> = self.value.split(',').map(str::trim).collect();
        let err = || self.type_error("three comma-separated integers");
        if parts.len() != 3 {
            return Err(err());
        }
        let mut out = [0; 3];
        for (slot, part) in out.iter_mut().zip(parts) {
            *slot = part.parse().map_err(|_| err())?;
        }
        Ok(out)
    }
}

fn apply_mission(m: &mut MissionSettings, e: &Entry) -> Result<(), ConfigError> {
    match e.key {
        "duration_s" => m.duration_s = e.float()?,
        "seed" => m.seed = e.int()?,
        "sample_period_s" => m.sample_period_s = e.float()?,
        "calibration_window_s" => m.calibration_window_s = e.float()?,
        "link_distance_m" => m.link_distance_m = e.float()?,
        "link_distance_end_m" => m.link_distance_end_m = e.opt_float()?,
        "reference_pressure_pa" => m.reference_pressure_pa = e.opt_float()?,
        "utc_start_s" => m.utc_start_s = e.float()?,
        "bus_voltage_v" => m.bus_voltage_v = e.float()?,
        "bus_jitter_v" => m.bus_jitter_v = e.float()?,
        "liftoff_m" => m.thresholds.liftoff_m = e.float()?,
        "apogee_drop_m" => m.thresholds.apogee_drop_m = e.float()?,
        "landed_altitude_m" => m.thresholds.landed_altitude_m = e.float()?,
        "landed_rate_mps" => m.thresholds.landed_rate_mps = e.float()?,
        "landed_dwell_samples" => m.thresholds.landed_dwell_samples = e.int()?,
        "history_len" => m.history_len = e.int()?,
        _ => return Err(e.unknown()),
    }
    Ok(())
}

fn apply_profile(p: &mut FlightProfile<f64>, e: &Entry) -> Result<(), ConfigError> {
    let slot = match e.key {
        "ground_altitude_m" => &mut p.ground_altitude_m,
        "apogee_agl_m" => &mut p.apogee_agl_m,
        "ascent_rate_mps" => &mut p.ascent_rate_mps,
        "descent_rate_mps" => &mut p.descent_rate_mps,
        "launch_time_s" => &mut p.launch_time_s,
        "ground_temperature_c" => &mut p.ground_temperature_c,
        "sea_level_pressure_pa" => &mut p.sea_level_pressure_pa,
        "base_uv_index" => &mut p.base_uv_index,
        "cloud_factor" => &mut p.cloud_factor,
        "base_air_quality_ppm" => &mut p.base_air_quality_ppm,
        "ground_lat_deg" => &mut p.ground_lat_deg,
        "ground_lon_deg" => &mut p.ground_lon_deg,
        "drift_rate_deg_per_s" => &mut p.drift_rate_deg_per_s,
        "drift_bearing_deg" => &mut p.drift_bearing_deg,
        "heading_deg" => &mut p.heading_deg,
        "oscillation_amplitude_deg" => &mut p.oscillation_amplitude_deg,
        "oscillation_period_s" => &mut p.oscillation_period_s,
        "descent_spin_dps" => &mut p.descent_spin_dps,
        _ => return Err(e.unknown()),
    };
    *slot = e.float()?;
    Ok(())
}

fn apply_noise(n: &mut SensorNoiseConfig, e: &Entry) -> Result<(), ConfigError> {
    match e.key {
        "accel_bias_lsb" => n.accel_bias_lsb = e.triple()?,
        "gyro_bias_lsb" => n.gyro_bias_lsb = e.triple()?,
        "gps_preset" => match e.value {
            "field" => n.gps_sigma_m = SensorNoiseConfig::default().gps_sigma_m,
            "datasheet" => *n = n.clone().with_datasheet_gps(),
            _ => return Err(e.type_error("`field` or `datasheet`")),
        },
        key => {
            let slot = match key {
                "temp_sigma_c" => &mut n.temp_sigma_c,
                "temp_jitter_c" => &mut n.temp_jitter_c,
                "pressure_sigma_pa" => &mut n.pressure_sigma_pa,
                "pressure_jitter_pa" => &mut n.pressure_jitter_pa,
                "uv_sigma_counts" => &mut n.uv_sigma_counts,
                "mq_sigma_counts" => &mut n.mq_sigma_counts,
                "accel_sigma_mg" => &mut n.accel_sigma_mg,
                "gyro_sigma_dps" => &mut n.gyro_sigma_dps,
                "mag_sigma_counts" => &mut n.mag_sigma_counts,
                "gps_sigma_m" => &mut n.gps_sigma_m,
                _ => return Err(e.unknown()),
            };
            *slot = e.float()?;
        }
    }
    Ok(())
}

fn apply_link(l: &mut LinkConfig<f64>, e: &Entry) -> Result<(), ConfigError> {
    if e.key == "baud" {
        l.baud = e.int()?;
        return Ok(());
    }
    if e.key == "tx_power_mw" {
        l.tx_power_dbm = crate::radio::mw_to_dbm(e.float()?);
        return Ok(());
    }
    let slot = match e.key {
        "frequency_hz" => &mut l.frequency_hz,
        "tx_power_dbm" => &mut l.tx_power_dbm,
        "tx_gain_dbi" => &mut l.tx_gain_dbi,
        "rx_gain_dbi" => &mut l.rx_gain_dbi,
        "path_loss_exponent" => &mut l.path_loss_exponent,
        "reference_loss_db" => &mut l.reference_loss_db,
        "sensitivity_dbm" => &mut l.sensitivity_dbm,
        "logistic_k" => &mut l.logistic_k,
        "logistic_margin_db" => &mut l.logistic_margin_db,
        "corrupt_fraction" => &mut l.corrupt_fraction,
        _ => return Err(e.unknown()),
    };
    *slot = e.float()?;
    Ok(())
}

fn apply_power(p: &mut PowerSettings, e: &Entry) -> Result<(), ConfigError> {
    match e.key {
        "nominal_voltage_v" => p.battery.nominal_voltage_v = e.float()?,
        "capacity_mah" => p.battery.capacity_mah = e.float()?,
        "usable_fraction" => p.battery.usable_fraction = e.float()?,
        key => {
            let (prefix, field) = key.split_once('.').ok_or_else(|| e.unknown())?;
            let comp = p
                .components
                .iter_mut()
                .find(|c| component_key(&c.name) == prefix)
                .ok_or_else(|| e.unknown())?;
            match field {
                "voltage_v" => comp.voltage_v = e.float()?,
                "current_ma" => comp.current_ma = e.float()?,
                "typical_current_ma" => comp.typical_current_ma = e.float()?,
                "duty" => comp.duty = e.float()?,
                "transmit_current_ma" => comp.transmit_current_ma = e.opt_float()?,
                _ => return Err(e.unknown()),
            }
        }
    }
    Ok(())
}

const SECTIONS: [&str; 5] = ["mission", "profile", "noise", "link", "power"];

impl MissionConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = MissionConfig::default();
        let mut section: Option<&str> = None;
        let mut seen: HashSet<(String, String)> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                    line,
                    reason: "unterminated section header".into(),
                })?;
                let name = name.trim();
                let known = SECTIONS.iter().find(|s| **s == name).ok_or_else(|| ConfigError::Parse {
                    line,
                    reason: format!("unknown section [{name}]"),
                })?;
                section = Some(known);
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                reason: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    reason: "missing key".into(),
                });
            }
            let section = section.ok_or_else(|| ConfigError::Parse {
                line,
                reason: "key outside of any section".into(),
            })?;
            if !seen.insert((section.to_owned(), key.to_owned())) {
                return Err(ConfigError::Parse {
                    line,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            let entry = Entry {
                section,
                key,
                value,
                line,
            };
            match section {
                "mission" => apply_mission(&mut cfg.mission, &entry)?,
                "profile" => apply_profile(&mut cfg.profile, &entry)?,
                "noise" => apply_noise(&mut cfg.noise, &entry)?,
                "link" => apply_link(&mut cfg.link, &entry)?,
                "power" => apply_power(&mut cfg.power, &entry)?,
                _ => unreachable!("section names are checked above"),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Checks cross-field constraints the parser cannot see.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        let m = &self.mission;
        if !(m.duration_s > 0.0) {
            return invalid("duration_s must be > 0".into());
        }
        if !(m.sample_period_s > 0.0) {
            return invalid("sample_period_s must be > 0".into());
        }
        if !(m.calibration_window_s >= 0.0) {
            return invalid("calibration_window_s must be >= 0".into());
        }
        if !(m.link_distance_m >= 1.0) || m.link_distance_end_m.is_some_and(|d| !(d >= 1.0)) {
            return invalid("link distances must be >= 1 m".into());
        }
        if m.reference_pressure_pa.is_some_and(|p| !(p > 0.0)) {
            return invalid("reference_pressure_pa must be > 0".into());
        }
        if !(m.bus_voltage_v > 0.0) || !(m.bus_jitter_v >= 0.0) {
            return invalid("bus voltage must be > 0 and jitter >= 0".into());
        }
        if m.thresholds.landed_dwell_samples == 0 {
            return invalid("landed_dwell_samples must be >= 1".into());
        }
        if m.history_len < 3 || m.history_len < m.thresholds.landed_dwell_samples {
            return invalid("history_len must be >= 3 and >= landed_dwell_samples".into());
        }
        if !(m.duration_s / m.sample_period_s <= f64::from(u32::MAX) / 1000.0) {
            return invalid("mission too long for the millisecond clock".into());
        }
        self.profile.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.noise.validate().map_err(ConfigError::Invalid)?;
        self.link.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for c in &self.power.components {
            c.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.power.battery.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
