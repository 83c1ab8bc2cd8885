//! Scenario parameters.
//!
//! [`ScenarioConfig::defaults`] yields the reference deployment for a
//! (scenario, technology) pair: 500 m square, 10 vehicles per eNB, 30 dBm,
//! NF 5 dB, 1400 B packets, 10 MB RLC buffer, 1 ms reordering timer, with
//! 2 GHz / 20 MHz omnidirectional LTE or 28 GHz / 1 GHz mmWave with 8x8 eNB
//! and 4x4 vehicle arrays.
//!
//! Configuration files are JSON objects holding any subset of the fields;
//! missing fields take the defaults of the file's `scenario` and `tech`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Urban micro, street canyon.
    #[serde(rename = "UMi")]
    UMi,
    /// Rural macro, used for the highway.
    #[serde(rename = "RMa")]
    RMa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tech {
    #[serde(rename = "LTE")]
    Lte,
    #[serde(rename = "mmWave")]
    MmWave,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::UMi => "UMi",
            Scenario::RMa => "RMa",
        })
    }
}

impl fmt::Display for Tech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tech::Lte => "LTE",
            Tech::MmWave => "mmWave",
        })
    }
}

/// Time correlation of the small-scale fading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Doppler-correlated process.
    #[default]
    Correlated,
    /// Independent draw every channel tick.
    Iid,
}

/// Uniform planar array size, elements per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArraySize(pub u32, pub u32);

impl ArraySize {
    pub const OMNI: ArraySize = ArraySize(1, 1);

    pub fn elements(self) -> u32 {
        self.0 * self.1
    }

    pub fn is_omni(self) -> bool {
        self.elements() == 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub tech: Tech,
    pub area_side_m: f64,
    pub lambda_enb_per_km2: f64,
    pub vehicles_per_enb: u32,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub enb_array: ArraySize,
    pub vehicle_array: ArraySize,
    pub packet_size_bytes: u32,
    pub app_rate_bps: f64,
    pub rlc_buffer_bytes: u64,
    pub rlc_reorder_timer_s: f64,
    pub n_runs: u32,
    pub run_duration_s: f64,
    pub warmup_s: f64,
    pub master_seed: u64,
    pub vehicle_speed_mps: f64,
    pub fading: FadingMode,
    /// Pins every link to line of sight. Test and calibration knob.
    pub force_los: bool,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario, tech: Tech) -> Self {
        let (carrier_hz, bandwidth_hz, enb_array, vehicle_array) = match tech {
            Tech::Lte => (2e9, 20e6, ArraySize::OMNI, ArraySize::OMNI),
            Tech::MmWave => (28e9, 1e9, ArraySize(8, 8), ArraySize(4, 4)),
        };
        let vehicle_speed_mps = match scenario {
            Scenario::UMi => 30.0 / 3.6,
            Scenario::RMa => 120.0 / 3.6,
        };
        ScenarioConfig {
            scenario,
            tech,
            area_side_m: 500.0,
            lambda_enb_per_km2: 40.0,
            vehicles_per_enb: 10,
            carrier_hz,
            bandwidth_hz,
            tx_power_dbm: 30.0,
            noise_figure_db: 5.0,
            enb_array,
            vehicle_array,
            packet_size_bytes: 1400,
            app_rate_bps: 11e6,
            rlc_buffer_bytes: 10_000_000,
            rlc_reorder_timer_s: 1e-3,
            n_runs: 100,
            run_duration_s: 10.0,
            warmup_s: 1.0,
            master_seed: 1,
            vehicle_speed_mps,
            fading: FadingMode::Correlated,
            force_los: false,
        }
    }

    /// Application rate implied by the packet size and an interarrival time.
    pub fn rate_for_interarrival(packet_size_bytes: u32, interarrival_s: f64) -> f64 {
        f64::from(packet_size_bytes) * 8.0 / interarrival_s
    }

    pub fn with_interarrival(mut self, interarrival_s: f64) -> Self {
        self.app_rate_bps = Self::rate_for_interarrival(self.packet_size_bytes, interarrival_s);
        self
    }

    /// Seconds between consecutive packets of one flow.
    pub fn interarrival_s(&self) -> f64 {
        f64::from(self.packet_size_bytes) * 8.0 / self.app_rate_bps
    }

    pub fn area_km2(&self) -> f64 {
        (self.area_side_m / 1000.0).powi(2)
    }

    /// Returns the config unchanged iff every invariant holds.
    pub fn validate(self) -> Result<Self, ConfigErrors> {
        let mut errs = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;

        if !positive(self.area_side_m) {
            errs.push(ConfigError::NonPositiveArea(self.area_side_m));
        }
        if !positive(self.lambda_enb_per_km2) {
            errs.push(ConfigError::NonPositiveDensity(self.lambda_enb_per_km2));
        }
        if !positive(self.carrier_hz) {
            errs.push(ConfigError::NonPositiveCarrier(self.carrier_hz));
        }
        if !positive(self.bandwidth_hz) {
            errs.push(ConfigError::NonPositiveBandwidth(self.bandwidth_hz));
        }
        if !self.tx_power_dbm.is_finite() {
            errs.push(ConfigError::NonFiniteTxPower(self.tx_power_dbm));
        }
        if !self.noise_figure_db.is_finite() || self.noise_figure_db < 0.0 {
            errs.push(ConfigError::InvalidNoiseFigure(self.noise_figure_db));
        }
        if self.packet_size_bytes == 0 {
            errs.push(ConfigError::ZeroPacketSize);
        }
        if !positive(self.app_rate_bps) {
            errs.push(ConfigError::NonPositiveAppRate(self.app_rate_bps));
        }
        if self.rlc_buffer_bytes < u64::from(self.packet_size_bytes) {
            errs.push(ConfigError::BufferBelowPacket {
                buffer: self.rlc_buffer_bytes,
                packet: self.packet_size_bytes,
            });
        }
        if !self.rlc_reorder_timer_s.is_finite() || self.rlc_reorder_timer_s < 0.0 {
            errs.push(ConfigError::NegativeReorderTimer(self.rlc_reorder_timer_s));
        }
        if self.n_runs == 0 {
            errs.push(ConfigError::ZeroRuns);
        }
        if !positive(self.run_duration_s) {
            errs.push(ConfigError::NonPositiveDuration(self.run_duration_s));
        }
        if !self.warmup_s.is_finite() || self.warmup_s < 0.0 || self.warmup_s > self.run_duration_s {
            errs.push(ConfigError::InvalidWarmup {
                warmup: self.warmup_s,
                duration: self.run_duration_s,
            });
        }
        if !self.vehicle_speed_mps.is_finite() || self.vehicle_speed_mps < 0.0 {
            errs.push(ConfigError::NegativeSpeed(self.vehicle_speed_mps));
        }
        match self.tech {
            Tech::Lte if !self.enb_array.is_omni() || !self.vehicle_array.is_omni() => {
                errs.push(ConfigError::LteWithArray);
            }
            Tech::MmWave if self.enb_array.is_omni() || self.vehicle_array.is_omni() => {
                errs.push(ConfigError::MmWaveWithoutArray);
            }
            _ => {}
        }
        if self.enb_array.elements() == 0 || self.vehicle_array.elements() == 0 {
            errs.push(ConfigError::EmptyArray);
        }

        if errs.is_empty() {
            Ok(self)
        } else {
            Err(ConfigErrors(errs))
        }
    }

    /// Parses a JSON document; absent fields take the defaults of the
    /// document's `scenario` and `tech` (UMi and mmWave if absent).
    pub fn from_json_str(text: &str) -> Result<Self, ConfigLoadError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_json_value(value)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, ConfigLoadError> {
        let serde_json::Value::Object(fields) = value else {
            return Err(ConfigLoadError::NotAnObject);
        };
        let scenario = match fields.get("scenario") {
            Some(v) => Scenario::deserialize(v)?,
            None => Scenario::UMi,
        };
        let tech = match fields.get("tech") {
            Some(v) => Tech::deserialize(v)?,
            None => Tech::MmWave,
        };
        let mut merged = serde_json::to_value(Self::defaults(scenario, tech))?;
        let target = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in fields {
            target.insert(k, v);
        }
        Ok(serde_json::from_value(merged)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("area side must be positive, got {0} m")]
    NonPositiveArea(f64),
    #[error("eNB density must be positive, got {0} /km^2")]
    NonPositiveDensity(f64),
    #[error("carrier frequency must be positive, got {0} Hz")]
    NonPositiveCarrier(f64),
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
    #[error("transmit power must be finite, got {0} dBm")]
    NonFiniteTxPower(f64),
    #[error("noise figure must be finite and non-negative, got {0} dB")]
    InvalidNoiseFigure(f64),
    #[error("packet size must be positive")]
    ZeroPacketSize,
    #[error("application rate must be positive, got {0} bit/s")]
    NonPositiveAppRate(f64),
    #[error("RLC buffer of {buffer} B cannot hold a {packet} B packet")]
    BufferBelowPacket { buffer: u64, packet: u32 },
    #[error("RLC reordering timer must be non-negative, got {0} s")]
    NegativeReorderTimer(f64),
    #[error("campaign needs at least one run")]
    ZeroRuns,
    #[error("run duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
    #[error("warmup {warmup} s must lie in [0, run duration {duration} s]")]
    InvalidWarmup { warmup: f64, duration: f64 },
    #[error("vehicle speed must be non-negative, got {0} m/s")]
    NegativeSpeed(f64),
    #[error("LTE uses omnidirectional antennas; array sizes must be 1x1")]
    LteWithArray,
    #[error("mmWave needs antenna arrays larger than 1x1 at both ends")]
    MmWaveWithoutArray,
    #[error("antenna arrays need at least one element")]
    EmptyArray,
}

/// Every invariant violated by a config.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum ConfigLoadError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config document must be a JSON object")]
    NotAnObject,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_mmwave_defaults_are_valid() {
        let c = ScenarioConfig::defaults(Scenario::UMi, Tech::MmWave);
        assert_eq!(c.bandwidth_hz, 1e9);
        assert_eq!(c.carrier_hz, 28e9);
        assert_eq!(c.enb_array.elements(), 64);
        assert_eq!(c.vehicle_array.elements(), 16);
        assert_eq!(c.n_runs, 100);
        assert_eq!(c.clone().validate(), Ok(c));
    }

    #[test]
    fn zero_density_is_rejected() {
        let mut c = ScenarioConfig::defaults(Scenario::UMi, Tech::Lte);
        c.lambda_enb_per_km2 = 0.0;
        let errs = c.validate().unwrap_err();
        assert_eq!(errs.0, vec![ConfigError::NonPositiveDensity(0.0)]);
    }

    #[test]
    fn every_violation_is_reported() {
        let mut c = ScenarioConfig::defaults(Scenario::UMi, Tech::Lte);
        c.area_side_m = -1.0;
        c.bandwidth_hz = 0.0;
        c.enb_array = ArraySize(8, 8);
        c.n_runs = 0;
        let errs = c.validate().unwrap_err().0;
        assert_eq!(errs.len(), 4);
        assert!(errs.contains(&ConfigError::LteWithArray));
        assert!(errs.contains(&ConfigError::ZeroRuns));
    }

    #[test]
    fn mmwave_requires_arrays() {
        let mut c = ScenarioConfig::defaults(Scenario::RMa, Tech::MmWave);
        c.vehicle_array = ArraySize::OMNI;
        assert_eq!(c.validate().unwrap_err().0, vec![ConfigError::MmWaveWithoutArray]);
    }

    #[test]
    fn minimum_interarrival_maps_to_224_mbps() {
        let c = ScenarioConfig::defaults(Scenario::UMi, Tech::MmWave).with_interarrival(50e-6);
        assert!((c.app_rate_bps - 224e6).abs() < 1e-3);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn warmup_equal_to_duration_is_allowed() {
        let mut c = ScenarioConfig::defaults(Scenario::UMi, Tech::Lte);
        c.warmup_s = c.run_duration_s;
        assert!(c.clone().validate().is_ok());
        c.warmup_s += 0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_file_takes_tech_defaults() {
        let c = ScenarioConfig::from_json_str(r#"{"tech": "LTE", "lambda_enb_per_km2": 20}"#).unwrap();
        assert_eq!(c.tech, Tech::Lte);
        assert_eq!(c.carrier_hz, 2e9);
        assert_eq!(c.lambda_enb_per_km2, 20.0);
        assert_eq!(c.scenario, Scenario::UMi);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(ScenarioConfig::from_json_str(r#"{"lambda": 20}"#).is_err());
        assert!(ScenarioConfig::from_json_str("[1, 2]").is_err());
    }
}
