//! Installation config: one JSON file, every section optional.
//!
//! ```json
//! {
//!   "calibration": { "image_width": 1920, "image_height": 1080, "focal_length": 1000,
//!                    "k1": 0, "camera_height": 9, "floor_width": 18, "floor_length": 42 },
//!   "grid":    { "cols": 3, "rows": 3 },
//!   "tracker": { "gate_radius": 0.5, "ttl_ms": 1000, "class_diameters": {"0": 1.5},
//!                "default_diameter": 1.5, "pinned_pair": null },
//!   "events":  { "zone_margin": 0.25, "zone_cooldown_ms": 1000, "proxi_trigger_m": 0.5,
//!                "proxi_rearm_m": 0.8, "pitch_ref_height": 1.5, "pitch_octave_span": 3,
//!                "ratio_min": 0.5, "ratio_max": 2, "cloudgrid_all_spheres": false,
//!                "proxi_center_distance": false },
//!   "audio":   { "engine_rate": 48000, "block_frames": 256, "bg_gain": 0.5,
//!                "manifest_path": null, "osc_target": null, "render_wav": null,
//!                "raw_pcm_out": null },
//!   "lights":  { "enabled": false, "broadcast_addr": "255.255.255.255", "port": 47801,
//!                "refresh_ms": 1000 },
//!   "ingest":  { "mode": "live", "bind": "0.0.0.0", "port": 47800 },
//!   "console": { "enabled": false, "bind": "127.0.0.1", "port": 47802 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::bank::DEFAULT_ENGINE_RATE;
use crate::audio::mixer::{DEFAULT_BG_GAIN, DEFAULT_BLOCK_FRAMES};
use crate::events::EventConfig;
use crate::geometry::{CalibrationProfile, GeometryError, ZoneGrid};
use crate::ingestion::{DEFAULT_CONSOLE_PORT, DEFAULT_DETECTOR_PORT};
use crate::lights::DEFAULT_LIGHT_PORT;
use crate::tracking::{TrackId, DEFAULT_DIAMETER_M, DEFAULT_GATE_RADIUS_M, DEFAULT_TTL_MS};

pub const CONFIG_ENV: &str = "SPHERE_STAGE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no config file given and {CONFIG_ENV} is not set")]
    NoPath,
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: `{field}`: {message}")]
    Syntax { path: PathBuf, field: String, message: String },
    #[error("`{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid { field: field.into(), reason: reason.into() }
    }

    /// Dotted path of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Syntax { field, .. } | Self::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub cols: u32,
    pub rows: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cols: 3, rows: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub gate_radius: f64,
    pub ttl_ms: u64,
    /// Physical diameter in meters per detector class.
    pub class_diameters: BTreeMap<u32, f64>,
    pub default_diameter: f64,
    /// Track ids that should drive the music whenever both are live.
    pub pinned_pair: Option<(TrackId, TrackId)>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gate_radius: DEFAULT_GATE_RADIUS_M,
            ttl_ms: DEFAULT_TTL_MS,
            class_diameters: BTreeMap::new(),
            default_diameter: DEFAULT_DIAMETER_M,
            pinned_pair: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub engine_rate: u32,
    pub block_frames: usize,
    pub bg_gain: f32,
    /// Sample manifest; the built-in placeholder bank is used when absent.
    pub manifest_path: Option<PathBuf>,
    /// `host:port` of an external OSC patch.
    pub osc_target: Option<String>,
    pub render_wav: Option<PathBuf>,
    /// Real-time raw PCM stream (f32 little-endian, stereo interleaved);
    /// `-` is stdout. Pipe it into a player to hear a live session.
    pub raw_pcm_out: Option<PathBuf>,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            engine_rate: DEFAULT_ENGINE_RATE,
            block_frames: DEFAULT_BLOCK_FRAMES,
            bg_gain: DEFAULT_BG_GAIN,
            manifest_path: None,
            osc_target: None,
            render_wav: None,
            raw_pcm_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightsConfig {
    pub enabled: bool,
    pub broadcast_addr: IpAddr,
    pub port: u16,
    /// Unchanged light states are re-sent this often, since datagrams can be lost.
    pub refresh_ms: u64,
}

impl Default for LightsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            broadcast_addr: IpAddr::V4(Ipv4Addr::BROADCAST),
            port: DEFAULT_LIGHT_PORT,
            refresh_ms: 1000,
        }
    }
}

impl LightsConfig {
    pub fn endpoint(&self) -> SocketAddr {
        SocketAddr::new(self.broadcast_addr, self.port)
    }
}

fn default_detector_port() -> u16 {
    DEFAULT_DETECTOR_PORT
}

fn any_addr() -> IpAddr {
    IpAddr::V4(Ipv4Addr::UNSPECIFIED)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum IngestConfig {
    /// Recorded `.sjl` file. Speed 0 runs as fast as possible.
    Replay {
        path: PathBuf,
        #[serde(default)]
        speed: f64,
    },
    /// Detector clients over TCP.
    Live {
        #[serde(default = "any_addr")]
        bind: IpAddr,
        #[serde(default = "default_detector_port")]
        port: u16,
    },
    /// Frames from the operator console's WebSocket.
    Ui,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self::Live { bind: any_addr(), port: DEFAULT_DETECTOR_PORT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsoleConfig {
    pub enabled: bool,
    pub bind: IpAddr,
    pub port: u16,
}

impl Default for ConsoleConfig {
    fn default() -> Self {
        Self { enabled: false, bind: IpAddr::V4(Ipv4Addr::LOCALHOST), port: DEFAULT_CONSOLE_PORT }
    }
}

impl ConsoleConfig {
    pub fn endpoint(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstallationConfig {
    pub calibration: CalibrationProfile,
    pub grid: GridConfig,
    pub tracker: TrackerConfig,
    pub events: EventConfig,
    pub audio: AudioConfig,
    pub lights: LightsConfig,
    pub ingest: IngestConfig,
    pub console: ConsoleConfig,
}

impl InstallationConfig {
    pub fn zone_grid(&self) -> ZoneGrid {
        ZoneGrid::for_floor(self.grid.cols, self.grid.rows, &self.calibration)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Syntax {
            path: origin.to_owned(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if let Some(base) = origin.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && p.as_os_str() != "-" {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.audio.manifest_path {
            fix(p);
        }
        if let Some(p) = &mut self.audio.render_wav {
            fix(p);
        }
        if let Some(p) = &mut self.audio.raw_pcm_out {
            fix(p);
        }
        if let IngestConfig::Replay { path, .. } = &mut self.ingest {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.calibration.validate().map_err(|e| match e {
            GeometryError::InvalidCalibration { field, reason } => {
                ConfigError::invalid(format!("calibration.{field}"), reason)
            }
            other => ConfigError::invalid("calibration", other.to_string()),
        })?;
        if self.grid.cols == 0 {
            return Err(ConfigError::invalid("grid.cols", "must be >= 1"));
        }
        if self.grid.rows == 0 {
            return Err(ConfigError::invalid("grid.rows", "must be >= 1"));
        }
        let t = &self.tracker;
        if !(t.gate_radius.is_finite() && t.gate_radius > 0.0) {
            return Err(ConfigError::invalid("tracker.gate_radius", "must be > 0"));
        }
        if !(t.default_diameter.is_finite() && t.default_diameter > 0.0) {
            return Err(ConfigError::invalid("tracker.default_diameter", "must be > 0"));
        }
        for (class, d) in &t.class_diameters {
            if !(d.is_finite() && *d > 0.0) {
                return Err(ConfigError::invalid(format!("tracker.class_diameters.{class}"), "must be > 0"));
            }
        }
        if let Some((a, b)) = t.pinned_pair {
            if a == b {
                return Err(ConfigError::invalid("tracker.pinned_pair", "needs two distinct track ids"));
            }
        }
        self.events
            .validate()
            .map_err(|(field, reason)| ConfigError::invalid(format!("events.{field}"), reason))?;
        let a = &self.audio;
        if a.engine_rate == 0 {
            return Err(ConfigError::invalid("audio.engine_rate", "must be > 0"));
        }
        if a.block_frames == 0 {
            return Err(ConfigError::invalid("audio.block_frames", "must be > 0"));
        }
        if !(a.bg_gain.is_finite() && a.bg_gain >= 0.0) {
            return Err(ConfigError::invalid("audio.bg_gain", "must be >= 0"));
        }
        if self.lights.refresh_ms == 0 {
            return Err(ConfigError::invalid("lights.refresh_ms", "must be > 0"));
        }
        if let IngestConfig::Replay { speed, .. } = self.ingest {
            if !(speed.is_finite() && speed >= 0.0) {
                return Err(ConfigError::invalid("ingest.speed", "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Read a config file, falling back to `$SPHERE_STAGE_CONFIG` when `path` is
/// `None`.
pub fn load_config(path: Option<&Path>) -> Result<InstallationConfig, ConfigError> {
    let path = match path {
        Some(p) => p.to_owned(),
        None => std::env::var_os(CONFIG_ENV).map(PathBuf::from).ok_or(ConfigError::NoPath)?,
    };
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
    InstallationConfig::from_json(&text, &path)
}
