//! Config, the engine loop, and sessions that wire sources to sinks.

pub mod config;
pub mod engine;
pub mod scenario;
pub mod session;

pub use config::{load_config, ConfigError, IngestConfig, InstallationConfig, CONFIG_ENV};
pub use engine::{Engine, EngineError, FrameOutput, LightPlanner};
pub use session::{channel_frames, run_frames, run_session, Session, SessionError, SessionOptions, SessionReport};
