//! Runtime engine for an interactive installation of large floating spheres.
//!
//! An overhead camera (or a simulator) reports sphere detections; the engine
//! turns them into tracked identities, fires zone, proximity and pitch
//! events, renders or forwards the resulting music, and drives the light
//! boards inside the spheres.

pub mod audio;
pub mod events;
pub mod geometry;
pub mod ingestion;
pub mod lights;
pub mod runtime;
pub mod tracking;

pub use events::{EngineEvent, EventConfig, EventEngineState, EventKind};
pub use geometry::{CalibrationProfile, PixelPoint, WorldPoint, ZoneGrid, ZoneIndex};
pub use tracking::{Detection, DetectionFrame, TrackId, TrackedSphere, TrackerState};
