//! Sphere identity across detection frames.
//!
//! Association is greedy nearest-neighbour in the floor plane with a distance
//! gate: every (track, detection) pair within the gate is sorted by distance,
//! then by track id, then by detection index, and taken first-come. With at
//! most a couple of dozen slow spheres this is cheap and fully deterministic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EngineEvent;
use crate::geometry::{
    self, CalibrationProfile, GeometryError, PixelPoint, WorldPoint, ZoneGrid, ZoneIndex,
};

pub type TrackId = u64;

pub const DEFAULT_DIAMETER_M: f64 = 1.5;
pub const DEFAULT_GATE_RADIUS_M: f64 = 0.5;
pub const DEFAULT_TTL_MS: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("frame at {frame_ms} ms is older than track {track_id} last seen at {last_seen_ms} ms")]
    TimeRegression {
        frame_ms: u64,
        track_id: TrackId,
        last_seen_ms: u64,
    },
    #[error("detection {index}: {source}")]
    Detection {
        index: usize,
        #[source]
        source: GeometryError,
    },
}

/// One raw detection in pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "cls")]
    pub det_class: u32,
    pub cx: f64,
    pub cy: f64,
    pub d_px: f64,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub t_ms: u64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedSphere {
    pub track_id: TrackId,
    pub det_class: u32,
    pub world: WorldPoint,
    /// Height of the sphere center above the floor, meters.
    pub height: f64,
    pub physical_diameter: f64,
    pub d_px: f64,
    pub last_seen_ms: u64,
    pub zone: ZoneIndex,
    /// Floor-plane velocity in m/s from the last two observations.
    pub velocity: (f64, f64),
}

impl TrackedSphere {
    /// A sphere resting at `world` with default height and zone; handy for
    /// tests and synthetic scenes.
    pub fn at(track_id: TrackId, world: WorldPoint, physical_diameter: f64) -> Self {
        Self {
            track_id,
            det_class: 0,
            world,
            height: physical_diameter / 2.0,
            physical_diameter,
            d_px: 1.0,
            last_seen_ms: 0,
            zone: geometry::zone_of(world, &ZoneGrid::default()),
            velocity: (0.0, 0.0),
        }
    }
}

/// Maps detector class ids onto physical sphere diameters.
#[derive(Debug, Clone, Default)]
pub struct ClassDiameters {
    pub by_class: BTreeMap<u32, f64>,
    pub default_diameter: f64,
    warned: BTreeSet<u32>,
}

impl ClassDiameters {
    pub fn new(by_class: BTreeMap<u32, f64>, default_diameter: f64) -> Self {
        Self {
            by_class,
            default_diameter,
            warned: BTreeSet::new(),
        }
    }

    pub fn lookup(&mut self, class: u32) -> f64 {
        match self.by_class.get(&class) {
            Some(d) => *d,
            None => {
                if self.warned.insert(class) {
                    log::warn!(
                        "unknown detection class {class}, assuming {} m diameter",
                        self.default_diameter
                    );
                }
                self.default_diameter
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub tracks: BTreeMap<TrackId, TrackedSphere>,
    pub next_id: TrackId,
    pub gate_radius: f64,
    pub ttl_ms: u64,
}

impl Default for TrackerState {
    fn default() -> Self {
        Self::new(DEFAULT_GATE_RADIUS_M, DEFAULT_TTL_MS)
    }
}

struct Observation {
    det_class: u32,
    world: WorldPoint,
    height: f64,
    physical_diameter: f64,
    d_px: f64,
}

impl TrackerState {
    pub fn new(gate_radius: f64, ttl_ms: u64) -> Self {
        Self {
            tracks: BTreeMap::new(),
            next_id: 0,
            gate_radius,
            ttl_ms,
        }
    }

    pub fn live(&self) -> impl Iterator<Item = &TrackedSphere> {
        self.tracks.values()
    }

    pub fn get(&self, id: TrackId) -> Option<&TrackedSphere> {
        self.tracks.get(&id)
    }

    /// Match a frame of detections against the live tracks.
    ///
    /// Matched tracks take the new position, height and zone; unmatched
    /// detections become new tracks, numbered in detection order, each with a
    /// `TrackBorn` event.
    pub fn associate(
        &mut self,
        frame: &DetectionFrame,
        cal: &CalibrationProfile,
        grid: &ZoneGrid,
        classes: &mut ClassDiameters,
    ) -> Result<Vec<EngineEvent>, TrackingError> {
        if let Some(t) = self.tracks.values().find(|t| t.last_seen_ms > frame.t_ms) {
            return Err(TrackingError::TimeRegression {
                frame_ms: frame.t_ms,
                track_id: t.track_id,
                last_seen_ms: t.last_seen_ms,
            });
        }

        let mut observations = Vec::with_capacity(frame.detections.len());
        for (index, det) in frame.detections.iter().enumerate() {
            let physical_diameter = classes.lookup(det.det_class);
            let px = geometry::undistort(PixelPoint::new(det.cx, det.cy), cal);
            let height = geometry::estimate_height(det.d_px, physical_diameter, cal)
                .map_err(|source| TrackingError::Detection { index, source })?;
            observations.push(Observation {
                det_class: det.det_class,
                world: geometry::pixel_to_world(px, cal),
                height,
                physical_diameter,
                d_px: det.d_px,
            });
        }

        let mut candidates: Vec<(f64, TrackId, usize)> = Vec::new();
        for track in self.tracks.values() {
            for (index, obs) in observations.iter().enumerate() {
                let dist = track.world.distance(&obs.world);
                if dist <= self.gate_radius {
                    candidates.push((dist, track.track_id, index));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut matched_tracks = BTreeSet::new();
        let mut assignment: Vec<Option<TrackId>> = vec![None; observations.len()];
        for (_, track_id, index) in candidates {
            if assignment[index].is_none() && !matched_tracks.contains(&track_id) {
                assignment[index] = Some(track_id);
                matched_tracks.insert(track_id);
            }
        }

        let mut events = Vec::new();
        for (obs, assigned) in observations.into_iter().zip(assignment) {
            let zone = geometry::zone_of(obs.world, grid);
            match assigned {
                Some(id) => {
                    let track = self.tracks.get_mut(&id).expect("matched track is live");
                    let dt = (frame.t_ms - track.last_seen_ms) as f64 / 1000.0;
                    if dt > 0.0 {
                        track.velocity = (
                            (obs.world.x - track.world.x) / dt,
                            (obs.world.y - track.world.y) / dt,
                        );
                    }
                    track.det_class = obs.det_class;
                    track.world = obs.world;
                    track.height = obs.height;
                    track.physical_diameter = obs.physical_diameter;
                    track.d_px = obs.d_px;
                    track.last_seen_ms = frame.t_ms;
                    track.zone = zone;
                }
                None => {
                    let track_id = self.next_id;
                    self.next_id += 1;
                    self.tracks.insert(
                        track_id,
                        TrackedSphere {
                            track_id,
                            det_class: obs.det_class,
                            world: obs.world,
                            height: obs.height,
                            physical_diameter: obs.physical_diameter,
                            d_px: obs.d_px,
                            last_seen_ms: frame.t_ms,
                            zone,
                            velocity: (0.0, 0.0),
                        },
                    );
                    events.push(EngineEvent::TrackBorn { t_ms: frame.t_ms, track_id });
                }
            }
        }
        Ok(events)
    }

    /// Drop tracks unseen for longer than the TTL, in ascending id order.
    pub fn prune(&mut self, now_ms: u64) -> Vec<EngineEvent> {
        let ttl = self.ttl_ms;
        let stale: Vec<TrackId> = self
            .tracks
            .values()
            .filter(|t| now_ms.saturating_sub(t.last_seen_ms) > ttl)
            .map(|t| t.track_id)
            .collect();
        stale
            .into_iter()
            .map(|track_id| {
                self.tracks.remove(&track_id);
                EngineEvent::TrackLost { t_ms: now_ms, track_id }
            })
            .collect()
    }

    /// The two spheres that drive the music. The first element drives pitch.
    ///
    /// A pinned pair wins while both of its tracks are live; otherwise the two
    /// largest spheres are used, lower id first on ties.
    pub fn select_active_pair(&self, pinned: Option<(TrackId, TrackId)>) -> Option<(TrackId, TrackId)> {
        if let Some((a, b)) = pinned {
            if a != b && self.tracks.contains_key(&a) && self.tracks.contains_key(&b) {
                return Some((a, b));
            }
        }
        let mut ranked: Vec<&TrackedSphere> = self.tracks.values().collect();
        ranked.sort_by(|a, b| {
            b.physical_diameter
                .total_cmp(&a.physical_diameter)
                .then(a.track_id.cmp(&b.track_id))
        });
        match ranked.as_slice() {
            [first, second, ..] => Some((first.track_id, second.track_id)),
            _ => None,
        }
    }
}
