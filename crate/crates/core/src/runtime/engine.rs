use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use super::config::InstallationConfig;
use crate::events::{EngineEvent, EventEngineState, EventError};
use crate::geometry::{CalibrationProfile, ZoneGrid};
use crate::lights::{color_for, sphere_id_for, LightCommand, LightPayload, PULSE_WINDOW_MS};
use crate::tracking::{ClassDiameters, DetectionFrame, TrackId, TrackerState, TrackingError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Events(#[from] EventError),
}

/// Everything one frame produced, in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub t_ms: u64,
    pub events: Vec<EngineEvent>,
    pub lights: Vec<LightCommand>,
}

/// Decides which spheres need a light datagram this frame: on any change of
/// colour or effect, and every `refresh_ms` otherwise. Sequence numbers run
/// per sphere id, exactly as the broadcaster stamps them.
#[derive(Debug, Clone)]
pub struct LightPlanner {
    refresh_ms: u64,
    zone_count: usize,
    sent: BTreeMap<TrackId, (LightPayload, u64)>,
    seqs: BTreeMap<u8, u16>,
    recent: VecDeque<EngineEvent>,
}

impl LightPlanner {
    pub fn new(refresh_ms: u64, zone_count: usize) -> Self {
        Self { refresh_ms, zone_count, sent: BTreeMap::new(), seqs: BTreeMap::new(), recent: VecDeque::new() }
    }

    pub fn plan(&mut self, tracker: &TrackerState, events: &[EngineEvent], t_ms: u64) -> Vec<LightCommand> {
        self.recent.extend(events.iter().filter(|e| matches!(e, EngineEvent::ProximityTrigger { .. })).cloned());
        while self.recent.front().is_some_and(|e| t_ms - e.t_ms() > PULSE_WINDOW_MS) {
            self.recent.pop_front();
        }
        self.sent.retain(|id, _| tracker.tracks.contains_key(id));

        let recent = self.recent.make_contiguous();
        let mut out = Vec::new();
        for sphere in tracker.live() {
            let payload = color_for(sphere, recent, t_ms, self.zone_count);
            let due = match self.sent.get(&sphere.track_id) {
                Some((last, at)) => *last != payload || t_ms - at >= self.refresh_ms,
                None => true,
            };
            if due {
                let sphere_id = sphere_id_for(sphere.track_id);
                let seq = self.seqs.entry(sphere_id).or_insert(0);
                out.push(payload.into_command(sphere_id, *seq));
                *seq = seq.wrapping_add(1);
                self.sent.insert(sphere.track_id, (payload, t_ms));
            }
        }
        out
    }
}

/// The per-frame pipeline: associate, prune, pick the active pair, fire
/// events, plan lights. Pure state machine; sinks live elsewhere.
#[derive(Debug)]
pub struct Engine {
    calibration: CalibrationProfile,
    grid: ZoneGrid,
    pinned_pair: Option<(TrackId, TrackId)>,
    classes: ClassDiameters,
    tracker: TrackerState,
    events: EventEngineState,
    lights: LightPlanner,
}

impl Engine {
    pub fn new(cfg: &InstallationConfig) -> Self {
        let grid = cfg.zone_grid();
        Self {
            calibration: cfg.calibration,
            grid,
            pinned_pair: cfg.tracker.pinned_pair,
            classes: ClassDiameters::new(cfg.tracker.class_diameters.clone(), cfg.tracker.default_diameter),
            tracker: TrackerState::new(cfg.tracker.gate_radius, cfg.tracker.ttl_ms),
            events: EventEngineState::new(cfg.events),
            lights: LightPlanner::new(cfg.lights.refresh_ms, grid.zone_count()),
        }
    }

    pub fn tracker(&self) -> &TrackerState {
        &self.tracker
    }

    pub fn grid(&self) -> &ZoneGrid {
        &self.grid
    }

    pub fn process(&mut self, frame: &DetectionFrame) -> Result<FrameOutput, EngineError> {
        let t_ms = frame.t_ms;
        let mut events = self
            .tracker
            .associate(frame, &self.calibration, &self.grid, &mut self.classes)?;
        events.extend(self.tracker.prune(t_ms));
        let pair = self.tracker.select_active_pair(self.pinned_pair);
        events.extend(self.events.step(&self.tracker, pair, &self.grid, t_ms)?);
        let lights = self.lights.plan(&self.tracker, &events, t_ms);
        Ok(FrameOutput { t_ms, events, lights })
    }
}
