//! The three interaction rules as a deterministic state machine.
//!
//! * zone entry: a sphere settling into a new cell of the zone grid fires that
//!   cell's sound, with a spatial margin and a per-zone cooldown;
//! * proximity: the active pair drifting closer than a trigger distance fires
//!   once, then must separate past a larger re-arm distance;
//! * pitch: the pitch sphere's height bends the background loop, one octave
//!   per `pitch_octave_span` meters around a reference height.
//!
//! Events serialize as one JSON object per line with `type` first, then
//! `t_ms`, then the variant fields in declaration order. That line format is
//! the golden event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, ZoneGrid, ZoneIndex};
use crate::tracking::{TrackId, TrackedSphere, TrackerState};

/// Minimum pitch-ratio change worth announcing.
pub const PITCH_CHANGE_GATE: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("step at {t_ms} ms is earlier than the previous step at {previous_ms} ms")]
    TimeRegression { t_ms: u64, previous_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EngineEvent {
    ZoneEntry {
        t_ms: u64,
        track_id: TrackId,
        zone: ZoneIndex,
    },
    ProximityTrigger {
        t_ms: u64,
        track_a: TrackId,
        track_b: TrackId,
        distance_m: f64,
    },
    PitchUpdate {
        t_ms: u64,
        ratio: f64,
    },
    TrackBorn {
        t_ms: u64,
        track_id: TrackId,
    },
    TrackLost {
        t_ms: u64,
        track_id: TrackId,
    },
}

impl EngineEvent {
    pub fn t_ms(&self) -> u64 {
        match self {
            Self::ZoneEntry { t_ms, .. }
            | Self::ProximityTrigger { t_ms, .. }
            | Self::PitchUpdate { t_ms, .. }
            | Self::TrackBorn { t_ms, .. }
            | Self::TrackLost { t_ms, .. } => *t_ms,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            Self::ZoneEntry { .. } => EventKind::ZoneEntry,
            Self::ProximityTrigger { .. } => EventKind::ProximityTrigger,
            Self::PitchUpdate { .. } => EventKind::PitchUpdate,
            Self::TrackBorn { .. } => EventKind::TrackBorn,
            Self::TrackLost { .. } => EventKind::TrackLost,
        }
    }

    /// Single-line JSON, the golden-log format.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ZoneEntry,
    ProximityTrigger,
    PitchUpdate,
    TrackBorn,
    TrackLost,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::ZoneEntry,
        EventKind::ProximityTrigger,
        EventKind::PitchUpdate,
        EventKind::TrackBorn,
        EventKind::TrackLost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ZoneEntry => "zone_entry",
            EventKind::ProximityTrigger => "proximity_trigger",
            EventKind::PitchUpdate => "pitch_update",
            EventKind::TrackBorn => "track_born",
            EventKind::TrackLost => "track_lost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventConfig {
    /// How far inside a new cell (away from shared gridlines) a sphere must be
    /// before its entry counts.
    pub zone_margin: f64,
    pub zone_cooldown_ms: u64,
    pub proxi_trigger_m: f64,
    pub proxi_rearm_m: f64,
    pub pitch_ref_height: f64,
    pub pitch_octave_span: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Run zone entry on every live sphere instead of only the active pair.
    pub cloudgrid_all_spheres: bool,
    /// Measure proximity between centers instead of between surfaces.
    pub proxi_center_distance: bool,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            zone_margin: 0.25,
            zone_cooldown_ms: 1000,
            proxi_trigger_m: 0.5,
            proxi_rearm_m: 0.8,
            pitch_ref_height: 1.5,
            pitch_octave_span: 3.0,
            ratio_min: 0.5,
            ratio_max: 2.0,
            cloudgrid_all_spheres: false,
            proxi_center_distance: false,
        }
    }
}

impl EventConfig {
    /// Returns the offending field name and a reason.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.zone_margin.is_finite() && self.zone_margin >= 0.0) {
            return Err(("zone_margin", "must be >= 0".into()));
        }
        if !(self.proxi_trigger_m.is_finite()) {
            return Err(("proxi_trigger_m", "must be finite".into()));
        }
        if !(self.proxi_rearm_m.is_finite() && self.proxi_rearm_m > self.proxi_trigger_m) {
            return Err((
                "proxi_rearm_m",
                format!(
                    "must be greater than proxi_trigger_m ({}), got {}",
                    self.proxi_trigger_m, self.proxi_rearm_m
                ),
            ));
        }
        if !self.pitch_ref_height.is_finite() {
            return Err(("pitch_ref_height", "must be finite".into()));
        }
        if !(self.pitch_octave_span.is_finite() && self.pitch_octave_span > 0.0) {
            return Err(("pitch_octave_span", "must be > 0".into()));
        }
        if !(self.ratio_min > 0.0 && self.ratio_min < 1.0) {
            return Err(("ratio_min", format!("must lie in (0, 1), got {}", self.ratio_min)));
        }
        if !(self.ratio_max.is_finite() && self.ratio_max > 1.0) {
            return Err(("ratio_max", format!("must be > 1, got {}", self.ratio_max)));
        }
        Ok(())
    }

    /// Playback-rate ratio for a sphere at `height`.
    pub fn pitch_ratio(&self, height: f64) -> f64 {
        let octaves = (height - self.pitch_ref_height) / self.pitch_octave_span;
        octaves.exp2().clamp(self.ratio_min, self.ratio_max)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZoneTrack {
    pub current_zone: Option<ZoneIndex>,
    pub last_trigger_ms: BTreeMap<ZoneIndex, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEngineState {
    pub zone_state: BTreeMap<TrackId, ZoneTrack>,
    pub proximity_armed: bool,
    pub last_pitch_ratio: f64,
    pub last_step_ms: Option<u64>,
    pub config: EventConfig,
}

impl EventEngineState {
    pub fn new(config: EventConfig) -> Self {
        Self {
            zone_state: BTreeMap::new(),
            proximity_armed: true,
            last_pitch_ratio: 1.0,
            last_step_ms: None,
            config,
        }
    }

    /// Zone-entry rule for each sphere in order.
    pub fn cloud_grid_step(
        &mut self,
        spheres: &[&TrackedSphere],
        grid: &ZoneGrid,
        t_ms: u64,
    ) -> Vec<EngineEvent> {
        let cfg = self.config;
        let mut events = Vec::new();
        for sphere in spheres {
            let zone = geometry::zone_of(sphere.world, grid);
            let entry = self.zone_state.entry(sphere.track_id).or_default();
            if entry.current_zone == Some(zone) {
                continue;
            }
            if grid.interior_depth(sphere.world, zone) < cfg.zone_margin {
                continue;
            }
            let cooled = entry
                .last_trigger_ms
                .get(&zone)
                .is_none_or(|last| t_ms.saturating_sub(*last) >= cfg.zone_cooldown_ms);
            if !cooled {
                continue;
            }
            entry.current_zone = Some(zone);
            entry.last_trigger_ms.insert(zone, t_ms);
            events.push(EngineEvent::ZoneEntry { t_ms, track_id: sphere.track_id, zone });
        }
        events
    }

    /// Proximity latch: fire below the trigger distance, re-arm above the
    /// re-arm distance.
    pub fn orb_proxi_step(
        &mut self,
        pair: (&TrackedSphere, &TrackedSphere),
        t_ms: u64,
    ) -> Option<EngineEvent> {
        let (a, b) = pair;
        let distance = if self.config.proxi_center_distance {
            a.world.distance(&b.world)
        } else {
            geometry::surface_distance(a, b)
        };
        if self.proximity_armed && distance < self.config.proxi_trigger_m {
            self.proximity_armed = false;
            return Some(EngineEvent::ProximityTrigger {
                t_ms,
                track_a: a.track_id,
                track_b: b.track_id,
                distance_m: distance,
            });
        }
        if !self.proximity_armed && distance > self.config.proxi_rearm_m {
            self.proximity_armed = true;
        }
        None
    }

    pub fn pitch_shift_step(&mut self, pitch_sphere: &TrackedSphere, t_ms: u64) -> Option<EngineEvent> {
        let ratio = self.config.pitch_ratio(pitch_sphere.height);
        if (ratio - self.last_pitch_ratio).abs() > PITCH_CHANGE_GATE {
            self.last_pitch_ratio = ratio;
            Some(EngineEvent::PitchUpdate { t_ms, ratio })
        } else {
            None
        }
    }

    /// One engine tick: zone entries, then proximity, then pitch.
    ///
    /// Without an active pair only bookkeeping happens: zone state for tracks
    /// that are no longer live is dropped.
    pub fn step(
        &mut self,
        tracker: &TrackerState,
        pair: Option<(TrackId, TrackId)>,
        grid: &ZoneGrid,
        t_ms: u64,
    ) -> Result<Vec<EngineEvent>, EventError> {
        if let Some(previous_ms) = self.last_step_ms {
            if t_ms < previous_ms {
                return Err(EventError::TimeRegression { t_ms, previous_ms });
            }
        }
        self.last_step_ms = Some(t_ms);
        self.zone_state.retain(|id, _| tracker.tracks.contains_key(id));

        let Some((first, second)) = pair.and_then(|(a, b)| Some((tracker.get(a)?, tracker.get(b)?)))
        else {
            return Ok(Vec::new());
        };

        let mut events = if self.config.cloudgrid_all_spheres {
            let all: Vec<&TrackedSphere> = tracker.live().collect();
            self.cloud_grid_step(&all, grid, t_ms)
        } else {
            self.cloud_grid_step(&[first, second], grid, t_ms)
        };
        events.extend(self.orb_proxi_step((first, second), t_ms));
        events.extend(self.pitch_shift_step(first, t_ms));
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WorldPoint;
    use proptest::prelude::*;

    fn sphere(id: TrackId, x: f64, y: f64) -> TrackedSphere {
        TrackedSphere::at(id, WorldPoint::new(x, y), 1.5)
    }

    #[test]
    fn event_json_key_order() {
        let ev = EngineEvent::ZoneEntry { t_ms: 5, track_id: 2, zone: ZoneIndex(4) };
        assert_eq!(ev.to_json_line(), r#"{"type":"zone_entry","t_ms":5,"track_id":2,"zone":4}"#);
        let ev = EngineEvent::ProximityTrigger { t_ms: 7, track_a: 0, track_b: 1, distance_m: 0.25 };
        assert_eq!(
            ev.to_json_line(),
            r#"{"type":"proximity_trigger","t_ms":7,"track_a":0,"track_b":1,"distance_m":0.25}"#
        );
        let back: EngineEvent = serde_json::from_str(&ev.to_json_line()).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn stationary_sphere_enters_once() {
        let mut state = EventEngineState::new(EventConfig::default());
        let grid = ZoneGrid::default();
        let s = sphere(0, 9.0, 21.0);
        let mut total = 0;
        for i in 0..100 {
            total += state.cloud_grid_step(&[&s], &grid, i * 33).len();
        }
        assert_eq!(total, 1);
    }

    #[test]
    fn margin_band_blocks_entry() {
        let mut state = EventEngineState::new(EventConfig::default());
        let grid = ZoneGrid::default();
        assert!(state.cloud_grid_step(&[&sphere(0, 6.1, 7.0)], &grid, 0).is_empty());
        assert_eq!(state.cloud_grid_step(&[&sphere(0, 6.3, 7.0)], &grid, 33).len(), 1);
    }

    #[test]
    fn cooldown_blocks_quick_return() {
        let mut state = EventEngineState::new(EventConfig::default());
        let grid = ZoneGrid::default();
        assert_eq!(state.cloud_grid_step(&[&sphere(0, 3.0, 7.0)], &grid, 0).len(), 1);
        assert_eq!(state.cloud_grid_step(&[&sphere(0, 9.0, 7.0)], &grid, 100).len(), 1);
        // Back in zone 0 only 200 ms after its last trigger.
        assert!(state.cloud_grid_step(&[&sphere(0, 3.0, 7.0)], &grid, 200).is_empty());
        let late = state.cloud_grid_step(&[&sphere(0, 3.0, 7.0)], &grid, 1000);
        assert_eq!(late, vec![EngineEvent::ZoneEntry { t_ms: 1000, track_id: 0, zone: ZoneIndex(0) }]);
    }

    #[test]
    fn proximity_latch() {
        let mut state = EventEngineState::new(EventConfig::default());
        // 1.5 m spheres: surface distance = center distance - 1.5
        let a = sphere(0, 2.0, 2.0);
        assert!(state.orb_proxi_step((&a, &sphere(1, 13.5, 2.0)), 0).is_none());
        assert!(state.proximity_armed);
        let near = sphere(1, 3.9, 2.0); // 0.4 m gap
        let ev = state.orb_proxi_step((&a, &near), 33).unwrap();
        match ev {
            EngineEvent::ProximityTrigger { distance_m, track_a: 0, track_b: 1, .. } => {
                assert!((distance_m - 0.4).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        for i in 0..100 {
            assert!(state.orb_proxi_step((&a, &near), 66 + i).is_none());
        }
        assert!(!state.proximity_armed);
    }

    #[test]
    fn center_distance_flag() {
        let cfg = EventConfig { proxi_center_distance: true, ..Default::default() };
        let mut state = EventEngineState::new(cfg);
        let a = sphere(0, 2.0, 2.0);
        assert!(state.orb_proxi_step((&a, &sphere(1, 2.6, 2.0)), 0).is_none());
        assert!(state.orb_proxi_step((&a, &sphere(1, 2.4, 2.0)), 1).is_some());
    }

    #[test]
    fn pitch_examples() {
        let cfg = EventConfig::default();
        assert_eq!(cfg.pitch_ratio(1.5), 1.0);
        assert_eq!(cfg.pitch_ratio(4.5), 2.0);
        assert_eq!(cfg.pitch_ratio(-1.5), 0.5);
        assert_eq!(cfg.pitch_ratio(8.0), 2.0);
        assert_eq!(cfg.pitch_ratio(-10.0), 0.5);

        let mut state = EventEngineState::new(cfg);
        let mut s = sphere(0, 1.0, 1.0);
        s.height = 1.5;
        assert!(state.pitch_shift_step(&s, 0).is_none());
        s.height = 1.5 + 0.001; // ratio change ~0.00023, under the gate
        assert!(state.pitch_shift_step(&s, 1).is_none());
        s.height = 4.5;
        assert_eq!(state.pitch_shift_step(&s, 2), Some(EngineEvent::PitchUpdate { t_ms: 2, ratio: 2.0 }));
        s.height = 8.0;
        assert!(state.pitch_shift_step(&s, 3).is_none());
    }

    #[test]
    fn validation_names_fields() {
        let cfg = EventConfig { proxi_rearm_m: 0.4, ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().0, "proxi_rearm_m");
        let cfg = EventConfig { ratio_min: 1.2, ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().0, "ratio_min");
        assert!(EventConfig::default().validate().is_ok());
    }

    #[test]
    fn step_without_tracks_is_quiet() {
        let mut state = EventEngineState::new(EventConfig::default());
        let tracker = TrackerState::default();
        let grid = ZoneGrid::default();
        assert!(state.step(&tracker, None, &grid, 0).unwrap().is_empty());
        assert!(state.step(&tracker, None, &grid, 0).unwrap().is_empty());
        assert!(state.step(&tracker, None, &grid, 5).unwrap().is_empty());
        assert_eq!(
            state.step(&tracker, None, &grid, 1).unwrap_err(),
            EventError::TimeRegression { t_ms: 1, previous_ms: 5 }
        );
    }

    #[test]
    fn scripted_pair_emits_in_fixed_order() {
        let grid = ZoneGrid::default();
        let mut tracker = TrackerState::default();
        let mut a = sphere(0, 3.0, 7.0);
        a.height = 1.5;
        a.physical_diameter = 2.0;
        let mut b = sphere(1, 9.0, 8.9);
        b.height = 1.5;
        tracker.tracks.insert(0, a.clone());
        tracker.tracks.insert(1, b.clone());
        let pair = tracker.select_active_pair(None);
        assert_eq!(pair, Some((0, 1)));

        let mut state = EventEngineState::new(EventConfig::default());
        // Setup tick: both spheres settle into their starting cells (0 and 1).
        let setup = state.step(&tracker, pair, &grid, 0).unwrap();
        assert_eq!(setup.len(), 2);

        // A crosses into zone 1, touching B (gap 1.9 - 1.75 = 0.15 m), and
        // rises 3 m.
        a.world = WorldPoint::new(9.0, 7.0);
        a.height = 4.5;
        tracker.tracks.insert(0, a);
        let events = state.step(&tracker, pair, &grid, 2000).unwrap();
        let kinds: Vec<_> = events.iter().map(EngineEvent::kind).collect();
        assert_eq!(
            kinds,
            vec![EventKind::ZoneEntry, EventKind::ProximityTrigger, EventKind::PitchUpdate]
        );
        assert_eq!(events[0], EngineEvent::ZoneEntry { t_ms: 2000, track_id: 0, zone: ZoneIndex(1) });
        assert_eq!(events[2], EngineEvent::PitchUpdate { t_ms: 2000, ratio: 2.0 });
    }

    proptest! {
        #[test]
        fn pitch_monotone(h1 in -10.0..15.0f64, h2 in -10.0..15.0f64) {
            let cfg = EventConfig::default();
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            prop_assert!(cfg.pitch_ratio(lo) <= cfg.pitch_ratio(hi));
            let r = cfg.pitch_ratio(h1);
            prop_assert!((cfg.ratio_min..=cfg.ratio_max).contains(&r));
        }

        #[test]
        fn consecutive_entries_respect_hysteresis(
            path in proptest::collection::vec((0.0..18.0f64, 0.0..42.0f64, 1u64..400), 1..300),
        ) {
            let cfg = EventConfig::default();
            let mut state = EventEngineState::new(cfg);
            let grid = ZoneGrid::default();
            let mut t = 0;
            let mut last: Option<(ZoneIndex, u64)> = None;
            for (x, y, dt) in path {
                t += dt;
                for ev in state.cloud_grid_step(&[&sphere(3, x, y)], &grid, t) {
                    let EngineEvent::ZoneEntry { zone, t_ms, .. } = ev else { unreachable!() };
                    if let Some((prev_zone, prev_t)) = last {
                        prop_assert!(zone != prev_zone || t_ms - prev_t >= cfg.zone_cooldown_ms);
                    }
                    prop_assert!(grid.interior_depth(WorldPoint::new(x, y), zone) >= cfg.zone_margin);
                    last = Some((zone, t_ms));
                }
            }
        }
    }
}
