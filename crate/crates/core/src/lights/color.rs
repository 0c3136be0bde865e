use serde::{Deserialize, Serialize};

use super::frame::{Effect, LightCommand};
use crate::events::EngineEvent;
use crate::tracking::{TrackId, TrackedSphere};

/// How long a sphere keeps pulsing after a proximity hit.
pub const PULSE_WINDOW_MS: u64 = 1000;
pub const PULSE_PARAM: u8 = 200;

/// Light state for one sphere, without addressing or sequencing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LightPayload {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub effect: Effect,
    pub param: u8,
}

impl LightPayload {
    pub fn into_command(self, sphere_id: u8, seq: u16) -> LightCommand {
        LightCommand { sphere_id, r: self.r, g: self.g, b: self.b, effect: self.effect, param: self.param, seq }
    }
}

/// Light address of a track. Board ids are a byte wide.
pub fn sphere_id_for(track_id: TrackId) -> u8 {
    (track_id % 256) as u8
}

/// Fully saturated, full-value HSV colour as 8-bit RGB.
pub fn hue_to_rgb(hue_deg: f64) -> (u8, u8, u8) {
    let h = hue_deg.rem_euclid(360.0) / 60.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |c: f64| (c * 255.0).round() as u8;
    (q(r), q(g), q(b))
}

/// Colour a sphere by its zone (hues evenly spaced around the wheel, 40° apart
/// on a nine-cell grid) and pulse it if it took part in a proximity hit within
/// the last second.
pub fn color_for(sphere: &TrackedSphere, recent: &[EngineEvent], now_ms: u64, zone_count: usize) -> LightPayload {
    let hue = f64::from(sphere.zone.0) * 360.0 / zone_count.max(1) as f64;
    let (r, g, b) = hue_to_rgb(hue);
    let pulsing = recent.iter().any(|ev| match ev {
        EngineEvent::ProximityTrigger { t_ms, track_a, track_b, .. } => {
            (*track_a == sphere.track_id || *track_b == sphere.track_id)
                && *t_ms <= now_ms
                && now_ms - t_ms <= PULSE_WINDOW_MS
        }
        _ => false,
    });
    if pulsing {
        LightPayload { r, g, b, effect: Effect::Pulse, param: PULSE_PARAM }
    } else {
        LightPayload { r, g, b, effect: Effect::Steady, param: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{WorldPoint, ZoneIndex};

    fn in_zone(zone: u32) -> TrackedSphere {
        let mut s = TrackedSphere::at(1, WorldPoint::new(1.0, 1.0), 1.5);
        s.zone = ZoneIndex(zone);
        s
    }

    #[test]
    fn zone_hues() {
        let rgb = |z| {
            let p = color_for(&in_zone(z), &[], 0, 9);
            (p.r, p.g, p.b)
        };
        assert_eq!(rgb(0), (255, 0, 0));
        assert_eq!(rgb(1), (255, 170, 0));
        assert_eq!(rgb(3), (0, 255, 0));
        assert_eq!(rgb(6), (0, 0, 255));
        assert_eq!(rgb(8), (255, 0, 170));
    }

    #[test]
    fn proximity_pulse_window() {
        let hit = EngineEvent::ProximityTrigger { t_ms: 1000, track_a: 0, track_b: 1, distance_m: 0.2 };
        let p = color_for(&in_zone(0), std::slice::from_ref(&hit), 1500, 9);
        assert_eq!((p.effect, p.param), (Effect::Pulse, 200));
        let p = color_for(&in_zone(0), std::slice::from_ref(&hit), 2001, 9);
        assert_eq!(p.effect, Effect::Steady);
        // Another pair's hit leaves this sphere alone.
        let other = EngineEvent::ProximityTrigger { t_ms: 1000, track_a: 4, track_b: 5, distance_m: 0.2 };
        assert_eq!(color_for(&in_zone(0), &[other], 1500, 9).effect, Effect::Steady);
    }
}
