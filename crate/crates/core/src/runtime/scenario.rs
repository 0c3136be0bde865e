//! Scripted choreography for the bundled 60 s demo: two spheres, 30 fps,
//! seen through a lightly distorted lens.
//!
//! Sphere A tours all nine cells in a serpentine (0 1 2 5 4 3 6 7 8) while
//! being raised to 4.5 m at 20 s and lowered to the floor at 40 s. Sphere B
//! idles in cell 8 and, once A has arrived there, twice drifts to within
//! 0.1 m of it and backs off. The rules then produce:
//!
//! * 2 births, no losses;
//! * 10 zone entries: nine for A, one for B at its birth;
//! * 2 proximity triggers, with B backing off past the re-arm distance in between;
//! * 2 pitch updates, one per height step; A starts at the reference height.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::events::EventKind;
use crate::geometry::{apparent_diameter, distort, world_to_pixel, CalibrationProfile, WorldPoint};
use crate::tracking::{Detection, DetectionFrame};

pub const DEMO_FPS: u64 = 30;
pub const DEMO_SECONDS: u64 = 60;
pub const DEMO_DIAMETER_M: f64 = 1.5;

/// Event counts worked out by hand from the choreography above.
pub const DEMO_EXPECTED: [(EventKind, u64); 5] = [
    (EventKind::ZoneEntry, 10),
    (EventKind::ProximityTrigger, 2),
    (EventKind::PitchUpdate, 2),
    (EventKind::TrackBorn, 2),
    (EventKind::TrackLost, 0),
];

/// Pixel-space positional noise, uniform in ±this.
const JITTER_PX: f64 = 1.0;

pub struct ScriptedSphere {
    pub class: u32,
    pub diameter: f64,
    /// `(t_s, x, y)` waypoints, linearly interpolated and held past the ends.
    pub path: Vec<(f64, f64, f64)>,
    /// `(from_s, height)` steps; each holds until the next.
    pub heights: Vec<(f64, f64)>,
}

impl ScriptedSphere {
    pub fn position(&self, t: f64) -> WorldPoint {
        let first = self.path[0];
        if t <= first.0 {
            return WorldPoint::new(first.1, first.2);
        }
        for w in self.path.windows(2) {
            let ((t0, x0, y0), (t1, x1, y1)) = (w[0], w[1]);
            if t <= t1 {
                let a = (t - t0) / (t1 - t0);
                return WorldPoint::new(x0 + a * (x1 - x0), y0 + a * (y1 - y0));
            }
        }
        let last = self.path[self.path.len() - 1];
        WorldPoint::new(last.1, last.2)
    }

    pub fn height(&self, t: f64) -> f64 {
        self.heights.iter().take_while(|(from, _)| *from <= t).last().map_or(self.heights[0].1, |s| s.1)
    }
}

pub fn demo_spheres() -> [ScriptedSphere; 2] {
    let a = ScriptedSphere {
        class: 0,
        diameter: DEMO_DIAMETER_M,
        path: vec![
            (0.0, 3.0, 7.0),
            (5.0, 3.0, 7.0),
            (10.0, 9.0, 7.0),
            (15.0, 15.0, 7.0),
            (20.0, 15.0, 21.0),
            (25.0, 9.0, 21.0),
            (30.0, 3.0, 21.0),
            (38.0, 3.0, 35.0),
            (44.0, 9.0, 35.0),
            (50.0, 15.0, 35.0),
        ],
        heights: vec![(0.0, 1.5), (20.0, 4.5), (40.0, 0.75)],
    };
    let b = ScriptedSphere {
        class: 0,
        diameter: DEMO_DIAMETER_M,
        path: vec![(0.0, 15.0, 39.0), (52.0, 15.0, 39.0), (54.0, 15.0, 36.6), (56.0, 15.0, 39.0), (58.0, 15.0, 36.6)],
        heights: vec![(0.0, 2.0)],
    };
    [a, b]
}

/// Render the choreography as detector frames for `cal`.
pub fn scripted_frames(spheres: &[ScriptedSphere], cal: &CalibrationProfile, fps: u64, seconds: u64, seed: u64) -> Vec<DetectionFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let round2 = |v: f64| (v * 100.0).round() / 100.0;
    (0..fps * seconds)
        .map(|i| {
            let t_ms = (i * 1000 + fps / 2) / fps;
            let t = t_ms as f64 / 1000.0;
            let detections = spheres
                .iter()
                .map(|s| {
                    let undistorted = world_to_pixel(s.position(t), cal);
                    let p = distort(undistorted, cal).unwrap_or(undistorted);
                    Detection {
                        det_class: s.class,
                        cx: round2(p.u + rng.random_range(-JITTER_PX..=JITTER_PX)),
                        cy: round2(p.v + rng.random_range(-JITTER_PX..=JITTER_PX)),
                        d_px: round2(apparent_diameter(s.height(t), s.diameter, cal)),
                        conf: round2(rng.random_range(0.8..=1.0)),
                    }
                })
                .collect();
            DetectionFrame { t_ms, detections }
        })
        .collect()
}

/// Calibration the bundled demo is rendered for.
pub fn demo_calibration() -> CalibrationProfile {
    CalibrationProfile { k1: 0.05, ..CalibrationProfile::default() }
}

pub fn demo_frames() -> Vec<DetectionFrame> {
    scripted_frames(&demo_spheres(), &demo_calibration(), DEMO_FPS, DEMO_SECONDS, 0x5C0_0D5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let frames = demo_frames();
        assert_eq!(frames.len(), 1800);
        assert_eq!(frames[0].t_ms, 0);
        assert_eq!(frames[1].t_ms, 33);
        assert_eq!(frames[3].t_ms, 100);
        assert!(frames.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
        assert!(frames.iter().all(|f| f.detections.len() == 2));
    }

    #[test]
    fn keyframes() {
        let [a, b] = demo_spheres();
        assert_eq!(a.position(12.5), WorldPoint::new(12.0, 7.0));
        assert_eq!(a.position(59.0), WorldPoint::new(15.0, 35.0));
        assert_eq!(a.height(19.99), 1.5);
        assert_eq!(a.height(20.0), 4.5);
        assert_eq!(b.position(55.0), WorldPoint::new(15.0, 37.8));
    }
}
