//! Reference implementations written independently of the library, used as
//! test oracles. Each one favours the most literal reading of the rule over
//! speed.

#![allow(dead_code)]

use sphere_stage::geometry::ZoneGrid;

/// Zone by scanning every cell rectangle. Points are first clamped onto the
/// floor; cells are half-open except along the far walls.
pub fn zone_by_scan(x: f64, y: f64, grid: &ZoneGrid) -> u32 {
    let x = x.max(0.0).min(grid.floor_width);
    let y = y.max(0.0).min(grid.floor_length);
    let edge = |len: f64, i: u32, n: u32| if i == n { len } else { len * f64::from(i) / f64::from(n) };
    let mut hits = Vec::new();
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let x0 = edge(grid.floor_width, col, grid.cols);
            let x1 = edge(grid.floor_width, col + 1, grid.cols);
            let y0 = edge(grid.floor_length, row, grid.rows);
            let y1 = edge(grid.floor_length, row + 1, grid.rows);
            let in_x = x >= x0 && (x < x1 || (col == grid.cols - 1 && x <= x1));
            let in_y = y >= y0 && (y < y1 || (row == grid.rows - 1 && y <= y1));
            if in_x && in_y {
                hits.push(row * grid.cols + col);
            }
        }
    }
    assert_eq!(hits.len(), 1, "cells must tile the floor, ({x}, {y}) is in {hits:?}");
    hits[0]
}

/// Closed-form sphere height with explicit clamp branches.
pub fn height_closed_form(f: f64, diameter: f64, d_px: f64, camera_height: f64) -> f64 {
    let h = camera_height - f * diameter / d_px;
    let floor = diameter / 2.0;
    let ceiling = camera_height - diameter / 2.0;
    if h < floor {
        floor
    } else if h > ceiling {
        ceiling
    } else {
        h
    }
}

/// Two-state proximity latch. Returns the indices at which it fires.
pub fn proximity_automaton(distances: &[f64], trigger: f64, rearm: f64) -> Vec<usize> {
    #[derive(PartialEq)]
    enum State {
        Armed,
        Fired,
    }
    let mut state = State::Armed;
    let mut fired = Vec::new();
    for (i, &d) in distances.iter().enumerate() {
        match state {
            State::Armed if d < trigger => {
                state = State::Fired;
                fired.push(i);
            }
            State::Fired if d > rearm => state = State::Armed,
            _ => {}
        }
    }
    fired
}

/// Bit-at-a-time CRC-8, polynomial x^8 + x^2 + x + 1, zero init.
pub fn crc8_bitwise(bytes: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &byte in bytes {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
        }
    }
    crc
}

/// Expected node log: the seqs a node accepts, given every seq it is sent
/// in order. A frame is stale when it lies 0..=31 steps behind the last
/// accepted seq, counting modulo 2^16.
pub fn accepted_seqs(sent: &[u16]) -> Vec<u16> {
    let mut last: Option<u16> = None;
    let mut accepted = Vec::new();
    for &seq in sent {
        let stale = match last {
            Some(l) => {
                let behind = (i64::from(l) - i64::from(seq)).rem_euclid(65_536);
                behind < 32
            }
            None => false,
        };
        if !stale {
            last = Some(seq);
            accepted.push(seq);
        }
    }
    accepted
}

/// Background sample at fractional `phase` of a looped buffer, by linear
/// interpolation in f64.
pub fn lerp_loop(src: &[f64], phase: f64) -> f64 {
    let i = phase.floor() as usize % src.len();
    let frac = phase - phase.floor();
    let next = src[(i + 1) % src.len()];
    src[i] + frac * (next - src[i])
}

/// Lowest total distance over every one-to-one matching of tracks to
/// detections, restricted to pairs within `gate`. Returns the matching as
/// `(track index, detection index)` pairs and its cost, preferring more
/// matches over lower cost.
pub fn best_assignment(tracks: &[(f64, f64)], dets: &[(f64, f64)], gate: f64) -> (Vec<(usize, usize)>, f64) {
    #[allow(clippy::too_many_arguments)]
    fn search(
        t: usize,
        tracks: &[(f64, f64)],
        dets: &[(f64, f64)],
        gate: f64,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut (Vec<(usize, usize)>, f64),
    ) {
        if t == tracks.len() {
            let better = current.len() > best.0.len() || (current.len() == best.0.len() && cost < best.1);
            if better {
                *best = (current.clone(), cost);
            }
            return;
        }
        search(t + 1, tracks, dets, gate, used, current, cost, best);
        for d in 0..dets.len() {
            if used[d] {
                continue;
            }
            let dist = ((tracks[t].0 - dets[d].0).powi(2) + (tracks[t].1 - dets[d].1).powi(2)).sqrt();
            if dist <= gate {
                used[d] = true;
                current.push((t, d));
                search(t + 1, tracks, dets, gate, used, current, cost + dist, best);
                current.pop();
                used[d] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    search(0, tracks, dets, gate, &mut vec![false; dets.len()], &mut Vec::new(), 0.0, &mut best);
    best
}
