//! Acceptance suite: one line per criterion, each with a wall-clock budget.
//! Run with `cargo test --test acceptance`.

mod common;

use std::io::Write;
use std::net::TcpStream;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosc::{OscPacket, OscType};

use sphere_stage::audio::{osc_encode, MixerState, PcmBuffer, SampleBank};
use sphere_stage::events::{EventConfig, EventEngineState};
use sphere_stage::geometry::{
    estimate_height, surface_distance, world_to_pixel, zone_of, CalibrationProfile, WorldPoint, ZoneGrid, ZoneIndex,
};
use sphere_stage::ingestion::{frame_to_line, LiveSource, ReplaySource};
use sphere_stage::lights::{decode_light_frame, encode_light_frame, Effect, LightCommand, NodeBank};
use sphere_stage::runtime::{channel_frames, load_config, run_frames, run_session, InstallationConfig, SessionOptions};
use sphere_stage::{Detection, DetectionFrame, EngineEvent, TrackedSphere};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn demo_run() -> (Vec<u8>, Option<String>) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(Some(&assets().join("demo.json"))).unwrap();
    let log = dir.path().join("events.jsonl");
    let opts = SessionOptions { wav: Some(dir.path().join("out.wav")), event_log: Some(log.clone()), ..Default::default() };
    let report = run_session(&cfg, &opts).unwrap();
    assert!(report.event_count(sphere_stage::EventKind::ZoneEntry) > 0);
    (std::fs::read(log).unwrap(), report.wav_sha256)
}

fn determinism() {
    let (log_a, wav_a) = demo_run();
    let (log_b, wav_b) = demo_run();
    assert!(log_a == log_b, "event logs differ");
    assert!(wav_a.is_some());
    assert_eq!(wav_a, wav_b);
}

fn zone_oracle() {
    let grid = ZoneGrid::for_floor(3, 3, &CalibrationProfile::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let (x, y) = (rng.random_range(-2.0..20.0), rng.random_range(-2.0..44.0));
        assert_eq!(zone_of(WorldPoint::new(x, y), &grid).0, common::zone_by_scan(x, y, &grid), "({x}, {y})");
    }
    for x in [0.0, 6.0, 12.0, 18.0] {
        for y in [0.0, 14.0, 28.0, 42.0] {
            assert_eq!(zone_of(WorldPoint::new(x, y), &grid).0, common::zone_by_scan(x, y, &grid), "({x}, {y})");
        }
    }
}

fn pinhole_height() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let cal = CalibrationProfile { focal_length: rng.random_range(200.0..3000.0), ..Default::default() };
        let d = rng.random_range(0.5..4.0);
        let d_px = rng.random_range(10.0..5000.0);
        let got = estimate_height(d_px, d, &cal).unwrap();
        let want = common::height_closed_form(cal.focal_length, d, d_px, cal.camera_height);
        assert!(((got - want) / want).abs() <= 1e-9);
    }
    // The clamps engage exactly where f·D/d_px equals cam − D/2 and D/2.
    let cal = CalibrationProfile::default();
    let (f, d, cam) = (cal.focal_length, 1.5, cal.camera_height);
    let at_floor = f * d / (cam - d / 2.0);
    let at_ceiling = f * d / (d / 2.0);
    assert_eq!(estimate_height(at_floor, d, &cal).unwrap(), d / 2.0);
    assert!(estimate_height(at_floor * 1.001, d, &cal).unwrap() > d / 2.0);
    assert_eq!(estimate_height(at_floor * 0.999, d, &cal).unwrap(), d / 2.0);
    assert_eq!(estimate_height(at_ceiling, d, &cal).unwrap(), cam - d / 2.0);
    assert!(estimate_height(at_ceiling * 0.999, d, &cal).unwrap() < cam - d / 2.0);
    assert_eq!(estimate_height(at_ceiling * 1.001, d, &cal).unwrap(), cam - d / 2.0);
}

fn entries(events: &[EngineEvent]) -> Vec<u32> {
    events
        .iter()
        .filter_map(|e| match e {
            EngineEvent::ZoneEntry { zone, .. } => Some(zone.0),
            _ => None,
        })
        .collect()
}

fn ball(id: u64, x: f64, y: f64) -> TrackedSphere {
    TrackedSphere::at(id, WorldPoint::new(x, y), 1.2)
}

fn hysteresis() {
    let grid = ZoneGrid::for_floor(3, 3, &CalibrationProfile::default());
    let mut state = EventEngineState::new(EventConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut all = state.cloud_grid_step(&[&ball(0, 3.0, 7.0)], &grid, 0);
    for i in 1..=3000u64 {
        let x = 6.0 + rng.random_range(-0.05..0.05);
        all.extend(state.cloud_grid_step(&[&ball(0, x, 7.0)], &grid, i * 33));
    }
    assert_eq!(entries(&all).len(), 1, "jitter");

    let mut state = EventEngineState::new(EventConfig::default());
    let mut path = Vec::new();
    for (r, y) in [7.0, 21.0, 35.0].into_iter().enumerate() {
        let xs: Vec<f64> = (0..=180).map(|i| 0.5 + 17.0 * f64::from(i) / 180.0).collect();
        let xs: Vec<f64> = if r % 2 == 0 { xs } else { xs.into_iter().rev().collect() };
        path.extend(xs.into_iter().map(|x| (x, y)));
        if r < 2 {
            let x = if r % 2 == 0 { 17.5 } else { 0.5 };
            path.extend((1..140).map(|i| (x, y + 14.0 * f64::from(i) / 140.0)));
        }
    }
    let mut all = Vec::new();
    for (i, (x, y)) in path.into_iter().enumerate() {
        all.extend(state.cloud_grid_step(&[&ball(0, x, y)], &grid, i as u64 * 100));
    }
    assert_eq!(entries(&all), [0, 1, 2, 5, 4, 3, 6, 7, 8]);
}

fn proximity() {
    let cfg = EventConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let mut state = EventEngineState::new(cfg);
        let mut gap: f64 = rng.random_range(0.0..2.0);
        let mut distances = Vec::new();
        let mut fired = Vec::new();
        for i in 0..200 {
            gap = (gap + rng.random_range(-0.15..0.15)).clamp(0.0, 2.0);
            let (a, b) = (ball(0, 5.0, 5.0), ball(1, 6.2 + gap, 5.0));
            distances.push(surface_distance(&a, &b));
            if state.orb_proxi_step((&a, &b), i).is_some() {
                fired.push(i as usize);
            }
        }
        assert_eq!(fired, common::proximity_automaton(&distances, cfg.proxi_trigger_m, cfg.proxi_rearm_m));
    }
}

fn pitch() {
    let cfg = EventConfig::default();
    assert_eq!(cfg.pitch_ratio(cfg.pitch_ref_height), 1.0);
    assert_eq!(cfg.pitch_ratio(cfg.pitch_ref_height + cfg.pitch_octave_span), 2.0);
    assert_eq!(cfg.pitch_ratio(cfg.pitch_ref_height - cfg.pitch_octave_span), 0.5);
    assert!(cfg.pitch_ratio(4.49) < 2.0 && cfg.pitch_ratio(-1.49) > 0.5);
    let mut previous = 0.0;
    for i in 0..=20_000 {
        let h = -5.0 + f64::from(i) * 0.001;
        let r = cfg.pitch_ratio(h);
        assert!(r >= previous && (0.5..=2.0).contains(&r));
        previous = r;
    }
}

fn test_bank(background: Vec<f32>) -> SampleBank {
    SampleBank {
        background: PcmBuffer::from_mono(&background),
        zone_samples: (0..9).map(|i| PcmBuffer::from_mono(&vec![0.3 + 0.05 * i as f32; 500])).collect(),
        proxi_sample: PcmBuffer::from_mono(&[0.9; 300]),
        sample_rate: 48_000,
    }
}

fn audio() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let src: Vec<f32> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut mix = MixerState::new(1.0);
    for (k, f) in mix.render(&test_bank(src.clone()), 3000).iter().enumerate() {
        assert_eq!(f[0].to_bits(), src[k % 1000].to_bits());
    }

    let ramp: Vec<f64> = (0..1024).map(|i| f64::from(i) / 1024.0).collect();
    let mut mix = MixerState::new(1.0);
    mix.pitch_ratio = 2.0;
    for (k, f) in mix.render(&test_bank(ramp.iter().map(|&v| v as f32).collect()), 2000).iter().enumerate() {
        assert!((f64::from(f[0]) - common::lerp_loop(&ramp, (2 * k % 1024) as f64)).abs() <= 1e-6);
    }

    for _ in 0..200 {
        let bank = test_bank((0..300).map(|_| rng.random_range(-1.0..1.0)).collect());
        let mut mix = MixerState::new(rng.random_range(0.0..10.0));
        mix.pitch_ratio = rng.random_range(0.5..2.0);
        for _ in 0..rng.random_range(0..30) {
            let ev = EngineEvent::ZoneEntry { t_ms: 0, track_id: 0, zone: ZoneIndex(rng.random_range(0..9)) };
            mix.apply_event(&bank, &ev);
        }
        mix.apply_event(&bank, &EngineEvent::ProximityTrigger { t_ms: 0, track_a: 0, track_b: 1, distance_m: 0.0 });
        assert!(mix.render(&bank, 600).iter().all(|f| f[0].abs() <= 1.0 && f[1].abs() <= 1.0));
    }
}

fn osc() {
    let bytes = osc_encode(&EngineEvent::PitchUpdate { t_ms: 0, ratio: 1.0 }).unwrap();
    assert_eq!(bytes.len(), 24);
    assert_eq!(bytes, [b"/pitch/ratio\0\0\0\0".as_slice(), b",f\0\0", &[0x3F, 0x80, 0, 0]].concat());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let event = match rng.random_range(0..3) {
            0 => EngineEvent::ZoneEntry { t_ms: 0, track_id: 0, zone: ZoneIndex(rng.random_range(0..64)) },
            1 => EngineEvent::ProximityTrigger { t_ms: 0, track_a: 0, track_b: 1, distance_m: 0.0 },
            _ => EngineEvent::PitchUpdate { t_ms: 0, ratio: f64::from(rng.random_range(0.5f32..=2.0)) },
        };
        let bytes = osc_encode(&event).unwrap();
        assert_eq!(bytes.len() % 4, 0);
        let (rest, OscPacket::Message(m)) = rosc::decoder::decode_udp(&bytes).unwrap() else { panic!("bundle") };
        assert!(rest.is_empty());
        let decoded = match (m.addr.as_str(), &m.args[..]) {
            ("/cloudgrid/zone", [OscType::Int(z)]) => EngineEvent::ZoneEntry { t_ms: 0, track_id: 0, zone: ZoneIndex(*z as u32) },
            ("/orbproxi/trigger", []) => EngineEvent::ProximityTrigger { t_ms: 0, track_a: 0, track_b: 1, distance_m: 0.0 },
            ("/pitch/ratio", [OscType::Float(r)]) => EngineEvent::PitchUpdate { t_ms: 0, ratio: f64::from(*r) },
            other => panic!("{other:?}"),
        };
        assert_eq!(decoded, event);
    }
}

fn light_protocol() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let random_command = |rng: &mut ChaCha8Rng| LightCommand {
        sphere_id: rng.random(),
        r: rng.random(),
        g: rng.random(),
        b: rng.random(),
        effect: [Effect::Steady, Effect::Pulse, Effect::Fade][rng.random_range(0..3)],
        param: rng.random(),
        seq: rng.random(),
    };
    for _ in 0..10_000 {
        let cmd = random_command(&mut rng);
        let bytes = encode_light_frame(&cmd);
        assert_eq!(common::crc8_bitwise(&bytes[..10]), bytes[10]);
        assert_eq!(decode_light_frame(&bytes).unwrap(), cmd);
    }
    for _ in 0..20 {
        let bytes = encode_light_frame(&random_command(&mut rng));
        for pos in 0..10 {
            for value in (0..=255u8).filter(|v| *v != bytes[pos]) {
                let mut bad = bytes;
                bad[pos] = value;
                assert!(decode_light_frame(&bad).is_err());
            }
        }
    }

    let bank = NodeBank::spawn("127.0.0.1:0".parse().unwrap(), [7], |_| {}).unwrap();
    let tx = std::net::UdpSocket::bind("127.0.0.1:0").unwrap();
    let sent: Vec<u16> = vec![0, 1, 2, 1, 40, 30, 8, 9, 65_530, 100, 120, 121, 90, 65_535, 0, 3, 3, 2];
    for (i, &seq) in sent.iter().enumerate() {
        let cmd = LightCommand { sphere_id: 7, r: i as u8, g: 0, b: 0, effect: Effect::Steady, param: 0, seq };
        tx.send_to(&encode_light_frame(&cmd), bank.local_addr()).unwrap();
        std::thread::sleep(Duration::from_millis(1));
    }
    let deadline = Instant::now() + Duration::from_secs(2);
    let node = loop {
        let node = bank.snapshot().remove(0);
        if node.log.len() + node.dropped as usize >= sent.len() || Instant::now() > deadline {
            break node;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let accepted = common::accepted_seqs(&sent);
    assert_eq!(node.log.iter().map(|e| e.seq).collect::<Vec<_>>(), accepted);
    assert_eq!(node.current.map(|c| c.seq), accepted.last().copied());
}

fn crowd_frames(cal: &CalibrationProfile) -> Vec<DetectionFrame> {
    (0..1800u64)
        .map(|i| {
            let t = i as f64 / 30.0;
            let detections = (0..20)
                .map(|k| {
                    let (col, row) = (f64::from(k % 4), f64::from(k / 4));
                    let phase = t * 0.4 + f64::from(k);
                    let w = WorldPoint::new(2.5 + 4.3 * col + phase.cos(), 3.0 + 8.5 * row + phase.sin());
                    let p = world_to_pixel(w, cal);
                    Detection { det_class: 0, cx: p.u, cy: p.v, d_px: 150.0 + 5.0 * f64::from(k), conf: 0.9 }
                })
                .collect();
            DetectionFrame { t_ms: (i * 1000 + 15) / 30, detections }
        })
        .collect()
}

fn throughput() {
    let cfg = InstallationConfig::default();
    let frames = crowd_frames(&cfg.calibration);
    let start = Instant::now();
    let report = run_frames(&cfg, &SessionOptions::default(), frames.into_iter().map(Ok)).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(report.frames, 1800);
    assert_eq!(report.event_count(sphere_stage::EventKind::TrackBorn), 20);
    assert!(elapsed < Duration::from_secs(1), "{elapsed:?}");
}

fn transport_independence() {
    let mut cfg = load_config(Some(&assets().join("demo.json"))).unwrap();
    cfg.audio.render_wav = None;
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, frames: &mut dyn Iterator<Item = Result<DetectionFrame, sphere_stage::ingestion::IngestError>>| {
        let log = dir.path().join(name);
        let opts = SessionOptions { event_log: Some(log.clone()), ..Default::default() };
        run_frames(&cfg, &opts, frames).unwrap();
        std::fs::read(log).unwrap()
    };
    let from_file = run("file.jsonl", &mut ReplaySource::open(&assets().join("demo.sjl"), 0.0).unwrap());

    let source = LiveSource::bind("127.0.0.1:0".parse().unwrap(), true).unwrap();
    let addr = source.local_addr().unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::sync_channel(256);
    let handle = source.spawn(tx, Arc::clone(&stop)).unwrap();
    let lines: String = ReplaySource::open(&assets().join("demo.sjl"), 0.0)
        .unwrap()
        .map(|f| frame_to_line(&f.unwrap()) + "\n")
        .collect();
    let client = std::thread::spawn(move || TcpStream::connect(addr).unwrap().write_all(lines.as_bytes()).unwrap());
    let from_socket = run("socket.jsonl", &mut channel_frames(rx, stop));
    client.join().unwrap();
    handle.join().unwrap();
    assert!(!from_file.is_empty());
    assert!(from_file == from_socket, "event logs differ");
}

type Criterion = (&'static str, fn(), Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("determinism", determinism, Some(Duration::from_secs(5))),
        ("zone oracle", zone_oracle, Some(Duration::from_secs(1))),
        ("pinhole height", pinhole_height, Some(Duration::from_secs(1))),
        ("hysteresis", hysteresis, Some(Duration::from_secs(1))),
        ("proximity automaton", proximity, Some(Duration::from_secs(2))),
        ("pitch mapping", pitch, Some(Duration::from_secs(1))),
        ("audio identities", audio, Some(Duration::from_secs(2))),
        ("osc", osc, Some(Duration::from_secs(1))),
        ("light protocol", light_protocol, Some(Duration::from_secs(3))),
        ("throughput", throughput, Some(Duration::from_secs(1))),
        ("transport independence", transport_independence, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let limit = budget.map_or(String::new(), |b| format!(", limit {} ms", b.as_millis()));
        let verdict = match outcome {
            Err(payload) => {
                let message = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(message)
            }
            Ok(()) if budget.is_some_and(|b| elapsed > b) => Err("over time budget".to_owned()),
            Ok(()) => Ok(()),
        };
        match verdict {
            Ok(()) => println!("PASS  {name} ({} ms{limit})", elapsed.as_millis()),
            Err(message) => {
                failed += 1;
                println!("FAIL  {name} ({} ms{limit}): {message}", elapsed.as_millis());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
