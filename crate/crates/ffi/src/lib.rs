//! C ABI for the sphere-stage engine.
//!
//! Every function returns an [`SsStatus`]. On failure a message describing
//! the error is kept per thread and can be read with [`ss_last_error`] until
//! the next call on that thread. Strings handed out by the library must be
//! released with [`ss_string_free`]; engines with [`ss_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sphere_stage::audio::{osc_encode, OscError};
use sphere_stage::geometry::{self, CalibrationProfile, PixelPoint, WorldPoint, ZoneGrid};
use sphere_stage::ingestion::parse_detection_line;
use sphere_stage::lights::{decode_light_frame, encode_light_frame, Effect, LightCommand, FRAME_LEN};
use sphere_stage::runtime::{Engine, InstallationConfig};
use sphere_stage::EngineEvent;

pub const SS_LIGHT_FRAME_LEN: usize = 11;
const _: () = assert!(SS_LIGHT_FRAME_LEN == FRAME_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidFrame = 4,
    EngineFailure = 5,
    BufferTooSmall = 6,
    InvalidLightFrame = 7,
    NotEncodable = 8,
    InvalidArgument = 9,
    Panic = 10,
}

/// Camera and floor description, field for field the engine's calibration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsCalibration {
    pub image_width: f64,
    pub image_height: f64,
    pub focal_length: f64,
    pub k1: f64,
    pub camera_height: f64,
    pub floor_width: f64,
    pub floor_length: f64,
}

/// A light command. `effect` is 0 steady, 1 pulse, 2 fade.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsLightCommand {
    pub sphere_id: u8,
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub effect: u8,
    pub param: u8,
    pub seq: u16,
}

/// Opaque engine handle.
pub struct SsEngine {
    engine: Engine,
}

struct Failure(SsStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: Option<String>) {
    let message = message.map(|m| CString::new(m.replace('\0', " ")).expect("NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SsStatus {
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(None);
            SsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(Some(message));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".to_owned()));
            SsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(SsStatus::NullArgument, format!("`{what}` is NULL")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string valid for the call.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(SsStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON never contains NUL").into_raw()
}

impl From<CalibrationProfile> for SsCalibration {
    fn from(c: CalibrationProfile) -> Self {
        Self {
            image_width: c.image_width,
            image_height: c.image_height,
            focal_length: c.focal_length,
            k1: c.k1,
            camera_height: c.camera_height,
            floor_width: c.floor_width,
            floor_length: c.floor_length,
        }
    }
}

/// # Safety
/// `cal` must be NULL or point to a readable `SsCalibration`.
unsafe fn calibration(cal: *const SsCalibration) -> Result<CalibrationProfile, Failure> {
    non_null(cal, "cal")?;
    let c = *cal;
    let profile = CalibrationProfile {
        image_width: c.image_width,
        image_height: c.image_height,
        focal_length: c.focal_length,
        k1: c.k1,
        camera_height: c.camera_height,
        floor_width: c.floor_width,
        floor_length: c.floor_length,
    };
    profile.validate().map_err(|e| Failure(SsStatus::InvalidArgument, e.to_string()))?;
    Ok(profile)
}

impl From<LightCommand> for SsLightCommand {
    fn from(c: LightCommand) -> Self {
        Self { sphere_id: c.sphere_id, r: c.r, g: c.g, b: c.b, effect: c.effect as u8, param: c.param, seq: c.seq }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Release a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Create an engine from an installation config in JSON. A NULL config
/// selects the built-in defaults.
///
/// # Safety
/// `config_json` must be NULL or a NUL-terminated string; `out` must be a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_engine_new(config_json: *const c_char, out: *mut *mut SsEngine) -> SsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let cfg = if config_json.is_null() {
            InstallationConfig::default()
        } else {
            let json = text(config_json, "config_json")?;
            InstallationConfig::from_json(json, Path::new("<config>"))
                .map_err(|e| Failure(SsStatus::InvalidConfig, e.to_string()))?
        };
        *out = Box::into_raw(Box::new(SsEngine { engine: Engine::new(&cfg) }));
        Ok(())
    })
}

/// Destroy an engine. NULL is ignored.
///
/// # Safety
/// `engine` must be NULL or a handle from `ss_engine_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_engine_free(engine: *mut SsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Feed one detection frame in its JSON-line form. On success `*out_json`
/// receives `{"t_ms":..,"events":[..],"lights":[..]}`, to be released with
/// `ss_string_free`.
///
/// # Safety
/// `engine` must be a live handle, `line` a NUL-terminated string and
/// `out_json` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_engine_push_line(
    engine: *mut SsEngine,
    line: *const c_char,
    out_json: *mut *mut c_char,
) -> SsStatus {
    guard(|| {
        non_null(engine, "engine")?;
        non_null(out_json, "out_json")?;
        *out_json = ptr::null_mut();
        let line = text(line, "line")?;
        let frame = parse_detection_line(line, 1).map_err(|e| Failure(SsStatus::InvalidFrame, e.to_string()))?;
        let output = (*engine)
            .engine
            .process(&frame)
            .map_err(|e| Failure(SsStatus::EngineFailure, e.to_string()))?;
        let events: Vec<String> = output.events.iter().map(EngineEvent::to_json_line).collect();
        let lights = serde_json::to_string(&output.lights).expect("light commands serialize");
        *out_json = into_c_string(format!(r#"{{"t_ms":{},"events":[{}],"lights":{lights}}}"#, output.t_ms, events.join(",")));
        Ok(())
    })
}

/// Number of live tracks.
///
/// # Safety
/// `engine` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_engine_track_count(engine: *const SsEngine, out: *mut usize) -> SsStatus {
    guard(|| {
        non_null(engine, "engine")?;
        non_null(out, "out")?;
        *out = (*engine).engine.tracker().tracks.len();
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_calibration_default(out: *mut SsCalibration) -> SsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = CalibrationProfile::default().into();
        Ok(())
    })
}

/// Undistort a pixel and map it onto the floor, in meters.
///
/// # Safety
/// `cal` must be readable; `x` and `y` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_pixel_to_world(cal: *const SsCalibration, u: f64, v: f64, x: *mut f64, y: *mut f64) -> SsStatus {
    guard(|| {
        let cal = calibration(cal)?;
        non_null(x, "x")?;
        non_null(y, "y")?;
        let w = geometry::pixel_to_world(PixelPoint::new(u, v), &cal);
        (*x, *y) = (w.x, w.y);
        Ok(())
    })
}

/// Inverse of `ss_pixel_to_world`, distortion included.
///
/// # Safety
/// `cal` must be readable; `u` and `v` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_world_to_pixel(cal: *const SsCalibration, x: f64, y: f64, u: *mut f64, v: *mut f64) -> SsStatus {
    guard(|| {
        let cal = calibration(cal)?;
        non_null(u, "u")?;
        non_null(v, "v")?;
        let p = geometry::world_to_pixel(WorldPoint::new(x, y), &cal);
        (*u, *v) = (p.u, p.v);
        Ok(())
    })
}

/// Height of a sphere's center above the floor from its apparent diameter.
///
/// # Safety
/// `cal` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_estimate_height(
    cal: *const SsCalibration,
    d_px: f64,
    physical_diameter: f64,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let cal = calibration(cal)?;
        non_null(out, "out")?;
        *out = geometry::estimate_height(d_px, physical_diameter, &cal)
            .map_err(|e| Failure(SsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Row-major zone index of a floor point on a `cols` x `rows` grid.
///
/// # Safety
/// `cal` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_zone_of(
    cal: *const SsCalibration,
    cols: u32,
    rows: u32,
    x: f64,
    y: f64,
    out: *mut u32,
) -> SsStatus {
    guard(|| {
        let cal = calibration(cal)?;
        non_null(out, "out")?;
        let grid = ZoneGrid::for_floor(cols, rows, &cal);
        grid.validate().map_err(|e| Failure(SsStatus::InvalidArgument, e.to_string()))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Failure(SsStatus::InvalidArgument, format!("point ({x}, {y}) is not finite")));
        }
        *out = geometry::zone_of(WorldPoint::new(x, y), &grid).0;
        Ok(())
    })
}

/// Encode a light command into `SS_LIGHT_FRAME_LEN` bytes at `out`.
///
/// # Safety
/// `cmd` must be readable and `out` writable for `SS_LIGHT_FRAME_LEN` bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_light_encode(cmd: *const SsLightCommand, out: *mut u8) -> SsStatus {
    guard(|| {
        non_null(cmd, "cmd")?;
        non_null(out, "out")?;
        let c = *cmd;
        let effect = Effect::try_from(c.effect).map_err(|e| Failure(SsStatus::InvalidArgument, e.to_string()))?;
        let frame = encode_light_frame(&LightCommand {
            sphere_id: c.sphere_id,
            r: c.r,
            g: c.g,
            b: c.b,
            effect,
            param: c.param,
            seq: c.seq,
        });
        ptr::copy_nonoverlapping(frame.as_ptr(), out, FRAME_LEN);
        Ok(())
    })
}

/// Validate and decode a light datagram.
///
/// # Safety
/// `bytes` must be readable for `len` bytes and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_light_decode(bytes: *const u8, len: usize, out: *mut SsLightCommand) -> SsStatus {
    guard(|| {
        non_null(bytes, "bytes")?;
        non_null(out, "out")?;
        let slice = std::slice::from_raw_parts(bytes, len);
        let cmd = decode_light_frame(slice).map_err(|e| Failure(SsStatus::InvalidLightFrame, e.to_string()))?;
        *out = cmd.into();
        Ok(())
    })
}

/// Encode an engine event (one JSON object, as in the event log) as an OSC
/// message. `*written` receives the datagram length; when `capacity` is too
/// small nothing is copied and the status is `SS_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `event_json` must be a NUL-terminated string, `buf` writable for
/// `capacity` bytes (or NULL with zero capacity) and `written` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_osc_encode(
    event_json: *const c_char,
    buf: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> SsStatus {
    guard(|| {
        non_null(written, "written")?;
        *written = 0;
        let json = text(event_json, "event_json")?;
        let event: EngineEvent =
            serde_json::from_str(json).map_err(|e| Failure(SsStatus::InvalidArgument, format!("event: {e}")))?;
        let bytes = osc_encode(&event).map_err(|e| match e {
            OscError::NotEncodable(_) => Failure(SsStatus::NotEncodable, e.to_string()),
            other => Failure(SsStatus::InvalidArgument, other.to_string()),
        })?;
        *written = bytes.len();
        if bytes.len() > capacity {
            return Err(Failure(
                SsStatus::BufferTooSmall,
                format!("datagram needs {} bytes, buffer holds {capacity}", bytes.len()),
            ));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        Ok(())
    })
}
