//! Detection wire format: one JSON object per line,
//! `{"t_ms": int, "detections": [{"cls": int, "cx": num, "cy": num, "d_px": num, "conf": num}]}`.
//! Unknown keys are ignored; missing or ill-typed required keys are errors.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::tracking::{Detection, DetectionFrame};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` must be {expected}")]
    WrongType { field: String, expected: &'static str },
    #[error("field `{0}` is not a finite number")]
    NonFinite(String),
    #[error("field `{field}` {reason}")]
    Invalid { field: String, reason: String },
}

impl ParseError {
    /// Field path the error points at, if any.
    pub fn field(&self) -> Option<&str> {
        match &self.kind {
            ParseErrorKind::Malformed(_) => None,
            ParseErrorKind::MissingField(f)
            | ParseErrorKind::NonFinite(f)
            | ParseErrorKind::WrongType { field: f, .. }
            | ParseErrorKind::Invalid { field: f, .. } => Some(f),
        }
    }
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    prefix: String,
}

impl<'a> Fields<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn get(&self, key: &str) -> Result<&'a Value, ParseErrorKind> {
        self.obj.get(key).ok_or_else(|| ParseErrorKind::MissingField(self.path(key)))
    }

    fn number(&self, key: &str) -> Result<f64, ParseErrorKind> {
        let v = self.get(key)?;
        let n = v.as_f64().ok_or_else(|| ParseErrorKind::WrongType { field: self.path(key), expected: "a number" })?;
        if !n.is_finite() {
            return Err(ParseErrorKind::NonFinite(self.path(key)));
        }
        Ok(n)
    }

    fn unsigned(&self, key: &str) -> Result<u64, ParseErrorKind> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| ParseErrorKind::WrongType { field: self.path(key), expected: "a non-negative integer" })
    }
}

fn parse_detection(value: &Value, index: usize) -> Result<Detection, ParseErrorKind> {
    let prefix = format!("detections[{index}].");
    let obj = value
        .as_object()
        .ok_or_else(|| ParseErrorKind::WrongType { field: format!("detections[{index}]"), expected: "an object" })?;
    let f = Fields { obj, prefix };
    let cls = f.unsigned("cls")?;
    let det_class = u32::try_from(cls)
        .map_err(|_| ParseErrorKind::Invalid { field: f.path("cls"), reason: format!("{cls} is out of range") })?;
    let cx = f.number("cx")?;
    let cy = f.number("cy")?;
    let d_px = f.number("d_px")?;
    if d_px <= 0.0 {
        return Err(ParseErrorKind::Invalid { field: f.path("d_px"), reason: format!("must be > 0, got {d_px}") });
    }
    let conf = f.number("conf")?;
    if !(0.0..=1.0).contains(&conf) {
        return Err(ParseErrorKind::Invalid { field: f.path("conf"), reason: format!("must lie in [0, 1], got {conf}") });
    }
    Ok(Detection { det_class, cx, cy, d_px, conf })
}

/// Strictly parse one wire line. `line` is the 1-based line number used in
/// error messages.
pub fn parse_detection_line(text: &str, line: usize) -> Result<DetectionFrame, ParseError> {
    let err = |kind| ParseError { line, kind };
    let value: Value = serde_json::from_str(text).map_err(|e| err(ParseErrorKind::Malformed(e.to_string())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| err(ParseErrorKind::WrongType { field: "<root>".into(), expected: "an object" }))?;
    let f = Fields { obj, prefix: String::new() };
    let t_ms = f.unsigned("t_ms").map_err(err)?;
    let detections = f
        .get("detections")
        .map_err(err)?
        .as_array()
        .ok_or_else(|| err(ParseErrorKind::WrongType { field: "detections".into(), expected: "an array" }))?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_detection(v, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok(DetectionFrame { t_ms, detections })
}

/// Serialize a frame as a single wire line, without the trailing newline.
pub fn frame_to_line(frame: &DetectionFrame) -> String {
    serde_json::to_string(frame).expect("frames always serialize")
}
