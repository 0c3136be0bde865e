use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::wire::{frame_to_line, parse_detection_line, ParseError};
use crate::events::EngineEvent;
use crate::tracking::DetectionFrame;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}: t_ms {t_ms} does not follow the previous frame at {previous_ms}")]
    TimeRegression { line: usize, t_ms: u64, previous_ms: u64 },
    #[error("replay speed must be >= 0 and finite, got {0}")]
    Speed(f64),
}

/// Frames from a recorded `.sjl` file.
///
/// With `speed == 0` frames come out as fast as they are read (offline mode);
/// otherwise each frame waits until `(t_ms − first t_ms) / speed`
/// milliseconds of wall time have passed since the first one.
pub struct ReplaySource<R> {
    lines: Lines<R>,
    origin: PathBuf,
    line_no: usize,
    speed: f64,
    clock: Option<(Instant, u64)>,
    previous_ms: Option<u64>,
    failed: bool,
}

impl ReplaySource<BufReader<File>> {
    pub fn open(path: &Path, speed: f64) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
        Self::from_reader(BufReader::new(file), path, speed)
    }
}

impl<R: BufRead> ReplaySource<R> {
    pub fn from_reader(reader: R, origin: &Path, speed: f64) -> Result<Self, IngestError> {
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(IngestError::Speed(speed));
        }
        Ok(Self {
            lines: reader.lines(),
            origin: origin.to_owned(),
            line_no: 0,
            speed,
            clock: None,
            previous_ms: None,
            failed: false,
        })
    }

    fn pace(&mut self, t_ms: u64) {
        if self.speed == 0.0 {
            return;
        }
        let (start, t0) = *self.clock.get_or_insert_with(|| (Instant::now(), t_ms));
        let due = start + Duration::from_secs_f64((t_ms - t0) as f64 / 1000.0 / self.speed);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
    }
}

impl<R: BufRead> Iterator for ReplaySource<R> {
    type Item = Result<DetectionFrame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = match self.lines.next()? {
                Ok(text) => text,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(IngestError::Io { path: self.origin.clone(), source }));
                }
            };
            self.line_no += 1;
            if text.trim().is_empty() {
                continue;
            }
            let frame = match parse_detection_line(&text, self.line_no) {
                Ok(frame) => frame,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            if let Some(previous_ms) = self.previous_ms {
                if frame.t_ms <= previous_ms {
                    self.failed = true;
                    return Some(Err(IngestError::TimeRegression {
                        line: self.line_no,
                        t_ms: frame.t_ms,
                        previous_ms,
                    }));
                }
            }
            self.previous_ms = Some(frame.t_ms);
            self.pace(frame.t_ms);
            return Some(Ok(frame));
        }
    }
}

/// Appends JSON lines (detection frames or events) to a file.
pub struct Recorder<W: Write = BufWriter<File>> {
    out: W,
    lines: u64,
}

impl Recorder<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> Recorder<W> {
    pub fn new(out: W) -> Self {
        Self { out, lines: 0 }
    }

    pub fn write_frame(&mut self, frame: &DetectionFrame) -> io::Result<()> {
        self.write_line(&frame_to_line(frame))
    }

    pub fn write_event(&mut self, event: &EngineEvent) -> io::Result<()> {
        self.write_line(&event.to_json_line())
    }

    pub fn write_line(&mut self, line: &str) -> io::Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines_written(&self) -> u64 {
        self.lines
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
