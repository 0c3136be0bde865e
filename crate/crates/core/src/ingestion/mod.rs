//! Getting detection frames into the engine: recorded `.sjl` files (sphere
//! JSON lines), the live detector socket, and the operator console. Also the
//! recorder that writes sessions back out.

pub mod console;
pub mod live;
pub mod replay;
pub mod wire;

pub use console::{ConsoleHub, ConsoleServer, DEFAULT_CONSOLE_PORT};
pub use live::{LiveSource, DEFAULT_DETECTOR_PORT};
pub use replay::{IngestError, Recorder, ReplaySource};
pub use wire::{frame_to_line, parse_detection_line, ParseError, ParseErrorKind};
