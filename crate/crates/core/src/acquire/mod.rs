//! Stream acquisition: sample containers, wire protocol, session storage,
//! and multi-rate synchronization.
//!
//! A *stream* is one device output: a name, a kind, a fixed channel list,
//! and a nominal sample rate. Data moves through the system as
//! [`SampleChunk`]s (a batch of consecutive samples with per-sample
//! timestamps) plus out-of-band [`EventRecord`]s (stimulus markers, block
//! boundaries, detections). Multi-stream alignment produces [`FusedFrame`]s
//! on the clock of the fastest stream.

mod chunk;
pub mod protocol;
pub mod session;
pub mod source;
pub mod sync;

pub use chunk::{EventRecord, FusedFrame, SampleChunk, StreamKind, StreamMeta, StreamSlot};
