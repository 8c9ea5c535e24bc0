//! On-disk session recordings.
//!
//! A session is a directory:
//!
//! ```text
//! <root>/<session-id>/
//!   session.json      # SessionRecord: identity, time bounds, stream metas
//!   <stream>.csv      # per stream: header `t,<ch1>,<ch2>,...`, one row per sample
//!   events.csv        # header `t,tag,payload`, payload is compact JSON
//! ```
//!
//! Timestamps and sample values are written with exactly six decimal
//! places, so a read immediately followed by a write reproduces every file
//! byte for byte. Event payload objects serialize with sorted keys for the
//! same reason.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::chunk::{EventRecord, SampleChunk, StreamMeta};

/// Reserved basename: the event log is not a stream.
const EVENTS_FILE: &str = "events.csv";
const RECORD_FILE: &str = "session.json";

/// Identity and shape of one recorded session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// Directory name; unique within a recording root.
    pub session: String,
    /// Who was recorded (synthetic subjects use generated ids).
    pub subject: String,
    /// Scenario identifier that produced the recording ("" for ad hoc).
    pub scenario: String,
    /// Master seed the generator used (0 for live recordings).
    pub seed: u64,
    /// First sample timestamp across all streams.
    pub start: f64,
    /// Last sample timestamp across all streams.
    pub end: f64,
    pub streams: Vec<StreamMeta>,
    /// Free-form extras (ground-truth summaries, device notes). Sorted
    /// keys keep the file deterministic.
    #[serde(default)]
    pub annotations: serde_json::Map<String, serde_json::Value>,
}

/// A full session in memory. `data[i]` holds the samples for
/// `record.streams[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub record: SessionRecord,
    pub data: Vec<SampleChunk>,
    pub events: Vec<EventRecord>,
}

impl SessionData {
    /// Find a stream's index by name.
    pub fn stream_index(&self, name: &str) -> Option<usize> {
        self.record.streams.iter().position(|m| m.name == name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid JSON: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: header is `{got}`, expected `{expected}`")]
    Header { path: PathBuf, expected: String, got: String },
    #[error("stream name `{name}` is not usable as a file name (need [A-Za-z0-9_-], `events` is reserved)")]
    BadStreamName { name: String },
    #[error("stream `{name}`: {message}")]
    Shape { name: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.to_path_buf(), source }
}

fn check_stream_name(name: &str) -> Result<(), SessionError> {
    let ok = !name.is_empty()
        && name != "events"
        && name != "session"
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(SessionError::BadStreamName { name: name.to_string() })
    }
}

/// Format a number exactly as the session files store it.
pub fn format_value(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

/// Write a session under `root`, creating `<root>/<record.session>/`.
///
/// Returns the session directory. Refuses shape mismatches between the
/// record and the data instead of writing a corrupt directory.
pub fn write_session(root: &Path, session: &SessionData) -> Result<PathBuf, SessionError> {
    let rec = &session.record;
    check_stream_name(&rec.session)?;
    if rec.streams.len() != session.data.len() {
        return Err(SessionError::Shape {
            name: rec.session.clone(),
            message: format!(
                "record declares {} streams but {} were supplied",
                rec.streams.len(),
                session.data.len()
            ),
        });
    }
    let mut seen = BTreeSet::new();
    for (meta, chunk) in rec.streams.iter().zip(&session.data) {
        check_stream_name(&meta.name)?;
        if !seen.insert(meta.name.clone()) {
            return Err(SessionError::Shape {
                name: meta.name.clone(),
                message: "duplicate stream name".into(),
            });
        }
        if chunk.channel_count() != meta.channel_count() {
            return Err(SessionError::Shape {
                name: meta.name.clone(),
                message: format!(
                    "{} channels declared but data has {}",
                    meta.channel_count(),
                    chunk.channel_count()
                ),
            });
        }
    }

    let dir = root.join(&rec.session);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let record_path = dir.join(RECORD_FILE);
    let json = serde_json::to_string_pretty(rec)
        .map_err(|e| SessionError::Json { path: record_path.clone(), message: e.to_string() })?;
    fs::write(&record_path, json + "\n").map_err(io_err(&record_path))?;

    for (meta, chunk) in rec.streams.iter().zip(&session.data) {
        let path = dir.join(format!("{}.csv", meta.name));
        write_stream_csv(&path, meta, chunk)?;
    }
    write_events_csv(&dir.join(EVENTS_FILE), &session.events)?;
    Ok(dir)
}

fn write_stream_csv(path: &Path, meta: &StreamMeta, chunk: &SampleChunk) -> Result<(), SessionError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SessionError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut header = vec!["t".to_string()];
    header.extend(meta.channels.iter().cloned());
    w.write_record(&header)
        .and_then(|()| {
            let mut row = Vec::with_capacity(header.len());
            for (i, t) in chunk.timestamps.iter().enumerate() {
                row.clear();
                row.push(format_value(*t));
                row.extend(chunk.values.row(i).iter().map(|v| format_value(*v)));
                w.write_record(&row)?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| SessionError::Csv { path: path.to_path_buf(), message: e.to_string() })
}

fn write_events_csv(path: &Path, events: &[EventRecord]) -> Result<(), SessionError> {
    let csv_fail =
        |e: csv::Error| SessionError::Csv { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_fail)?;
    w.write_record(["t", "tag", "payload"]).map_err(csv_fail)?;
    for ev in events {
        let payload = serde_json::to_string(&ev.payload)
            .map_err(|e| SessionError::Json { path: path.to_path_buf(), message: e.to_string() })?;
        w.write_record([format_value(ev.t), ev.tag.clone(), payload]).map_err(csv_fail)?;
    }
    w.flush().map_err(|e| csv_fail(csv::Error::from(e)))
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

/// Read a session directory written by [`write_session`].
pub fn read_session(dir: &Path) -> Result<SessionData, SessionError> {
    let record_path = dir.join(RECORD_FILE);
    let json = fs::read_to_string(&record_path).map_err(io_err(&record_path))?;
    let record: SessionRecord = serde_json::from_str(&json)
        .map_err(|e| SessionError::Json { path: record_path.clone(), message: e.to_string() })?;

    let mut data = Vec::with_capacity(record.streams.len());
    for meta in &record.streams {
        check_stream_name(&meta.name)?;
        let path = dir.join(format!("{}.csv", meta.name));
        data.push(read_stream_csv(&path, meta)?);
    }

    let events_path = dir.join(EVENTS_FILE);
    let events =
        if events_path.exists() { read_events_csv(&events_path)? } else { Vec::new() };
    Ok(SessionData { record, data, events })
}

fn parse_f64(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64, SessionError> {
    raw.trim().parse().map_err(|_| SessionError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("`{raw}` in column `{field}` is not a number"),
    })
}

fn read_stream_csv(path: &Path, meta: &StreamMeta) -> Result<SampleChunk, SessionError> {
    let csv_fail =
        |e: csv::Error| SessionError::Csv { path: path.to_path_buf(), message: e.to_string() };
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_fail)?;

    let mut expected = vec!["t".to_string()];
    expected.extend(meta.channels.iter().cloned());

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_fail)?;
        let line = i as u64 + 1;
        if i == 0 {
            let got: Vec<&str> = rec.iter().collect();
            if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(SessionError::Header {
                    path: path.to_path_buf(),
                    expected: expected.join(","),
                    got: got.join(","),
                });
            }
            continue;
        }
        if rec.len() != expected.len() {
            return Err(SessionError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("{} fields, expected {}", rec.len(), expected.len()),
            });
        }
        timestamps.push(parse_f64(path, line, "t", &rec[0])?);
        for (ch, field) in rec.iter().skip(1).enumerate() {
            values.push(parse_f64(path, line, &meta.channels[ch], field)?);
        }
    }
    let n = timestamps.len();
    let values = Array2::from_shape_vec((n, meta.channel_count()), values).expect("checked per row");
    SampleChunk::new(timestamps, values)
        .map_err(|e| SessionError::Shape { name: meta.name.clone(), message: e.to_string() })
}

fn read_events_csv(path: &Path) -> Result<Vec<EventRecord>, SessionError> {
    let csv_fail =
        |e: csv::Error| SessionError::Csv { path: path.to_path_buf(), message: e.to_string() };
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_fail)?;
    let mut events = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_fail)?;
        let line = i as u64 + 1;
        if i == 0 {
            let got: Vec<&str> = rec.iter().collect();
            if got != ["t", "tag", "payload"] {
                return Err(SessionError::Header {
                    path: path.to_path_buf(),
                    expected: "t,tag,payload".into(),
                    got: got.join(","),
                });
            }
            continue;
        }
        if rec.len() != 3 {
            return Err(SessionError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("{} fields, expected 3", rec.len()),
            });
        }
        let t = parse_f64(path, line, "t", &rec[0])?;
        let payload = serde_json::from_str(&rec[2]).map_err(|e| SessionError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("payload JSON: {e}"),
        })?;
        events.push(EventRecord { t, tag: rec[1].to_string(), payload });
    }
    Ok(events)
}

/// List the session directories under a recording root, sorted by name.
pub fn list_sessions(root: &Path) -> Result<Vec<PathBuf>, SessionError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        let path = entry.path();
        if path.is_dir() && path.join(RECORD_FILE).is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
