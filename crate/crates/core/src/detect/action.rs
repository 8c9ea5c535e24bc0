//! Rule-driven mapping from predictions to actuator commands, and the
//! sinks that deliver them.

use std::io::Write;
use std::net::TcpStream;
use std::path::Path;
use std::time::Duration;

use serde_json::json;

use super::DetectError;
use crate::acquire::protocol::{write_frame, write_preamble, Frame};
use crate::acquire::session::format_value;
use crate::acquire::{EventRecord, StreamKind, StreamMeta};
use crate::scenario::ActionRule;

/// One model decision on the session clock.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub t: f64,
    pub label: String,
    pub confidence: f64,
}

/// An actuator command produced by a matched rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCommand {
    pub t: f64,
    pub action: String,
    pub label: String,
    pub confidence: f64,
    pub rule_index: usize,
}

/// Applies the scenario's action rules in order: the first rule whose
/// label pattern (`*` = any) and confidence floor match wins. Each rule
/// keeps its own debounce clock; a matched-but-debounced rule suppresses
/// the event rather than falling through to later rules.
#[derive(Debug, Clone)]
pub struct ActionMapper {
    rules: Vec<ActionRule>,
    last_fired: Vec<Option<f64>>,
}

impl ActionMapper {
    pub fn new(rules: Vec<ActionRule>) -> Self {
        let last_fired = vec![None; rules.len()];
        ActionMapper { rules, last_fired }
    }

    pub fn map(&mut self, event: &DetectionEvent) -> Option<ActionCommand> {
        for (i, rule) in self.rules.iter().enumerate() {
            let label_ok = rule.when_label == "*" || rule.when_label == event.label;
            if !label_ok || event.confidence < rule.min_confidence {
                continue;
            }
            if let Some(t0) = self.last_fired[i] {
                if event.t - t0 < rule.debounce {
                    return None;
                }
            }
            self.last_fired[i] = Some(event.t);
            return Some(ActionCommand {
                t: event.t,
                action: rule.action.clone(),
                label: event.label.clone(),
                confidence: event.confidence,
                rule_index: i,
            });
        }
        None
    }
}

enum Sink {
    Stdout,
    Csv(csv::Writer<std::fs::File>),
    Socket { addr: String, conn: Option<TcpStream> },
}

/// Delivers commands to stdout, a CSV file, or a wire-protocol socket.
/// Socket delivery retries up to 3 times, 100 ms apart, reconnecting on
/// each attempt.
pub struct ActionEmitter {
    sink: Sink,
}

pub const EMIT_ATTEMPTS: usize = 3;
pub const EMIT_RETRY_DELAY: Duration = Duration::from_millis(100);

impl ActionEmitter {
    pub fn stdout() -> Self {
        ActionEmitter { sink: Sink::Stdout }
    }

    pub fn csv(path: &Path) -> Result<Self, DetectError> {
        let file = std::fs::File::create(path)?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(["t", "action", "label", "confidence"])
            .and_then(|_| writer.flush().map_err(Into::into))
            .map_err(|e| DetectError::Io(std::io::Error::other(e)))?;
        Ok(ActionEmitter { sink: Sink::Csv(writer) })
    }

    pub fn socket(addr: impl Into<String>) -> Self {
        ActionEmitter { sink: Sink::Socket { addr: addr.into(), conn: None } }
    }

    /// Stream description announced on a fresh socket connection.
    pub fn socket_meta() -> StreamMeta {
        StreamMeta {
            name: "actions".to_string(),
            kind: StreamKind::Telemetry,
            channels: vec!["confidence".to_string()],
            srate: 1.0,
            units: "none".to_string(),
        }
    }

    pub fn emit(&mut self, cmd: &ActionCommand) -> Result<(), DetectError> {
        match &mut self.sink {
            Sink::Stdout => {
                println!(
                    "{}\t{}\t{}\t{}",
                    format_value(cmd.t),
                    cmd.action,
                    cmd.label,
                    format_value(cmd.confidence)
                );
                Ok(())
            }
            Sink::Csv(writer) => {
                writer
                    .write_record([
                        format_value(cmd.t),
                        cmd.action.clone(),
                        cmd.label.clone(),
                        format_value(cmd.confidence),
                    ])
                    .and_then(|_| writer.flush().map_err(Into::into))
                    .map_err(|e| DetectError::Io(std::io::Error::other(e)))?;
                Ok(())
            }
            Sink::Socket { addr, conn } => {
                let event = EventRecord::new(
                    cmd.t,
                    "action",
                    json!({
                        "action": cmd.action,
                        "label": cmd.label,
                        "confidence": cmd.confidence,
                    }),
                );
                let mut last = String::new();
                for attempt in 0..EMIT_ATTEMPTS {
                    if attempt > 0 {
                        std::thread::sleep(EMIT_RETRY_DELAY);
                    }
                    match Self::try_send(addr, conn, &event) {
                        Ok(()) => return Ok(()),
                        Err(e) => {
                            *conn = None;
                            last = e.to_string();
                        }
                    }
                }
                Err(DetectError::EmitFailed { attempts: EMIT_ATTEMPTS, last })
            }
        }
    }

    fn try_send(
        addr: &str,
        conn: &mut Option<TcpStream>,
        event: &EventRecord,
    ) -> std::io::Result<()> {
        if conn.is_none() {
            let mut stream = TcpStream::connect(addr)?;
            write_preamble(&mut stream)?;
            write_frame(&mut stream, &Frame::Metadata(Self::socket_meta()))
                .map_err(std::io::Error::other)?;
            *conn = Some(stream);
        }
        let stream = conn.as_mut().expect("connection just ensured");
        write_frame(stream, &Frame::Event(event.clone())).map_err(std::io::Error::other)?;
        stream.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    fn rule(when: &str, min_conf: f64, action: &str, debounce: f64) -> ActionRule {
        ActionRule {
            when_label: when.to_string(),
            min_confidence: min_conf,
            action: action.to_string(),
            debounce,
        }
    }

    fn event(t: f64, label: &str, confidence: f64) -> DetectionEvent {
        DetectionEvent { t, label: label.to_string(), confidence }
    }

    #[test]
    fn first_matching_rule_wins_and_debounce_suppresses() {
        let mut mapper = ActionMapper::new(vec![
            rule("drowsy", 0.8, "pull_over_warning", 5.0),
            rule("drowsy", 0.5, "chime", 1.0),
            rule("*", 0.0, "log", 0.0),
        ]);

        // High confidence: first rule.
        let cmd = mapper.map(&event(10.0, "drowsy", 0.9)).unwrap();
        assert_eq!(cmd.action, "pull_over_warning");
        assert_eq!(cmd.rule_index, 0);

        // Matches rule 0 again but inside its debounce window: suppressed
        // entirely, no fallthrough to the chime.
        assert_eq!(mapper.map(&event(12.0, "drowsy", 0.95)), None);

        // Lower confidence picks the second rule even inside rule 0's window.
        let cmd = mapper.map(&event(12.5, "drowsy", 0.6)).unwrap();
        assert_eq!(cmd.action, "chime");

        // Past the window the first rule fires again.
        let cmd = mapper.map(&event(15.1, "drowsy", 0.9)).unwrap();
        assert_eq!(cmd.action, "pull_over_warning");

        // Unrelated labels land on the wildcard.
        let cmd = mapper.map(&event(16.0, "alert", 0.3)).unwrap();
        assert_eq!(cmd.action, "log");

        // Confidence below every floor for that label: nothing.
        let mut strict = ActionMapper::new(vec![rule("drowsy", 0.8, "warn", 0.0)]);
        assert_eq!(strict.map(&event(0.0, "drowsy", 0.5)), None);
    }

    #[test]
    fn csv_sink_writes_fixed_precision_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actions.csv");
        let mut emitter = ActionEmitter::csv(&path).unwrap();
        emitter
            .emit(&ActionCommand {
                t: 1.5,
                action: "chime".to_string(),
                label: "drowsy".to_string(),
                confidence: 0.875,
                rule_index: 0,
            })
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,action,label,confidence\n1.500000,chime,drowsy,0.875000\n");
    }

    #[test]
    fn socket_sink_announces_itself_then_streams_events() {
        use crate::acquire::protocol::{read_frame, read_preamble};
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let server = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut r = std::io::BufReader::new(&mut s);
            read_preamble(&mut r).unwrap();
            let meta = match read_frame(&mut r).unwrap() {
                Frame::Metadata(m) => m,
                other => panic!("expected metadata, got {other:?}"),
            };
            let ev = match read_frame(&mut r).unwrap() {
                Frame::Event(e) => e,
                other => panic!("expected event, got {other:?}"),
            };
            (meta, ev)
        });

        let mut emitter = ActionEmitter::socket(addr);
        emitter
            .emit(&ActionCommand {
                t: 3.25,
                action: "brake_assist".to_string(),
                label: "distracted".to_string(),
                confidence: 0.91,
                rule_index: 1,
            })
            .unwrap();
        let (meta, ev) = server.join().unwrap();
        assert_eq!(meta.name, "actions");
        assert_eq!(ev.tag, "action");
        assert_eq!(ev.t, 3.25);
        assert_eq!(ev.payload["action"], "brake_assist");
        assert_eq!(ev.payload["confidence"], 0.91);
    }

    #[test]
    fn socket_sink_retries_three_times_before_failing() {
        // Nothing listens here; grab a port and release it.
        let addr = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().to_string()
        };
        let mut emitter = ActionEmitter::socket(addr);
        let start = std::time::Instant::now();
        let err = emitter
            .emit(&ActionCommand {
                t: 0.0,
                action: "noop".to_string(),
                label: "x".to_string(),
                confidence: 1.0,
                rule_index: 0,
            })
            .unwrap_err();
        let elapsed = start.elapsed();
        match err {
            DetectError::EmitFailed { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected error {other}"),
        }
        assert!(
            elapsed >= Duration::from_millis(200),
            "two retry delays expected, finished in {elapsed:?}"
        );
    }
}
