//! Binary wire protocol for live streams (`NBS1`).
//!
//! A connection starts with the 4-byte preamble `N B S 1`, then carries a
//! sequence of frames. Every frame is:
//!
//! ```text
//! 1 byte  frame type
//! 4 bytes payload length (u32, little-endian)
//! N bytes payload
//! ```
//!
//! Frame types:
//! * `0x01` metadata — UTF-8 JSON `{"name","kind","channels","srate","units"}`
//! * `0x02` chunk — `u32` sample count, then per sample: `f64` timestamp
//!   followed by one `f64` per channel (all little-endian)
//! * `0x03` event — `f64` timestamp, `u16` tag length, tag bytes, `u32`
//!   payload length, JSON payload bytes
//!
//! The chunk layout is self-describing: the channel count falls out of the
//! payload length and the sample count, so the decoder never needs state.
//! Callers that know the stream's declared shape should still check it.

use std::io::{self, Read, Write};

use ndarray::Array2;

use super::chunk::{ChunkError, EventRecord, SampleChunk, StreamMeta};

/// Connection preamble.
pub const MAGIC: [u8; 4] = *b"NBS1";
pub const FRAME_METADATA: u8 = 0x01;
pub const FRAME_CHUNK: u8 = 0x02;
pub const FRAME_EVENT: u8 = 0x03;

/// Upper bound on a declared payload length. Anything larger is treated as
/// a corrupt or hostile header rather than an allocation request.
pub const MAX_PAYLOAD: u32 = 64 * 1024 * 1024;

/// One decoded frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Metadata(StreamMeta),
    Chunk(SampleChunk),
    Event(EventRecord),
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("bad preamble {got:02x?}, expected {MAGIC:02x?} (`NBS1`)")]
    BadMagic { got: [u8; 4] },
    #[error("unknown frame type 0x{got:02x}")]
    UnknownFrameType { got: u8 },
    #[error("stream truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("declared payload length {got} exceeds the {max}-byte cap")]
    PayloadTooLarge { got: u32, max: u32 },
    #[error("malformed {frame} payload: {reason}")]
    BadPayload { frame: &'static str, reason: String },
    #[error("chunk violates container invariants: {0}")]
    BadChunk(#[from] ChunkError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

fn bad(frame: &'static str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::BadPayload { frame, reason: reason.into() }
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// Append the connection preamble.
pub fn encode_preamble(buf: &mut Vec<u8>) {
    buf.extend_from_slice(&MAGIC);
}

fn encode_frame_header(buf: &mut Vec<u8>, ftype: u8, payload_len: usize) -> Result<(), ProtocolError> {
    let len = u32::try_from(payload_len)
        .ok()
        .filter(|l| *l <= MAX_PAYLOAD)
        .ok_or(ProtocolError::PayloadTooLarge {
            got: payload_len.min(u32::MAX as usize) as u32,
            max: MAX_PAYLOAD,
        })?;
    buf.push(ftype);
    buf.extend_from_slice(&len.to_le_bytes());
    Ok(())
}

/// Append one metadata frame.
pub fn encode_metadata(meta: &StreamMeta, buf: &mut Vec<u8>) -> Result<(), ProtocolError> {
    let payload = serde_json::to_vec(meta).map_err(|e| bad("metadata", e.to_string()))?;
    encode_frame_header(buf, FRAME_METADATA, payload.len())?;
    buf.extend_from_slice(&payload);
    Ok(())
}

/// Append one chunk frame.
pub fn encode_chunk(chunk: &SampleChunk, buf: &mut Vec<u8>) -> Result<(), ProtocolError> {
    if chunk.is_empty() {
        return Err(bad("chunk", "empty chunks are not representable"));
    }
    let n = chunk.len();
    let ch = chunk.channel_count();
    if ch == 0 {
        return Err(bad("chunk", "chunks need at least one channel"));
    }
    let payload_len = 4 + n * 8 * (1 + ch);
    encode_frame_header(buf, FRAME_CHUNK, payload_len)?;
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for (i, t) in chunk.timestamps.iter().enumerate() {
        buf.extend_from_slice(&t.to_le_bytes());
        for v in chunk.values.row(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(())
}

/// Append one event frame.
pub fn encode_event(ev: &EventRecord, buf: &mut Vec<u8>) -> Result<(), ProtocolError> {
    let tag = ev.tag.as_bytes();
    if tag.len() > u16::MAX as usize {
        return Err(bad("event", format!("tag of {} bytes exceeds the u16 limit", tag.len())));
    }
    let payload = serde_json::to_vec(&ev.payload).map_err(|e| bad("event", e.to_string()))?;
    let total = 8 + 2 + tag.len() + 4 + payload.len();
    encode_frame_header(buf, FRAME_EVENT, total)?;
    buf.extend_from_slice(&ev.t.to_le_bytes());
    buf.extend_from_slice(&(tag.len() as u16).to_le_bytes());
    buf.extend_from_slice(tag);
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(&payload);
    Ok(())
}

/// Append any frame.
pub fn encode_frame(frame: &Frame, buf: &mut Vec<u8>) -> Result<(), ProtocolError> {
    match frame {
        Frame::Metadata(m) => encode_metadata(m, buf),
        Frame::Chunk(c) => encode_chunk(c, buf),
        Frame::Event(e) => encode_event(e, buf),
    }
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// A little-endian cursor over one payload.
struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    frame: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8], frame: &'static str) -> Self {
        Self { data, pos: 0, frame }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.data.len()).ok_or_else(|| {
            bad(self.frame, format!("needs {n} more bytes at offset {}", self.pos))
        })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<(), ProtocolError> {
        if self.pos != self.data.len() {
            return Err(bad(
                self.frame,
                format!("{} trailing bytes after the payload", self.data.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn decode_metadata(payload: &[u8]) -> Result<StreamMeta, ProtocolError> {
    serde_json::from_slice(payload).map_err(|e| bad("metadata", e.to_string()))
}

fn decode_chunk(payload: &[u8]) -> Result<SampleChunk, ProtocolError> {
    let mut c = Cursor::new(payload, "chunk");
    let n = c.u32()? as usize;
    if n == 0 {
        return Err(bad("chunk", "sample count of zero"));
    }
    let body = payload.len() - 4;
    if body % n != 0 {
        return Err(bad("chunk", format!("{body} body bytes do not divide into {n} samples")));
    }
    let record = body / n;
    if record < 16 || record % 8 != 0 {
        return Err(bad("chunk", format!("record size {record} is not a timestamp plus channels")));
    }
    let ch = record / 8 - 1;
    let mut timestamps = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * ch);
    for _ in 0..n {
        timestamps.push(c.f64()?);
        for _ in 0..ch {
            values.push(c.f64()?);
        }
    }
    c.finish()?;
    let values = Array2::from_shape_vec((n, ch), values).expect("sized above");
    Ok(SampleChunk::new(timestamps, values)?)
}

fn decode_event(payload: &[u8]) -> Result<EventRecord, ProtocolError> {
    let mut c = Cursor::new(payload, "event");
    let t = c.f64()?;
    let tag_len = c.u16()? as usize;
    let tag = std::str::from_utf8(c.take(tag_len)?)
        .map_err(|e| bad("event", format!("tag is not UTF-8: {e}")))?
        .to_string();
    let body_len = c.u32()? as usize;
    let body = c.take(body_len)?;
    let payload_json =
        serde_json::from_slice(body).map_err(|e| bad("event", format!("payload JSON: {e}")))?;
    c.finish()?;
    Ok(EventRecord { t, tag, payload: payload_json })
}

fn decode_payload(ftype: u8, payload: &[u8]) -> Result<Frame, ProtocolError> {
    match ftype {
        FRAME_METADATA => Ok(Frame::Metadata(decode_metadata(payload)?)),
        FRAME_CHUNK => Ok(Frame::Chunk(decode_chunk(payload)?)),
        FRAME_EVENT => Ok(Frame::Event(decode_event(payload)?)),
        other => Err(ProtocolError::UnknownFrameType { got: other }),
    }
}

/// Incremental decoder for bytes that arrive in arbitrary slices.
///
/// Feed bytes with [`push`](Self::push), drain frames with
/// [`next_frame`](Self::next_frame): `Ok(None)` means a frame is still
/// incomplete and more bytes are needed. Call [`finish`](Self::finish) at
/// end-of-stream to catch a final partial frame.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
    start: usize,
    preamble_done: bool,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        // Reclaim consumed space before growing.
        if self.start > 0 && self.start >= self.buf.len() / 2 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    fn pending(&self) -> &[u8] {
        &self.buf[self.start..]
    }

    /// Decode the next complete frame, if the buffer holds one.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, ProtocolError> {
        if !self.preamble_done {
            let p = self.pending();
            if p.len() < 4 {
                return Ok(None);
            }
            let got: [u8; 4] = p[..4].try_into().unwrap();
            if got != MAGIC {
                return Err(ProtocolError::BadMagic { got });
            }
            self.start += 4;
            self.preamble_done = true;
        }
        let p = self.pending();
        if p.len() < 5 {
            return Ok(None);
        }
        let ftype = p[0];
        let len = u32::from_le_bytes(p[1..5].try_into().unwrap());
        if len > MAX_PAYLOAD {
            return Err(ProtocolError::PayloadTooLarge { got: len, max: MAX_PAYLOAD });
        }
        let total = 5 + len as usize;
        if p.len() < total {
            return Ok(None);
        }
        let frame = decode_payload(ftype, &p[5..total])?;
        self.start += total;
        Ok(Some(frame))
    }

    /// Assert the stream ended on a frame boundary.
    pub fn finish(&self) -> Result<(), ProtocolError> {
        if !self.pending().is_empty() {
            let context = if self.preamble_done { "a frame" } else { "the preamble" };
            return Err(ProtocolError::Truncated { context });
        }
        Ok(())
    }

    pub fn buffered(&self) -> usize {
        self.pending().len()
    }
}

// ---------------------------------------------------------------------------
// Blocking I/O adapters
// ---------------------------------------------------------------------------

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], context: &'static str) -> Result<(), ProtocolError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ProtocolError::Truncated { context }
        } else {
            ProtocolError::Io(e)
        }
    })
}

/// Write the preamble to a blocking sink.
pub fn write_preamble(w: &mut impl Write) -> io::Result<()> {
    w.write_all(&MAGIC)
}

/// Encode and write one frame to a blocking sink.
pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), ProtocolError> {
    let mut buf = Vec::new();
    encode_frame(frame, &mut buf)?;
    w.write_all(&buf)?;
    Ok(())
}

/// Read and check the preamble from a blocking source.
pub fn read_preamble(r: &mut impl Read) -> Result<(), ProtocolError> {
    let mut got = [0u8; 4];
    read_exact_or(r, &mut got, "the preamble")?;
    if got != MAGIC {
        return Err(ProtocolError::BadMagic { got });
    }
    Ok(())
}

/// Read one frame from a blocking source (preamble already consumed).
pub fn read_frame(r: &mut impl Read) -> Result<Frame, ProtocolError> {
    let mut first = [0u8; 1];
    read_exact_or(r, &mut first, "a frame header")?;
    read_frame_after_type(first[0], r)
}

/// Read one frame whose type byte was already consumed. Used by sources
/// that need to distinguish a clean end-of-stream from a mid-frame cut.
pub fn read_frame_after_type(ftype: u8, r: &mut impl Read) -> Result<Frame, ProtocolError> {
    let mut len_bytes = [0u8; 4];
    read_exact_or(r, &mut len_bytes, "a frame header")?;
    let len = u32::from_le_bytes(len_bytes);
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::PayloadTooLarge { got: len, max: MAX_PAYLOAD });
    }
    let mut payload = vec![0u8; len as usize];
    read_exact_or(r, &mut payload, "a frame payload")?;
    decode_payload(ftype, &payload)
}

/// Read the next frame, or `None` on a clean end-of-stream (EOF exactly at
/// a frame boundary).
pub fn read_frame_or_eof(r: &mut impl Read) -> Result<Option<Frame>, ProtocolError> {
    let mut first = [0u8; 1];
    loop {
        match r.read(&mut first) {
            Ok(0) => return Ok(None),
            Ok(_) => break,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(ProtocolError::Io(e)),
        }
    }
    read_frame_after_type(first[0], r).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquire::StreamKind;
    use rand::Rng;

    fn meta() -> StreamMeta {
        StreamMeta {
            name: "eeg".into(),
            kind: StreamKind::Eeg,
            channels: vec!["C3".into(), "C4".into()],
            srate: 250.0,
            units: "uV".into(),
        }
    }

    fn random_frame(rng: &mut impl Rng, t: &mut f64) -> Frame {
        match rng.gen_range(0..3u8) {
            0 => {
                let ch = rng.gen_range(1..5usize);
                Frame::Metadata(StreamMeta {
                    name: format!("s{}", rng.gen_range(0..100u32)),
                    kind: StreamKind::Eog,
                    channels: (0..ch).map(|i| format!("c{i}")).collect(),
                    srate: rng.gen_range(1.0..1000.0),
                    units: "uV".into(),
                })
            }
            1 => {
                let n = rng.gen_range(1..6usize);
                let ch = rng.gen_range(1..4usize);
                let mut ts = Vec::with_capacity(n);
                for _ in 0..n {
                    *t += rng.gen_range(0.001..0.01);
                    ts.push(*t);
                }
                let values =
                    Array2::from_shape_fn((n, ch), |_| rng.gen_range(-100.0..100.0));
                Frame::Chunk(SampleChunk::new(ts, values).unwrap())
            }
            _ => {
                *t += rng.gen_range(0.001..0.01);
                Frame::Event(EventRecord::new(
                    *t,
                    format!("tag{}", rng.gen_range(0..10u32)),
                    serde_json::json!({"k": rng.gen_range(0..100u32)}),
                ))
            }
        }
    }

    #[test]
    fn single_sample_single_channel_chunk_frame_is_25_bytes() {
        let chunk = SampleChunk::new(vec![1.5], ndarray::array![[42.0]]).unwrap();
        let mut buf = Vec::new();
        encode_chunk(&chunk, &mut buf).unwrap();
        assert_eq!(buf.len(), 25);
        assert_eq!(buf[0], FRAME_CHUNK);
        assert_eq!(u32::from_le_bytes(buf[1..5].try_into().unwrap()), 20);
    }

    #[test]
    fn ten_thousand_frames_round_trip_through_arbitrary_slicing() {
        let mut rng = crate::seed::rng(9, "protocol.roundtrip");
        let mut t = 0.0;
        let frames: Vec<Frame> = (0..10_000).map(|_| random_frame(&mut rng, &mut t)).collect();

        let mut wire = Vec::new();
        encode_preamble(&mut wire);
        for f in &frames {
            encode_frame(f, &mut wire).unwrap();
        }

        let mut reader = FrameReader::new();
        let mut decoded = Vec::with_capacity(frames.len());
        let mut pos = 0;
        while pos < wire.len() {
            let step = rng.gen_range(1..97usize).min(wire.len() - pos);
            reader.push(&wire[pos..pos + step]);
            pos += step;
            while let Some(f) = reader.next_frame().unwrap() {
                decoded.push(f);
            }
        }
        reader.finish().unwrap();
        assert_eq!(decoded.len(), frames.len());
        for (i, (d, f)) in decoded.iter().zip(&frames).enumerate() {
            assert_eq!(d, f, "first divergence at frame {i}");
        }
    }

    #[test]
    fn metadata_json_uses_the_declared_keys() {
        let mut buf = Vec::new();
        encode_metadata(&meta(), &mut buf).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&buf[5..]).unwrap();
        let obj = json.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["channels", "kind", "name", "srate", "units"]);
        assert_eq!(obj["kind"], "eeg");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut reader = FrameReader::new();
        reader.push(b"NBSXtrailing");
        let err = reader.next_frame().unwrap_err();
        assert!(matches!(err, ProtocolError::BadMagic { got } if &got == b"NBSX"));
    }

    #[test]
    fn unknown_frame_type_is_rejected() {
        let mut wire = Vec::new();
        encode_preamble(&mut wire);
        wire.push(0x7f);
        wire.extend_from_slice(&0u32.to_le_bytes());
        let mut reader = FrameReader::new();
        reader.push(&wire);
        let err = reader.next_frame().unwrap_err();
        assert!(matches!(err, ProtocolError::UnknownFrameType { got: 0x7f }));
    }

    #[test]
    fn truncated_stream_is_reported() {
        let mut wire = Vec::new();
        encode_preamble(&mut wire);
        encode_event(&EventRecord::new(1.0, "stimulus", serde_json::json!({})), &mut wire)
            .unwrap();
        let cut = &wire[..wire.len() - 3];

        // Incremental decoder: incomplete, then finish() flags it.
        let mut reader = FrameReader::new();
        reader.push(cut);
        assert!(reader.next_frame().unwrap().is_none());
        assert!(matches!(reader.finish().unwrap_err(), ProtocolError::Truncated { .. }));

        // Blocking decoder: same story at EOF.
        let mut r = io::Cursor::new(cut.to_vec());
        read_preamble(&mut r).unwrap();
        assert!(matches!(read_frame(&mut r).unwrap_err(), ProtocolError::Truncated { .. }));
    }

    #[test]
    fn oversized_length_header_is_rejected_without_allocating() {
        let mut wire = Vec::new();
        encode_preamble(&mut wire);
        wire.push(FRAME_CHUNK);
        wire.extend_from_slice(&u32::MAX.to_le_bytes());
        let mut reader = FrameReader::new();
        reader.push(&wire);
        let err = reader.next_frame().unwrap_err();
        assert!(matches!(err, ProtocolError::PayloadTooLarge { got: u32::MAX, .. }));
    }

    #[test]
    fn malformed_chunk_shapes_are_rejected() {
        // 4-byte count says 3 samples but the body holds 20 bytes.
        let mut payload = 3u32.to_le_bytes().to_vec();
        payload.extend_from_slice(&[0u8; 20]);
        let err = decode_payload(FRAME_CHUNK, &payload).unwrap_err();
        assert!(matches!(err, ProtocolError::BadPayload { frame: "chunk", .. }));

        let err = decode_payload(FRAME_CHUNK, &0u32.to_le_bytes()).unwrap_err();
        assert!(matches!(err, ProtocolError::BadPayload { frame: "chunk", .. }));
    }
}
