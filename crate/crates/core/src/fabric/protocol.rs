//! Framed wire protocol. A frame is `DRXP`, a message type byte, a
//! big-endian u32 payload length and the payload. A payload is a
//! big-endian u32 JSON length, a JSON header, then binary sections whose
//! offsets (relative to the end of the JSON) the header declares.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::record::{Counters, Episode, ExperienceRecord};
use super::store::Fetched;
use super::FabricError;
use crate::sim::{GrayImage, Observation, FEATURE_LEN};

pub const MAGIC: &[u8; 4] = b"DRXP";
pub const MAX_FRAME: usize = 64 << 20;

pub const APPEND_EPISODE: u8 = 0x01;
pub const DRAIN_REQUEST: u8 = 0x02;
pub const DRAIN_RESPONSE: u8 = 0x03;
pub const PUBLISH_CHECKPOINT: u8 = 0x04;
pub const FETCH_REQUEST: u8 = 0x05;
pub const FETCH_RESPONSE: u8 = 0x06;
pub const COUNTERS: u8 = 0x07;
pub const ERROR: u8 = 0x7F;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Rejected,
    InvalidCheckpoint,
    Protocol,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Append { corr: u64, records: Vec<ExperienceRecord> },
    DrainRequest { corr: u64, episodes: usize, wait_ms: u64 },
    DrainResponse { corr: u64, episodes: Option<Vec<Episode>> },
    Publish { corr: u64, checkpoint: Vec<u8> },
    FetchRequest { corr: u64, newer_than: Option<u64>, wait_ms: u64 },
    FetchResponse { corr: u64, fetched: Fetched },
    /// Counters query (no counters) or answer; an answer to a publish also
    /// carries the assigned version.
    Counters { corr: u64, counters: Option<Counters>, assigned_version: Option<u64> },
    Error { corr: u64, kind: ErrorKind, message: String },
}

impl Message {
    pub fn corr(&self) -> u64 {
        match *self {
            Message::Append { corr, .. }
            | Message::DrainRequest { corr, .. }
            | Message::DrainResponse { corr, .. }
            | Message::Publish { corr, .. }
            | Message::FetchRequest { corr, .. }
            | Message::FetchResponse { corr, .. }
            | Message::Counters { corr, .. }
            | Message::Error { corr, .. } => corr,
        }
    }

    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Append { .. } => APPEND_EPISODE,
            Message::DrainRequest { .. } => DRAIN_REQUEST,
            Message::DrainResponse { .. } => DRAIN_RESPONSE,
            Message::Publish { .. } => PUBLISH_CHECKPOINT,
            Message::FetchRequest { .. } => FETCH_REQUEST,
            Message::FetchResponse { .. } => FETCH_RESPONSE,
            Message::Counters { .. } => COUNTERS,
            Message::Error { .. } => ERROR,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Section {
    name: String,
    offset: usize,
    len: usize,
}

struct PayloadBuilder {
    header: Value,
    sections: Vec<Section>,
    binary: Vec<u8>,
}

impl PayloadBuilder {
    fn new(header: Value) -> Self {
        PayloadBuilder { header, sections: Vec::new(), binary: Vec::new() }
    }

    fn section(&mut self, name: &str, bytes: &[u8]) {
        self.sections.push(Section { name: name.into(), offset: self.binary.len(), len: bytes.len() });
        self.binary.extend_from_slice(bytes);
    }

    fn finish(mut self) -> Vec<u8> {
        if !self.sections.is_empty() {
            self.header["sections"] = serde_json::to_value(&self.sections).expect("sections serialise");
        }
        let json = serde_json::to_vec(&self.header).expect("header serialises");
        let mut out = Vec::with_capacity(4 + json.len() + self.binary.len());
        out.extend_from_slice(&(json.len() as u32).to_be_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&self.binary);
        out
    }
}

struct Payload<'a> {
    header: Value,
    binary: &'a [u8],
}

impl<'a> Payload<'a> {
    fn parse(bytes: &'a [u8]) -> Result<Self, FabricError> {
        let len = bytes.get(..4).ok_or_else(|| protocol("payload shorter than its JSON length"))?;
        let len = u32::from_be_bytes(len.try_into().expect("four bytes")) as usize;
        let json = bytes.get(4..4 + len).ok_or_else(|| protocol("JSON header overruns payload"))?;
        let header = serde_json::from_slice(json).map_err(|e| protocol(format!("JSON header: {e}")))?;
        Ok(Payload { header, binary: &bytes[4 + len..] })
    }

    fn section(&self, name: &str) -> Result<&'a [u8], FabricError> {
        let sections: Vec<Section> = serde_json::from_value(self.header.get("sections").cloned().unwrap_or(json!([])))
            .map_err(|e| protocol(format!("sections: {e}")))?;
        let s = sections.iter().find(|s| s.name == name).ok_or_else(|| protocol(format!("missing section `{name}`")))?;
        self.binary.get(s.offset..s.offset + s.len).ok_or_else(|| protocol(format!("section `{name}` out of bounds")))
    }

    fn field<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T, FabricError> {
        serde_json::from_value(self.header.get(key).cloned().unwrap_or(Value::Null))
            .map_err(|e| protocol(format!("field `{key}`: {e}")))
    }
}

fn protocol(msg: impl Into<String>) -> FabricError {
    FabricError::Protocol(msg.into())
}

#[derive(Serialize, Deserialize)]
struct RecordHeader {
    episode_id: u64,
    step_index: u32,
    action: u32,
    reward: f32,
    done: bool,
    log_prob: f32,
    value: f32,
    policy_version: u64,
    worker_id: u32,
    progress: f32,
    obs: usize,
    next_obs: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ObsLayout {
    Features,
    Image { width: usize, height: usize },
}

fn encode_records(b: &mut PayloadBuilder, records: &[ExperienceRecord]) -> Result<(), FabricError> {
    let mut table: Vec<Arc<Observation>> = Vec::new();
    let mut index: HashMap<*const Observation, usize> = HashMap::new();
    let mut slot = |o: &Arc<Observation>| {
        *index.entry(Arc::as_ptr(o)).or_insert_with(|| {
            table.push(o.clone());
            table.len() - 1
        })
    };
    let headers: Vec<RecordHeader> = records
        .iter()
        .map(|r| RecordHeader {
            episode_id: r.episode_id,
            step_index: r.step_index,
            action: r.action,
            reward: r.reward,
            done: r.done,
            log_prob: r.log_prob,
            value: r.value,
            policy_version: r.policy_version,
            worker_id: r.worker_id,
            progress: r.progress,
            obs: slot(&r.observation),
            next_obs: slot(&r.next_observation),
        })
        .collect();
    let layout = match table.first().map(|o| o.as_ref()) {
        Some(Observation::Image(img)) => ObsLayout::Image { width: img.width, height: img.height },
        _ => ObsLayout::Features,
    };
    let mut bin = Vec::new();
    for o in &table {
        match (o.as_ref(), &layout) {
            (Observation::Features(f), ObsLayout::Features) => f.iter().for_each(|v| bin.extend(v.to_le_bytes())),
            (Observation::Image(img), ObsLayout::Image { width, height })
                if img.width == *width && img.height == *height =>
            {
                bin.extend_from_slice(&img.data)
            }
            _ => return Err(protocol("observations of mixed layout in one batch")),
        }
    }
    b.header["records"] = serde_json::to_value(&headers).expect("records serialise");
    b.header["observations"] = json!({ "layout": layout, "count": table.len() });
    b.section("observations", &bin);
    Ok(())
}

fn decode_records(p: &Payload<'_>) -> Result<Vec<ExperienceRecord>, FabricError> {
    let headers: Vec<RecordHeader> = p.field("records")?;
    let obs_meta = p.header.get("observations").ok_or_else(|| protocol("missing observations"))?;
    let layout: ObsLayout = serde_json::from_value(obs_meta["layout"].clone()).map_err(|e| protocol(e.to_string()))?;
    let count = obs_meta["count"].as_u64().ok_or_else(|| protocol("missing observation count"))? as usize;
    let bin = p.section("observations")?;
    let item = match layout {
        ObsLayout::Features => FEATURE_LEN * 4,
        ObsLayout::Image { width, height } => width * height,
    };
    if bin.len() != item * count {
        return Err(protocol(format!("observation section holds {} bytes, expected {}", bin.len(), item * count)));
    }
    let table: Vec<Arc<Observation>> = bin
        .chunks_exact(item.max(1))
        .take(count)
        .map(|c| {
            Arc::new(match layout {
                ObsLayout::Features => {
                    let mut f = [0.0f32; FEATURE_LEN];
                    for (v, b) in f.iter_mut().zip(c.chunks_exact(4)) {
                        *v = f32::from_le_bytes(b.try_into().expect("four bytes"));
                    }
                    Observation::Features(f)
                }
                ObsLayout::Image { width, height } => Observation::Image(GrayImage { width, height, data: c.to_vec() }),
            })
        })
        .collect();
    let get = |i: usize| table.get(i).cloned().ok_or_else(|| protocol(format!("observation index {i} out of range")));
    headers
        .into_iter()
        .map(|h| {
            Ok(ExperienceRecord {
                episode_id: h.episode_id,
                step_index: h.step_index,
                observation: get(h.obs)?,
                action: h.action,
                reward: h.reward,
                next_observation: get(h.next_obs)?,
                done: h.done,
                log_prob: h.log_prob,
                value: h.value,
                policy_version: h.policy_version,
                worker_id: h.worker_id,
                progress: h.progress,
            })
        })
        .collect()
}

/// Serializes a message into a complete frame.
pub fn encode(msg: &Message) -> Result<Vec<u8>, FabricError> {
    let corr = msg.corr();
    let payload = match msg {
        Message::Append { records, .. } => {
            let mut b = PayloadBuilder::new(json!({ "corr": corr }));
            encode_records(&mut b, records)?;
            b.finish()
        }
        Message::DrainRequest { episodes, wait_ms, .. } => {
            PayloadBuilder::new(json!({ "corr": corr, "episodes": episodes, "wait_ms": wait_ms })).finish()
        }
        Message::DrainResponse { episodes, .. } => match episodes {
            None => PayloadBuilder::new(json!({ "corr": corr, "ready": false })).finish(),
            Some(eps) => {
                let lens: Vec<usize> = eps.iter().map(Episode::len).collect();
                let mut b = PayloadBuilder::new(json!({ "corr": corr, "ready": true, "episode_lengths": lens }));
                let all: Vec<ExperienceRecord> = eps.iter().flat_map(|e| e.records.iter().cloned()).collect();
                encode_records(&mut b, &all)?;
                b.finish()
            }
        },
        Message::Publish { checkpoint, .. } => {
            let mut b = PayloadBuilder::new(json!({ "corr": corr }));
            b.section("checkpoint", checkpoint);
            b.finish()
        }
        Message::FetchRequest { newer_than, wait_ms, .. } => {
            PayloadBuilder::new(json!({ "corr": corr, "newer_than": newer_than, "wait_ms": wait_ms })).finish()
        }
        Message::FetchResponse { fetched, .. } => match fetched {
            Fetched::Empty => PayloadBuilder::new(json!({ "corr": corr, "status": "empty" })).finish(),
            Fetched::Unchanged => PayloadBuilder::new(json!({ "corr": corr, "status": "unchanged" })).finish(),
            Fetched::Checkpoint { version, bytes } => {
                let mut b = PayloadBuilder::new(json!({ "corr": corr, "status": "ok", "version": version }));
                b.section("checkpoint", bytes);
                b.finish()
            }
        },
        Message::Counters { counters, assigned_version, .. } => PayloadBuilder::new(
            json!({ "corr": corr, "counters": counters, "assigned_version": assigned_version }),
        )
        .finish(),
        Message::Error { kind, message, .. } => {
            PayloadBuilder::new(json!({ "corr": corr, "kind": kind, "message": message })).finish()
        }
    };
    if payload.len() > MAX_FRAME {
        return Err(FabricError::FrameTooLarge(payload.len()));
    }
    let mut frame = Vec::with_capacity(9 + payload.len());
    frame.extend_from_slice(MAGIC);
    frame.push(msg.type_byte());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

/// Parses one frame's payload given its type byte.
pub fn decode(kind: u8, payload: &[u8]) -> Result<Message, FabricError> {
    let p = Payload::parse(payload)?;
    let corr: u64 = p.field("corr")?;
    Ok(match kind {
        APPEND_EPISODE => Message::Append { corr, records: decode_records(&p)? },
        DRAIN_REQUEST => Message::DrainRequest { corr, episodes: p.field("episodes")?, wait_ms: p.field("wait_ms")? },
        DRAIN_RESPONSE => {
            let episodes = if p.field::<bool>("ready")? {
                let lens: Vec<usize> = p.field("episode_lengths")?;
                let mut records = decode_records(&p)?.into_iter();
                let eps: Vec<Episode> =
                    lens.iter().map(|&n| Episode { records: records.by_ref().take(n).collect() }).collect();
                if records.next().is_some() || eps.iter().zip(&lens).any(|(e, &n)| e.len() != n) {
                    return Err(protocol("episode lengths disagree with records"));
                }
                Some(eps)
            } else {
                None
            };
            Message::DrainResponse { corr, episodes }
        }
        PUBLISH_CHECKPOINT => Message::Publish { corr, checkpoint: p.section("checkpoint")?.to_vec() },
        FETCH_REQUEST => {
            Message::FetchRequest { corr, newer_than: p.field("newer_than")?, wait_ms: p.field("wait_ms")? }
        }
        FETCH_RESPONSE => {
            let fetched = match p.field::<String>("status")?.as_str() {
                "empty" => Fetched::Empty,
                "unchanged" => Fetched::Unchanged,
                "ok" => Fetched::Checkpoint {
                    version: p.field("version")?,
                    bytes: Arc::new(p.section("checkpoint")?.to_vec()),
                },
                s => return Err(protocol(format!("unknown fetch status `{s}`"))),
            };
            Message::FetchResponse { corr, fetched }
        }
        COUNTERS => {
            Message::Counters { corr, counters: p.field("counters")?, assigned_version: p.field("assigned_version")? }
        }
        ERROR => Message::Error { corr, kind: p.field("kind")?, message: p.field("message")? },
        other => return Err(protocol(format!("unknown message type {other:#04x}"))),
    })
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<(), FabricError> {
    w.write_all(&encode(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream before a frame.
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>, FabricError> {
    let mut head = [0u8; 9];
    let mut got = 0;
    while got < head.len() {
        match r.read(&mut head[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(protocol("stream ended inside a frame header")),
            n => got += n,
        }
    }
    if &head[..4] != MAGIC {
        return Err(protocol("bad frame magic"));
    }
    let len = u32::from_be_bytes(head[5..9].try_into().expect("four bytes")) as usize;
    if len > MAX_FRAME {
        return Err(FabricError::FrameTooLarge(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    decode(head[4], &payload).map(Some)
}
