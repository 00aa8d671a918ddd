//! Timed trace entries and their pairing into durations.
//!
//! A service interaction leaves four stamps (request sent and received, answer
//! sent and received); a topic publication leaves one publish stamp plus a
//! receive and a handler-done stamp at every subscriber. Entries recorded at
//! different nodes are matched through the correlation id the caller or
//! publisher assigns.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    SvcReqSend,
    SvcReqRecv,
    SvcAnsSend,
    SvcAnsRecv,
    TopPub,
    TopRecv,
    TopDone,
}

impl TraceKind {
    pub const ALL: [TraceKind; 7] = [
        TraceKind::SvcReqSend,
        TraceKind::SvcReqRecv,
        TraceKind::SvcAnsSend,
        TraceKind::SvcAnsRecv,
        TraceKind::TopPub,
        TraceKind::TopRecv,
        TraceKind::TopDone,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::SvcReqSend => "svc_req_send",
            TraceKind::SvcReqRecv => "svc_req_recv",
            TraceKind::SvcAnsSend => "svc_ans_send",
            TraceKind::SvcAnsRecv => "svc_ans_recv",
            TraceKind::TopPub => "top_pub",
            TraceKind::TopRecv => "top_recv",
            TraceKind::TopDone => "top_done",
        }
    }

    pub fn is_service(self) -> bool {
        matches!(
            self,
            TraceKind::SvcReqSend | TraceKind::SvcReqRecv | TraceKind::SvcAnsSend | TraceKind::SvcAnsRecv
        )
    }
}

impl std::str::FromStr for TraceKind {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TraceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| TraceError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: TraceKind,
    pub caller: String,
    pub channel: String,
    pub observer: String,
    #[serde(rename = "corr")]
    pub corr_id: u64,
    /// Seconds.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DurationKind {
    ReqComm,
    SvcExec,
    AnsComm,
    BcastComm,
    HandlerTime,
}

impl fmt::Display for DurationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DurationKind::ReqComm => "ReqComm",
            DurationKind::SvcExec => "SvcExec",
            DurationKind::AnsComm => "AnsComm",
            DurationKind::BcastComm => "BcastComm",
            DurationKind::HandlerTime => "HandlerTime",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationSample {
    pub kind: DurationKind,
    pub channel: String,
    pub value: f64,
    pub corr_id: u64,
}

impl DurationSample {
    /// The `channel:Kind` key used by stats files and pipeline references.
    pub fn key(&self) -> String {
        format!("{}:{}", self.channel, self.kind)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace record: field `{field}`: {message}")]
    Malformed { field: String, message: String },
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
    #[error("negative timestamp {0}")]
    NegativeTimestamp(f64),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<TraceError>,
    },
    #[error("duplicate trace entries: {}", .0.join(", "))]
    Duplicates(Vec<String>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Deserialize)]
struct RawEvent {
    kind: Option<String>,
    caller: Option<String>,
    channel: Option<String>,
    observer: Option<String>,
    corr: Option<serde_json::Value>,
    t: Option<serde_json::Value>,
}

fn missing(field: &str) -> TraceError {
    TraceError::Malformed { field: field.into(), message: "missing".into() }
}

/// Parses one JSON Lines record.
pub fn parse_trace_event(line: &str) -> Result<TraceEvent, TraceError> {
    let raw: RawEvent = serde_json::from_str(line)
        .map_err(|e| TraceError::Malformed { field: "<record>".into(), message: e.to_string() })?;
    let kind: TraceKind = raw.kind.ok_or_else(|| missing("kind"))?.parse()?;
    let corr = raw.corr.ok_or_else(|| missing("corr"))?;
    let corr_id = corr.as_u64().ok_or_else(|| TraceError::Malformed {
        field: "corr".into(),
        message: format!("expected a nonnegative integer, found {corr}"),
    })?;
    let t_val = raw.t.ok_or_else(|| missing("t"))?;
    let t = t_val.as_f64().ok_or_else(|| TraceError::Malformed {
        field: "t".into(),
        message: format!("expected a number, found {t_val}"),
    })?;
    if t < 0.0 {
        return Err(TraceError::NegativeTimestamp(t));
    }
    Ok(TraceEvent {
        kind,
        caller: raw.caller.ok_or_else(|| missing("caller"))?,
        channel: raw.channel.ok_or_else(|| missing("channel"))?,
        observer: raw.observer.ok_or_else(|| missing("observer"))?,
        corr_id,
        t,
    })
}

pub fn format_trace_event(e: &TraceEvent) -> String {
    serde_json::to_string(e).expect("trace event serializes")
}

/// Writes one record per event in input order and returns the record count.
pub fn write_trace<W: Write>(events: &[TraceEvent], mut sink: W) -> Result<usize, TraceError> {
    for e in events {
        writeln!(sink, "{}", format_trace_event(e))?;
    }
    sink.flush()?;
    Ok(events.len())
}

/// A trace log: per-node clock offsets from the optional header plus events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub offsets: BTreeMap<String, f64>,
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    /// Events with each observer's clock offset subtracted.
    pub fn corrected_events(&self) -> Vec<TraceEvent> {
        self.events
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.t -= self.offsets.get(&e.observer).copied().unwrap_or(0.0);
                e
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct HeaderLine {
    header: Header,
}

#[derive(Deserialize)]
struct Header {
    #[serde(default)]
    offsets: BTreeMap<String, f64>,
}

pub fn read_trace<R: BufRead>(reader: R) -> Result<TraceLog, TraceError> {
    let mut log = TraceLog::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.contains("\"header\"") {
            let h: HeaderLine = serde_json::from_str(&line).map_err(|e| TraceError::AtLine {
                line: 1,
                source: Box::new(TraceError::Malformed {
                    field: "header".into(),
                    message: e.to_string(),
                }),
            })?;
            log.offsets = h.header.offsets;
            continue;
        }
        let event = parse_trace_event(&line)
            .map_err(|e| TraceError::AtLine { line: i + 1, source: Box::new(e) })?;
        log.events.push(event);
    }
    Ok(log)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing {
    pub samples: Vec<DurationSample>,
    pub unpaired: Vec<TraceEvent>,
}

impl Pairing {
    /// Samples whose value is negative, i.e. evidence of clock skew or
    /// misordered stamps.
    pub fn negative_samples(&self) -> impl Iterator<Item = &DurationSample> {
        self.samples.iter().filter(|s| s.value < 0.0)
    }
}

/// Matches entries by (channel, caller, correlation id) and emits the five
/// kinds of durations. Durations are always completion stamp minus start
/// stamp. Entries that contribute to no duration are returned as unpaired,
/// in encounter order.
pub fn pair_events(events: &[TraceEvent]) -> Result<Pairing, TraceError> {
    let mut seen: HashMap<(TraceKind, &str, &str, u64, &str), usize> = HashMap::new();
    let mut dups = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let key = (e.kind, e.channel.as_str(), e.caller.as_str(), e.corr_id, e.observer.as_str());
        if seen.insert(key, i).is_some() {
            dups.push(format!(
                "{} channel={} caller={} corr={} observer={}",
                e.kind.as_str(),
                e.channel,
                e.caller,
                e.corr_id,
                e.observer
            ));
        }
    }
    if !dups.is_empty() {
        return Err(TraceError::Duplicates(dups));
    }

    // Interactions in order of first appearance.
    let mut order: Vec<(bool, &str, &str, u64)> = Vec::new();
    let mut groups: HashMap<(bool, &str, &str, u64), Vec<usize>> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        let key = (e.kind.is_service(), e.channel.as_str(), e.caller.as_str(), e.corr_id);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }

    let mut used = vec![false; events.len()];
    let mut samples = Vec::new();
    for key in order {
        let members = &groups[&key];
        let (is_service, channel, _, corr) = key;
        let mut emit = |kind, start: usize, end: usize, used: &mut Vec<bool>| {
            used[start] = true;
            used[end] = true;
            samples.push(DurationSample {
                kind,
                channel: channel.to_string(),
                value: events[end].t - events[start].t,
                corr_id: corr,
            });
        };
        let find = |kind: TraceKind| members.iter().copied().find(|&i| events[i].kind == kind);
        if is_service {
            let send = find(TraceKind::SvcReqSend);
            let recv = find(TraceKind::SvcReqRecv);
            let ans = find(TraceKind::SvcAnsSend);
            let back = find(TraceKind::SvcAnsRecv);
            if let (Some(a), Some(b)) = (send, recv) {
                emit(DurationKind::ReqComm, a, b, &mut used);
            }
            if let (Some(a), Some(b)) = (recv, ans) {
                emit(DurationKind::SvcExec, a, b, &mut used);
            }
            if let (Some(a), Some(b)) = (ans, back) {
                emit(DurationKind::AnsComm, a, b, &mut used);
            }
        } else {
            let publish = find(TraceKind::TopPub);
            let recvs: Vec<usize> =
                members.iter().copied().filter(|&i| events[i].kind == TraceKind::TopRecv).collect();
            for r in recvs {
                if let Some(p) = publish {
                    emit(DurationKind::BcastComm, p, r, &mut used);
                }
                let done = members.iter().copied().find(|&i| {
                    events[i].kind == TraceKind::TopDone && events[i].observer == events[r].observer
                });
                if let Some(d) = done {
                    emit(DurationKind::HandlerTime, r, d, &mut used);
                }
            }
        }
    }
    let unpaired = events
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(e, _)| e.clone())
        .collect();
    Ok(Pairing { samples, unpaired })
}
