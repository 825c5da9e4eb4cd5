//! Trace events and the `#agingtrace v1` line format.
//!
//! After the mandatory header line each record is one JSON object per line
//! with the keys `seq`, `cycle`, `kind`, `dst`, `srcs`, `addr`, `data`.
//! Optional keys are omitted when absent, registers are written as
//! `class:index` and `addr`/`data` as `0x`-prefixed hex:
//!
//! ```text
//! #agingtrace v1
//! {"seq":0,"cycle":0,"kind":"Load","dst":"gpr:3","srcs":["gpr:1"],"addr":"0x10000040"}
//! {"seq":1,"cycle":0,"kind":"Store","srcs":["gpr:1","gpr:3"],"addr":"0x10000048","data":"0xdeadbeef"}
//! ```
//!
//! Blank lines and `#` comment lines after the header are skipped.

mod synth;

pub use synth::{
    ControlWrites, ProfileKind, StoreData, SyntheticTrace, WorkloadProfile, CODE_BASE,
    CONTROL_REGS, DATA_BASE,
};

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER: &str = "#agingtrace v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: missing or wrong header (expected `{HEADER}`)")]
    Header { line: usize },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: {kind:?} record lacks `{field}`")]
    MissingField {
        line: usize,
        kind: OpKind,
        field: &'static str,
    },
    #[error("line {line}: {msg}")]
    Order { line: usize, msg: String },
    #[error("profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    IntAlu,
    FpAddSub,
    FpMulDiv,
    Branch,
    Load,
    Store,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::IntAlu,
        OpKind::FpAddSub,
        OpKind::FpMulDiv,
        OpKind::Branch,
        OpKind::Load,
        OpKind::Store,
    ];

    pub fn is_fp(self) -> bool {
        matches!(self, OpKind::FpAddSub | OpKind::FpMulDiv)
    }

    pub fn is_mem(self) -> bool {
        matches!(self, OpKind::Load | OpKind::Store)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegClass {
    Gpr,
    FpVec,
    Control,
    Mask,
    Segment,
    Temp,
}

impl RegClass {
    pub const ALL: [RegClass; 6] = [
        RegClass::Gpr,
        RegClass::FpVec,
        RegClass::Control,
        RegClass::Mask,
        RegClass::Segment,
        RegClass::Temp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegClass::Gpr => "gpr",
            RegClass::FpVec => "fpvec",
            RegClass::Control => "control",
            RegClass::Mask => "mask",
            RegClass::Segment => "segment",
            RegClass::Temp => "temp",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegId {
    pub class: RegClass,
    pub index: u16,
}

impl RegId {
    pub fn new(class: RegClass, index: u16) -> Self {
        Self { class, index }
    }
}

impl fmt::Display for RegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.class.name(), self.index)
    }
}

impl FromStr for RegId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (class, index) = s
            .split_once(':')
            .ok_or_else(|| format!("register `{s}` is not `class:index`"))?;
        let class = RegClass::ALL
            .into_iter()
            .find(|c| c.name() == class)
            .ok_or_else(|| format!("unknown register class `{class}`"))?;
        let index = index
            .parse()
            .map_err(|_| format!("bad register index in `{s}`"))?;
        Ok(RegId { class, index })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub cycle: u64,
    pub kind: OpKind,
    pub dst: Option<RegId>,
    pub srcs: Vec<RegId>,
    pub addr: Option<u64>,
    pub data: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    seq: u64,
    cycle: u64,
    kind: OpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dst: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    srcs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    addr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<String>,
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("`{s}` lacks 0x prefix"))?;
    u64::from_str_radix(digits, 16).map_err(|e| format!("`{s}`: {e}"))
}

impl TraceEvent {
    fn to_record(&self) -> Record {
        Record {
            seq: self.seq,
            cycle: self.cycle,
            kind: self.kind,
            dst: self.dst.map(|r| r.to_string()),
            srcs: self.srcs.iter().map(|r| r.to_string()).collect(),
            addr: self.addr.map(|a| format!("{a:#x}")),
            data: self.data.map(|d| format!("{d:#x}")),
        }
    }

    fn from_record(r: Record) -> Result<Self, String> {
        Ok(TraceEvent {
            seq: r.seq,
            cycle: r.cycle,
            kind: r.kind,
            dst: r.dst.as_deref().map(str::parse).transpose()?,
            srcs: r.srcs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
            addr: r.addr.as_deref().map(parse_hex).transpose()?,
            data: r.data.as_deref().map(parse_hex).transpose()?,
        })
    }

    fn missing_field(&self) -> Option<&'static str> {
        match self.kind {
            OpKind::Load if self.addr.is_none() => Some("addr"),
            OpKind::Store if self.addr.is_none() => Some("addr"),
            OpKind::Store if self.data.is_none() => Some("data"),
            _ => None,
        }
    }
}

pub fn write_header<W: Write>(mut w: W) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")
}

pub fn write_event<W: Write>(mut w: W, ev: &TraceEvent) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, &ev.to_record())?;
    w.write_all(b"\n")
}

/// Writes the header followed by every event. Returns the event count.
pub fn write_trace<W, I>(mut w: W, events: I) -> std::io::Result<u64>
where
    W: Write,
    I: IntoIterator<Item = TraceEvent>,
{
    write_header(&mut w)?;
    let mut n = 0;
    for ev in events {
        write_event(&mut w, &ev)?;
        n += 1;
    }
    Ok(n)
}

/// Streaming, validating reader. Stops after the first error.
pub struct TraceReader<R> {
    input: R,
    line_no: usize,
    buf: String,
    header_seen: bool,
    prev: Option<(u64, u64)>,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            buf: String::new(),
            header_seen: false,
            prev: None,
            done: false,
        }
    }

    fn next_event(&mut self) -> Result<Option<TraceEvent>, TraceError> {
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if !self.header_seen {
                if line.trim_end() != HEADER {
                    return Err(TraceError::Header { line: self.line_no });
                }
                self.header_seen = true;
                continue;
            }
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let text = trimmed.to_owned();
            return self.parse(&text).map(Some);
        }
    }

    fn parse(&mut self, text: &str) -> Result<TraceEvent, TraceError> {
        let line = self.line_no;
        let record: Record = serde_json::from_str(text).map_err(|e| TraceError::Malformed {
            line,
            msg: e.to_string(),
        })?;
        let ev =
            TraceEvent::from_record(record).map_err(|msg| TraceError::Malformed { line, msg })?;
        if let Some(field) = ev.missing_field() {
            return Err(TraceError::MissingField {
                line,
                kind: ev.kind,
                field,
            });
        }
        if let Some((seq, cycle)) = self.prev {
            if ev.seq <= seq {
                return Err(TraceError::Order {
                    line,
                    msg: format!("seq {} not greater than previous {seq}", ev.seq),
                });
            }
            if ev.cycle < cycle {
                return Err(TraceError::Order {
                    line,
                    msg: format!("cycle {} before previous {cycle}", ev.cycle),
                });
            }
        }
        self.prev = Some((ev.seq, ev.cycle));
        Ok(ev)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceEvent, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_event() {
            Ok(Some(ev)) => Some(Ok(ev)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceEvent>, TraceError> {
    TraceReader::new(input).collect()
}
