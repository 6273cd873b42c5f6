//! Protocol messages and their binary framing.
//!
//! A frame is a 4-byte big-endian length covering everything after it, a
//! 1-byte payload tag, a header (session id, sequence number, sender,
//! receiver) and the payload body. Integers in the body are little-endian;
//! ring elements are 8 bytes each, vectors carry a `u32` count and strings a
//! `u32` byte length.

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::mpc::Opening;
use crate::ring::RingElement;
use crate::sharing::TripleShare;

/// Largest frame accepted from the wire.
pub const MAX_FRAME: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyRole {
    P0,
    P1,
    P2,
    P3,
    /// Data owner `j`, 1-based.
    Client(u16),
}

impl PartyRole {
    fn code(self) -> (u8, u16) {
        match self {
            PartyRole::P0 => (0, 0),
            PartyRole::P1 => (1, 0),
            PartyRole::P2 => (2, 0),
            PartyRole::P3 => (3, 0),
            PartyRole::Client(j) => (4, j),
        }
    }

    fn from_code(kind: u8, index: u16) -> Option<Self> {
        Some(match kind {
            0 => PartyRole::P0,
            1 => PartyRole::P1,
            2 => PartyRole::P2,
            3 => PartyRole::P3,
            4 if index >= 1 => PartyRole::Client(index),
            _ => return None,
        })
    }
}

impl fmt::Display for PartyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyRole::Client(j) => write!(f, "C{j}"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitnessTag {
    Mse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    Other,
    TripleExhaustion,
    MagnitudeOverflow,
    Channel,
    Desync,
    DimensionMismatch,
}

impl ErrorKind {
    const ALL: [ErrorKind; 6] = [
        ErrorKind::Other,
        ErrorKind::TripleExhaustion,
        ErrorKind::MagnitudeOverflow,
        ErrorKind::Channel,
        ErrorKind::Desync,
        ErrorKind::DimensionMismatch,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Control {
    Start,
    Stop,
    Error { kind: ErrorKind, message: String },
}

/// One expression's shared fitness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitnessEntry {
    Valid(RingElement),
    /// A public value in the expression could not be encoded.
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Handshake { session_id: u64, role: PartyRole, ring_bits: u8, frac_bits: u8, config_hash: [u8; 32] },
    /// A client's share of its column block, row-major, plus the target if it holds it.
    ShareUpload { rows: u32, cols: u32, x: Vec<RingElement>, y: Option<Vec<RingElement>> },
    TripleRequest { count: u32 },
    TripleBatch(Vec<TripleShare>),
    EvalRequest { generation: u32, fitness: FitnessTag, expressions: Vec<String> },
    BeaverOpen(Opening),
    FitnessShare { generation: u32, entries: Vec<FitnessEntry> },
    /// Total sum of squares over `m`, disclosed by the target holder.
    PublicStat { sst_over_m: f64 },
    Control(Control),
}

impl Payload {
    pub fn tag(&self) -> u8 {
        match self {
            Payload::Handshake { .. } => 1,
            Payload::ShareUpload { .. } => 2,
            Payload::TripleRequest { .. } => 3,
            Payload::TripleBatch(_) => 4,
            Payload::EvalRequest { .. } => 5,
            Payload::BeaverOpen(_) => 6,
            Payload::FitnessShare { .. } => 7,
            Payload::PublicStat { .. } => 8,
            Payload::Control(_) => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payload::Handshake { .. } => "Handshake",
            Payload::ShareUpload { .. } => "ShareUpload",
            Payload::TripleRequest { .. } => "TripleRequest",
            Payload::TripleBatch(_) => "TripleBatch",
            Payload::EvalRequest { .. } => "EvalRequest",
            Payload::BeaverOpen(_) => "BeaverOpen",
            Payload::FitnessShare { .. } => "FitnessShare",
            Payload::PublicStat { .. } => "PublicStat",
            Payload::Control(_) => "Control",
        }
    }

    /// Every ring element carried by the payload.
    pub fn ring_elements(&self) -> Vec<RingElement> {
        match self {
            Payload::ShareUpload { x, y, .. } => x.iter().chain(y.iter().flatten()).copied().collect(),
            Payload::TripleBatch(ts) => ts.iter().flat_map(|t| [t.a, t.b, t.c]).collect(),
            Payload::BeaverOpen(o) => o.epsilon.iter().chain(&o.delta).copied().collect(),
            Payload::FitnessShare { entries, .. } => entries
                .iter()
                .filter_map(|e| match e {
                    FitnessEntry::Valid(v) => Some(*v),
                    FitnessEntry::Overflow => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub session_id: u64,
    /// Strictly increasing per ordered sender/receiver pair, starting at 1.
    pub sequence_no: u64,
    pub sender: PartyRole,
    pub receiver: PartyRole,
    pub payload: Payload,
}

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("collection fits a u32 count"));
    }
    fn role(&mut self, r: PartyRole) {
        let (kind, index) = r.code();
        self.u8(kind);
        self.u16(index);
    }
    fn elems(&mut self, v: &[RingElement]) {
        self.len(v.len());
        for e in v {
            self.u64(e.0);
        }
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| WireError::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
    fn count(&mut self, unit: usize) -> Result<usize, WireError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(WireError::Malformed(format!("count {n} exceeds frame")));
        }
        Ok(n)
    }
    fn role(&mut self) -> Result<PartyRole, WireError> {
        let (kind, index) = (self.u8()?, self.u16()?);
        PartyRole::from_code(kind, index).ok_or_else(|| WireError::Malformed(format!("bad role {kind}/{index}")))
    }
    fn elems(&mut self) -> Result<Vec<RingElement>, WireError> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64().map(RingElement)).collect()
    }
    fn str(&mut self) -> Result<String, WireError> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| WireError::Malformed("invalid utf-8".into()))
    }
}

/// Serializes a message into one frame, length prefix included.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let mut w = Writer(vec![0; 4]);
    w.u8(msg.payload.tag());
    w.u64(msg.session_id);
    w.u64(msg.sequence_no);
    w.role(msg.sender);
    w.role(msg.receiver);
    match &msg.payload {
        Payload::Handshake { session_id, role, ring_bits, frac_bits, config_hash } => {
            w.u64(*session_id);
            w.role(*role);
            w.u8(*ring_bits);
            w.u8(*frac_bits);
            w.0.extend_from_slice(config_hash);
        }
        Payload::ShareUpload { rows, cols, x, y } => {
            w.u32(*rows);
            w.u32(*cols);
            w.elems(x);
            match y {
                Some(y) => {
                    w.u8(1);
                    w.elems(y);
                }
                None => w.u8(0),
            }
        }
        Payload::TripleRequest { count } => w.u32(*count),
        Payload::TripleBatch(ts) => {
            w.len(ts.len());
            for t in ts {
                w.u64(t.id);
                w.u64(t.a.0);
                w.u64(t.b.0);
                w.u64(t.c.0);
            }
        }
        Payload::EvalRequest { generation, fitness, expressions } => {
            w.u32(*generation);
            w.u8(match fitness {
                FitnessTag::Mse => 0,
            });
            w.len(expressions.len());
            for e in expressions {
                w.str(e);
            }
        }
        Payload::BeaverOpen(o) => {
            w.u64(o.first_triple);
            w.elems(&o.epsilon);
            w.elems(&o.delta);
        }
        Payload::FitnessShare { generation, entries } => {
            w.u32(*generation);
            w.len(entries.len());
            for e in entries {
                match e {
                    FitnessEntry::Valid(v) => {
                        w.u8(0);
                        w.u64(v.0);
                    }
                    FitnessEntry::Overflow => {
                        w.u8(1);
                        w.u64(0);
                    }
                }
            }
        }
        Payload::PublicStat { sst_over_m } => w.u64(sst_over_m.to_bits()),
        Payload::Control(c) => match c {
            Control::Start => w.u8(0),
            Control::Stop => w.u8(1),
            Control::Error { kind, message } => {
                w.u8(2);
                w.u8(ErrorKind::ALL.iter().position(|k| k == kind).expect("listed") as u8);
                w.str(message);
            }
        },
    }
    let len = u32::try_from(w.0.len() - 4).expect("frame fits a u32 length");
    w.0[..4].copy_from_slice(&len.to_be_bytes());
    w.0
}

/// Parses a frame body: everything after the length prefix.
pub fn decode_body(body: &[u8]) -> Result<Message, WireError> {
    let mut r = Reader { buf: body, pos: 0 };
    let tag = r.u8()?;
    let session_id = r.u64()?;
    let sequence_no = r.u64()?;
    let sender = r.role()?;
    let receiver = r.role()?;
    let payload = match tag {
        1 => {
            let session_id = r.u64()?;
            let role = r.role()?;
            let ring_bits = r.u8()?;
            let frac_bits = r.u8()?;
            let config_hash = r.take(32)?.try_into().expect("32 bytes");
            Payload::Handshake { session_id, role, ring_bits, frac_bits, config_hash }
        }
        2 => {
            let rows = r.u32()?;
            let cols = r.u32()?;
            let x = r.elems()?;
            let y = match r.u8()? {
                0 => None,
                1 => Some(r.elems()?),
                b => return Err(WireError::Malformed(format!("bad option byte {b}"))),
            };
            Payload::ShareUpload { rows, cols, x, y }
        }
        3 => Payload::TripleRequest { count: r.u32()? },
        4 => {
            let n = r.count(32)?;
            let mut ts = Vec::with_capacity(n);
            for _ in 0..n {
                let id = r.u64()?;
                let (a, b, c) = (RingElement(r.u64()?), RingElement(r.u64()?), RingElement(r.u64()?));
                ts.push(TripleShare { id, a, b, c });
            }
            Payload::TripleBatch(ts)
        }
        5 => {
            let generation = r.u32()?;
            let fitness = match r.u8()? {
                0 => FitnessTag::Mse,
                b => return Err(WireError::Malformed(format!("unknown fitness tag {b}"))),
            };
            let n = r.count(4)?;
            let expressions = (0..n).map(|_| r.str()).collect::<Result<_, _>>()?;
            Payload::EvalRequest { generation, fitness, expressions }
        }
        6 => {
            let first_triple = r.u64()?;
            let epsilon = r.elems()?;
            let delta = r.elems()?;
            Payload::BeaverOpen(Opening { first_triple, epsilon, delta })
        }
        7 => {
            let generation = r.u32()?;
            let n = r.count(9)?;
            let mut entries = Vec::with_capacity(n);
            for _ in 0..n {
                let flag = r.u8()?;
                let v = r.u64()?;
                entries.push(match flag {
                    0 => FitnessEntry::Valid(RingElement(v)),
                    1 => FitnessEntry::Overflow,
                    b => return Err(WireError::Malformed(format!("bad fitness flag {b}"))),
                });
            }
            Payload::FitnessShare { generation, entries }
        }
        8 => Payload::PublicStat { sst_over_m: f64::from_bits(r.u64()?) },
        9 => Payload::Control(match r.u8()? {
            0 => Control::Start,
            1 => Control::Stop,
            2 => {
                let k = r.u8()? as usize;
                let kind = *ErrorKind::ALL.get(k).ok_or_else(|| WireError::Malformed(format!("error kind {k}")))?;
                Control::Error { kind, message: r.str()? }
            }
            b => return Err(WireError::Malformed(format!("control code {b}"))),
        }),
        t => return Err(WireError::Malformed(format!("unknown payload tag {t}"))),
    };
    if r.pos != body.len() {
        return Err(WireError::Malformed(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(Message { session_id, sequence_no, sender, receiver, payload })
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>, WireError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u32::from_be_bytes(len) as usize;
    if n == 0 || n > MAX_FRAME {
        return Err(WireError::Malformed(format!("frame length {n}")));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    decode_body(&body).map(Some)
}
