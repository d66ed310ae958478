//! Message channel abstraction between the two server parties and the dealer,
//! with byte/round accounting per protocol phase.
//!
//! Every backend must move frames produced by [`encode_frame`] verbatim, so
//! that an in-process run and a TCP run with the same seed produce
//! byte-identical transcripts.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use sha2::{Digest, Sha256};

use crate::error::ChannelError;

/// Frame layout: 4-byte little-endian payload length, 2-byte tag, payload.
pub const FRAME_OVERHEAD: usize = 6;

/// Hard cap on a single frame payload.
pub const MAX_FRAME: usize = 1 << 30;

/// Message tags. One per protocol message kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tag(pub u16);

pub mod tags {
    use super::Tag;

    /// Beaver-multiplication mask exchange (e, f).
    pub const MUL_MASKS: Tag = Tag(0x0001);
    /// Reconstruction: a party ships its share of an opened value.
    pub const OPEN_SHARE: Tag = Tag(0x0002);
    /// Garbled circuit payload (tables, labels, decode maps).
    pub const GARBLED: Tag = Tag(0x0010);
    /// Evaluator returns output labels destined for the garbler.
    pub const OUT_LABELS: Tag = Tag(0x0011);
    /// Garbler -> dealer: label pairs for ideal OT.
    pub const OT_LABELS: Tag = Tag(0x0020);
    /// Evaluator -> dealer: choice bits for ideal OT.
    pub const OT_CHOICES: Tag = Tag(0x0021);
    /// Dealer -> evaluator: selected labels.
    pub const OT_RESULT: Tag = Tag(0x0022);
    /// Party -> dealer: request a batch of multiplication triples.
    pub const TRIPLE_REQUEST: Tag = Tag(0x0030);
    /// Dealer -> party: triple batch.
    pub const TRIPLE_BATCH: Tag = Tag(0x0031);
    /// Transport self-test echo.
    pub const ECHO: Tag = Tag(0x00fe);
}

/// Blocking, in-order, exactly-once message channel to one peer.
pub trait Channel {
    fn send(&mut self, tag: Tag, payload: &[u8]) -> Result<(), ChannelError>;
    fn recv(&mut self, tag: Tag) -> Result<Vec<u8>, ChannelError>;
}

/// Encodes one frame. All backends ship exactly these bytes.
pub fn encode_frame(tag: Tag, payload: &[u8]) -> Result<Vec<u8>, ChannelError> {
    if payload.len() > MAX_FRAME {
        return Err(ChannelError::Oversize(payload.len()));
    }
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&tag.0.to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits a frame back into tag and payload.
pub fn decode_frame(frame: &[u8]) -> Result<(Tag, &[u8]), ChannelError> {
    if frame.len() < FRAME_OVERHEAD {
        return Err(ChannelError::Corrupt);
    }
    let len = u32::from_le_bytes([frame[0], frame[1], frame[2], frame[3]]) as usize;
    if len > MAX_FRAME {
        return Err(ChannelError::Oversize(len));
    }
    let tag = Tag(u16::from_le_bytes([frame[4], frame[5]]));
    if frame.len() != FRAME_OVERHEAD + len {
        return Err(ChannelError::Corrupt);
    }
    Ok((tag, &frame[FRAME_OVERHEAD..]))
}

/// Protocol phase used for metric attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Setup,
    Preprocess,
    Initialise,
    Query,
    Update,
    /// Secure kNN sub-module: distance rounds plus the SortShuffle circuit.
    Knn,
    Other,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::Preprocess => "preprocess",
            Phase::Initialise => "initialise",
            Phase::Query => "query",
            Phase::Update => "update",
            Phase::Knn => "knn",
            Phase::Other => "other",
        }
    }
}

/// Byte and round counters, per phase and total.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelMetrics {
    pub bytes_sent: u64,
    pub rounds: u64,
    pub per_phase: BTreeMap<&'static str, (u64, u64)>,
}

impl ChannelMetrics {
    fn record(&mut self, phase: Phase, bytes: u64) {
        self.bytes_sent += bytes;
        self.rounds += 1;
        let e = self.per_phase.entry(phase.name()).or_insert((0, 0));
        e.0 += bytes;
        e.1 += 1;
    }

    /// Phase totals must sum to session totals.
    pub fn consistent(&self) -> bool {
        let (b, r) = self
            .per_phase
            .values()
            .fold((0u64, 0u64), |(b, r), (pb, pr)| (b + pb, r + pr));
        b == self.bytes_sent && r == self.rounds
    }
}

/// Wraps any channel with metric accounting and a running transcript hash of
/// everything sent.
pub struct Metered<C> {
    inner: C,
    phase: Phase,
    metrics: ChannelMetrics,
    transcript: Sha256,
}

impl<C: Channel> Metered<C> {
    pub fn new(inner: C) -> Self {
        Metered {
            inner,
            phase: Phase::Setup,
            metrics: ChannelMetrics::default(),
            transcript: Sha256::new_with_prefix(b"ppod-transcript"),
        }
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn metrics(&self) -> &ChannelMetrics {
        &self.metrics
    }

    /// Hash of every frame sent so far.
    pub fn transcript_hash(&self) -> [u8; 32] {
        self.transcript.clone().finalize().into()
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Channel> Channel for Metered<C> {
    fn send(&mut self, tag: Tag, payload: &[u8]) -> Result<(), ChannelError> {
        let frame = encode_frame(tag, payload)?;
        self.metrics.record(self.phase, frame.len() as u64);
        self.transcript.update(&frame);
        self.inner.send(tag, payload)
    }

    fn recv(&mut self, tag: Tag) -> Result<Vec<u8>, ChannelError> {
        self.inner.recv(tag)
    }
}
