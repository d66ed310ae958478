//! Error types shared across the engine.

use alloc::string::String;
use core::fmt;

/// Failures raised by channels and transports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelError {
    /// Peer hung up or the transport timed out.
    Disconnected,
    /// A frame arrived with a different tag than the caller expected.
    TagMismatch { expected: u16, got: u16 },
    /// Frame length exceeds the hard cap.
    Oversize(usize),
    /// Frame bytes could not be parsed.
    Corrupt,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::Disconnected => write!(f, "channel disconnected"),
            ChannelError::TagMismatch { expected, got } => {
                write!(f, "tag mismatch: expected {expected:#06x}, got {got:#06x}")
            }
            ChannelError::Oversize(n) => write!(f, "frame of {n} bytes exceeds limit"),
            ChannelError::Corrupt => write!(f, "corrupt frame"),
        }
    }
}

/// Engine-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A secret or parameter is outside the ring `Z_{2^l}`.
    OutOfRange,
    /// Shares with different bitwidths were combined.
    BitwidthMismatch,
    /// Two shares of the same party were combined where both halves were needed.
    PartyMismatch,
    /// The triple pool ran dry and no dealer is attached.
    PoolExhausted,
    /// Points of different dimensionality were mixed.
    DimensionMismatch,
    /// A parameter violates a precondition (message names it).
    Parameter(String),
    /// Circuit failed structural validation.
    MalformedCircuit(String),
    /// A garbled row or decoded label failed its integrity check.
    Integrity,
    /// A Derandomise matrix row had zero or multiple matches.
    PairingIntegrity,
    /// A cleartext decode was requested for a bundle this party may not open.
    UnauthorizedDecode,
    /// The requested execution mode is not available (e.g. real OT).
    UnsupportedMode,
    /// Transport failure.
    Channel(ChannelError),
    /// Protocol-level desynchronisation or malformed peer message.
    Protocol(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfRange => write!(f, "value out of ring range"),
            Error::BitwidthMismatch => write!(f, "share bitwidth mismatch"),
            Error::PartyMismatch => write!(f, "share party mismatch"),
            Error::PoolExhausted => write!(f, "beaver triple pool exhausted"),
            Error::DimensionMismatch => write!(f, "point dimensionality mismatch"),
            Error::Parameter(m) => write!(f, "invalid parameter: {m}"),
            Error::MalformedCircuit(m) => write!(f, "malformed circuit: {m}"),
            Error::Integrity => write!(f, "garbled circuit integrity check failed"),
            Error::PairingIntegrity => write!(f, "derandomise pairing integrity failure"),
            Error::UnauthorizedDecode => write!(f, "decode not authorized for this destination"),
            Error::UnsupportedMode => write!(f, "execution mode not supported in this build"),
            Error::Channel(e) => write!(f, "channel error: {e}"),
            Error::Protocol(m) => write!(f, "protocol error: {m}"),
        }
    }
}

impl From<ChannelError> for Error {
    fn from(e: ChannelError) -> Self {
        Error::Channel(e)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

#[cfg(feature = "std")]
impl std::error::Error for ChannelError {}

pub type Result<T> = core::result::Result<T, Error>;
