//! Oblivious transfer for evaluator input labels.
//!
//! Only the dealer-assisted ideal functionality is implemented: the garbler
//! ships both labels of every evaluator input wire to the dealer, the
//! evaluator ships its choice bits, and the dealer returns the selected
//! labels. The dealer never sees the circuit, the evaluator never sees the
//! off-path labels, and the garbler never sees the choices. A cryptographic
//! OT backend can be slotted in behind [`OtMode::Real`] later; selecting it
//! today fails fast rather than silently downgrading.

use alloc::vec::Vec;

use crate::channel::{tags, Channel};
use crate::error::{Error, Result};
use crate::garble::{Label, LABEL_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OtMode {
    #[default]
    Ideal,
    Real,
}

/// Garbler side: hand the dealer one (zero, one) label pair per wire.
pub fn send_label_pairs<C: Channel>(
    mode: OtMode,
    dealer: &mut C,
    pairs: &[(Label, Label)],
) -> Result<()> {
    if mode == OtMode::Real {
        return Err(Error::UnsupportedMode);
    }
    let mut msg = Vec::with_capacity(4 + pairs.len() * 2 * LABEL_BYTES);
    msg.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
    for &(k0, k1) in pairs {
        msg.extend_from_slice(&k0.to_le_bytes());
        msg.extend_from_slice(&k1.to_le_bytes());
    }
    dealer.send(tags::OT_LABELS, &msg)?;
    Ok(())
}

/// Evaluator side: send choice bits, receive the matching labels.
pub fn receive_labels<C: Channel>(
    mode: OtMode,
    dealer: &mut C,
    choices: &[bool],
) -> Result<Vec<Label>> {
    if mode == OtMode::Real {
        return Err(Error::UnsupportedMode);
    }
    let mut msg = Vec::with_capacity(4 + choices.len().div_ceil(8));
    msg.extend_from_slice(&(choices.len() as u32).to_le_bytes());
    msg.extend_from_slice(&pack_bits(choices));
    dealer.send(tags::OT_CHOICES, &msg)?;
    let reply = dealer.recv(tags::OT_RESULT)?;
    if reply.len() != choices.len() * LABEL_BYTES {
        return Err(Error::Protocol("ot result length mismatch".into()));
    }
    Ok(reply
        .chunks_exact(LABEL_BYTES)
        .map(|c| Label::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Dealer side: match one label-pair message with one choice message.
pub fn dealer_select(label_msg: &[u8], choice_msg: &[u8]) -> Result<Vec<u8>> {
    let pairs = parse_label_pairs(label_msg)?;
    let choices = parse_choices(choice_msg)?;
    if pairs.len() != choices.len() {
        return Err(Error::Protocol("ot pair/choice count mismatch".into()));
    }
    let mut out = Vec::with_capacity(pairs.len() * LABEL_BYTES);
    for (&(k0, k1), &c) in pairs.iter().zip(choices.iter()) {
        out.extend_from_slice(&if c { k1 } else { k0 }.to_le_bytes());
    }
    Ok(out)
}

pub fn parse_label_pairs(msg: &[u8]) -> Result<Vec<(Label, Label)>> {
    if msg.len() < 4 {
        return Err(Error::Protocol("short ot label message".into()));
    }
    let n = u32::from_le_bytes(msg[..4].try_into().unwrap()) as usize;
    let body = &msg[4..];
    if body.len() != n * 2 * LABEL_BYTES {
        return Err(Error::Protocol("ot label message length mismatch".into()));
    }
    Ok(body
        .chunks_exact(2 * LABEL_BYTES)
        .map(|c| {
            (
                Label::from_le_bytes(c[..LABEL_BYTES].try_into().unwrap()),
                Label::from_le_bytes(c[LABEL_BYTES..].try_into().unwrap()),
            )
        })
        .collect())
}

pub fn parse_choices(msg: &[u8]) -> Result<Vec<bool>> {
    if msg.len() < 4 {
        return Err(Error::Protocol("short ot choice message".into()));
    }
    let n = u32::from_le_bytes(msg[..4].try_into().unwrap()) as usize;
    let body = &msg[4..];
    if body.len() != n.div_ceil(8) {
        return Err(Error::Protocol("ot choice message length mismatch".into()));
    }
    Ok((0..n).map(|i| body[i / 8] >> (i % 8) & 1 == 1).collect())
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = alloc::vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}
