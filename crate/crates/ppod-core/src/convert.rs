//! Conversions between additive ring shares and carried Yao shares.
//!
//! A2Y reconstructs a shared value inside a circuit and leaves it as Yao
//! state in a session slot. Y2A re-shares a carried value additively: the
//! garbler contributes a fresh mask as its share, the evaluator decodes the
//! uniformly masked difference as its own.

use alloc::collections::BTreeMap;
use rand_core::RngCore;

use crate::channel::Channel;
use crate::circuit::to_bits;
use crate::circuits::{build_a2y, build_y2a};
use crate::error::Result;
use crate::ring::{Party, Ring, RingShare};
use crate::yao::{EvaluatorSession, GarblerSession, RunSpec};

pub fn a2y_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    share: &RingShare,
    slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<()> {
    let width = share.bits as usize;
    let circuit = build_a2y(width)?;
    let spec = RunSpec::new().store("value", slot);
    let mut inputs = BTreeMap::new();
    inputs.insert("share_g", to_bits(share.value, width));
    sess.run(&circuit, &spec, &inputs, peer, dealer)?;
    Ok(())
}

pub fn a2y_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    share: &RingShare,
    slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<()> {
    let width = share.bits as usize;
    let circuit = build_a2y(width)?;
    let spec = RunSpec::new().store("value", slot);
    let mut inputs = BTreeMap::new();
    inputs.insert("share_e", to_bits(share.value, width));
    sess.run(&circuit, &spec, &inputs, peer, dealer)?;
    Ok(())
}

/// Garbler side of Y2A; the returned share is the fresh mask.
pub fn y2a_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    rng: &mut impl RngCore,
    ring: Ring,
    slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<RingShare> {
    let width = ring.bits() as usize;
    let circuit = build_y2a(width)?;
    let spec = RunSpec::new().carry("value", slot);
    let mask = ring.random(rng);
    let mut inputs = BTreeMap::new();
    inputs.insert("mask", to_bits(mask, width));
    sess.run(&circuit, &spec, &inputs, peer, dealer)?;
    Ok(RingShare::new(mask, Party::P0, ring))
}

/// Evaluator side of Y2A; the decoded masked difference is its share.
pub fn y2a_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    ring: Ring,
    slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<RingShare> {
    let circuit = build_y2a(ring.bits() as usize)?;
    let spec = RunSpec::new().carry("value", slot);
    let out = sess.run(&circuit, &spec, &BTreeMap::new(), peer, dealer)?;
    let v = crate::circuit::from_bits(&out["share"]);
    Ok(RingShare::new(v, Party::P1, ring))
}
