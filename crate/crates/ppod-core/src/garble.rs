//! Yao garbling with point-and-permute and free-XOR. AND gates carry a
//! four-row table; XOR, NOT and CONST gates are free. Each row embeds an
//! all-zero pad so corrupted evaluation is detected rather than silent.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand_core::RngCore;
use sha2::{Digest, Sha256};

use crate::circuit::{Circuit, Gate, InputOwner};
use crate::error::{Error, Result};

/// κ = 128-bit wire label.
pub type Label = u128;

pub const LABEL_BYTES: usize = 16;
/// Row = encrypted label plus an 8-byte zero pad.
pub const ROW_BYTES: usize = LABEL_BYTES + 8;

/// Session-global free-XOR offset; low bit always set so the permute bits of
/// a wire's two labels differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delta(Label);

impl Delta {
    pub fn random(rng: &mut impl RngCore) -> Delta {
        Delta(random_label(rng) | 1)
    }

    pub fn offset(self) -> Label {
        self.0
    }
}

pub fn random_label(rng: &mut impl RngCore) -> Label {
    ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128
}

fn permute_bit(label: Label) -> bool {
    label & 1 == 1
}

fn row_pad(ka: Label, kb: Label, gate: u64) -> [u8; ROW_BYTES] {
    let mut h = Sha256::new_with_prefix(b"ppod-row");
    h.update(gate.to_le_bytes());
    h.update(ka.to_le_bytes());
    h.update(kb.to_le_bytes());
    let d = h.finalize();
    d[..ROW_BYTES].try_into().unwrap()
}

fn decode_hash(wire: u32, label: Label) -> u64 {
    let mut h = Sha256::new_with_prefix(b"ppod-dec");
    h.update(wire.to_le_bytes());
    h.update(label.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Per-wire decode entry: truncated hashes of the 0-label and 1-label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeEntry {
    pub h0: u64,
    pub h1: u64,
}

/// The transferable garbled material: one four-row table per AND gate, in
/// gate order. XOR/NOT/CONST gates contribute zero ciphertexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub circuit_hash: [u8; 32],
    pub tables: Vec<[[u8; ROW_BYTES]; 4]>,
}

impl GarbledCircuit {
    pub fn table_bytes(&self) -> usize {
        self.tables.len() * 4 * ROW_BYTES
    }
}

/// Everything the garbler knows after garbling.
pub struct GarbleResult {
    pub garbled: GarbledCircuit,
    /// Zero-labels of every fresh (non-carried) input bundle.
    pub input_k0: BTreeMap<String, Vec<Label>>,
    /// Active labels for CONST gates, in gate order; shipped with the
    /// garbler's own input labels.
    pub const_active: Vec<Label>,
    /// Zero-labels per output bundle (reshare carry and garbler-side decode).
    pub output_k0: BTreeMap<String, Vec<Label>>,
    /// Decode entries per output bundle, for evaluator-side opening.
    pub decode: BTreeMap<String, Vec<DecodeEntry>>,
}

/// Garbles a circuit. Deterministic given the rng stream. Carried bundles
/// reuse zero-labels from an earlier circuit in the same session (same Δ).
pub fn garble(
    circuit: &Circuit,
    delta: Delta,
    rng: &mut impl RngCore,
    carried: &BTreeMap<String, Vec<Label>>,
) -> Result<GarbleResult> {
    circuit.validate()?;
    let mut k0: Vec<Label> = alloc::vec![0; circuit.wire_count as usize];
    let mut input_k0 = BTreeMap::new();
    for bundle in &circuit.inputs {
        match bundle.owner {
            InputOwner::Carried => {
                let labels = carried.get(bundle.name.as_str()).ok_or_else(|| {
                    Error::Parameter(alloc::format!("missing carried bundle {}", bundle.name))
                })?;
                if labels.len() != bundle.wires.len() {
                    return Err(Error::Parameter("carried bundle width mismatch".into()));
                }
                for (&w, &l) in bundle.wires.iter().zip(labels.iter()) {
                    k0[w as usize] = l;
                }
            }
            InputOwner::Garbler | InputOwner::Evaluator => {
                let mut labels = Vec::with_capacity(bundle.wires.len());
                for &w in &bundle.wires {
                    let l = random_label(rng);
                    k0[w as usize] = l;
                    labels.push(l);
                }
                input_k0.insert(bundle.name.clone(), labels);
            }
        }
    }

    let mut tables = Vec::with_capacity(circuit.and_count());
    let mut const_active = Vec::new();
    for (idx, gate) in circuit.gates.iter().enumerate() {
        match *gate {
            Gate::Xor { a, b, out } => {
                k0[out as usize] = k0[a as usize] ^ k0[b as usize];
            }
            Gate::Not { a, out } => {
                k0[out as usize] = k0[a as usize] ^ delta.offset();
            }
            Gate::Const { bit, out } => {
                let l = random_label(rng);
                k0[out as usize] = l;
                const_active.push(if bit { l ^ delta.offset() } else { l });
            }
            Gate::And { a, b, out } => {
                let ko = random_label(rng);
                k0[out as usize] = ko;
                let mut table = [[0u8; ROW_BYTES]; 4];
                for va in 0..2u8 {
                    for vb in 0..2u8 {
                        let ka = k0[a as usize] ^ if va == 1 { delta.offset() } else { 0 };
                        let kb = k0[b as usize] ^ if vb == 1 { delta.offset() } else { 0 };
                        let kout = ko ^ if va & vb == 1 { delta.offset() } else { 0 };
                        let row = ((permute_bit(ka) as usize) << 1) | permute_bit(kb) as usize;
                        let mut body = [0u8; ROW_BYTES];
                        body[..LABEL_BYTES].copy_from_slice(&kout.to_le_bytes());
                        let pad = row_pad(ka, kb, idx as u64);
                        for (b, p) in body.iter_mut().zip(pad.iter()) {
                            *b ^= p;
                        }
                        table[row] = body;
                    }
                }
                tables.push(table);
            }
        }
    }

    let mut output_k0 = BTreeMap::new();
    let mut decode = BTreeMap::new();
    for bundle in &circuit.outputs {
        let labels: Vec<Label> = bundle.wires.iter().map(|&w| k0[w as usize]).collect();
        let entries: Vec<DecodeEntry> = bundle
            .wires
            .iter()
            .map(|&w| DecodeEntry {
                h0: decode_hash(w, k0[w as usize]),
                h1: decode_hash(w, k0[w as usize] ^ delta.offset()),
            })
            .collect();
        output_k0.insert(bundle.name.clone(), labels);
        decode.insert(bundle.name.clone(), entries);
    }

    Ok(GarbleResult {
        garbled: GarbledCircuit {
            circuit_hash: circuit.hash(),
            tables,
        },
        input_k0,
        const_active,
        output_k0,
        decode,
    })
}

/// Selects the garbler's input labels for its plaintext bits.
pub fn encode_inputs(k0: &[Label], bits: &[bool], delta: Delta) -> Result<Vec<Label>> {
    if k0.len() != bits.len() {
        return Err(Error::Parameter("input width mismatch".into()));
    }
    Ok(k0
        .iter()
        .zip(bits.iter())
        .map(|(&l, &b)| if b { l ^ delta.offset() } else { l })
        .collect())
}

/// Evaluates a garbled circuit given one active label per input wire.
/// Returns the active label of every wire.
pub fn evaluate(
    circuit: &Circuit,
    garbled: &GarbledCircuit,
    inputs: &BTreeMap<&str, Vec<Label>>,
    const_active: &[Label],
) -> Result<Vec<Label>> {
    if garbled.circuit_hash != circuit.hash() {
        return Err(Error::Protocol("garbled payload is for another circuit".into()));
    }
    let mut active: Vec<Label> = alloc::vec![0; circuit.wire_count as usize];
    for bundle in &circuit.inputs {
        let labels = inputs.get(bundle.name.as_str()).ok_or_else(|| {
            Error::Parameter(alloc::format!("missing input labels for {}", bundle.name))
        })?;
        if labels.len() != bundle.wires.len() {
            return Err(Error::Parameter("input label width mismatch".into()));
        }
        for (&w, &l) in bundle.wires.iter().zip(labels.iter()) {
            active[w as usize] = l;
        }
    }
    let mut table_iter = garbled.tables.iter();
    let mut const_iter = const_active.iter();
    for (idx, gate) in circuit.gates.iter().enumerate() {
        match *gate {
            Gate::Xor { a, b, out } => {
                active[out as usize] = active[a as usize] ^ active[b as usize];
            }
            // Free NOT: the output labels are the input labels swapped, so
            // the active label passes through unchanged.
            Gate::Not { a, out } => {
                active[out as usize] = active[a as usize];
            }
            Gate::Const { out, .. } => {
                active[out as usize] = *const_iter.next().ok_or(Error::Integrity)?;
            }
            Gate::And { a, b, out } => {
                let ka = active[a as usize];
                let kb = active[b as usize];
                let table = table_iter.next().ok_or(Error::Integrity)?;
                let row = ((permute_bit(ka) as usize) << 1) | permute_bit(kb) as usize;
                let pad = row_pad(ka, kb, idx as u64);
                let mut body = table[row];
                for (b, p) in body.iter_mut().zip(pad.iter()) {
                    *b ^= p;
                }
                if body[LABEL_BYTES..] != [0u8; 8] {
                    return Err(Error::Integrity);
                }
                active[out as usize] = Label::from_le_bytes(body[..LABEL_BYTES].try_into().unwrap());
            }
        }
    }
    Ok(active)
}

/// Opens output labels against a decode map; a label matching neither hash is
/// an integrity failure.
pub fn decode(wires: &[u32], labels: &[Label], entries: &[DecodeEntry]) -> Result<Vec<bool>> {
    if wires.len() != labels.len() || wires.len() != entries.len() {
        return Err(Error::Parameter("decode width mismatch".into()));
    }
    let mut bits = Vec::with_capacity(labels.len());
    for ((&w, &l), e) in wires.iter().zip(labels.iter()).zip(entries.iter()) {
        let h = decode_hash(w, l);
        if h == e.h0 {
            bits.push(false);
        } else if h == e.h1 {
            bits.push(true);
        } else {
            return Err(Error::Integrity);
        }
    }
    Ok(bits)
}

/// Garbler-side decode of labels returned by the evaluator.
pub fn decode_with_k0(k0: &[Label], labels: &[Label], delta: Delta) -> Result<Vec<bool>> {
    if k0.len() != labels.len() {
        return Err(Error::Parameter("decode width mismatch".into()));
    }
    let mut bits = Vec::with_capacity(labels.len());
    for (&z, &l) in k0.iter().zip(labels.iter()) {
        if l == z {
            bits.push(false);
        } else if l == z ^ delta.offset() {
            bits.push(true);
        } else {
            return Err(Error::Integrity);
        }
    }
    Ok(bits)
}
