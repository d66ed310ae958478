//! Yao session driver: runs one circuit between garbler and evaluator over a
//! peer channel (plus the dealer channel for OT), keeps carried Yao-share
//! state so later circuits can consume earlier outputs without re-encoding,
//! and records every cleartext decode for the leakage audit.
//!
//! One circuit costs at most two peer rounds: the garbled payload (tables,
//! garbler labels, constants, decode maps) and, when the garbler learns an
//! output, the evaluator's return of active labels.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::channel::{tags, Channel};
use crate::circuit::{Circuit, Destination, InputOwner, LeakClass};
use crate::error::{Error, Result};
use crate::garble::{
    self, decode_with_k0, encode_inputs, DecodeEntry, Delta, GarbledCircuit, Label, LABEL_BYTES,
    ROW_BYTES,
};
use crate::ot::{self, OtMode};

/// One cleartext decode performed by this party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeEvent {
    pub bundle: String,
    pub leak: LeakClass,
    pub bits: usize,
}

/// How a single circuit run plugs into session state: which session slots
/// feed its carried inputs, and which slots its reshared outputs land in.
#[derive(Debug, Clone, Default)]
pub struct RunSpec {
    /// carried input bundle name -> session slot to read.
    pub carried: BTreeMap<String, String>,
    /// reshare output bundle name -> session slot to write.
    pub store: BTreeMap<String, String>,
}

impl RunSpec {
    pub fn new() -> RunSpec {
        RunSpec::default()
    }

    pub fn carry(mut self, bundle: &str, slot: &str) -> RunSpec {
        self.carried.insert(bundle.into(), slot.into());
        self
    }

    pub fn store(mut self, bundle: &str, slot: &str) -> RunSpec {
        self.store.insert(bundle.into(), slot.into());
        self
    }
}

/// Shared bookkeeping: carried labels keyed by session slot plus the decode
/// log. The garbler stores zero-labels, the evaluator active labels.
#[derive(Default)]
struct SessionState {
    slots: BTreeMap<String, Vec<Label>>,
    decode_log: Vec<DecodeEvent>,
}

impl SessionState {
    fn slot(&self, name: &str) -> Result<&Vec<Label>> {
        self.slots
            .get(name)
            .ok_or_else(|| Error::Parameter(alloc::format!("unknown session slot {name}")))
    }

    fn join(&mut self, sources: &[&str], dest: &str) -> Result<()> {
        let mut all = Vec::new();
        for s in sources {
            all.extend_from_slice(self.slot(s)?);
        }
        for s in sources {
            self.slots.remove(*s);
        }
        self.slots.insert(dest.into(), all);
        Ok(())
    }
}

pub struct GarblerSession<R: RngCore> {
    delta: Delta,
    rng: R,
    ot_mode: OtMode,
    state: SessionState,
}

pub struct EvaluatorSession {
    ot_mode: OtMode,
    state: SessionState,
}

impl<R: RngCore> GarblerSession<R> {
    pub fn new(mut rng: R, ot_mode: OtMode) -> Self {
        let delta = Delta::random(&mut rng);
        GarblerSession {
            delta,
            rng,
            ot_mode,
            state: SessionState::default(),
        }
    }

    pub fn decode_log(&self) -> &[DecodeEvent] {
        &self.state.decode_log
    }

    pub fn drop_slot(&mut self, slot: &str) {
        self.state.slots.remove(slot);
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.state.slots.contains_key(slot)
    }

    /// Concatenates carried slots into one (consuming the sources), so a
    /// later circuit can take them as a single bundle.
    pub fn join_slots(&mut self, sources: &[&str], dest: &str) -> Result<()> {
        self.state.join(sources, dest)
    }

    /// Runs one circuit as the garbler. `inputs` supplies plaintext bits for
    /// every garbler-owned bundle. Returns decoded bits for every bundle
    /// destined to the garbler (or both).
    pub fn run<C: Channel, D: Channel>(
        &mut self,
        circuit: &Circuit,
        spec: &RunSpec,
        inputs: &BTreeMap<&str, Vec<bool>>,
        peer: &mut C,
        dealer: &mut D,
    ) -> Result<BTreeMap<String, Vec<bool>>> {
        let mut carried = BTreeMap::new();
        for b in &circuit.inputs {
            if b.owner == InputOwner::Carried {
                let slot = spec.carried.get(&b.name).ok_or_else(|| {
                    Error::Parameter(alloc::format!("no slot mapped for carried {}", b.name))
                })?;
                carried.insert(b.name.clone(), self.state.slot(slot)?.clone());
            }
        }
        let res = garble::garble(circuit, self.delta, &mut self.rng, &carried)?;

        // Evaluator input labels travel through the dealer.
        let mut ot_pairs = Vec::new();
        for b in &circuit.inputs {
            if b.owner == InputOwner::Evaluator {
                for &l in &res.input_k0[&b.name] {
                    ot_pairs.push((l, l ^ self.delta.offset()));
                }
            }
        }
        if !ot_pairs.is_empty() {
            ot::send_label_pairs(self.ot_mode, dealer, &ot_pairs)?;
        }

        // Garbled payload: tables, own active input labels, constant labels,
        // decode maps for evaluator-visible outputs.
        let mut msg = Vec::new();
        msg.extend_from_slice(&res.garbled.circuit_hash);
        msg.extend_from_slice(&(res.garbled.tables.len() as u32).to_le_bytes());
        for t in &res.garbled.tables {
            for row in t {
                msg.extend_from_slice(row);
            }
        }
        for b in &circuit.inputs {
            if b.owner == InputOwner::Garbler {
                let bits = inputs.get(b.name.as_str()).ok_or_else(|| {
                    Error::Parameter(alloc::format!("missing garbler input {}", b.name))
                })?;
                let labels = encode_inputs(&res.input_k0[&b.name], bits, self.delta)?;
                for l in labels {
                    msg.extend_from_slice(&l.to_le_bytes());
                }
            }
        }
        msg.extend_from_slice(&(res.const_active.len() as u32).to_le_bytes());
        for &l in &res.const_active {
            msg.extend_from_slice(&l.to_le_bytes());
        }
        for b in &circuit.outputs {
            if matches!(b.dest, Destination::Evaluator | Destination::Both) {
                for e in &res.decode[&b.name] {
                    msg.extend_from_slice(&e.h0.to_le_bytes());
                    msg.extend_from_slice(&e.h1.to_le_bytes());
                }
            }
        }
        peer.send(tags::GARBLED, &msg)?;

        // Reshared outputs persist as zero-labels.
        for (bundle, slot) in &spec.store {
            let b = circuit
                .output(bundle)
                .ok_or_else(|| Error::Parameter(alloc::format!("unknown output {bundle}")))?;
            if b.dest != Destination::Reshare {
                return Err(Error::Parameter(alloc::format!(
                    "output {bundle} is not reshared"
                )));
            }
            self.state
                .slots
                .insert(slot.clone(), res.output_k0[bundle].clone());
        }

        // Outputs the garbler learns come back as active labels.
        let return_wires: usize = circuit
            .outputs
            .iter()
            .filter(|b| matches!(b.dest, Destination::Garbler | Destination::Both))
            .map(|b| b.wires.len())
            .sum();
        let mut decoded = BTreeMap::new();
        if return_wires > 0 {
            let reply = peer.recv(tags::OUT_LABELS)?;
            if reply.len() != return_wires * LABEL_BYTES {
                return Err(Error::Protocol("returned label length mismatch".into()));
            }
            let mut pos = 0usize;
            for b in &circuit.outputs {
                if !matches!(b.dest, Destination::Garbler | Destination::Both) {
                    continue;
                }
                let n = b.wires.len();
                let labels: Vec<Label> = reply[pos..pos + n * LABEL_BYTES]
                    .chunks_exact(LABEL_BYTES)
                    .map(|c| Label::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                pos += n * LABEL_BYTES;
                let bits = decode_with_k0(&res.output_k0[&b.name], &labels, self.delta)?;
                self.state.decode_log.push(DecodeEvent {
                    bundle: b.name.clone(),
                    leak: b.leak,
                    bits: bits.len(),
                });
                decoded.insert(b.name.clone(), bits);
            }
        }
        Ok(decoded)
    }
}

impl EvaluatorSession {
    pub fn new(ot_mode: OtMode) -> Self {
        EvaluatorSession {
            ot_mode,
            state: SessionState::default(),
        }
    }

    pub fn decode_log(&self) -> &[DecodeEvent] {
        &self.state.decode_log
    }

    pub fn drop_slot(&mut self, slot: &str) {
        self.state.slots.remove(slot);
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.state.slots.contains_key(slot)
    }

    /// Concatenates carried slots into one (consuming the sources), so a
    /// later circuit can take them as a single bundle.
    pub fn join_slots(&mut self, sources: &[&str], dest: &str) -> Result<()> {
        self.state.join(sources, dest)
    }

    /// Runs one circuit as the evaluator. `inputs` supplies plaintext bits
    /// for every evaluator-owned bundle. Returns decoded bits for every
    /// bundle destined to the evaluator (or both).
    pub fn run<C: Channel, D: Channel>(
        &mut self,
        circuit: &Circuit,
        spec: &RunSpec,
        inputs: &BTreeMap<&str, Vec<bool>>,
        peer: &mut C,
        dealer: &mut D,
    ) -> Result<BTreeMap<String, Vec<bool>>> {
        // Own input labels come from the dealer, keyed by choice bits in
        // circuit input order.
        let mut choices = Vec::new();
        for b in &circuit.inputs {
            if b.owner == InputOwner::Evaluator {
                let bits = inputs.get(b.name.as_str()).ok_or_else(|| {
                    Error::Parameter(alloc::format!("missing evaluator input {}", b.name))
                })?;
                if bits.len() != b.wires.len() {
                    return Err(Error::Parameter("evaluator input width mismatch".into()));
                }
                choices.extend_from_slice(bits);
            }
        }
        let mut own_labels = if choices.is_empty() {
            Vec::new()
        } else {
            ot::receive_labels(self.ot_mode, dealer, &choices)?
        }
        .into_iter();

        let msg = peer.recv(tags::GARBLED)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if msg.len() < *pos + n {
                return Err(Error::Protocol("short garbled payload".into()));
            }
            let s = &msg[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let hash: [u8; 32] = take(&mut pos, 32)?.try_into().unwrap();
        if hash != circuit.hash() {
            return Err(Error::Protocol("garbled payload is for another circuit".into()));
        }
        let table_count =
            u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        if table_count != circuit.and_count() {
            return Err(Error::Protocol("table count mismatch".into()));
        }
        let mut tables = Vec::with_capacity(table_count);
        for _ in 0..table_count {
            let mut t = [[0u8; ROW_BYTES]; 4];
            for row in &mut t {
                row.copy_from_slice(take(&mut pos, ROW_BYTES)?);
            }
            tables.push(t);
        }
        let garbled = GarbledCircuit {
            circuit_hash: hash,
            tables,
        };

        let read_label = |pos: &mut usize| -> Result<Label> {
            Ok(Label::from_le_bytes(
                take(pos, LABEL_BYTES)?.try_into().unwrap(),
            ))
        };
        let mut active_inputs: BTreeMap<&str, Vec<Label>> = BTreeMap::new();
        for b in &circuit.inputs {
            let labels = match b.owner {
                InputOwner::Garbler => {
                    let mut v = Vec::with_capacity(b.wires.len());
                    for _ in 0..b.wires.len() {
                        v.push(read_label(&mut pos)?);
                    }
                    v
                }
                InputOwner::Evaluator => {
                    let mut v = Vec::with_capacity(b.wires.len());
                    for _ in 0..b.wires.len() {
                        v.push(own_labels.next().ok_or(Error::Protocol(
                            "ot returned too few labels".into(),
                        ))?);
                    }
                    v
                }
                InputOwner::Carried => {
                    let slot = spec.carried.get(&b.name).ok_or_else(|| {
                        Error::Parameter(alloc::format!("no slot mapped for carried {}", b.name))
                    })?;
                    self.state.slot(slot)?.clone()
                }
            };
            active_inputs.insert(b.name.as_str(), labels);
        }
        let const_count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut const_active = Vec::with_capacity(const_count);
        for _ in 0..const_count {
            const_active.push(read_label(&mut pos)?);
        }
        let mut decode_maps: BTreeMap<&str, Vec<DecodeEntry>> = BTreeMap::new();
        for b in &circuit.outputs {
            if matches!(b.dest, Destination::Evaluator | Destination::Both) {
                let mut entries = Vec::with_capacity(b.wires.len());
                for _ in 0..b.wires.len() {
                    let h0 = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
                    let h1 = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
                    entries.push(DecodeEntry { h0, h1 });
                }
                decode_maps.insert(b.name.as_str(), entries);
            }
        }
        if pos != msg.len() {
            return Err(Error::Protocol("trailing bytes in garbled payload".into()));
        }

        let active = garble::evaluate(circuit, &garbled, &active_inputs, &const_active)?;

        for (bundle, slot) in &spec.store {
            let b = circuit
                .output(bundle)
                .ok_or_else(|| Error::Parameter(alloc::format!("unknown output {bundle}")))?;
            if b.dest != Destination::Reshare {
                return Err(Error::Parameter(alloc::format!(
                    "output {bundle} is not reshared"
                )));
            }
            let labels: Vec<Label> = b.wires.iter().map(|&w| active[w as usize]).collect();
            self.state.slots.insert(slot.clone(), labels);
        }

        // Return active labels the garbler is entitled to open.
        let mut reply = Vec::new();
        for b in &circuit.outputs {
            if matches!(b.dest, Destination::Garbler | Destination::Both) {
                for &w in &b.wires {
                    reply.extend_from_slice(&active[w as usize].to_le_bytes());
                }
            }
        }
        if !reply.is_empty() {
            peer.send(tags::OUT_LABELS, &reply)?;
        }

        let mut decoded = BTreeMap::new();
        for b in &circuit.outputs {
            if matches!(b.dest, Destination::Evaluator | Destination::Both) {
                let labels: Vec<Label> = b.wires.iter().map(|&w| active[w as usize]).collect();
                let bits = garble::decode(&b.wires, &labels, &decode_maps[b.name.as_str()])?;
                self.state.decode_log.push(DecodeEvent {
                    bundle: b.name.clone(),
                    leak: b.leak,
                    bits: bits.len(),
                });
                decoded.insert(b.name.clone(), bits);
            }
        }
        Ok(decoded)
    }
}

/// Flattens words into the little-endian bit layout circuit bundles use.
pub fn words_to_bits(values: &[u64], width: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(values.len() * width);
    for &v in values {
        out.extend(crate::circuit::to_bits(v, width));
    }
    out
}

/// Inverse of [`words_to_bits`].
pub fn bits_to_words(bits: &[bool], width: usize) -> Vec<u64> {
    bits.chunks(width).map(crate::circuit::from_bits).collect()
}
