//! Gate-list circuit representation with named input/output wire bundles.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type WireId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Xor { a: WireId, b: WireId, out: WireId },
    And { a: WireId, b: WireId, out: WireId },
    Not { a: WireId, out: WireId },
    Const { bit: bool, out: WireId },
}

impl Gate {
    pub fn out(&self) -> WireId {
        match *self {
            Gate::Xor { out, .. } => out,
            Gate::And { out, .. } => out,
            Gate::Not { out, .. } => out,
            Gate::Const { out, .. } => out,
        }
    }
}

/// Who feeds an input bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputOwner {
    Garbler,
    Evaluator,
    /// Yao-share state carried over from a previous circuit in the same
    /// session; neither party re-encodes it.
    Carried,
}

/// Where an output bundle may be opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Garbler,
    Evaluator,
    Both,
    /// Stays in Yao-share form; never decoded to cleartext.
    Reshare,
}

/// What a decoded bundle reveals; drives the leakage audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LeakClass {
    /// Outlier membership bit for a known point id.
    OutlierFlag,
    /// The single query assertion boolean.
    QueryAssertion,
    /// Identities of a new arrival's k nearest neighbours.
    KnnIds,
    /// Derandomise pairing matrix bits.
    PairingBits,
    /// Value is uniformly masked before decode (re-sharing outputs).
    Masked,
    /// Test or diagnostic circuits; must never appear in a protocol run.
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputBundle {
    pub name: String,
    pub owner: InputOwner,
    pub wires: Vec<WireId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBundle {
    pub name: String,
    pub dest: Destination,
    pub leak: LeakClass,
    pub wires: Vec<WireId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub xor: usize,
    pub and: usize,
    pub not: usize,
    pub constant: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.xor + self.and + self.not + self.constant
    }

    /// Structured-text cost report.
    pub fn report(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "gates.xor={}", self.xor);
        let _ = writeln!(s, "gates.and={}", self.and);
        let _ = writeln!(s, "gates.not={}", self.not);
        let _ = writeln!(s, "gates.const={}", self.constant);
        let _ = writeln!(s, "gates.total={}", self.total());
        s
    }
}

/// A topologically ordered gate list; every wire written exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub wire_count: u32,
    pub gates: Vec<Gate>,
    pub inputs: Vec<InputBundle>,
    pub outputs: Vec<OutputBundle>,
}

impl Circuit {
    pub fn validate(&self) -> Result<()> {
        let n = self.wire_count as usize;
        let mut written = alloc::vec![false; n];
        for b in &self.inputs {
            for &w in &b.wires {
                let w = w as usize;
                if w >= n {
                    return Err(Error::MalformedCircuit("input wire out of range".into()));
                }
                if written[w] {
                    return Err(Error::MalformedCircuit("input wire written twice".into()));
                }
                written[w] = true;
            }
        }
        for g in &self.gates {
            let check_in = |w: WireId, written: &[bool]| -> Result<()> {
                if (w as usize) >= n || !written[w as usize] {
                    return Err(Error::MalformedCircuit("gate reads unwritten wire".into()));
                }
                Ok(())
            };
            match *g {
                Gate::Xor { a, b, .. } | Gate::And { a, b, .. } => {
                    check_in(a, &written)?;
                    check_in(b, &written)?;
                }
                Gate::Not { a, .. } => check_in(a, &written)?,
                Gate::Const { .. } => {}
            }
            let out = g.out() as usize;
            if out >= n || written[out] {
                return Err(Error::MalformedCircuit("gate output rewritten".into()));
            }
            written[out] = true;
        }
        for b in &self.outputs {
            for &w in &b.wires {
                if (w as usize) >= n || !written[w as usize] {
                    return Err(Error::MalformedCircuit("output wire never written".into()));
                }
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            match g {
                Gate::Xor { .. } => c.xor += 1,
                Gate::And { .. } => c.and += 1,
                Gate::Not { .. } => c.not += 1,
                Gate::Const { .. } => c.constant += 1,
            }
        }
        c
    }

    pub fn and_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::And { .. }))
            .count()
    }

    pub fn input(&self, name: &str) -> Option<&InputBundle> {
        self.inputs.iter().find(|b| b.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&OutputBundle> {
        self.outputs.iter().find(|b| b.name == name)
    }

    /// Plaintext evaluation. Carried bundles are supplied as bits like any
    /// other input here.
    pub fn eval_plain(&self, inputs: &BTreeMap<&str, Vec<bool>>) -> Result<BTreeMap<String, Vec<bool>>> {
        let mut wires: Vec<Option<bool>> = alloc::vec![None; self.wire_count as usize];
        for b in &self.inputs {
            let bits = inputs
                .get(b.name.as_str())
                .ok_or_else(|| Error::Parameter(alloc::format!("missing input bundle {}", b.name)))?;
            if bits.len() != b.wires.len() {
                return Err(Error::Parameter(alloc::format!(
                    "input bundle {} width mismatch",
                    b.name
                )));
            }
            for (&w, &bit) in b.wires.iter().zip(bits.iter()) {
                wires[w as usize] = Some(bit);
            }
        }
        for g in &self.gates {
            let v = match *g {
                Gate::Xor { a, b, .. } => wires[a as usize].unwrap() ^ wires[b as usize].unwrap(),
                Gate::And { a, b, .. } => wires[a as usize].unwrap() & wires[b as usize].unwrap(),
                Gate::Not { a, .. } => !wires[a as usize].unwrap(),
                Gate::Const { bit, .. } => bit,
            };
            wires[g.out() as usize] = Some(v);
        }
        let mut out = BTreeMap::new();
        for b in &self.outputs {
            let bits = b
                .wires
                .iter()
                .map(|&w| wires[w as usize].unwrap())
                .collect::<Vec<_>>();
            out.insert(b.name.clone(), bits);
        }
        Ok(out)
    }

    /// Canonical byte serialization of the gate list and bundle layout.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"PPODCKT1");
        out.extend_from_slice(&self.wire_count.to_le_bytes());
        out.extend_from_slice(&(self.gates.len() as u32).to_le_bytes());
        for g in &self.gates {
            match *g {
                Gate::Xor { a, b, out: o } => {
                    out.push(0);
                    out.extend_from_slice(&a.to_le_bytes());
                    out.extend_from_slice(&b.to_le_bytes());
                    out.extend_from_slice(&o.to_le_bytes());
                }
                Gate::And { a, b, out: o } => {
                    out.push(1);
                    out.extend_from_slice(&a.to_le_bytes());
                    out.extend_from_slice(&b.to_le_bytes());
                    out.extend_from_slice(&o.to_le_bytes());
                }
                Gate::Not { a, out: o } => {
                    out.push(2);
                    out.extend_from_slice(&a.to_le_bytes());
                    out.extend_from_slice(&o.to_le_bytes());
                }
                Gate::Const { bit, out: o } => {
                    out.push(3);
                    out.push(bit as u8);
                    out.extend_from_slice(&o.to_le_bytes());
                }
            }
        }
        let mut emit_bundles = |count: usize| {
            out.extend_from_slice(&(count as u32).to_le_bytes());
        };
        emit_bundles(self.inputs.len());
        for b in &self.inputs {
            out.extend_from_slice(&(b.name.len() as u32).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.push(match b.owner {
                InputOwner::Garbler => 0,
                InputOwner::Evaluator => 1,
                InputOwner::Carried => 2,
            });
            out.extend_from_slice(&(b.wires.len() as u32).to_le_bytes());
            for &w in &b.wires {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.outputs.len() as u32).to_le_bytes());
        for b in &self.outputs {
            out.extend_from_slice(&(b.name.len() as u32).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.push(match b.dest {
                Destination::Garbler => 0,
                Destination::Evaluator => 1,
                Destination::Both => 2,
                Destination::Reshare => 3,
            });
            out.extend_from_slice(&(b.wires.len() as u32).to_le_bytes());
            for &w in &b.wires {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    /// Hash binding both parties to the same circuit structure.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.serialize()).into()
    }
}

/// Converts an unsigned value to `width` little-endian bits.
pub fn to_bits(v: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (v >> i) & 1 == 1).collect()
}

/// Reassembles little-endian bits into an unsigned value.
pub fn from_bits(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
}
