//! Wire-level construction helpers shared by all circuit builders.

use alloc::string::String;
use alloc::vec::Vec;

use crate::circuit::{
    Circuit, Destination, Gate, InputBundle, InputOwner, LeakClass, OutputBundle, WireId,
};
use crate::error::{Error, Result};

pub struct Builder {
    gates: Vec<Gate>,
    next: WireId,
    inputs: Vec<InputBundle>,
    outputs: Vec<OutputBundle>,
}

impl Default for Builder {
    fn default() -> Self {
        Self::new()
    }
}

impl Builder {
    pub fn new() -> Builder {
        Builder {
            gates: Vec::new(),
            next: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn fresh(&mut self) -> WireId {
        let w = self.next;
        self.next += 1;
        w
    }

    pub fn input(&mut self, name: &str, owner: InputOwner, width: usize) -> Vec<WireId> {
        let wires: Vec<WireId> = (0..width).map(|_| self.fresh()).collect();
        self.inputs.push(InputBundle {
            name: String::from(name),
            owner,
            wires: wires.clone(),
        });
        wires
    }

    pub fn output(&mut self, name: &str, dest: Destination, leak: LeakClass, wires: Vec<WireId>) {
        self.outputs.push(OutputBundle {
            name: String::from(name),
            dest,
            leak,
            wires,
        });
    }

    pub fn xor(&mut self, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::Xor { a, b, out });
        out
    }

    pub fn and(&mut self, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::And { a, b, out });
        out
    }

    pub fn not(&mut self, a: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::Not { a, out });
        out
    }

    pub fn constant(&mut self, bit: bool) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::Const { bit, out });
        out
    }

    pub fn constant_word(&mut self, value: u64, width: usize) -> Vec<WireId> {
        (0..width)
            .map(|i| self.constant((value >> i) & 1 == 1))
            .collect()
    }

    pub fn or(&mut self, a: WireId, b: WireId) -> WireId {
        // a | b = a ^ b ^ (a & b)
        let x = self.xor(a, b);
        let n = self.and(a, b);
        self.xor(x, n)
    }

    pub fn or_reduce(&mut self, bits: &[WireId]) -> WireId {
        assert!(!bits.is_empty());
        let mut layer = bits.to_vec();
        while layer.len() > 1 {
            let mut nxt = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                if pair.len() == 2 {
                    nxt.push(self.or(pair[0], pair[1]));
                } else {
                    nxt.push(pair[0]);
                }
            }
            layer = nxt;
        }
        layer[0]
    }

    /// Ripple-carry addition mod 2^w; final carry dropped.
    pub fn adder(&mut self, a: &[WireId], b: &[WireId]) -> Vec<WireId> {
        assert_eq!(a.len(), b.len());
        let w = a.len();
        let mut out = Vec::with_capacity(w);
        let mut carry: Option<WireId> = None;
        for i in 0..w {
            match carry {
                None => {
                    out.push(self.xor(a[i], b[i]));
                    if i + 1 < w {
                        carry = Some(self.and(a[i], b[i]));
                    }
                }
                Some(c) => {
                    let axc = self.xor(a[i], c);
                    let bxc = self.xor(b[i], c);
                    out.push(self.xor(axc, b[i]));
                    if i + 1 < w {
                        // carry' = maj(a, b, c) = c ^ ((a^c) & (b^c))
                        let t = self.and(axc, bxc);
                        carry = Some(self.xor(c, t));
                    }
                }
            }
        }
        out
    }

    /// Subtraction a - b mod 2^w via a + ~b + 1.
    pub fn subtractor(&mut self, a: &[WireId], b: &[WireId]) -> Vec<WireId> {
        assert_eq!(a.len(), b.len());
        let w = a.len();
        let mut out = Vec::with_capacity(w);
        // carry-in 1 folded into the first bit
        let mut carry: Option<WireId> = None;
        let mut first = true;
        for i in 0..w {
            let nb = self.not(b[i]);
            if first {
                // sum = a ^ ~b ^ 1, carry = a | ~b
                let s = self.xor(a[i], nb);
                out.push(self.not(s));
                if w > 1 {
                    carry = Some(self.or(a[i], nb));
                }
                first = false;
            } else {
                let c = carry.unwrap();
                let axc = self.xor(a[i], c);
                let bxc = self.xor(nb, c);
                out.push(self.xor(axc, nb));
                if i + 1 < w {
                    let t = self.and(axc, bxc);
                    carry = Some(self.xor(c, t));
                }
            }
        }
        out
    }

    /// Unsigned strict comparison a > b: the carry-out of a + ~b.
    pub fn gt(&mut self, a: &[WireId], b: &[WireId]) -> WireId {
        assert_eq!(a.len(), b.len());
        let mut carry: Option<WireId> = None;
        for i in 0..a.len() {
            let nb = self.not(b[i]);
            carry = Some(match carry {
                None => self.and(a[i], nb),
                Some(c) => {
                    let axc = self.xor(a[i], c);
                    let bxc = self.xor(nb, c);
                    let t = self.and(axc, bxc);
                    self.xor(c, t)
                }
            });
        }
        carry.unwrap()
    }

    /// Word equality: AND over bitwise XNOR.
    pub fn eq(&mut self, a: &[WireId], b: &[WireId]) -> WireId {
        assert_eq!(a.len(), b.len());
        let mut bits = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let x = self.xor(a[i], b[i]);
            bits.push(self.not(x));
        }
        let mut layer = bits;
        while layer.len() > 1 {
            let mut nxt = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                if pair.len() == 2 {
                    nxt.push(self.and(pair[0], pair[1]));
                } else {
                    nxt.push(pair[0]);
                }
            }
            layer = nxt;
        }
        layer[0]
    }

    /// Selects x when s = 1, else y.
    pub fn mux(&mut self, s: WireId, x: &[WireId], y: &[WireId]) -> Vec<WireId> {
        assert_eq!(x.len(), y.len());
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let d = self.xor(x[i], y[i]);
            let sd = self.and(s, d);
            out.push(self.xor(y[i], sd));
        }
        out
    }

    /// Swaps the two words when s = 1.
    pub fn cswap(&mut self, s: WireId, x: &[WireId], y: &[WireId]) -> (Vec<WireId>, Vec<WireId>) {
        assert_eq!(x.len(), y.len());
        let mut nx = Vec::with_capacity(x.len());
        let mut ny = Vec::with_capacity(y.len());
        for i in 0..x.len() {
            let d = self.xor(x[i], y[i]);
            let sd = self.and(s, d);
            nx.push(self.xor(x[i], sd));
            ny.push(self.xor(y[i], sd));
        }
        (nx, ny)
    }

    /// Chain of MAX gates over equal-width words.
    pub fn max(&mut self, words: &[Vec<WireId>]) -> Vec<WireId> {
        assert!(!words.is_empty());
        let mut acc = words[0].clone();
        for w in &words[1..] {
            let g = self.gt(w, &acc);
            acc = self.mux(g, w, &acc);
        }
        acc
    }

    pub fn finish(self) -> Result<Circuit> {
        let c = Circuit {
            wire_count: self.next,
            gates: self.gates,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn width_check(width: usize) -> Result<()> {
        if width == 0 {
            return Err(Error::Parameter("width must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{from_bits, to_bits};
    use alloc::collections::BTreeMap;

    fn eval2(c: &Circuit, a: u64, b: u64, width: usize) -> u64 {
        let mut inputs = BTreeMap::new();
        inputs.insert("a", to_bits(a, width));
        inputs.insert("b", to_bits(b, width));
        let out = c.eval_plain(&inputs).unwrap();
        from_bits(out.values().next().unwrap())
    }

    #[test]
    fn adder_exhaustive_width4() {
        let c = crate::circuits::build_adder(4).unwrap();
        for a in 0..16u64 {
            for b in 0..16u64 {
                assert_eq!(eval2(&c, a, b, 4), (a + b) & 0xf, "{a}+{b}");
            }
        }
    }

    #[test]
    fn subtractor_exhaustive_width4() {
        let c = crate::circuits::build_subtractor(4).unwrap();
        for a in 0..16u64 {
            for b in 0..16u64 {
                assert_eq!(eval2(&c, a, b, 4), a.wrapping_sub(b) & 0xf, "{a}-{b}");
            }
        }
    }

    #[test]
    fn comparator_exhaustive_width4() {
        let c = crate::circuits::build_comparator(4).unwrap();
        for a in 0..16u64 {
            for b in 0..16u64 {
                assert_eq!(eval2(&c, a, b, 4), (a > b) as u64, "{a}>{b}");
            }
        }
    }

    #[test]
    fn arithmetic_random_width64() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        let add = crate::circuits::build_adder(64).unwrap();
        let sub = crate::circuits::build_subtractor(64).unwrap();
        let cmp = crate::circuits::build_comparator(64).unwrap();
        for _ in 0..200 {
            let a: u64 = rng.gen();
            let b: u64 = rng.gen();
            assert_eq!(eval2(&add, a, b, 64), a.wrapping_add(b));
            assert_eq!(eval2(&sub, a, b, 64), a.wrapping_sub(b));
            assert_eq!(eval2(&cmp, a, b, 64), (a > b) as u64);
            assert_eq!(eval2(&cmp, a, a, 64), 0);
        }
    }

    #[test]
    fn comparator_uses_one_and_per_bit() {
        let c = crate::circuits::build_comparator(32).unwrap();
        assert_eq!(c.counts().and, 32);
    }
}
