//! Permutation machinery for the shuffle stage: a Feistel PRP that maps a key
//! to a permutation, and Waksman network routing that turns a permutation
//! into switch control bits the evaluator feeds into the circuit.

use alloc::vec::Vec;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Control bits for a rearrangeable permutation network of a given size,
/// together with the key they were derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSpec {
    pub size: usize,
    pub key: [u8; 16],
    pub perm: Vec<usize>,
    pub control_bits: Vec<bool>,
}

fn feistel_round(key: &[u8; 16], round: u32, half: u64, bits: u32) -> u64 {
    let mut h = Sha256::new_with_prefix(b"ppod-prp");
    h.update(key);
    h.update(round.to_le_bytes());
    h.update(half.to_le_bytes());
    let d = h.finalize();
    let v = u64::from_le_bytes(d[..8].try_into().unwrap());
    v & ((1u64 << bits) - 1)
}

/// 4-round balanced Feistel PRP over `2^(2*half_bits)` values.
fn prp(key: &[u8; 16], x: u64, half_bits: u32) -> u64 {
    let mask = (1u64 << half_bits) - 1;
    let mut left = (x >> half_bits) & mask;
    let mut right = x & mask;
    for round in 0..4u32 {
        let f = feistel_round(key, round, right, half_bits);
        let new_right = left ^ f;
        left = right;
        right = new_right;
    }
    (left << half_bits) | right
}

/// Deterministic bijection on `[0, n)` derived from `key` by cycle-walking
/// the Feistel PRP.
pub fn derive_permutation(key: [u8; 16], n: usize) -> Vec<usize> {
    assert!(n >= 1);
    if n == 1 {
        return alloc::vec![0];
    }
    let bits = usize::BITS - (n - 1).leading_zeros(); // ceil(log2 n)
    let half_bits = bits.div_ceil(2);
    let domain_bits = half_bits * 2;
    debug_assert!((1u64 << domain_bits) >= n as u64);
    (0..n)
        .map(|i| {
            let mut x = i as u64;
            loop {
                x = prp(&key, x, half_bits);
                if (x as usize) < n {
                    return x as usize;
                }
            }
        })
        .collect()
}

/// Number of switches in a Waksman network on `n = 2^m` terminals.
pub fn waksman_switch_count(n: usize) -> usize {
    assert!(n.is_power_of_two());
    match n {
        1 => 0,
        2 => 1,
        _ => n - 1 + 2 * waksman_switch_count(n / 2),
    }
}

/// Routes `perm` (perm[i] = output slot of input i) through a Waksman network
/// on a power-of-two size, returning switch control bits in network order:
/// input layer, top subnetwork, bottom subnetwork, output layer.
pub fn waksman_control_bits(perm: &[usize]) -> Result<Vec<bool>> {
    let n = perm.len();
    if !n.is_power_of_two() {
        return Err(Error::Parameter("waksman size must be a power of two".into()));
    }
    let mut seen = alloc::vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Parameter("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(route(perm))
}

fn route(perm: &[usize]) -> Vec<bool> {
    let n = perm.len();
    if n == 1 {
        return Vec::new();
    }
    if n == 2 {
        return alloc::vec![perm[0] == 1];
    }
    let mut inv = alloc::vec![0usize; n];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    // subnet[i] = true means input i routes through the bottom subnetwork.
    let mut subnet: Vec<Option<bool>> = alloc::vec![None; n];
    let mut stack: Vec<(usize, bool)> = Vec::new();
    // The unswitched last output pair fixes: output n-1 comes from the bottom.
    stack.push((inv[n - 1], true));
    loop {
        while let Some((i, v)) = stack.pop() {
            if let Some(cur) = subnet[i] {
                debug_assert_eq!(cur, v, "waksman routing conflict");
                continue;
            }
            subnet[i] = Some(v);
            // Input-switch partner takes the other subnetwork.
            stack.push((i ^ 1, !v));
            // The input targeting the partner output takes the other subnetwork.
            stack.push((inv[perm[i] ^ 1], !v));
        }
        match subnet.iter().position(|s| s.is_none()) {
            Some(i) => stack.push((i, true)),
            None => break,
        }
    }
    let subnet: Vec<bool> = subnet.into_iter().map(|s| s.unwrap()).collect();
    let half = n / 2;
    let mut in_bits = Vec::with_capacity(half);
    let mut top_perm = alloc::vec![0usize; half];
    let mut bot_perm = alloc::vec![0usize; half];
    for s in 0..half {
        let crossed = subnet[2 * s];
        in_bits.push(crossed);
        let top_input = 2 * s + crossed as usize;
        let bot_input = 2 * s + !crossed as usize;
        top_perm[s] = perm[top_input] >> 1;
        bot_perm[s] = perm[bot_input] >> 1;
    }
    // out_bits[d] = output 2d comes from the bottom subnetwork; the last pair
    // has no switch.
    let mut out_bits = Vec::with_capacity(half - 1);
    for d in 0..half - 1 {
        out_bits.push(subnet[inv[2 * d]]);
    }
    let mut bits = in_bits;
    bits.extend(route(&top_perm));
    bits.extend(route(&bot_perm));
    bits.extend(out_bits);
    bits
}

/// Applies a Waksman network to `xs` given control bits, consuming them in
/// the same order `route` emits them. Used by tests and the circuit builder.
pub fn apply_network<T: Clone>(xs: &[T], bits: &mut impl Iterator<Item = bool>) -> Vec<T> {
    let n = xs.len();
    if n == 1 {
        return xs.to_vec();
    }
    if n == 2 {
        let swap = bits.next().expect("control bits underrun");
        return if swap {
            alloc::vec![xs[1].clone(), xs[0].clone()]
        } else {
            xs.to_vec()
        };
    }
    let half = n / 2;
    let mut top = Vec::with_capacity(half);
    let mut bot = Vec::with_capacity(half);
    for s in 0..half {
        let crossed = bits.next().expect("control bits underrun");
        let (a, b) = (xs[2 * s].clone(), xs[2 * s + 1].clone());
        if crossed {
            top.push(b);
            bot.push(a);
        } else {
            top.push(a);
            bot.push(b);
        }
    }
    let top = apply_network(&top, bits);
    let bot = apply_network(&bot, bits);
    let mut out = Vec::with_capacity(n);
    for d in 0..half {
        out.push(top[d].clone());
        out.push(bot[d].clone());
    }
    for d in 0..half - 1 {
        if bits.next().expect("control bits underrun") {
            out.swap(2 * d, 2 * d + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn check_perm(perm: &[usize]) {
        let bits = waksman_control_bits(perm).unwrap();
        assert_eq!(bits.len(), waksman_switch_count(perm.len()));
        let xs: Vec<usize> = (0..perm.len()).collect();
        let mut it = bits.into_iter();
        let out = apply_network(&xs, &mut it);
        assert!(it.next().is_none());
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(out[p], i, "input {i} should land at output {p}");
        }
    }

    #[test]
    fn routes_all_size4_perms() {
        let mut perm = [0usize, 1, 2, 3];
        // All 24 permutations via simple recursion-free enumeration.
        fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == v.len() {
                out.push(v.clone());
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                permutations(v, k + 1, out);
                v.swap(k, i);
            }
        }
        let mut all = Vec::new();
        permutations(&mut perm.to_vec(), 0, &mut all);
        assert_eq!(all.len(), 24);
        for p in all {
            check_perm(&p);
        }
    }

    #[test]
    fn routes_random_perms() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for &n in &[1usize, 2, 8, 16, 64, 128] {
            for _ in 0..20 {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                check_perm(&p);
            }
        }
    }

    #[test]
    fn prp_permutation_is_deterministic_bijection() {
        let p1 = derive_permutation([7u8; 16], 8);
        let p2 = derive_permutation([7u8; 16], 8);
        assert_eq!(p1, p2);
        assert_eq!(derive_permutation([1u8; 16], 1), alloc::vec![0]);
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mut non_identity = 0usize;
        for _ in 0..1000 {
            let mut key = [0u8; 16];
            rand::RngCore::fill_bytes(&mut rng, &mut key);
            let p = derive_permutation(key, 8);
            let mut seen = [false; 8];
            for &x in &p {
                assert!(!seen[x]);
                seen[x] = true;
            }
            if p.iter().enumerate().any(|(i, &x)| i != x) {
                non_identity += 1;
            }
        }
        assert!(non_identity >= 990);
    }
}
