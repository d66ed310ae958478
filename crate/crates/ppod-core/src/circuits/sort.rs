//! Batcher odd-even mergesort network and the SortShuffle circuit: A2Y of the
//! distance shares, sort by key, shuffle by the evaluator-keyed permutation,
//! truncate to the k smallest.

use alloc::vec::Vec;

use crate::circuit::{Circuit, Destination, InputOwner, LeakClass, WireId};
use crate::error::{Error, Result};

use super::builder::Builder;
use super::perm::waksman_switch_count;
use super::{ID_BITS, SENTINEL_ID};

/// Compare-and-swap index pairs of the odd-even mergesort network for a
/// power-of-two input size, in evaluation order. CAS(i, j) with i < j places
/// the smaller key at i.
pub fn batcher_pairs(n: usize) -> Vec<(usize, usize)> {
    assert!(n.is_power_of_two());
    let mut pairs = Vec::new();
    sort_range(0, n, &mut pairs);
    pairs
}

fn sort_range(lo: usize, n: usize, pairs: &mut Vec<(usize, usize)>) {
    if n > 1 {
        let m = n / 2;
        sort_range(lo, m, pairs);
        sort_range(lo + m, m, pairs);
        merge_range(lo, n, 1, pairs);
    }
}

fn merge_range(lo: usize, n: usize, r: usize, pairs: &mut Vec<(usize, usize)>) {
    let m = r * 2;
    if m < n {
        merge_range(lo, n, m, pairs);
        merge_range(lo + r, n, m, pairs);
        let mut i = lo + r;
        while i + r < lo + n {
            pairs.push((i, i + r));
            i += m;
        }
    } else {
        pairs.push((lo, lo + r));
    }
}

/// Parameters for [`build_sort_shuffle`].
#[derive(Debug, Clone)]
pub struct SortShuffleSpec {
    /// Number of real records entering the sort.
    pub records: usize,
    /// How many smallest records survive truncation.
    pub k: usize,
    /// Key (distance) width in bits.
    pub key_bits: usize,
    /// Plaintext record ids, public to both parties; when present they ride
    /// through every compare-and-swap next to their key.
    pub ids: Option<Vec<u64>>,
    /// Decode the selected ids to both parties (the update-phase leakage).
    pub reveal_ids: bool,
}

impl SortShuffleSpec {
    /// Records after sentinel padding; also the shuffle network size.
    pub fn padded(&self) -> usize {
        self.records.next_power_of_two()
    }

    /// Evaluator control bits the circuit expects.
    pub fn switch_bits(&self) -> usize {
        waksman_switch_count(self.padded())
    }
}

/// Builds the SortShuffle circuit.
///
/// Inputs: `key_g` and `key_e` (the two parties' additive distance shares,
/// reconstructed inside via ripple adders) and `switch` (evaluator-derived
/// Waksman control bits). The shuffle spans the whole padded array so the
/// circuit shape depends only on the record count, never on k; the caller's
/// permutation keeps the k smallest records in the first k output slots.
///
/// Outputs: `keys` (k records, Yao shares only) and, when `reveal_ids` is
/// set, `ids` decoded to both parties.
pub fn build_sort_shuffle(spec: &SortShuffleSpec) -> Result<Circuit> {
    if spec.k == 0 || spec.k > spec.records {
        return Err(Error::Parameter("need 1 <= k <= record count".into()));
    }
    Builder::width_check(spec.key_bits)?;
    if let Some(ids) = &spec.ids {
        if ids.len() != spec.records {
            return Err(Error::Parameter("id list length mismatch".into()));
        }
        if ids.iter().any(|&id| id >= SENTINEL_ID) {
            return Err(Error::Parameter("id exceeds id width".into()));
        }
    } else if spec.reveal_ids {
        return Err(Error::Parameter("cannot reveal ids without ids".into()));
    }

    let mut b = Builder::new();
    let key_g = b.input("key_g", InputOwner::Garbler, spec.records * spec.key_bits);
    let key_e = b.input("key_e", InputOwner::Evaluator, spec.records * spec.key_bits);
    let switch = b.input("switch", InputOwner::Evaluator, spec.switch_bits());

    let with_ids = spec.ids.is_some();
    let padded = spec.padded();
    let sentinel_key = if spec.key_bits == 64 {
        u64::MAX
    } else {
        (1u64 << spec.key_bits) - 1
    };

    // A record is key bits followed by optional id bits; the pair moves as a
    // unit through every compare-and-swap.
    let mut records: Vec<Vec<WireId>> = Vec::with_capacity(padded);
    for r in 0..spec.records {
        let g = &key_g[r * spec.key_bits..(r + 1) * spec.key_bits];
        let e = &key_e[r * spec.key_bits..(r + 1) * spec.key_bits];
        let mut rec = b.adder(g, e);
        if let Some(ids) = &spec.ids {
            rec.extend(b.constant_word(ids[r], ID_BITS));
        }
        records.push(rec);
    }
    for _ in spec.records..padded {
        let mut rec = b.constant_word(sentinel_key, spec.key_bits);
        if with_ids {
            rec.extend(b.constant_word(SENTINEL_ID, ID_BITS));
        }
        records.push(rec);
    }

    for (i, j) in batcher_pairs(padded) {
        let gt = b.gt(
            &records[i][..spec.key_bits],
            &records[j][..spec.key_bits],
        );
        let (lo, hi) = b.cswap(gt, &records[i], &records[j]);
        records[i] = lo;
        records[j] = hi;
    }

    let shuffled = waksman_gates(&mut b, &records, &mut switch.iter().copied());

    let mut keys = Vec::with_capacity(spec.k * spec.key_bits);
    let mut ids_out = Vec::with_capacity(spec.k * ID_BITS);
    for rec in shuffled.iter().take(spec.k) {
        keys.extend_from_slice(&rec[..spec.key_bits]);
        if with_ids {
            ids_out.extend_from_slice(&rec[spec.key_bits..]);
        }
    }
    b.output("keys", Destination::Reshare, LeakClass::Masked, keys);
    if spec.reveal_ids {
        b.output("ids", Destination::Both, LeakClass::KnnIds, ids_out);
    }
    b.finish()
}

/// Waksman network at the gate level; consumes control wires in the same
/// order as `perm::apply_network` consumes bits.
fn waksman_gates(
    b: &mut Builder,
    records: &[Vec<WireId>],
    ctrl: &mut impl Iterator<Item = WireId>,
) -> Vec<Vec<WireId>> {
    let n = records.len();
    if n == 1 {
        return records.to_vec();
    }
    if n == 2 {
        let s = ctrl.next().expect("control wires underrun");
        let (x, y) = b.cswap(s, &records[0], &records[1]);
        return alloc::vec![x, y];
    }
    let half = n / 2;
    let mut top = Vec::with_capacity(half);
    let mut bot = Vec::with_capacity(half);
    for s in 0..half {
        let c = ctrl.next().expect("control wires underrun");
        let (x, y) = b.cswap(c, &records[2 * s], &records[2 * s + 1]);
        top.push(x);
        bot.push(y);
    }
    let top = waksman_gates(b, &top, ctrl);
    let bot = waksman_gates(b, &bot, ctrl);
    let mut out = Vec::with_capacity(n);
    for d in 0..half {
        out.push(top[d].clone());
        out.push(bot[d].clone());
    }
    for d in 0..half - 1 {
        let c = ctrl.next().expect("control wires underrun");
        let (x, y) = b.cswap(c, &out[2 * d], &out[2 * d + 1]);
        out[2 * d] = x;
        out[2 * d + 1] = y;
    }
    out
}

/// Plaintext mirror of the sort-truncate-shuffle pipeline, including the
/// network's tie behaviour. Returns the k selected (key, id) records in
/// shuffled order.
pub fn plain_sort_shuffle_select(
    keys: &[u64],
    ids: Option<&[u64]>,
    k: usize,
    key_bits: usize,
    perm: &[usize],
) -> Vec<(u64, u64)> {
    let padded = keys.len().next_power_of_two();
    let sentinel_key = if key_bits == 64 {
        u64::MAX
    } else {
        (1u64 << key_bits) - 1
    };
    let mut recs: Vec<(u64, u64)> = keys
        .iter()
        .enumerate()
        .map(|(i, &key)| (key, ids.map_or(0, |ids| ids[i])))
        .collect();
    recs.resize(padded, (sentinel_key, SENTINEL_ID));
    for (i, j) in batcher_pairs(padded) {
        if recs[i].0 > recs[j].0 {
            recs.swap(i, j);
        }
    }
    let mut out = alloc::vec![(0u64, 0u64); k];
    for (i, rec) in recs.into_iter().take(k).enumerate() {
        out[perm[i]] = rec;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // 0-1 principle: a comparator network that sorts every 0/1 sequence
    // sorts everything.
    #[test]
    fn batcher_sorts_all_binary_sequences() {
        for &n in &[2usize, 4, 8, 16] {
            let pairs = batcher_pairs(n);
            for v in 0u32..(1 << n) {
                let mut xs: Vec<u32> = (0..n).map(|i| (v >> i) & 1).collect();
                for &(i, j) in &pairs {
                    if xs[i] > xs[j] {
                        xs.swap(i, j);
                    }
                }
                assert!(xs.windows(2).all(|w| w[0] <= w[1]), "n={n} v={v:b}");
            }
        }
    }

    #[test]
    fn batcher_pair_counts() {
        // Known comparator counts for odd-even mergesort.
        assert_eq!(batcher_pairs(2).len(), 1);
        assert_eq!(batcher_pairs(4).len(), 5);
        assert_eq!(batcher_pairs(8).len(), 19);
        assert_eq!(batcher_pairs(16).len(), 63);
    }
}
