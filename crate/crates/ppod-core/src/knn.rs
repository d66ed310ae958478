//! Secure k-nearest-neighbour building blocks: batched distance shares, the
//! sort-shuffle-truncate selection, k-distance extraction, the threshold
//! comparison, and the Randomise/Derandomise list lifecycle.

use alloc::collections::BTreeSet;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::channel::Channel;
use crate::circuits::{
    build_compare_threshold, build_derandomise, build_max, build_randomise,
    build_sort_shuffle, derive_permutation, waksman_control_bits, SortShuffleSpec, FLAG_BITS,
    ID_BITS,
};
use crate::error::{Error, Result};
use crate::ring::{mul_batch, Party, Ring, RingShare, TriplePool};
use crate::yao::{bits_to_words, words_to_bits, EvaluatorSession, GarblerSession, RunSpec};

/// Work accounting checked by the complexity tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    /// Secure squared-distance evaluations performed.
    pub distance_evals: u64,
}

/// Squared Euclidean distance shares from one query point to many stored
/// points; all multiplications share one mask-exchange round. Both parties
/// call this with their own halves of the shares.
pub fn distance_batch<C: Channel, D: Channel>(
    ring: Ring,
    points: &[Vec<RingShare>],
    q: &[RingShare],
    pool: &mut TriplePool,
    peer: &mut C,
    dealer: &mut D,
    counters: &mut WorkCounters,
) -> Result<Vec<RingShare>> {
    let dim = q.len();
    let mut pairs = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch);
        }
        for (pc, qc) in p.iter().zip(q.iter()) {
            let d = pc.sub(qc)?;
            pairs.push((d, d));
        }
    }
    let squares = mul_batch(&pairs, pool, peer, dealer)?;
    counters.distance_evals += points.len() as u64;
    let mut out = Vec::with_capacity(points.len());
    for chunk in squares.chunks(dim) {
        let mut acc = RingShare::new(0, chunk[0].party, ring);
        for s in chunk {
            acc = acc.add(s)?;
        }
        out.push(acc);
    }
    Ok(out)
}

fn sort_spec(ring: Ring, records: usize, k: usize, ids: Option<&[u64]>) -> SortShuffleSpec {
    SortShuffleSpec {
        records,
        k,
        key_bits: ring.bits() as usize,
        ids: ids.map(|v| v.to_vec()),
        reveal_ids: ids.is_some(),
    }
}

/// Garbler half of kNN selection. The k smallest distances land in `slot` as
/// carried Yao state, in an order only the evaluator's shuffle key knows.
/// When `ids` is given, the selected ids are decoded to both parties and
/// returned in that shuffled order.
pub fn knn_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    ring: Ring,
    dists: &[RingShare],
    k: usize,
    slot: &str,
    ids: Option<&[u64]>,
    peer: &mut C,
    dealer: &mut D,
) -> Result<Option<Vec<u64>>> {
    let spec = sort_spec(ring, dists.len(), k, ids);
    let circuit = build_sort_shuffle(&spec)?;
    let run = RunSpec::new().store("keys", slot);
    let mut inputs = BTreeMap::new();
    let values: Vec<u64> = dists.iter().map(|s| s.value).collect();
    inputs.insert("key_g", words_to_bits(&values, spec.key_bits));
    let out = sess.run(&circuit, &run, &inputs, peer, dealer)?;
    Ok(out.get("ids").map(|bits| bits_to_words(bits, ID_BITS)))
}

/// Evaluator half of kNN selection; derives the shuffle from a fresh PRP key.
pub fn knn_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    rng: &mut impl RngCore,
    ring: Ring,
    dists: &[RingShare],
    k: usize,
    slot: &str,
    ids: Option<&[u64]>,
    peer: &mut C,
    dealer: &mut D,
) -> Result<Option<Vec<u64>>> {
    let spec = sort_spec(ring, dists.len(), k, ids);
    let circuit = build_sort_shuffle(&spec)?;
    let run = RunSpec::new().store("keys", slot);
    let mut inputs = BTreeMap::new();
    let values: Vec<u64> = dists.iter().map(|s| s.value).collect();
    inputs.insert("key_e", words_to_bits(&values, spec.key_bits));
    inputs.insert("switch", switch_bits(rng, spec.padded(), k));
    let out = sess.run(&circuit, &run, &inputs, peer, dealer)?;
    Ok(out.get("ids").map(|bits| bits_to_words(bits, ID_BITS)))
}

/// Shuffle control bits: a PRP-derived permutation of the first k slots,
/// identity elsewhere, routed through the Waksman network of the full padded
/// size so the network shape never depends on k.
fn switch_bits(rng: &mut impl RngCore, padded: usize, k: usize) -> Vec<bool> {
    let mut key = [0u8; 16];
    rng.fill_bytes(&mut key);
    let head = derive_permutation(key, k);
    let mut perm: Vec<usize> = (0..padded).collect();
    perm[..k].copy_from_slice(&head);
    waksman_control_bits(&perm).expect("valid permutation")
}

/// Same permutation derivation as [`knn_evaluator`], exposed for the oracle.
pub fn shuffle_permutation(key: [u8; 16], k: usize) -> Vec<usize> {
    derive_permutation(key, k)
}

/// MAX over the k carried distances in `keys_slot`; the k-distance stays in
/// Yao form in `kdist_slot`.
pub fn kdist_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    ring: Ring,
    k: usize,
    keys_slot: &str,
    kdist_slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<()> {
    let circuit = build_max(k, ring.bits() as usize)?;
    let run = RunSpec::new().carry("list", keys_slot).store("max", kdist_slot);
    sess.run(&circuit, &run, &BTreeMap::new(), peer, dealer)?;
    Ok(())
}

pub fn kdist_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    ring: Ring,
    k: usize,
    keys_slot: &str,
    kdist_slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<()> {
    let circuit = build_max(k, ring.bits() as usize)?;
    let run = RunSpec::new().carry("list", keys_slot).store("max", kdist_slot);
    sess.run(&circuit, &run, &BTreeMap::new(), peer, dealer)?;
    Ok(())
}

/// Strict `carried value > threshold` where the threshold is reconstructed
/// from additive shares; the bit is revealed to both parties.
pub fn compare_threshold_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    slot: &str,
    thresh: &RingShare,
    peer: &mut C,
    dealer: &mut D,
) -> Result<bool> {
    let width = thresh.bits as usize;
    let circuit = build_compare_threshold(width)?;
    let run = RunSpec::new().carry("value", slot);
    let mut inputs = BTreeMap::new();
    inputs.insert("thresh_g", crate::circuit::to_bits(thresh.value, width));
    let out = sess.run(&circuit, &run, &inputs, peer, dealer)?;
    Ok(out["gt"][0])
}

pub fn compare_threshold_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    slot: &str,
    thresh: &RingShare,
    peer: &mut C,
    dealer: &mut D,
) -> Result<bool> {
    let width = thresh.bits as usize;
    let circuit = build_compare_threshold(width)?;
    let run = RunSpec::new().carry("value", slot);
    let mut inputs = BTreeMap::new();
    inputs.insert("thresh_e", crate::circuit::to_bits(thresh.value, width));
    let out = sess.run(&circuit, &run, &inputs, peer, dealer)?;
    Ok(out["gt"][0])
}

/// Garbler's stored half of a randomised neighbour list: the masks are its
/// additive distance shares, the tag words re-pair entries later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomisedListG {
    pub masks: Vec<u64>,
    pub tags: Vec<u32>,
}

/// Evaluator's stored half, locally permuted: masked distances (its additive
/// shares), the tag words XORed with its magic value, and the magic itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomisedListE {
    pub shares: Vec<u64>,
    pub flags: Vec<u32>,
    pub magic: u32,
}

impl RandomisedListG {
    /// Additive share view, index-aligned with the garbler's tag order.
    pub fn shares(&self, ring: Ring) -> Vec<RingShare> {
        self.masks
            .iter()
            .map(|&m| RingShare::new(m, Party::P0, ring))
            .collect()
    }
}

impl RandomisedListE {
    /// Additive share view re-aligned to the garbler's order using the
    /// derandomise pairing (`pairing[i]` = this side's index for entry i).
    pub fn aligned_shares(&self, pairing: &[usize], ring: Ring) -> Vec<RingShare> {
        pairing
            .iter()
            .map(|&j| RingShare::new(self.shares[j], Party::P1, ring))
            .collect()
    }
}

fn distinct_tags(rng: &mut impl RngCore, k: usize) -> Vec<u32> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let t = rng.next_u32();
        if seen.insert(t) {
            out.push(t);
        }
    }
    out
}

/// Garbler half of Randomise: consumes the carried distances in `keys_slot`,
/// keeping fresh masks and tag words. The evaluator decodes only uniformly
/// masked values.
pub fn randomise_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    rng: &mut impl RngCore,
    ring: Ring,
    k: usize,
    keys_slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<RandomisedListG> {
    let width = ring.bits() as usize;
    let circuit = build_randomise(k, width)?;
    let run = RunSpec::new().carry("dists", keys_slot);
    let masks: Vec<u64> = (0..k).map(|_| ring.random(rng)).collect();
    let tags = distinct_tags(rng, k);
    let mut inputs = BTreeMap::new();
    inputs.insert("masks", words_to_bits(&masks, width));
    inputs.insert(
        "rm",
        words_to_bits(&tags.iter().map(|&t| t as u64).collect::<Vec<_>>(), FLAG_BITS),
    );
    sess.run(&circuit, &run, &inputs, peer, dealer)?;
    sess.drop_slot(keys_slot);
    Ok(RandomisedListG { masks, tags })
}

/// Evaluator half of Randomise: decodes its masked shares and flag words,
/// then applies a fresh local permutation before storing them.
pub fn randomise_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    rng: &mut impl RngCore,
    ring: Ring,
    k: usize,
    keys_slot: &str,
    peer: &mut C,
    dealer: &mut D,
) -> Result<RandomisedListE> {
    let width = ring.bits() as usize;
    let circuit = build_randomise(k, width)?;
    let run = RunSpec::new().carry("dists", keys_slot);
    let magic = rng.next_u32();
    let mut inputs = BTreeMap::new();
    inputs.insert("magic", crate::circuit::to_bits(magic as u64, FLAG_BITS));
    let out = sess.run(&circuit, &run, &inputs, peer, dealer)?;
    sess.drop_slot(keys_slot);
    let shares = bits_to_words(&out["shares"], width);
    let flags: Vec<u32> = bits_to_words(&out["flags"], FLAG_BITS)
        .into_iter()
        .map(|v| v as u32)
        .collect();
    // Local permutation so stored order carries no information for the
    // garbler until a Derandomise run re-pairs the halves.
    let mut key = [0u8; 16];
    rng.fill_bytes(&mut key);
    let perm = derive_permutation(key, k);
    let mut pshares = alloc::vec![0u64; k];
    let mut pflags = alloc::vec![0u32; k];
    for (i, &p) in perm.iter().enumerate() {
        pshares[p] = shares[i];
        pflags[p] = flags[i];
    }
    Ok(RandomisedListE {
        shares: pshares,
        flags: pflags,
        magic,
    })
}

pub fn pairing_from_bits(bits: &[bool], n: usize) -> Result<Vec<usize>> {
    if bits.len() != n * n {
        return Err(Error::Protocol("pairing matrix size mismatch".into()));
    }
    let mut pairing = Vec::with_capacity(n);
    let mut used = alloc::vec![false; n];
    for i in 0..n {
        let row = &bits[i * n..(i + 1) * n];
        let mut hit = None;
        for (j, &b) in row.iter().enumerate() {
            if b {
                if hit.is_some() {
                    return Err(Error::PairingIntegrity);
                }
                hit = Some(j);
            }
        }
        let j = hit.ok_or(Error::PairingIntegrity)?;
        if used[j] {
            return Err(Error::PairingIntegrity);
        }
        used[j] = true;
        pairing.push(j);
    }
    Ok(pairing)
}

/// Garbler half of Derandomise: both parties learn the pairing permutation
/// (`pairing[i]` = evaluator index of garbler entry i) and nothing else.
pub fn derandomise_garbler<R: RngCore, C: Channel, D: Channel>(
    sess: &mut GarblerSession<R>,
    list: &RandomisedListG,
    peer: &mut C,
    dealer: &mut D,
) -> Result<Vec<usize>> {
    let n = list.tags.len();
    let circuit = build_derandomise(n)?;
    let mut inputs = BTreeMap::new();
    inputs.insert(
        "rm",
        words_to_bits(&list.tags.iter().map(|&t| t as u64).collect::<Vec<_>>(), FLAG_BITS),
    );
    let out = sess.run(&circuit, &RunSpec::new(), &inputs, peer, dealer)?;
    pairing_from_bits(&out["pairing"], n)
}

pub fn derandomise_evaluator<C: Channel, D: Channel>(
    sess: &mut EvaluatorSession,
    list: &RandomisedListE,
    peer: &mut C,
    dealer: &mut D,
) -> Result<Vec<usize>> {
    let n = list.flags.len();
    let circuit = build_derandomise(n)?;
    let mut inputs = BTreeMap::new();
    inputs.insert(
        "flags",
        words_to_bits(&list.flags.iter().map(|&f| f as u64).collect::<Vec<_>>(), FLAG_BITS),
    );
    inputs.insert("magic", crate::circuit::to_bits(list.magic as u64, FLAG_BITS));
    let out = sess.run(&circuit, &RunSpec::new(), &inputs, peer, dealer)?;
    pairing_from_bits(&out["pairing"], n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_accepts_permutation_matrix() {
        // 3x3 identity with rows 0 and 2 swapped.
        let mut bits = alloc::vec![false; 9];
        bits[2] = true;
        bits[4] = true;
        bits[6] = true;
        assert_eq!(pairing_from_bits(&bits, 3).unwrap(), alloc::vec![2, 1, 0]);
    }

    #[test]
    fn pairing_rejects_missing_and_double_matches() {
        let bits = alloc::vec![false; 9];
        assert_eq!(pairing_from_bits(&bits, 3), Err(Error::PairingIntegrity));
        let mut bits = alloc::vec![false; 9];
        bits[0] = true;
        bits[1] = true;
        assert_eq!(pairing_from_bits(&bits, 3), Err(Error::PairingIntegrity));
        let mut bits = alloc::vec![false; 9];
        bits[0] = true;
        bits[3] = true;
        bits[8] = true;
        assert_eq!(pairing_from_bits(&bits, 3), Err(Error::PairingIntegrity));
    }

    #[test]
    fn distinct_tags_are_distinct() {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let tags = distinct_tags(&mut rng, 100);
        let set: BTreeSet<u32> = tags.iter().copied().collect();
        assert_eq!(set.len(), 100);
    }
}
