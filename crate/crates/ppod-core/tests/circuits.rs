//! Plain evaluation of the composite circuits against their reference
//! implementations.

use std::collections::BTreeMap;

use ppod_core::circuit::{from_bits, to_bits};
use ppod_core::circuits::{
    build_derandomise, build_max, build_query, build_randomise, build_sort_shuffle,
    derive_permutation, plain_sort_shuffle_select, waksman_control_bits, SortShuffleSpec,
    FLAG_BITS, ID_BITS,
};
use ppod_core::yao::{bits_to_words, words_to_bits};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn identity_tail_perm(head: &[usize], n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p[..head.len()].copy_from_slice(head);
    p
}

fn run_sort_shuffle(
    keys: &[u64],
    ids: Option<&[u64]>,
    k: usize,
    key_bits: usize,
    head_perm: &[usize],
) -> (Vec<u64>, Option<Vec<u64>>) {
    let spec = SortShuffleSpec {
        records: keys.len(),
        k,
        key_bits,
        ids: ids.map(|v| v.to_vec()),
        reveal_ids: ids.is_some(),
    };
    let circuit = build_sort_shuffle(&spec).unwrap();
    let mut rng = StdRng::seed_from_u64(17);
    let shares0: Vec<u64> = keys.iter().map(|_| rng.gen::<u64>() & mask(key_bits)).collect();
    let shares1: Vec<u64> = keys
        .iter()
        .zip(shares0.iter())
        .map(|(&kv, &s)| kv.wrapping_sub(s) & mask(key_bits))
        .collect();
    let perm = identity_tail_perm(head_perm, spec.padded());
    let switch = waksman_control_bits(&perm).unwrap();
    let mut inputs = BTreeMap::new();
    inputs.insert("key_g", words_to_bits(&shares0, key_bits));
    inputs.insert("key_e", words_to_bits(&shares1, key_bits));
    inputs.insert("switch", switch);
    let out = circuit.eval_plain(&inputs).unwrap();
    let out_keys = bits_to_words(&out["keys"], key_bits);
    let out_ids = out.get("ids").map(|b| bits_to_words(b, ID_BITS));
    (out_keys, out_ids)
}

fn mask(bits: usize) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[test]
fn sort_shuffle_matches_plain_reference() {
    let mut rng = StdRng::seed_from_u64(3);
    for &records in &[3usize, 8, 13, 16] {
        for k in 1..=records.min(5) {
            let key_bits = 16;
            let keys: Vec<u64> = (0..records).map(|_| rng.gen::<u64>() & mask(key_bits)).collect();
            let ids: Vec<u64> = (0..records as u64).map(|i| 100 + i).collect();
            let mut kb = [0u8; 16];
            rng.fill(&mut kb);
            let head = derive_permutation(kb, k);
            let (got_keys, got_ids) =
                run_sort_shuffle(&keys, Some(&ids), k, key_bits, &head);
            let want = plain_sort_shuffle_select(&keys, Some(&ids), k, key_bits, &head);
            let want_keys: Vec<u64> = want.iter().map(|&(kv, _)| kv).collect();
            let want_ids: Vec<u64> = want.iter().map(|&(_, id)| id).collect();
            assert_eq!(got_keys, want_keys, "records={records} k={k}");
            assert_eq!(got_ids.unwrap(), want_ids, "records={records} k={k}");
        }
    }
}

#[test]
fn sort_shuffle_selects_smallest_multiset() {
    let mut rng = StdRng::seed_from_u64(8);
    for &records in &[8usize, 32, 64] {
        let key_bits = 32;
        let keys: Vec<u64> = (0..records).map(|_| rng.gen::<u64>() & mask(key_bits)).collect();
        let k = 4;
        let mut kb = [0u8; 16];
        rng.fill(&mut kb);
        let head = derive_permutation(kb, k);
        let (got, _) = run_sort_shuffle(&keys, None, k, key_bits, &head);
        let mut got_sorted = got;
        got_sorted.sort_unstable();
        let mut want = keys.clone();
        want.sort_unstable();
        want.truncate(k);
        assert_eq!(got_sorted, want);
    }
}

// Adversarial keys: duplicates everywhere, all-equal, and values colliding
// with the sentinel pattern.
#[test]
fn sort_shuffle_handles_duplicate_and_extreme_keys() {
    let key_bits = 8;
    let cases: Vec<Vec<u64>> = vec![
        vec![5, 5, 5, 5, 5],
        vec![255, 255, 0, 0, 128, 128],
        vec![0, 0, 0],
        vec![254, 255, 253, 255],
    ];
    for keys in cases {
        let ids: Vec<u64> = (0..keys.len() as u64).collect();
        for k in 1..=keys.len().min(3) {
            let head: Vec<usize> = (0..k).rev().collect();
            let (got_keys, got_ids) = run_sort_shuffle(&keys, Some(&ids), k, key_bits, &head);
            let want = plain_sort_shuffle_select(&keys, Some(&ids), k, key_bits, &head);
            assert_eq!(got_keys, want.iter().map(|&(kv, _)| kv).collect::<Vec<_>>());
            assert_eq!(got_ids.unwrap(), want.iter().map(|&(_, id)| id).collect::<Vec<_>>());
        }
    }
}

#[test]
fn sort_shuffle_gate_count_is_independent_of_k() {
    let spec = |k: usize| SortShuffleSpec {
        records: 12,
        k,
        key_bits: 32,
        ids: None,
        reveal_ids: false,
    };
    let base = build_sort_shuffle(&spec(1)).unwrap().counts();
    for k in 2..=6 {
        let c = build_sort_shuffle(&spec(k)).unwrap().counts();
        assert_eq!(c.and, base.and, "k={k}");
        assert_eq!(c.total(), base.total(), "k={k}");
    }
}

#[test]
fn max_circuit_finds_maximum() {
    let width = 16;
    let circuit = build_max(5, width).unwrap();
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..50 {
        let vals: Vec<u64> = (0..5).map(|_| rng.gen::<u64>() & mask(width)).collect();
        let mut inputs = BTreeMap::new();
        inputs.insert("list", words_to_bits(&vals, width));
        let out = circuit.eval_plain(&inputs).unwrap();
        assert_eq!(from_bits(&out["max"]), *vals.iter().max().unwrap());
    }
}

#[test]
fn randomise_then_derandomise_recovers_pairing() {
    let k = 6;
    let width = 32;
    let rc = build_randomise(k, width).unwrap();
    let dists: Vec<u64> = vec![10, 20, 30, 40, 50, 60];
    let masks: Vec<u64> = vec![1000, 2000, 3000, 4000, 5000, 6000];
    let tags: Vec<u64> = vec![11, 22, 33, 44, 55, 66];
    let magic = 0xdead_beefu64 & mask(FLAG_BITS);
    let mut inputs = BTreeMap::new();
    inputs.insert("dists", words_to_bits(&dists, width));
    inputs.insert("masks", words_to_bits(&masks, width));
    inputs.insert("rm", words_to_bits(&tags, FLAG_BITS));
    inputs.insert("magic", to_bits(magic, FLAG_BITS));
    let out = rc.eval_plain(&inputs).unwrap();
    let shares = bits_to_words(&out["shares"], width);
    let flags = bits_to_words(&out["flags"], FLAG_BITS);
    for i in 0..k {
        assert_eq!(shares[i], dists[i].wrapping_sub(masks[i]) & mask(width));
        assert_eq!(flags[i], tags[i] ^ magic);
    }

    // Permute the evaluator-held half and check the pairing matrix points
    // back at the original order.
    let perm = [3usize, 0, 4, 1, 5, 2];
    let mut pflags = vec![0u64; k];
    for (i, &p) in perm.iter().enumerate() {
        pflags[p] = flags[i];
    }
    let dc = build_derandomise(k).unwrap();
    let mut dinputs = BTreeMap::new();
    dinputs.insert("rm", words_to_bits(&tags, FLAG_BITS));
    dinputs.insert("flags", words_to_bits(&pflags, FLAG_BITS));
    dinputs.insert("magic", to_bits(magic, FLAG_BITS));
    let dout = dc.eval_plain(&dinputs).unwrap();
    let bits = &dout["pairing"];
    for i in 0..k {
        for j in 0..k {
            assert_eq!(bits[i * k + j], perm[i] == j, "entry ({i},{j})");
        }
    }
}

#[test]
fn query_circuit_ors_threshold_hits() {
    let width = 16;
    let circuit = build_query(3, width).unwrap();
    let check = |dists: [u64; 3], eps: u64| -> bool {
        let dg = [7u64, 100, 3000];
        let de: Vec<u64> = dists
            .iter()
            .zip(dg.iter())
            .map(|(&d, &g)| d.wrapping_sub(g) & mask(width))
            .collect();
        let eg = 5u64;
        let ee = eps.wrapping_sub(eg) & mask(width);
        let mut inputs = BTreeMap::new();
        inputs.insert("dist_g", words_to_bits(&dg, width));
        inputs.insert("dist_e", words_to_bits(&de, width));
        inputs.insert("eps_g", to_bits(eg, width));
        inputs.insert("eps_e", to_bits(ee, width));
        circuit.eval_plain(&inputs).unwrap()["assert"][0]
    };
    assert!(check([50, 60, 70], 50)); // inclusive boundary
    assert!(!check([50, 60, 70], 49));
    assert!(check([1000, 5, 1000], 10));
    assert!(!check([1000, 2000, 3000], 0));
}
