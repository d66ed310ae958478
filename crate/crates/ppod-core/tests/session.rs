//! End-to-end Yao sessions over the in-process transport with a live dealer.

use std::collections::BTreeMap;
use std::thread;

use ppod_core::channel::{tags, Channel, Tag};
use ppod_core::circuit::{from_bits, to_bits};
use ppod_core::circuits::{build_adder, build_comparator, build_max, build_subtractor};
use ppod_core::convert::{a2y_evaluator, a2y_garbler, y2a_evaluator, y2a_garbler};
use ppod_core::error::{ChannelError, Error};
use ppod_core::ot::OtMode;
use ppod_core::ring::{reconstruct, share, Ring};
use ppod_core::sim::{loopback_pair, spawn_dealer, LoopbackChannel};
use ppod_core::yao::{words_to_bits, EvaluatorSession, GarblerSession, RunSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn harness<G, E, A, B>(garbler: G, evaluator: E) -> (A, B)
where
    A: Send + 'static,
    B: Send + 'static,
    G: FnOnce(LoopbackChannel, LoopbackChannel) -> A + Send + 'static,
    E: FnOnce(LoopbackChannel, LoopbackChannel) -> B + Send + 'static,
{
    let (d0, d1, _dealer) = spawn_dealer([9u8; 32]);
    let (p0, p1) = loopback_pair();
    let tg = thread::spawn(move || garbler(p0, d0));
    let te = thread::spawn(move || evaluator(p1, d1));
    (tg.join().expect("garbler panicked"), te.join().expect("evaluator panicked"))
}

#[test]
fn adder_session_decodes_to_both() {
    let width = 64usize;
    let cases: Vec<(u64, u64)> = {
        let mut rng = StdRng::seed_from_u64(21);
        (0..50).map(|_| (rng.gen(), rng.gen())).collect()
    };
    let expected: Vec<u64> = cases.iter().map(|&(a, b)| a.wrapping_add(b)).collect();
    let gc = cases.clone();
    let (gout, eout) = harness(
        move |mut peer, mut dealer| {
            let mut sess = GarblerSession::new(ChaCha20Rng::seed_from_u64(1), OtMode::Ideal);
            let circuit = build_adder(width).unwrap();
            gc.iter()
                .map(|&(a, _)| {
                    let mut inputs = BTreeMap::new();
                    inputs.insert("a", to_bits(a, width));
                    let out = sess
                        .run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
                        .unwrap();
                    from_bits(&out["sum"])
                })
                .collect::<Vec<u64>>()
        },
        move |mut peer, mut dealer| {
            let mut sess = EvaluatorSession::new(OtMode::Ideal);
            let circuit = build_adder(width).unwrap();
            cases
                .iter()
                .map(|&(_, b)| {
                    let mut inputs = BTreeMap::new();
                    inputs.insert("b", to_bits(b, width));
                    let out = sess
                        .run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
                        .unwrap();
                    from_bits(&out["sum"])
                })
                .collect::<Vec<u64>>()
        },
    );
    assert_eq!(gout, expected);
    assert_eq!(eout, expected);
}

#[test]
fn comparator_session_exhaustive_small_width() {
    let width = 5usize;
    let n = 1u64 << width;
    let (gout, eout) = harness(
        move |mut peer, mut dealer| {
            let mut sess = GarblerSession::new(ChaCha20Rng::seed_from_u64(2), OtMode::Ideal);
            let circuit = build_comparator(width).unwrap();
            let mut out = Vec::new();
            for a in 0..n {
                for _b in 0..n {
                    let mut inputs = BTreeMap::new();
                    inputs.insert("a", to_bits(a, width));
                    let r = sess
                        .run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
                        .unwrap();
                    out.push(r["gt"][0]);
                }
            }
            out
        },
        move |mut peer, mut dealer| {
            let mut sess = EvaluatorSession::new(OtMode::Ideal);
            let circuit = build_comparator(width).unwrap();
            let mut out = Vec::new();
            for _a in 0..n {
                for b in 0..n {
                    let mut inputs = BTreeMap::new();
                    inputs.insert("b", to_bits(b, width));
                    let r = sess
                        .run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
                        .unwrap();
                    out.push(r["gt"][0]);
                }
            }
            out
        },
    );
    let mut want = Vec::new();
    for a in 0..n {
        for b in 0..n {
            want.push(a > b);
        }
    }
    assert_eq!(gout, want);
    assert_eq!(eout, want);
}

#[test]
fn subtractor_session_matches_wrapping_oracle() {
    let width = 64usize;
    let cases: Vec<(u64, u64)> = {
        let mut rng = StdRng::seed_from_u64(5);
        let mut v: Vec<(u64, u64)> = (0..30).map(|_| (rng.gen(), rng.gen())).collect();
        v.push((0, 0));
        v.push((0, u64::MAX));
        v.push((u64::MAX, u64::MAX));
        v.push((1, 2));
        v
    };
    let expected: Vec<u64> = cases.iter().map(|&(a, b)| a.wrapping_sub(b)).collect();
    let gc = cases.clone();
    let (gout, _) = harness(
        move |mut peer, mut dealer| {
            let mut sess = GarblerSession::new(ChaCha20Rng::seed_from_u64(3), OtMode::Ideal);
            let circuit = build_subtractor(width).unwrap();
            gc.iter()
                .map(|&(a, _)| {
                    let mut inputs = BTreeMap::new();
                    inputs.insert("a", to_bits(a, width));
                    let out = sess
                        .run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
                        .unwrap();
                    from_bits(&out["diff"])
                })
                .collect::<Vec<u64>>()
        },
        move |mut peer, mut dealer| {
            let mut sess = EvaluatorSession::new(OtMode::Ideal);
            let circuit = build_subtractor(width).unwrap();
            for &(_, b) in &cases {
                let mut inputs = BTreeMap::new();
                inputs.insert("b", to_bits(b, width));
                sess.run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
                    .unwrap();
            }
        },
    );
    assert_eq!(gout, expected);
}

// A2Y into a carried slot, MAX over a carried list, then Y2A back out:
// the full conversion chain used by the protocol, with no intermediate
// cleartext.
#[test]
fn conversion_chain_round_trips() {
    let ring = Ring::new(32).unwrap();
    let width = ring.bits() as usize;
    let secrets = [17u64, 9, 0xffff_fffe, 3];
    let mut srng = StdRng::seed_from_u64(11);
    let mut shares0 = Vec::new();
    let mut shares1 = Vec::new();
    for &s in &secrets {
        let (a, b) = share(ring, s, &mut srng).unwrap();
        shares0.push(a);
        shares1.push(b);
    }
    let k = secrets.len();
    let (g, e) = harness(
        move |mut peer, mut dealer| {
            let mut sess = GarblerSession::new(ChaCha20Rng::seed_from_u64(4), OtMode::Ideal);
            let mut rng = ChaCha20Rng::seed_from_u64(40);
            // Feed each secret into its own slot, then splice them into one
            // list slot for the MAX circuit by running A2Y per word and
            // concatenating at circuit level via the max input mapping.
            let circuit = build_max(k, width).unwrap();
            for (i, s) in shares0.iter().enumerate() {
                a2y_garbler(&mut sess, s, &format!("w{i}"), &mut peer, &mut dealer).unwrap();
            }
            // MAX consumes one bundle, so gather the slots into one.
            let joined: Vec<_> = (0..k).map(|i| format!("w{i}")).collect();
            sess.join_slots(&joined.iter().map(|s| s.as_str()).collect::<Vec<_>>(), "list")
                .unwrap();
            let spec = RunSpec::new().carry("list", "list").store("max", "m");
            sess.run(&circuit, &spec, &BTreeMap::new(), &mut peer, &mut dealer)
                .unwrap();
            y2a_garbler(&mut sess, &mut rng, ring, "m", &mut peer, &mut dealer).unwrap()
        },
        move |mut peer, mut dealer| {
            let mut sess = EvaluatorSession::new(OtMode::Ideal);
            let circuit = build_max(k, width).unwrap();
            for (i, s) in shares1.iter().enumerate() {
                a2y_evaluator(&mut sess, s, &format!("w{i}"), &mut peer, &mut dealer).unwrap();
            }
            let joined: Vec<_> = (0..k).map(|i| format!("w{i}")).collect();
            sess.join_slots(&joined.iter().map(|s| s.as_str()).collect::<Vec<_>>(), "list")
                .unwrap();
            let spec = RunSpec::new().carry("list", "list").store("max", "m");
            sess.run(&circuit, &spec, &BTreeMap::new(), &mut peer, &mut dealer)
                .unwrap();
            y2a_evaluator(&mut sess, ring, "m", &mut peer, &mut dealer).unwrap()
        },
    );
    assert_eq!(reconstruct(&g, &e).unwrap(), 0xffff_fffe);
    assert_ne!(g.value, 0xffff_fffe, "garbler share must not equal the value");
}

/// Peer channel that corrupts one byte of the first garbled payload.
struct Corrupting {
    inner: LoopbackChannel,
    done: bool,
}

impl Channel for Corrupting {
    fn send(&mut self, tag: Tag, payload: &[u8]) -> Result<(), ChannelError> {
        if tag == tags::GARBLED && !self.done {
            self.done = true;
            let mut p = payload.to_vec();
            // Flip the pad byte of every row of the first and-gate table
            // (tables start after the 32-byte hash and 4-byte count).
            for row in 0..4 {
                p[36 + row * 24 + 23] ^= 0x80;
            }
            return self.inner.send(tag, &p);
        }
        self.inner.send(tag, payload)
    }
    fn recv(&mut self, tag: Tag) -> Result<Vec<u8>, ChannelError> {
        self.inner.recv(tag)
    }
}

#[test]
fn corrupted_table_is_detected() {
    let width = 8usize;
    let (_, eres) = harness(
        move |peer, mut dealer| {
            let mut peer = Corrupting { inner: peer, done: false };
            let mut sess = GarblerSession::new(ChaCha20Rng::seed_from_u64(6), OtMode::Ideal);
            let circuit = build_comparator(width).unwrap();
            let mut inputs = BTreeMap::new();
            inputs.insert("a", to_bits(99, width));
            // The evaluator aborts, so this side sees a dead channel.
            let _ = sess.run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer);
        },
        move |mut peer, mut dealer| {
            let mut sess = EvaluatorSession::new(OtMode::Ideal);
            let circuit = build_comparator(width).unwrap();
            let mut inputs = BTreeMap::new();
            inputs.insert("b", to_bits(7, width));
            sess.run(&circuit, &RunSpec::new(), &inputs, &mut peer, &mut dealer)
        },
    );
    assert_eq!(eres.unwrap_err(), Error::Integrity);
}

#[test]
fn words_round_trip_through_bundle_layout() {
    let vals = [0u64, 1, u32::MAX as u64, 12345];
    let bits = words_to_bits(&vals, 33);
    assert_eq!(ppod_core::yao::bits_to_words(&bits, 33), vals.to_vec());
}
