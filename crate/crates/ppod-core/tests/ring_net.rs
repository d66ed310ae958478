//! Networked share arithmetic: Beaver multiplication through the dealer.

use std::thread;

use ppod_core::error::Error;
use ppod_core::ring::{
    gen_triples, mul_batch, open, reconstruct, share, Party, Ring, RingShare, TriplePool,
};
use ppod_core::sim::{loopback_pair, spawn_dealer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn thousand_multiplications_match_wrapping_oracle() {
    let ring = Ring::new(64).unwrap();
    let mut rng = StdRng::seed_from_u64(42);
    let cases: Vec<(u64, u64)> = (0..1000).map(|_| (rng.gen(), rng.gen())).collect();
    let mut xs0 = Vec::new();
    let mut xs1 = Vec::new();
    for &(a, b) in &cases {
        let (a0, a1) = share(ring, a, &mut rng).unwrap();
        let (b0, b1) = share(ring, b, &mut rng).unwrap();
        xs0.push((a0, b0));
        xs1.push((a1, b1));
    }

    let (d0, d1, _dealer) = spawn_dealer([7u8; 32]);
    let (p0, p1) = loopback_pair();
    let run = |party: Party, pairs: Vec<(RingShare, RingShare)>, mut peer, mut dealer| {
        thread::spawn(move || {
            let mut pool = TriplePool::dealer_backed(ring, party);
            // Split into several batches to exercise refills mid-stream.
            let mut out = Vec::new();
            for chunk in pairs.chunks(300) {
                out.extend(mul_batch(chunk, &mut pool, &mut peer, &mut dealer).unwrap());
            }
            (out, pool.consumed())
        })
    };
    let t0 = run(Party::P0, xs0, p0, d0);
    let t1 = run(Party::P1, xs1, p1, d1);
    let (r0, c0) = t0.join().unwrap();
    let (r1, c1) = t1.join().unwrap();
    assert_eq!(c0, 1000);
    assert_eq!(c1, 1000);
    for ((s0, s1), &(a, b)) in r0.iter().zip(r1.iter()).zip(cases.iter()) {
        assert_eq!(reconstruct(s0, s1).unwrap(), a.wrapping_mul(b));
    }
}

#[test]
fn small_ring_multiplication() {
    let ring = Ring::new(8).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let (a0, a1) = share(ring, 200, &mut rng).unwrap();
    let (b0, b1) = share(ring, 3, &mut rng).unwrap();
    let (d0, d1, _dealer) = spawn_dealer([1u8; 32]);
    let (p0, p1) = loopback_pair();
    let t0 = thread::spawn(move || {
        let mut pool = TriplePool::dealer_backed(ring, Party::P0);
        let mut peer = p0;
        let mut dealer = d0;
        mul_batch(&[(a0, b0)], &mut pool, &mut peer, &mut dealer).unwrap()[0]
    });
    let t1 = thread::spawn(move || {
        let mut pool = TriplePool::dealer_backed(ring, Party::P1);
        let mut peer = p1;
        let mut dealer = d1;
        mul_batch(&[(a1, b1)], &mut pool, &mut peer, &mut dealer).unwrap()[0]
    });
    let s0 = t0.join().unwrap();
    let s1 = t1.join().unwrap();
    assert_eq!(reconstruct(&s0, &s1).unwrap(), (200u64 * 3) & 0xff);
}

#[test]
fn preloaded_pool_errors_when_dry() {
    let ring = Ring::new(32).unwrap();
    let mut rng = StdRng::seed_from_u64(2);
    let (t0, _t1) = gen_triples(ring, 2, &mut rng);
    let mut pool = TriplePool::preloaded(ring, Party::P0, t0);
    let (mut a, _b) = loopback_pair();
    assert_eq!(pool.take(2, &mut a).unwrap().len(), 2);
    assert_eq!(pool.take(1, &mut a).unwrap_err(), Error::PoolExhausted);
}

#[test]
fn open_reveals_value_to_both() {
    let ring = Ring::new(64).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    let (s0, s1) = share(ring, 123456789, &mut rng).unwrap();
    let (p0, p1) = loopback_pair();
    let t0 = thread::spawn(move || {
        let mut peer = p0;
        open(&s0, &mut peer).unwrap()
    });
    let t1 = thread::spawn(move || {
        let mut peer = p1;
        open(&s1, &mut peer).unwrap()
    });
    assert_eq!(t0.join().unwrap(), 123456789);
    assert_eq!(t1.join().unwrap(), 123456789);
}
