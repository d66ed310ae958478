//! Additive secret sharing over `Z_{2^l}` with Beaver-triple multiplication
//! and a precomputed triple pool.

use alloc::vec::Vec;
use rand_core::RngCore;

use crate::channel::{tags, Channel};
use crate::error::{Error, Result};

/// The two computing servers. Party 0 acts as the garbler in circuit phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    P0 = 0,
    P1 = 1,
}

impl Party {
    pub fn index(self) -> u64 {
        self as u64
    }

    pub fn other(self) -> Party {
        match self {
            Party::P0 => Party::P1,
            Party::P1 => Party::P0,
        }
    }
}

/// Arithmetic helper for `Z_{2^l}`, 1 <= l <= 64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ring {
    bits: u32,
}

impl Ring {
    pub fn new(bits: u32) -> Result<Ring> {
        if bits == 0 || bits > 64 {
            return Err(Error::Parameter("ring bitwidth must be 1..=64".into()));
        }
        Ok(Ring { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn bytes(self) -> usize {
        self.bits.div_ceil(8) as usize
    }

    pub fn mask(self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    pub fn contains(self, v: u64) -> bool {
        v & self.mask() == v
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    pub fn sub(self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask()
    }

    pub fn mul(self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask()
    }

    pub fn neg(self, a: u64) -> u64 {
        0u64.wrapping_sub(a) & self.mask()
    }

    pub fn random(self, rng: &mut impl RngCore) -> u64 {
        rng.next_u64() & self.mask()
    }

    /// Little-endian l/8-byte encoding used on the wire.
    pub fn encode(self, v: u64, out: &mut Vec<u8>) {
        out.push(self.bytes() as u8);
        out.extend_from_slice(&v.to_le_bytes()[..self.bytes()]);
    }

    pub fn decode(self, buf: &[u8], pos: &mut usize) -> Result<u64> {
        let want = self.bytes();
        if buf.len() < *pos + 1 + want || buf[*pos] as usize != want {
            return Err(Error::Protocol("bad ring element encoding".into()));
        }
        let mut b = [0u8; 8];
        b[..want].copy_from_slice(&buf[*pos + 1..*pos + 1 + want]);
        *pos += 1 + want;
        let v = u64::from_le_bytes(b);
        if !self.contains(v) {
            return Err(Error::Protocol("ring element out of range".into()));
        }
        Ok(v)
    }
}

/// One party's l-bit additive share of a secret in `Z_{2^l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingShare {
    pub value: u64,
    pub party: Party,
    pub bits: u32,
}

impl RingShare {
    pub fn new(value: u64, party: Party, ring: Ring) -> RingShare {
        RingShare {
            value: value & ring.mask(),
            party,
            bits: ring.bits(),
        }
    }

    pub fn ring(&self) -> Ring {
        Ring { bits: self.bits }
    }

    fn check_pair(&self, other: &RingShare) -> Result<()> {
        if self.bits != other.bits {
            return Err(Error::BitwidthMismatch);
        }
        if self.party != other.party {
            return Err(Error::PartyMismatch);
        }
        Ok(())
    }

    /// Local addition of two shares held by the same party.
    pub fn add(&self, other: &RingShare) -> Result<RingShare> {
        self.check_pair(other)?;
        Ok(RingShare {
            value: self.ring().add(self.value, other.value),
            ..*self
        })
    }

    pub fn sub(&self, other: &RingShare) -> Result<RingShare> {
        self.check_pair(other)?;
        Ok(RingShare {
            value: self.ring().sub(self.value, other.value),
            ..*self
        })
    }

    /// Local multiplication by a public constant.
    pub fn mul_const(&self, c: u64) -> RingShare {
        RingShare {
            value: self.ring().mul(self.value, c),
            ..*self
        }
    }

    /// Adds a public constant; only party 0 offsets its share.
    pub fn add_const(&self, c: u64) -> RingShare {
        let v = if self.party == Party::P0 {
            self.ring().add(self.value, c)
        } else {
            self.value
        };
        RingShare { value: v, ..*self }
    }
}

/// Splits a secret into two uniform additive shares.
pub fn share(ring: Ring, secret: u64, rng: &mut impl RngCore) -> Result<(RingShare, RingShare)> {
    if !ring.contains(secret) {
        return Err(Error::OutOfRange);
    }
    let a0 = ring.random(rng);
    let a1 = ring.sub(secret, a0);
    Ok((
        RingShare::new(a0, Party::P0, ring),
        RingShare::new(a1, Party::P1, ring),
    ))
}

/// Recombines the two parties' shares.
pub fn reconstruct(s0: &RingShare, s1: &RingShare) -> Result<u64> {
    if s0.bits != s1.bits {
        return Err(Error::BitwidthMismatch);
    }
    if s0.party == s1.party {
        return Err(Error::PartyMismatch);
    }
    Ok(s0.ring().add(s0.value, s1.value))
}

/// One party's half of a multiplication triple (x, y, z = x*y).
///
/// Not `Copy` on purpose: `mul` consumes it, so a triple cannot be reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaverTriple {
    pub x: RingShare,
    pub y: RingShare,
    pub z: RingShare,
}

/// Trusted-dealer triple generation: both parties' halves at once.
pub fn gen_triples(
    ring: Ring,
    count: usize,
    rng: &mut impl RngCore,
) -> (Vec<BeaverTriple>, Vec<BeaverTriple>) {
    let mut t0 = Vec::with_capacity(count);
    let mut t1 = Vec::with_capacity(count);
    for _ in 0..count {
        let x = ring.random(rng);
        let y = ring.random(rng);
        let z = ring.mul(x, y);
        let (x0, x1) = share(ring, x, rng).expect("in range");
        let (y0, y1) = share(ring, y, rng).expect("in range");
        let (z0, z1) = share(ring, z, rng).expect("in range");
        t0.push(BeaverTriple { x: x0, y: y0, z: z0 });
        t1.push(BeaverTriple { x: x1, y: y1, z: z1 });
    }
    (t0, t1)
}

fn mul_local(ring: Ring, party: Party, t: &BeaverTriple, e: u64, f: u64) -> RingShare {
    // <c>_i = i*e*f + f*<x>_i + e*<y>_i + <z>_i
    let mut c = ring.mul(ring.mul(e, f), party.index());
    c = ring.add(c, ring.mul(f, t.x.value));
    c = ring.add(c, ring.mul(e, t.y.value));
    c = ring.add(c, t.z.value);
    RingShare::new(c, party, ring)
}

/// One Beaver multiplication; a single round exchanging the (e, f) masks.
pub fn mul<C: Channel>(
    a: &RingShare,
    b: &RingShare,
    triple: BeaverTriple,
    peer: &mut C,
) -> Result<RingShare> {
    let out = mul_batch_with(&[(*a, *b)], &mut alloc::vec![triple].into_iter(), peer)?;
    Ok(out[0])
}

/// Batched Beaver multiplications sharing one mask-exchange round.
pub fn mul_batch<C: Channel, D: Channel>(
    pairs: &[(RingShare, RingShare)],
    pool: &mut TriplePool,
    peer: &mut C,
    dealer: &mut D,
) -> Result<Vec<RingShare>> {
    let triples = pool.take(pairs.len(), dealer)?;
    mul_batch_with(pairs, &mut triples.into_iter(), peer)
}

fn mul_batch_with<C: Channel>(
    pairs: &[(RingShare, RingShare)],
    triples: &mut dyn Iterator<Item = BeaverTriple>,
    peer: &mut C,
) -> Result<Vec<RingShare>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let ring = pairs[0].0.ring();
    let party = pairs[0].0.party;
    let mut used = Vec::with_capacity(pairs.len());
    let mut msg = Vec::new();
    if pairs.len() > 1 {
        msg.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
    }
    for (a, b) in pairs {
        if a.bits != ring.bits() || b.bits != ring.bits() {
            return Err(Error::BitwidthMismatch);
        }
        if a.party != party || b.party != party {
            return Err(Error::PartyMismatch);
        }
        let t = triples.next().ok_or(Error::PoolExhausted)?;
        let e_i = ring.sub(a.value, t.x.value);
        let f_i = ring.sub(b.value, t.y.value);
        ring.encode(e_i, &mut msg);
        ring.encode(f_i, &mut msg);
        used.push(t);
    }
    peer.send(tags::MUL_MASKS, &msg)?;
    let reply = peer.recv(tags::MUL_MASKS)?;
    let mut pos = 0usize;
    if pairs.len() > 1 {
        if reply.len() < 4 {
            return Err(Error::Protocol("short mul batch".into()));
        }
        let n = u32::from_le_bytes([reply[0], reply[1], reply[2], reply[3]]) as usize;
        if n != pairs.len() {
            return Err(Error::Protocol("mul batch size mismatch".into()));
        }
        pos = 4;
    }
    let mut out = Vec::with_capacity(pairs.len());
    for ((a, b), t) in pairs.iter().zip(used.iter()) {
        let e_peer = ring.decode(&reply, &mut pos)?;
        let f_peer = ring.decode(&reply, &mut pos)?;
        let e = ring.add(ring.sub(a.value, t.x.value), e_peer);
        let f = ring.add(ring.sub(b.value, t.y.value), f_peer);
        out.push(mul_local(ring, party, t, e, f));
    }
    Ok(out)
}

/// Opens a shared value to both parties (each sends its share).
pub fn open<C: Channel>(mine: &RingShare, peer: &mut C) -> Result<u64> {
    let ring = mine.ring();
    let mut msg = Vec::new();
    ring.encode(mine.value, &mut msg);
    peer.send(tags::OPEN_SHARE, &msg)?;
    let reply = peer.recv(tags::OPEN_SHARE)?;
    let mut pos = 0;
    let theirs = ring.decode(&reply, &mut pos)?;
    Ok(ring.add(mine.value, theirs))
}

/// Default pool refill parameters.
pub const POOL_LOW_WATER: usize = 1024;
pub const POOL_BATCH: usize = 8192;

/// Per-party queue of precomputed triples, refilled synchronously from the
/// dealer at a low-water mark so both parties stay index-aligned.
pub struct TriplePool {
    ring: Ring,
    party: Party,
    queue: Vec<BeaverTriple>,
    cursor: usize,
    low_water: usize,
    batch: usize,
    consumed: u64,
    dealer_backed: bool,
}

impl TriplePool {
    /// Pool that refills from a dealer channel on demand.
    pub fn dealer_backed(ring: Ring, party: Party) -> TriplePool {
        TriplePool {
            ring,
            party,
            queue: Vec::new(),
            cursor: 0,
            low_water: POOL_LOW_WATER,
            batch: POOL_BATCH,
            consumed: 0,
            dealer_backed: true,
        }
    }

    /// Pool preloaded with a fixed set of triples; errors when exhausted.
    pub fn preloaded(ring: Ring, party: Party, triples: Vec<BeaverTriple>) -> TriplePool {
        TriplePool {
            ring,
            party,
            queue: triples,
            cursor: 0,
            low_water: 0,
            batch: 0,
            consumed: 0,
            dealer_backed: false,
        }
    }

    pub fn available(&self) -> usize {
        self.queue.len() - self.cursor
    }

    /// Triples handed out so far; equal on both parties after any sequence of
    /// operations.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    fn request_refill<C: Channel>(&mut self, count: usize, dealer: &mut C) -> Result<()> {
        let mut msg = Vec::with_capacity(8);
        msg.extend_from_slice(&(self.ring.bits() as u32).to_le_bytes());
        msg.extend_from_slice(&(count as u32).to_le_bytes());
        dealer.send(tags::TRIPLE_REQUEST, &msg)?;
        let reply = dealer.recv(tags::TRIPLE_BATCH)?;
        let mut pos = 0usize;
        if self.cursor > 0 {
            self.queue.drain(..self.cursor);
            self.cursor = 0;
        }
        for _ in 0..count {
            let x = self.ring.decode(&reply, &mut pos)?;
            let y = self.ring.decode(&reply, &mut pos)?;
            let z = self.ring.decode(&reply, &mut pos)?;
            self.queue.push(BeaverTriple {
                x: RingShare::new(x, self.party, self.ring),
                y: RingShare::new(y, self.party, self.ring),
                z: RingShare::new(z, self.party, self.ring),
            });
        }
        if pos != reply.len() {
            return Err(Error::Protocol("trailing bytes in triple batch".into()));
        }
        Ok(())
    }

    /// Takes `n` triples, refilling from the dealer as needed. Both parties
    /// call this in identical order, so their refill requests line up.
    pub fn take<C: Channel>(&mut self, n: usize, dealer: &mut C) -> Result<Vec<BeaverTriple>> {
        if self.dealer_backed {
            while self.available() < n {
                let want = self.batch.max(n - self.available());
                self.request_refill(want, dealer)?;
            }
        } else if self.available() < n {
            return Err(Error::PoolExhausted);
        }
        let out = self.queue[self.cursor..self.cursor + n].to_vec();
        self.cursor += n;
        self.consumed += n as u64;
        if self.dealer_backed && self.available() < self.low_water {
            self.request_refill(self.batch, dealer)?;
        }
        Ok(out)
    }
}

/// Serialises a dealer triple batch: three l-bit values per triple.
pub fn encode_triple_batch(ring: Ring, triples: &[BeaverTriple]) -> Vec<u8> {
    let mut out = Vec::with_capacity(triples.len() * 3 * (ring.bytes() + 1));
    for t in triples {
        ring.encode(t.x.value, &mut out);
        ring.encode(t.y.value, &mut out);
        ring.encode(t.z.value, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn share_zero_reconstructs() {
        let ring = Ring::new(64).unwrap();
        let (s0, s1) = share(ring, 0, &mut rng(1)).unwrap();
        assert_eq!(reconstruct(&s0, &s1).unwrap(), 0);
        assert_eq!(s1.value, ring.neg(s0.value));
    }

    #[test]
    fn share_rejects_out_of_range() {
        let ring = Ring::new(32).unwrap();
        assert_eq!(share(ring, 1 << 32, &mut rng(1)), Err(Error::OutOfRange));
    }

    #[test]
    fn fresh_rng_gives_fresh_shares() {
        let ring = Ring::new(64).unwrap();
        let (a, _) = share(ring, 42, &mut rng(1)).unwrap();
        let (b, _) = share(ring, 42, &mut rng(2)).unwrap();
        assert_ne!(a.value, b.value);
    }

    #[test]
    fn reconstruct_examples() {
        let ring = Ring::new(64).unwrap();
        let s0 = RingShare::new(5, Party::P0, ring);
        let s1 = RingShare::new(ring.neg(5), Party::P1, ring);
        assert_eq!(reconstruct(&s0, &s1).unwrap(), 0);
        let one0 = RingShare::new(1, Party::P0, ring);
        let one1 = RingShare::new(1, Party::P1, ring);
        assert_eq!(reconstruct(&one0, &one1).unwrap(), 2);
    }

    #[test]
    fn reconstruct_rejects_mismatch() {
        let r64 = Ring::new(64).unwrap();
        let r32 = Ring::new(32).unwrap();
        let a = RingShare::new(1, Party::P0, r64);
        let b = RingShare::new(1, Party::P1, r32);
        assert_eq!(reconstruct(&a, &b), Err(Error::BitwidthMismatch));
        let c = RingShare::new(1, Party::P0, r64);
        assert_eq!(reconstruct(&a, &c), Err(Error::PartyMismatch));
    }

    #[test]
    fn local_add_matches_modular_oracle() {
        let ring = Ring::new(64).unwrap();
        let mut r = rng(7);
        for _ in 0..1000 {
            let a = ring.random(&mut r);
            let b = ring.random(&mut r);
            let (a0, a1) = share(ring, a, &mut r).unwrap();
            let (b0, b1) = share(ring, b, &mut r).unwrap();
            let c0 = a0.add(&b0).unwrap();
            let c1 = a1.add(&b1).unwrap();
            assert_eq!(reconstruct(&c0, &c1).unwrap(), a.wrapping_add(b));
        }
    }

    #[test]
    fn add_wraps() {
        let ring = Ring::new(64).unwrap();
        let mut r = rng(9);
        let (a0, a1) = share(ring, u64::MAX, &mut r).unwrap();
        let (b0, b1) = share(ring, 1, &mut r).unwrap();
        assert_eq!(
            reconstruct(&a0.add(&b0).unwrap(), &a1.add(&b1).unwrap()).unwrap(),
            0
        );
    }

    #[test]
    fn triple_invariant_holds() {
        let ring = Ring::new(64).unwrap();
        let (t0, t1) = gen_triples(ring, 16, &mut rng(3));
        assert_eq!(t0.len(), 16);
        for (a, b) in t0.iter().zip(t1.iter()) {
            let x = reconstruct(&a.x, &b.x).unwrap();
            let y = reconstruct(&a.y, &b.y).unwrap();
            let z = reconstruct(&a.z, &b.z).unwrap();
            assert_eq!(z, x.wrapping_mul(y));
        }
    }

    #[test]
    fn gen_zero_triples() {
        let ring = Ring::new(64).unwrap();
        let (t0, t1) = gen_triples(ring, 0, &mut rng(3));
        assert!(t0.is_empty() && t1.is_empty());
    }
}
