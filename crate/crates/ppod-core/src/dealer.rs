//! Trusted-dealer message handling, independent of transport.
//!
//! The dealer serves two functions and sees no protocol data beyond them:
//! multiplication-triple batches (identical requests arrive from both parties
//! in the same order, so queued halves stay index-aligned) and ideal OT
//! (label pairs from the garbler matched FIFO with choice bits from the
//! evaluator).

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{tags, Tag};
use crate::error::{Error, Result};
use crate::ot;
use crate::ring::{encode_triple_batch, gen_triples, Party, Ring};

/// Dealer state machine. Feed it every message a party sends; dispatch the
/// replies it returns. Works the same whether the transport is in-process
/// queues or TCP sockets.
pub struct DealerCore {
    rng: ChaCha20Rng,
    /// Encoded triple batches generated for one party while serving the
    /// other's request, waiting for the matching request.
    pending_triples: [VecDeque<Vec<u8>>; 2],
    /// Garbler label-pair messages not yet matched with choice bits.
    pending_labels: VecDeque<Vec<u8>>,
    /// Evaluator choice messages not yet matched with label pairs.
    pending_choices: VecDeque<Vec<u8>>,
    triples_dealt: u64,
}

impl DealerCore {
    pub fn new(seed: [u8; 32]) -> DealerCore {
        DealerCore {
            rng: ChaCha20Rng::from_seed(seed),
            pending_triples: [VecDeque::new(), VecDeque::new()],
            pending_labels: VecDeque::new(),
            pending_choices: VecDeque::new(),
            triples_dealt: 0,
        }
    }

    /// Total triples generated across both parties' aligned requests.
    pub fn triples_dealt(&self) -> u64 {
        self.triples_dealt
    }

    /// Handles one message from `from`; returns messages to dispatch as
    /// (recipient, tag, payload).
    pub fn handle(
        &mut self,
        from: Party,
        tag: Tag,
        payload: &[u8],
    ) -> Result<Vec<(Party, Tag, Vec<u8>)>> {
        match tag {
            tags::TRIPLE_REQUEST => {
                if payload.len() != 8 {
                    return Err(Error::Protocol("bad triple request".into()));
                }
                let bits = u32::from_le_bytes(payload[..4].try_into().unwrap());
                let count = u32::from_le_bytes(payload[4..].try_into().unwrap()) as usize;
                let me = from.index() as usize;
                let batch = match self.pending_triples[me].pop_front() {
                    Some(b) => b,
                    None => {
                        let ring = Ring::new(bits)?;
                        let (t0, t1) = gen_triples(ring, count, &mut self.rng);
                        self.triples_dealt += count as u64;
                        let mine = match from {
                            Party::P0 => (encode_triple_batch(ring, &t0), encode_triple_batch(ring, &t1)),
                            Party::P1 => (encode_triple_batch(ring, &t1), encode_triple_batch(ring, &t0)),
                        };
                        self.pending_triples[from.other().index() as usize].push_back(mine.1);
                        mine.0
                    }
                };
                Ok(alloc::vec![(from, tags::TRIPLE_BATCH, batch)])
            }
            tags::OT_LABELS => {
                if from != Party::P0 {
                    return Err(Error::Protocol("ot labels from wrong party".into()));
                }
                self.pending_labels.push_back(payload.to_vec());
                self.match_ot()
            }
            tags::OT_CHOICES => {
                if from != Party::P1 {
                    return Err(Error::Protocol("ot choices from wrong party".into()));
                }
                self.pending_choices.push_back(payload.to_vec());
                self.match_ot()
            }
            _ => Err(Error::Protocol("unexpected dealer message".into())),
        }
    }

    fn match_ot(&mut self) -> Result<Vec<(Party, Tag, Vec<u8>)>> {
        let mut out = Vec::new();
        while !self.pending_labels.is_empty() && !self.pending_choices.is_empty() {
            let labels = self.pending_labels.pop_front().unwrap();
            let choices = self.pending_choices.pop_front().unwrap();
            out.push((Party::P1, tags::OT_RESULT, ot::dealer_select(&labels, &choices)?));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{reconstruct, RingShare};

    #[test]
    fn aligned_triple_requests_share_one_generation() {
        let mut d = DealerCore::new([1u8; 32]);
        let ring = Ring::new(32).unwrap();
        let mut req = Vec::new();
        req.extend_from_slice(&32u32.to_le_bytes());
        req.extend_from_slice(&4u32.to_le_bytes());
        let r0 = d.handle(Party::P0, tags::TRIPLE_REQUEST, &req).unwrap();
        let r1 = d.handle(Party::P1, tags::TRIPLE_REQUEST, &req).unwrap();
        assert_eq!(d.triples_dealt(), 4);
        let parse = |msg: &[u8], party: Party| {
            let mut pos = 0;
            let mut v = Vec::new();
            while pos < msg.len() {
                let x = ring.decode(msg, &mut pos).unwrap();
                let y = ring.decode(msg, &mut pos).unwrap();
                let z = ring.decode(msg, &mut pos).unwrap();
                v.push((
                    RingShare::new(x, party, ring),
                    RingShare::new(y, party, ring),
                    RingShare::new(z, party, ring),
                ));
            }
            v
        };
        let t0 = parse(&r0[0].2, Party::P0);
        let t1 = parse(&r1[0].2, Party::P1);
        assert_eq!(t0.len(), 4);
        for (a, b) in t0.iter().zip(t1.iter()) {
            let x = reconstruct(&a.0, &b.0).unwrap();
            let y = reconstruct(&a.1, &b.1).unwrap();
            let z = reconstruct(&a.2, &b.2).unwrap();
            assert_eq!(z, ring.mul(x, y));
        }
    }

    #[test]
    fn ot_matches_in_either_arrival_order() {
        let mut label_msg = Vec::new();
        label_msg.extend_from_slice(&1u32.to_le_bytes());
        label_msg.extend_from_slice(&7u128.to_le_bytes());
        label_msg.extend_from_slice(&9u128.to_le_bytes());
        let mut choice_msg = Vec::new();
        choice_msg.extend_from_slice(&1u32.to_le_bytes());
        choice_msg.push(1);

        let mut d = DealerCore::new([0u8; 32]);
        assert!(d.handle(Party::P1, tags::OT_CHOICES, &choice_msg).unwrap().is_empty());
        let out = d.handle(Party::P0, tags::OT_LABELS, &label_msg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, Party::P1);
        assert_eq!(out[0].2, 9u128.to_le_bytes().to_vec());
    }
}
