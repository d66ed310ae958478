//! In-process transport: queue-backed channels carrying the same frames a
//! socket would, plus a threaded dealer service. Used for the `inproc`
//! execution mode and throughout the test suite.

use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::vec::Vec;

use crate::channel::{decode_frame, encode_frame, Channel, Tag};
use crate::dealer::DealerCore;
use crate::error::ChannelError;
use crate::ring::Party;

/// One endpoint of a bidirectional in-process channel. Frames are encoded
/// exactly as on a socket so metered byte counts match across transports.
pub struct LoopbackChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

pub fn loopback_pair() -> (LoopbackChannel, LoopbackChannel) {
    let (atx, brx) = mpsc::channel();
    let (btx, arx) = mpsc::channel();
    (
        LoopbackChannel { tx: atx, rx: arx },
        LoopbackChannel { tx: btx, rx: brx },
    )
}

impl LoopbackChannel {
    /// Receives whatever frame comes next, tag included.
    pub fn recv_any(&mut self) -> Result<(Tag, Vec<u8>), ChannelError> {
        let frame = self.rx.recv().map_err(|_| ChannelError::Disconnected)?;
        let (tag, payload) = decode_frame(&frame)?;
        Ok((tag, payload.to_vec()))
    }
}

impl Channel for LoopbackChannel {
    fn send(&mut self, tag: Tag, payload: &[u8]) -> Result<(), ChannelError> {
        let frame = encode_frame(tag, payload)?;
        self.tx.send(frame).map_err(|_| ChannelError::Disconnected)
    }

    fn recv(&mut self, tag: Tag) -> Result<Vec<u8>, ChannelError> {
        let (got, payload) = self.recv_any()?;
        if got != tag {
            return Err(ChannelError::TagMismatch {
                expected: tag.0,
                got: got.0,
            });
        }
        Ok(payload)
    }
}

/// Running dealer service; dropping the party-side channels shuts it down.
pub struct DealerHandle {
    threads: Vec<JoinHandle<()>>,
}

impl DealerHandle {
    pub fn join(self) {
        for t in self.threads {
            t.join().expect("dealer thread panicked");
        }
    }
}

/// Spawns the dealer on background threads and returns the channel each
/// party talks to it over.
pub fn spawn_dealer(seed: [u8; 32]) -> (LoopbackChannel, LoopbackChannel, DealerHandle) {
    let (p0_side, d0_side) = loopback_pair();
    let (p1_side, d1_side) = loopback_pair();
    let core = Arc::new(Mutex::new(DealerCore::new(seed)));
    let senders = [d0_side.tx.clone(), d1_side.tx.clone()];

    let spawn = |party: Party, mut ch: LoopbackChannel| {
        let core = Arc::clone(&core);
        let senders = senders.clone();
        thread::spawn(move || {
            while let Ok((tag, payload)) = ch.recv_any() {
                let replies = core
                    .lock()
                    .unwrap()
                    .handle(party, tag, &payload)
                    .expect("dealer protocol violation");
                for (to, tag, body) in replies {
                    let frame = encode_frame(tag, &body).expect("dealer frame oversize");
                    // A closed peer just means that party is done.
                    let _ = senders[to.index() as usize].send(frame);
                }
            }
        })
    };
    let t0 = spawn(Party::P0, d0_side);
    let t1 = spawn(Party::P1, d1_side);
    (
        p0_side,
        p1_side,
        DealerHandle {
            threads: std::vec![t0, t1],
        },
    )
}

/// Runs a garbler closure and an evaluator closure on their own threads with
/// a connected peer pair, returning both results.
pub fn run_pair<A, B, FA, FB>(fa: FA, fb: FB) -> (A, B)
where
    A: Send + 'static,
    B: Send + 'static,
    FA: FnOnce(LoopbackChannel) -> A + Send + 'static,
    FB: FnOnce(LoopbackChannel) -> B + Send + 'static,
{
    let (ca, cb) = loopback_pair();
    let ta = thread::spawn(move || fa(ca));
    let tb = thread::spawn(move || fb(cb));
    (ta.join().expect("party 0 panicked"), tb.join().expect("party 1 panicked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::tags;

    #[test]
    fn frames_round_trip() {
        let (mut a, mut b) = loopback_pair();
        a.send(tags::ECHO, b"hello").unwrap();
        assert_eq!(b.recv(tags::ECHO).unwrap(), b"hello");
        b.send(tags::ECHO, b"").unwrap();
        assert_eq!(a.recv(tags::ECHO).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn tag_mismatch_is_reported() {
        let (mut a, mut b) = loopback_pair();
        a.send(tags::ECHO, b"x").unwrap();
        assert_eq!(
            b.recv(tags::GARBLED),
            Err(ChannelError::TagMismatch {
                expected: tags::GARBLED.0,
                got: tags::ECHO.0
            })
        );
    }

    #[test]
    fn disconnect_is_reported() {
        let (a, mut b) = loopback_pair();
        drop(a);
        assert_eq!(b.recv(tags::ECHO), Err(ChannelError::Disconnected));
    }
}
