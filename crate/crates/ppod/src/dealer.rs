//! Networked dealer service: accepts both parties over TCP and serves
//! triples and transfer labels from a single seeded core.

use std::net::{TcpListener, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread;

use anyhow::{bail, Context, Result};
use ppod_core::channel::{tags, Channel};
use ppod_core::dealer::DealerCore;
use ppod_core::ring::Party;

use crate::tcp::TcpChannel;

/// Announces our party id to the dealer; must be the first frame sent on a
/// dealer connection.
pub fn hello(chan: &mut TcpChannel, party: Party) -> Result<()> {
    chan.send(tags::ECHO, &[party.index() as u8])
        .map_err(|e| anyhow::anyhow!("dealer hello failed: {e:?}"))
}

/// Serves one two-party session: waits for both parties to connect and
/// identify themselves, then routes dealer traffic until both disconnect.
pub fn serve<A: ToSocketAddrs>(addr: A, seed: [u8; 32]) -> Result<u64> {
    let listener = TcpListener::bind(addr).context("dealer bind failed")?;
    let mut conns: [Option<TcpChannel>; 2] = [None, None];
    while conns.iter().any(|c| c.is_none()) {
        let (stream, _) = listener.accept().context("dealer accept failed")?;
        let mut chan = TcpChannel::new(stream)?;
        let (tag, payload) = chan
            .recv_any()
            .map_err(|e| anyhow::anyhow!("dealer hello recv failed: {e:?}"))?;
        if tag != tags::ECHO || payload.len() != 1 || payload[0] > 1 {
            bail!("malformed dealer hello");
        }
        let idx = payload[0] as usize;
        if conns[idx].is_some() {
            bail!("party {idx} connected twice");
        }
        conns[idx] = Some(chan);
    }
    let c0 = conns[0].take().unwrap();
    let c1 = conns[1].take().unwrap();

    let core = Arc::new(Mutex::new(DealerCore::new(seed)));
    let writers = [
        Arc::new(Mutex::new(c0.try_clone()?)),
        Arc::new(Mutex::new(c1.try_clone()?)),
    ];
    let spawn = |party: Party, mut chan: TcpChannel| {
        let core = Arc::clone(&core);
        let writers = writers.clone();
        thread::spawn(move || {
            while let Ok((tag, payload)) = chan.recv_any() {
                let replies = core
                    .lock()
                    .unwrap()
                    .handle(party, tag, &payload)
                    .expect("dealer protocol violation");
                for (to, tag, body) in replies {
                    // A closed peer just means that party finished first.
                    let _ = writers[to.index() as usize].lock().unwrap().send(tag, &body);
                }
            }
        })
    };
    let t0 = spawn(Party::P0, c0);
    let t1 = spawn(Party::P1, c1);
    t0.join().expect("dealer thread panicked");
    t1.join().expect("dealer thread panicked");
    let dealt = core.lock().unwrap().triples_dealt();
    Ok(dealt)
}
