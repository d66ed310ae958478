//! TCP transport with the same frame format as the in-process channel.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use ppod_core::channel::{decode_frame, encode_frame, Channel, Tag, FRAME_OVERHEAD};
use ppod_core::error::ChannelError;

/// One framed, full-duplex connection to a peer or the dealer.
pub struct TcpChannel {
    stream: TcpStream,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> Result<TcpChannel> {
        stream.set_nodelay(true)?;
        Ok(TcpChannel { stream })
    }

    /// Accepts exactly one connection on `addr`.
    pub fn listen<A: ToSocketAddrs>(addr: A) -> Result<TcpChannel> {
        let listener = TcpListener::bind(addr).context("bind failed")?;
        let (stream, _) = listener.accept().context("accept failed")?;
        TcpChannel::new(stream)
    }

    /// Connects to `addr`, retrying briefly so start order does not matter.
    pub fn connect<A: ToSocketAddrs + Clone>(addr: A) -> Result<TcpChannel> {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            match TcpStream::connect(addr.clone()) {
                Ok(stream) => return TcpChannel::new(stream),
                Err(e) if Instant::now() < deadline => {
                    let _ = e;
                    std::thread::sleep(Duration::from_millis(25));
                }
                Err(e) => return Err(e).context("connect failed"),
            }
        }
    }

    pub fn try_clone(&self) -> Result<TcpChannel> {
        Ok(TcpChannel { stream: self.stream.try_clone()? })
    }

    /// Reads one complete frame regardless of its tag.
    pub fn recv_any(&mut self) -> Result<(Tag, Vec<u8>), ChannelError> {
        let mut head = [0u8; FRAME_OVERHEAD];
        self.stream
            .read_exact(&mut head)
            .map_err(|_| ChannelError::Disconnected)?;
        let len = u32::from_le_bytes([head[0], head[1], head[2], head[3]]) as usize;
        let mut frame = vec![0u8; FRAME_OVERHEAD + len];
        frame[..FRAME_OVERHEAD].copy_from_slice(&head);
        self.stream
            .read_exact(&mut frame[FRAME_OVERHEAD..])
            .map_err(|_| ChannelError::Disconnected)?;
        let (tag, payload) = decode_frame(&frame)?;
        Ok((tag, payload.to_vec()))
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, tag: Tag, payload: &[u8]) -> Result<(), ChannelError> {
        let frame = encode_frame(tag, payload)?;
        self.stream
            .write_all(&frame)
            .map_err(|_| ChannelError::Disconnected)
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
