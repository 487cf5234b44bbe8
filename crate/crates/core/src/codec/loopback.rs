//! In-process, lossless, ordered transport between two endpoints.

use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};

use thiserror::Error;

use super::message::{decode_message, encode_message, CodecError, Message};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("transport closed")]
    Closed,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// One side of a loopback pair. Messages cross the channel as encoded lines.
#[derive(Debug)]
pub struct Endpoint {
    tx: Option<Sender<Vec<u8>>>,
    rx: Receiver<Vec<u8>>,
}

pub fn open_loopback_pair() -> (Endpoint, Endpoint) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (
        Endpoint {
            tx: Some(a_tx),
            rx: a_rx,
        },
        Endpoint {
            tx: Some(b_tx),
            rx: b_rx,
        },
    )
}

impl Endpoint {
    pub fn send(&self, msg: &Message) -> Result<(), TransportError> {
        self.send_raw(encode_message(msg))
    }

    /// Sends bytes as-is, bypassing the encoder.
    pub fn send_raw(&self, line: Vec<u8>) -> Result<(), TransportError> {
        let tx = self.tx.as_ref().ok_or(TransportError::Closed)?;
        tx.send(line).map_err(|_| TransportError::Closed)
    }

    /// Blocks until the peer's next message arrives. After the peer closes,
    /// queued messages are still delivered before [`TransportError::Closed`].
    pub fn recv(&self) -> Result<Message, TransportError> {
        let line = self.rx.recv().map_err(|_| TransportError::Closed)?;
        Ok(decode_message(&line)?)
    }

    /// Non-blocking receive: `Ok(None)` when nothing is queued.
    pub fn try_recv(&self) -> Result<Option<Message>, TransportError> {
        match self.rx.try_recv() {
            Ok(line) => Ok(Some(decode_message(&line)?)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => Err(TransportError::Closed),
        }
    }

    /// Stops sending. The peer drains what was already sent, then sees `Closed`.
    pub fn close(&mut self) {
        self.tx = None;
    }
}
