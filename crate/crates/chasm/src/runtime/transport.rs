//! Message transport between patch workers.
//!
//! Two realizations behind one trait: in-process channels (default) and a
//! loopback-socket variant for multi-process style testing. The numerics
//! never name the transport; every exchange is a bulk-synchronous phase in
//! which all sends are posted before any receive is awaited, so the fixed
//! communication graph cannot deadlock.

use crossbeam_channel::{unbounded, Receiver, Sender};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// Payload kinds moving between neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// Half-stencil boundary contributions for the spline solve.
    PmbcContrib,
    /// Corrected shared-plane values after a shifted interpolation.
    AdvectionCorrection,
}

#[derive(Debug, Clone)]
pub struct ExchangeMessage {
    pub kind: MessageKind,
    pub axis: u8,
    /// Per-k shift-sign mask for corrections (1 where the payload applies);
    /// empty for boundary contributions.
    pub mask: Vec<u8>,
    pub payload: Vec<f64>,
}

/// One worker's view of the transport: owned exclusively by its thread.
pub trait WorkerLink: Send {
    fn send(&mut self, to: usize, msg: ExchangeMessage);
    fn recv(&mut self, from: usize) -> ExchangeMessage;
}

/// Message/byte counters shared across all endpoints of a transport.
#[derive(Debug, Default)]
pub struct TransportCounters {
    pub messages: AtomicU64,
    pub bytes: AtomicU64,
}

impl TransportCounters {
    fn record(&self, msg: &ExchangeMessage) {
        self.messages.fetch_add(1, Ordering::Relaxed);
        self.bytes.fetch_add(
            (msg.payload.len() * 8 + msg.mask.len() + 4) as u64,
            Ordering::Relaxed,
        );
    }
}

// ---------------------------------------------------------------------------
// In-process channel transport.

pub struct ChannelEndpoint {
    me: usize,
    senders: HashMap<usize, Sender<ExchangeMessage>>,
    receivers: HashMap<usize, Receiver<ExchangeMessage>>,
    counters: Arc<TransportCounters>,
}

impl WorkerLink for ChannelEndpoint {
    fn send(&mut self, to: usize, msg: ExchangeMessage) {
        self.counters.record(&msg);
        self.senders
            .get(&to)
            .unwrap_or_else(|| panic!("patch {} has no channel to {}", self.me, to))
            .send(msg)
            .expect("receiver dropped");
    }

    fn recv(&mut self, from: usize) -> ExchangeMessage {
        self.receivers
            .get(&from)
            .unwrap_or_else(|| panic!("patch {} has no channel from {}", self.me, from))
            .recv()
            .expect("sender dropped")
    }
}

/// Build channel endpoints for the given neighbor pairs (unordered edges).
pub fn channel_endpoints(
    n: usize,
    edges: &[(usize, usize)],
    counters: Arc<TransportCounters>,
) -> Vec<ChannelEndpoint> {
    let mut endpoints: Vec<ChannelEndpoint> = (0..n)
        .map(|me| ChannelEndpoint {
            me,
            senders: HashMap::new(),
            receivers: HashMap::new(),
            counters: counters.clone(),
        })
        .collect();
    for &(a, b) in edges {
        let (s_ab, r_ab) = unbounded();
        let (s_ba, r_ba) = unbounded();
        endpoints[a].senders.insert(b, s_ab);
        endpoints[b].receivers.insert(a, r_ab);
        endpoints[b].senders.insert(a, s_ba);
        endpoints[a].receivers.insert(b, r_ba);
    }
    endpoints
}

// ---------------------------------------------------------------------------
// Loopback-socket transport.

fn encode(msg: &ExchangeMessage, buf: &mut Vec<u8>) {
    buf.clear();
    buf.push(match msg.kind {
        MessageKind::PmbcContrib => 0,
        MessageKind::AdvectionCorrection => 1,
    });
    buf.push(msg.axis);
    buf.extend_from_slice(&(msg.mask.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(msg.payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(&msg.mask);
    for v in &msg.payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn decode(stream: &mut impl Read) -> std::io::Result<ExchangeMessage> {
    let mut head = [0u8; 10];
    stream.read_exact(&mut head)?;
    let kind = match head[0] {
        0 => MessageKind::PmbcContrib,
        _ => MessageKind::AdvectionCorrection,
    };
    let axis = head[1];
    let mask_len = u32::from_le_bytes(head[2..6].try_into().unwrap()) as usize;
    let payload_len = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
    let mut mask = vec![0u8; mask_len];
    stream.read_exact(&mut mask)?;
    let mut raw = vec![0u8; payload_len * 8];
    stream.read_exact(&mut raw)?;
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ExchangeMessage {
        kind,
        axis,
        mask,
        payload,
    })
}

pub struct SocketEndpoint {
    me: usize,
    writers: HashMap<usize, TcpStream>,
    inbox: HashMap<usize, Receiver<ExchangeMessage>>,
    counters: Arc<TransportCounters>,
    scratch: Vec<u8>,
    _readers: Arc<Vec<JoinHandle<()>>>,
}

impl WorkerLink for SocketEndpoint {
    fn send(&mut self, to: usize, msg: ExchangeMessage) {
        self.counters.record(&msg);
        encode(&msg, &mut self.scratch);
        let len = (self.scratch.len() as u32).to_le_bytes();
        let w = self
            .writers
            .get_mut(&to)
            .unwrap_or_else(|| panic!("patch {} has no socket to {}", self.me, to));
        w.write_all(&len).expect("socket write");
        w.write_all(&self.scratch).expect("socket write");
    }

    fn recv(&mut self, from: usize) -> ExchangeMessage {
        self.inbox
            .get(&from)
            .unwrap_or_else(|| panic!("patch {} has no socket from {}", self.me, from))
            .recv()
            .expect("reader thread gone")
    }
}

/// Build loopback TCP endpoints for the given neighbor edges. A reader
/// thread per directed edge drains the socket into an unbounded queue so
/// large simultaneous sends cannot stall in kernel buffers.
pub fn socket_endpoints(
    n: usize,
    edges: &[(usize, usize)],
    counters: Arc<TransportCounters>,
) -> std::io::Result<Vec<SocketEndpoint>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;

    struct Slot {
        writers: HashMap<usize, TcpStream>,
        inbox: HashMap<usize, Receiver<ExchangeMessage>>,
    }
    let mut slots: Vec<Slot> = (0..n)
        .map(|_| Slot {
            writers: HashMap::new(),
            inbox: HashMap::new(),
        })
        .collect();
    let mut readers = Vec::new();

    for &(a, b) in edges {
        // Two directed connections per unordered edge.
        for (from, to) in [(a, b), (b, a)] {
            let out = TcpStream::connect(addr)?;
            let (incoming, _) = listener.accept()?;
            out.set_nodelay(true).ok();
            incoming.set_nodelay(true).ok();
            slots[from].writers.insert(to, out);
            let (tx, rx) = unbounded();
            slots[to].inbox.insert(from, rx);
            let mut stream = incoming;
            readers.push(std::thread::spawn(move || loop {
                let mut len = [0u8; 4];
                if stream.read_exact(&mut len).is_err() {
                    return;
                }
                let n = u32::from_le_bytes(len) as usize;
                let mut frame = vec![0u8; n];
                if stream.read_exact(&mut frame).is_err() {
                    return;
                }
                let msg = decode(&mut frame.as_slice()).expect("bad frame");
                if tx.send(msg).is_err() {
                    return;
                }
            }));
        }
    }
    let readers = Arc::new(readers);
    Ok(slots
        .into_iter()
        .enumerate()
        .map(|(me, slot)| SocketEndpoint {
            me,
            writers: slot.writers,
            inbox: slot.inbox,
            counters: counters.clone(),
            scratch: Vec::new(),
            _readers: readers.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ping_pong(mut links: Vec<impl WorkerLink + 'static>) {
        let l1 = links.pop().unwrap();
        let l0 = links.pop().unwrap();
        let t0 = std::thread::spawn(move || {
            let mut l0 = l0;
            l0.send(
                1,
                ExchangeMessage {
                    kind: MessageKind::PmbcContrib,
                    axis: 2,
                    mask: vec![1, 0, 1],
                    payload: vec![1.5, -2.25, 1e-300],
                },
            );
            let back = l0.recv(1);
            assert_eq!(back.kind, MessageKind::AdvectionCorrection);
            assert_eq!(back.payload, vec![42.0]);
        });
        let t1 = std::thread::spawn(move || {
            let mut l1 = l1;
            let msg = l1.recv(0);
            assert_eq!(msg.kind, MessageKind::PmbcContrib);
            assert_eq!(msg.axis, 2);
            assert_eq!(msg.mask, vec![1, 0, 1]);
            assert_eq!(msg.payload, vec![1.5, -2.25, 1e-300]);
            l1.send(
                0,
                ExchangeMessage {
                    kind: MessageKind::AdvectionCorrection,
                    axis: 0,
                    mask: vec![],
                    payload: vec![42.0],
                },
            );
        });
        t0.join().unwrap();
        t1.join().unwrap();
    }

    #[test]
    fn channel_round_trip() {
        let counters = Arc::new(TransportCounters::default());
        let links = channel_endpoints(2, &[(0, 1)], counters.clone());
        ping_pong(links);
        assert_eq!(counters.messages.load(Ordering::Relaxed), 2);
        assert!(counters.bytes.load(Ordering::Relaxed) > 0);
    }

    #[test]
    fn socket_round_trip_is_bit_exact() {
        let counters = Arc::new(TransportCounters::default());
        let links = socket_endpoints(2, &[(0, 1)], counters).unwrap();
        ping_pong(links);
    }
}
