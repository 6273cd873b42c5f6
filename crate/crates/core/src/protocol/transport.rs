//! Ordered point-to-point channels among the session's parties.
//!
//! Every party owns one [`Endpoint`]. Incoming traffic from all peers lands
//! in a single inbox; [`Endpoint::recv_from`] picks the next message from one
//! peer and parks the rest. A peer that goes away (its endpoint is dropped,
//! or its socket closes) is reported as a channel failure to anyone waiting
//! on it.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;

use super::message::{read_frame, write_frame, Message, Payload, PartyRole};
use super::ProtocolError;

/// Parameters every party must agree on before talking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionParams {
    pub session_id: u64,
    pub ring_bits: u8,
    pub frac_bits: u8,
    pub config_hash: [u8; 32],
}

impl SessionParams {
    fn handshake(&self, role: PartyRole) -> Payload {
        Payload::Handshake {
            session_id: self.session_id,
            role,
            ring_bits: self.ring_bits,
            frac_bits: self.frac_bits,
            config_hash: self.config_hash,
        }
    }

    /// Checks a peer's handshake and returns the role it claims.
    fn verify(&self, msg: &Message) -> Result<PartyRole, ProtocolError> {
        match &msg.payload {
            Payload::Handshake { session_id, role, ring_bits, frac_bits, config_hash } => {
                let mismatch = |what: &str| Err(ProtocolError::Handshake(format!("{role} disagrees on {what}")));
                if *session_id != self.session_id || msg.session_id != self.session_id {
                    return mismatch("session id");
                }
                if (*ring_bits, *frac_bits) != (self.ring_bits, self.frac_bits) {
                    return mismatch("ring parameters");
                }
                if *config_hash != self.config_hash {
                    return mismatch("configuration hash");
                }
                if msg.sender != *role {
                    return mismatch("its own role");
                }
                Ok(*role)
            }
            other => Err(ProtocolError::Handshake(format!("expected Handshake, got {}", other.name()))),
        }
    }
}

enum Event {
    Message(Box<Message>),
    Closed(PartyRole),
    Failed(PartyRole, String),
}

enum Sink {
    Local(Sender<Event>),
    Tcp(BufWriter<TcpStream>),
}

impl Sink {
    fn send(&mut self, msg: Message) -> Result<(), String> {
        match self {
            Sink::Local(tx) => tx.send(Event::Message(Box::new(msg))).map_err(|_| "receiver is gone".to_string()),
            Sink::Tcp(w) => write_frame(w, &msg).map_err(|e| e.to_string()),
        }
    }

    fn close(&mut self, me: PartyRole) {
        match self {
            Sink::Local(tx) => {
                let _ = tx.send(Event::Closed(me));
            }
            Sink::Tcp(w) => {
                let _ = w.get_ref().shutdown(std::net::Shutdown::Write);
            }
        }
    }
}

/// Messages received by one party, in arrival order.
pub type AuditLog = Arc<Mutex<Vec<Message>>>;

pub struct Endpoint {
    role: PartyRole,
    session_id: u64,
    sinks: BTreeMap<PartyRole, Sink>,
    inbox: Receiver<Event>,
    parked: HashMap<PartyRole, VecDeque<Message>>,
    gone: HashMap<PartyRole, String>,
    next_seq: HashMap<PartyRole, u64>,
    last_seq: HashMap<PartyRole, u64>,
    audit: Option<AuditLog>,
}

impl Endpoint {
    fn new(role: PartyRole, session_id: u64, sinks: BTreeMap<PartyRole, Sink>, inbox: Receiver<Event>) -> Self {
        Endpoint {
            role,
            session_id,
            sinks,
            inbox,
            parked: HashMap::new(),
            gone: HashMap::new(),
            next_seq: HashMap::new(),
            last_seq: HashMap::new(),
            audit: None,
        }
    }

    pub fn role(&self) -> PartyRole {
        self.role
    }

    pub fn peers(&self) -> impl Iterator<Item = PartyRole> + '_ {
        self.sinks.keys().copied()
    }

    /// Records every message received from now on.
    pub fn attach_audit(&mut self, log: AuditLog) {
        self.audit = Some(log);
    }

    pub fn send(&mut self, to: PartyRole, payload: Payload) -> Result<(), ProtocolError> {
        let seq = self.next_seq.entry(to).or_insert(0);
        *seq += 1;
        let msg = Message { session_id: self.session_id, sequence_no: *seq, sender: self.role, receiver: to, payload };
        let sink = self.sinks.get_mut(&to).ok_or_else(|| ProtocolError::Channel(format!("{} has no channel to {to}", self.role)))?;
        sink.send(msg).map_err(|e| ProtocolError::Channel(format!("{} -> {to}: {e}", self.role)))
    }

    /// Sends without failing; for best-effort notifications during teardown.
    pub fn notify(&mut self, to: PartyRole, payload: Payload) {
        let _ = self.send(to, payload);
    }

    /// Next message from `from`, in order.
    pub fn recv_from(&mut self, from: PartyRole) -> Result<Message, ProtocolError> {
        loop {
            if let Some(m) = self.parked.get_mut(&from).and_then(VecDeque::pop_front) {
                return Ok(m);
            }
            if let Some(why) = self.gone.get(&from) {
                return Err(ProtocolError::Channel(format!("{from} -> {}: {why}", self.role)));
            }
            if let Some(m) = self.pull()? {
                if m.sender == from {
                    return Ok(m);
                }
                self.parked.entry(m.sender).or_default().push_back(m);
            }
        }
    }

    /// Next message from any peer.
    pub fn recv_any(&mut self) -> Result<Message, ProtocolError> {
        if let Some(q) = self.parked.values_mut().find(|q| !q.is_empty()) {
            return Ok(q.pop_front().expect("non-empty"));
        }
        loop {
            if let Some(m) = self.pull()? {
                return Ok(m);
            }
        }
    }

    /// Next event from the inbox: `Some` for a message, `None` after a peer
    /// went away, so callers can re-check what they are waiting for.
    fn pull(&mut self) -> Result<Option<Message>, ProtocolError> {
        let all_gone = || ProtocolError::Channel(format!("{}: all peers are gone", self.role));
        let ev = self.inbox.recv().map_err(|_| all_gone())?;
        match ev {
            Event::Closed(r) => {
                self.gone.entry(r).or_insert_with(|| "channel closed".into());
            }
            Event::Failed(r, why) => {
                self.gone.insert(r, why);
            }
            Event::Message(m) => {
                let m = *m;
                if m.session_id != self.session_id {
                    return Err(ProtocolError::Channel(format!("{} sent a message for another session", m.sender)));
                }
                if m.receiver != self.role {
                    return Err(ProtocolError::Channel(format!("{} addressed {} to {}", m.sender, m.payload.name(), m.receiver)));
                }
                let last = self.last_seq.entry(m.sender).or_insert(0);
                if m.sequence_no != *last + 1 {
                    return Err(ProtocolError::Sequence { from: m.sender, expected: *last + 1, got: m.sequence_no });
                }
                *last = m.sequence_no;
                if let Some(log) = &self.audit {
                    log.lock().expect("audit lock").push(m.clone());
                }
                return Ok(Some(m));
            }
        }
        if self.gone.len() == self.sinks.len() && self.parked.values().all(VecDeque::is_empty) {
            return Err(all_gone());
        }
        Ok(None)
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        for sink in self.sinks.values_mut() {
            sink.close(self.role);
        }
    }
}

/// Fully connected in-process endpoints, one per role.
pub fn inproc_mesh(roles: &[PartyRole], session_id: u64) -> Vec<Endpoint> {
    let (txs, rxs): (Vec<Sender<Event>>, Vec<Receiver<Event>>) = roles.iter().map(|_| channel()).unzip();
    rxs.into_iter()
        .enumerate()
        .map(|(i, rx)| {
            let sinks = roles
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &r)| (r, Sink::Local(txs[j].clone())))
                .collect();
            Endpoint::new(roles[i], session_id, sinks, rx)
        })
        .collect()
}

/// Connects `role` to every other role over TCP.
///
/// Each pair is joined once: the party listed earlier in `peers` accepts,
/// the later one connects. Both sides exchange handshakes and abort on any
/// disagreement.
pub fn tcp_endpoint(
    role: PartyRole,
    listener: TcpListener,
    peers: &[(PartyRole, SocketAddr)],
    params: SessionParams,
) -> Result<Endpoint, ProtocolError> {
    let my_pos = peers.iter().position(|(r, _)| *r == role).ok_or_else(|| ProtocolError::Handshake(format!("{role} is not in the peer list")))?;
    let (tx, rx) = channel();
    let mut sinks = BTreeMap::new();
    let io = |e: std::io::Error| ProtocolError::Channel(format!("{role}: {e}"));
    let hello = Message { session_id: params.session_id, sequence_no: 0, sender: role, receiver: role, payload: params.handshake(role) };
    let expected: Vec<PartyRole> = peers[my_pos + 1..].iter().map(|(r, _)| *r).collect();
    for (peer, addr) in &peers[..my_pos] {
        let stream = TcpStream::connect(addr).map_err(io)?;
        stream.set_nodelay(true).map_err(io)?;
        let mut reader = BufReader::new(stream.try_clone().map_err(io)?);
        let mut writer = BufWriter::new(stream);
        write_frame(&mut writer, &Message { receiver: *peer, ..hello.clone() }).map_err(io)?;
        let reply = read_frame(&mut reader)
            .map_err(|e| ProtocolError::Handshake(format!("{peer}: {e}")))?
            .ok_or_else(|| ProtocolError::Handshake(format!("{peer} closed the connection during the handshake")))?;
        if params.verify(&reply)? != *peer {
            return Err(ProtocolError::Handshake(format!("expected {peer} at {addr}")));
        }
        spawn_reader(*peer, reader, tx.clone());
        sinks.insert(*peer, Sink::Tcp(writer));
    }
    for _ in &expected {
        let (stream, _) = listener.accept().map_err(io)?;
        stream.set_nodelay(true).map_err(io)?;
        let mut reader = BufReader::new(stream.try_clone().map_err(io)?);
        let mut writer = BufWriter::new(stream);
        let hi = read_frame(&mut reader)
            .map_err(|e| ProtocolError::Handshake(e.to_string()))?
            .ok_or_else(|| ProtocolError::Handshake("peer closed the connection during the handshake".into()))?;
        let peer = params.verify(&hi)?;
        if !expected.contains(&peer) || sinks.contains_key(&peer) {
            return Err(ProtocolError::Handshake(format!("unexpected connection from {peer}")));
        }
        write_frame(&mut writer, &Message { receiver: peer, ..hello.clone() }).map_err(io)?;
        spawn_reader(peer, reader, tx.clone());
        sinks.insert(peer, Sink::Tcp(writer));
    }
    Ok(Endpoint::new(role, params.session_id, sinks, rx))
}

fn spawn_reader(peer: PartyRole, mut reader: BufReader<TcpStream>, tx: Sender<Event>) {
    thread::spawn(move || loop {
        match read_frame(&mut reader) {
            Ok(Some(m)) => {
                if tx.send(Event::Message(Box::new(m))).is_err() {
                    return;
                }
            }
            Ok(None) => {
                let _ = tx.send(Event::Closed(peer));
                return;
            }
            Err(e) => {
                let _ = tx.send(Event::Failed(peer, e.to_string()));
                return;
            }
        }
    });
}

/// Binds one loopback listener per role and connects all of them, each on
/// its own thread.
pub fn tcp_mesh(roles: &[PartyRole], params: SessionParams) -> Result<Vec<Endpoint>, ProtocolError> {
    let io = |e: std::io::Error| ProtocolError::Channel(e.to_string());
    let listeners: Vec<TcpListener> = roles.iter().map(|_| TcpListener::bind("127.0.0.1:0")).collect::<Result<_, _>>().map_err(io)?;
    let peers: Vec<(PartyRole, SocketAddr)> =
        roles.iter().zip(&listeners).map(|(&r, l)| l.local_addr().map(|a| (r, a))).collect::<Result<_, _>>().map_err(io)?;
    let handles: Vec<_> = roles
        .iter()
        .zip(listeners)
        .map(|(&role, listener)| {
            let peers = peers.clone();
            thread::spawn(move || tcp_endpoint(role, listener, &peers, params))
        })
        .collect();
    handles
        .into_iter()
        .map(|h| h.join().map_err(|_| ProtocolError::Channel("connection thread panicked".into()))?)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::message::Control;

    const ROLES: [PartyRole; 3] = [PartyRole::P0, PartyRole::P1, PartyRole::P3];

    fn params() -> SessionParams {
        SessionParams { session_id: 5, ring_bits: 64, frac_bits: 16, config_hash: [1; 32] }
    }

    fn exercise(mut eps: Vec<Endpoint>) {
        let mut p3 = eps.pop().unwrap();
        let mut p1 = eps.pop().unwrap();
        let mut p0 = eps.pop().unwrap();
        p0.send(PartyRole::P3, Payload::TripleRequest { count: 1 }).unwrap();
        p1.send(PartyRole::P3, Payload::TripleRequest { count: 2 }).unwrap();
        p0.send(PartyRole::P3, Payload::TripleRequest { count: 3 }).unwrap();
        let m = p3.recv_from(PartyRole::P1).unwrap();
        assert_eq!(m.payload, Payload::TripleRequest { count: 2 });
        assert_eq!(m.sequence_no, 1);
        let a = p3.recv_from(PartyRole::P0).unwrap();
        let b = p3.recv_from(PartyRole::P0).unwrap();
        assert_eq!((a.sequence_no, b.sequence_no), (1, 2));
        assert_eq!(b.payload, Payload::TripleRequest { count: 3 });
        p3.send(PartyRole::P0, Payload::Control(Control::Stop)).unwrap();
        assert_eq!(p0.recv_any().unwrap().sender, PartyRole::P3);
        drop(p1);
        assert!(matches!(p3.recv_from(PartyRole::P1), Err(ProtocolError::Channel(_))));
    }

    #[test]
    fn inproc_delivery_and_closure() {
        exercise(inproc_mesh(&ROLES, 5));
    }

    #[test]
    fn tcp_delivery_and_closure() {
        exercise(tcp_mesh(&ROLES, params()).unwrap());
    }

    #[test]
    fn tcp_handshake_mismatch_aborts() {
        let roles = [PartyRole::P0, PartyRole::P1];
        let listeners: Vec<TcpListener> = roles.iter().map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
        let peers: Vec<_> = roles.iter().zip(&listeners).map(|(&r, l)| (r, l.local_addr().unwrap())).collect();
        let mut it = listeners.into_iter();
        let (l0, l1) = (it.next().unwrap(), it.next().unwrap());
        let peers0 = peers.clone();
        let h0 = thread::spawn(move || tcp_endpoint(PartyRole::P0, l0, &peers0, params()));
        let other = SessionParams { frac_bits: 20, ..params() };
        let r1 = tcp_endpoint(PartyRole::P1, l1, &peers, other);
        let r0 = h0.join().unwrap();
        assert!(matches!(r0, Err(ProtocolError::Handshake(_))));
        assert!(matches!(r1, Err(ProtocolError::Handshake(_))));
    }
}
