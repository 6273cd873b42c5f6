//! The four-party runtime.
//!
//! Clients secret-share their column blocks with the compute parties `P0`
//! and `P1`. `P2` deals Beaver triples. `P3` runs GP and only ever sees
//! expressions, fitness shares and one public statistic of the target.

mod eval;
mod message;
mod parties;
mod transport;

pub use eval::{eval_rounds, secure_eval_expression, secure_mse_share};
pub use message::{
    decode_body, encode_frame, read_frame, write_frame, Control, ErrorKind, FitnessEntry, FitnessTag, Message, Payload,
    PartyRole, WireError, MAX_FRAME,
};
pub use parties::{
    run_client, run_compute, run_dealer, secret_data_sharing, stop_compute, ComputeReport, ComputeSetup, SecureOracle,
};
pub use transport::{inproc_mesh, tcp_endpoint, tcp_mesh, AuditLog, Endpoint, SessionParams};

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bench::ClientDataset;
use crate::expr::{Expr, SyntaxError};
use crate::gp::{evolve, EvolveError, FitnessOracle, GpConfig, RunResult};
use crate::kernels::KernelConfig;
use crate::mpc::{MpcError, SharedDealer};
use crate::ring::{FixedCodec, DEFAULT_FRAC_BITS, DEFAULT_RING_BITS};
use crate::sharing::PartyIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("channel failure: {0}")]
    Channel(String),
    #[error("message from {from} out of sequence: expected {expected}, got {got}")]
    Sequence { from: PartyRole, expected: u64, got: u64 },
    #[error("{from} sent {got}, expected {expected}")]
    Unexpected { from: PartyRole, expected: &'static str, got: &'static str },
    #[error("{from} aborted: {message}")]
    Remote { from: PartyRole, kind: ErrorKind, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parties out of step: {0}")]
    Desync(String),
    #[error(transparent)]
    Syntax(SyntaxError),
    #[error("invalid session configuration: {0}")]
    Config(String),
}

impl ProtocolError {
    /// A peer's error report. Triple exhaustion keeps its identity so callers
    /// can match on it wherever it surfaced.
    pub fn remote(from: PartyRole, kind: ErrorKind, message: String) -> Self {
        match kind {
            ErrorKind::TripleExhaustion => ProtocolError::Mpc(MpcError::TripleExhaustion),
            _ => ProtocolError::Remote { from, kind, message },
        }
    }

    fn from_mpc(e: MpcError) -> Self {
        ProtocolError::Mpc(e)
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            ProtocolError::Mpc(e) => ErrorKind::of_mpc(e),
            ProtocolError::Channel(_) => ErrorKind::Channel,
            ProtocolError::Remote { kind, .. } => *kind,
            ProtocolError::DimensionMismatch(_) => ErrorKind::DimensionMismatch,
            ProtocolError::Desync(_) | ProtocolError::Sequence { .. } => ErrorKind::Desync,
            _ => ErrorKind::Other,
        }
    }

    /// Whether the error is a consequence of another party's failure.
    fn is_secondary(&self) -> bool {
        matches!(self, ProtocolError::Channel(_) | ProtocolError::Remote { .. })
            || matches!(self, ProtocolError::Mpc(MpcError::Channel(_) | MpcError::Aborted(_)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Inproc,
    Tcp,
}

impl FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inproc" => Ok(TransportKind::Inproc),
            "tcp" => Ok(TransportKind::Tcp),
            _ => Err(format!("unknown transport {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: u64,
    pub ring_bits: u32,
    pub frac_bits: u32,
    pub kernels: KernelConfig,
    pub dealer_seed: u64,
    /// Seeds the clients' masking randomness.
    pub share_seed: u64,
    pub triple_batch: usize,
    /// Total triples the dealer may produce; unlimited when `None`.
    pub triple_budget: Option<u64>,
    pub transport: TransportKind,
    /// Keep every party's received messages.
    pub audit: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            session_id: 1,
            ring_bits: DEFAULT_RING_BITS,
            frac_bits: DEFAULT_FRAC_BITS,
            kernels: KernelConfig::default(),
            dealer_seed: 0,
            share_seed: 0,
            triple_batch: 1 << 14,
            triple_budget: None,
            transport: TransportKind::Inproc,
            audit: false,
        }
    }
}

impl SessionConfig {
    /// Session parameters seeded from one run seed.
    pub fn seeded(seed: u64) -> Self {
        SessionConfig {
            session_id: seed,
            dealer_seed: seed ^ 0xd3a1_e700,
            share_seed: seed ^ 0x5ba2_e500,
            ..SessionConfig::default()
        }
    }

    pub fn codec(&self) -> Result<FixedCodec, ProtocolError> {
        FixedCodec::with_bits(self.ring_bits, self.frac_bits).map_err(|e| ProtocolError::Config(e.to_string()))
    }

    /// SHA-256 over the session and GP settings every party must share.
    pub fn config_hash(&self, gp: Option<&GpConfig>) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&(self.ring_bits, self.frac_bits, self.kernels, self.triple_batch)).expect("serializable"));
        if let Some(gp) = gp {
            h.update(serde_json::to_vec(gp).expect("serializable"));
        }
        h.finalize().into()
    }
}

/// Messages each party received, when auditing is on.
#[derive(Clone, Debug, Default)]
pub struct Audit {
    pub inboxes: BTreeMap<PartyRole, Vec<Message>>,
}

impl Audit {
    pub fn inbox(&self, role: PartyRole) -> &[Message] {
        self.inboxes.get(&role).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug)]
pub struct SessionOutcome<T> {
    pub value: T,
    /// Disclosed by the target holder.
    pub sst_over_m: f64,
    pub compute: [ComputeReport; 2],
    pub triples_dealt: u64,
    pub audit: Option<Audit>,
}

fn check_clients(clients: &[ClientDataset]) -> Result<usize, ProtocolError> {
    if clients.len() < 2 || clients.len() > u16::MAX as usize {
        return Err(ProtocolError::Config("a session needs at least two clients".into()));
    }
    let order: Vec<usize> = clients.iter().flat_map(|c| c.variables.iter().copied()).collect();
    if order.iter().enumerate().any(|(i, &v)| v != i + 1) {
        return Err(ProtocolError::Config("client column blocks must cover x1..xn in client order".into()));
    }
    Ok(order.len())
}

/// Runs a full session: clients upload, `P0`/`P1` compute, `P2` deals, and
/// `coordinator` drives `P3` through a [`SecureOracle`].
///
/// Every party runs on its own thread. The first root-cause error wins; no
/// result is released if any party failed.
pub fn run_session<T, F>(
    session: &SessionConfig,
    gp: Option<&GpConfig>,
    clients: &[ClientDataset],
    coordinator: F,
) -> Result<SessionOutcome<T>, ProtocolError>
where
    T: Send,
    F: FnOnce(&mut SecureOracle<'_>) -> Result<T, ProtocolError> + Send,
{
    let codec = session.codec()?;
    check_clients(clients)?;
    let k = clients.len() as u16;
    let mut roles = vec![PartyRole::P0, PartyRole::P1, PartyRole::P2, PartyRole::P3];
    roles.extend((1..=k).map(PartyRole::Client));
    let mut endpoints = match session.transport {
        TransportKind::Inproc => inproc_mesh(&roles, session.session_id),
        TransportKind::Tcp => {
            let params = SessionParams {
                session_id: session.session_id,
                ring_bits: session.ring_bits as u8,
                frac_bits: session.frac_bits as u8,
                config_hash: session.config_hash(gp),
            };
            tcp_mesh(&roles, params)?
        }
    };
    let logs: Vec<(PartyRole, AuditLog)> = if session.audit {
        endpoints
            .iter_mut()
            .map(|ep| {
                let log: AuditLog = Arc::new(Mutex::new(Vec::new()));
                ep.attach_audit(log.clone());
                (ep.role(), log)
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut eps = endpoints.into_iter();
    let (ep0, ep1, ep2, mut ep3) = (eps.next().unwrap(), eps.next().unwrap(), eps.next().unwrap(), eps.next().unwrap());
    let client_eps: Vec<Endpoint> = eps.collect();
    let setup = ComputeSetup { codec, kernels: session.kernels, clients: k, triple_batch: session.triple_batch.max(1) };
    let dealer = SharedDealer::new(*codec.ring(), session.dealer_seed, session.triple_batch, session.triple_budget);

    let (p3, r0, r1, r2, rc) = thread::scope(|s| {
        let setup = &setup;
        let h0 = s.spawn(move || run_compute(ep0, PartyIndex::P0, setup));
        let h1 = s.spawn(move || run_compute(ep1, PartyIndex::P1, setup));
        let h2 = s.spawn(move || run_dealer(ep2, dealer));
        let hc: Vec<_> = client_eps
            .into_iter()
            .zip(clients)
            .enumerate()
            .map(|(j, (ep, data))| {
                let seed = session.share_seed.wrapping_add(j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                s.spawn(move || run_client(ep, codec, data, seed))
            })
            .collect();
        let p3 = (|| {
            let m = ep3.recv_from(PartyRole::Client(k))?;
            let Payload::PublicStat { sst_over_m } = m.payload else {
                return Err(ProtocolError::Unexpected { from: m.sender, expected: "PublicStat", got: m.payload.name() });
            };
            let mut oracle = SecureOracle::new(&mut ep3, codec);
            let value = coordinator(&mut oracle);
            Ok((value, sst_over_m))
        })();
        stop_compute(&mut ep3);
        drop(ep3);
        let rc: Vec<Result<(), ProtocolError>> = hc.into_iter().map(|h| join(h.join())).collect();
        (p3, join(h0.join()), join(h1.join()), join(h2.join()), rc)
    });

    let (value, sst_over_m) = p3?;
    let value = value.map_err(|e| pick_error(e, [&r0, &r1].into_iter().filter_map(|r| r.as_ref().err())));
    let value = value?;
    let errors: Vec<ProtocolError> = rc
        .into_iter()
        .filter_map(Result::err)
        .chain([r0.as_ref().err().cloned(), r1.as_ref().err().cloned(), r2.as_ref().err().cloned()].into_iter().flatten())
        .collect();
    if let Some(e) = errors.iter().find(|e| !e.is_secondary()).or(errors.first()) {
        return Err(e.clone());
    }
    let audit = session.audit.then(|| Audit {
        inboxes: logs.into_iter().map(|(r, log)| (r, std::mem::take(&mut *log.lock().expect("audit lock")))).collect(),
    });
    Ok(SessionOutcome {
        value,
        sst_over_m,
        compute: [r0.expect("checked"), r1.expect("checked")],
        triples_dealt: r2.expect("checked"),
        audit,
    })
}

fn join<T>(r: thread::Result<Result<T, ProtocolError>>) -> Result<T, ProtocolError> {
    r.unwrap_or_else(|_| Err(ProtocolError::Channel("party thread panicked".into())))
}

fn pick_error<'a>(primary: ProtocolError, others: impl Iterator<Item = &'a ProtocolError>) -> ProtocolError {
    if !primary.is_secondary() {
        return primary;
    }
    others.into_iter().find(|e| !e.is_secondary()).cloned().unwrap_or(primary)
}

/// Secure MSE of each tree on the clients' joint data, as seen by `P3`.
pub fn secure_fitness_evaluation(
    session: &SessionConfig,
    clients: &[ClientDataset],
    trees: &[Expr],
) -> Result<SessionOutcome<Vec<f64>>, ProtocolError> {
    let refs: Vec<&Expr> = trees.iter().collect();
    run_session(session, None, clients, |oracle| oracle.evaluate(&refs))
}

/// GP at `P3` with every fitness computed securely.
pub fn run_secure_gp(
    session: &SessionConfig,
    gp: &GpConfig,
    clients: &[ClientDataset],
) -> Result<SessionOutcome<RunResult>, ProtocolError> {
    let n_vars = check_clients(clients)?;
    run_session(session, Some(gp), clients, |oracle| {
        evolve(gp, n_vars, oracle).map_err(|e| match e {
            EvolveError::Oracle(e) => e,
            EvolveError::Config(e) => ProtocolError::Config(e.to_string()),
        })
    })
}
