//! State machines for the session's roles.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::eval::secure_mse_share;
use super::message::{Control, ErrorKind, FitnessEntry, FitnessTag, Message, Payload, PartyRole};
use super::transport::Endpoint;
use super::ProtocolError;
use crate::bench::ClientDataset;
use crate::expr::{parse, Expr};
use crate::gp::{Dataset, FitnessOracle};
use crate::kernels::KernelConfig;
use crate::mpc::{Backend, MpcContext, MpcError, MpcStats, Opening, SharedDealer};
use crate::ring::{FixedCodec, RingElement};
use crate::sharing::{PartyIndex, SharedMatrix, TripleShare};

fn unexpected(from: PartyRole, wanted: &'static str, m: &Message) -> ProtocolError {
    if let Payload::Control(Control::Error { kind, message }) = &m.payload {
        return ProtocolError::remote(from, *kind, message.clone());
    }
    ProtocolError::Unexpected { from, expected: wanted, got: m.payload.name() }
}

/// Tells `peers` this party failed with `e`.
fn broadcast_error(ep: &mut Endpoint, peers: &[PartyRole], e: &ProtocolError) {
    for &p in peers {
        ep.notify(p, Payload::Control(Control::Error { kind: e.kind(), message: e.to_string() }));
    }
}

/// Uploads a client's shares to both compute parties; the target holder
/// also discloses `SST/m` to the coordinator.
pub fn run_client(mut ep: Endpoint, codec: FixedCodec, data: &ClientDataset, seed: u64) -> Result<(), ProtocolError> {
    let ring = *codec.ring();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let encode = |v: &f64| codec.encode(*v).map_err(|e| ProtocolError::Mpc(e.into()));
    let rows = data.rows();
    let cols = data.variables.len();
    let plain: Vec<RingElement> = data.x.iter().flatten().map(encode).collect::<Result<_, _>>()?;
    let (x0, x1) = SharedMatrix::share(&ring, rows, cols, &plain, &mut rng).map_err(|e| ProtocolError::DimensionMismatch(e.to_string()))?;
    let (y0, y1) = match &data.y {
        Some(y) => {
            let plain: Vec<RingElement> = y.iter().map(encode).collect::<Result<_, _>>()?;
            let (a, b) = SharedMatrix::share(&ring, rows, 1, &plain, &mut rng).map_err(|e| ProtocolError::DimensionMismatch(e.to_string()))?;
            (Some(a.values), Some(b.values))
        }
        None => (None, None),
    };
    let dims = (rows as u32, cols as u32);
    ep.send(PartyRole::P0, Payload::ShareUpload { rows: dims.0, cols: dims.1, x: x0.values, y: y0 })?;
    ep.send(PartyRole::P1, Payload::ShareUpload { rows: dims.0, cols: dims.1, x: x1.values, y: y1 })?;
    if let Some(y) = &data.y {
        let d = Dataset::new(vec![vec![]; y.len()], y.clone()).map_err(|e| ProtocolError::DimensionMismatch(e.to_string()))?;
        ep.send(PartyRole::P3, Payload::PublicStat { sst_over_m: d.sst_over_m() })?;
    }
    Ok(())
}

/// Triple dealer: serves batches to `P0` and `P1` until both stop.
pub fn run_dealer(mut ep: Endpoint, mut dealer: SharedDealer) -> Result<u64, ProtocolError> {
    let mut stopped = [false, false];
    loop {
        let m = match ep.recv_any() {
            Ok(m) => m,
            Err(ProtocolError::Channel(_)) if stopped.iter().all(|s| *s) => break,
            Err(e) => return Err(e),
        };
        let party = match m.sender {
            PartyRole::P0 => PartyIndex::P0,
            PartyRole::P1 => PartyIndex::P1,
            other => return Err(ProtocolError::Unexpected { from: other, expected: "a compute party", got: m.payload.name() }),
        };
        match m.payload {
            Payload::TripleRequest { count } => match dealer.take_up_to(party, count as usize) {
                Ok(ts) => ep.send(m.sender, Payload::TripleBatch(ts))?,
                Err(e) => {
                    let e = ProtocolError::Mpc(e);
                    broadcast_error(&mut ep, &[m.sender], &e);
                }
            },
            Payload::Control(Control::Stop) => {
                stopped[party.index()] = true;
                if stopped.iter().all(|s| *s) {
                    break;
                }
            }
            Payload::Control(Control::Error { .. }) => break,
            _ => return Err(unexpected(m.sender, "TripleRequest", &m)),
        }
    }
    Ok(dealer.dealt())
}

/// Connectivity of a compute party during evaluation.
struct PartyBackend<'a> {
    ep: &'a mut Endpoint,
    peer: PartyRole,
    batch: usize,
}

fn to_mpc(e: ProtocolError) -> MpcError {
    match e {
        ProtocolError::Mpc(e) => e,
        ProtocolError::Channel(m) => MpcError::Channel(m),
        other => MpcError::Aborted(other.to_string()),
    }
}

impl Backend for PartyBackend<'_> {
    fn exchange(&mut self, mine: Opening) -> Result<Opening, MpcError> {
        self.ep.send(self.peer, Payload::BeaverOpen(mine)).map_err(to_mpc)?;
        let m = self.ep.recv_from(self.peer).map_err(to_mpc)?;
        match m.payload {
            Payload::BeaverOpen(o) => Ok(o),
            _ => Err(to_mpc(unexpected(self.peer, "BeaverOpen", &m))),
        }
    }

    fn fetch_triples(&mut self, count: usize) -> Result<Vec<TripleShare>, MpcError> {
        let want = count.max(self.batch).min(u32::MAX as usize) as u32;
        self.ep.send(PartyRole::P2, Payload::TripleRequest { count: want }).map_err(to_mpc)?;
        let m = self.ep.recv_from(PartyRole::P2).map_err(to_mpc)?;
        match m.payload {
            Payload::TripleBatch(ts) => Ok(ts),
            _ => Err(to_mpc(unexpected(PartyRole::P2, "TripleBatch", &m))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComputeReport {
    pub stats: MpcStats,
    /// Expressions evaluated.
    pub evaluations: u64,
    /// Expressions whose public values could not be encoded.
    pub overflows: u64,
}

pub struct ComputeSetup {
    pub codec: FixedCodec,
    pub kernels: KernelConfig,
    pub clients: u16,
    pub triple_batch: usize,
}

/// Compute party: collects the shared dataset, then answers evaluation
/// requests from the coordinator until told to stop.
pub fn run_compute(mut ep: Endpoint, party: PartyIndex, setup: &ComputeSetup) -> Result<ComputeReport, ProtocolError> {
    let peer = match party {
        PartyIndex::P0 => PartyRole::P1,
        PartyIndex::P1 => PartyRole::P0,
    };
    let result = compute(&mut ep, party, peer, setup);
    match &result {
        Ok(_) => ep.notify(PartyRole::P2, Payload::Control(Control::Stop)),
        Err(e) => broadcast_error(&mut ep, &[peer, PartyRole::P2, PartyRole::P3], e),
    }
    result
}

/// Receives every client's upload and joins the column blocks in client order.
pub fn secret_data_sharing(
    ep: &mut Endpoint,
    party: PartyIndex,
    clients: u16,
) -> Result<(SharedMatrix, Vec<RingElement>), ProtocolError> {
    let mut blocks = Vec::new();
    let mut target = None;
    for j in 1..=clients {
        let from = PartyRole::Client(j);
        let m = ep.recv_from(from)?;
        let Payload::ShareUpload { rows, cols, x, y } = m.payload else {
            return Err(unexpected(from, "ShareUpload", &m));
        };
        if let Some(first) = blocks.first().map(|b: &SharedMatrix| b.rows) {
            if first != rows as usize {
                return Err(ProtocolError::DimensionMismatch(format!("{from} sent {rows} rows, expected {first}")));
            }
        }
        let block = SharedMatrix::new(party, rows as usize, cols as usize, x).map_err(|e| ProtocolError::DimensionMismatch(e.to_string()))?;
        blocks.push(block);
        match (j == clients, y) {
            (true, Some(y)) if y.len() == rows as usize => target = Some(y),
            (true, _) => return Err(ProtocolError::DimensionMismatch(format!("{from} must send {rows} targets"))),
            (false, Some(_)) => return Err(ProtocolError::DimensionMismatch(format!("{from} sent targets"))),
            (false, None) => {}
        }
    }
    let x = SharedMatrix::hconcat(&blocks).map_err(|e| ProtocolError::DimensionMismatch(e.to_string()))?;
    Ok((x, target.expect("checked above")))
}

fn compute(ep: &mut Endpoint, party: PartyIndex, peer: PartyRole, setup: &ComputeSetup) -> Result<ComputeReport, ProtocolError> {
    let (x, y) = secret_data_sharing(ep, party, setup.clients)?;
    let mut report = ComputeReport::default();
    let mut ctx = MpcContext::new(party, setup.codec, PartyBackend { ep, peer, batch: setup.triple_batch });
    loop {
        let m = ctx.backend_mut().ep.recv_from(PartyRole::P3)?;
        let (generation, expressions) = match m.payload {
            Payload::EvalRequest { generation, fitness: FitnessTag::Mse, expressions } => (generation, expressions),
            Payload::Control(Control::Stop) => break,
            _ => return Err(unexpected(PartyRole::P3, "EvalRequest", &m)),
        };
        let mut entries = Vec::with_capacity(expressions.len());
        for text in &expressions {
            let tree = parse(text).map_err(ProtocolError::Syntax)?;
            report.evaluations += 1;
            match secure_mse_share(&mut ctx, &setup.kernels, &tree, &x, &y) {
                Ok(z) => entries.push(FitnessEntry::Valid(z)),
                Err(MpcError::MagnitudeOverflow(_)) => {
                    report.overflows += 1;
                    entries.push(FitnessEntry::Overflow)
                }
                Err(e) => return Err(ProtocolError::from_mpc(e)),
            }
        }
        ctx.backend_mut().ep.send(PartyRole::P3, Payload::FitnessShare { generation, entries })?;
    }
    report.stats = ctx.stats();
    Ok(report)
}

/// Coordinator-side fitness oracle: ships each generation's distinct
/// expressions to the compute parties and reconstructs the returned MSE
/// shares.
pub struct SecureOracle<'a> {
    ep: &'a mut Endpoint,
    codec: FixedCodec,
    generation: u32,
    /// Fitness values rejected as overflowed.
    pub overflows: u64,
    /// Expressions sent for evaluation.
    pub requested: u64,
}

impl<'a> SecureOracle<'a> {
    pub fn new(ep: &'a mut Endpoint, codec: FixedCodec) -> Self {
        SecureOracle { ep, codec, generation: 0, overflows: 0, requested: 0 }
    }

    /// Decodes a reconstructed MSE. Values a correct evaluation cannot
    /// produce indicate wrap-around and are mapped to `+inf`.
    fn decode(&mut self, a: FitnessEntry, b: FitnessEntry) -> f64 {
        let z = match (a, b) {
            (FitnessEntry::Valid(a), FitnessEntry::Valid(b)) => self.codec.decode(self.codec.ring().add(a, b)),
            _ => f64::NAN,
        };
        let ulp = self.codec.ulp();
        let ceiling = ((self.codec.ring().bits() - 1 - 2 * self.codec.frac_bits()) as f64).exp2();
        if z.is_nan() || z < -8.0 * ulp || z >= ceiling {
            self.overflows += 1;
            f64::INFINITY
        } else {
            z
        }
    }

    fn shares(&mut self, from: PartyRole, n: usize) -> Result<Vec<FitnessEntry>, ProtocolError> {
        let m = self.ep.recv_from(from)?;
        match m.payload {
            Payload::FitnessShare { generation, entries } if generation == self.generation && entries.len() == n => Ok(entries),
            Payload::FitnessShare { generation, entries } => Err(ProtocolError::Desync(format!(
                "{from} answered generation {generation} with {} values, expected {} with {n}",
                entries.len(),
                self.generation
            ))),
            _ => Err(unexpected(from, "FitnessShare", &m)),
        }
    }
}

impl FitnessOracle for SecureOracle<'_> {
    type Error = ProtocolError;

    fn evaluate(&mut self, trees: &[&Expr]) -> Result<Vec<f64>, ProtocolError> {
        let mut index = HashMap::new();
        let mut texts = Vec::new();
        let slots: Vec<usize> = trees
            .iter()
            .map(|t| {
                let text = t.to_string();
                *index.entry(text.clone()).or_insert_with(|| {
                    texts.push(text);
                    texts.len() - 1
                })
            })
            .collect();
        let n = texts.len();
        self.requested += n as u64;
        for to in [PartyRole::P0, PartyRole::P1] {
            let req = Payload::EvalRequest { generation: self.generation, fitness: FitnessTag::Mse, expressions: texts.clone() };
            self.ep.send(to, req)?;
        }
        let s0 = self.shares(PartyRole::P0, n)?;
        let s1 = self.shares(PartyRole::P1, n)?;
        let z: Vec<f64> = s0.into_iter().zip(s1).map(|(a, b)| self.decode(a, b)).collect();
        self.generation += 1;
        Ok(slots.into_iter().map(|i| z[i]).collect())
    }
}

/// Best-effort shutdown of the compute parties.
pub fn stop_compute(ep: &mut Endpoint) {
    for to in [PartyRole::P0, PartyRole::P1] {
        ep.notify(to, Payload::Control(Control::Stop));
    }
}

impl ErrorKind {
    pub(crate) fn of_mpc(e: &MpcError) -> ErrorKind {
        match e {
            MpcError::TripleExhaustion => ErrorKind::TripleExhaustion,
            MpcError::MagnitudeOverflow(_) => ErrorKind::MagnitudeOverflow,
            MpcError::Channel(_) => ErrorKind::Channel,
            MpcError::Desync(_) | MpcError::TripleReuse(_) => ErrorKind::Desync,
            MpcError::Aborted(_) => ErrorKind::Other,
        }
    }
}
