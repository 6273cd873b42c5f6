//! Per-party secure arithmetic over shared fixed-point vectors.
//!
//! An [`MpcContext`] is one compute party's view: its index, the codec, a
//! queue of triple halves, and a [`Backend`] that reaches the peer (for
//! openings) and the dealer (for triples). Both parties run the same sequence
//! of calls in lockstep; every call to [`MpcContext::mul_products`] is exactly
//! one opening round regardless of how many products it batches.

use std::collections::VecDeque;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{FixedCodec, Ring, RingElement, RingError};
use crate::sharing::{beaver_combine, beaver_mask, truncate_share, BeaverOpening, Dealer, PartyIndex, TripleShare};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("beaver triple supply exhausted")]
    TripleExhaustion,
    #[error("beaver triple {0} was already consumed")]
    TripleReuse(u64),
    #[error("value outside the fixed-point range: {0}")]
    MagnitudeOverflow(f64),
    #[error("parties out of step: {0}")]
    Desync(String),
    #[error("channel failure: {0}")]
    Channel(String),
    #[error("session aborted: {0}")]
    Aborted(String),
}

impl From<RingError> for MpcError {
    fn from(e: RingError) -> Self {
        match e {
            RingError::MagnitudeOverflow { value, .. } => MpcError::MagnitudeOverflow(value),
            other => MpcError::Aborted(other.to_string()),
        }
    }
}

pub type Result<T, E = MpcError> = std::result::Result<T, E>;

/// One party's masked values for a batched opening round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    /// Id of the first triple consumed by this round; both parties must agree.
    pub first_triple: u64,
    pub epsilon: Vec<RingElement>,
    pub delta: Vec<RingElement>,
}

/// Connectivity a compute party needs.
pub trait Backend {
    /// Sends this party's opening shares and returns the peer's.
    fn exchange(&mut self, mine: Opening) -> Result<Opening>;
    /// Returns at least `count` further triple halves, in id order.
    fn fetch_triples(&mut self, count: usize) -> Result<Vec<TripleShare>>;
}

impl<B: Backend + ?Sized> Backend for &mut B {
    fn exchange(&mut self, mine: Opening) -> Result<Opening> {
        (**self).exchange(mine)
    }

    fn fetch_triples(&mut self, count: usize) -> Result<Vec<TripleShare>> {
        (**self).fetch_triples(count)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcStats {
    pub rounds: u64,
    pub triples_used: u64,
}

pub struct MpcContext<B> {
    party: PartyIndex,
    codec: FixedCodec,
    backend: B,
    pool: VecDeque<TripleShare>,
    next_triple: u64,
    stats: MpcStats,
}

impl<B: Backend> MpcContext<B> {
    pub fn new(party: PartyIndex, codec: FixedCodec, backend: B) -> Self {
        MpcContext { party, codec, backend, pool: VecDeque::new(), next_triple: 0, stats: MpcStats::default() }
    }

    #[inline]
    pub fn party(&self) -> PartyIndex {
        self.party
    }

    #[inline]
    pub fn codec(&self) -> &FixedCodec {
        &self.codec
    }

    #[inline]
    pub fn ring(&self) -> &Ring {
        self.codec.ring()
    }

    pub fn stats(&self) -> MpcStats {
        self.stats
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    fn take_triples(&mut self, n: usize) -> Result<Vec<TripleShare>> {
        while self.pool.len() < n {
            let more = self.backend.fetch_triples(n - self.pool.len())?;
            if more.is_empty() {
                return Err(MpcError::TripleExhaustion);
            }
            self.pool.extend(more);
        }
        let taken: Vec<_> = self.pool.drain(..n).collect();
        for t in &taken {
            if t.id < self.next_triple {
                return Err(MpcError::TripleReuse(t.id));
            }
            self.next_triple = t.id + 1;
        }
        self.stats.triples_used += n as u64;
        Ok(taken)
    }

    /// Element-wise products of each `(x, y)` pair in a single opening round.
    ///
    /// Outputs carry scale `2^(2B)`; callers truncate (possibly after combining
    /// several products linearly).
    pub fn mul_products(&mut self, pairs: &[(&[RingElement], &[RingElement])]) -> Result<Vec<Vec<RingElement>>> {
        let mut total = 0;
        for (x, y) in pairs {
            if x.len() != y.len() {
                return Err(MpcError::Desync(format!("operand lengths {} and {}", x.len(), y.len())));
            }
            total += x.len();
        }
        if total == 0 {
            return Ok(pairs.iter().map(|_| Vec::new()).collect());
        }
        let triples = self.take_triples(total)?;
        let ring = *self.ring();
        let mut epsilon = Vec::with_capacity(total);
        let mut delta = Vec::with_capacity(total);
        let mut it = triples.iter();
        for (x, y) in pairs {
            for (&xi, &yi) in x.iter().zip(y.iter()) {
                let (e, d) = beaver_mask(&ring, xi, yi, it.next().expect("triple count matches"));
                epsilon.push(e);
                delta.push(d);
            }
        }
        let first_triple = triples[0].id;
        let mine = Opening { first_triple, epsilon, delta };
        let theirs = self.backend.exchange(mine.clone())?;
        self.stats.rounds += 1;
        if theirs.first_triple != first_triple || theirs.epsilon.len() != total || theirs.delta.len() != total {
            return Err(MpcError::Desync(format!(
                "peer opened {} values from triple {}, expected {total} from {first_triple}",
                theirs.epsilon.len(),
                theirs.first_triple
            )));
        }
        let mut out = Vec::with_capacity(pairs.len());
        let mut k = 0;
        for (x, _) in pairs {
            let mut v = Vec::with_capacity(x.len());
            for _ in 0..x.len() {
                let open = BeaverOpening {
                    epsilon: ring.add(mine.epsilon[k], theirs.epsilon[k]),
                    delta: ring.add(mine.delta[k], theirs.delta[k]),
                };
                v.push(beaver_combine(&ring, self.party, &triples[k], open));
                k += 1;
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Fixed-point product (one round, truncated).
    pub fn mul(&mut self, x: &[RingElement], y: &[RingElement]) -> Result<Vec<RingElement>> {
        let p = self.mul_products(&[(x, y)])?.pop().expect("one product");
        Ok(self.truncate(&p))
    }

    pub fn square(&mut self, x: &[RingElement]) -> Result<Vec<RingElement>> {
        self.mul(x, x)
    }

    /// Several fixed-point products in one round.
    pub fn mul_many(&mut self, pairs: &[(&[RingElement], &[RingElement])]) -> Result<Vec<Vec<RingElement>>> {
        let ps = self.mul_products(pairs)?;
        Ok(ps.iter().map(|p| self.truncate(p)).collect())
    }

    pub fn truncate(&self, x: &[RingElement]) -> Vec<RingElement> {
        let ring = self.ring();
        let b = self.codec.frac_bits();
        x.iter().map(|&v| truncate_share(ring, self.party, v, b)).collect()
    }

    pub fn add(&self, x: &[RingElement], y: &[RingElement]) -> Vec<RingElement> {
        let ring = self.ring();
        x.iter().zip(y).map(|(&a, &b)| ring.add(a, b)).collect()
    }

    pub fn sub(&self, x: &[RingElement], y: &[RingElement]) -> Vec<RingElement> {
        let ring = self.ring();
        x.iter().zip(y).map(|(&a, &b)| ring.sub(a, b)).collect()
    }

    pub fn neg(&self, x: &[RingElement]) -> Vec<RingElement> {
        let ring = self.ring();
        x.iter().map(|&a| ring.neg(a)).collect()
    }

    /// Adds a public ring element (party 0 only).
    pub fn add_public(&self, x: &[RingElement], a: RingElement) -> Vec<RingElement> {
        match self.party {
            PartyIndex::P0 => x.iter().map(|&v| self.ring().add(v, a)).collect(),
            PartyIndex::P1 => x.to_vec(),
        }
    }

    /// Adds a public real.
    pub fn add_const(&self, x: &[RingElement], c: f64) -> Result<Vec<RingElement>> {
        let a = self.codec.encode(c)?;
        Ok(self.add_public(x, a))
    }

    /// Multiplies by a public integer; exact, no rescaling.
    pub fn scale_int(&self, x: &[RingElement], k: i64) -> Vec<RingElement> {
        let ring = self.ring();
        let k = ring.from_i64(k);
        x.iter().map(|&v| ring.mul(v, k)).collect()
    }

    /// Multiplies by a public real. Small integers take the exact path;
    /// anything else is encoded, multiplied and truncated.
    pub fn mul_const(&self, x: &[RingElement], c: f64) -> Result<Vec<RingElement>> {
        if c.fract() == 0.0 && c.abs() <= (1u64 << 20) as f64 {
            return Ok(self.scale_int(x, c as i64));
        }
        let a = self.codec.encode(c)?;
        let ring = self.ring();
        let scaled: Vec<_> = x.iter().map(|&v| ring.mul(v, a)).collect();
        Ok(self.truncate(&scaled))
    }

    /// This party's share of a public constant vector.
    pub fn public_vec(&self, c: f64, len: usize) -> Result<Vec<RingElement>> {
        let a = self.codec.encode(c)?;
        Ok(match self.party {
            PartyIndex::P0 => vec![a; len],
            PartyIndex::P1 => vec![RingElement::ZERO; len],
        })
    }
}

/// In-process backend: an mpsc pair to the peer and a dealer shared by both
/// parties behind a mutex.
pub struct LocalBackend {
    party: PartyIndex,
    to_peer: Sender<Opening>,
    from_peer: Receiver<Opening>,
    dealer: Arc<Mutex<SharedDealer>>,
}

/// Deals triples in batches into one queue per party, so both parties see the
/// same id sequence whichever asks first.
pub struct SharedDealer {
    dealer: Dealer,
    batch: usize,
    budget: Option<u64>,
    queues: [VecDeque<TripleShare>; 2],
}

impl SharedDealer {
    pub fn new(ring: Ring, seed: u64, batch: usize, budget: Option<u64>) -> Self {
        SharedDealer { dealer: Dealer::new(ring, seed), batch: batch.max(1), budget, queues: Default::default() }
    }

    /// Hands `party` its next `count` triple halves.
    pub fn take(&mut self, party: PartyIndex, count: usize) -> Result<Vec<TripleShare>> {
        let got = self.take_up_to(party, count)?;
        if got.len() < count {
            return Err(MpcError::TripleExhaustion);
        }
        Ok(got)
    }

    /// Hands `party` between 1 and `count` triple halves, dealing a new batch
    /// when its queue runs short. Fails only when the budget is spent.
    pub fn take_up_to(&mut self, party: PartyIndex, count: usize) -> Result<Vec<TripleShare>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let q = party.index();
        if self.queues[q].len() < count {
            let mut want = self.batch.max(count - self.queues[q].len());
            if let Some(budget) = self.budget {
                want = want.min(budget.saturating_sub(self.dealer.next_id()) as usize);
            }
            for t in self.dealer.deal(want) {
                self.queues[0].push_back(t.halves[0]);
                self.queues[1].push_back(t.halves[1]);
            }
        }
        let n = count.min(self.queues[q].len());
        if n == 0 {
            return Err(MpcError::TripleExhaustion);
        }
        Ok(self.queues[q].drain(..n).collect())
    }

    /// Triples generated so far.
    pub fn dealt(&self) -> u64 {
        self.dealer.next_id()
    }
}

impl Backend for LocalBackend {
    fn exchange(&mut self, mine: Opening) -> Result<Opening> {
        self.to_peer
            .send(mine)
            .map_err(|_| MpcError::Channel(format!("{:?}: peer hung up", self.party)))?;
        self.from_peer
            .recv()
            .map_err(|_| MpcError::Channel(format!("{:?}: peer hung up", self.party)))
    }

    fn fetch_triples(&mut self, count: usize) -> Result<Vec<TripleShare>> {
        self.dealer
            .lock()
            .map_err(|_| MpcError::Aborted("dealer lock poisoned".into()))?
            .take(self.party, count)
    }
}

/// Builds two connected local backends sharing one dealer.
pub fn local_pair(ring: Ring, dealer_seed: u64, batch: usize, budget: Option<u64>) -> (LocalBackend, LocalBackend) {
    let dealer = Arc::new(Mutex::new(SharedDealer::new(ring, dealer_seed, batch, budget)));
    let (tx0, rx1) = channel();
    let (tx1, rx0) = channel();
    (
        LocalBackend { party: PartyIndex::P0, to_peer: tx0, from_peer: rx0, dealer: dealer.clone() },
        LocalBackend { party: PartyIndex::P1, to_peer: tx1, from_peer: rx1, dealer },
    )
}

pub type LocalContext = MpcContext<LocalBackend>;

/// Runs `f` for both parties on two threads, each with its own input, and
/// returns both outputs with each party's statistics.
pub fn run_pair<I, T, F>(
    codec: FixedCodec,
    dealer_seed: u64,
    budget: Option<u64>,
    inputs: [I; 2],
    f: F,
) -> Result<[(T, MpcStats); 2]>
where
    I: Send,
    T: Send,
    F: Fn(&mut LocalContext, I) -> Result<T> + Sync,
{
    let (b0, b1) = local_pair(*codec.ring(), dealer_seed, 1 << 14, budget);
    let [i0, i1] = inputs;
    let f = &f;
    std::thread::scope(|s| {
        let h0 = s.spawn(move || {
            let mut ctx = MpcContext::new(PartyIndex::P0, codec, b0);
            f(&mut ctx, i0).map(|t| (t, ctx.stats()))
        });
        let h1 = s.spawn(move || {
            let mut ctx = MpcContext::new(PartyIndex::P1, codec, b1);
            f(&mut ctx, i1).map(|t| (t, ctx.stats()))
        });
        let r0 = h0.join().map_err(|_| MpcError::Aborted("party 0 panicked".into()))?;
        let r1 = h1.join().map_err(|_| MpcError::Aborted("party 1 panicked".into()))?;
        Ok([r0?, r1?])
    })
}

/// Secret-shares `xs`, runs `f` on both parties, and decodes the result.
///
/// Test and verification helper; the returned statistics are party 0's.
pub fn eval_shared<F>(codec: FixedCodec, seed: u64, xs: &[f64], f: F) -> Result<(Vec<f64>, MpcStats)>
where
    F: Fn(&mut LocalContext, &[RingElement]) -> Result<Vec<RingElement>> + Sync,
{
    use rand::SeedableRng;
    let ring = *codec.ring();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut s0 = Vec::with_capacity(xs.len());
    let mut s1 = Vec::with_capacity(xs.len());
    for &x in xs {
        let (a, b) = crate::sharing::share(&ring, codec.encode(x)?, &mut rng);
        s0.push(a.value);
        s1.push(b.value);
    }
    let [(y0, stats), (y1, _)] = run_pair(codec, seed ^ 0x5eed_dea1, None, [s0, s1], |ctx, x| f(ctx, &x))?;
    Ok((y0.iter().zip(&y1).map(|(&a, &b)| codec.decode(ring.add(a, b))).collect(), stats))
}
