//! Two-party additive secret sharing over `Z_{2^L}`.
//!
//! A secret `x` is split as `<x>_0 = r`, `<x>_1 = x - r` for a uniform `r`.
//! Linear operations are local; products use a dealer-provided Beaver triple
//! and one public opening of `eps = x - a`, `delta = y - b`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{FixedCodec, Ring, RingElement};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("share index mismatch: {0}")]
    IndexMismatch(&'static str),
    #[error("beaver triple {0} was already consumed")]
    TripleReuse(u64),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Which of the two compute parties holds a share.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyIndex {
    P0,
    P1,
}

impl PartyIndex {
    pub const BOTH: [PartyIndex; 2] = [PartyIndex::P0, PartyIndex::P1];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            PartyIndex::P0 => 0,
            PartyIndex::P1 => 1,
        }
    }

    #[inline]
    pub fn other(self) -> PartyIndex {
        match self {
            PartyIndex::P0 => PartyIndex::P1,
            PartyIndex::P1 => PartyIndex::P0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Share {
    pub party: PartyIndex,
    pub value: RingElement,
}

impl Share {
    pub fn new(party: PartyIndex, value: RingElement) -> Self {
        Share { party, value }
    }
}

/// Shares `x` with a fresh uniform mask drawn from `rng`.
pub fn share<R: Rng + ?Sized>(ring: &Ring, x: RingElement, rng: &mut R) -> (Share, Share) {
    share_with_mask(ring, x, ring.random(rng))
}

/// Shares `x` with an explicit mask `r`: `(r, x - r)`.
pub fn share_with_mask(ring: &Ring, x: RingElement, r: RingElement) -> (Share, Share) {
    let r = ring.elem(r.0);
    (
        Share::new(PartyIndex::P0, r),
        Share::new(PartyIndex::P1, ring.sub(x, r)),
    )
}

pub fn reconstruct(ring: &Ring, s0: Share, s1: Share) -> Result<RingElement, SharingError> {
    if s0.party == s1.party {
        return Err(SharingError::IndexMismatch("reconstruction needs one share from each party"));
    }
    Ok(ring.add(s0.value, s1.value))
}

/// Only party 0 offsets its share.
pub fn add_public(ring: &Ring, s: Share, a: RingElement) -> Share {
    match s.party {
        PartyIndex::P0 => Share::new(s.party, ring.add(s.value, a)),
        PartyIndex::P1 => s,
    }
}

pub fn sub_public(ring: &Ring, s: Share, a: RingElement) -> Share {
    match s.party {
        PartyIndex::P0 => Share::new(s.party, ring.sub(s.value, a)),
        PartyIndex::P1 => s,
    }
}

pub fn mul_public(ring: &Ring, s: Share, a: RingElement) -> Share {
    Share::new(s.party, ring.mul(s.value, a))
}

pub fn add_shared(ring: &Ring, s: Share, t: Share) -> Result<Share, SharingError> {
    if s.party != t.party {
        return Err(SharingError::IndexMismatch("local addition needs shares held by the same party"));
    }
    Ok(Share::new(s.party, ring.add(s.value, t.value)))
}

pub fn sub_shared(ring: &Ring, s: Share, t: Share) -> Result<Share, SharingError> {
    if s.party != t.party {
        return Err(SharingError::IndexMismatch("local subtraction needs shares held by the same party"));
    }
    Ok(Share::new(s.party, ring.sub(s.value, t.value)))
}

/// Local share truncation by `bits`.
///
/// Party 0 shifts arithmetically; party 1 computes `-((-s) >> bits)`. The sum is
/// within one unit of `x / 2^bits` unless `s_0 + s_1` overflows as signed
/// integers, which happens with probability about `|x| / 2^(L-1)`.
#[inline]
pub fn truncate_share(ring: &Ring, party: PartyIndex, value: RingElement, bits: u32) -> RingElement {
    match party {
        PartyIndex::P0 => ring.shr_signed(value, bits),
        PartyIndex::P1 => ring.neg(ring.shr_signed(ring.neg(value), bits)),
    }
}

/// Rescales a shared product carrying scale `2^(2B)` back to `2^B`.
pub fn truncate(codec: &FixedCodec, x: (Share, Share)) -> (Share, Share) {
    let ring = codec.ring();
    let b = codec.frac_bits();
    (
        Share::new(x.0.party, truncate_share(ring, x.0.party, x.0.value, b)),
        Share::new(x.1.party, truncate_share(ring, x.1.party, x.1.value, b)),
    )
}

/// One party's half of a Beaver triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleShare {
    pub id: u64,
    pub a: RingElement,
    pub b: RingElement,
    pub c: RingElement,
}

/// A dealt triple `(a, b, c)` with `c = ab`, as both parties' halves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaverTriple {
    pub id: u64,
    pub halves: [TripleShare; 2],
}

impl BeaverTriple {
    pub fn half(&self, party: PartyIndex) -> TripleShare {
        self.halves[party.index()]
    }

    pub fn a(&self) -> (Share, Share) {
        self.pair(|t| t.a)
    }

    pub fn b(&self) -> (Share, Share) {
        self.pair(|t| t.b)
    }

    pub fn c(&self) -> (Share, Share) {
        self.pair(|t| t.c)
    }

    fn pair(&self, f: impl Fn(&TripleShare) -> RingElement) -> (Share, Share) {
        (
            Share::new(PartyIndex::P0, f(&self.halves[0])),
            Share::new(PartyIndex::P1, f(&self.halves[1])),
        )
    }
}

/// Public values revealed in one multiplication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaverOpening {
    pub epsilon: RingElement,
    pub delta: RingElement,
}

/// A party's contribution to the opening: `(<x>_i - <a>_i, <y>_i - <b>_i)`.
#[inline]
pub fn beaver_mask(ring: &Ring, x: RingElement, y: RingElement, t: &TripleShare) -> (RingElement, RingElement) {
    (ring.sub(x, t.a), ring.sub(y, t.b))
}

/// `<xy>_i = <c>_i + eps <b>_i + <a>_i delta + i eps delta`.
#[inline]
pub fn beaver_combine(ring: &Ring, party: PartyIndex, t: &TripleShare, open: BeaverOpening) -> RingElement {
    let mut z = ring.add(t.c, ring.mul(open.epsilon, t.b));
    z = ring.add(z, ring.mul(t.a, open.delta));
    if party == PartyIndex::P1 {
        z = ring.add(z, ring.mul(open.epsilon, open.delta));
    }
    z
}

/// Tracks consumed triples and opening rounds for [`beaver_mul`].
#[derive(Debug, Default)]
pub struct TripleLedger {
    consumed: HashSet<u64>,
    rounds: u64,
}

impl TripleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn consume(&mut self, id: u64) -> Result<(), SharingError> {
        if !self.consumed.insert(id) {
            return Err(SharingError::TripleReuse(id));
        }
        Ok(())
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn consumed(&self) -> usize {
        self.consumed.len()
    }
}

/// Both parties' halves of a Beaver multiplication, executed side by side.
///
/// The single exchange of `eps`/`delta` shares is the only step that needs
/// both parties' data. Returns the product shares (no rescaling).
pub fn beaver_mul(
    ring: &Ring,
    x: (Share, Share),
    y: (Share, Share),
    triple: &BeaverTriple,
    ledger: &mut TripleLedger,
) -> Result<(Share, Share), SharingError> {
    if x.0.party != PartyIndex::P0 || x.1.party != PartyIndex::P1 || y.0.party != PartyIndex::P0 || y.1.party != PartyIndex::P1 {
        return Err(SharingError::IndexMismatch("expected (P0, P1) ordered share pairs"));
    }
    ledger.consume(triple.id)?;
    let t0 = triple.half(PartyIndex::P0);
    let t1 = triple.half(PartyIndex::P1);
    let (e0, d0) = beaver_mask(ring, x.0.value, y.0.value, &t0);
    let (e1, d1) = beaver_mask(ring, x.1.value, y.1.value, &t1);
    ledger.rounds += 1;
    let open = BeaverOpening { epsilon: ring.add(e0, e1), delta: ring.add(d0, d1) };
    Ok((
        Share::new(PartyIndex::P0, beaver_combine(ring, PartyIndex::P0, &t0, open)),
        Share::new(PartyIndex::P1, beaver_combine(ring, PartyIndex::P1, &t1, open)),
    ))
}

/// Trusted triple dealer. Ids increase monotonically across calls.
#[derive(Debug, Clone)]
pub struct Dealer {
    ring: Ring,
    rng: ChaCha20Rng,
    next_id: u64,
}

impl Dealer {
    pub fn new(ring: Ring, seed: u64) -> Self {
        Dealer { ring, rng: ChaCha20Rng::seed_from_u64(seed), next_id: 0 }
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn deal(&mut self, count: usize) -> Vec<BeaverTriple> {
        let triples = deal_triples(&self.ring, self.next_id, count, &mut self.rng);
        self.next_id += count as u64;
        triples
    }
}

/// Deals `count` triples with ids starting at `first_id`.
pub fn deal_triples<R: Rng + ?Sized>(ring: &Ring, first_id: u64, count: usize, rng: &mut R) -> Vec<BeaverTriple> {
    (0..count)
        .map(|k| {
            let a = ring.random(rng);
            let b = ring.random(rng);
            let c = ring.mul(a, b);
            let (a0, a1) = share(ring, a, rng);
            let (b0, b1) = share(ring, b, rng);
            let (c0, c1) = share(ring, c, rng);
            let id = first_id + k as u64;
            BeaverTriple {
                id,
                halves: [
                    TripleShare { id, a: a0.value, b: b0.value, c: c0.value },
                    TripleShare { id, a: a1.value, b: b1.value, c: c1.value },
                ],
            }
        })
        .collect()
}

/// One party's share of an `m x n` matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedMatrix {
    pub party: PartyIndex,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<RingElement>,
}

impl SharedMatrix {
    pub fn new(party: PartyIndex, rows: usize, cols: usize, values: Vec<RingElement>) -> Result<Self, SharingError> {
        if values.len() != rows * cols {
            return Err(SharingError::Shape(format!("{} values for a {rows}x{cols} matrix", values.len())));
        }
        Ok(SharedMatrix { party, rows, cols, values })
    }

    /// Element-wise sharing of a row-major plaintext matrix.
    pub fn share<R: Rng + ?Sized>(
        ring: &Ring,
        rows: usize,
        cols: usize,
        plain: &[RingElement],
        rng: &mut R,
    ) -> Result<(SharedMatrix, SharedMatrix), SharingError> {
        if plain.len() != rows * cols {
            return Err(SharingError::Shape(format!("{} values for a {rows}x{cols} matrix", plain.len())));
        }
        let (s0, s1): (Vec<_>, Vec<_>) = plain
            .iter()
            .map(|&x| {
                let (a, b) = share(ring, x, rng);
                (a.value, b.value)
            })
            .unzip();
        Ok((
            SharedMatrix { party: PartyIndex::P0, rows, cols, values: s0 },
            SharedMatrix { party: PartyIndex::P1, rows, cols, values: s1 },
        ))
    }

    pub fn reconstruct(ring: &Ring, a: &SharedMatrix, b: &SharedMatrix) -> Result<Vec<RingElement>, SharingError> {
        if a.party == b.party {
            return Err(SharingError::IndexMismatch("reconstruction needs one share from each party"));
        }
        if a.rows != b.rows || a.cols != b.cols {
            return Err(SharingError::Shape(format!("{}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols)));
        }
        Ok(a.values.iter().zip(&b.values).map(|(&x, &y)| ring.add(x, y)).collect())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> RingElement {
        self.values[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<RingElement> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Horizontal concatenation `[A | B | ...]`, all blocks held by one party.
    pub fn hconcat(blocks: &[SharedMatrix]) -> Result<SharedMatrix, SharingError> {
        let first = blocks.first().ok_or_else(|| SharingError::Shape("no blocks to concatenate".into()))?;
        let rows = first.rows;
        if let Some(bad) = blocks.iter().find(|b| b.rows != rows || b.party != first.party) {
            return Err(SharingError::Shape(format!(
                "block with {} rows held by {:?}, expected {rows} rows held by {:?}",
                bad.rows, bad.party, first.party
            )));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                values.extend_from_slice(&b.values[r * b.cols..(r + 1) * b.cols]);
            }
        }
        Ok(SharedMatrix { party: first.party, rows, cols, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::FixedCodec;
    use proptest::prelude::{any, prop_assert_eq, proptest};
    use rand_chacha::ChaCha8Rng;

    fn ring() -> Ring {
        Ring::default()
    }

    fn neg(v: u64) -> RingElement {
        RingElement(0u64.wrapping_sub(v))
    }

    #[test]
    fn share_examples() {
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = share(&r, RingElement(0), &mut rng);
        assert_eq!(r.add(a.value, b.value), RingElement(0));
        assert_eq!(b.value, r.neg(a.value));

        let (a, b) = share_with_mask(&r, RingElement(7), RingElement(10));
        assert_eq!(a.value, RingElement(10));
        assert_eq!(b.value, neg(3));
        assert_eq!(reconstruct(&r, a, b).unwrap(), RingElement(7));
    }

    #[test]
    fn reconstruct_rejects_same_party() {
        let r = ring();
        let s = Share::new(PartyIndex::P0, RingElement(1));
        assert!(matches!(reconstruct(&r, s, s), Err(SharingError::IndexMismatch(_))));
    }

    #[test]
    fn random_share_round_trip() {
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let x = r.random(&mut rng);
            let (a, b) = share(&r, x, &mut rng);
            assert_eq!(reconstruct(&r, a, b).unwrap(), x);
        }
    }

    #[test]
    fn public_operations() {
        let r = ring();
        let (a, b) = share_with_mask(&r, RingElement(5), RingElement(99));
        assert_eq!((add_public(&r, a, RingElement(0)), add_public(&r, b, RingElement(0))), (a, b));
        assert_eq!((mul_public(&r, a, RingElement(1)), mul_public(&r, b, RingElement(1))), (a, b));

        let sum = reconstruct(&r, add_public(&r, a, RingElement(3)), add_public(&r, b, RingElement(3))).unwrap();
        assert_eq!(sum, RingElement(8));
        let diff = reconstruct(&r, sub_public(&r, a, RingElement(3)), sub_public(&r, b, RingElement(3))).unwrap();
        assert_eq!(diff, RingElement(2));
        let prod = reconstruct(&r, mul_public(&r, a, RingElement(3)), mul_public(&r, b, RingElement(3))).unwrap();
        assert_eq!(prod, RingElement(15));
        // Party 1's share is untouched by public offsets.
        assert_eq!(add_public(&r, b, RingElement(3)), b);
    }

    #[test]
    fn shared_add_sub() {
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = RingElement(12345);
        let (x0, x1) = share(&r, x, &mut rng);
        let (z0, z1) = share(&r, RingElement(0), &mut rng);
        let s = reconstruct(&r, add_shared(&r, x0, z0).unwrap(), add_shared(&r, x1, z1).unwrap()).unwrap();
        assert_eq!(s, x);
        let d = reconstruct(&r, sub_shared(&r, x0, x0).unwrap(), sub_shared(&r, x1, x1).unwrap()).unwrap();
        assert_eq!(d, RingElement(0));
        assert!(add_shared(&r, x0, x1).is_err());
        assert!(sub_shared(&r, x0, x1).is_err());
    }

    fn hand_triple() -> BeaverTriple {
        // a = 4, b = 6, c = 24, split as a=(1,3), b=(2,4), c=(20,4).
        BeaverTriple {
            id: 0,
            halves: [
                TripleShare { id: 0, a: RingElement(1), b: RingElement(2), c: RingElement(20) },
                TripleShare { id: 0, a: RingElement(3), b: RingElement(4), c: RingElement(4) },
            ],
        }
    }

    #[test]
    fn beaver_hand_transcript() {
        let r = ring();
        let x = (Share::new(PartyIndex::P0, RingElement(10)), Share::new(PartyIndex::P1, neg(7)));
        let y = (Share::new(PartyIndex::P0, RingElement(2)), Share::new(PartyIndex::P1, RingElement(3)));
        let t = hand_triple();

        let (e0, d0) = beaver_mask(&r, x.0.value, y.0.value, &t.halves[0]);
        let (e1, d1) = beaver_mask(&r, x.1.value, y.1.value, &t.halves[1]);
        let open = BeaverOpening { epsilon: r.add(e0, e1), delta: r.add(d0, d1) };
        assert_eq!(open, BeaverOpening { epsilon: neg(1), delta: neg(1) });

        let mut ledger = TripleLedger::new();
        let (z0, z1) = beaver_mul(&r, x, y, &t, &mut ledger).unwrap();
        assert_eq!(z0.value, RingElement(17));
        assert_eq!(z1.value, neg(2));
        assert_eq!(reconstruct(&r, z0, z1).unwrap(), RingElement(15));
        assert_eq!(ledger.rounds(), 1);
    }

    #[test]
    fn beaver_rejects_reuse() {
        let r = ring();
        let x = share_with_mask(&r, RingElement(3), RingElement(10));
        let t = hand_triple();
        let mut ledger = TripleLedger::new();
        beaver_mul(&r, x, x, &t, &mut ledger).unwrap();
        assert_eq!(beaver_mul(&r, x, x, &t, &mut ledger), Err(SharingError::TripleReuse(0)));
    }

    #[test]
    fn beaver_zero_times_anything() {
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut dealer = Dealer::new(r, 5);
        let mut ledger = TripleLedger::new();
        let x = share(&r, RingElement(0), &mut rng);
        for t in dealer.deal(100) {
            let y = share(&r, r.random(&mut rng), &mut rng);
            let (z0, z1) = beaver_mul(&r, x, y, &t, &mut ledger).unwrap();
            assert_eq!(reconstruct(&r, z0, z1).unwrap(), RingElement(0));
        }
    }

    #[test]
    fn beaver_random_products_exact() {
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut dealer = Dealer::new(r, 7);
        let mut ledger = TripleLedger::new();
        for t in dealer.deal(10_000) {
            let (x, y) = (r.random(&mut rng), r.random(&mut rng));
            let (z0, z1) = beaver_mul(&r, share(&r, x, &mut rng), share(&r, y, &mut rng), &t, &mut ledger).unwrap();
            assert_eq!(reconstruct(&r, z0, z1).unwrap(), r.mul(x, y));
        }
        assert_eq!(ledger.consumed(), 10_000);
    }

    #[test]
    fn dealt_triples_are_valid_and_distinct() {
        let r = ring();
        let mut dealer = Dealer::new(r, 8);
        assert!(dealer.deal(0).is_empty());
        let ts = dealer.deal(1000);
        for t in &ts {
            let a = reconstruct(&r, t.a().0, t.a().1).unwrap();
            let b = reconstruct(&r, t.b().0, t.b().1).unwrap();
            let c = reconstruct(&r, t.c().0, t.c().1).unwrap();
            assert_eq!(r.mul(a, b), c);
        }
        assert_ne!(ts[0].halves, ts[1].halves);
        assert_eq!(ts[999].id, 999);
        assert_eq!(dealer.deal(1)[0].id, 1000);
    }

    #[test]
    fn truncation_examples() {
        let codec = FixedCodec::default();
        let r = *codec.ring();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let one = codec.encode(1.0).unwrap();
        for _ in 0..1000 {
            let prod = share(&r, r.mul(one, one), &mut rng);
            let (t0, t1) = truncate(&codec, prod);
            let got = r.to_signed(reconstruct(&r, t0, t1).unwrap());
            assert!((got - r.to_signed(one)).abs() <= 1, "got {got}");

            let zero = share(&r, RingElement(0), &mut rng);
            let (t0, t1) = truncate(&codec, zero);
            let got = r.to_signed(reconstruct(&r, t0, t1).unwrap());
            assert!(got.abs() <= 1);
        }
    }

    #[test]
    fn truncated_products_within_two_ulp() {
        // Operands are drawn on the 2^-B grid so encoding is exact and the only
        // error is truncation. Large-error events happen with probability
        // ~|xy| 2^(2B-L+1); none are expected at this sample size for |xy| <= 10^4.
        let codec = FixedCodec::default();
        let r = *codec.ring();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut dealer = Dealer::new(r, 11);
        let mut ledger = TripleLedger::new();
        let tol = 2.0 * codec.ulp();
        for t in dealer.deal(10_000) {
            let lim = 100i64 << codec.frac_bits();
            let x = rng.gen_range(-lim..=lim) as f64 * codec.ulp();
            let y = rng.gen_range(-lim..=lim) as f64 * codec.ulp();
            let xs = share(&r, codec.encode(x).unwrap(), &mut rng);
            let ys = share(&r, codec.encode(y).unwrap(), &mut rng);
            let z = truncate(&codec, beaver_mul(&r, xs, ys, &t, &mut ledger).unwrap());
            let got = codec.decode(reconstruct(&r, z.0, z.1).unwrap());
            assert!((got - x * y).abs() <= tol, "x={x} y={y} got={got}");
        }
    }

    #[test]
    fn party_zero_share_is_uniform() {
        // Chi-square over 256 buckets, 255 dof; critical value at p = 0.001 is 330.52.
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let secret = RingElement(42);
        let mut buckets = [0u32; 256];
        let n = 10_000;
        for _ in 0..n {
            let (s0, _) = share(&r, secret, &mut rng);
            buckets[(s0.value.0 >> 56) as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let chi2: f64 = buckets.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 330.52, "chi2 = {chi2}");
    }

    #[test]
    fn matrix_share_and_concat() {
        let r = ring();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a: Vec<_> = (0..6).map(RingElement).collect();
        let b: Vec<_> = (10..13).map(RingElement).collect();
        let (a0, a1) = SharedMatrix::share(&r, 3, 2, &a, &mut rng).unwrap();
        let (b0, b1) = SharedMatrix::share(&r, 3, 1, &b, &mut rng).unwrap();
        let j0 = SharedMatrix::hconcat(&[a0, b0]).unwrap();
        let j1 = SharedMatrix::hconcat(&[a1, b1]).unwrap();
        let joint = SharedMatrix::reconstruct(&r, &j0, &j1).unwrap();
        let expect: Vec<_> = [0, 1, 10, 2, 3, 11, 4, 5, 12].into_iter().map(RingElement).collect();
        assert_eq!(joint, expect);
        assert_eq!(j0.column(2).len(), 3);
        assert!(SharedMatrix::share(&r, 2, 2, &b, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn linearity(k in any::<u64>(), x in any::<u64>(), y in any::<u64>(), seed in any::<u64>()) {
            let r = ring();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (k, x, y) = (RingElement(k), RingElement(x), RingElement(y));
            let (x0, x1) = share(&r, x, &mut rng);
            let (y0, y1) = share(&r, y, &mut rng);
            let z0 = add_shared(&r, mul_public(&r, x0, k), y0).unwrap();
            let z1 = add_shared(&r, mul_public(&r, x1, k), y1).unwrap();
            prop_assert_eq!(reconstruct(&r, z0, z1).unwrap(), r.add(r.mul(k, x), y));
        }
    }
}
