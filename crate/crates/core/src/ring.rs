//! Arithmetic in `Z_{2^L}` and the fixed-point codec that carries reals in it.
//!
//! Elements are stored in a `u64` and are always reduced below `2^L`, so any
//! ring width `1 <= L <= 64` is supported. All operations wrap; none panic.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ring width `L`.
pub const DEFAULT_RING_BITS: u32 = 64;
/// Default number of fractional bits `B`.
pub const DEFAULT_FRAC_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("ring width must be in 1..=64, got {0}")]
    InvalidRingBits(u32),
    #[error("fractional bits {frac_bits} unsupported for a {ring_bits}-bit ring (need 1 <= B and 2B < L)")]
    InvalidFracBits { ring_bits: u32, frac_bits: u32 },
    #[error("value {value} exceeds the encodable magnitude {limit}")]
    MagnitudeOverflow { value: f64, limit: f64 },
}

/// An element of `Z_{2^L}`; the ring width lives in the [`Ring`] that produced it.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RingElement(pub u64);

impl RingElement {
    pub const ZERO: RingElement = RingElement(0);

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({})", self.0)
    }
}

impl From<u64> for RingElement {
    fn from(v: u64) -> Self {
        RingElement(v)
    }
}

/// The ring `Z_{2^L}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ring {
    bits: u32,
    mask: u64,
}

impl Default for Ring {
    fn default() -> Self {
        Ring::new(DEFAULT_RING_BITS).expect("default ring width is valid")
    }
}

impl Ring {
    pub fn new(bits: u32) -> Result<Self, RingError> {
        if bits == 0 || bits > 64 {
            return Err(RingError::InvalidRingBits(bits));
        }
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        Ok(Ring { bits, mask })
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Reduces an arbitrary `u64` into the ring.
    #[inline]
    pub fn elem(&self, v: u64) -> RingElement {
        RingElement(v & self.mask)
    }

    /// Maps a signed integer into the ring (two's complement).
    #[inline]
    pub fn from_i64(&self, v: i64) -> RingElement {
        RingElement(v as u64 & self.mask)
    }

    #[inline]
    pub fn add(&self, a: RingElement, b: RingElement) -> RingElement {
        RingElement(a.0.wrapping_add(b.0) & self.mask)
    }

    #[inline]
    pub fn sub(&self, a: RingElement, b: RingElement) -> RingElement {
        RingElement(a.0.wrapping_sub(b.0) & self.mask)
    }

    #[inline]
    pub fn neg(&self, a: RingElement) -> RingElement {
        RingElement(a.0.wrapping_neg() & self.mask)
    }

    /// Low `L` bits of the product.
    #[inline]
    pub fn mul(&self, a: RingElement, b: RingElement) -> RingElement {
        RingElement(a.0.wrapping_mul(b.0) & self.mask)
    }

    /// Signed reading of `a`: elements at or above `2^(L-1)` are negative.
    #[inline]
    pub fn to_signed(&self, a: RingElement) -> i64 {
        let shift = 64 - self.bits;
        ((a.0 << shift) as i64) >> shift
    }

    /// Arithmetic right shift under the signed reading.
    #[inline]
    pub fn shr_signed(&self, a: RingElement, amount: u32) -> RingElement {
        self.from_i64(self.to_signed(a) >> amount)
    }

    /// Draws a uniform element.
    #[inline]
    pub fn random<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> RingElement {
        RingElement(rng.next_u64() & self.mask)
    }
}

/// Fixed-point codec: a real `x` is carried as `round(2^B * x)` in two's complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedCodec {
    ring: Ring,
    frac_bits: u32,
}

impl Default for FixedCodec {
    fn default() -> Self {
        FixedCodec::new(Ring::default(), DEFAULT_FRAC_BITS).expect("default codec is valid")
    }
}

impl FixedCodec {
    pub fn new(ring: Ring, frac_bits: u32) -> Result<Self, RingError> {
        if frac_bits == 0 || 2 * frac_bits >= ring.bits() {
            return Err(RingError::InvalidFracBits { ring_bits: ring.bits(), frac_bits });
        }
        Ok(FixedCodec { ring, frac_bits })
    }

    pub fn with_bits(ring_bits: u32, frac_bits: u32) -> Result<Self, RingError> {
        FixedCodec::new(Ring::new(ring_bits)?, frac_bits)
    }

    #[inline]
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// One unit in the last place, `2^-B`.
    #[inline]
    pub fn ulp(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Exclusive bound on encodable magnitudes, `2^(L-B-1)`.
    #[inline]
    pub fn max_magnitude(&self) -> f64 {
        ((self.ring.bits() - self.frac_bits - 1) as f64).exp2()
    }

    /// Encodes with round-half-to-even.
    pub fn encode(&self, x: f64) -> Result<RingElement, RingError> {
        let limit = self.max_magnitude();
        if !x.is_finite() || x.abs() >= limit {
            return Err(RingError::MagnitudeOverflow { value: x, limit });
        }
        let scaled = (x * self.scale()).round_ties_even();
        Ok(self.ring.from_i64(scaled as i64))
    }

    pub fn decode(&self, v: RingElement) -> f64 {
        self.ring.to_signed(v) as f64 / self.scale()
    }

    /// Encodes a public integer without scaling, for use with `mul_public`
    /// when no rescaling should follow.
    #[inline]
    pub fn integer(&self, k: i64) -> RingElement {
        self.ring.from_i64(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r64() -> Ring {
        Ring::default()
    }

    #[test]
    fn add_examples() {
        let r = r64();
        let x = RingElement(123_456);
        assert_eq!(r.add(RingElement(0), x), x);
        assert_eq!(r.add(RingElement(u64::MAX), RingElement(1)), RingElement(0));
        assert_eq!(r.add(RingElement(3), RingElement(5)), RingElement(8));
    }

    #[test]
    fn mul_examples() {
        let r = r64();
        let x = RingElement(987_654_321);
        assert_eq!(r.mul(RingElement(1), x), x);
        assert_eq!(r.mul(RingElement(1 << 63), RingElement(2)), RingElement(0));
        assert_eq!(r.mul(RingElement(6), RingElement(7)), RingElement(42));
    }

    #[test]
    fn narrow_ring_wraps_at_width() {
        let r = Ring::new(32).unwrap();
        assert_eq!(r.add(RingElement(u32::MAX as u64), RingElement(1)), RingElement(0));
        assert_eq!(r.neg(RingElement(1)), RingElement(u32::MAX as u64));
        assert_eq!(r.to_signed(RingElement(u32::MAX as u64)), -1);
        assert_eq!(r.mul(RingElement(1 << 31), RingElement(2)), RingElement(0));
    }

    #[test]
    fn invalid_parameters() {
        assert!(Ring::new(0).is_err());
        assert!(Ring::new(65).is_err());
        assert!(FixedCodec::with_bits(32, 16).is_err());
        assert!(FixedCodec::with_bits(64, 0).is_err());
        assert!(FixedCodec::with_bits(33, 16).is_ok());
    }

    #[test]
    fn encode_examples() {
        let c = FixedCodec::default();
        assert_eq!(c.encode(1.5).unwrap(), RingElement(98_304));
        assert_eq!(c.encode(0.0).unwrap(), RingElement(0));
        assert_eq!(c.encode(-0.25).unwrap(), RingElement(0u64.wrapping_sub(16_384)));
    }

    #[test]
    fn decode_examples() {
        let c = FixedCodec::default();
        assert_eq!(c.decode(RingElement(98_304)), 1.5);
        assert_eq!(c.decode(RingElement(0)), 0.0);
        assert_eq!(c.decode(RingElement(0u64.wrapping_sub(16_384))), -0.25);
    }

    #[test]
    fn encode_rounds_half_to_even() {
        let c = FixedCodec::default();
        let half = c.ulp() / 2.0;
        assert_eq!(c.encode(half).unwrap(), RingElement(0));
        assert_eq!(c.encode(3.0 * half).unwrap(), RingElement(2));
        assert_eq!(c.encode(-half).unwrap(), RingElement(0));
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let c = FixedCodec::default();
        let limit = c.max_magnitude();
        assert!(matches!(c.encode(limit), Err(RingError::MagnitudeOverflow { .. })));
        assert!(matches!(c.encode(-limit), Err(RingError::MagnitudeOverflow { .. })));
        assert!(c.encode(f64::NAN).is_err());
        assert!(c.encode(f64::INFINITY).is_err());
        assert!(c.encode(limit / 2.0).is_ok());
    }

    #[test]
    fn round_trip_over_uniform_reals() {
        let c = FixedCodec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bound = (-(c.frac_bits() as f64) - 1.0).exp2();
        for _ in 0..100_000 {
            let x: f64 = rng.gen_range(-1024.0..1024.0);
            let err = (c.decode(c.encode(x).unwrap()) - x).abs();
            assert!(err <= bound, "x={x} err={err}");
        }
    }

    proptest! {
        #[test]
        fn negation_is_additive_inverse(v in any::<u64>(), bits in 1u32..=64) {
            let r = Ring::new(bits).unwrap();
            let x = r.elem(v);
            prop_assert_eq!(r.add(x, r.neg(x)), RingElement(0));
        }

        #[test]
        fn encoding_is_additive(x in -1.0e6f64..1.0e6, y in -1.0e6f64..1.0e6) {
            let c = FixedCodec::default();
            let sum = c.ring().add(c.encode(x).unwrap(), c.encode(y).unwrap());
            prop_assert!((c.decode(sum) - (x + y)).abs() <= c.ulp());
        }

        #[test]
        fn twos_complement_symmetry(k in -(1i64 << 40)..(1i64 << 40)) {
            let c = FixedCodec::default();
            let x = k as f64 * c.ulp();
            prop_assert_eq!(c.encode(-x).unwrap(), c.ring().neg(c.encode(x).unwrap()));
        }

        #[test]
        fn signed_shift_matches_floor_division(v in any::<i64>(), s in 0u32..63) {
            let r = Ring::default();
            let got = r.to_signed(r.shr_signed(r.from_i64(v), s));
            prop_assert_eq!(got, v.div_euclid(1i64 << s));
        }
    }
}
