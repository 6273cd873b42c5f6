//! Secure element-wise approximations built only from shared additions,
//! Beaver products and truncation.
//!
//! | kernel      | method                                              | domain        |
//! |-------------|-----------------------------------------------------|---------------|
//! | sin / cos   | Taylor seed at `x / 2^n`, then `n` angle doublings  | `|x| <= 16`   |
//! | exp         | `(1 + t + t^2/2)^(2^n)` with `t = x / 2^n`          | `[-8, 8]`     |
//! | reciprocal  | Newton-Raphson `z <- z (2 - x z)`                   | `[0.1, 100]`  |
//! | log         | Householder steps `y <- y - sum h^k / k`, `h = 1 - x e^-y` | `[0.1, 100]` |
//!
//! There is no secure range reduction; inputs outside a kernel's domain give
//! unspecified (but finite) results. Every kernel consumes a fixed number of
//! rounds and triples per call, reported by [`KernelConfig`].

use serde::{Deserialize, Serialize};

use crate::mpc::{Backend, MpcContext, Result};
use crate::ring::RingElement;

/// Iteration counts for the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sincos_doublings: u32,
    pub exp_squarings: u32,
    pub reciprocal_iterations: u32,
    pub log_iterations: u32,
    pub log_order: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { sincos_doublings: 4, exp_squarings: 8, reciprocal_iterations: 10, log_iterations: 2, log_order: 8 }
    }
}

/// Opening rounds per call and triples per input element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelCost {
    pub rounds: u64,
    pub triples_per_element: u64,
}

impl KernelCost {
    const fn add(self, other: KernelCost) -> KernelCost {
        KernelCost {
            rounds: self.rounds + other.rounds,
            triples_per_element: self.triples_per_element + other.triples_per_element,
        }
    }
}

/// Sine/cosine seed uses powers up to this order.
const SINCOS_SEED_ORDER: u32 = 6;

fn powers_cost(order: u32) -> KernelCost {
    KernelCost {
        rounds: if order <= 1 { 0 } else { (order as f64).log2().ceil() as u64 },
        triples_per_element: order.saturating_sub(1) as u64,
    }
}

impl KernelConfig {
    pub fn square_cost(&self) -> KernelCost {
        KernelCost { rounds: 1, triples_per_element: 1 }
    }

    pub fn sincos_cost(&self) -> KernelCost {
        let n = self.sincos_doublings as u64;
        powers_cost(SINCOS_SEED_ORDER).add(KernelCost { rounds: n, triples_per_element: 3 * n })
    }

    pub fn exp_cost(&self) -> KernelCost {
        let n = self.exp_squarings as u64;
        powers_cost(2).add(KernelCost { rounds: n, triples_per_element: n })
    }

    pub fn reciprocal_cost(&self) -> KernelCost {
        let k = self.reciprocal_iterations as u64;
        self.exp_cost().add(KernelCost { rounds: 2 * k, triples_per_element: 2 * k })
    }

    pub fn log_cost(&self) -> KernelCost {
        let step = self.exp_cost().add(KernelCost { rounds: 1, triples_per_element: 1 }).add(powers_cost(self.log_order));
        let mut total = self.exp_cost();
        for _ in 0..self.log_iterations {
            total = total.add(step);
        }
        total
    }
}

type Shares = Vec<RingElement>;

/// `[x, x^2, ..., x^order]`, doubling the known range of exponents each round.
pub fn sec_powers<B: Backend>(ctx: &mut MpcContext<B>, x: &[RingElement], order: u32) -> Result<Vec<Shares>> {
    let mut pw: Vec<Shares> = vec![x.to_vec()];
    while (pw.len() as u32) < order {
        let have = pw.len();
        let top = pw[have - 1].clone();
        let count = have.min(order as usize - have);
        let pairs: Vec<(&[RingElement], &[RingElement])> = (0..count).map(|k| (&top[..], &pw[k][..])).collect();
        let next = ctx.mul_many(&pairs)?;
        pw.extend(next);
    }
    Ok(pw)
}

pub fn sec_square<B: Backend>(ctx: &mut MpcContext<B>, x: &[RingElement]) -> Result<Shares> {
    ctx.square(x)
}

/// Returns `(cos x, sin x)`.
///
/// Seeds `(c, s)` with degree-6 Taylor polynomials at `t = x / 2^n`, then
/// doubles the angle `n` times via `c' = c^2 - s^2`, `s' = 2cs`. Each doubling
/// also doubles the fixed-point error, so `n` stays small and the seed carries
/// the accuracy.
pub fn sec_sincos<B: Backend>(ctx: &mut MpcContext<B>, cfg: &KernelConfig, x: &[RingElement]) -> Result<(Shares, Shares)> {
    let n = cfg.sincos_doublings;
    let t = ctx.mul_const(x, (-(n as f64)).exp2())?;
    let p = sec_powers(ctx, &t, SINCOS_SEED_ORDER)?;
    // s = t - t^3/6 + t^5/120
    let mut s = ctx.sub(&t, &ctx.mul_const(&p[2], 1.0 / 6.0)?);
    s = ctx.add(&s, &ctx.mul_const(&p[4], 1.0 / 120.0)?);
    // c = 1 - t^2/2 + t^4/24 - t^6/720
    let mut c = ctx.sub(&ctx.mul_const(&p[3], 1.0 / 24.0)?, &ctx.mul_const(&p[1], 0.5)?);
    c = ctx.sub(&c, &ctx.mul_const(&p[5], 1.0 / 720.0)?);
    c = ctx.add_const(&c, 1.0)?;
    for _ in 0..n {
        let prods = ctx.mul_products(&[(&c, &c), (&s, &s), (&c, &s)])?;
        c = ctx.truncate(&ctx.sub(&prods[0], &prods[1]));
        s = ctx.truncate(&ctx.scale_int(&prods[2], 2));
    }
    Ok((c, s))
}

pub fn sec_sin<B: Backend>(ctx: &mut MpcContext<B>, cfg: &KernelConfig, x: &[RingElement]) -> Result<Shares> {
    sec_sincos(ctx, cfg, x).map(|(_, s)| s)
}

pub fn sec_cos<B: Backend>(ctx: &mut MpcContext<B>, cfg: &KernelConfig, x: &[RingElement]) -> Result<Shares> {
    sec_sincos(ctx, cfg, x).map(|(c, _)| c)
}

/// Limit approximation with a second-order base: `(1 + t + t^2/2)^(2^n)`.
pub fn sec_exp<B: Backend>(ctx: &mut MpcContext<B>, cfg: &KernelConfig, x: &[RingElement]) -> Result<Shares> {
    let n = cfg.exp_squarings;
    let t = ctx.mul_const(x, (-(n as f64)).exp2())?;
    let t2 = ctx.square(&t)?;
    let mut y = ctx.add_const(&ctx.add(&t, &ctx.mul_const(&t2, 0.5)?), 1.0)?;
    for _ in 0..n {
        y = ctx.square(&y)?;
    }
    Ok(y)
}

/// Newton-Raphson from `z0 = 3 e^(0.5 - x) + 0.003`.
pub fn sec_reciprocal<B: Backend>(ctx: &mut MpcContext<B>, cfg: &KernelConfig, x: &[RingElement]) -> Result<Shares> {
    let arg = ctx.add_const(&ctx.neg(x), 0.5)?;
    let e = sec_exp(ctx, cfg, &arg)?;
    let mut z = ctx.add_const(&ctx.scale_int(&e, 3), 0.003)?;
    for _ in 0..cfg.reciprocal_iterations {
        let xz = ctx.mul(x, &z)?;
        let two_minus = ctx.add_const(&ctx.neg(&xz), 2.0)?;
        z = ctx.mul(&z, &two_minus)?;
    }
    Ok(z)
}

/// Householder refinement from `y0 = x/120 - 20 e^(-2x - 1) + 3`.
///
/// Each step sets `h = 1 - x e^(-y)` and `y <- y - sum_{k=1..order} h^k / k`,
/// i.e. `y + ln(x e^-y)` truncated to `order` terms.
pub fn sec_log<B: Backend>(ctx: &mut MpcContext<B>, cfg: &KernelConfig, x: &[RingElement]) -> Result<Shares> {
    let arg = ctx.add_const(&ctx.scale_int(x, -2), -1.0)?;
    let e = sec_exp(ctx, cfg, &arg)?;
    let mut y = ctx.sub(&ctx.mul_const(x, 1.0 / 120.0)?, &ctx.scale_int(&e, 20));
    y = ctx.add_const(&y, 3.0)?;
    for _ in 0..cfg.log_iterations {
        let e = sec_exp(ctx, cfg, &ctx.neg(&y))?;
        let xe = ctx.mul(x, &e)?;
        let h = ctx.add_const(&ctx.neg(&xe), 1.0)?;
        let pw = sec_powers(ctx, &h, cfg.log_order)?;
        let mut series = pw[0].clone();
        for (k, p) in pw.iter().enumerate().skip(1) {
            series = ctx.add(&series, &ctx.mul_const(p, 1.0 / (k + 1) as f64)?);
        }
        y = ctx.sub(&y, &series);
    }
    Ok(y)
}
