//! Functional equivalence of expressions, used to decide whether a run
//! recovered its ground truth.

use std::f64::consts::PI;

use super::{simplify, Expr};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalenceConfig {
    /// Sample points per box; two boxes are checked.
    pub points: usize,
    /// Agreement tolerance, relative to `max(1, |f|, |g|)`.
    pub tolerance: f64,
    /// Constants within this distance of a simple value are snapped to it.
    pub snap_tolerance: f64,
    pub max_denominator: u32,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig { points: 256, tolerance: 1e-7, snap_tolerance: 1e-6, max_denominator: 64 }
    }
}

impl EquivalenceConfig {
    pub fn equivalent(&self, f: &Expr, g: &Expr, n_vars: usize) -> bool {
        let (fs, gs) = (simplify(f), simplify(g));
        if fs == gs {
            return true;
        }
        let (fs, gs) = (simplify(&self.snap(&fs)), simplify(&self.snap(&gs)));
        if fs == gs {
            return true;
        }
        let n = n_vars.max(f.max_var() as usize).max(g.max_var() as usize).max(1);
        let unit = halton_points(self.points, n);
        let boxes = [(0.0, 1.0), (-1.0, 1.0)];
        boxes.iter().all(|&(lo, hi)| {
            let mut row = vec![0.0; n];
            unit.iter().all(|p| {
                for (r, u) in row.iter_mut().zip(p) {
                    *r = lo + (hi - lo) * u;
                }
                agree(fs.eval(&row), gs.eval(&row), self.tolerance)
            })
        })
    }

    pub fn snap(&self, e: &Expr) -> Expr {
        e.map_constants(&|c| snap_value(c, self.snap_tolerance, self.max_denominator))
    }
}

/// Equivalence with the default configuration.
pub fn equivalent(f: &Expr, g: &Expr, n_vars: usize) -> bool {
    EquivalenceConfig::default().equivalent(f, g, n_vars)
}

/// Snaps constants to nearby `p/q` (q <= 64) or `±π` with the default tolerance.
pub fn snap_constants(e: &Expr) -> Expr {
    EquivalenceConfig::default().snap(e)
}

fn snap_value(c: f64, tol: f64, max_q: u32) -> f64 {
    for q in 1..=max_q {
        let q = q as f64;
        let p = (c * q).round();
        if (c - p / q).abs() <= tol {
            return p / q;
        }
    }
    for v in [PI, -PI] {
        if (c - v).abs() <= tol {
            return v;
        }
    }
    c
}

fn agree(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

fn nth_prime(k: usize) -> u64 {
    if let Some(&p) = PRIMES.get(k) {
        return p as u64;
    }
    let mut count = PRIMES.len();
    let mut n = *PRIMES.last().unwrap() as u64 + 2;
    loop {
        if (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d)) {
            if count == k {
                return n;
            }
            count += 1;
        }
        n += 2;
    }
}

/// The first `count` points of the Halton sequence in `[0,1)^dims`, skipping the origin.
pub fn halton_points(count: usize, dims: usize) -> Vec<Vec<f64>> {
    let bases: Vec<u64> = (0..dims).map(nth_prime).collect();
    (1..=count as u64).map(|i| bases.iter().map(|&b| radical_inverse(i, b)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn eq(a: &str, b: &str, n: usize) -> bool {
        equivalent(&parse(a).unwrap(), &parse(b).unwrap(), n)
    }

    const NGUYEN9: &str = "(+ (sin x1) (sin (* x2 x2)))";

    #[test]
    fn examples() {
        assert!(eq(NGUYEN9, NGUYEN9, 2));
        assert!(eq("(* (* 2 (sin x1)) (cos x2))", "(+ (sin (+ x1 x2)) (sin (- x1 x2)))", 2));
        assert!(!eq("(+ (sin x1) x2)", "(+ (sin x1) (sin x2))", 2));
    }

    #[test]
    fn near_misses_are_rejected() {
        assert!(!eq(NGUYEN9, "(+ (sin x1) (* x2 x2))", 2));
        assert!(!eq(NGUYEN9, "(+ (sin x1) (* x2 (sin x2)))", 2));
        assert!(!eq("x1", "(+ x1 0.001)", 1));
    }

    #[test]
    fn snapping() {
        assert!(eq("(* 0.5000004 x1)", "(* 0.5 x1)", 1));
        assert!(eq("(sin (* 3.1415925 x1))", "(sin (* 3.14159265358979 x1))", 1));
        assert_eq!(snap_value(0.33333334, 1e-6, 64), 1.0 / 3.0);
        assert_eq!(snap_value(0.123456, 1e-6, 64), 0.123456);
    }

    #[test]
    fn unlisted_variables_are_sampled() {
        assert!(!eq("x1", "x2", 1));
    }

    #[test]
    fn halton_is_in_unit_box() {
        let pts = halton_points(256, 5);
        assert_eq!(pts.len(), 256);
        assert!(pts.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
        assert_eq!(pts[0][..2], [0.5, 1.0 / 3.0]);
        assert_eq!(nth_prime(16), 59);
        assert_eq!(nth_prime(17), 61);
    }
}
