use rand::Rng;

use super::GpConfig;
use crate::expr::{BinaryOp, Expr, UnaryOp};

/// A random terminal: one of `x1..xn` or a constant, uniformly.
pub fn random_terminal<R: Rng + ?Sized>(n_vars: usize, constants: (f64, f64), rng: &mut R) -> Expr {
    let pick = rng.gen_range(0..=n_vars);
    if pick < n_vars {
        Expr::Var(pick as u16 + 1)
    } else {
        Expr::Const(rng.gen_range(constants.0..=constants.1))
    }
}

/// A Full tree: every leaf sits at exactly `depth`.
pub fn full_tree<R: Rng + ?Sized>(depth: usize, n_vars: usize, constants: (f64, f64), rng: &mut R) -> Expr {
    if depth == 0 {
        return random_terminal(n_vars, constants, rng);
    }
    let pick = rng.gen_range(0..UnaryOp::ALL.len() + BinaryOp::ALL.len());
    if pick < BinaryOp::ALL.len() {
        let l = full_tree(depth - 1, n_vars, constants, rng);
        let r = full_tree(depth - 1, n_vars, constants, rng);
        Expr::binary(BinaryOp::ALL[pick], l, r)
    } else {
        let c = full_tree(depth - 1, n_vars, constants, rng);
        Expr::unary(UnaryOp::ALL[pick - BinaryOp::ALL.len()], c)
    }
}

/// Trees of the initial population, each grown Full to a depth drawn from
/// `config.init_depths()`.
pub fn init_trees<R: Rng + ?Sized>(config: &GpConfig, n_vars: usize, rng: &mut R) -> Vec<Expr> {
    let (lo, hi) = config.init_depths();
    (0..config.population_size)
        .map(|_| {
            let d = rng.gen_range(lo..=hi);
            full_tree(d, n_vars, config.constant_range, rng)
        })
        .collect()
}
