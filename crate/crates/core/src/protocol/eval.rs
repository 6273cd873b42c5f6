//! Evaluation of an expression over secret-shared columns.
//!
//! Subtrees without variables are public: both parties compute them in
//! floating point and only encode the result where it meets a secret value.
//! Secret-by-public products and all additions are local; a secret-by-secret
//! product is one opening round and `sin`/`cos` run the trigonometric kernel.

use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::kernels::{sec_cos, sec_sin, KernelConfig};
use crate::mpc::{Backend, MpcContext, MpcError, Result};
use crate::ring::RingElement;
use crate::sharing::{truncate_share, SharedMatrix};

enum Value {
    Public(f64),
    Secret(Vec<RingElement>),
}

/// This party's share of `tree` evaluated on every row of `x`.
pub fn secure_eval_expression<B: Backend>(
    ctx: &mut MpcContext<B>,
    kernels: &KernelConfig,
    tree: &Expr,
    x: &SharedMatrix,
) -> Result<Vec<RingElement>> {
    match eval(ctx, kernels, tree, x)? {
        Value::Public(c) => ctx.public_vec(c, x.rows),
        Value::Secret(s) => Ok(s),
    }
}

fn eval<B: Backend>(ctx: &mut MpcContext<B>, k: &KernelConfig, e: &Expr, x: &SharedMatrix) -> Result<Value> {
    Ok(match e {
        Expr::Const(c) => Value::Public(*c),
        Expr::Var(j) => {
            let j = *j as usize;
            if j == 0 || j > x.cols {
                return Err(MpcError::Aborted(format!("variable x{j} is not in the shared dataset")));
            }
            Value::Secret(x.column(j - 1))
        }
        Expr::Unary(op, c) => match eval(ctx, k, c, x)? {
            Value::Public(v) => Value::Public(op.apply(v)),
            Value::Secret(s) => Value::Secret(match op {
                UnaryOp::Sin => sec_sin(ctx, k, &s)?,
                UnaryOp::Cos => sec_cos(ctx, k, &s)?,
            }),
        },
        Expr::Binary(op, l, r) => {
            let a = eval(ctx, k, l, x)?;
            let b = eval(ctx, k, r, x)?;
            match (op, a, b) {
                (_, Value::Public(a), Value::Public(b)) => Value::Public(op.apply(a, b)),
                (BinaryOp::Add, Value::Secret(s), Value::Public(c)) | (BinaryOp::Add, Value::Public(c), Value::Secret(s)) => {
                    Value::Secret(ctx.add_const(&s, c)?)
                }
                (BinaryOp::Add, Value::Secret(s), Value::Secret(t)) => Value::Secret(ctx.add(&s, &t)),
                (BinaryOp::Sub, Value::Secret(s), Value::Public(c)) => Value::Secret(ctx.add_const(&s, -c)?),
                (BinaryOp::Sub, Value::Public(c), Value::Secret(s)) => Value::Secret(ctx.add_const(&ctx.neg(&s), c)?),
                (BinaryOp::Sub, Value::Secret(s), Value::Secret(t)) => Value::Secret(ctx.sub(&s, &t)),
                (BinaryOp::Mul, Value::Secret(s), Value::Public(c)) | (BinaryOp::Mul, Value::Public(c), Value::Secret(s)) => {
                    Value::Secret(ctx.mul_const(&s, c)?)
                }
                (BinaryOp::Mul, Value::Secret(s), Value::Secret(t)) => Value::Secret(ctx.mul(&s, &t)?),
            }
        }
    })
}

/// Opening rounds [`secure_eval_expression`] spends on `tree`.
pub fn eval_rounds(kernels: &KernelConfig, tree: &Expr) -> u64 {
    match tree {
        Expr::Const(_) | Expr::Var(_) => 0,
        Expr::Unary(_, c) => eval_rounds(kernels, c) + if c.has_vars() { kernels.sincos_cost().rounds } else { 0 },
        Expr::Binary(op, l, r) => {
            let own = (*op == BinaryOp::Mul && l.has_vars() && r.has_vars()) as u64;
            eval_rounds(kernels, l) + eval_rounds(kernels, r) + own
        }
    }
}

/// This party's share of the mean squared error of `tree` against `y`.
///
/// Residuals are squared in one round and summed at double scale, then
/// truncated once and scaled by the public `1/m`.
pub fn secure_mse_share<B: Backend>(
    ctx: &mut MpcContext<B>,
    kernels: &KernelConfig,
    tree: &Expr,
    x: &SharedMatrix,
    y: &[RingElement],
) -> Result<RingElement> {
    let yhat = secure_eval_expression(ctx, kernels, tree, x)?;
    let r = ctx.sub(y, &yhat);
    let sq = ctx.mul_products(&[(&r, &r)])?.pop().expect("one product");
    let ring = *ctx.ring();
    let sum = sq.iter().fold(RingElement::ZERO, |acc, &v| ring.add(acc, v));
    let sum = truncate_share(&ring, ctx.party(), sum, ctx.codec().frac_bits());
    let z = ctx.mul_const(&[sum], 1.0 / y.len() as f64)?;
    Ok(z[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::mpc::run_pair;
    use crate::ring::FixedCodec;
    use crate::sharing::PartyIndex;
    use rand::SeedableRng;

    fn shared(codec: &FixedCodec, rows: &[Vec<f64>]) -> (SharedMatrix, SharedMatrix) {
        let plain: Vec<RingElement> = rows.iter().flatten().map(|&v| codec.encode(v).unwrap()).collect();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        SharedMatrix::share(codec.ring(), rows.len(), rows[0].len(), &plain, &mut rng).unwrap()
    }

    fn secure(text: &str, rows: &[Vec<f64>]) -> (Vec<f64>, u64) {
        let codec = FixedCodec::default();
        let tree = parse(text).unwrap();
        let (x0, x1) = shared(&codec, rows);
        let k = KernelConfig::default();
        let [(a, s), (b, _)] =
            run_pair(codec, 9, None, [x0, x1], |ctx, x| secure_eval_expression(ctx, &k, &tree, &x)).unwrap();
        let ring = codec.ring();
        (a.iter().zip(&b).map(|(&u, &v)| codec.decode(ring.add(u, v))).collect(), s.rounds)
    }

    #[test]
    fn constants_and_variables() {
        let rows = vec![vec![0.25, -1.5], vec![0.75, 3.0]];
        let (c, r) = secure("0.3", &rows);
        assert!(c.iter().all(|v| (v - 0.3).abs() <= 2f64.powi(-16)));
        assert_eq!(r, 0);
        let (v, _) = secure("x2", &rows);
        assert_eq!(v, [-1.5, 3.0]);
    }

    #[test]
    fn public_subtrees_cost_nothing() {
        let rows = vec![vec![0.5, 0.25]];
        let (v, r) = secure("(* (sin 0.5) (+ x1 (cos (* 2 0.25))))", &rows);
        assert_eq!(r, 0);
        let expect = 0.5f64.sin() * (0.5 + 0.5f64.cos());
        assert!((v[0] - expect).abs() < 1e-4);
    }

    #[test]
    fn rounds_match_static_count() {
        let rows = vec![vec![0.1, 0.9], vec![0.4, 0.2], vec![0.8, 0.5]];
        let k = KernelConfig::default();
        for text in ["(* x1 x2)", "(* (* x1 x2) (+ x1 x2))", "(+ (sin x1) (sin (* x2 x2)))", "(* (* 2 (sin x1)) (cos x2))"] {
            let tree = parse(text).unwrap();
            let (v, rounds) = secure(text, &rows);
            assert_eq!(rounds, eval_rounds(&k, &tree), "{text}");
            for (row, got) in rows.iter().zip(&v) {
                assert!((tree.eval(row) - got).abs() < 1e-2, "{text}");
            }
        }
    }

    #[test]
    fn mse_share_reconstructs() {
        let codec = FixedCodec::default();
        let k = KernelConfig::default();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let (x0, x1) = shared(&codec, &rows);
        let ys: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
        let (y0, y1) = shared(&codec, &ys);
        let tree = parse("(* x1 x1)").unwrap();
        let plain = crate::gp::fitness_mse(&tree, &crate::gp::Dataset::new(rows.clone(), y.clone()).unwrap()).unwrap();
        let [(a, s0), (b, _)] = run_pair(codec, 1, None, [(x0, y0), (x1, y1)], |ctx, (x, y)| {
            assert_eq!(x.party, if ctx.party() == PartyIndex::P0 { PartyIndex::P0 } else { PartyIndex::P1 });
            secure_mse_share(ctx, &k, &tree, &x, &y.values)
        })
        .unwrap();
        let z = codec.decode(codec.ring().add(a, b));
        assert!((z - plain).abs() < 1e-3, "{z} vs {plain}");
        assert_eq!(s0.rounds, 2);
    }

    #[test]
    fn huge_public_constant_overflows() {
        let codec = FixedCodec::default();
        let tree = parse("(+ x1 1e300)").unwrap();
        let (x0, x1) = shared(&codec, &[vec![0.5]]);
        let k = KernelConfig::default();
        let r = run_pair(codec, 2, None, [x0, x1], |ctx, x| secure_eval_expression(ctx, &k, &tree, &x));
        assert!(matches!(r, Err(MpcError::MagnitudeOverflow(_))));
    }
}
