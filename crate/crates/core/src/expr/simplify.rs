use std::cmp::Ordering;

use super::{BinaryOp, Expr};

/// Bottom-up constant folding, identity elimination and ordering of
/// commutative operands. The result evaluates to the same value as the input
/// wherever the input is finite.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Unary(op, c) => match simplify(c) {
            Expr::Const(v) => Expr::Const(op.apply(v)),
            c => Expr::unary(*op, c),
        },
        Expr::Binary(op, l, r) => {
            let (l, r) = (simplify(l), simplify(r));
            let is = |x: &Expr, v: f64| matches!(x, Expr::Const(c) if *c == v);
            match (op, &l, &r) {
                (_, Expr::Const(a), Expr::Const(b)) => Expr::Const(op.apply(*a, *b)),
                (BinaryOp::Add, _, _) if is(&l, 0.0) => r,
                (BinaryOp::Add | BinaryOp::Sub, _, _) if is(&r, 0.0) => l,
                (BinaryOp::Sub, _, _) if l == r => Expr::Const(0.0),
                (BinaryOp::Mul, _, _) if is(&l, 0.0) || is(&r, 0.0) => Expr::Const(0.0),
                (BinaryOp::Mul, _, _) if is(&l, 1.0) => r,
                (BinaryOp::Mul, _, _) if is(&r, 1.0) => l,
                _ if op.is_commutative() && canonical_cmp(&l, &r) == Ordering::Greater => Expr::binary(*op, r, l),
                _ => Expr::binary(*op, l, r),
            }
        }
    }
}

fn rank(e: &Expr) -> u8 {
    match e {
        Expr::Const(_) => 0,
        Expr::Var(_) => 1,
        Expr::Unary(..) => 2,
        Expr::Binary(..) => 3,
    }
}

/// Total order: constants, variables, unary, binary; ties by operator then children.
fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => x.total_cmp(y),
        (Expr::Var(x), Expr::Var(y)) => x.cmp(y),
        (Expr::Unary(o1, c1), Expr::Unary(o2, c2)) => o1.cmp(o2).then_with(|| canonical_cmp(c1, c2)),
        (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
            o1.cmp(o2).then_with(|| canonical_cmp(l1, l2)).then_with(|| canonical_cmp(r1, r2))
        }
        _ => Ordering::Equal,
    })
}
