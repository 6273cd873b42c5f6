//! Expression trees over `+ - * sin cos`, variables `x1..xn` and real constants.

mod equiv;
mod parse;
mod simplify;

pub use equiv::{equivalent, halton_points, snap_constants, EquivalenceConfig};
pub use parse::{format_constant, parse, SyntaxError};
pub use simplify::simplify;

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 3] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul];

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
        }
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, BinaryOp::Sub)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Sin,
    Cos,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 2] = [UnaryOp::Sin, UnaryOp::Cos];

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
        }
    }
}

/// A node of an expression tree; the root node is the whole expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 1-based variable index: `Var(1)` is `x1`.
    Var(u16),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Node label without children, for structural bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Const(u64),
    Var(u16),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(k: u16) -> Expr {
        Expr::Var(k)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Expr {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Sin, a)
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Cos, a)
    }

    /// Evaluates on one sample; `row[k - 1]` is the value of `xk`.
    pub fn eval(&self, row: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => row[*k as usize - 1],
            Expr::Unary(op, c) => op.apply(c.eval(row)),
            Expr::Binary(op, l, r) => op.apply(l.eval(row), r.eval(row)),
        }
    }

    /// Edge count of the longest root-to-leaf path; a lone terminal has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 0,
            Expr::Unary(_, c) => 1 + c.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Node count.
    pub fn len(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, c) => 1 + c.len(),
            Expr::Binary(_, l, r) => 1 + l.len() + r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Expr::Const(_) | Expr::Var(_))
    }

    /// Highest variable index referenced, 0 when there are none.
    pub fn max_var(&self) -> u16 {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) => *k,
            Expr::Unary(_, c) => c.max_var(),
            Expr::Binary(_, l, r) => l.max_var().max(r.max_var()),
        }
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(_) => true,
            Expr::Unary(_, c) => c.has_vars(),
            Expr::Binary(_, l, r) => l.has_vars() || r.has_vars(),
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Expr::Const(c) => NodeKind::Const(c.to_bits()),
            Expr::Var(k) => NodeKind::Var(*k),
            Expr::Unary(op, _) => NodeKind::Unary(*op),
            Expr::Binary(op, _, _) => NodeKind::Binary(*op),
        }
    }

    /// Node labels in preorder.
    pub fn kinds(&self) -> Vec<NodeKind> {
        let mut out = Vec::with_capacity(self.len());
        self.visit(&mut |e| out.push(e.kind()));
        out
    }

    /// Calls `f` on every node in preorder.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Unary(_, c) => c.visit(f),
            Expr::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// The subtree rooted at preorder index `index`.
    pub fn subtree(&self, index: usize) -> Option<&Expr> {
        if index == 0 {
            return Some(self);
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => None,
            Expr::Unary(_, c) => c.subtree(index - 1),
            Expr::Binary(_, l, r) => {
                let ll = l.len();
                if index <= ll {
                    l.subtree(index - 1)
                } else {
                    r.subtree(index - 1 - ll)
                }
            }
        }
    }

    /// Depth of the node at preorder index `index` below the root.
    pub fn node_depth(&self, index: usize) -> Option<usize> {
        if index == 0 {
            return Some(0);
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => None,
            Expr::Unary(_, c) => c.node_depth(index - 1).map(|d| d + 1),
            Expr::Binary(_, l, r) => {
                let ll = l.len();
                if index <= ll {
                    l.node_depth(index - 1).map(|d| d + 1)
                } else {
                    r.node_depth(index - 1 - ll).map(|d| d + 1)
                }
            }
        }
    }

    /// Returns a copy with the subtree at `index` replaced.
    pub fn with_subtree(&self, index: usize, replacement: Expr) -> Option<Expr> {
        if index == 0 {
            return Some(replacement);
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => None,
            Expr::Unary(op, c) => Some(Expr::unary(*op, c.with_subtree(index - 1, replacement)?)),
            Expr::Binary(op, l, r) => {
                let ll = l.len();
                if index <= ll {
                    Some(Expr::binary(*op, l.with_subtree(index - 1, replacement)?, (**r).clone()))
                } else {
                    Some(Expr::binary(*op, (**l).clone(), r.with_subtree(index - 1 - ll, replacement)?))
                }
            }
        }
    }

    /// Maps every constant through `f`.
    pub fn map_constants(&self, f: &impl Fn(f64) -> f64) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(f(*c)),
            Expr::Var(k) => Expr::Var(*k),
            Expr::Unary(op, c) => Expr::unary(*op, c.map_constants(f)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.map_constants(f), r.map_constants(f)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => f.write_str(&format_constant(*c)),
            Expr::Var(k) => write!(f, "x{k}"),
            Expr::Unary(op, c) => write!(f, "({} {c})", op.symbol()),
            Expr::Binary(op, l, r) => write!(f, "({} {l} {r})", op.symbol()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
