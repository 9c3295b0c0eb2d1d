//! Exact scalar expressions over chart coordinates.
//!
//! Expressions are immutable trees shared through `Arc`, so cloning is cheap
//! and evaluation from several threads is safe. Construction applies only
//! local rewrites (constant folding, 0/1 absorption, flattening). A canonical
//! polynomial form is available through [`Expr::simplify`] and
//! [`Expr::is_zero_exact`] for identities that must hold exactly.

mod coords;
mod parse;
mod poly;
mod print;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::Scalar;

pub use coords::{CoordSystem, Point, Split, MAX_DIM, RESERVED};
pub use parse::{parse, parse_with_constants};
pub use print::ExprDisplay;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("invalid chart: {0}")]
    Chart(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }
}

/// Node kinds of an expression tree.
#[derive(Debug)]
pub enum Node {
    /// Exact rational constant, with its nearest double cached.
    Rational(BigRational, f64),
    Real(f64),
    Pi,
    Var(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, i32),
    Apply(Func, Expr),
    Neg(Expr),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    vars: u128,
}

/// Shared, immutable scalar expression.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_generic())
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.vars != other.0.vars {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Rational(a, _), Node::Rational(b, _)) => a == b,
            (Node::Real(a), Node::Real(b)) => a.to_bits() == b.to_bits(),
            (Node::Pi, Node::Pi) => true,
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Sum(a), Node::Sum(b)) | (Node::Product(a), Node::Product(b)) => a == b,
            (Node::Pow(a, m), Node::Pow(b, n)) => m == n && a == b,
            (Node::Apply(f, a), Node::Apply(g, b)) => f == g && a == b,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            _ => false,
        }
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

fn vars_of(node: &Node) -> u128 {
    match node {
        Node::Rational(..) | Node::Real(_) | Node::Pi => 0,
        Node::Var(i) => 1u128 << i,
        Node::Sum(v) | Node::Product(v) => v.iter().fold(0, |m, e| m | e.0.vars),
        Node::Pow(b, _) => b.0.vars,
        Node::Apply(_, a) | Node::Neg(a) => a.0.vars,
    }
}

impl Expr {
    fn from_node(node: Node) -> Expr {
        let vars = vars_of(&node);
        Expr(Arc::new(Inner { node, vars }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn rational(r: BigRational) -> Expr {
        let f = ratio_to_f64(&r);
        Expr::from_node(Node::Rational(r, f))
    }

    pub fn int(i: i64) -> Expr {
        Expr::rational(BigRational::from_integer(BigInt::from(i)))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        assert!(d != 0, "zero denominator");
        Expr::rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    /// Real constant. Integral and dyadic values stay real; use [`Expr::frac`] for exact ones.
    pub fn real(v: f64) -> Expr {
        if v == 0.0 {
            return Expr::zero();
        }
        Expr::from_node(Node::Real(v))
    }

    pub fn pi() -> Expr {
        Expr::from_node(Node::Pi)
    }

    pub fn var(i: usize) -> Expr {
        assert!(i < MAX_DIM, "coordinate index {i} out of range");
        Expr::from_node(Node::Var(i))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Rational(r, _) => Some(r),
            _ => None,
        }
    }

    /// Structural zero: the exact rational constant 0.
    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Rational(r, _) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Rational(r, _) if r.is_one())
    }

    /// No coordinate occurs in the expression.
    pub fn is_constant(&self) -> bool {
        self.0.vars == 0
    }

    pub fn depends_on(&self, var: usize) -> bool {
        var < MAX_DIM && self.0.vars & (1u128 << var) != 0
    }

    /// Indices of the coordinates that occur, ascending.
    pub fn free_vars(&self) -> Vec<usize> {
        (0..MAX_DIM).filter(|&i| self.depends_on(i)).collect()
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Sum(v) | Node::Product(v) => 1 + v.iter().map(Expr::size).sum::<usize>(),
            Node::Pow(b, _) => 1 + b.size(),
            Node::Apply(_, a) | Node::Neg(a) => 1 + a.size(),
            _ => 1,
        }
    }

    // ---- smart constructors -------------------------------------------------

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut flat: Vec<Expr> = Vec::new();
        let mut rational = BigRational::zero();
        let mut real = 0.0f64;
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Rational(r, _) => rational += r,
                Node::Real(v) => real += v,
                Node::Sum(inner) => {
                    for e in inner.iter().rev() {
                        stack.push(e.clone());
                    }
                }
                _ => flat.push(t),
            }
        }
        let mut out = Vec::with_capacity(flat.len() + 2);
        if !rational.is_zero() {
            out.push(Expr::rational(rational));
        }
        if real != 0.0 {
            out.push(Expr::real(real));
        }
        out.extend(flat);
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Sum(out)),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut flat: Vec<Expr> = Vec::new();
        let mut rational = BigRational::one();
        let mut real = 1.0f64;
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Rational(r, _) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    rational *= r;
                }
                Node::Real(v) => real *= v,
                Node::Neg(inner) => {
                    rational = -rational;
                    stack.push(inner.clone());
                }
                Node::Product(inner) => {
                    for e in inner.iter().rev() {
                        stack.push(e.clone());
                    }
                }
                _ => flat.push(t),
            }
        }
        if real == 0.0 {
            return Expr::zero();
        }
        let negate = rational.is_negative() && real == 1.0 && rational == -BigRational::one();
        let mut out = Vec::with_capacity(flat.len() + 2);
        if !negate && !rational.is_one() {
            out.push(Expr::rational(rational));
        }
        if real != 1.0 {
            out.push(Expr::real(real));
        }
        out.extend(flat);
        let body = match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Product(out)),
        };
        if negate {
            Expr::from_node_neg(body)
        } else {
            body
        }
    }

    fn from_node_neg(e: Expr) -> Expr {
        match e.node() {
            Node::Rational(r, _) => Expr::rational(-r.clone()),
            Node::Real(v) => Expr::real(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::from_node(Node::Neg(e)),
        }
    }

    pub fn neg_expr(&self) -> Expr {
        match self.node() {
            Node::Product(fs) => match fs[0].node() {
                Node::Rational(r, _) => {
                    let c = -r.clone();
                    let rest = fs[1..].iter().cloned();
                    Expr::product(std::iter::once(Expr::rational(c)).chain(rest))
                }
                _ => Expr::from_node_neg(self.clone()),
            },
            _ => Expr::from_node_neg(self.clone()),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Rational(r, _) => {
                if r.is_zero() && n < 0 {
                    return Expr::from_node(Node::Pow(self.clone(), n));
                }
                Expr::rational(num::pow::Pow::pow(r, n))
            }
            Node::Real(v) => Expr::real(v.powi(n)),
            Node::Pow(b, m) => match m.checked_mul(n) {
                Some(k) => b.powi(k),
                None => Expr::from_node(Node::Pow(self.clone(), n)),
            },
            Node::Neg(inner) => {
                let p = inner.powi(n);
                if n % 2 == 0 {
                    p
                } else {
                    p.neg_expr()
                }
            }
            _ => Expr::from_node(Node::Pow(self.clone(), n)),
        }
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        if arg.is_zero() {
            return match f {
                Func::Sin => Expr::zero(),
                Func::Cos | Func::Exp => Expr::one(),
            };
        }
        Expr::from_node(Node::Apply(f, arg))
    }

    pub fn sin(&self) -> Expr {
        Expr::apply(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::apply(Func::Cos, self.clone())
    }

    pub fn exp(&self) -> Expr {
        Expr::apply(Func::Exp, self.clone())
    }

    pub fn scale(&self, c: &Expr) -> Expr {
        Expr::product([c.clone(), self.clone()])
    }

    // ---- calculus -----------------------------------------------------------

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        if !self.depends_on(var) {
            return Expr::zero();
        }
        match self.node() {
            Node::Rational(..) | Node::Real(_) | Node::Pi => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.diff(var))),
            Node::Product(fs) => {
                let mut terms = Vec::new();
                for (k, f) in fs.iter().enumerate() {
                    let df = f.diff(var);
                    if df.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> = Vec::with_capacity(fs.len());
                    for (j, g) in fs.iter().enumerate() {
                        factors.push(if j == k { df.clone() } else { g.clone() });
                    }
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Node::Pow(b, n) => Expr::product([Expr::int(*n as i64), b.powi(n - 1), b.diff(var)]),
            Node::Apply(f, a) => {
                let da = a.diff(var);
                let outer = match f {
                    Func::Sin => a.cos(),
                    Func::Cos => a.sin().neg_expr(),
                    Func::Exp => self.clone(),
                };
                Expr::product([outer, da])
            }
            Node::Neg(a) => a.diff(var).neg_expr(),
        }
    }

    /// Replace every coordinate `i` by `map(i)`.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Expr) -> Expr {
        if self.is_constant() {
            return self.clone();
        }
        match self.node() {
            Node::Var(i) => map(*i),
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.substitute(map))),
            Node::Product(fs) => Expr::product(fs.iter().map(|f| f.substitute(map))),
            Node::Pow(b, n) => b.substitute(map).powi(*n),
            Node::Apply(f, a) => Expr::apply(*f, a.substitute(map)),
            Node::Neg(a) => a.substitute(map).neg_expr(),
            _ => self.clone(),
        }
    }

    /// Substitute a full vector of replacement expressions, one per coordinate.
    pub fn compose(&self, images: &[Expr]) -> Expr {
        self.substitute(&|i| images[i].clone())
    }

    // ---- evaluation ---------------------------------------------------------

    /// IEEE double evaluation at a point given in chart order.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.node() {
            Node::Rational(_, f) => *f,
            Node::Real(v) => *v,
            Node::Pi => std::f64::consts::PI,
            Node::Var(i) => x[*i],
            Node::Sum(ts) => ts.iter().map(|t| t.eval(x)).sum(),
            Node::Product(fs) => fs.iter().map(|f| f.eval(x)).product(),
            Node::Pow(b, n) => b.eval(x).powi(*n),
            Node::Apply(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
            Node::Neg(a) => -a.eval(x),
        }
    }

    /// Evaluation over any [`Scalar`] type.
    pub fn eval_with<T: Scalar>(&self, x: &[T]) -> T {
        match self.node() {
            Node::Rational(_, f) => T::constant(*f),
            Node::Real(v) => T::constant(*v),
            Node::Pi => T::constant(std::f64::consts::PI),
            Node::Var(i) => x[*i].clone(),
            Node::Sum(ts) => {
                let mut it = ts.iter();
                let first = it.next().map(|t| t.eval_with(x)).unwrap_or(T::constant(0.0));
                it.fold(first, |acc, t| acc + t.eval_with(x))
            }
            Node::Product(fs) => {
                let mut it = fs.iter();
                let first = it.next().map(|t| t.eval_with(x)).unwrap_or(T::constant(1.0));
                it.fold(first, |acc, t| acc * t.eval_with(x))
            }
            Node::Pow(b, n) => b.eval_with(x).powi(*n),
            Node::Apply(f, a) => {
                let v = a.eval_with(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
            Node::Neg(a) => -a.eval_with(x),
        }
    }

    /// Exact evaluation at a rational point. `None` when a transcendental or
    /// real-constant node is reached with a nontrivial argument, or on division by zero.
    pub fn eval_exact(&self, x: &[BigRational]) -> Option<BigRational> {
        match self.node() {
            Node::Rational(r, _) => Some(r.clone()),
            Node::Real(_) | Node::Pi => None,
            Node::Var(i) => Some(x[*i].clone()),
            Node::Sum(ts) => {
                let mut acc = BigRational::zero();
                for t in ts {
                    acc += t.eval_exact(x)?;
                }
                Some(acc)
            }
            Node::Product(fs) => {
                let mut acc = BigRational::one();
                for f in fs {
                    acc *= f.eval_exact(x)?;
                    if acc.is_zero() {
                        return Some(acc);
                    }
                }
                Some(acc)
            }
            Node::Pow(b, n) => {
                let v = b.eval_exact(x)?;
                if v.is_zero() && *n < 0 {
                    return None;
                }
                Some(num::pow::Pow::pow(&v, *n))
            }
            Node::Apply(f, a) => {
                let v = a.eval_exact(x)?;
                if !v.is_zero() {
                    return None;
                }
                Some(match f {
                    Func::Sin => BigRational::zero(),
                    _ => BigRational::one(),
                })
            }
            Node::Neg(a) => Some(-a.eval_exact(x)?),
        }
    }

    // ---- canonical form -----------------------------------------------------

    /// Canonical expanded form (sum of monomials over atoms with rational
    /// coefficients). Returns the input unchanged when expansion would be too large.
    pub fn simplify(&self) -> Expr {
        match poly::Poly::from_expr(self) {
            Ok(p) => p.to_expr(),
            Err(_) => self.clone(),
        }
    }

    /// `Some(true)` when the canonical form is the zero polynomial,
    /// `Some(false)` when it is not, `None` when expansion was abandoned.
    pub fn is_zero_exact(&self) -> Option<bool> {
        if self.is_zero() {
            return Some(true);
        }
        poly::Poly::from_expr(self).ok().map(|p| p.is_zero())
    }

    /// Polynomial structure in the listed variables: a map from exponent
    /// vectors to coefficient expressions free of those variables. `None` if the
    /// expression is not polynomial in them.
    pub fn polynomial_in(&self, vars: &[usize]) -> Option<Vec<(Vec<u32>, Expr)>> {
        poly::Poly::from_expr(self).ok()?.split_polynomial(vars)
    }

    // ---- printing -----------------------------------------------------------

    pub fn display<'a>(&'a self, coords: &'a CoordSystem) -> ExprDisplay<'a> {
        ExprDisplay::new(self, coords.names())
    }

    fn display_generic(&self) -> String {
        print::render(self, None)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        Expr::sum([self, o])
    }
}

impl Add<&Expr> for &Expr {
    type Output = Expr;
    fn add(self, o: &Expr) -> Expr {
        Expr::sum([self.clone(), o.clone()])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        Expr::sum([self, o.neg_expr()])
    }
}

impl Sub<&Expr> for &Expr {
    type Output = Expr;
    fn sub(self, o: &Expr) -> Expr {
        Expr::sum([self.clone(), o.neg_expr()])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        Expr::product([self, o])
    }
}

impl Mul<&Expr> for &Expr {
    type Output = Expr;
    fn mul(self, o: &Expr) -> Expr {
        Expr::product([self.clone(), o.clone()])
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_expr()
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_expr()
    }
}

impl From<i64> for Expr {
    fn from(i: i64) -> Expr {
        Expr::int(i)
    }
}

/// Exact rational value of a double (every finite double is dyadic).
pub fn exact_of_f64(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> CoordSystem {
        CoordSystem::tangent(1)
    }

    #[test]
    fn power_rule() {
        let c = chart();
        let e = parse("q1^2", &c).unwrap();
        let d = e.diff(0);
        assert_eq!(d.eval(&[3.0, 0.0]), 6.0);
        assert_eq!(d.simplify(), parse("2*q1", &c).unwrap().simplify());
    }

    #[test]
    fn oscillator_derivative_in_u() {
        let c = chart();
        let e = parse("1/2*(u1^2 + alpha*q1^2)", &c);
        assert!(e.is_err(), "alpha is not a coordinate");
        let mut consts = std::collections::HashMap::new();
        consts.insert("alpha".to_string(), Expr::frac(7, 3));
        let e = parse_with_constants("1/2*(u1^2 + alpha*q1^2)", &c, &consts).unwrap();
        let d = e.diff(1).simplify();
        assert_eq!(d, Expr::var(1));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = chart();
        let e = parse("sin(q1)*u1", &c).unwrap();
        let exact = e.diff(0).eval(&[0.0, 3.0]);
        let h = 1e-6;
        let fd = (e.eval(&[h, 3.0]) - e.eval(&[-h, 3.0])) / (2.0 * h);
        assert!((exact - fd).abs() < 1e-6);
        assert!((exact - 3.0).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let c = chart();
        assert_eq!(parse("q1+u1", &c).unwrap().eval(&[1.0, 2.0]), 3.0);
        assert_eq!(parse("exp(0)", &c).unwrap().eval(&[5.0, 5.0]), 1.0);
        let e = parse("1/2*(u1^2+2*q1^2)", &c).unwrap();
        assert_eq!(e.eval(&[1.0, 2.0]), 3.0);
    }

    #[test]
    fn local_rewrites() {
        let x = Expr::var(0);
        assert!((x.clone() * Expr::zero()).is_zero());
        assert_eq!(x.clone() * Expr::one(), x);
        assert_eq!(x.clone() + Expr::zero(), x);
        assert_eq!(-(-x.clone()), x);
        assert_eq!((Expr::int(2) * Expr::frac(1, 2)), Expr::one());
        assert_eq!(x.powi(2).powi(3), x.powi(6));
    }

    #[test]
    fn exact_zero_detection() {
        let c = CoordSystem::tangent(2);
        let a = parse("(q1+u2)^2 - q1^2 - 2*q1*u2 - u2^2", &c).unwrap();
        assert_eq!(a.is_zero_exact(), Some(true));
        let b = parse("sin(q1)^2 + cos(q1)^2 - 1", &c).unwrap();
        assert_eq!(b.is_zero_exact(), Some(false));
    }

    #[test]
    fn exact_evaluation() {
        let c = chart();
        let e = parse("q1^-1 + 3/2*u1", &c).unwrap();
        let v = e
            .eval_exact(&[BigRational::from_integer(2.into()), BigRational::one()])
            .unwrap();
        assert_eq!(v, BigRational::from_integer(2.into()));
        assert!(parse("sin(q1)", &c)
            .unwrap()
            .eval_exact(&[BigRational::one(), BigRational::one()])
            .is_none());
        assert!(e.eval_exact(&[BigRational::zero(), BigRational::one()]).is_none());
    }

    #[test]
    fn negative_power_derivative() {
        let c = chart();
        let e = parse("q1^-2", &c).unwrap();
        let d = e.diff(0);
        assert!((d.eval(&[2.0, 0.0]) + 2.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn free_variables() {
        let c = CoordSystem::tangent(2);
        let e = parse("q2*exp(u1)", &c).unwrap();
        assert_eq!(e.free_vars(), vec![1, 2]);
        assert!(e.diff(0).is_zero());
    }

    #[test]
    fn substitution_composes() {
        let c = chart();
        let e = parse("q1*u1", &c).unwrap();
        let shifted = e.compose(&[Expr::var(0) + Expr::one(), Expr::var(1) + Expr::int(2)]);
        assert_eq!(shifted.eval(&[1.0, 1.0]), 6.0);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![(0usize..2).prop_map(Expr::var), (-4i64..=4).prop_map(Expr::int)];
        leaf.prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                inner.clone().prop_map(|a| a.sin()),
                inner.clone().prop_map(|a| a.cos()),
                (inner, 0i32..=3).prop_map(|(a, n)| a.powi(n)),
            ]
        })
    }

    fn point() -> impl Strategy<Value = [f64; 2]> {
        [-1.0f64..1.0, -1.0f64..1.0]
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn printing_reparses(e in expr(), x in point()) {
            let c = CoordSystem::tangent(1);
            let again = parse(&e.display(&c).to_string(), &c).unwrap();
            prop_assert!(close(e.eval(&x), again.eval(&x), 1e-12));
        }

        #[test]
        fn simplify_keeps_values(e in expr(), x in point()) {
            prop_assert!(close(e.eval(&x), e.simplify().eval(&x), 1e-10));
        }

        #[test]
        fn derivative_matches_finite_difference(e in expr(), x in point()) {
            let h = 1e-5;
            let (xp, xm) = ([x[0] + h, x[1]], [x[0] - h, x[1]]);
            let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
            prop_assert!(close(e.diff(0).eval(&x), fd, 1e-5), "{:?}", e);
        }

        #[test]
        fn product_rule(a in expr(), b in expr(), x in point()) {
            let lhs = (&a * &b).diff(1);
            let rhs = &(&a.diff(1) * &b) + &(&a * &b.diff(1));
            prop_assert!(close(lhs.eval(&x), rhs.eval(&x), 1e-10));
        }
    }
}
