//! Canonical expanded form: Laurent polynomials over atoms with rational coefficients.
//!
//! Atoms are coordinates, real constants, `pi`, function applications with
//! canonical arguments, and reciprocals of non-monomial sums. Two expressions
//! that agree as elements of this ring have identical `Poly` values.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{One, Signed, Zero};

use super::{Expr, Func, Node};

const TERM_LIMIT: usize = 50_000;

#[derive(Debug)]
pub(crate) struct TooLarge;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Atom {
    Var(usize),
    Pi,
    Real(u64),
    Apply(Func, Box<Poly>),
    Inv(Box<Poly>),
}

type Monomial = Vec<(Atom, i32)>;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let e = a[i].1 + b[j].1;
                if e != 0 {
                    out.push((a[i].0.clone(), e));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Poly {
    fn constant(c: BigRational) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    fn atom(a: Atom) -> Poly {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(a, 1)], BigRational::one());
        Poly { terms }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            let entry = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
            *entry += c;
            if entry.is_zero() {
                self.terms.remove(m);
            }
        }
    }

    fn neg(mut self) -> Poly {
        for c in self.terms.values_mut() {
            *c = -c.clone();
        }
        self
    }

    fn mul(&self, other: &Poly) -> Result<Poly, TooLarge> {
        if self.terms.len().saturating_mul(other.terms.len()) > TERM_LIMIT * 4 {
            return Err(TooLarge);
        }
        let mut out: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = mul_monomials(ma, mb);
                let entry = out.entry(m).or_insert_with(BigRational::zero);
                *entry += ca * cb;
            }
        }
        out.retain(|_, c| !c.is_zero());
        if out.len() > TERM_LIMIT {
            return Err(TooLarge);
        }
        Ok(Poly { terms: out })
    }

    fn powi(&self, n: i32) -> Result<Poly, TooLarge> {
        if n == 0 {
            return Ok(Poly::constant(BigRational::one()));
        }
        if n > 0 {
            let mut acc = Poly::constant(BigRational::one());
            let mut base = self.clone();
            let mut k = n as u32;
            while k > 0 {
                if k & 1 == 1 {
                    acc = acc.mul(&base)?;
                }
                k >>= 1;
                if k > 0 {
                    base = base.mul(&base)?;
                }
            }
            return Ok(acc);
        }
        // negative exponent
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if c.is_zero() {
                return Ok(Poly::atom(Atom::Inv(Box::new(self.clone()))));
            }
            let coeff = num::pow::Pow::pow(c, n);
            let mono: Monomial = m.iter().map(|(a, e)| (a.clone(), e * n)).collect();
            let mut terms = BTreeMap::new();
            terms.insert(mono, coeff);
            return Ok(Poly { terms });
        }
        let mut terms = BTreeMap::new();
        // normalise the reciprocal argument to a primitive sign: leading coefficient positive
        let (arg, sign) = {
            let lead_negative = self.terms.values().next().map(|c| c.is_negative()).unwrap_or(false);
            if lead_negative {
                (self.clone().neg(), -BigRational::one())
            } else {
                (self.clone(), BigRational::one())
            }
        };
        let k = -n;
        let coeff = if k % 2 == 1 { sign } else { BigRational::one() };
        terms.insert(vec![(Atom::Inv(Box::new(arg)), k)], coeff);
        Ok(Poly { terms })
    }

    pub(crate) fn from_expr(e: &Expr) -> Result<Poly, TooLarge> {
        Ok(match e.node() {
            Node::Rational(r, _) => Poly::constant(r.clone()),
            Node::Real(v) => Poly::atom(Atom::Real(v.to_bits())),
            Node::Pi => Poly::atom(Atom::Pi),
            Node::Var(i) => Poly::atom(Atom::Var(*i)),
            Node::Sum(ts) => {
                let mut acc = Poly::default();
                for t in ts {
                    acc.add_assign(&Poly::from_expr(t)?);
                    if acc.terms.len() > TERM_LIMIT {
                        return Err(TooLarge);
                    }
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = Poly::constant(BigRational::one());
                for f in fs {
                    acc = acc.mul(&Poly::from_expr(f)?)?;
                    if acc.is_zero() {
                        break;
                    }
                }
                acc
            }
            Node::Pow(b, n) => Poly::from_expr(b)?.powi(*n)?,
            Node::Apply(f, a) => {
                let arg = Poly::from_expr(a)?;
                if arg.is_zero() {
                    match f {
                        Func::Sin => Poly::default(),
                        _ => Poly::constant(BigRational::one()),
                    }
                } else {
                    Poly::atom(Atom::Apply(*f, Box::new(arg)))
                }
            }
            Node::Neg(a) => Poly::from_expr(a)?.neg(),
        })
    }

    fn atom_expr(a: &Atom) -> Expr {
        match a {
            Atom::Var(i) => Expr::var(*i),
            Atom::Pi => Expr::pi(),
            Atom::Real(bits) => Expr::real(f64::from_bits(*bits)),
            Atom::Apply(f, p) => Expr::apply(*f, p.to_expr()),
            Atom::Inv(p) => p.to_expr().recip(),
        }
    }

    pub(crate) fn to_expr(&self) -> Expr {
        let terms = self.terms.iter().map(|(m, c)| {
            let mut factors = Vec::with_capacity(m.len() + 1);
            factors.push(Expr::rational(c.clone()));
            for (a, e) in m {
                factors.push(Poly::atom_expr(a).powi(*e));
            }
            Expr::product(factors)
        });
        Expr::sum(terms.collect::<Vec<_>>())
    }

    /// Split into monomials in `vars` with coefficients free of `vars`.
    pub(crate) fn split_polynomial(&self, vars: &[usize]) -> Option<Vec<(Vec<u32>, Expr)>> {
        let mut grouped: BTreeMap<Vec<u32>, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; vars.len()];
            let mut rest: Monomial = Vec::new();
            for (a, e) in m {
                match a {
                    Atom::Var(i) if vars.contains(i) => {
                        if *e < 0 {
                            return None;
                        }
                        let k = vars.iter().position(|v| v == i).unwrap();
                        exps[k] = *e as u32;
                    }
                    other => {
                        let expr = Poly::atom_expr(other);
                        if vars.iter().any(|&v| expr.depends_on(v)) {
                            return None;
                        }
                        rest.push((other.clone(), *e));
                    }
                }
            }
            let mut single = BTreeMap::new();
            single.insert(rest, c.clone());
            grouped.entry(exps).or_default().add_assign(&Poly { terms: single });
        }
        Some(
            grouped
                .into_iter()
                .filter(|(_, p)| !p.is_zero())
                .map(|(k, p)| (k, p.to_expr()))
                .collect(),
        )
    }

    #[allow(dead_code)]
    pub(crate) fn constant_value(&self) -> Option<BigRational> {
        self.as_constant()
    }
}
