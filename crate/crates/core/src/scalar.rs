//! Scalar types that expressions can be evaluated over.
//!
//! `f64` is the workhorse. [`Dual`] carries a gradient with respect to a small
//! number of seed directions and is used wherever a derivative of a numerically
//! built quantity (orthonormalized frames, for instance) is needed exactly.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;

    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        let mut base = if n < 0 {
            Self::constant(1.0) / self.clone()
        } else {
            self.clone()
        };
        let mut k = n.unsigned_abs();
        let mut acc = Self::constant(1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// Forward-mode dual number with a dense gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: Vec<f64>,
}

impl Dual {
    pub fn constant_n(v: f64, n: usize) -> Self {
        Dual { v, d: vec![0.0; n] }
    }

    /// Independent variable number `k` of `n`.
    pub fn seed(v: f64, k: usize, n: usize) -> Self {
        let mut d = vec![0.0; n];
        d[k] = 1.0;
        Dual { v, d }
    }

    fn zip(&self, other: &Dual, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        // a constant built through `Scalar::constant` has an empty gradient
        let n = self.d.len().max(other.d.len());
        (0..n)
            .map(|i| {
                f(
                    self.d.get(i).copied().unwrap_or(0.0),
                    other.d.get(i).copied().unwrap_or(0.0),
                )
            })
            .collect()
    }

    fn chain(&self, v: f64, dv: f64) -> Dual {
        Dual {
            v,
            d: self.d.iter().map(|x| x * dv).collect(),
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.zip(&o, |a, b| a + b),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.zip(&o, |a, b| a - b),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let (a, b) = (self.v, o.v);
        Dual {
            v: a * b,
            d: self.zip(&o, |da, db| da * b + a * db),
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let (a, b) = (self.v, o.v);
        Dual {
            v: a / b,
            d: self.zip(&o, |da, db| (da * b - a * db) / (b * b)),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: self.d.iter().map(|x| -x).collect(),
        }
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: Vec::new() }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(&self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(1.0);
        }
        self.chain(self.v.powi(n), n as f64 * self.v.powi(n - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_product_rule() {
        let x = Dual::seed(2.0, 0, 2);
        let y = Dual::seed(3.0, 1, 2);
        let p = x.clone() * y.clone() + x.sin();
        assert_eq!(p.v, 6.0 + 2f64.sin());
        assert!((p.d[0] - (3.0 + 2f64.cos())).abs() < 1e-15);
        assert_eq!(p.d[1], 2.0);
    }

    #[test]
    fn dual_sqrt_and_powi() {
        let x = Dual::seed(4.0, 0, 1);
        assert!((x.sqrt().d[0] - 0.25).abs() < 1e-15);
        let c = x.powi(-2);
        assert!((c.d[0] + 2.0 / 64.0).abs() < 1e-15);
        let generic = <Dual as Scalar>::powi(&x, 3);
        assert_eq!(generic.v, 64.0);
    }
}
