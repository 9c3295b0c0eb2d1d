//! Infix printing. Output re-parses to an expression with the same value.

use std::fmt;

use num::{One, Signed};

use super::{Expr, Node};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

/// Displays an expression with the coordinate names of a chart.
pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> ExprDisplay<'a> {
    pub fn new(expr: &'a Expr, names: &'a [String]) -> Self {
        ExprDisplay { expr, names }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self.expr, Some(self.names)))
    }
}

pub(crate) fn render(e: &Expr, names: Option<&[String]>) -> String {
    let mut out = String::new();
    write_expr(e, names, 0, &mut out);
    out
}

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Rational(r, _) => {
            if !r.is_integer() {
                PRODUCT
            } else if r.is_negative() {
                UNARY
            } else {
                ATOM
            }
        }
        Node::Real(v) => {
            if *v < 0.0 {
                UNARY
            } else {
                ATOM
            }
        }
        Node::Pi | Node::Var(_) | Node::Apply(..) => ATOM,
        Node::Sum(_) => SUM,
        Node::Product(_) => PRODUCT,
        Node::Pow(..) => POWER,
        Node::Neg(_) => UNARY,
    }
}

fn write_expr(e: &Expr, names: Option<&[String]>, min: u8, out: &mut String) {
    let wrap = precedence(e) < min;
    if wrap {
        out.push('(');
    }
    match e.node() {
        Node::Rational(r, _) => out.push_str(&r.to_string()),
        Node::Real(v) => out.push_str(&v.to_string()),
        Node::Pi => out.push_str("pi"),
        Node::Var(i) => match names {
            Some(n) => out.push_str(&n[*i]),
            None => out.push_str(&format!("x{i}")),
        },
        Node::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                match negated(t) {
                    Some(pos) if k > 0 => {
                        out.push_str(" - ");
                        write_expr(&pos, names, PRODUCT, out);
                    }
                    _ => {
                        if k > 0 {
                            out.push_str(" + ");
                        }
                        write_expr(t, names, PRODUCT, out);
                    }
                }
            }
        }
        Node::Product(fs) => {
            let (den, num): (Vec<&Expr>, Vec<&Expr>) =
                fs.iter().partition(|f| matches!(f.node(), Node::Pow(_, n) if *n < 0));
            if num.is_empty() {
                out.push('1');
            }
            for (k, f) in num.iter().enumerate() {
                if k > 0 {
                    out.push('*');
                }
                // a leading fraction is safe: `3/2*x` groups left
                write_expr(f, names, if k == 0 { PRODUCT } else { UNARY }, out);
            }
            for f in den {
                out.push('/');
                if let Node::Pow(b, n) = f.node() {
                    write_expr(&b.powi(-n), names, POWER, out);
                }
            }
        }
        Node::Pow(b, n) => {
            write_expr(b, names, ATOM, out);
            out.push_str(&format!("^{n}"));
        }
        Node::Apply(func, a) => {
            out.push_str(func.name());
            out.push('(');
            write_expr(a, names, 0, out);
            out.push(')');
        }
        Node::Neg(a) => {
            out.push('-');
            write_expr(a, names, UNARY, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

/// If `t` is syntactically negative, its negation.
fn negated(t: &Expr) -> Option<Expr> {
    match t.node() {
        Node::Neg(a) => Some(a.clone()),
        Node::Rational(r, _) if r.is_negative() => Some(Expr::rational(-r.clone())),
        Node::Real(v) if *v < 0.0 => Some(Expr::real(-v)),
        Node::Product(fs) => match fs[0].node() {
            Node::Rational(r, _) if r.is_negative() => {
                let c = -r.clone();
                let rest = fs[1..].iter().cloned();
                if c.is_one() {
                    Some(Expr::product(rest))
                } else {
                    Some(Expr::product(std::iter::once(Expr::rational(c)).chain(rest)))
                }
            }
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use crate::symexpr::{parse, CoordSystem, Expr};

    fn roundtrip(text: &str) {
        let c = CoordSystem::tangent(2);
        let e = parse(text, &c).unwrap();
        let printed = e.display(&c).to_string();
        let again = parse(&printed, &c).unwrap_or_else(|err| panic!("{printed}: {err}"));
        let pts = [[0.3, -0.7, 1.1, 0.5], [-1.2, 0.4, 0.9, -0.25]];
        for p in pts {
            let (a, b) = (e.eval(&p), again.eval(&p));
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{text} -> {printed}");
        }
    }

    #[test]
    fn printed_forms_reparse() {
        for t in [
            "q1^2 + u1*u1",
            "-q1^2",
            "(-q1)^3",
            "1 - 2*q2 - 3/2*u1",
            "q1/(u1 + 2)",
            "q1^-2*u2",
            "1/q1",
            "sin(q1 - u1)*exp(-u2)",
            "-(q1 + u1)*(q2 - 1)",
            "(q1 + u1)^-3",
            "2*pi*q1",
            "0.1*q1 - 0.25",
        ] {
            roundtrip(t);
        }
    }

    #[test]
    fn readable_output() {
        let c = CoordSystem::tangent(1);
        let e = parse("q1 - 2*u1", &c).unwrap();
        assert_eq!(e.display(&c).to_string(), "q1 - 2*u1");
        let r = Expr::real(-0.5) + Expr::var(0);
        let s = r.display(&c).to_string();
        assert!(parse(&s, &c).is_ok(), "{s}");
    }
}
