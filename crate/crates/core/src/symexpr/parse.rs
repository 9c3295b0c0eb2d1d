//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' ['-'] INT)?
//! primary := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
//! ```
//!
//! Decimal literals are read exactly as rationals, so `0.1` is `1/10`.

use std::collections::HashMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Zero;

use super::{CoordSystem, Expr, Func, SymError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Int(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), SymError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let int_end = self.pos;
            let mut frac_digits = "";
            if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                self.pos += 1;
                let fs = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                frac_digits = std::str::from_utf8(&self.src[fs..self.pos]).unwrap();
            }
            let int_digits = std::str::from_utf8(&self.src[start..int_end]).unwrap();
            if int_digits.is_empty() && frac_digits.is_empty() {
                return Err(SymError::Syntax {
                    offset: start,
                    message: "malformed number".to_string(),
                });
            }
            if self.pos == int_end {
                return Ok((Tok::Int(int_digits.to_string()), start));
            }
            let digits = format!("{int_digits}{frac_digits}");
            let numer: BigInt = digits.parse().unwrap_or_else(|_| BigInt::zero());
            let denom = num::pow::pow(BigInt::from(10), frac_digits.len());
            return Ok((Tok::Num(BigRational::new(numer, denom)), start));
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((Tok::Ident(s.to_string()), start));
        }
        Err(SymError::Syntax {
            offset: start,
            message: format!("unexpected character `{}`", c as char),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    coords: &'a CoordSystem,
    constants: &'a HashMap<String, Expr>,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), SymError> {
        let (t, at) = self.lexer.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn unexpected(&self, what: &str) -> SymError {
        let found = match &self.tok {
            Tok::End => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        SymError::Syntax {
            offset: self.at,
            message: format!("expected {what}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, SymError> {
        let mut acc = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    acc = acc + self.term()?;
                }
                Tok::Minus => {
                    self.bump()?;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SymError> {
        let mut acc = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    acc = acc * self.unary()?;
                }
                Tok::Slash => {
                    self.bump()?;
                    let at = self.at;
                    let d = self.unary()?;
                    if d.is_zero() {
                        return Err(SymError::Syntax {
                            offset: at,
                            message: "division by the constant zero".to_string(),
                        });
                    }
                    acc = acc * d.recip();
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SymError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SymError> {
        let base = self.primary()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let negative = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        let Tok::Int(digits) = &self.tok else {
            return Err(self.unexpected("integer exponent"));
        };
        let at = self.at;
        let mut n: i32 = digits.parse().map_err(|_| SymError::Syntax {
            offset: at,
            message: "exponent out of range".to_string(),
        })?;
        if negative {
            n = -n;
        }
        self.bump()?;
        if self.tok == Tok::Caret {
            return Err(SymError::Syntax {
                offset: self.at,
                message: "chained exponents need parentheses".to_string(),
            });
        }
        Ok(base.powi(n))
    }

    fn primary(&mut self) -> Result<Expr, SymError> {
        match self.tok.clone() {
            Tok::Num(r) => {
                self.bump()?;
                Ok(Expr::rational(r))
            }
            Tok::Int(d) => {
                self.bump()?;
                let v: BigInt = d.parse().unwrap_or_else(|_| BigInt::zero());
                Ok(Expr::rational(BigRational::from_integer(v)))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                if let Some(f) = func {
                    if self.tok != Tok::LParen {
                        return Err(self.unexpected(&format!("`(` after `{name}`")));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(self.unexpected("`)`"));
                    }
                    self.bump()?;
                    return Ok(Expr::apply(f, arg));
                }
                if let Some(i) = self.coords.index_of(&name) {
                    return Ok(Expr::var(i));
                }
                if name == "pi" {
                    return Ok(Expr::pi());
                }
                if let Some(c) = self.constants.get(&name) {
                    return Ok(c.clone());
                }
                Err(SymError::UnknownIdentifier { name, offset: at })
            }
            _ => Err(self.unexpected("an operand")),
        }
    }
}

/// Parse `text` against the chart `coords`.
pub fn parse(text: &str, coords: &CoordSystem) -> Result<Expr, SymError> {
    parse_with_constants(text, coords, &HashMap::new())
}

/// Parse with additional named constants (scenario parameters such as `alpha`).
pub fn parse_with_constants(
    text: &str,
    coords: &CoordSystem,
    constants: &HashMap<String, Expr>,
) -> Result<Expr, SymError> {
    let mut p = Parser {
        lexer: Lexer {
            src: text.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
        coords,
        constants,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::Node;

    fn qu() -> CoordSystem {
        CoordSystem::tangent(1)
    }

    #[test]
    fn sum_of_two_terms() {
        let e = parse("q1^2 + u1*u1", &qu()).unwrap();
        match e.node() {
            Node::Sum(ts) => assert_eq!(ts.len(), 2),
            other => panic!("expected a sum, got {other:?}"),
        }
    }

    #[test]
    fn product_node() {
        let e = parse("sin(q1)*exp(u1)", &qu()).unwrap();
        assert!(matches!(e.node(), Node::Product(fs) if fs.len() == 2));
    }

    #[test]
    fn dangling_operator_reports_offset() {
        let err = parse("q1 +", &qu()).unwrap_err();
        assert!(matches!(err, SymError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("q1 + w", &qu()).unwrap_err();
        assert_eq!(
            err,
            SymError::UnknownIdentifier {
                name: "w".to_string(),
                offset: 5
            }
        );
    }

    #[test]
    fn precedence() {
        let c = qu();
        // ^ binds tighter than unary minus
        assert_eq!(parse("-q1^2", &c).unwrap().eval(&[3.0, 0.0]), -9.0);
        assert_eq!(parse("2*3^2", &c).unwrap().eval(&[0.0, 0.0]), 18.0);
        assert_eq!(parse("1 - 2 - 3", &c).unwrap().eval(&[0.0, 0.0]), -4.0);
        assert_eq!(parse("8/2/2", &c).unwrap().eval(&[0.0, 0.0]), 2.0);
        assert_eq!(parse("q1^-1", &c).unwrap().eval(&[4.0, 0.0]), 0.25);
        assert_eq!(parse(" ( q1 + u1 ) * 2 ", &c).unwrap().eval(&[1.0, 2.0]), 6.0);
    }

    #[test]
    fn literals_are_exact() {
        let c = qu();
        assert_eq!(parse("3/2", &c).unwrap(), Expr::frac(3, 2));
        assert_eq!(parse("0.1", &c).unwrap(), Expr::frac(1, 10));
        assert_eq!(parse("2.50", &c).unwrap(), Expr::frac(5, 2));
    }

    #[test]
    fn malformed_inputs() {
        let c = qu();
        for bad in ["", "(q1", "q1)", "sin q1", "q1^u1", "q1^2^3", "q1 $ u1", "1/0", "."] {
            assert!(parse(bad, &c).is_err(), "{bad:?} should fail");
        }
    }
}
