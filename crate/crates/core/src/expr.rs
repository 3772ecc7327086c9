//! Closed-form coefficient expressions in `x` and `y`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'y' | 'pi' | func '(' args ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin`, `cos`, `exp` (one argument) and
//! `gauss(a, x0, y0)` = `exp(-a ((x - x0)² + (y - y0)²))`.

use crate::error::{Error, Result};
use crate::geometry::{Grid2D, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Gauss { a: Box<Expr>, x0: Box<Expr>, y0: Box<Expr> },
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            chars: src.chars().collect(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
            Expr::Sin(a) => a.eval(x, y).sin(),
            Expr::Cos(a) => a.eval(x, y).cos(),
            Expr::Exp(a) => a.eval(x, y).exp(),
            Expr::Gauss { a, x0, y0 } => {
                let dx = x - x0.eval(x, y);
                let dy = y - y0.eval(x, y);
                (-a.eval(x, y) * (dx * dx + dy * dy)).exp()
            }
        }
    }

    /// Samples onto every grid node; fails on non-finite values.
    pub fn sample(&self, grid: &Grid2D) -> Result<ScalarField> {
        let field = ScalarField::from_fn(grid, |x, y| self.eval(x, y));
        if field.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Expression("expression is not finite on the grid".into()));
        }
        Ok(field)
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} at offset {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        let mut args = self.args()?;
                        if args.len() != 1 {
                            return Err(self.error(&format!("{name} takes one argument")));
                        }
                        let a = Box::new(args.remove(0));
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(a),
                            "cos" => Expr::Cos(a),
                            _ => Expr::Exp(a),
                        })
                    }
                    "gauss" => {
                        let args = self.args()?;
                        let [a, x0, y0]: [Expr; 3] = args
                            .try_into()
                            .map_err(|_| self.error("gauss takes three arguments (a, x0, y0)"))?;
                        Ok(Expr::Gauss {
                            a: Box::new(a),
                            x0: Box::new(x0),
                            y0: Box::new(y0),
                        })
                    }
                    other => Err(self.error(&format!("unknown identifier '{other}'"))),
                }
            }
            _ => Err(self.error("expected a value")),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect('(')?;
        let mut out = vec![self.expr()?];
        while self.eat(',') {
            out.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut prev = ' ';
        while let Some(&c) = self.chars.get(self.pos) {
            let exp_sign = (c == '-' || c == '+') && (prev == 'e' || prev == 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                prev = c;
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.error(&format!("bad number '{text}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("1.5e-1 * y", 0.0, 2.0), 0.3);
        assert_eq!(ev("x - y - 1", 5.0, 1.0), 3.0);
    }

    #[test]
    fn functions() {
        let pi = std::f64::consts::PI;
        assert!((ev("sin(pi*x)*sin(pi*y)", 0.5, 0.5) - 1.0).abs() < 1e-15);
        assert!((ev("cos(2*pi*x + y)", 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(ev("gauss(10, 0.4, 0.6)", 0.4, 0.6), 1.0);
        let v = ev("gauss(10, 0.4, 0.6)", 0.5, 0.6);
        assert!((v - (-0.1f64).exp()).abs() < 1e-15);
        assert!((ev("exp(x)", 1.0, 0.0) - 1f64.exp()).abs() < 1e-15);
        let _ = pi;
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("sin(x, y)").is_err());
        assert!(Expr::parse("gauss(1, 2)").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x y").is_err());
        let g = Grid2D::new(4).unwrap();
        assert!(Expr::parse("1/x").unwrap().sample(&g).is_err());
    }
}
