//! Arithmetic expressions in `x`, `y`, `z` for coefficient functions and
//! boundary data.
//!
//! Precedence, tightest first: `^` (right associative), unary `-`, `*` `/`,
//! `+` `-`. Constants `pi` and `e`; functions `sin cos exp sqrt abs`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parsed expression; `offset` is the byte position of the node in the source.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub node: Node,
    pub offset: usize,
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr {
            node: Node::Const(v),
            offset: 0,
        }
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> Result<f64> {
        let err = |message: String| Error::Eval {
            offset: self.offset,
            message,
        };
        let v = match &self.node {
            Node::Const(c) => *c,
            Node::Var(Var::X) => x,
            Node::Var(Var::Y) => y,
            Node::Var(Var::Z) => z,
            Node::Neg(a) => -a.eval(x, y, z)?,
            Node::Binary(op, a, b) => {
                let a = a.eval(x, y, z)?;
                let b = b.eval(x, y, z)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(err("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Node::Call(f, a) => {
                let a = a.eval(x, y, z)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(err(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(format!("non-finite result {v}")))
        }
    }

    /// Which of `x`, `y`, `z` occur in the expression.
    pub fn vars_used(&self) -> [bool; 3] {
        let mut used = [false; 3];
        self.visit_vars(&mut used);
        used
    }

    fn visit_vars(&self, used: &mut [bool; 3]) {
        match &self.node {
            Node::Const(_) => {}
            Node::Var(v) => used[*v as usize] = true,
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(used),
            Node::Binary(_, a, b) => {
                a.visit_vars(used);
                b.visit_vars(used);
            }
        }
    }

    /// The value if the expression has no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.vars_used().iter().any(|u| *u) {
            None
        } else {
            self.eval(0.0, 0.0, 0.0).ok()
        }
    }
}

/// Canonical printer: every compound subexpression is parenthesized.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(Var::X) => write!(f, "x"),
            Node::Var(Var::Y) => write!(f, "y"),
            Node::Var(Var::Z) => write!(f, "z"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            let at = self.pos;
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs, at);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            let at = self.pos;
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs, at);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        self.skip_ws();
        let at = self.pos;
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr {
                node: Node::Neg(Box::new(inner)),
                offset: at,
            });
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        self.skip_ws();
        let at = self.pos;
        if self.eat(b'^') {
            // the exponent may carry its own sign: 2^-1
            let exp = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exp, at));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                let leaf = |node| Ok(Expr { node, offset: start });
                match name {
                    "x" => leaf(Node::Var(Var::X)),
                    "y" => leaf(Node::Var(Var::Y)),
                    "z" => leaf(Node::Var(Var::Z)),
                    "pi" => leaf(Node::Const(std::f64::consts::PI)),
                    "e" => leaf(Node::Const(std::f64::consts::E)),
                    _ => {
                        let Some(func) = Func::from_name(name) else {
                            return Err(Error::Syntax {
                                offset: start,
                                message: format!("unknown identifier '{name}'"),
                            });
                        };
                        if !self.eat(b'(') {
                            return Err(self.syntax(&format!("expected '(' after '{name}'")));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.syntax("expected ')'"));
                        }
                        Ok(Expr {
                            node: Node::Call(func, Box::new(arg)),
                            offset: start,
                        })
                    }
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                digits(self);
            } else {
                // no exponent digits: leave the `e` unconsumed
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number '{text}'"),
        })?;
        Ok(Expr {
            node: Node::Const(v),
            offset: start,
        })
    }
}

fn binary(op: BinOp, a: Expr, b: Expr, offset: usize) -> Expr {
    Expr {
        node: Node::Binary(op, Box::new(a), Box::new(b)),
        offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64, z: f64) -> f64 {
        parse(s).unwrap().eval(x, y, z).unwrap()
    }

    #[test]
    fn basic_values() {
        assert_eq!(parse("x").unwrap().node, Node::Var(Var::X));
        assert_eq!(ev("7", 1.0, 2.0, 3.0), 7.0);
        assert_eq!(ev("x^2*y", 2.0, 3.0, 0.0), 12.0);
        assert_eq!(ev("sqrt(x+y+z+42)", 1.0, 1.0, 1.0), 45f64.sqrt());
        assert_eq!(ev("5-3*cos(pi*5*x/2)", 0.0, 0.0, 0.0), 2.0);
        assert_eq!(ev("(1+x^2)*(1+y^2)*(1+z^2)+exp(x+y+z)", 0.0, 0.0, 0.0), 2.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0, 0.0, 0.0), 0.5);
        assert_eq!(ev("1-2-3", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("8/4/2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("1.5e2 + e", 0.0, 0.0, 0.0), 150.0 + std::f64::consts::E);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("x + foo(1)").unwrap_err() {
            Error::Syntax { offset, message } => {
                assert_eq!(offset, 4);
                assert!(message.contains("foo"));
            }
            e => panic!("{e}"),
        }
        assert!(matches!(parse("(x + 1"), Err(Error::Syntax { offset: 6, .. })));
        match parse("1 + 1/x").unwrap().eval(0.0, 0.0, 0.0).unwrap_err() {
            Error::Eval { offset, .. } => assert_eq!(offset, 5),
            e => panic!("{e}"),
        }
        assert!(matches!(
            parse("sqrt(x)").unwrap().eval(-1.0, 0.0, 0.0),
            Err(Error::Eval { offset: 0, .. })
        ));
    }

    #[test]
    fn printer_round_trip() {
        let e = parse("-x^2 + sin(3*y)/2 - 1e-3").unwrap();
        let printed = e.to_string();
        let again = parse(&printed).unwrap();
        assert_eq!(again.to_string(), printed);
        assert_eq!(again.eval(0.3, 0.4, 0.0).unwrap(), e.eval(0.3, 0.4, 0.0).unwrap());
    }

    #[test]
    fn variable_analysis() {
        assert_eq!(parse("x*z").unwrap().vars_used(), [true, false, true]);
        assert_eq!(
            parse("2*pi").unwrap().constant_value(),
            Some(2.0 * std::f64::consts::PI)
        );
        assert_eq!(parse("y").unwrap().constant_value(), None);
    }
}
