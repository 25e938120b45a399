//! A small arithmetic-expression language for user-supplied `phi`.
//!
//! Variables are `x1 .. xd` (1-based); `x`, `y`, `z` alias `x1`, `x2`,
//! `x3`. Supported: `+ - * / ^`, unary minus, parentheses, the constants
//! `pi` and `e`, and the functions `exp ln log sqrt abs sin cos tan min max
//! pow`. Comparisons are not supported; use the built-in diagonal indicator
//! instead.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::FunctionSpec;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tan,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

/// A parsed expression usable as a [`FunctionSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
    dim: usize,
}

impl Expression {
    /// Parses `source`; the dimension is the highest variable index used.
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
            max_var: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        if p.max_var == 0 {
            return Err(Error::Parameter(format!(
                "expression `{source}` uses no variables"
            )));
        }
        Ok(Self {
            source: source.to_string(),
            root,
            dim: p.max_var,
        })
    }

    /// Parses `source` and widens it to `dim` arguments.
    pub fn parse_with_dim(source: &str, dim: usize) -> Result<Self> {
        let mut e = Self::parse(source)?;
        if dim < e.dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: e.dim,
            });
        }
        e.dim = dim;
        Ok(e)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl FunctionSpec for Expression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        eval(&self.root, x)
    }
}

fn eval(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => libm::pow(a, b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], x);
            match f {
                Func::Exp => libm::exp(a),
                Func::Ln => libm::log(a),
                Func::Sqrt => libm::sqrt(a),
                Func::Abs => a.abs(),
                Func::Sin => libm::sin(a),
                Func::Cos => libm::cos(a),
                Func::Tan => libm::tan(a),
                Func::Min => a.min(eval(&args[1], x)),
                Func::Max => a.max(eval(&args[1], x)),
                Func::Pow => libm::pow(a, eval(&args[1], x)),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    max_var: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parameter(format!(
            "expression parse error at byte {}: {msg}",
            self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let bytes = self.src;
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = mark;
            }
        }
        let text = core::str::from_utf8(&bytes[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| self.error("malformed number"))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        let var = match name {
            "x" => Some(1),
            "y" => Some(2),
            "z" => Some(3),
            _ if name.len() > 1 && name.starts_with('x') => name[1..].parse::<usize>().ok(),
            _ => None,
        };
        if let Some(i) = var {
            if i == 0 {
                return Err(self.error("variables are numbered from x1"));
            }
            self.max_var = self.max_var.max(i);
            return Ok(Node::Var(i - 1));
        }
        match name {
            "pi" => return Ok(Node::Num(core::f64::consts::PI)),
            "e" => return Ok(Node::Num(core::f64::consts::E)),
            _ => {}
        }
        let (func, arity) =
            Func::lookup(name).ok_or_else(|| self.error(&format!("unknown name `{name}`")))?;
        if !self.eat(b'(') {
            return Err(self.error("expected `(` after function name"));
        }
        let mut args = Vec::with_capacity(arity);
        args.push(self.expr()?);
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.error("expected `)`"));
        }
        if args.len() != arity {
            return Err(self.error(&format!("`{name}` takes {arity} argument(s)")));
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expression::parse(src).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("x1 + 2*x2", &[1.0, 3.0]), 7.0);
        assert_eq!(ev("2^3^2 + 0*x", &[0.0]), 512.0);
        assert_eq!(ev("-x^2", &[3.0]), -9.0);
        assert_eq!(ev("(x+y)/2", &[1.0, 2.0]), 1.5);
        assert_eq!(ev("x - y - z", &[10.0, 3.0, 2.0]), 5.0);
        assert_eq!(ev("1.5e1 * x", &[2.0]), 30.0);
    }

    #[test]
    fn functions_and_dimension() {
        let e = Expression::parse("max(x1, x3) + exp(0)").unwrap();
        assert_eq!(e.dim(), 3);
        assert_eq!(e.eval(&[1.0, 9.0, 2.0]), 3.0);
        assert!((ev("ln(e) + cos(pi) + x", &[0.0]) - 0.0).abs() < 1e-15);
        assert_eq!(Expression::parse_with_dim("x", 3).unwrap().dim(), 3);
        assert!(Expression::parse_with_dim("x3", 2).is_err());
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "", "x +", "foo(x)", "min(x)", "(x", "x0", "3", "x $ y", "sqrt x",
        ] {
            assert!(Expression::parse(bad).is_err(), "{bad}");
        }
    }
}
