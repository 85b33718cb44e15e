//! Closed-form expressions for custom preference functions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | var | func '(' expr ')' | '(' expr ')'
//! var    := ('x' | 'y' | 'z') '_'? index      (1-based)
//! func   := sin | cos | tan | exp | log | sqrt | tanh | sinh | cosh | abs
//! ```
//!
//! An expression for `h` is evaluated on `(x_1..x_n, z_1..z_n)` and one for
//! `g` on `(y_1..y_n, z_1..z_n)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    /// Position in the argument slice.
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
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
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Sinh,
    Cosh,
    Abs,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Tanh => v.tanh(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Abs => v.abs(),
        }
    }
}

/// A parsed expression over an agent variable and the contract variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    arity: usize,
}

impl Expr {
    /// Parses `src` for dimension `n`, where `agent` is `'x'` or `'y'`.
    pub fn parse(src: &str, n: usize, agent: char) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            n,
            agent,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { root, arity: 2 * n })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, args: &[f64]) -> f64 {
        eval(&self.root, args)
    }
}

fn eval(node: &Node, args: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => args[*i],
        Node::Neg(a) => -eval(a, args),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, args), eval(b, args));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => {
                    if b.fract() == 0.0 && b.abs() <= 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::Call(f, a) => f.apply(eval(a, args)),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
    agent: char,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Expression {
            column: self.pos + 1,
            message: message.into(),
        }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
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
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Expression {
            column: start + 1,
            message: format!("invalid number '{text}'"),
        })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(f) = Func::from_name(word) {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Node::Call(f, Box::new(arg)));
        }
        if word == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        let column = start + 1;
        let mut chars = word.chars();
        let head = chars.next().expect("non-empty identifier");
        let rest = chars.as_str().trim_start_matches('_');
        let index: usize = rest.parse().map_err(|_| Error::Expression {
            column,
            message: format!("unknown identifier '{word}'"),
        })?;
        if index == 0 || index > self.n {
            return Err(Error::Expression {
                column,
                message: format!("variable index {index} outside 1..={}", self.n),
            });
        }
        match head {
            'z' => Ok(Node::Var(self.n + index - 1)),
            c if c == self.agent => Ok(Node::Var(index - 1)),
            _ => Err(Error::Expression {
                column,
                message: format!("variable '{word}' not allowed here (expected {}_i or z_i)", self.agent),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_precedence_and_functions() {
        let e = Expr::parse("x1*z1 - z1^2/2 + exp(0) - -2*x_2", 2, 'x').unwrap();
        // args: x1, x2, z1, z2
        let v = e.eval(&[2.0, 1.0, 3.0, 0.0]);
        assert!((v - (6.0 - 4.5 + 1.0 + 2.0)).abs() < 1e-15);
        let e = Expr::parse("2^3^2", 1, 'x').unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]), 512.0);
        let e = Expr::parse("-z1^2", 1, 'y').unwrap();
        assert_eq!(e.eval(&[0.0, 3.0]), -9.0);
        let e = Expr::parse("1.5e-1 * y1", 1, 'y').unwrap();
        assert!((e.eval(&[2.0, 0.0]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_variables_with_column() {
        let err = Expr::parse("x1 + y1", 1, 'x').unwrap_err();
        assert_eq!(
            err,
            Error::Expression {
                column: 6,
                message: "variable 'y1' not allowed here (expected x_i or z_i)".into()
            }
        );
        assert!(Expr::parse("x3", 2, 'x').is_err());
        assert!(Expr::parse("foo(x1)", 1, 'x').is_err());
        assert!(Expr::parse("(x1", 1, 'x').is_err());
        assert!(Expr::parse("x1 x1", 1, 'x').is_err());
    }
}
