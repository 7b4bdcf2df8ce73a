//! Closed-form scalar expressions of the chart coordinates.
//!
//! Used for the conformal factor λ of a metric `e^{2λ} δ`. Expressions are
//! evaluated on second-order jets so the gradient and Hessian of λ come out
//! exactly, without differencing.

use std::fmt;

use crate::error::{Result, WireError};

/// Maximum chart dimension supported by the jet arithmetic.
pub const MAX_DIM: usize = 3;

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Self { value, grad: [0.0; MAX_DIM], hess: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn variable(value: f64, index: usize) -> Self {
        let mut j = Self::constant(value);
        j.grad[index] = 1.0;
        j
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().flatten().all(|h| h.is_finite())
    }

    fn add(&self, o: &Jet) -> Jet {
        let mut r = *self;
        r.value += o.value;
        for a in 0..MAX_DIM {
            r.grad[a] += o.grad[a];
            for b in 0..MAX_DIM {
                r.hess[a][b] += o.hess[a][b];
            }
        }
        r
    }

    fn scale(&self, s: f64) -> Jet {
        let mut r = *self;
        r.value *= s;
        for a in 0..MAX_DIM {
            r.grad[a] *= s;
            for b in 0..MAX_DIM {
                r.hess[a][b] *= s;
            }
        }
        r
    }

    fn mul(&self, o: &Jet) -> Jet {
        let mut r = Jet::constant(self.value * o.value);
        for a in 0..MAX_DIM {
            r.grad[a] = self.grad[a] * o.value + self.value * o.grad[a];
            for b in 0..MAX_DIM {
                r.hess[a][b] = self.hess[a][b] * o.value
                    + self.value * o.hess[a][b]
                    + self.grad[a] * o.grad[b]
                    + self.grad[b] * o.grad[a];
            }
        }
        r
    }

    /// Compose with a scalar function given its value and first two derivatives
    /// at `self.value`.
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Jet {
        let mut r = Jet::constant(f);
        for a in 0..MAX_DIM {
            r.grad[a] = df * self.grad[a];
            for b in 0..MAX_DIM {
                r.hess[a][b] = df * self.hess[a][b] + d2f * self.grad[a] * self.grad[b];
            }
        }
        r
    }

    fn recip(&self) -> Jet {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    fn powf(&self, p: f64) -> Jet {
        let v = self.value;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, u: &Jet) -> Jet {
        let v = u.value;
        match self {
            Func::Sin => u.chain(v.sin(), v.cos(), -v.sin()),
            Func::Cos => u.chain(v.cos(), -v.sin(), -v.cos()),
            Func::Tan => {
                let t = v.tan();
                let s2 = 1.0 + t * t;
                u.chain(t, s2, 2.0 * t * s2)
            }
            Func::Exp => {
                let e = v.exp();
                u.chain(e, e, e)
            }
            Func::Ln => u.chain(v.ln(), 1.0 / v, -1.0 / (v * v)),
            Func::Sqrt => {
                let s = v.sqrt();
                u.chain(s, 0.5 / s, -0.25 / (s * v))
            }
            Func::Sinh => u.chain(v.sinh(), v.cosh(), v.sinh()),
            Func::Cosh => u.chain(v.cosh(), v.sinh(), v.cosh()),
            Func::Tanh => {
                let t = v.tanh();
                let d = 1.0 - t * t;
                u.chain(t, d, -2.0 * t * d)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression in the variables `x`, `y`, `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_var: Option<usize>,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parse an expression. Supports `+ - * / ^`, parentheses, the constants
    /// `pi` and `e`, and `sin cos tan exp ln log sqrt sinh cosh tanh`.
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, max_var: None };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(WireError::Expression(format!(
                "unexpected token {:?} in {source:?}",
                p.tokens[p.pos]
            )));
        }
        Ok(Self { source: source.to_string(), root, max_var: p.max_var })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest coordinate index referenced (`x` = 0, `y` = 1, `z` = 2).
    pub fn max_variable(&self) -> Option<usize> {
        self.max_var
    }

    pub fn eval(&self, coords: &[f64]) -> f64 {
        self.jet(coords).value
    }

    /// Evaluate value, gradient and Hessian at `coords`.
    pub fn jet(&self, coords: &[f64]) -> Jet {
        eval_node(&self.root, coords)
    }
}

fn eval_node(node: &Node, coords: &[f64]) -> Jet {
    match node {
        Node::Num(v) => Jet::constant(*v),
        Node::Var(i) => Jet::variable(coords.get(*i).copied().unwrap_or(f64::NAN), *i),
        Node::Neg(a) => eval_node(a, coords).scale(-1.0),
        Node::Add(a, b) => eval_node(a, coords).add(&eval_node(b, coords)),
        Node::Sub(a, b) => eval_node(a, coords).add(&eval_node(b, coords).scale(-1.0)),
        Node::Mul(a, b) => eval_node(a, coords).mul(&eval_node(b, coords)),
        Node::Div(a, b) => eval_node(a, coords).mul(&eval_node(b, coords).recip()),
        Node::Pow(a, b) => {
            let base = eval_node(a, coords);
            let exp = eval_node(b, coords);
            let exp_is_const = exp.grad.iter().all(|g| *g == 0.0)
                && exp.hess.iter().flatten().all(|h| *h == 0.0);
            if exp_is_const {
                base.powf(exp.value)
            } else {
                // a^b = exp(b ln a)
                Func::Exp.apply(&exp.mul(&Func::Ln.apply(&base)))
            }
        }
        Node::Call(f, a) => f.apply(&eval_node(a, coords)),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| WireError::Expression(format!("bad number {text:?}")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(WireError::Expression(format!("unexpected character {c:?} in {s:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    max_var: Option<usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := atom ('^' unary)?   (right associative)
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    other => Err(WireError::Expression(format!("expected ')', found {other:?}"))),
                }
            }
            Some(Token::Ident(name)) => {
                let var = match name.as_str() {
                    "x" => Some(0),
                    "y" => Some(1),
                    "z" => Some(2),
                    _ => None,
                };
                if let Some(i) = var {
                    self.max_var = Some(self.max_var.map_or(i, |m: usize| m.max(i)));
                    return Ok(Node::Var(i));
                }
                match name.as_str() {
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    _ => {}
                }
                let func = Func::from_name(&name)
                    .ok_or_else(|| WireError::Expression(format!("unknown identifier {name:?}")))?;
                match self.next() {
                    Some(Token::LParen) => {}
                    other => {
                        return Err(WireError::Expression(format!(
                            "expected '(' after {name}, found {other:?}"
                        )))
                    }
                }
                let arg = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(Node::Call(func, Box::new(arg))),
                    other => Err(WireError::Expression(format!("expected ')', found {other:?}"))),
                }
            }
            other => Err(WireError::Expression(format!("unexpected token {other:?}"))),
        }
    }
}
