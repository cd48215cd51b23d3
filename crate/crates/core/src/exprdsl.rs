//! A small arithmetic expression language for user-supplied coefficient
//! functions such as `h(r)`, `f(r,s)` and `g(r,s)`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | name | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `e` and `pi` are the only named constants. Functions: `exp`, `log`,
//! `sqrt`, `abs`, `sin`, `cos`. There is no implicit multiplication.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("missing binding for variable `{0}`")]
    MissingBinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Expression tree node. Variables are stored as indices into the
/// declared variable list of the owning [`ExprAst`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

/// A parsed expression together with the variable set it was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    vars: Vec<String>,
    source: String,
}

impl ExprAst {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// The text this expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Evaluate with named bindings.
    pub fn eval(&self, bindings: &HashMap<String, f64>) -> Result<f64, ExprError> {
        let values = self
            .vars
            .iter()
            .map(|v| {
                bindings
                    .get(v)
                    .copied()
                    .ok_or_else(|| ExprError::MissingBinding(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.eval_at(&values)
    }

    /// Evaluate with values given positionally, in declared-variable order.
    pub fn eval_at(&self, values: &[f64]) -> Result<f64, ExprError> {
        if values.len() < self.vars.len() {
            return Err(ExprError::MissingBinding(self.vars[values.len()].clone()));
        }
        eval_node(&self.root, values)
    }

    /// Central difference `(e(x+step) - e(x-step)) / (2 step)` in `var`.
    pub fn derivative_estimate(
        &self,
        var: &str,
        point: &HashMap<String, f64>,
        step: f64,
    ) -> Result<f64, ExprError> {
        let idx = self
            .var_index(var)
            .ok_or_else(|| ExprError::UnknownVariable(var.to_string()))?;
        let mut values = self
            .vars
            .iter()
            .map(|v| {
                point
                    .get(v)
                    .copied()
                    .ok_or_else(|| ExprError::MissingBinding(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.derivative_at(idx, &mut values, step)
    }

    /// Positional form of [`ExprAst::derivative_estimate`]. `values` is
    /// restored before returning.
    pub fn derivative_at(
        &self,
        idx: usize,
        values: &mut [f64],
        step: f64,
    ) -> Result<f64, ExprError> {
        let x = values[idx];
        values[idx] = x + step;
        let hi = self.eval_at(values);
        values[idx] = x - step;
        let lo = self.eval_at(values);
        values[idx] = x;
        Ok((hi? - lo?) / (2.0 * step))
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

// Fully parenthesised so that printing and reparsing gives the same tree.
fn write_node(node: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Const(c) => {
            if *c < 0.0 {
                write!(f, "(-{:?})", -c)
            } else {
                write!(f, "{c:?}")
            }
        }
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Unary(UnaryOp::Neg, a) => {
            write!(f, "(-")?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::Binary(op, a, b) => {
            write!(f, "(")?;
            write_node(a, vars, f)?;
            write!(f, " {} ", op.symbol())?;
            write_node(b, vars, f)?;
            write!(f, ")")
        }
    }
}

fn domain(msg: impl Into<String>) -> ExprError {
    ExprError::Domain(msg.into())
}

fn finite(x: f64, what: &str) -> Result<f64, ExprError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(domain(format!("{what} produced a non-finite value")))
    }
}

fn eval_node(node: &Node, values: &[f64]) -> Result<f64, ExprError> {
    match node {
        Node::Const(c) => Ok(*c),
        Node::Var(i) => Ok(values[*i]),
        Node::Unary(op, a) => {
            let x = eval_node(a, values)?;
            let y = match op {
                UnaryOp::Neg => -x,
                UnaryOp::Exp => x.exp(),
                UnaryOp::Log => {
                    if x <= 0.0 {
                        return Err(domain(format!("log of non-positive value {x}")));
                    }
                    x.ln()
                }
                UnaryOp::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(format!("sqrt of negative value {x}")));
                    }
                    x.sqrt()
                }
                UnaryOp::Abs => x.abs(),
                UnaryOp::Sin => x.sin(),
                UnaryOp::Cos => x.cos(),
            };
            finite(y, op.name())
        }
        Node::Binary(op, a, b) => {
            let x = eval_node(a, values)?;
            let y = eval_node(b, values)?;
            let v = match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain("division by zero"));
                    }
                    x / y
                }
                BinaryOp::Pow => power(x, y)?,
            };
            finite(v, "arithmetic")
        }
    }
}

fn power(x: f64, y: f64) -> Result<f64, ExprError> {
    if x == 0.0 && y < 0.0 {
        return Err(domain("zero raised to a negative power"));
    }
    if x < 0.0 && y.fract() != 0.0 {
        return Err(domain(format!(
            "negative base {x} with non-integer exponent {y}"
        )));
    }
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        Ok(x.powi(y as i32))
    } else {
        Ok(x.powf(y))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part: 1e-3, 2.5E+4
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        pos: i,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((i, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                self.reject_juxtaposition()?;
                Ok(Node::Const(v))
            }
            Tok::Ident(name) => {
                let start = self.offset();
                self.pos += 1;
                if let Some(op) = UnaryOp::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return self.err(format!("expected `(` after `{name}`"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Unary(op, Box::new(arg)));
                }
                let node = if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Node::Var(i)
                } else if name == "e" {
                    Node::Const(std::f64::consts::E)
                } else if name == "pi" {
                    Node::Const(std::f64::consts::PI)
                } else if self.peek() == Some(&Tok::LParen) {
                    return Err(ExprError::Syntax {
                        pos: start,
                        msg: format!("unknown function `{name}`"),
                    });
                } else {
                    return Err(ExprError::UnknownVariable(name));
                };
                self.reject_juxtaposition()?;
                Ok(node)
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                self.reject_juxtaposition()?;
                Ok(inner)
            }
            Tok::RParen => self.err("unexpected `)`"),
            Tok::Op(c) => self.err(format!("unexpected operator `{c}`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected `)`")
        }
    }

    // "2r", "2(r)" and "(r)(s)" are all rejected.
    fn reject_juxtaposition(&self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Tok::Num(_) | Tok::Ident(_) | Tok::LParen) => {
                self.err("implicit multiplication is not supported")
            }
            _ => Ok(()),
        }
    }
}

/// Parse `text` against the declared variable set `vars`.
pub fn parse_expr(text: &str, vars: &[&str]) -> Result<ExprAst, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let vars: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        end: text.len(),
        vars: &vars,
    };
    let root = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return parser.err("trailing input");
    }
    Ok(ExprAst {
        root,
        vars,
        source: text.to_string(),
    })
}
