//! Expression DSL for user-defined driving protocols.
//!
//! Grammar, tightest first: `^` (right-associative), unary `-`, `*` `/`,
//! `+` `-` (left-associative), with parentheses and the function set
//! `sin cos tan exp sqrt abs`. Free symbols are `t`, the declared
//! parameter names, and the reserved constants `pi` and `e`. Identifiers
//! are case-sensitive.
//!
//! Evaluation propagates dual numbers, so d/dt comes out exact; domain
//! violations (negative sqrt, division by zero, non-integer power of a
//! negative base) are reported with the offending subexpression instead
//! of leaking NaN into the geometry pipeline.

use crate::dual::Dual;
use crate::error::{Error, Result};

const FUNCTIONS: [(&str, UnaryOp); 6] = [
    ("abs", UnaryOp::Abs),
    ("cos", UnaryOp::Cos),
    ("exp", UnaryOp::Exp),
    ("sin", UnaryOp::Sin),
    ("sqrt", UnaryOp::Sqrt),
    ("tan", UnaryOp::Tan),
];

const MAX_DEPTH: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: u32,
    end: u32,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Number(f64),
    Pi,
    Euler,
    Time,
    Param(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone)]
struct Node {
    kind: NodeKind,
    span: Span,
}

/// A parsed expression plus its declared parameter names.
#[derive(Debug, Clone)]
pub struct Expression {
    text: String,
    params: Vec<String>,
    root: Node,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
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

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let tok = match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => {
                i += 1;
                Tok::Plus
            }
            b'-' => {
                i += 1;
                Tok::Minus
            }
            b'*' => {
                i += 1;
                Tok::Star
            }
            b'/' => {
                i += 1;
                Tok::Slash
            }
            b'^' => {
                i += 1;
                Tok::Caret
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                // exponent only when followed by digits (possibly signed)
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        j = k;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let s = &text[i..j];
                let v: f64 = s.parse().map_err(|_| Error::Syntax {
                    offset: i,
                    expected: "a number".into(),
                })?;
                if !v.is_finite() {
                    return Err(Error::Syntax {
                        offset: i,
                        expected: "a finite number".into(),
                    });
                }
                i = j;
                Tok::Num(v)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let s = text[i..j].to_string();
                i = j;
                Tok::Ident(s)
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    expected: "a number, identifier, operator, or parenthesis".into(),
                })
            }
        };
        out.push(Token {
            tok,
            start,
            end: i,
        });
    }
    out.push(Token {
        tok: Tok::End,
        start: bytes.len(),
        end: bytes.len(),
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    params: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, expected: &str) -> Error {
        Error::Syntax {
            offset: self.peek().start,
            expected: expected.into(),
        }
    }

    fn expr(&mut self, depth: u32) -> Result<Node> {
        if depth > MAX_DEPTH {
            return Err(self.err_here("a shallower expression (nesting limit reached)"));
        }
        let mut lhs = self.term(depth + 1)?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term(depth + 1)?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self, depth: u32) -> Result<Node> {
        if depth > MAX_DEPTH {
            return Err(self.err_here("a shallower expression (nesting limit reached)"));
        }
        let mut lhs = self.unary(depth + 1)?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary(depth + 1)?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self, depth: u32) -> Result<Node> {
        if depth > MAX_DEPTH {
            return Err(self.err_here("a shallower expression (nesting limit reached)"));
        }
        if matches!(self.peek().tok, Tok::Minus) {
            let start = self.bump().start;
            let child = self.unary(depth + 1)?;
            let span = Span {
                start: start as u32,
                end: child.span.end,
            };
            return Ok(Node {
                kind: NodeKind::Unary(UnaryOp::Neg, Box::new(child)),
                span,
            });
        }
        self.power(depth + 1)
    }

    fn power(&mut self, depth: u32) -> Result<Node> {
        if depth > MAX_DEPTH {
            return Err(self.err_here("a shallower expression (nesting limit reached)"));
        }
        let base = self.atom(depth + 1)?;
        if matches!(self.peek().tok, Tok::Caret) {
            self.bump();
            // right-associative; exponent may carry a unary minus
            let exp = self.unary(depth + 1)?;
            return Ok(binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self, depth: u32) -> Result<Node> {
        if depth > MAX_DEPTH {
            return Err(self.err_here("a shallower expression (nesting limit reached)"));
        }
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Node {
                    kind: NodeKind::Number(v),
                    span: span_of(&t),
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr(depth + 1)?;
                if !matches!(self.peek().tok, Tok::RParen) {
                    return Err(self.err_here("`)`"));
                }
                let close = self.bump();
                Ok(Node {
                    span: Span {
                        start: t.start as u32,
                        end: close.end as u32,
                    },
                    ..inner
                })
            }
            Tok::Ident(ref name) => {
                self.bump();
                if let Some((_, op)) = FUNCTIONS.iter().find(|(n, _)| n == name) {
                    if !matches!(self.peek().tok, Tok::LParen) {
                        return Err(self.err_here("`(` after function name"));
                    }
                    self.bump();
                    let arg = self.expr(depth + 1)?;
                    if !matches!(self.peek().tok, Tok::RParen) {
                        return Err(self.err_here("`)`"));
                    }
                    let close = self.bump();
                    return Ok(Node {
                        kind: NodeKind::Unary(*op, Box::new(arg)),
                        span: Span {
                            start: t.start as u32,
                            end: close.end as u32,
                        },
                    });
                }
                let kind = match name.as_str() {
                    "t" => NodeKind::Time,
                    "pi" => NodeKind::Pi,
                    "e" => NodeKind::Euler,
                    _ => match self.params.iter().position(|p| p == name) {
                        Some(idx) => NodeKind::Param(idx),
                        None => {
                            return Err(Error::UnknownSymbol {
                                name: name.clone(),
                                offset: t.start,
                            })
                        }
                    },
                };
                Ok(Node {
                    kind,
                    span: span_of(&t),
                })
            }
            _ => Err(self.err_here("an expression")),
        }
    }
}

fn span_of(t: &Token) -> Span {
    Span {
        start: t.start as u32,
        end: t.end as u32,
    }
}

fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Node {
    let span = Span {
        start: lhs.span.start,
        end: rhs.span.end,
    };
    Node {
        kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)),
        span,
    }
}

// ---------------------------------------------------------------------------
// Evaluation

impl Expression {
    /// Parse `text` against a set of declared parameter names.
    pub fn parse<S: AsRef<str>>(text: &str, params: &[S]) -> Result<Expression> {
        let params: Vec<String> = params.iter().map(|s| s.as_ref().to_string()).collect();
        for p in &params {
            if p == "t" || p == "pi" || p == "e" || FUNCTIONS.iter().any(|(n, _)| n == p) {
                return Err(Error::config(format!("parameter name `{p}` is reserved")));
            }
        }
        if text.trim().is_empty() {
            return Err(Error::Syntax {
                offset: 0,
                expected: "a non-empty expression".into(),
            });
        }
        let toks = lex(text)?;
        let mut parser = Parser {
            toks: &toks,
            pos: 0,
            params: &params,
        };
        let root = parser.expr(0)?;
        if !matches!(parser.peek().tok, Tok::End) {
            return Err(parser.err_here("an operator or end of input"));
        }
        Ok(Expression {
            text: text.to_string(),
            params,
            root,
        })
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Value at time `t` with the given parameter values (same order as
    /// the declared names).
    pub fn eval(&self, t: f64, values: &[f64]) -> Result<f64> {
        Ok(self.eval_dual(t, values)?.0)
    }

    /// Value and exact d/dt via dual-number propagation.
    pub fn eval_dual(&self, t: f64, values: &[f64]) -> Result<(f64, f64)> {
        if values.len() != self.params.len() {
            return Err(Error::config(format!(
                "expression expects {} parameter values, got {}",
                self.params.len(),
                values.len()
            )));
        }
        let d = self.eval_node(&self.root, Dual::variable(t), values)?;
        if !d.dot.is_finite() {
            return Err(self.domain_err(&self.root, "derivative is singular here"));
        }
        Ok((d.val, d.dot))
    }

    fn domain_err(&self, node: &Node, reason: &str) -> Error {
        let ctx = self
            .text
            .get(node.span.start as usize..node.span.end as usize)
            .unwrap_or("<expr>");
        Error::domain(ctx, reason)
    }

    fn eval_node(&self, node: &Node, t: Dual, values: &[f64]) -> Result<Dual> {
        let out = match &node.kind {
            NodeKind::Number(v) => Dual::constant(*v),
            NodeKind::Pi => Dual::constant(std::f64::consts::PI),
            NodeKind::Euler => Dual::constant(std::f64::consts::E),
            NodeKind::Time => t,
            NodeKind::Param(i) => Dual::constant(values[*i]),
            NodeKind::Unary(op, c) => {
                let x = self.eval_node(c, t, values)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Tan => x.tan(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Abs => x.abs(),
                    UnaryOp::Sqrt => {
                        if x.val < 0.0 {
                            return Err(
                                self.domain_err(node, "square root of a negative value")
                            );
                        }
                        x.sqrt()
                    }
                }
            }
            NodeKind::Binary(op, l, r) => {
                let a = self.eval_node(l, t, values)?;
                let b = self.eval_node(r, t, values)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b.val == 0.0 {
                            return Err(self.domain_err(node, "division by zero"));
                        }
                        a / b
                    }
                    BinaryOp::Pow => {
                        let integral = b.dot == 0.0
                            && b.val.fract() == 0.0
                            && b.val.abs() <= i32::MAX as f64;
                        if integral {
                            if a.val == 0.0 && b.val < 0.0 {
                                return Err(
                                    self.domain_err(node, "zero raised to a negative power")
                                );
                            }
                            a.powi(b.val as i32)
                        } else if a.val > 0.0 {
                            a.powf(b)
                        } else {
                            return Err(self.domain_err(
                                node,
                                "non-integer power of a non-positive base",
                            ));
                        }
                    }
                }
            }
        };
        if !out.val.is_finite() {
            return Err(self.domain_err(node, "value overflowed the float range"));
        }
        Ok(out)
    }

    /// Canonical text form: minimal parentheses, one space around binary
    /// operators. `pretty ∘ parse` is a fixed point on its own output.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        print_node(&self.root, &self.params, &mut s);
        s
    }
}

fn prec(kind: &NodeKind) -> u8 {
    match kind {
        NodeKind::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
        NodeKind::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 2,
        NodeKind::Unary(UnaryOp::Neg, _) => 3,
        NodeKind::Binary(BinaryOp::Pow, _, _) => 4,
        _ => 5,
    }
}

fn print_node(node: &Node, params: &[String], out: &mut String) {
    let wrap = |child: &Node, needs: bool, out: &mut String| {
        if needs {
            out.push('(');
            print_node(child, params, out);
            out.push(')');
        } else {
            print_node(child, params, out);
        }
    };
    match &node.kind {
        NodeKind::Number(v) => out.push_str(&format!("{v}")),
        NodeKind::Pi => out.push_str("pi"),
        NodeKind::Euler => out.push('e'),
        NodeKind::Time => out.push('t'),
        NodeKind::Param(i) => out.push_str(&params[*i]),
        NodeKind::Unary(UnaryOp::Neg, c) => {
            out.push('-');
            wrap(c, prec(&c.kind) < 5, out);
        }
        NodeKind::Unary(op, c) => {
            let name = FUNCTIONS
                .iter()
                .find(|(_, o)| o == op)
                .map(|(n, _)| *n)
                .unwrap_or("?");
            out.push_str(name);
            out.push('(');
            print_node(c, params, out);
            out.push(')');
        }
        NodeKind::Binary(op, l, r) => {
            let p = prec(&node.kind);
            let (sym, right_assoc) = match op {
                BinaryOp::Add => (" + ", false),
                BinaryOp::Sub => (" - ", false),
                BinaryOp::Mul => (" * ", false),
                BinaryOp::Div => (" / ", false),
                BinaryOp::Pow => (" ^ ", true),
            };
            if right_assoc {
                wrap(l, prec(&l.kind) <= p, out);
                out.push_str(sym);
                wrap(r, prec(&r.kind) < p, out);
            } else {
                wrap(l, prec(&l.kind) < p, out);
                out.push_str(sym);
                wrap(r, prec(&r.kind) <= p, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(text: &str) -> Expression {
        Expression::parse(text, &["D0", "a", "n", "d"]).unwrap()
    }

    #[test]
    fn parabolic_detuning_shape() {
        let e = p("D0*(t^2 - 1)");
        let (v, dv) = e.eval_dual(2.0, &[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, 0.5 * 3.0);
        assert_eq!(dv, 0.5 * 4.0);
    }

    #[test]
    fn bare_variable() {
        let e = Expression::parse("t", &[] as &[&str]).unwrap();
        assert_eq!(e.eval_dual(3.25, &[]).unwrap(), (3.25, 1.0));
    }

    #[test]
    fn unbalanced_paren_offset() {
        let err = Expression::parse("sin(", &[] as &[&str]).unwrap_err();
        match err {
            Error::Syntax { offset, .. } => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn power_rule() {
        let e = Expression::parse("t^2", &[] as &[&str]).unwrap();
        assert_eq!(e.eval_dual(3.0, &[]).unwrap(), (9.0, 6.0));
    }

    #[test]
    fn shifted_cosine_derivative() {
        // a*cos(n*t + d) at t = pi
        let e = p("a*cos(n*t + d)");
        let (a, n, d) = (1.5, 0.9, PI / 2.0);
        let (v, dv) = e.eval_dual(PI, &[0.0, a, n, d]).unwrap();
        assert!((v - a * (n * PI + d).cos()).abs() < 1e-15);
        assert!((dv - (-a * n * (n * PI + d).sin())).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expression::parse("2^3^2", &[] as &[&str]).unwrap();
        assert_eq!(e.eval(0.0, &[]).unwrap(), 512.0); // right-assoc
        let e = Expression::parse("-2^2", &[] as &[&str]).unwrap();
        assert_eq!(e.eval(0.0, &[]).unwrap(), -4.0); // ^ binds tighter than unary -
        let e = Expression::parse("1 - 2 - 3", &[] as &[&str]).unwrap();
        assert_eq!(e.eval(0.0, &[]).unwrap(), -4.0);
        let e = Expression::parse("2^-2", &[] as &[&str]).unwrap();
        assert_eq!(e.eval(0.0, &[]).unwrap(), 0.25);
    }

    #[test]
    fn unknown_symbol() {
        let err = Expression::parse("2*foo", &[] as &[&str]).unwrap_err();
        match err {
            Error::UnknownSymbol { name, offset } => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 2);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn domain_errors_name_subexpression() {
        let e = Expression::parse("1/(t - 1) + sqrt(t)", &[] as &[&str]).unwrap();
        let err = e.eval(1.0, &[]).unwrap_err();
        match err {
            Error::Domain { context, .. } => assert_eq!(context, "1/(t - 1)"),
            other => panic!("unexpected: {other:?}"),
        }
        let err = e.eval(-1.0, &[]).unwrap_err();
        match err {
            Error::Domain { context, .. } => assert_eq!(context, "sqrt(t)"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn negative_base_integer_power_ok() {
        let e = Expression::parse("(-2)^3", &[] as &[&str]).unwrap();
        assert_eq!(e.eval(0.0, &[]).unwrap(), -8.0);
        let e = Expression::parse("(t - 2)^0.5", &[] as &[&str]).unwrap();
        assert!(matches!(e.eval(0.0, &[]), Err(Error::Domain { .. })));
    }

    #[test]
    fn pretty_is_fixed_point() {
        for text in [
            "D0*(t^2 - 1)",
            "a*cos(n*t + d) - 2^-2",
            "-(t + 1)*sin(t)/(1 + t^2)",
            "sqrt(abs(t)) + pi*e",
            "2 ^ 3 ^ 2",
            "1 - 2 - 3",
        ] {
            let once = p(text).pretty();
            let twice = Expression::parse(&once, &["D0", "a", "n", "d"])
                .unwrap()
                .pretty();
            assert_eq!(once, twice, "not a fixed point for {text}");
        }
    }

    #[test]
    fn reserved_parameter_names_rejected() {
        assert!(Expression::parse("t", &["pi"]).is_err());
        assert!(Expression::parse("t", &["sin"]).is_err());
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            Expression::parse("  ", &[] as &[&str]),
            Err(Error::Syntax { .. })
        ));
    }
}
