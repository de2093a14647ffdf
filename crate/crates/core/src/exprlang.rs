//! A minimal deterministic expression language for user-supplied
//! nonlinearities `f_i(u_1, ..., u_n)`.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := NUMBER | 'u' INDEX | 'exp' '(' expr ')'
//!          | 'pow' '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! Numeric literals are nonnegative (`-` is always the operator), `+ - * /`
//! are left-associative, and the only functions are `exp` and `pow`.
//! Variables are `u1 ... un`; the component count `n` is fixed at parse time
//! so out-of-range indices are rejected with a byte offset.
//!
//! Evaluation is plain `f64` arithmetic with three guarded cases: division
//! by zero, `pow` of a negative base with a non-integer exponent, and any
//! non-finite intermediate result. `pow(0, p)` returns `0` for `p > 0` and
//! `1` for `p = 0`, matching the `u^alpha` usage at the origin.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable u{index} at byte {offset} out of range: system has {n} components")]
    VarOutOfRange { index: usize, n: usize, offset: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("pow of negative base {base} with non-integer exponent {exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
    #[error("evaluation point has {got} components, expression needs {needed}")]
    PointTooShort { got: usize, needed: usize },
}

/// Abstract syntax tree. Variables are stored with their 1-based index.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "'+'".into(),
            Token::Minus => "'-'".into(),
            Token::Star => "'*'".into(),
            Token::Slash => "'/'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Comma => "','".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // optional exponent
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let slice = &text[start..i];
                let value: f64 = slice.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: vec!["number"],
                    found: format!("`{slice}`"),
                })?;
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: i,
                    expected: vec!["number", "identifier", "operator", "'('"],
                    found: format!("`{c}`"),
                })
            }
        }
    }
    tokens.push((Token::Eof, bytes.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &(Token, usize) {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Token, label: &'static str) -> Result<(), ExprError> {
        let (tok, offset) = self.peek().clone();
        if std::mem::discriminant(&tok) == std::mem::discriminant(want) {
            self.advance();
            Ok(())
        } else {
            Err(ExprError::Syntax {
                offset,
                expected: vec![label],
                found: tok.describe(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Token::Plus => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Token::Star => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek().0, Token::Minus) {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (tok, offset) = self.advance();
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Ident(name) => {
                if name == "exp" {
                    self.expect(&Token::LParen, "'('")?;
                    let arg = self.expr()?;
                    self.expect(&Token::RParen, "')'")?;
                    Ok(Expr::Exp(Box::new(arg)))
                } else if name == "pow" {
                    self.expect(&Token::LParen, "'('")?;
                    let base = self.expr()?;
                    self.expect(&Token::Comma, "','")?;
                    let exponent = self.expr()?;
                    self.expect(&Token::RParen, "')'")?;
                    Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
                } else if let Some(digits) = name.strip_prefix('u') {
                    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(ExprError::UnknownIdentifier { name, offset });
                    }
                    let index: usize =
                        digits.parse().map_err(|_| ExprError::UnknownIdentifier {
                            name: name.clone(),
                            offset,
                        })?;
                    if index == 0 || index > self.n {
                        return Err(ExprError::VarOutOfRange {
                            index,
                            n: self.n,
                            offset,
                        });
                    }
                    Ok(Expr::Var(index))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset })
                }
            }
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(&Token::RParen, "')'")?;
                Ok(inner)
            }
            other => Err(ExprError::Syntax {
                offset,
                expected: vec!["number", "variable", "'('", "'-'", "'exp'", "'pow'"],
                found: other.describe(),
            }),
        }
    }
}

/// Parses `text` as an expression over the variables `u1 ... u<n>`.
pub fn parse(text: &str, n: usize) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, n };
    let expr = parser.expr()?;
    let (tok, offset) = parser.peek().clone();
    if !matches!(tok, Token::Eof) {
        return Err(ExprError::Syntax {
            offset,
            expected: vec!["operator", "end of input"],
            found: tok.describe(),
        });
    }
    Ok(expr)
}

impl Expr {
    /// Evaluates at the point `x = (u1, ..., un)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let v = self.eval_inner(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite)
        }
    }

    fn eval_inner(&self, x: &[f64]) -> Result<f64, ExprError> {
        let guard = |v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ExprError::NonFinite)
            }
        };
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(i) => x.get(i - 1).copied().ok_or(ExprError::PointTooShort {
                got: x.len(),
                needed: *i,
            }),
            Expr::Neg(a) => Ok(-a.eval_inner(x)?),
            Expr::Add(a, b) => guard(a.eval_inner(x)? + b.eval_inner(x)?),
            Expr::Sub(a, b) => guard(a.eval_inner(x)? - b.eval_inner(x)?),
            Expr::Mul(a, b) => guard(a.eval_inner(x)? * b.eval_inner(x)?),
            Expr::Div(a, b) => {
                let num = a.eval_inner(x)?;
                let den = b.eval_inner(x)?;
                if den == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                guard(num / den)
            }
            Expr::Pow(a, b) => {
                let base = a.eval_inner(x)?;
                let exponent = b.eval_inner(x)?;
                pow_checked(base, exponent)
            }
            Expr::Exp(a) => guard(a.eval_inner(x)?.exp()),
        }
    }

    /// Largest variable index referenced, 0 when the expression is constant.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => *i,
            Expr::Neg(a) | Expr::Exp(a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }
}

/// Power with the conventions used throughout the crate:
/// `pow(0, p) = 0` for `p > 0`, `pow(0, 0) = 1`, negative base requires an
/// integer exponent.
pub fn pow_checked(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base == 0.0 {
        if exponent > 0.0 {
            return Ok(0.0);
        }
        if exponent == 0.0 {
            return Ok(1.0);
        }
        return Err(ExprError::DivisionByZero);
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(ExprError::PowDomain { base, exponent });
    }
    let v = base.powf(exponent);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite)
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized rendering; `parse(to_string(e), n)` recovers the
    /// tree structurally.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "u{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "pow({a}, {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}
