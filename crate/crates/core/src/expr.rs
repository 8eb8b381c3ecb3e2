//! Arithmetic expressions over state variables `x1..xn`, time `t`, and named
//! parameters.
//!
//! Grammar (lowest to highest binding):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := atom ("^" unary)?          (right-associative)
//! atom    := number | ident | ident "(" args ")" | "(" expr ")"
//! ```
//!
//! so `-2^2` is `-(2^2) = -4` and `2^3^2 = 2^9`. A unary minus applied
//! directly to a numeric literal is folded into a negative literal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("function `{function}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

pub type Result<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// A variable reference. State indices are 1-based, as written (`x1`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Time,
    State(usize),
    Param(String),
}

impl Var {
    pub fn name(&self) -> String {
        match self {
            Var::Time => "t".to_string(),
            Var::State(k) => format!("x{k}"),
            Var::Param(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

static NO_PARAMS: BTreeMap<String, f64> = BTreeMap::new();

/// Values for every variable an expression may mention.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub state: &'a [f64],
    pub time: f64,
    pub params: &'a BTreeMap<String, f64>,
}

impl<'a> EvalContext<'a> {
    pub fn new(state: &'a [f64], time: f64) -> Self {
        EvalContext {
            state,
            time,
            params: &NO_PARAMS,
        }
    }

    pub fn with_params(mut self, params: &'a BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }
}

/// Identifiers the parser accepts besides `t` and `xK`.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    params: BTreeSet<String>,
    time_alias: Option<String>,
}

impl ParseOptions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn param(mut self, name: impl Into<String>) -> Self {
        self.params.insert(name.into());
        self
    }

    pub fn params<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.params.extend(names.into_iter().map(Into::into));
        self
    }

    /// Extra name that reads as the time variable (discrete systems use `k`).
    pub fn time_alias(mut self, name: impl Into<String>) -> Self {
        self.time_alias = Some(name.into());
        self
    }
}

/// Parses an expression that may only mention `t`, `xK`, and `pi`.
pub fn parse(text: &str) -> Result<Expr> {
    parse_with(text, &ParseOptions::default())
}

pub fn parse_with(text: &str, opts: &ParseOptions) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        opts,
        text_len: text.len(),
    };
    if p.tokens.is_empty() {
        return Err(ExprError::Syntax {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let e = p.expr(0)?;
    if let Some(tok) = p.peek() {
        return Err(ExprError::Syntax {
            position: tok.pos,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Op(c) => format!("`{c}`"),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
            TokKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
                position: start,
                message: format!("malformed number `{lit}`"),
            })?;
            // A literal running straight into an identifier is implicit
            // multiplication, which the grammar does not allow.
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(ExprError::Syntax {
                    position: i,
                    message: "implicit multiplication is not supported".into(),
                });
            }
            out.push(Token {
                kind: TokKind::Num(v),
                pos: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(text[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            ',' => TokKind::Comma,
            _ => {
                return Err(ExprError::Syntax {
                    position: start,
                    message: format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                })
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    opts: &'a ParseOptions,
    text_len: usize,
}

// Binding powers.
const BP_ADD: u8 = 1;
const BP_MUL: u8 = 3;
const BP_UNARY: u8 = 5;
const BP_POW_LEFT: u8 = 7;
const BP_POW_RIGHT: u8 = 6;

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn end_error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            position: self.text_len,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: TokKind, what: &str) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == want => Ok(()),
            Some(t) => Err(ExprError::Syntax {
                position: t.pos,
                message: format!("expected {what}, found {}", t.kind.describe()),
            }),
            None => Err(self.end_error(&format!("expected {what} at end of input"))),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek().map(|t| &t.kind) {
                Some(TokKind::Op('+')) => (BinaryOp::Add, BP_ADD, BP_ADD + 1),
                Some(TokKind::Op('-')) => (BinaryOp::Sub, BP_ADD, BP_ADD + 1),
                Some(TokKind::Op('*')) => (BinaryOp::Mul, BP_MUL, BP_MUL + 1),
                Some(TokKind::Op('/')) => (BinaryOp::Div, BP_MUL, BP_MUL + 1),
                Some(TokKind::Op('^')) => (BinaryOp::Pow, BP_POW_LEFT, BP_POW_RIGHT),
                Some(TokKind::RParen) | Some(TokKind::Comma) | None => break,
                Some(other) => {
                    let pos = self.peek().unwrap().pos;
                    return Err(ExprError::Syntax {
                        position: pos,
                        message: format!("expected an operator, found {}", other.describe()),
                    });
                }
            };
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr(rbp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        let tok = match self.next() {
            Some(t) => t,
            None => return Err(self.end_error("unexpected end of input")),
        };
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Number(v)),
            TokKind::Op('-') => {
                let operand = self.expr(BP_UNARY)?;
                Ok(match operand {
                    Expr::Number(v) => Expr::Number(-v),
                    other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
                })
            }
            TokKind::Op('+') => self.expr(BP_UNARY),
            TokKind::LParen => {
                let e = self.expr(0)?;
                self.expect(TokKind::RParen, "`)`")?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if matches!(self.peek().map(|t| &t.kind), Some(TokKind::LParen)) {
                    self.call(name)
                } else {
                    self.identifier(name)
                }
            }
            other => Err(ExprError::Syntax {
                position: tok.pos,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr> {
        let func = Func::lookup(&name).ok_or_else(|| ExprError::UnknownIdentifier(name.clone()))?;
        self.next(); // '('
        let mut args = Vec::new();
        if matches!(self.peek().map(|t| &t.kind), Some(TokKind::RParen)) {
            self.next();
        } else {
            loop {
                args.push(self.expr(0)?);
                match self.next() {
                    Some(Token {
                        kind: TokKind::Comma, ..
                    }) => continue,
                    Some(Token {
                        kind: TokKind::RParen, ..
                    }) => break,
                    Some(t) => {
                        return Err(ExprError::Syntax {
                            position: t.pos,
                            message: format!("expected `,` or `)`, found {}", t.kind.describe()),
                        })
                    }
                    None => return Err(self.end_error("expected `)` at end of input")),
                }
            }
        }
        if args.len() != func.arity() {
            return Err(ExprError::ArityMismatch {
                function: name,
                expected: func.arity(),
                found: args.len(),
            });
        }
        Ok(Expr::Call(func, args))
    }

    fn identifier(&mut self, name: String) -> Result<Expr> {
        if name == "t" || self.opts.time_alias.as_deref() == Some(name.as_str()) {
            return Ok(Expr::Var(Var::Time));
        }
        if self.opts.params.contains(&name) {
            return Ok(Expr::Var(Var::Param(name)));
        }
        if name == "pi" {
            return Ok(Expr::Number(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && !digits.starts_with('0') {
                if let Ok(k) = digits.parse::<usize>() {
                    return Ok(Expr::Var(Var::State(k)));
                }
            }
        }
        Err(ExprError::UnknownIdentifier(name))
    }
}

fn domain(e: &Expr, reason: &str) -> ExprError {
    ExprError::Domain {
        node: e.to_string(),
        reason: reason.into(),
    }
}

fn finite(e: &Expr, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(e, "result is not finite"))
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Number(v)
    }

    pub fn state(k: usize) -> Expr {
        Expr::Var(Var::State(k))
    }

    pub fn time() -> Expr {
        Expr::Var(Var::Time)
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Evaluates the expression. Any non-finite intermediate is an error.
    pub fn eval(&self, ctx: &EvalContext<'_>) -> Result<f64> {
        match self {
            Expr::Number(v) => Ok(*v),
            Expr::Var(Var::Time) => Ok(ctx.time),
            Expr::Var(Var::State(k)) => ctx
                .state
                .get(k - 1)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable(format!("x{k}"))),
            Expr::Var(Var::Param(p)) => ctx
                .params
                .get(p)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable(p.clone())),
            Expr::Unary(UnaryOp::Neg, c) => Ok(-c.eval(ctx)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval(ctx)?;
                let b = r.eval(ctx)?;
                match op {
                    BinaryOp::Add => finite(self, a + b),
                    BinaryOp::Sub => finite(self, a - b),
                    BinaryOp::Mul => finite(self, a * b),
                    BinaryOp::Div => {
                        if b == 0.0 {
                            Err(domain(self, "division by zero"))
                        } else {
                            finite(self, a / b)
                        }
                    }
                    BinaryOp::Pow => finite(self, a.powf(b)),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(ctx)?;
                let v = match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain(self, "logarithm of a non-positive number"));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain(self, "square root of a negative number"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Pow => a.powf(args[1].eval(ctx)?),
                };
                finite(self, v)
            }
        }
    }

    /// Names of every variable mentioned (`t`, `xK`, parameter names).
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v.name());
        });
        out
    }

    pub fn depends_on_time(&self) -> bool {
        let mut found = false;
        self.visit_vars(&mut |v| found |= *v == Var::Time);
        found
    }

    /// Largest state index mentioned, 0 if none.
    pub fn max_state_index(&self) -> usize {
        let mut m = 0;
        self.visit_vars(&mut |v| {
            if let Var::State(k) = v {
                m = m.max(*k);
            }
        });
        m
    }

    fn visit_vars(&self, f: &mut impl FnMut(&Var)) {
        match self {
            Expr::Number(_) => {}
            Expr::Var(v) => f(v),
            Expr::Unary(_, c) => c.visit_vars(f),
            Expr::Binary(_, l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
        }
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: &Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == var => with.clone(),
            Expr::Number(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, c) => Expr::Unary(*op, Box::new(c.substitute(var, with))),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.substitute(var, with)),
                Box::new(r.substitute(var, with)),
            ),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|a| a.substitute(var, with)).collect()),
        }
    }

    /// Substitutes numeric values for the named parameters present in `params`.
    pub fn bind_params(&self, params: &BTreeMap<String, f64>) -> Expr {
        params.iter().fold(self.clone(), |e, (name, v)| {
            e.substitute(&Var::Param(name.clone()), &Expr::Number(*v))
        })
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form that re-parses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => {
                if v.is_sign_negative() {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Unary(UnaryOp::Neg, c) => write!(f, "(-{c})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
