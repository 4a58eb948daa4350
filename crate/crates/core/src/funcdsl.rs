//! A small expression language for `u(x, t)`.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" ["-" | "+"] number)*
//! primary := number | x1 | x2 | x3 | t | "(" expr ")"
//!          | f "(" expr ")"            f in exp cos sin abs pos sqrt bump
//!          | phi(j, alpha, beta) | psi(j, alpha, beta) | w(j, gamma)
//! ```
//!
//! Exponents are literals so differentiability stays decidable. `pos` is the
//! positive part and `bump` the standard bump profile on `(2, 3)`. The family
//! terms take literal arguments and read the spatial radius `|x|` or the time
//! `t` themselves.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::{phi_family, psi_family, standard_bump, w_family};
use crate::function::{Dependence, FunctionHandle, Smoothness, SupportBox};
use crate::kernel::Normalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// 1-based spatial coordinate.
    X(usize),
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Cos,
    Sin,
    Abs,
    Pos,
    Sqrt,
    Bump,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Cos => "cos",
            UnaryOp::Sin => "sin",
            UnaryOp::Abs => "abs",
            UnaryOp::Pos => "pos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Bump => "bump",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => UnaryOp::Exp,
            "cos" => UnaryOp::Cos,
            "sin" => UnaryOp::Sin,
            "abs" => UnaryOp::Abs,
            "pos" => UnaryOp::Pos,
            "sqrt" => UnaryOp::Sqrt,
            "bump" => UnaryOp::Bump,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Neg => -v,
            UnaryOp::Exp => v.exp(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Sin => v.sin(),
            UnaryOp::Abs => v.abs(),
            UnaryOp::Pos => v.max(0.0),
            UnaryOp::Sqrt => v.sqrt(),
            UnaryOp::Bump => standard_bump(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Phi { j: u32, alpha: f64, beta: f64 },
    Psi { j: u32, alpha: f64, beta: f64 },
    W { j: u32, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Family(Family),
}

impl Expr {
    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Largest spatial index used, and whether `t` appears (families count).
    fn usage(&self) -> (usize, bool, bool) {
        let (mut xmax, mut space, mut time) = (0, false, false);
        self.visit(&mut |e| match e {
            Expr::Var(Var::X(i)) => {
                xmax = xmax.max(*i);
                space = true;
            }
            Expr::Var(Var::T) => time = true,
            Expr::Family(Family::Phi { .. }) => space = true,
            Expr::Family(Family::Psi { .. }) => time = true,
            Expr::Family(Family::W { .. }) => {
                space = true;
                time = true;
            }
            _ => {}
        });
        (xmax, space, time)
    }

    fn has_kink(&self) -> bool {
        let mut k = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Unary(UnaryOp::Pos | UnaryOp::Abs | UnaryOp::Sqrt, _)) {
                k = true;
            }
        });
        k
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{}", fmt_num(*v)),
            Expr::Var(Var::X(i)) => write!(f, "x{i}"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, e) => write!(f, "({a})^{}", fmt_num(*e)),
            Expr::Family(Family::Phi { j, alpha, beta }) => {
                write!(f, "phi({j}, {}, {})", fmt_num(*alpha), fmt_num(*beta))
            }
            Expr::Family(Family::Psi { j, alpha, beta }) => {
                write!(f, "psi({j}, {}, {})", fmt_num(*alpha), fmt_num(*beta))
            }
            Expr::Family(Family::W { j, gamma }) => write!(f, "w({j}, {})", fmt_num(*gamma)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| syntax(format!("malformed number '{s}'"), col))?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), col));
            i += 1;
        } else {
            return Err(syntax(format!("unexpected character '{c}'"), col));
        }
    }
    Ok(out)
}

fn syntax(message: impl Into<String>, column: usize) -> Error {
    Error::Syntax { message: message.into(), column }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end_col)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
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
            Err(syntax(format!("expected '{c}'"), self.col()))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while self.eat('^') {
            base = Expr::Pow(Box::new(base), self.signed_literal("exponent")?);
        }
        Ok(base)
    }

    fn signed_literal(&mut self, what: &str) -> Result<f64> {
        let sign = if self.eat('-') {
            -1.0
        } else {
            self.eat('+');
            1.0
        };
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(sign * v)
            }
            _ => Err(syntax(format!("{what} must be a number literal"), self.col())),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                self.ident(&name, col)
            }
            Some(Tok::Sym(c)) => Err(syntax(format!("unexpected '{c}'"), col)),
            None => Err(syntax("unexpected end of input", col)),
        }
    }

    fn ident(&mut self, name: &str, col: usize) -> Result<Expr> {
        if name == "t" {
            return Ok(Expr::Var(Var::T));
        }
        if let Some(d) = name.strip_prefix('x') {
            if let Ok(i @ 1..=3) = d.parse::<usize>() {
                return Ok(Expr::Var(Var::X(i)));
            }
        }
        if let Some(op) = UnaryOp::from_name(name) {
            self.expect('(')?;
            let a = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::Unary(op, Box::new(a)));
        }
        let arity = match name {
            "phi" | "psi" => 3,
            "w" => 2,
            _ => return Err(syntax(format!("unknown identifier '{name}'"), col)),
        };
        self.expect('(')?;
        let mut args = Vec::with_capacity(arity);
        for k in 0..arity {
            if k > 0 {
                self.expect(',')?;
            }
            args.push((self.col(), self.signed_literal("family argument")?));
        }
        self.expect(')')?;
        let (jcol, jv) = args[0];
        if !(jv >= 1.0 && jv.fract() == 0.0 && jv <= u32::MAX as f64) {
            return Err(syntax(format!("{name}: index must be a positive integer, got {jv}"), jcol));
        }
        let j = jv as u32;
        Ok(Expr::Family(match name {
            "phi" => Family::Phi { j, alpha: args[1].1, beta: args[2].1 },
            "psi" => Family::Psi { j, alpha: args[1].1, beta: args[2].1 },
            _ => Family::W { j, gamma: args[1].1 },
        }))
    }
}

/// Parse an expression; syntax errors carry a 1-based column.
pub fn parse(text: &str) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(syntax("empty expression", 1));
    }
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end_col: text.chars().count() + 1 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(syntax("unexpected trailing input", p.col()));
    }
    Ok(e)
}

/// Canonical text of an expression; parses back to the same tree.
pub fn print(e: &Expr) -> String {
    e.to_string()
}

/// Run configuration the expression is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DslContext {
    pub dim: usize,
    pub s: f64,
    pub normalization: Normalization,
}

/// Check dimensions and family parameters.
pub fn validate(e: &Expr, ctx: &DslContext) -> Result<()> {
    let (xmax, _, _) = e.usage();
    if xmax > ctx.dim {
        return Err(Error::Validation(format!("x{xmax} used in a {}-dimensional run", ctx.dim)));
    }
    let mut err = None;
    e.visit(&mut |node| {
        if err.is_some() {
            return;
        }
        match node {
            Expr::Family(Family::Phi { alpha, beta, .. } | Family::Psi { alpha, beta, .. })
                if !(*alpha > 0.0 && *beta > 0.0) =>
            {
                err = Some(Error::Validation("family exponents alpha, beta must be positive".into()));
            }
            Expr::Family(Family::W { gamma, .. }) if !(*gamma > ctx.s) => {
                err = Some(Error::Constraint(format!("w: gamma = {gamma} must exceed s = {}", ctx.s)));
            }
            _ => {}
        }
    });
    err.map_or(Ok(()), Err)
}

/// Metadata the caller wants to impose on the produced handle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetadataOverrides {
    pub support: Option<SupportBox>,
    pub smoothness: Option<Smoothness>,
    pub scales: Option<(f64, f64)>,
}

enum Node {
    Num(f64),
    X(usize),
    T,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Handle(FunctionHandle),
}

impl Node {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X(i) => x.get(i - 1).copied().unwrap_or(0.0),
            Node::T => t,
            Node::Unary(op, a) => op.apply(a.eval(x, t)),
            Node::Binary(op, a, b) => {
                let (l, r) = (a.eval(x, t), b.eval(x, t));
                match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l * r,
                    BinaryOp::Div => l / r,
                }
            }
            Node::Pow(a, p) => {
                let v = a.eval(x, t);
                if p.fract() == 0.0 && p.abs() <= 64.0 {
                    v.powi(*p as i32)
                } else {
                    v.powf(*p)
                }
            }
            Node::Handle(h) => h.eval(x, t),
        }
    }
}

fn family_handle(f: &Family, ctx: &DslContext) -> Result<FunctionHandle> {
    match *f {
        Family::Phi { j, alpha, beta } => Ok(phi_family(j, alpha, beta)),
        Family::Psi { j, alpha, beta } => Ok(psi_family(j, alpha, beta)),
        Family::W { j, gamma } => w_family(j, gamma, ctx.s, ctx.dim, ctx.normalization),
    }
}

fn compile(e: &Expr, ctx: &DslContext, handles: &mut Vec<FunctionHandle>) -> Result<Node> {
    Ok(match e {
        Expr::Num(v) => Node::Num(*v),
        Expr::Var(Var::X(i)) => Node::X(*i),
        Expr::Var(Var::T) => Node::T,
        Expr::Unary(op, a) => Node::Unary(*op, Box::new(compile(a, ctx, handles)?)),
        Expr::Binary(op, a, b) => Node::Binary(
            *op,
            Box::new(compile(a, ctx, handles)?),
            Box::new(compile(b, ctx, handles)?),
        ),
        Expr::Pow(a, p) => Node::Pow(Box::new(compile(a, ctx, handles)?), *p),
        Expr::Family(f) => {
            let h = family_handle(f, ctx)?;
            handles.push(h.clone());
            Node::Handle(h)
        }
    })
}

/// Build a function handle from a validated expression.
///
/// A bare family term returns the family's own handle, support included.
/// Expressions without variables become constants. Anything else gets no
/// support, `Smooth` unless `pos`, `abs` or `sqrt` appears (then Hoelder of
/// order 1 in both variables), and the time breaks of the family terms it
/// contains.
pub fn to_handle(e: &Expr, ctx: &DslContext, overrides: &MetadataOverrides) -> Result<FunctionHandle> {
    validate(e, ctx)?;
    let mut handles = Vec::new();
    let node = compile(e, ctx, &mut handles)?;
    let (_, space, time) = e.usage();

    let mut h = if let Expr::Family(f) = e {
        family_handle(f, ctx)?
    } else if !space && !time {
        FunctionHandle::constant(node.eval(&[], 0.0))
    } else {
        let node = Arc::new(node);
        let mut h = FunctionHandle::new(move |x, t| node.eval(x, t))
            .with_dependence(Dependence::from_flags(space, time));
        if e.has_kink() {
            h = h.with_smoothness(Smoothness::Holder { space: 1.0, time: 1.0 });
        } else if let Some(s) = handles.iter().map(|h| h.smoothness).find(|s| *s != Smoothness::Smooth) {
            h = h.with_smoothness(s);
        }
        let mut breaks: Vec<f64> = handles.iter().flat_map(|h| h.time_breaks.clone()).collect();
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        let sx = handles.iter().map(|h| h.scales.space).fold(1.0, f64::min);
        let st = handles.iter().map(|h| h.scales.time).fold(1.0, f64::min);
        h.with_time_breaks(breaks).with_scales(sx, st)
    };
    if let Some(sup) = &overrides.support {
        h = h.with_support(sup.clone());
    }
    if let Some(sm) = overrides.smoothness {
        h = h.with_smoothness(sm);
    }
    if let Some((sx, st)) = overrides.scales {
        h = h.with_scales(sx, st);
    }
    Ok(h)
}

/// Parse, validate and build in one step.
pub fn compile_text(text: &str, ctx: &DslContext) -> Result<FunctionHandle> {
    to_handle(&parse(text)?, ctx, &MetadataOverrides::default())
}
