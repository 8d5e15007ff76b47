//! Scalar expressions over space-time, with a small infix parser and
//! outward-rounded interval evaluation.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `t`, `x` (first spatial coordinate), `x0`..`x9`, `r` (the
//! Euclidean norm of the spatial part), `pi`, `e`. Functions: `exp`, `log`,
//! `sqrt`, `abs`, `min`, `max`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Spatial coordinate by index.
    X(usize),
    T,
    /// Euclidean norm of the spatial coordinates.
    Norm,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

const MAX_DEPTH: usize = 200;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, depth: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Largest spatial index referenced, plus one.
    pub fn spatial_arity(&self) -> usize {
        match self {
            Expr::X(i) => i + 1,
            Expr::Const(_) | Expr::T | Expr::Norm => 0,
            Expr::Neg(a) | Expr::Call(_, a) => a.spatial_arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) | Expr::Min(a, b) | Expr::Max(a, b) => {
                a.spatial_arity().max(b.spatial_arity())
            }
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::T => t,
            Expr::Norm => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(a, b) => pow_point(a.eval(x, t), b.eval(x, t)),
            Expr::Call(f, a) => {
                let v = a.eval(x, t);
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
            Expr::Min(a, b) => a.eval(x, t).min(b.eval(x, t)),
            Expr::Max(a, b) => a.eval(x, t).max(b.eval(x, t)),
        }
    }

    /// Enclosure of the range over the axis box `xs × ts`.
    pub fn eval_interval(&self, xs: &[Interval], ts: Interval) -> Interval {
        match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::X(i) => xs.get(*i).copied().unwrap_or(Interval::ENTIRE),
            Expr::T => ts,
            Expr::Norm => {
                let mut acc = Interval::point(0.0);
                for v in xs {
                    acc = acc.add(v.sqr());
                }
                acc.sqrt()
            }
            Expr::Neg(a) => a.eval_interval(xs, ts).neg(),
            Expr::Add(a, b) => a.eval_interval(xs, ts).add(b.eval_interval(xs, ts)),
            Expr::Sub(a, b) => a.eval_interval(xs, ts).sub(b.eval_interval(xs, ts)),
            Expr::Mul(a, b) => a.eval_interval(xs, ts).mul(b.eval_interval(xs, ts)),
            Expr::Div(a, b) => a.eval_interval(xs, ts).div(b.eval_interval(xs, ts)),
            Expr::Pow(a, b) => {
                let base = a.eval_interval(xs, ts);
                match **b {
                    Expr::Const(c) => base.powf(c),
                    _ => b.eval_interval(xs, ts).mul(base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval_interval(xs, ts);
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
            Expr::Min(a, b) => {
                let (u, v) = (a.eval_interval(xs, ts), b.eval_interval(xs, ts));
                Interval::new(u.lo.min(v.lo), u.hi.min(v.hi))
            }
            Expr::Max(a, b) => {
                let (u, v) = (a.eval_interval(xs, ts), b.eval_interval(xs, ts));
                Interval::new(u.lo.max(v.lo), u.hi.max(v.hi))
            }
        }
    }
}

fn pow_point(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() < 1024.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Closed interval `[lo, hi]`. A result that cannot be bounded becomes
/// [`Interval::ENTIRE`], which no containment test accepts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            Interval::ENTIRE
        } else {
            Interval { lo, hi }
        }
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v)
    }

    fn widen(lo: f64, hi: f64) -> Interval {
        Interval::new(lo.next_down(), hi.next_up())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    fn add(self, o: Interval) -> Interval {
        Interval::widen(self.lo + o.lo, self.hi + o.hi)
    }

    fn sub(self, o: Interval) -> Interval {
        Interval::widen(self.lo - o.hi, self.hi - o.lo)
    }

    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        if c.iter().any(|v| v.is_nan()) {
            return Interval::ENTIRE;
        }
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::widen(lo, hi)
    }

    fn recip(self) -> Interval {
        if self.lo > 0.0 || self.hi < 0.0 {
            Interval::widen(1.0 / self.hi, 1.0 / self.lo)
        } else {
            Interval::ENTIRE
        }
    }

    fn div(self, o: Interval) -> Interval {
        self.mul(o.recip())
    }

    fn sqr(self) -> Interval {
        if self.lo >= 0.0 {
            Interval::widen(self.lo * self.lo, self.hi * self.hi)
        } else if self.hi <= 0.0 {
            Interval::widen(self.hi * self.hi, self.lo * self.lo)
        } else {
            let m = (self.lo * self.lo).max(self.hi * self.hi);
            Interval::new(0.0, m.next_up())
        }
    }

    fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval::new(0.0, (-self.lo).max(self.hi))
        }
    }

    fn sqrt(self) -> Interval {
        if self.lo < 0.0 {
            return Interval::ENTIRE;
        }
        Interval::widen(self.lo.sqrt(), self.hi.sqrt()).clamp_lo(0.0)
    }

    fn exp(self) -> Interval {
        let (a, b) = (self.lo.exp(), self.hi.exp());
        Interval::widen(a - a * 1e-15, b + b * 1e-15).clamp_lo(0.0)
    }

    fn ln(self) -> Interval {
        if self.lo <= 0.0 {
            return Interval::ENTIRE;
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        Interval::widen(a - a.abs() * 1e-15, b + b.abs() * 1e-15)
    }

    fn clamp_lo(self, floor: f64) -> Interval {
        Interval::new(self.lo.max(floor), self.hi)
    }

    fn powf(self, c: f64) -> Interval {
        if c == 0.0 {
            return Interval::point(1.0);
        }
        if c.fract() == 0.0 && c.abs() < 1024.0 {
            let k = c as i32;
            if k == 1 {
                return self;
            }
            if k < 0 {
                return self.powf(-c).recip();
            }
            if k % 2 == 0 {
                let a = self.abs();
                return Interval::widen(a.lo.powi(k), a.hi.powi(k)).clamp_lo(0.0);
            }
            // powi is not correctly rounded; widen by a few ulps more
            let lo = self.lo.powi(k);
            let hi = self.hi.powi(k);
            return Interval::widen(lo - lo.abs() * 1e-15, hi + hi.abs() * 1e-15);
        }
        if self.lo < 0.0 {
            return Interval::ENTIRE;
        }
        let (a, b) = if c > 0.0 { (self.lo.powf(c), self.hi.powf(c)) } else { (self.hi.powf(c), self.lo.powf(c)) };
        Interval::widen(a - a.abs() * 1e-15, b + b.abs() * 1e-15).clamp_lo(0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::X(i) => write!(f, "x{i}"),
            Expr::T => write!(f, "t"),
            Expr::Norm => write!(f, "r"),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Exp => "exp",
                    Func::Log => "log",
                    Func::Sqrt => "sqrt",
                    Func::Abs => "abs",
                };
                write!(f, "{name}({a})")
            }
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { offset: self.pos, message: msg.to_string() }
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

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err("expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        self.enter()?;
        let e = if self.eat(b'-') {
            // a literal directly after the sign folds into a negative constant
            // unless it is the base of a power
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                let lit = self.number()?;
                if self.eat(b'^') {
                    let exp = self.unary()?;
                    Expr::Neg(Box::new(Expr::Pow(Box::new(lit), Box::new(exp))))
                } else {
                    match lit {
                        Expr::Const(c) => Expr::Const(-c),
                        other => Expr::Neg(Box::new(other)),
                    }
                }
            } else {
                Expr::Neg(Box::new(self.unary()?))
            }
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).map_err(|_| self.err("invalid number"))?;
        let v: f64 = text.parse().map_err(|_| self.err("invalid number"))?;
        if !v.is_finite() {
            return Err(self.err("numeric literal out of range"));
        }
        self.pos = i;
        Ok(Expr::Const(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).map_err(|_| self.err("invalid identifier"))?;
        let func = match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        if let Some(func) = func {
            let args = self.args(1)?;
            let mut it = args.into_iter();
            return Ok(Expr::Call(func, Box::new(it.next().unwrap())));
        }
        if name == "min" || name == "max" {
            let args = self.args(2)?;
            let mut it = args.into_iter();
            let a = it.next().unwrap();
            let b = it.next().unwrap();
            return Ok(if name == "min" { Expr::Min(Box::new(a), Box::new(b)) } else { Expr::Max(Box::new(a), Box::new(b)) });
        }
        match name {
            "t" => Ok(Expr::T),
            "x" => Ok(Expr::X(0)),
            "r" => Ok(Expr::Norm),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            _ => {
                if let Some(idx) = name.strip_prefix('x') {
                    if idx.len() == 1 {
                        if let Ok(i) = idx.parse::<usize>() {
                            return Ok(Expr::X(i));
                        }
                    }
                }
                self.pos = start;
                Err(self.err(&format!("unknown identifier '{name}'")))
            }
        }
    }

    fn args(&mut self, count: usize) -> Result<Vec<Expr>> {
        if !self.eat(b'(') {
            return Err(self.err("expected '(' after function name"));
        }
        let mut out = vec![self.expr()?];
        while self.eat(b',') {
            out.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        if out.len() != count {
            return Err(self.err(&format!("expected {count} argument(s), got {}", out.len())));
        }
        Ok(out)
    }
}
