//! Scalar expression language.
//!
//! Expressions are immutable trees over the ambient coordinates `x1..xN`
//! and the two parameters `t` and `s`. Trees share subtrees through
//! reference counting, so cloning is cheap and differentiation does not
//! copy whole operands.
//!
//! ```
//! use lcsbench::expr::{Expr, Var};
//!
//! let f = Expr::parse("x1^2*sin(x2)").unwrap();
//! let df = f.diff(Var::Coord(0));
//! let v = df.eval(&[1.5, 0.3]).unwrap();
//! assert!((v - 3.0 * 0.3f64.sin()).abs() < 1e-15);
//! assert_eq!(Expr::parse(&f.to_string()).unwrap(), f);
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A variable an expression may depend on. Coordinates are 0-based here
/// and printed 1-based (`Coord(0)` is `x1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Coord(usize),
    T,
    S,
}

/// Elementary functions of one argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Exponent of a power node, kept in lowest terms with a positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let sign = if den < 0 { -1 } else { 1 };
        Some(Rational {
            num: sign * num / g,
            den: sign * den / g,
        })
    }

    pub fn int(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn minus_one(self) -> Self {
        Rational::new(self.num - self.den, self.den).expect("nonzero denominator")
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a.max(1)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            if self.num < 0 {
                write!(f, "({})", self.num)
            } else {
                write!(f, "{}", self.num)
            }
        } else {
            write!(f, "({}/{})", self.num, self.den)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Rational),
    Call(Func, Expr),
    Atan2(Expr, Expr),
}

/// Shared expression tree. Equality is structural.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{op} outside its domain (argument {arg})")]
    Domain { op: &'static str, arg: f64 },
    #[error("coordinate x{index} requested but the point has {dim} entries")]
    MissingCoordinate { index: usize, dim: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
}

/// Values of the parameters `t` and `s` during evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Params {
    pub t: f64,
    pub s: f64,
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn wrap(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn num(c: f64) -> Expr {
        Expr::wrap(Node::Num(c))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    pub fn var(v: Var) -> Expr {
        Expr::wrap(Node::Var(v))
    }

    /// Coordinate with 0-based index.
    pub fn x(i: usize) -> Expr {
        Expr::var(Var::Coord(i))
    }

    pub fn t() -> Expr {
        Expr::var(Var::T)
    }

    pub fn s() -> Expr {
        Expr::var(Var::S)
    }

    pub fn as_num(&self) -> Option<f64> {
        match *self.0 {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_num() == Some(1.0)
    }

    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        Parser::new(text)?.parse_all()
    }

    /// Parses and rejects coordinates beyond `dim`.
    pub fn parse_in(text: &str, dim: usize) -> Result<Expr, ParseError> {
        let e = Expr::parse(text)?;
        if let Some(m) = e.max_coord() {
            if m >= dim {
                let needle = format!("x{}", m + 1);
                let offset = find_coord(text, &needle).unwrap_or(0);
                return Err(ParseError {
                    offset,
                    message: format!("coordinate {needle} exceeds ambient dimension {dim}"),
                });
            }
        }
        Ok(e)
    }

    /// Largest 0-based coordinate index appearing in the tree.
    pub fn max_coord(&self) -> Option<usize> {
        let mut best = None;
        self.visit_vars(&mut |v| {
            if let Var::Coord(i) = v {
                best = Some(best.map_or(i, |b: usize| b.max(i)));
            }
        });
        best
    }

    pub fn depends_on(&self, var: Var) -> bool {
        let mut hit = false;
        self.visit_vars(&mut |v| hit |= v == var);
        hit
    }

    fn visit_vars(&self, f: &mut dyn FnMut(Var)) {
        match &*self.0 {
            Node::Num(_) => {}
            Node::Var(v) => f(*v),
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.visit_vars(f),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Atan2(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        match &*self.0 {
            Node::Num(_) | Node::Var(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + a.size(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Atan2(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(x, Params::default())
    }

    pub fn eval_with(&self, x: &[f64], p: Params) -> Result<f64, EvalError> {
        let v = match &*self.0 {
            Node::Num(c) => *c,
            Node::Var(Var::Coord(i)) => *x.get(*i).ok_or(EvalError::MissingCoordinate {
                index: i + 1,
                dim: x.len(),
            })?,
            Node::Var(Var::T) => p.t,
            Node::Var(Var::S) => p.s,
            Node::Neg(a) => -a.eval_with(x, p)?,
            Node::Add(a, b) => a.eval_with(x, p)? + b.eval_with(x, p)?,
            Node::Sub(a, b) => a.eval_with(x, p)? - b.eval_with(x, p)?,
            Node::Mul(a, b) => a.eval_with(x, p)? * b.eval_with(x, p)?,
            Node::Div(a, b) => {
                let d = b.eval_with(x, p)?;
                if d == 0.0 {
                    return Err(EvalError::Domain { op: "division", arg: d });
                }
                a.eval_with(x, p)? / d
            }
            Node::Pow(a, r) => {
                let base = a.eval_with(x, p)?;
                if r.is_integer() {
                    if base == 0.0 && r.num < 0 {
                        return Err(EvalError::Domain { op: "negative power", arg: base });
                    }
                    match i32::try_from(r.num) {
                        Ok(n) => base.powi(n),
                        Err(_) => base.powf(r.num as f64),
                    }
                } else {
                    if base < 0.0 || (base == 0.0 && r.num < 0) {
                        return Err(EvalError::Domain { op: "fractional power", arg: base });
                    }
                    base.powf(r.to_f64())
                }
            }
            Node::Call(func, a) => {
                let u = a.eval_with(x, p)?;
                match func {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Ln => {
                        if u <= 0.0 {
                            return Err(EvalError::Domain { op: "ln", arg: u });
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(EvalError::Domain { op: "sqrt", arg: u });
                        }
                        u.sqrt()
                    }
                }
            }
            Node::Atan2(a, b) => {
                let y = a.eval_with(x, p)?;
                let xx = b.eval_with(x, p)?;
                if y == 0.0 && xx == 0.0 {
                    return Err(EvalError::Domain { op: "atan2", arg: 0.0 });
                }
                y.atan2(xx)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(v))
        }
    }

    /// Exact partial derivative with light simplification.
    pub fn diff(&self, v: Var) -> Expr {
        match &*self.0 {
            Node::Num(_) => Expr::zero(),
            Node::Var(w) => {
                if *w == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => -a.diff(v),
            Node::Add(a, b) => a.diff(v) + b.diff(v),
            Node::Sub(a, b) => a.diff(v) - b.diff(v),
            Node::Mul(a, b) => a.diff(v) * b + a * b.diff(v),
            Node::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                da / b - a * db / b.powi(2)
            }
            Node::Pow(a, r) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::num(r.to_f64()) * a.pow(r.minus_one()) * da
            }
            Node::Call(func, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match func {
                    Func::Sin => a.cos(),
                    Func::Cos => -a.sin(),
                    Func::Exp => self.clone(),
                    Func::Ln => return da / a,
                    Func::Sqrt => return da / (Expr::num(2.0) * self),
                };
                outer * da
            }
            Node::Atan2(y, x) => {
                let dy = y.diff(v);
                let dx = x.diff(v);
                (x * dy - y * dx) / (x.powi(2) + y.powi(2))
            }
        }
    }

    /// Replaces variables through `f`; unmapped variables are kept.
    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<Expr>) -> Expr {
        match &*self.0 {
            Node::Num(_) => self.clone(),
            Node::Var(v) => f(*v).unwrap_or_else(|| self.clone()),
            Node::Neg(a) => -a.substitute(f),
            Node::Add(a, b) => a.substitute(f) + b.substitute(f),
            Node::Sub(a, b) => a.substitute(f) - b.substitute(f),
            Node::Mul(a, b) => a.substitute(f) * b.substitute(f),
            Node::Div(a, b) => a.substitute(f) / b.substitute(f),
            Node::Pow(a, r) => a.substitute(f).pow(*r),
            Node::Call(func, a) => a.substitute(f).call(*func),
            Node::Atan2(a, b) => Expr::atan2(&a.substitute(f), &b.substitute(f)),
        }
    }

    /// Substitutes `x_i := coords[i]`.
    pub fn compose(&self, coords: &[Expr]) -> Expr {
        self.substitute(&|v| match v {
            Var::Coord(i) => coords.get(i).cloned(),
            _ => None,
        })
    }

    /// Fixes the parameter `t` to a number.
    pub fn at_t(&self, t: f64) -> Expr {
        self.substitute(&|v| (v == Var::T).then(|| Expr::num(t)))
    }

    /// Renumbers every coordinate `x_i` to `x_{i+offset}`.
    pub fn shift_coords(&self, offset: usize) -> Expr {
        self.substitute(&|v| match v {
            Var::Coord(i) => Some(Expr::x(i + offset)),
            _ => None,
        })
    }

    pub fn call(&self, func: Func) -> Expr {
        if let Some(c) = self.as_num() {
            let folded = match func {
                Func::Sin => Some(c.sin()),
                Func::Cos => Some(c.cos()),
                Func::Exp => Some(c.exp()),
                Func::Ln => (c > 0.0).then(|| c.ln()),
                Func::Sqrt => (c >= 0.0).then(|| c.sqrt()),
            };
            if let Some(v) = folded.filter(|v| v.is_finite()) {
                return Expr::num(v);
            }
        }
        Expr::wrap(Node::Call(func, self.clone()))
    }

    pub fn sin(&self) -> Expr {
        self.call(Func::Sin)
    }

    pub fn cos(&self) -> Expr {
        self.call(Func::Cos)
    }

    pub fn exp(&self) -> Expr {
        self.call(Func::Exp)
    }

    pub fn ln(&self) -> Expr {
        self.call(Func::Ln)
    }

    pub fn sqrt(&self) -> Expr {
        self.call(Func::Sqrt)
    }

    pub fn atan2(y: &Expr, x: &Expr) -> Expr {
        Expr::wrap(Node::Atan2(y.clone(), x.clone()))
    }

    pub fn pow(&self, r: Rational) -> Expr {
        if r.num == 0 {
            return Expr::one();
        }
        if r.num == 1 && r.den == 1 {
            return self.clone();
        }
        if let Some(c) = self.as_num() {
            if r.is_integer() {
                let v = c.powi(r.num as i32);
                if v.is_finite() && (c != 0.0 || r.num > 0) {
                    return Expr::num(v);
                }
            }
        }
        Expr::wrap(Node::Pow(self.clone(), r))
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow(Rational::int(n))
    }

    fn fold(a: &Expr, b: &Expr, op: fn(f64, f64) -> f64) -> Option<Expr> {
        let v = op(a.as_num()?, b.as_num()?);
        v.is_finite().then(|| Expr::num(v))
    }

    fn add_impl(a: &Expr, b: &Expr) -> Expr {
        if let Some(e) = Expr::fold(a, b, |x, y| x + y) {
            return e;
        }
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        Expr::wrap(Node::Add(a.clone(), b.clone()))
    }

    fn sub_impl(a: &Expr, b: &Expr) -> Expr {
        if let Some(e) = Expr::fold(a, b, |x, y| x - y) {
            return e;
        }
        if b.is_zero() {
            return a.clone();
        }
        if a.is_zero() {
            return -b;
        }
        Expr::wrap(Node::Sub(a.clone(), b.clone()))
    }

    fn mul_impl(a: &Expr, b: &Expr) -> Expr {
        if let Some(e) = Expr::fold(a, b, |x, y| x * y) {
            return e;
        }
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b.clone();
        }
        if b.is_one() {
            return a.clone();
        }
        if a.as_num() == Some(-1.0) {
            return -b;
        }
        if b.as_num() == Some(-1.0) {
            return -a;
        }
        Expr::wrap(Node::Mul(a.clone(), b.clone()))
    }

    fn div_impl(a: &Expr, b: &Expr) -> Expr {
        if b.as_num().is_some_and(|d| d != 0.0) {
            if let Some(e) = Expr::fold(a, b, |x, y| x / y) {
                return e;
            }
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        if b.is_one() {
            return a.clone();
        }
        Expr::wrap(Node::Div(a.clone(), b.clone()))
    }

    fn neg_impl(a: &Expr) -> Expr {
        match &*a.0 {
            Node::Num(c) => Expr::num(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::wrap(Node::Neg(a.clone())),
        }
    }

    /// Sum of a list of expressions (0 when empty).
    /// Balanced sum, so long sums stay shallow.
    pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut level: Vec<Expr> = items.into_iter().collect();
        if level.is_empty() {
            return Expr::zero();
        }
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            let mut it = level.into_iter();
            while let Some(a) = it.next() {
                next.push(match it.next() {
                    Some(b) => a + b,
                    None => a,
                });
            }
            level = next;
        }
        level.pop().unwrap()
    }
}

/// Central finite difference with step `1e-5 (1 + |x_i|)`.
pub fn fd_partial(f: &Expr, p: &[f64], i: usize) -> Result<f64, EvalError> {
    let h = 1e-5 * (1.0 + p[i].abs());
    let mut q = p.to_vec();
    q[i] = p[i] + h;
    let fp = f.eval(&q)?;
    q[i] = p[i] - h;
    let fm = f.eval(&q)?;
    Ok((fp - fm) / (2.0 * h))
}

macro_rules! binop {
    ($trait:ident, $method:ident, $imp:ident) => {
        impl std::ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$imp(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$imp(&self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$imp(self, &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$imp(self, rhs)
            }
        }
        impl std::ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$imp(&self, &Expr::num(rhs))
            }
        }
        impl std::ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$imp(self, &Expr::num(rhs))
            }
        }
        impl std::ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$imp(&Expr::num(self), &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$imp(&Expr::num(self), rhs)
            }
        }
    };
}

binop!(Add, add, add_impl);
binop!(Sub, sub, sub_impl);
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_impl(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_impl(self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::num(c)
    }
}

// ---------------------------------------------------------------- printing

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match &*e.0 {
        Node::Num(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => PREC_UNARY,
        Node::Num(_) | Node::Var(_) | Node::Call(..) | Node::Atan2(..) => PREC_ATOM,
        Node::Neg(_) => PREC_UNARY,
        Node::Add(..) | Node::Sub(..) => PREC_ADD,
        Node::Mul(..) | Node::Div(..) => PREC_MUL,
        Node::Pow(..) => 4,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Num(c) => write!(f, "{c}"),
            Node::Var(Var::Coord(i)) => write!(f, "x{}", i + 1),
            Node::Var(Var::T) => write!(f, "t"),
            Node::Var(Var::S) => write!(f, "s"),
            Node::Neg(a) => {
                if a.as_num().is_some() {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-")?;
                    write_at(f, a, PREC_UNARY)
                }
            }
            Node::Add(a, b) | Node::Sub(a, b) => {
                write_at(f, a, PREC_ADD)?;
                let op = if matches!(&*self.0, Node::Add(..)) { "+" } else { "-" };
                write!(f, " {op} ")?;
                write_at(f, b, PREC_MUL)
            }
            Node::Mul(a, b) | Node::Div(a, b) => {
                write_at(f, a, PREC_MUL)?;
                let op = if matches!(&*self.0, Node::Mul(..)) { "*" } else { "/" };
                write!(f, "{op}")?;
                write_at(f, b, PREC_UNARY)
            }
            Node::Pow(a, r) => {
                write_at(f, a, PREC_ATOM)?;
                write!(f, "^{r}")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Atan2(a, b) => write!(f, "atan2({a}, {b})"),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn find_coord(text: &str, needle: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(pos) = text[from..].find(needle) {
        let at = from + pos;
        let end = at + needle.len();
        let before_ok = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
        let after_ok = end >= bytes.len() || !bytes[end].is_ascii_digit();
        if before_ok && after_ok {
            return Some(at);
        }
        from = at + 1;
    }
    None
}

// ----------------------------------------------------------------- parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(u64),
    Ident(String),
    Sym(u8),
    End,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            let mut integral = true;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i < b.len() && b[i] == b'.' {
                integral = false;
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let tok = match lit.parse::<u64>() {
                Ok(n) if integral => Tok::Int(n),
                _ => Tok::Num(lit.parse::<f64>().map_err(|_| ParseError {
                    offset: start,
                    message: format!("malformed number '{lit}'"),
                })?),
            };
            out.push((tok, start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < b.len() && b[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                offset: i,
                message: format!("unexpected character '{ch}'"),
            });
        }
    }
    out.push((Tok::End, b.len()));
    Ok(out)
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, sym: u8) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(sym) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{}'", sym as char))
        }
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        if *self.peek() != Tok::End {
            return self.err("unexpected trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym(b'+') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::wrap(Node::Add(lhs, rhs));
                }
                Tok::Sym(b'-') => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::wrap(Node::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Sym(b'*') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::wrap(Node::Mul(lhs, rhs));
                }
                Tok::Sym(b'/') => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::wrap(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Sym(b'-') {
            // A minus directly on a literal is a negative constant unless a power follows.
            let literal = match self.peek_at(1) {
                Tok::Int(n) => Some(*n as f64),
                Tok::Num(c) => Some(*c),
                _ => None,
            };
            if let Some(c) = literal {
                if *self.peek_at(2) != Tok::Sym(b'^') {
                    self.bump();
                    self.bump();
                    return Ok(Expr::num(-c));
                }
            }
            self.bump();
            let inner = self.factor()?;
            return Ok(Expr::wrap(Node::Neg(inner)));
        }
        let base = self.base()?;
        if *self.peek() == Tok::Sym(b'^') {
            self.bump();
            let r = self.exponent()?;
            return Ok(Expr::wrap(Node::Pow(base, r)));
        }
        Ok(base)
    }

    fn int_lit(&mut self) -> Result<i64, ParseError> {
        let negative = if *self.peek() == Tok::Sym(b'-') {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(n) => {
                let v = i64::try_from(n).or_else(|_| self.err("exponent too large"))?;
                self.bump();
                Ok(if negative { -v } else { v })
            }
            Tok::Num(_) => self.err("exponent must be an integer or rational literal"),
            _ => self.err("expected exponent"),
        }
    }

    fn exponent(&mut self) -> Result<Rational, ParseError> {
        if *self.peek() == Tok::Sym(b'(') {
            self.bump();
            let num = self.int_lit()?;
            let den = if *self.peek() == Tok::Sym(b'/') {
                self.bump();
                let at = self.offset();
                let d = self.int_lit()?;
                if d == 0 {
                    return Err(ParseError {
                        offset: at,
                        message: "zero denominator in exponent".into(),
                    });
                }
                d
            } else {
                1
            };
            self.expect(b')')?;
            return Ok(Rational::new(num, den).expect("nonzero denominator"));
        }
        let num = self.int_lit()?;
        Ok(Rational::int(num))
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Int(n) => Ok(Expr::num(n as f64)),
            Tok::Num(c) => Ok(Expr::num(c)),
            Tok::Sym(b'(') => {
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name, at),
            Tok::End => Err(ParseError {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(ParseError {
                offset: at,
                message: format!("unexpected '{}'", c as char),
            }),
        }
    }

    fn ident(&mut self, name: &str, at: usize) -> Result<Expr, ParseError> {
        let func = match name {
            "t" => return Ok(Expr::t()),
            "s" => return Ok(Expr::s()),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            "atan2" => None,
            _ => {
                if let Some(digits) = name.strip_prefix('x') {
                    if !digits.is_empty() && digits.bytes().all(|c| c.is_ascii_digit()) {
                        let k: usize = digits.parse().map_err(|_| ParseError {
                            offset: at,
                            message: "coordinate index too large".into(),
                        })?;
                        if k == 0 {
                            return Err(ParseError {
                                offset: at,
                                message: "coordinates are numbered from x1".into(),
                            });
                        }
                        return Ok(Expr::x(k - 1));
                    }
                }
                return Err(ParseError {
                    offset: at,
                    message: format!("unknown identifier '{name}'"),
                });
            }
        };
        self.expect(b'(')?;
        let a = self.expr()?;
        match func {
            Some(func) => {
                self.expect(b')')?;
                Ok(Expr::wrap(Node::Call(func, a)))
            }
            None => {
                self.expect(b',')?;
                let b = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::wrap(Node::Atan2(a, b)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn long_sums_stay_shallow() {
        let e = Expr::sum((0..100_000).map(|i| Expr::x(i % 3) * (i % 7) as f64));
        let direct: f64 = (0..100_000).map(|i| [1.0, 2.0, 3.0][i % 3] * (i % 7) as f64).sum();
        assert!((e.eval(&[1.0, 2.0, 3.0]).unwrap() - direct).abs() < 1e-6 * direct);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("1 - 2 - 3").eval(&[]).unwrap(), -4.0);
        assert_eq!(p("2 * 3 ^ 2").eval(&[]).unwrap(), 18.0);
        assert_eq!(p("-2^2").eval(&[]).unwrap(), -4.0);
        assert_eq!(p("8 / 4 / 2").eval(&[]).unwrap(), 1.0);
        assert_eq!(p("2^(-1)").eval(&[]).unwrap(), 0.5);
        assert_eq!(p("4^(1/2)").eval(&[]).unwrap(), 2.0);
        assert_eq!(p("atan2(1, 1)").eval(&[]).unwrap(), std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn evaluates_symplectic_coefficient() {
        let e = p("-2*(x1*x4 - x2*x3)");
        let v = e.eval(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v, -2.0 * (4.0 - 6.0));
    }

    #[test]
    fn error_offsets() {
        assert_eq!(Expr::parse("x1^").unwrap_err().offset, 3);
        assert_eq!(Expr::parse("x1 + ").unwrap_err().offset, 5);
        assert_eq!(Expr::parse("foo(x1)").unwrap_err().offset, 0);
        assert_eq!(Expr::parse("x1 # 2").unwrap_err().offset, 3);
        assert_eq!(Expr::parse("x1^1.5").unwrap_err().offset, 3);
        assert_eq!(Expr::parse("sin(x1").unwrap_err().offset, 6);
        assert_eq!(Expr::parse("x0").unwrap_err().offset, 0);
        assert_eq!(Expr::parse_in("x1 + x3", 2).unwrap_err().offset, 5);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(p("ln(x1)").eval(&[0.0]), Err(EvalError::Domain { op: "ln", .. })));
        assert!(matches!(p("sqrt(x1)").eval(&[-1.0]), Err(EvalError::Domain { op: "sqrt", .. })));
        assert!(p("1/x1").eval(&[0.0]).is_err());
        assert!(p("x1^(1/3)").eval(&[-1.0]).is_err());
        assert!(p("x2").eval(&[1.0]).is_err());
    }

    #[test]
    fn derivative_of_sin_at_zero_is_exactly_one() {
        let d = p("sin(x1)").diff(Var::Coord(0));
        assert_eq!(d.eval(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn derivative_simplifies_constants() {
        assert_eq!(p("3*x1").diff(Var::Coord(0)), Expr::num(3.0));
        assert!(p("x2^3").diff(Var::Coord(0)).is_zero());
        assert_eq!(p("x1 + t").diff(Var::T), Expr::one());
    }

    #[test]
    fn derivative_matches_fd() {
        let f = p("exp(x1*x2)/(1 + x1^2) + atan2(x2, x1) - sqrt(2 + sin(x1))^3");
        let pt = [0.7, -0.4];
        for i in 0..2 {
            let a = f.diff(Var::Coord(i)).eval(&pt).unwrap();
            let n = fd_partial(&f, &pt, i).unwrap();
            assert!((a - n).abs() <= 1e-6 * (1.0 + a.abs()), "{a} vs {n}");
        }
    }

    #[test]
    fn negative_literals_round_trip() {
        for e in [
            Expr::num(-2.0),
            -Expr::num(2.0),
            -Expr::num(-2.0),
            Expr::wrap(Node::Pow(Expr::num(-2.0), Rational::int(2))),
            Expr::wrap(Node::Neg(Expr::wrap(Node::Pow(Expr::num(2.0), Rational::int(2))))),
            Expr::wrap(Node::Sub(Expr::x(0), Expr::num(-3.5))),
            Expr::wrap(Node::Mul(Expr::x(0), Expr::wrap(Node::Neg(Expr::x(1))))),
        ] {
            let s = e.to_string();
            assert_eq!(Expr::parse(&s).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn compose_and_shift() {
        let f = p("x1*x2");
        let g = f.compose(&[p("x2"), p("x1 + 1")]);
        assert_eq!(g.eval(&[2.0, 3.0]).unwrap(), 3.0 * 3.0);
        assert_eq!(f.shift_coords(2).max_coord(), Some(3));
        assert_eq!(p("x1*t").at_t(2.0).eval(&[3.0]).unwrap(), 6.0);
    }
}
