//! A small expression language for data functions of `(x, y)`.
//!
//! Grammar: numbers, `x`, `y`, `pi`, binary `+ - * / ^`, unary minus,
//! parentheses and the functions `sin cos tan sinh cosh exp sqrt log`.
//! `^` is right associative and binds tighter than unary minus.

use std::fmt;
use std::sync::Arc;

use crate::data::DataFn;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "sinh" => Self::Sinh,
            "cosh" => Self::Cosh,
            "exp" => Self::Exp,
            "sqrt" => Self::Sqrt,
            "log" => Self::Log,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Self::Sin => v.sin(),
            Self::Cos => v.cos(),
            Self::Tan => v.tan(),
            Self::Sinh => v.sinh(),
            Self::Cosh => v.cosh(),
            Self::Exp => v.exp(),
            Self::Sqrt => v.sqrt(),
            Self::Log => v.ln(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Sinh => "sinh",
            Self::Cosh => "cosh",
            Self::Exp => "exp",
            Self::Sqrt => "sqrt",
            Self::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
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
                .parse()
                .map_err(|_| Error::Expr(format!("bad number {text:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => {
                        let func = Func::from_name(&name)
                            .ok_or_else(|| Error::Expr(format!("unknown identifier {name:?}")))?;
                        if !self.eat('(') {
                            return Err(Error::Expr(format!("expected '(' after {name}")));
                        }
                        let arg = self.expr()?;
                        if !self.eat(')') {
                            return Err(Error::Expr(format!("missing ')' after {name}(...")));
                        }
                        Ok(Expr::Call(func, Box::new(arg)))
                    }
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Expr("missing ')'".into()));
                }
                Ok(e)
            }
            Some(t) => Err(Error::Expr(format!("unexpected token {t:?}"))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }
}

fn num(v: f64) -> Box<Expr> {
    Box::new(Expr::Num(v))
}

impl Expr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser {
            toks: tokenize(s)?,
            pos: 0,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expr(format!(
                "trailing input after position {} in {s:?}",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => {
                let base = a.eval(x, y);
                match b.as_ref() {
                    Expr::Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => base.powi(*n as i32),
                    _ => base.powf(b.eval(x, y)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, y)),
        }
    }

    /// Partial derivative with respect to `x` (`var = 0`) or `y` (`var = 1`).
    pub fn derivative(&self, var: usize) -> Expr {
        let d = |e: &Expr| Box::new(e.derivative(var));
        let b = |e: &Expr| Box::new(e.clone());
        let e = match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::X => Expr::Num(if var == 0 { 1.0 } else { 0.0 }),
            Expr::Y => Expr::Num(if var == 1 { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::Neg(d(a)),
            Expr::Add(l, r) => Expr::Add(d(l), d(r)),
            Expr::Sub(l, r) => Expr::Sub(d(l), d(r)),
            Expr::Mul(l, r) => Expr::Add(
                Box::new(Expr::Mul(d(l), b(r))),
                Box::new(Expr::Mul(b(l), d(r))),
            ),
            Expr::Div(l, r) => Expr::Div(
                Box::new(Expr::Sub(
                    Box::new(Expr::Mul(d(l), b(r))),
                    Box::new(Expr::Mul(b(l), d(r))),
                )),
                Box::new(Expr::Pow(b(r), num(2.0))),
            ),
            Expr::Pow(l, r) => {
                if r.is_constant() {
                    // d(u^c) = c u^(c-1) u'
                    let c = r.eval(0.0, 0.0);
                    Expr::Mul(
                        Box::new(Expr::Mul(num(c), Box::new(Expr::Pow(b(l), num(c - 1.0))))),
                        d(l),
                    )
                } else {
                    // d(u^v) = u^v (v' ln u + v u'/u)
                    Expr::Mul(
                        Box::new(self.clone()),
                        Box::new(Expr::Add(
                            Box::new(Expr::Mul(d(r), Box::new(Expr::Call(Func::Log, b(l))))),
                            Box::new(Expr::Div(Box::new(Expr::Mul(b(r), d(l))), b(l))),
                        )),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner: Expr = match f {
                    Func::Sin => Expr::Call(Func::Cos, b(a)),
                    Func::Cos => Expr::Neg(Box::new(Expr::Call(Func::Sin, b(a)))),
                    Func::Tan => Expr::Div(
                        num(1.0),
                        Box::new(Expr::Pow(Box::new(Expr::Call(Func::Cos, b(a))), num(2.0))),
                    ),
                    Func::Sinh => Expr::Call(Func::Cosh, b(a)),
                    Func::Cosh => Expr::Call(Func::Sinh, b(a)),
                    Func::Exp => Expr::Call(Func::Exp, b(a)),
                    Func::Sqrt => Expr::Div(
                        num(0.5),
                        Box::new(Expr::Call(Func::Sqrt, b(a))),
                    ),
                    Func::Log => Expr::Div(num(1.0), b(a)),
                };
                Expr::Mul(Box::new(inner), d(a))
            }
        };
        e.simplify()
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X | Expr::Y => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Folds constant subtrees and the trivial identities `0 + e`, `1 * e`, `0 * e`.
    pub fn simplify(&self) -> Expr {
        if self.is_constant() {
            return Expr::Num(self.eval(0.0, 0.0));
        }
        let is = |e: &Expr, v: f64| matches!(e, Expr::Num(n) if *n == v);
        match self {
            Expr::Neg(a) => Expr::Neg(Box::new(a.simplify())),
            Expr::Add(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&a, 0.0) {
                    b
                } else if is(&b, 0.0) {
                    a
                } else {
                    Expr::Add(Box::new(a), Box::new(b))
                }
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&b, 0.0) {
                    a
                } else if is(&a, 0.0) {
                    Expr::Neg(Box::new(b))
                } else {
                    Expr::Sub(Box::new(a), Box::new(b))
                }
            }
            Expr::Mul(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&a, 0.0) || is(&b, 0.0) {
                    Expr::Num(0.0)
                } else if is(&a, 1.0) {
                    b
                } else if is(&b, 1.0) {
                    a
                } else {
                    Expr::Mul(Box::new(a), Box::new(b))
                }
            }
            Expr::Div(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&a, 0.0) {
                    Expr::Num(0.0)
                } else if is(&b, 1.0) {
                    a
                } else {
                    Expr::Div(Box::new(a), Box::new(b))
                }
            }
            Expr::Pow(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&b, 1.0) {
                    a
                } else if is(&b, 0.0) {
                    Expr::Num(1.0)
                } else {
                    Expr::Pow(Box::new(a), Box::new(b))
                }
            }
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.simplify())),
            other => other.clone(),
        }
    }

    /// Replaces `x` and/or `y` by constants and folds the result.
    pub fn substitute(&self, x: Option<f64>, y: Option<f64>) -> Expr {
        fn go(e: &Expr, x: Option<f64>, y: Option<f64>) -> Expr {
            let s = |a: &Expr| Box::new(go(a, x, y));
            match e {
                Expr::X => x.map_or(Expr::X, Expr::Num),
                Expr::Y => y.map_or(Expr::Y, Expr::Num),
                Expr::Num(v) => Expr::Num(*v),
                Expr::Neg(a) => Expr::Neg(s(a)),
                Expr::Add(a, b) => Expr::Add(s(a), s(b)),
                Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
                Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
                Expr::Div(a, b) => Expr::Div(s(a), s(b)),
                Expr::Pow(a, b) => Expr::Pow(s(a), s(b)),
                Expr::Call(f, a) => Expr::Call(*f, s(a)),
            }
        }
        go(self, x, y).simplify()
    }

    /// Total polynomial degree in `(x, y)`, or `None` when the expression is not
    /// recognisably a polynomial.
    pub fn poly_degree(&self) -> Option<usize> {
        if self.is_constant() {
            return Some(0);
        }
        match self {
            Expr::X | Expr::Y => Some(1),
            Expr::Num(_) => Some(0),
            Expr::Neg(a) => a.poly_degree(),
            Expr::Add(a, b) | Expr::Sub(a, b) => Some(a.poly_degree()?.max(b.poly_degree()?)),
            Expr::Mul(a, b) => Some(a.poly_degree()? + b.poly_degree()?),
            Expr::Div(a, b) => {
                if b.is_constant() {
                    a.poly_degree()
                } else {
                    None
                }
            }
            Expr::Pow(a, b) => {
                if !b.is_constant() {
                    return None;
                }
                let n = b.eval(0.0, 0.0);
                if n >= 0.0 && n.fract() == 0.0 {
                    Some(a.poly_degree()? * n as usize)
                } else {
                    None
                }
            }
            Expr::Call(..) => None,
        }
    }

    /// Degree of the restriction to the segment `a → b`.
    pub fn degree_on_segment(&self, a: [f64; 2], b: [f64; 2]) -> Option<usize> {
        let fixed_x = (a[0] == b[0]).then_some(a[0]);
        let fixed_y = (a[1] == b[1]).then_some(a[1]);
        self.substitute(fixed_x, fixed_y).poly_degree()
    }

    /// Wraps the expression as a data function with symbolic gradient and
    /// degree metadata.
    pub fn into_data(self) -> DataFn {
        let e = Arc::new(self);
        let dx = Arc::new(e.derivative(0));
        let dy = Arc::new(e.derivative(1));
        let (ev, es) = (e.clone(), e.clone());
        let f = DataFn::new(move |p| ev.eval(p[0], p[1]));
        let f = match e.poly_degree() {
            Some(k) => DataFn::polynomial(k, move |p| e.eval(p[0], p[1])),
            None => f.with_segment_degree(move |a, b| es.degree_on_segment(a, b)),
        };
        f.with_grad(move |p| [dx.eval(p[0], p[1]), dy.eval(p[0], p[1])])
    }
}

/// Parses an expression straight into a data function.
pub fn parse_data(s: &str) -> Result<DataFn> {
    let e = Expr::parse(s)?;
    let zero = matches!(e.simplify(), Expr::Num(v) if v == 0.0);
    if zero {
        Ok(DataFn::zero())
    } else {
        Ok(e.into_data())
    }
}
