//! A small expression language for coefficients, right-hand sides and exact
//! solutions: variables `x`, `y`, the constant `pi`, operators `+ - * / ^`
//! (right-associative `^`, unary minus) and the functions `sin`, `cos`,
//! `exp`, `sqrt`, `abs`, `min`, `max`.
//!
//! Expressions are immutable after parsing; evaluation is pure.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("expression is not differentiable: {0}")]
    NonDifferentiable(String),
}

type ExprResult<T> = Result<T, ExprError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree over the variables `x` (index 0) and `y` (index 1).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// Parse source text into an expression.
    pub fn parse(src: &str) -> ExprResult<Expr> {
        Parser::new(src).parse()
    }

    /// Evaluate at a point; `p` needs at least as many coordinates as the
    /// highest variable used (`p[0]` = x, `p[1]` = y).
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => p.get(*i).copied().unwrap_or(0.0),
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Pow(a, b) => a.eval(p).powf(b.eval(p)),
            Expr::Neg(a) => -a.eval(p),
            Expr::Call(f, a) => {
                let v = a.eval(p);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
            Expr::Min(a, b) => a.eval(p).min(b.eval(p)),
            Expr::Max(a, b) => a.eval(p).max(b.eval(p)),
        }
    }

    /// Symbolic partial derivative with respect to variable `var`
    /// (0 = x, 1 = y). `abs`, `min`, `max` and non-constant exponents are
    /// rejected as non-differentiable.
    pub fn differentiate(&self, var: usize) -> ExprResult<Expr> {
        let d = match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => add(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Sub(a, b) => sub(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(var)?, (**b).clone()),
                mul((**a).clone(), b.differentiate(var)?),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.differentiate(var)?, (**b).clone()),
                    mul((**a).clone(), b.differentiate(var)?),
                );
                div(num, mul((**b).clone(), (**b).clone()))
            }
            Expr::Pow(a, b) => match **b {
                Expr::Num(e) => {
                    // e * a^(e-1) * a'
                    mul(
                        mul(Expr::Num(e), pow((**a).clone(), Expr::Num(e - 1.0))),
                        a.differentiate(var)?,
                    )
                }
                _ => {
                    return Err(ExprError::NonDifferentiable(
                        "power with non-constant exponent".into(),
                    ))
                }
            },
            Expr::Neg(a) => neg(a.differentiate(var)?),
            Expr::Call(f, a) => {
                let inner = a.differentiate(var)?;
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Expr::Call(Func::Sin, a.clone())),
                    Func::Exp => Expr::Call(Func::Exp, a.clone()),
                    Func::Sqrt => div(
                        Expr::Num(0.5),
                        Expr::Call(Func::Sqrt, a.clone()),
                    ),
                    Func::Abs => {
                        return Err(ExprError::NonDifferentiable("abs".into()));
                    }
                };
                mul(outer, inner)
            }
            Expr::Min(_, _) => return Err(ExprError::NonDifferentiable("min".into())),
            Expr::Max(_, _) => return Err(ExprError::NonDifferentiable("max".into())),
        };
        Ok(d.simplified())
    }

    /// Constant folding plus 0/1 identity elimination.
    pub fn simplified(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Add(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
                (Expr::Num(z), e) | (e, Expr::Num(z)) if z == 0.0 => e,
                (a, b) => add(a, b),
            },
            Expr::Sub(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
                (e, Expr::Num(z)) if z == 0.0 => e,
                (Expr::Num(z), e) if z == 0.0 => neg(e).simplified(),
                (a, b) => sub(a, b),
            },
            Expr::Mul(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
                (Expr::Num(z), _) | (_, Expr::Num(z)) if z == 0.0 => Expr::Num(0.0),
                (Expr::Num(o), e) | (e, Expr::Num(o)) if o == 1.0 => e,
                (a, b) => mul(a, b),
            },
            Expr::Div(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Num(x), Expr::Num(y)) if y != 0.0 => Expr::Num(x / y),
                (e, Expr::Num(o)) if o == 1.0 => e,
                (Expr::Num(z), b) if z == 0.0 && !matches!(b, Expr::Num(_)) => Expr::Num(0.0),
                (a, b) => div(a, b),
            },
            Expr::Pow(a, b) => match (a.simplified(), b.simplified()) {
                (Expr::Num(x), Expr::Num(y)) => Expr::Num(x.powf(y)),
                (e, Expr::Num(o)) if o == 1.0 => e,
                (_, Expr::Num(z)) if z == 0.0 => Expr::Num(1.0),
                (a, b) => pow(a, b),
            },
            Expr::Neg(a) => match a.simplified() {
                Expr::Num(x) => Expr::Num(-x),
                Expr::Neg(inner) => *inner,
                e => neg(e),
            },
            Expr::Call(f, a) => match a.simplified() {
                Expr::Num(x) => Expr::Num(Expr::Call(*f, Box::new(Expr::Num(x))).eval(&[])),
                e => Expr::Call(*f, Box::new(e)),
            },
            Expr::Min(a, b) => Expr::Min(Box::new(a.simplified()), Box::new(b.simplified())),
            Expr::Max(a, b) => Expr::Max(Box::new(a.simplified()), Box::new(b.simplified())),
        }
    }

    /// True if the tree contains `abs`, `min` or `max`.
    pub fn has_nonsmooth(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Call(Func::Abs, _) | Expr::Min(_, _) | Expr::Max(_, _) => true,
            Expr::Call(_, a) | Expr::Neg(a) => a.has_nonsmooth(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.has_nonsmooth() || b.has_nonsmooth(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(0) => write!(f, "x"),
            Expr::Var(_) => write!(f, "y"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::Add(Box::new(a), Box::new(b))
}
fn sub(a: Expr, b: Expr) -> Expr {
    Expr::Sub(Box::new(a), Box::new(b))
}
fn mul(a: Expr, b: Expr) -> Expr {
    Expr::Mul(Box::new(a), Box::new(b))
}
fn div(a: Expr, b: Expr) -> Expr {
    Expr::Div(Box::new(a), Box::new(b))
}
fn pow(a: Expr, b: Expr) -> Expr {
    Expr::Pow(Box::new(a), Box::new(b))
}
fn neg(a: Expr) -> Expr {
    Expr::Neg(Box::new(a))
}

// ---------------------------------------------------------------------------
// parser: recursive descent with precedence climbing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src: src.as_bytes(), pos: 0 }
    }

    fn parse(mut self) -> ExprResult<Expr> {
        let e = self.expression()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(ExprError::Syntax {
                offset: self.pos,
                msg: format!("unexpected `{}`", self.src[self.pos] as char),
            });
        }
        Ok(e)
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

    // additive
    fn expression(&mut self) -> ExprResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = add(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // multiplicative
    fn term(&mut self) -> ExprResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = mul(lhs, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> ExprResult<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(self.unary()?));
        }
        self.power()
    }

    // right-associative ^
    fn power(&mut self) -> ExprResult<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // exponent may itself start with a unary minus
            let exp = self.unary_power()?;
            return Ok(pow(base, exp));
        }
        Ok(base)
    }

    fn unary_power(&mut self) -> ExprResult<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(self.unary_power()?));
        }
        self.power()
    }

    fn atom(&mut self) -> ExprResult<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expression()?;
                if self.peek() != Some(b')') {
                    return Err(ExprError::Syntax { offset: self.pos, msg: "expected `)`".into() });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(ExprError::Syntax {
                offset: self.pos,
                msg: format!("unexpected `{}`", c as char),
            }),
            None => Err(ExprError::Syntax { offset: self.pos, msg: "unexpected end of input".into() }),
        }
    }

    fn number(&mut self) -> ExprResult<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // scientific notation
        if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Expr::Num).map_err(|_| ExprError::Syntax {
            offset: start,
            msg: format!("invalid number `{text}`"),
        })
    }

    fn identifier(&mut self) -> ExprResult<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        match name.as_str() {
            "x" => Ok(Expr::Var(0)),
            "y" => Ok(Expr::Var(1)),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "sin" | "cos" | "exp" | "sqrt" | "abs" => {
                let func = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    _ => Func::Abs,
                };
                let arg = self.call_args(&name, start, 1)?;
                Ok(Expr::Call(func, Box::new(arg.into_iter().next().unwrap())))
            }
            "min" | "max" => {
                let mut args = self.call_args(&name, start, 2)?.into_iter();
                let (a, b) = (args.next().unwrap(), args.next().unwrap());
                if name == "min" {
                    Ok(Expr::Min(Box::new(a), Box::new(b)))
                } else {
                    Ok(Expr::Max(Box::new(a), Box::new(b)))
                }
            }
            _ => Err(ExprError::UnknownIdentifier { name, offset: start }),
        }
    }

    fn call_args(&mut self, name: &str, start: usize, count: usize) -> ExprResult<Vec<Expr>> {
        if self.peek() != Some(b'(') {
            return Err(ExprError::Syntax {
                offset: start,
                msg: format!("`{name}` must be called with parentheses"),
            });
        }
        self.pos += 1;
        let mut args = vec![self.expression()?];
        while args.len() < count {
            if self.peek() != Some(b',') {
                return Err(ExprError::Syntax {
                    offset: self.pos,
                    msg: format!("`{name}` takes {count} arguments"),
                });
            }
            self.pos += 1;
            args.push(self.expression()?);
        }
        if self.peek() != Some(b')') {
            return Err(ExprError::Syntax { offset: self.pos, msg: "expected `)`".into() });
        }
        self.pos += 1;
        Ok(args)
    }
}
