//! Tiny arithmetic language for closed-form field data in config files.
//!
//! Grammar (usual precedence, `^` right-associative, unary minus):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := factor (("*" | "/") factor)*
//! factor  := "-" factor | primary ("^" factor)?
//! primary := number | "x" | "y" | "pi" | func "(" expr ")" | "(" expr ")"
//! func    := sin | cos | tan | exp | log | sqrt | abs
//! ```
//!
//! Numbers accept decimal and scientific notation. Evaluation is over the
//! spatial point only; time-dependent data is out of scope by design.

use crate::error::{NsfError, Result};
use crate::grid::MAX_DIM;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            chars: text.char_indices().peekable(),
            text,
        };
        let e = p.expr()?;
        p.skip_ws();
        if let Some(&(pos, c)) = p.chars.peek() {
            return Err(p.fail(pos, format!("unexpected '{c}' after expression")));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64; MAX_DIM]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(a) => x[*a],
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Call(f, e) => f.apply(e.eval(x)),
        }
    }

    /// Highest spatial variable index used, if any; lets the config layer
    /// reject `y` in one-dimensional runs.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(a) => Some(*a),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(0) => write!(f, "x"),
            Expr::Var(_) => write!(f, "y"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, e) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Tan => "tan",
                    Func::Exp => "exp",
                    Func::Log => "log",
                    Func::Sqrt => "sqrt",
                    Func::Abs => "abs",
                };
                write!(f, "{name}({e})")
            }
        }
    }
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl Parser<'_> {
    fn fail(&self, pos: usize, msg: String) -> NsfError {
        NsfError::Expr(format!("{msg} at column {} in \"{}\"", pos + 1, self.text))
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(&(_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if matches!(self.chars.peek(), Some(&(_, c)) if c == want) {
            self.chars.next();
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
        let mut lhs = self.factor()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    // Unary minus binds looser than the power: -2^2 is -(2^2).
    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        let Some(&(pos, c)) = self.chars.peek() else {
            return Err(self.fail(self.text.len(), "unexpected end of input".into()));
        };
        if c == '(' {
            self.chars.next();
            let inner = self.expr()?;
            if !self.eat(')') {
                return Err(self.fail(pos, "unclosed parenthesis".into()));
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number(pos);
        }
        if c.is_ascii_alphabetic() {
            return self.ident(pos);
        }
        Err(self.fail(pos, format!("unexpected character '{c}'")))
    }

    fn number(&mut self, start: usize) -> Result<Expr> {
        let mut end = start;
        let mut seen_exp = false;
        while let Some(&(pos, c)) = self.chars.peek() {
            let take = c.is_ascii_digit()
                || c == '.'
                || (c == 'e' || c == 'E') && !seen_exp
                || (c == '+' || c == '-') && self.text[start..pos].ends_with(['e', 'E']);
            if !take {
                break;
            }
            if c == 'e' || c == 'E' {
                seen_exp = true;
            }
            end = pos + c.len_utf8();
            self.chars.next();
        }
        self.text[start..end]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.fail(start, format!("invalid number \"{}\"", &self.text[start..end])))
    }

    fn ident(&mut self, start: usize) -> Result<Expr> {
        let mut end = start;
        while let Some(&(pos, c)) = self.chars.peek() {
            if !c.is_ascii_alphanumeric() && c != '_' {
                break;
            }
            end = pos + c.len_utf8();
            self.chars.next();
        }
        let name = &self.text[start..end];
        match name {
            "x" => return Ok(Expr::Var(0)),
            "y" => return Ok(Expr::Var(1)),
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            _ => {}
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return Err(self.fail(start, format!("unknown identifier \"{name}\""))),
        };
        if !self.eat('(') {
            return Err(self.fail(end, format!("\"{name}\" requires parentheses")));
        }
        let arg = self.expr()?;
        if !self.eat(')') {
            return Err(self.fail(start, format!("unclosed argument of \"{name}\"")));
        }
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(src: &str, x: f64, y: f64) -> f64 {
        Expr::parse(src).unwrap().eval(&[x, y])
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0); // right-associative
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0); // the power binds first
        assert_eq!(ev("10 / 4 / 5", 0.0, 0.0), 0.5);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0), -4.0);
    }

    #[test]
    fn variables_functions_constants() {
        let v = ev("sin(pi * x) * cos(2 * pi * y)", 0.5, 0.0);
        assert!((v - 1.0).abs() < 1e-15);
        assert!((ev("exp(log(3.5))", 0.0, 0.0) - 3.5).abs() < 1e-15);
        assert_eq!(ev("sqrt(abs(-9))", 0.0, 0.0), 3.0);
        assert!((ev("tan(pi / 4)", 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((ev("pi", 0.0, 0.0) - PI).abs() < 1e-16);
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(ev("1.5e-3", 0.0, 0.0), 1.5e-3);
        assert_eq!(ev("2E2 + 1", 0.0, 0.0), 201.0);
        assert_eq!(ev(".25", 0.0, 0.0), 0.25);
    }

    #[test]
    fn numeric_oracle_against_closure() {
        // Random points compared against the same formula written in Rust.
        let e = Expr::parse("1 + 0.1 * sin(2*pi*x) * exp(-y^2) - x/(2 + y)").unwrap();
        let f = |x: f64, y: f64| {
            1.0 + 0.1 * (2.0 * PI * x).sin() * (-y * y).exp() - x / (2.0 + y)
        };
        for k in 0..50 {
            let x = k as f64 * 0.02;
            let y = (k as f64 * 0.7).fract();
            assert!((e.eval(&[x, y]) - f(x, y)).abs() < 1e-15);
        }
    }

    #[test]
    fn variable_usage_is_reported() {
        assert_eq!(Expr::parse("3.0").unwrap().max_var(), None);
        assert_eq!(Expr::parse("x + 1").unwrap().max_var(), Some(0));
        assert_eq!(Expr::parse("sin(y) * x").unwrap().max_var(), Some(1));
    }

    #[test]
    fn parse_errors_carry_position() {
        for bad in ["1 +", "sin x", "foo(2)", "(1 + 2", "1 & 2", "", "1 2"] {
            let err = Expr::parse(bad).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains("column"), "{bad}: {msg}");
        }
    }

    #[test]
    fn display_round_trips() {
        let src = "1 + 0.5 * sin(2*pi*x) - y^2 / 3";
        let e = Expr::parse(src).unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(e, again);
    }
}
