//! A small expression language for user-supplied nonlinearities and initial
//! data: numbers, one variable, `+ - * /`, integer powers `^`, `sin`, `cos`
//! and the constant `pi`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | var | 'pi' | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    /// Parses `src` with `var` as the only admissible identifier.
    /// `field` names the config entry in error messages.
    pub fn parse(src: &str, var: &str, field: &str) -> Result<Expr> {
        let tokens = tokenize(src).map_err(|m| Error::usage(field, m))?;
        let mut p = Parser {
            tokens,
            pos: 0,
            var,
        };
        let e = p.expr().map_err(|m| Error::usage(field, m))?;
        if p.pos != p.tokens.len() {
            return Err(Error::usage(
                field,
                format!("unexpected `{}` after a complete expression", p.tokens[p.pos]),
            ));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, n) => a.eval(x).powi(*n as i32),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
        }
    }

    /// Symbolic derivative with respect to the variable.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        let b = Box::new;
        match self {
            Const(_) => Const(0.0),
            Var => Const(1.0),
            Neg(a) => Neg(b(a.derivative())),
            Add(l, r) => Add(b(l.derivative()), b(r.derivative())),
            Sub(l, r) => Sub(b(l.derivative()), b(r.derivative())),
            Mul(l, r) => Add(
                b(Mul(b(l.derivative()), r.clone())),
                b(Mul(l.clone(), b(r.derivative()))),
            ),
            Div(l, r) => Div(
                b(Sub(
                    b(Mul(b(l.derivative()), r.clone())),
                    b(Mul(l.clone(), b(r.derivative()))),
                )),
                b(Pow(r.clone(), 2)),
            ),
            Pow(_, 0) => Const(0.0),
            Pow(a, n) => Mul(
                b(Mul(b(Const(*n as f64)), b(Pow(a.clone(), n - 1)))),
                b(a.derivative()),
            ),
            Sin(a) => Mul(b(Cos(a.clone())), b(a.derivative())),
            Cos(a) => Neg(b(Mul(b(Sin(a.clone())), b(a.derivative())))),
        }
    }

    /// Whether the expression is the constant `value` (after folding).
    pub fn is_constant(&self, value: f64) -> bool {
        self.fold().map(|c| c == value).unwrap_or(false)
    }

    fn fold(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var => None,
            Expr::Neg(a) => a.fold().map(|v| -v),
            Expr::Add(a, b) => Some(a.fold()? + b.fold()?),
            Expr::Sub(a, b) => Some(a.fold()? - b.fold()?),
            Expr::Mul(a, b) => match (a.fold(), b.fold()) {
                (Some(0.0), _) | (_, Some(0.0)) => Some(0.0),
                (Some(x), Some(y)) => Some(x * y),
                _ => None,
            },
            Expr::Div(a, b) => Some(a.fold()? / b.fold()?),
            Expr::Pow(a, n) => Some(a.fold()?.powi(*n as i32)),
            Expr::Sin(a) => a.fold().map(f64::sin),
            Expr::Cos(a) => a.fold().map(f64::cos),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(n) => write!(f, "{n}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> std::result::Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
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
            // Scientific notation: 1e-3, 2.5E+4.
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
                .parse::<f64>()
                .map_err(|_| format!("malformed number `{text}`"))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    if out.is_empty() {
        return Err("empty expression".into());
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    var: &'a str,
}

type PResult = std::result::Result<Expr, String>;

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> std::result::Result<(), String> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(match self.peek() {
                Some(t) => format!("expected `{op}`, found `{t}`"),
                None => format!("expected `{op}` at end of input"),
            })
        }
    }

    fn expr(&mut self) -> PResult {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> PResult {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult {
        if self.eat_op('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> PResult {
        let base = self.atom()?;
        if self.eat_op('^') {
            match self.peek().cloned() {
                Some(Token::Num(n)) if n >= 0.0 && n.fract() == 0.0 && n <= 64.0 => {
                    self.pos += 1;
                    Ok(Expr::Pow(Box::new(base), n as u32))
                }
                Some(t) => Err(format!(
                    "exponent must be a nonnegative integer literal, found `{t}`"
                )),
                None => Err("missing exponent after `^`".into()),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> PResult {
        let tok = self.peek().cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Token::Ident(name) if name == self.var => Ok(Expr::Var),
            Token::Ident(name) if name == "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            Token::Ident(name) if name == "sin" || name == "cos" => {
                self.expect_op('(')?;
                let arg = Box::new(self.expr()?);
                self.expect_op(')')?;
                Ok(if name == "sin" {
                    Expr::Sin(arg)
                } else {
                    Expr::Cos(arg)
                })
            }
            Token::Ident(name) => Err(format!(
                "unknown identifier `{name}` (the variable here is `{}`)",
                self.var
            )),
            Token::Op(c) => Err(format!("unexpected `{c}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s, "u", "f").unwrap()
    }

    #[test]
    fn precedence_and_evaluation() {
        assert_eq!(p("1 + 2 * 3").eval(0.0), 7.0);
        assert_eq!(p("-u^2").eval(3.0), -9.0);
        assert_eq!(p("(1 + u)^3").eval(1.0), 8.0);
        assert_eq!(p("2 * u - u / 4").eval(4.0), 7.0);
        assert!((p("-sin(u)").eval(1.0) + 1f64.sin()).abs() < 1e-15);
        assert!((p("1 - cos(u)").eval(0.3) - (1.0 - 0.3f64.cos())).abs() < 1e-15);
        assert!((p("sin(2*pi*u)").eval(0.25) - 1.0).abs() < 1e-15);
        assert_eq!(p("1.5e-1").eval(0.0), 0.15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for src in ["u^3 - 2*u", "sin(2*pi*u)", "cos(u)*u", "u/(1+u^2)", "-sin(u)", "3"] {
            let e = p(src);
            let d = e.derivative();
            for x in [-1.3, 0.0, 0.4, 2.2] {
                let eps = 1e-6;
                let fd = (e.eval(x + eps) - e.eval(x - eps)) / (2.0 * eps);
                assert!((d.eval(x) - fd).abs() < 1e-6, "{src} at {x}");
            }
        }
    }

    #[test]
    fn constants_are_detected() {
        assert!(p("1").is_constant(1.0));
        assert!(p("0*u").is_constant(0.0));
        assert!(!p("u").is_constant(1.0));
    }

    #[test]
    fn errors_name_the_field() {
        for bad in ["", "u +", "sin u", "exp(u)", "u ^ 1.5", "x", "(u", "u $ 2", "1 2"] {
            match Expr::parse(bad, "u", "g") {
                Err(Error::Usage { field, .. }) => assert_eq!(field, "g"),
                other => panic!("`{bad}` gave {other:?}"),
            }
        }
    }

    #[test]
    fn display_round_trips() {
        let e = p("-sin(u) + 2*u^2");
        let back = Expr::parse(&e.to_string(), "x", "f").unwrap();
        for x in [0.1, 0.7, -2.0] {
            assert_eq!(e.eval(x), back.eval(x));
        }
    }
}
