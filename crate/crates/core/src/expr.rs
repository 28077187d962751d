//! Forcing expressions: `+ - * /`, unary minus, parentheses, `sin cos exp`,
//! numeric literals, `pi`, and the coordinates `x`, `y`. The bare token `one`
//! denotes the constant 1.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unexpected {found} at offset {pos}")]
    UnexpectedToken { pos: usize, found: String },
    #[error("unknown identifier {name:?} at offset {pos}")]
    UnknownIdent { pos: usize, name: String },
    #[error("invalid number {text:?} at offset {pos}")]
    BadNumber { pos: usize, text: String },
    #[error("empty expression")]
    Empty,
    #[error("expression nested too deeply")]
    TooDeep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
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
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Call(f, e) => {
                let v = e.eval(x, y);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

const MAX_DEPTH: usize = 64;

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < src.len() {
        let ch = src[pos..].chars().next().expect("in bounds");
        if ch.is_whitespace() {
            pos += ch.len_utf8();
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = pos;
            while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
                pos += 1;
            }
            if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                let mut p = pos + 1;
                if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                    p += 1;
                }
                if p < bytes.len() && bytes[p].is_ascii_digit() {
                    while p < bytes.len() && bytes[p].is_ascii_digit() {
                        p += 1;
                    }
                    pos = p;
                }
            }
            let text = &src[start..pos];
            let v: f64 = text.parse().map_err(|_| ExprError::BadNumber {
                pos: start,
                text: text.to_string(),
            })?;
            out.push((start, Tok::Num(v)));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = pos;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            out.push((start, Tok::Ident(src[start..pos].to_string())));
        } else if "+-*/()".contains(ch) {
            out.push((pos, Tok::Op(ch)));
            pos += 1;
        } else {
            return Err(ExprError::UnexpectedChar { pos, ch });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn unexpected(&self) -> ExprError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Num(v)) => format!("number {v}"),
            Some(Tok::Ident(s)) => format!("identifier {s:?}"),
            Some(Tok::Op(c)) => format!("{c:?}"),
        };
        ExprError::UnexpectedToken {
            pos: self.pos(),
            found,
        }
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ExprError::TooDeep);
        }
        Ok(())
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
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

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            self.enter()?;
            let e = Expr::Neg(Box::new(self.unary()?));
            self.depth -= 1;
            return Ok(e);
        }
        if self.eat('+') {
            self.enter()?;
            let e = self.unary()?;
            self.depth -= 1;
            return Ok(e);
        }
        self.atom()
    }

    fn group(&mut self) -> Result<Expr, ExprError> {
        if !self.eat('(') {
            return Err(self.unexpected());
        }
        self.enter()?;
        let e = self.sum()?;
        self.depth -= 1;
        if !self.eat(')') {
            return Err(self.unexpected());
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => self.group(),
            Some(Tok::Ident(name)) => {
                self.at += 1;
                let func = match name.as_str() {
                    "x" => return Ok(Expr::X),
                    "y" => return Ok(Expr::Y),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => return Err(ExprError::UnknownIdent { pos, name }),
                };
                Ok(Expr::Call(func, Box::new(self.group()?)))
            }
            _ => Err(self.unexpected()),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    if src.trim() == "one" {
        return Ok(Expr::Num(1.0));
    }
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(ExprError::Empty);
    }
    let mut p = Parser {
        toks,
        at: 0,
        end: src.len(),
        depth: 0,
    };
    let e = p.sum()?;
    if p.at != p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        parse_expr(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("5 - 2 - 1", 0.0, 0.0), 2.0);
        assert_eq!(ev("-(2 + 3) * 2", 0.0, 0.0), -10.0);
        assert_eq!(ev("--3", 0.0, 0.0), 3.0);
        assert_eq!(ev("2.5e-1 * 4", 0.0, 0.0), 1.0);
    }

    #[test]
    fn functions_and_coordinates() {
        let v = ev("cos(3*x)*sin(2*y)", 0.3, 0.7);
        assert!((v - (0.9f64).cos() * (1.4f64).sin()).abs() < 1e-15);
        let v = ev("2*pi*pi*sin(pi*x)*sin(pi*y)", 0.5, 0.5);
        assert!((v - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert_eq!(ev("exp(0)", 0.0, 0.0), 1.0);
        assert_eq!(ev("one", 0.2, 0.9), 1.0);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse_expr(""), Err(ExprError::Empty));
        assert!(matches!(parse_expr("1 +"), Err(ExprError::UnexpectedToken { pos: 3, .. })));
        assert!(matches!(parse_expr("foo(x)"), Err(ExprError::UnknownIdent { pos: 0, .. })));
        assert!(matches!(parse_expr("x $ y"), Err(ExprError::UnexpectedChar { pos: 2, ch: '$' })));
        assert!(matches!(parse_expr("sin x"), Err(ExprError::UnexpectedToken { .. })));
        assert!(matches!(parse_expr("(x"), Err(ExprError::UnexpectedToken { .. })));
        assert!(matches!(parse_expr("1.2.3"), Err(ExprError::BadNumber { .. })));
        assert!(matches!(parse_expr("x y"), Err(ExprError::UnexpectedToken { pos: 2, .. })));
        let deep = "(".repeat(200) + "x" + &")".repeat(200);
        assert_eq!(parse_expr(&deep), Err(ExprError::TooDeep));
    }
}
