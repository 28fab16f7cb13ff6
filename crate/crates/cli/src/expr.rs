//! Coefficient expressions over the coordinates `x`, `y`.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | primary
//! primary := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'abs'
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column} (token `{token}`)")]
pub struct ExprError {
    pub message: String,
    pub token: String,
    /// 1-based character column in the expression.
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
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
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            Some(t) => Err(t.error("unexpected trailing input")),
            None => Ok(e),
        }
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
            Expr::Call(f, a) => {
                let v = a.eval(x, y);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    text: String,
    column: usize,
}

impl Token {
    fn error(&self, message: &str) -> ExprError {
        ExprError { message: message.to_string(), token: self.text.clone(), column: self.column }
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            let v: f64 = text
                .parse()
                .map_err(|_| ExprError { message: "malformed number".into(), token: text.clone(), column })?;
            out.push(Token { kind: Kind::Num(v), text, column });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { kind: Kind::Ident(text.clone()), text, column });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' => Kind::Op(c),
            '(' => Kind::LParen,
            ')' => Kind::RParen,
            _ => return Err(ExprError { message: "unexpected character".into(), token: c.to_string(), column }),
        };
        out.push(Token { kind, text: c.to_string(), column });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, ExprError> {
        let t = self.tokens.get(self.pos).cloned().ok_or_else(|| ExprError {
            message: "unexpected end of expression".into(),
            token: "<end>".into(),
            column: self.tokens.last().map_or(1, |t| t.column + t.text.chars().count()),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token { kind: Kind::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(self.unary()?.into()))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let t = self.next()?;
        match &t.kind {
            Kind::Num(v) => Ok(Expr::Num(*v)),
            Kind::LParen => {
                let e = self.expr()?;
                self.close(&t)?;
                Ok(e)
            }
            Kind::Ident(name) => {
                let func = match name.as_str() {
                    "x" => return Ok(Expr::X),
                    "y" => return Ok(Expr::Y),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "abs" => Func::Abs,
                    _ => return Err(t.error("unknown identifier")),
                };
                let open = self.next()?;
                if open.kind != Kind::LParen {
                    return Err(open.error(&format!("expected `(` after `{func}`")));
                }
                let arg = self.expr()?;
                self.close(&open)?;
                Ok(Expr::Call(func, arg.into()))
            }
            Kind::Op(_) | Kind::RParen => Err(t.error("expected a number, coordinate, function or `(`")),
        }
    }

    fn close(&mut self, open: &Token) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token { kind: Kind::RParen, .. }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(t.error("expected `)`")),
            None => Err(open.error("unclosed `(`")),
        }
    }
}
