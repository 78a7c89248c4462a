//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' '-'? integer)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! func   := sin | cos | exp | sqrt
//! number := digits ('.' digits)?
//! ```
//!
//! Whitespace is insignificant. `p/q` rationals are ordinary division.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::numeric::{Func, Node, NumericExpr};
use super::rational::RationalExpr;
use super::var::Var;
use super::ExprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Exact,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parsed {
    Exact(RationalExpr),
    Numeric(NumericExpr),
}

/// Parse `text` over the declared variables.
pub fn parse_expression(text: &str, vars: &[Var], mode: ParseMode) -> Result<Parsed, ExprError> {
    let node = parse_node(text)?;
    let mut used = Vec::new();
    node.collect_vars(&mut used);
    if let Some(v) = used.iter().find(|v| !vars.contains(v)) {
        return Err(ExprError::UnknownVariable(v.name().to_string()));
    }
    match mode {
        ParseMode::Exact => Ok(Parsed::Exact(node.to_rational()?)),
        ParseMode::Numeric => Ok(Parsed::Numeric(NumericExpr::new(vars.to_vec(), node)?)),
    }
}

pub fn parse_rational(text: &str, vars: &[Var]) -> Result<RationalExpr, ExprError> {
    match parse_expression(text, vars, ParseMode::Exact)? {
        Parsed::Exact(e) => Ok(e),
        Parsed::Numeric(_) => unreachable!(),
    }
}

pub fn parse_numeric(text: &str, vars: &[Var]) -> Result<NumericExpr, ExprError> {
    match parse_expression(text, vars, ParseMode::Numeric)? {
        Parsed::Numeric(e) => Ok(e),
        Parsed::Exact(_) => unreachable!(),
    }
}

/// Parse to a bare tree without checking variables.
pub fn parse_node(text: &str) -> Result<Node, ExprError> {
    let mut p = Parser { src: text, pos: 0 };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                let rhs = self.term()?;
                lhs = Node::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat('-') {
                let rhs = self.term()?;
                lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat('/') {
                let rhs = self.unary()?;
                lhs = Node::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(match inner {
                Node::Num(c) => Node::Num(-c),
                other => Node::Neg(Box::new(other)),
            });
        }
        if self.eat('+') {
            return self.unary();
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        let base = self.base()?;
        if self.eat('^') {
            let neg = self.eat('-');
            self.skip_ws();
            let start = self.pos;
            let digits = self.take_while(|c| c.is_ascii_digit());
            if digits.is_empty() {
                return Err(self.error("expected integer exponent"));
            }
            let e: i32 = digits.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: "exponent too large".into(),
            })?;
            return Ok(Node::Pow(Box::new(base), if neg { -e } else { e }));
        }
        Ok(base)
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_raw() {
            if f(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        &self.src[start..self.pos]
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                if let Some(func) = Func::from_name(name) {
                    if self.eat('(') {
                        let arg = self.expr()?;
                        if !self.eat(')') {
                            return Err(self.error("expected ')'"));
                        }
                        return Ok(Node::Func(func, Box::new(arg)));
                    }
                    self.pos = start;
                    return Err(self.error("expected '(' after function name"));
                }
                Ok(Node::Var(Var::new(name)))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let int_part = self.take_while(|c| c.is_ascii_digit());
        let mut frac_part = "";
        if self.peek_raw() == Some('.') {
            self.pos += 1;
            frac_part = self.take_while(|c| c.is_ascii_digit());
        }
        if int_part.is_empty() && frac_part.is_empty() {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        let digits = format!("{int_part}{frac_part}");
        let n: BigInt = digits.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: "malformed number".into(),
        })?;
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        let v = BigRational::new(n, den);
        Ok(Node::Num(if v.is_zero() { BigRational::zero() } else { v }))
    }
}
