use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::{fmt_rational, rational_to_f64};
use super::rational::RationalExpr;
use super::var::Var;
use super::ExprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree produced by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Num(BigRational),
    Var(Var),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, i32),
    Func(Func, Box<Node>),
}

impl Node {
    pub fn num(c: BigRational) -> Node {
        Node::Num(c)
    }

    pub fn is_transcendental(&self) -> bool {
        match self {
            Node::Num(_) | Node::Var(_) => false,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_transcendental() || b.is_transcendental()
            }
            Node::Neg(a) | Node::Pow(a, _) => a.is_transcendental(),
            Node::Func(..) => true,
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Node::Num(_) => {}
            Node::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => a.collect_vars(out),
        }
    }

    /// Exact conversion; fails on transcendental nodes.
    pub fn to_rational(&self) -> Result<RationalExpr, ExprError> {
        Ok(match self {
            Node::Num(c) => RationalExpr::constant(c.clone()),
            Node::Var(v) => RationalExpr::var(v.clone()),
            Node::Add(a, b) => &a.to_rational()? + &b.to_rational()?,
            Node::Sub(a, b) => &a.to_rational()? - &b.to_rational()?,
            Node::Mul(a, b) => &a.to_rational()? * &b.to_rational()?,
            Node::Div(a, b) => a.to_rational()?.checked_div(&b.to_rational()?)?,
            Node::Neg(a) => -&a.to_rational()?,
            Node::Pow(a, e) => a.to_rational()?.powi(*e)?,
            Node::Func(..) => return Err(ExprError::TranscendentalInExactMode),
        })
    }

    pub fn eval(&self, point: &dyn Fn(&Var) -> Option<Complex64>) -> Result<Complex64, ExprError> {
        let z = match self {
            Node::Num(c) => Complex64::new(rational_to_f64(c), 0.0),
            Node::Var(v) => point(v).ok_or_else(|| ExprError::UnknownVariable(v.name().to_string()))?,
            Node::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Node::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Node::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Node::Div(a, b) => {
                let d = b.eval(point)?;
                if d.is_zero() {
                    return Err(ExprError::PoleAtPoint);
                }
                a.eval(point)? / d
            }
            Node::Neg(a) => -a.eval(point)?,
            Node::Pow(a, e) => {
                let base = a.eval(point)?;
                if *e < 0 && base.is_zero() {
                    return Err(ExprError::PoleAtPoint);
                }
                base.powi(*e)
            }
            Node::Func(f, a) => {
                let x = a.eval(point)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    // principal branch
                    Func::Sqrt => x.sqrt(),
                }
            }
        };
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(ExprError::DomainError);
        }
        Ok(z)
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Num(c) if !c.is_integer() => 2,
            Node::Num(c) if *c < BigRational::zero() => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paren = |f: &mut fmt::Formatter<'_>, n: &Node, min: u8| -> fmt::Result {
            if n.precedence() < min {
                write!(f, "({n})")
            } else {
                write!(f, "{n}")
            }
        };
        match self {
            Node::Num(c) => f.write_str(&fmt_rational(c)),
            Node::Var(v) => write!(f, "{v}"),
            Node::Add(a, b) => {
                paren(f, a, 1)?;
                f.write_str(" + ")?;
                paren(f, b, 2)
            }
            Node::Sub(a, b) => {
                paren(f, a, 1)?;
                f.write_str(" - ")?;
                paren(f, b, 2)
            }
            Node::Mul(a, b) => {
                paren(f, a, 2)?;
                f.write_str("*")?;
                paren(f, b, 3)
            }
            Node::Div(a, b) => {
                paren(f, a, 2)?;
                f.write_str("/")?;
                paren(f, b, 4)
            }
            Node::Neg(a) => {
                f.write_str("-")?;
                paren(f, a, 3)
            }
            Node::Pow(a, e) => {
                paren(f, a, 5)?;
                write!(f, "^{e}")
            }
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A double-precision evaluable expression over declared variables, which
/// may contain `sin`, `cos`, `exp` and `sqrt`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NumericExpr {
    vars: Vec<Var>,
    root: Node,
}

impl NumericExpr {
    /// Wrap a tree; every variable it references must be declared.
    pub fn new(vars: Vec<Var>, root: Node) -> Result<Self, ExprError> {
        let mut used = Vec::new();
        root.collect_vars(&mut used);
        if let Some(v) = used.iter().find(|v| !vars.contains(v)) {
            return Err(ExprError::UnknownVariable(v.name().to_string()));
        }
        Ok(NumericExpr { vars, root })
    }

    pub fn constant(c: BigRational) -> Self {
        NumericExpr { vars: Vec::new(), root: Node::Num(c) }
    }

    pub fn from_rational(vars: Vec<Var>, e: &RationalExpr) -> Result<Self, ExprError> {
        let root = super::parse::parse_node(&e.to_string())?;
        NumericExpr::new(vars, root)
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, point: &dyn Fn(&Var) -> Option<Complex64>) -> Result<Complex64, ExprError> {
        self.root.eval(point)
    }

    /// Evaluate an expression in one variable at a real argument.
    pub fn eval_at(&self, x: f64) -> Result<Complex64, ExprError> {
        let z = Complex64::new(x, 0.0);
        self.root.eval(&|_| Some(z))
    }

    pub fn to_rational(&self) -> Result<RationalExpr, ExprError> {
        self.root.to_rational()
    }

    pub fn is_rational(&self) -> bool {
        !self.root.is_transcendental()
    }

    /// `sum_k c_k * e_k`, dropping zero weights.
    pub fn linear_combination(vars: Vec<Var>, terms: &[(BigRational, &NumericExpr)]) -> Self {
        let mut root: Option<Node> = None;
        for (c, e) in terms {
            if c.is_zero() {
                continue;
            }
            let term = if c.is_one() {
                e.root.clone()
            } else if *c == -BigRational::one() {
                Node::Neg(Box::new(e.root.clone()))
            } else {
                Node::Mul(Box::new(Node::Num(c.clone())), Box::new(e.root.clone()))
            };
            root = Some(match root {
                None => term,
                Some(r) => Node::Add(Box::new(r), Box::new(term)),
            });
        }
        NumericExpr { vars, root: root.unwrap_or_else(|| Node::Num(BigRational::zero())) }
    }
}

impl fmt::Display for NumericExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}
