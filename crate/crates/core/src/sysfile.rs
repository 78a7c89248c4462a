//! System files: `[params]`, `[vars]`, `[system]` and `[coeff-domain]` sections.
//!
//! ```text
//! [params]
//! beta = 8/3
//! [vars]
//! time = t
//! x, y
//! [system]
//! x' = y
//! y' = -beta*x + t*y
//! [coeff-domain]
//! poles = 0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::BigRational;
use thiserror::Error;

use crate::expr::{parse_node, parse_rational, ExprError, Node, Var};
use crate::vfield::{FieldError, TimeSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SysFileError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("system file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("system file line {line}: {source}")]
    Expr { line: usize, source: ExprError },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub params: BTreeMap<String, BigRational>,
    /// Right-hand sides as written, in variable order.
    pub equations: Vec<String>,
    pub system: TimeSystem,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Params,
    Vars,
    System,
    Domain,
}

fn substitute(node: &Node, params: &BTreeMap<String, BigRational>) -> Node {
    let b = |n: &Node| Box::new(substitute(n, params));
    match node {
        Node::Var(v) => match params.get(v.name()) {
            Some(c) => Node::Num(c.clone()),
            None => node.clone(),
        },
        Node::Num(_) => node.clone(),
        Node::Add(a, c) => Node::Add(b(a), b(c)),
        Node::Sub(a, c) => Node::Sub(b(a), b(c)),
        Node::Mul(a, c) => Node::Mul(b(a), b(c)),
        Node::Div(a, c) => Node::Div(b(a), b(c)),
        Node::Neg(a) => Node::Neg(b(a)),
        Node::Pow(a, e) => Node::Pow(b(a), *e),
        Node::Func(f, a) => Node::Func(*f, b(a)),
    }
}

fn constant(text: &str, line: usize) -> Result<BigRational, SysFileError> {
    parse_rational(text, &[])
        .map_err(|source| SysFileError::Expr { line, source })?
        .as_constant()
        .ok_or_else(|| SysFileError::Format { line, message: format!("`{text}` is not a rational constant") })
}

pub fn parse_system(text: &str) -> Result<SystemFile, SysFileError> {
    let fmt = |line: usize, message: String| SysFileError::Format { line, message };
    let mut section = Section::None;
    let mut params = BTreeMap::new();
    let mut time = Var::new("t");
    let mut vars: Vec<Var> = Vec::new();
    let mut rhs: BTreeMap<Var, (usize, String)> = BTreeMap::new();
    let mut poles = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|x| x.strip_suffix(']')) {
            section = match name.trim() {
                "params" => Section::Params,
                "vars" => Section::Vars,
                "system" => Section::System,
                "coeff-domain" => Section::Domain,
                other => return Err(fmt(line, format!("unknown section [{other}]"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(fmt(line, "content before the first section".into())),
            Section::Params => {
                let (k, v) = s.split_once('=').ok_or_else(|| fmt(line, "expected `name = value`".into()))?;
                if params.insert(k.trim().to_string(), constant(v.trim(), line)?).is_some() {
                    return Err(fmt(line, format!("parameter `{}` given twice", k.trim())));
                }
            }
            Section::Vars => {
                if let Some((k, v)) = s.split_once('=') {
                    if k.trim() != "time" {
                        return Err(fmt(line, format!("unknown key `{}`", k.trim())));
                    }
                    time = Var::new(v.trim());
                    continue;
                }
                for name in s.split(|c: char| c == ',' || c.is_whitespace()).filter(|x| !x.is_empty()) {
                    let v = Var::new(name);
                    if vars.contains(&v) {
                        return Err(fmt(line, format!("variable `{name}` declared twice")));
                    }
                    vars.push(v);
                }
            }
            Section::System => {
                let (lhs, e) = s.split_once('=').ok_or_else(|| fmt(line, "expected `x' = expression`".into()))?;
                let name = lhs.trim().strip_suffix('\'').ok_or_else(|| fmt(line, "left side must be `x'`".into()))?;
                let v = Var::new(name.trim());
                if !vars.contains(&v) {
                    return Err(fmt(line, format!("`{}` is not a declared variable", v.name())));
                }
                if rhs.insert(v.clone(), (line, e.trim().to_string())).is_some() {
                    return Err(fmt(line, format!("second equation for `{}`", v.name())));
                }
            }
            Section::Domain => {
                let (k, v) = s.split_once('=').ok_or_else(|| fmt(line, "expected `poles = ...`".into()))?;
                if k.trim() != "poles" {
                    return Err(fmt(line, format!("unknown key `{}`", k.trim())));
                }
                for p in v.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                    poles.push(constant(p, line)?);
                }
            }
        }
    }
    if vars.is_empty() {
        return Err(fmt(0, "no variables declared in [vars]".into()));
    }
    if vars.contains(&time) || params.contains_key(time.name()) {
        return Err(fmt(0, format!("time variable `{}` clashes with a variable or parameter", time.name())));
    }
    if let Some(v) = vars.iter().find(|v| params.contains_key(v.name())) {
        return Err(fmt(0, format!("`{}` is both a variable and a parameter", v.name())));
    }
    let mut nodes = Vec::with_capacity(vars.len());
    let mut equations = Vec::with_capacity(vars.len());
    for v in &vars {
        let (line, e) = rhs.get(v).ok_or_else(|| fmt(0, format!("no equation for `{}`", v.name())))?;
        let node = parse_node(e).map_err(|source| SysFileError::Expr { line: *line, source })?;
        nodes.push(substitute(&node, &params));
        equations.push(e.clone());
    }
    let system = TimeSystem::from_rhs(time, vars, &nodes)?.with_poles(poles);
    Ok(SystemFile { params, equations, system })
}

pub fn load_system(path: &Path) -> Result<SystemFile, SysFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SysFileError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_system(&text)
}
