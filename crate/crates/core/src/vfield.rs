//! Vector fields on affine charts, Lie brackets, lifts to cartesian powers,
//! and non-autonomous systems in separable form `sum_k g_k(t) H_k`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::expr::{CompiledRational, ExprError, Node, NumericExpr, RationalExpr, Var};
use crate::sampling::Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("coefficient has a pole at t = {0}")]
    PoleAtTime(String),
    #[error("right-hand side is not separable in t and x: {0}")]
    NotSeparable(String),
    #[error("coefficient is not real at t = {0}")]
    NonRealCoefficient(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// An autonomous vector field `sum_l xi_l(x) d/dx_l`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VectorField {
    vars: Vec<Var>,
    comps: Vec<RationalExpr>,
}

impl VectorField {
    pub fn new(vars: Vec<Var>, comps: Vec<RationalExpr>) -> Result<Self, FieldError> {
        if vars.len() != comps.len() {
            return Err(FieldError::DimensionMismatch(vars.len(), comps.len()));
        }
        for c in &comps {
            if let Some(v) = c.variables().into_iter().find(|v| !vars.contains(v)) {
                return Err(FieldError::UnknownVariable(v.name().to_string()));
            }
        }
        Ok(VectorField { vars, comps })
    }

    pub fn zero(vars: Vec<Var>) -> Self {
        let comps = vec![RationalExpr::zero(); vars.len()];
        VectorField { vars, comps }
    }

    /// `d/dx_i` in the given coordinates.
    pub fn coordinate(vars: Vec<Var>, i: usize) -> Self {
        let mut f = Self::zero(vars);
        f.comps[i] = RationalExpr::one();
        f
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn components(&self) -> &[RationalExpr] {
        &self.comps
    }

    pub fn component(&self, i: usize) -> &RationalExpr {
        &self.comps[i]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(RationalExpr::is_zero)
    }

    fn check_same(&self, other: &VectorField) -> Result<(), FieldError> {
        if self.vars != other.vars {
            return Err(FieldError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Directional derivative `Y(f) = sum_l xi_l df/dx_l`.
    pub fn apply(&self, f: &RationalExpr) -> Result<RationalExpr, FieldError> {
        if let Some(v) = f.variables().into_iter().find(|v| !self.vars.contains(v)) {
            return Err(FieldError::UnknownVariable(v.name().to_string()));
        }
        Ok(self.derivative_of(f))
    }

    fn derivative_of(&self, f: &RationalExpr) -> RationalExpr {
        let mut acc = RationalExpr::zero();
        for (v, xi) in self.vars.iter().zip(&self.comps) {
            if xi.is_zero() || !f.depends_on(v) {
                continue;
            }
            acc = &acc + &(xi * &f.differentiate(v));
        }
        acc
    }

    /// `[Y, Z]` with components `Y(Z_l) - Z(Y_l)`.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<VectorField, FieldError> {
        self.check_same(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(y, z)| &self.derivative_of(z) - &other.derivative_of(y))
            .collect();
        Ok(VectorField { vars: self.vars.clone(), comps })
    }

    pub fn scale(&self, c: &BigRational) -> VectorField {
        VectorField { vars: self.vars.clone(), comps: self.comps.iter().map(|x| x.scale(c)).collect() }
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, FieldError> {
        self.check_same(other)?;
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect();
        Ok(VectorField { vars: self.vars.clone(), comps })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField, FieldError> {
        self.add(&other.scale(&-BigRational::one()))
    }

    /// `sum_i c_i * fields_i`; all fields must share coordinates.
    pub fn linear_combination(vars: &[Var], terms: &[(BigRational, &VectorField)]) -> Result<VectorField, FieldError> {
        let mut acc = VectorField::zero(vars.to_vec());
        for (c, f) in terms {
            if !c.is_zero() {
                acc = acc.add(&f.scale(c))?;
            }
        }
        Ok(acc)
    }

    /// Exact components at a rational point.
    pub fn eval_exact(&self, point: &Point) -> Result<Vec<BigRational>, ExprError> {
        let look = point.lookup();
        self.comps.iter().map(|c| c.eval_rational(&look)).collect()
    }

    /// Substitute coordinate names, e.g. to move onto a frame copy.
    pub fn rename(&self, map: &dyn Fn(&Var) -> Var) -> VectorField {
        VectorField {
            vars: self.vars.iter().map(map).collect(),
            comps: self.comps.iter().map(|c| c.rename(map)).collect(),
        }
    }

    /// Copy `k` of the field, acting on the variables `x_k`.
    pub fn on_copy(&self, k: usize) -> VectorField {
        let base = self.vars.clone();
        self.rename(&move |v: &Var| if base.contains(v) { v.copy(k) } else { v.clone() })
    }

    pub fn compile(&self, slots: &[Var]) -> Result<Vec<CompiledRational>, ExprError> {
        self.comps.iter().map(|c| CompiledRational::new(c, slots)).collect()
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in self.vars.iter().zip(&self.comps) {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c})*d/d{v}")?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The coordinates of the `r`-fold cartesian power: `x_1 .. x_r` copies of
/// each coordinate, optionally followed by the bare copy.
pub fn power_vars(base: &[Var], r: usize, include_bare: bool) -> Vec<Var> {
    let mut out: Vec<Var> = (1..=r).flat_map(|k| base.iter().map(move |v| v.copy(k))).collect();
    if include_bare {
        out.extend(base.iter().cloned());
    }
    out
}

/// A field copied onto every factor of a cartesian power.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    base: VectorField,
    copies: usize,
    include_bare: bool,
    field: VectorField,
}

impl LiftedField {
    pub fn base(&self) -> &VectorField {
        &self.base
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn includes_bare(&self) -> bool {
        self.include_bare
    }

    /// The lift as an ordinary field on the power.
    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn apply(&self, f: &RationalExpr) -> Result<RationalExpr, FieldError> {
        self.field.apply(f)
    }
}

/// `Y^r = Y^(1) + ... + Y^(r)` (plus `Y` on the bare copy when requested).
pub fn lift_to_power(y: &VectorField, r: usize, include_bare: bool) -> LiftedField {
    assert!(r >= 1, "lift needs at least one copy");
    let vars = power_vars(y.vars(), r, include_bare);
    let mut comps = Vec::with_capacity(vars.len());
    for k in 1..=r {
        comps.extend(y.on_copy(k).comps);
    }
    if include_bare {
        comps.extend(y.comps.iter().cloned());
    }
    LiftedField {
        base: y.clone(),
        copies: r,
        include_bare,
        field: VectorField { vars, comps },
    }
}

/// One summand `g(t) * H` of a separable non-autonomous system.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTerm {
    /// `g` as an evaluable expression in `t`.
    pub coeff: NumericExpr,
    /// `g` as an exact rational function of `t`, when it is one.
    pub exact: Option<RationalExpr>,
    pub field: VectorField,
}

/// `d/dt + sum_i F_i(t, x) d/dx_i` with `F = sum_k g_k(t) H_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSystem {
    time: Var,
    vars: Vec<Var>,
    terms: Vec<TimeTerm>,
    poles: Vec<BigRational>,
}

impl TimeSystem {
    pub fn new(time: Var, vars: Vec<Var>, terms: Vec<TimeTerm>) -> Result<Self, FieldError> {
        for t in &terms {
            if t.field.vars() != vars.as_slice() {
                return Err(FieldError::DimensionMismatch(vars.len(), t.field.dim()));
            }
        }
        Ok(TimeSystem { time, vars, terms, poles: Vec::new() })
    }

    /// An autonomous system.
    pub fn autonomous(field: VectorField) -> Self {
        let time = Var::new("t");
        let term = TimeTerm {
            coeff: NumericExpr::constant(BigRational::one()),
            exact: Some(RationalExpr::one()),
            field: field.clone(),
        };
        TimeSystem { time, vars: field.vars().to_vec(), terms: vec![term], poles: Vec::new() }
    }

    /// Build from right-hand sides given as expression trees in `t` and `vars`.
    pub fn from_rhs(time: Var, vars: Vec<Var>, rhs: &[Node]) -> Result<Self, FieldError> {
        if rhs.len() != vars.len() {
            return Err(FieldError::DimensionMismatch(vars.len(), rhs.len()));
        }
        let sep = Separator { time: &time, vars: &vars };
        // group: canonical t-coefficient -> field components
        let mut groups: Vec<(TCoeff, Vec<RationalExpr>)> = Vec::new();
        for (i, node) in rhs.iter().enumerate() {
            for (tpart, xpart) in sep.separate(node)? {
                let (coeff, scale) = TCoeff::normalize(tpart, &time)?;
                let x = xpart.scale(&scale);
                if x.is_zero() {
                    continue;
                }
                let slot = match groups.iter().position(|(c, _)| *c == coeff) {
                    Some(p) => p,
                    None => {
                        groups.push((coeff, vec![RationalExpr::zero(); vars.len()]));
                        groups.len() - 1
                    }
                };
                let comps = &mut groups[slot].1;
                comps[i] = &comps[i] + &x;
            }
        }
        let mut terms = Vec::new();
        for (coeff, comps) in groups {
            let field = VectorField::new(vars.clone(), comps)?;
            if field.is_zero() {
                continue;
            }
            terms.push(coeff.into_term(&time, field)?);
        }
        TimeSystem::new(time, vars, terms)
    }

    pub fn with_poles(mut self, poles: Vec<BigRational>) -> Self {
        self.poles = poles;
        self
    }

    pub fn time(&self) -> &Var {
        &self.time
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> &[TimeTerm] {
        &self.terms
    }

    pub fn poles(&self) -> &[BigRational] {
        &self.poles
    }

    /// Component `i` as its list of `(g_k, h_k)` summands.
    pub fn component(&self, i: usize) -> Vec<(&NumericExpr, &RationalExpr)> {
        self.terms
            .iter()
            .filter(|t| !t.field.component(i).is_zero())
            .map(|t| (&t.coeff, t.field.component(i)))
            .collect()
    }

    /// Exact value of every coefficient `g_k(t0)`.
    pub fn coefficients_at(&self, t0: &BigRational) -> Result<Vec<BigRational>, FieldError> {
        if self.poles.contains(t0) {
            return Err(FieldError::PoleAtTime(t0.to_string()));
        }
        self.terms
            .iter()
            .map(|term| match &term.exact {
                Some(e) => e.eval_rational(&|_| Some(t0.clone())).map_err(|err| match err {
                    ExprError::PoleAtPoint => FieldError::PoleAtTime(t0.to_string()),
                    other => other.into(),
                }),
                None => {
                    let tf = crate::expr::rational_to_f64(t0);
                    let z = term.coeff.eval_at(tf).map_err(|err| match err {
                        ExprError::PoleAtPoint | ExprError::DomainError => FieldError::PoleAtTime(t0.to_string()),
                        other => other.into(),
                    })?;
                    if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
                        return Err(FieldError::NonRealCoefficient(t0.to_string()));
                    }
                    BigRational::from_float(z.re).ok_or_else(|| FieldError::PoleAtTime(t0.to_string()))
                }
            })
            .collect()
    }

    /// The time slice `X_{t0} = sum_k g_k(t0) H_k`.
    ///
    /// Rational coefficients are evaluated exactly; transcendental ones are
    /// evaluated in double precision and converted exactly from the float.
    pub fn freeze_time(&self, t0: &BigRational) -> Result<VectorField, FieldError> {
        let coeffs = self.coefficients_at(t0)?;
        let terms: Vec<(BigRational, &VectorField)> =
            coeffs.into_iter().zip(self.terms.iter().map(|t| &t.field)).collect();
        VectorField::linear_combination(&self.vars, &terms)
    }

    /// `f64` right-hand side over `vars`.
    pub fn compile(&self) -> Result<CompiledSystem, FieldError> {
        let fields = self
            .terms
            .iter()
            .map(|t| t.field.compile(&self.vars))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledSystem {
            coeffs: self.terms.iter().map(|t| t.coeff.clone()).collect(),
            fields,
            dim: self.vars.len(),
        })
    }

    /// Rename the state variables positionally.
    pub fn with_vars(&self, vars: &[Var]) -> Result<TimeSystem, FieldError> {
        if vars.len() != self.vars.len() {
            return Err(FieldError::DimensionMismatch(self.vars.len(), vars.len()));
        }
        let old = self.vars.clone();
        let new = vars.to_vec();
        let map = move |v: &Var| match old.iter().position(|w| w == v) {
            Some(i) => new[i].clone(),
            None => v.clone(),
        };
        let terms = self
            .terms
            .iter()
            .map(|t| TimeTerm { coeff: t.coeff.clone(), exact: t.exact.clone(), field: t.field.rename(&map) })
            .collect();
        Ok(TimeSystem { time: self.time.clone(), vars: vars.to_vec(), terms, poles: self.poles.clone() })
    }
}

/// Evaluable right-hand side for the numerical integrator.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    coeffs: Vec<NumericExpr>,
    fields: Vec<Vec<CompiledRational>>,
    dim: usize,
}

impl CompiledSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficient values at `t` (real part).
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.eval_at(t).map(|z| z.re).unwrap_or(f64::NAN))
            .collect()
    }

    /// Evaluate `F(t, x)` for every consecutive `dim`-block of `x`.
    pub fn rhs(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let g = self.coefficients(t);
        for (xb, ob) in x.chunks(self.dim).zip(out.chunks_mut(self.dim)) {
            ob.iter_mut().for_each(|o| *o = 0.0);
            for (gk, field) in g.iter().zip(&self.fields) {
                if *gk == 0.0 {
                    continue;
                }
                for (o, c) in ob.iter_mut().zip(field) {
                    *o += gk * c.eval(xb);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TCoeff {
    Rational(RationalExpr),
    Other(String, Node),
}

impl TCoeff {
    /// Split a t-part into a canonical coefficient and a rational scale.
    fn normalize(node: Node, time: &Var) -> Result<(TCoeff, BigRational), FieldError> {
        if node.is_transcendental() {
            return Ok((TCoeff::Other(node.to_string(), node), BigRational::one()));
        }
        let r = node.to_rational()?;
        if r.variables().iter().any(|v| v != time) {
            return Err(FieldError::NotSeparable(node.to_string()));
        }
        let lc = r.numerator().leading_coeff();
        if lc.is_zero() {
            return Ok((TCoeff::Rational(RationalExpr::one()), BigRational::zero()));
        }
        Ok((TCoeff::Rational(r.scale(&lc.recip())), lc))
    }

    fn into_term(self, time: &Var, field: VectorField) -> Result<TimeTerm, FieldError> {
        Ok(match self {
            TCoeff::Rational(r) => TimeTerm {
                coeff: NumericExpr::from_rational(vec![time.clone()], &r)?,
                exact: Some(r),
                field,
            },
            TCoeff::Other(_, node) => TimeTerm {
                coeff: NumericExpr::new(vec![time.clone()], node)?,
                exact: None,
                field,
            },
        })
    }
}

struct Separator<'a> {
    time: &'a Var,
    vars: &'a [Var],
}

type SepForm = Vec<(Node, RationalExpr)>;

fn one_node() -> Node {
    Node::Num(BigRational::one())
}

fn is_one_node(n: &Node) -> bool {
    matches!(n, Node::Num(c) if c.is_one())
}

fn mul_nodes(a: &Node, b: &Node) -> Node {
    if is_one_node(a) {
        b.clone()
    } else if is_one_node(b) {
        a.clone()
    } else {
        Node::Mul(Box::new(a.clone()), Box::new(b.clone()))
    }
}

impl Separator<'_> {
    fn separate(&self, node: &Node) -> Result<SepForm, FieldError> {
        Ok(match node {
            Node::Num(c) => vec![(one_node(), RationalExpr::constant(c.clone()))],
            Node::Var(v) if v == self.time => vec![(Node::Var(v.clone()), RationalExpr::one())],
            Node::Var(v) if self.vars.contains(v) => vec![(one_node(), RationalExpr::var(v.clone()))],
            Node::Var(v) => return Err(FieldError::UnknownVariable(v.name().to_string())),
            Node::Add(a, b) => {
                let mut s = self.separate(a)?;
                s.extend(self.separate(b)?);
                s
            }
            Node::Sub(a, b) => {
                let mut s = self.separate(a)?;
                s.extend(self.separate(b)?.into_iter().map(|(t, x)| (t, -x)));
                s
            }
            Node::Neg(a) => self.separate(a)?.into_iter().map(|(t, x)| (t, -x)).collect(),
            Node::Mul(a, b) => self.product(&self.separate(a)?, &self.separate(b)?),
            Node::Div(a, b) => {
                let (tb, xb) = self.single(node, self.separate(b)?)?;
                let mut out = Vec::new();
                for (ta, xa) in self.separate(a)? {
                    let t = if is_one_node(&tb) { ta } else { Node::Div(Box::new(ta), Box::new(tb.clone())) };
                    out.push((t, xa.checked_div(&xb)?));
                }
                out
            }
            Node::Pow(a, e) => {
                let base = self.separate(a)?;
                let base = if *e < 0 {
                    let (t, x) = self.single(node, base)?;
                    let t = if is_one_node(&t) { t } else { Node::Div(Box::new(one_node()), Box::new(t)) };
                    vec![(t, x.recip()?)]
                } else {
                    base
                };
                let mut acc: SepForm = vec![(one_node(), RationalExpr::one())];
                for _ in 0..e.unsigned_abs() {
                    acc = self.product(&acc, &base);
                }
                acc
            }
            Node::Func(f, a) => {
                let s = self.separate(a)?;
                if s.iter().any(|(_, x)| x.as_constant().is_none()) {
                    return Err(FieldError::NotSeparable(node.to_string()));
                }
                let mut arg: Option<Node> = None;
                for (t, x) in s {
                    let c = x.as_constant().unwrap_or_else(BigRational::zero);
                    if c.is_zero() {
                        continue;
                    }
                    let term = mul_nodes(&Node::Num(c), &t);
                    arg = Some(match arg {
                        None => term,
                        Some(prev) => Node::Add(Box::new(prev), Box::new(term)),
                    });
                }
                let arg = arg.unwrap_or_else(|| Node::Num(BigRational::zero()));
                vec![(Node::Func(*f, Box::new(arg)), RationalExpr::one())]
            }
        })
    }

    fn product(&self, a: &SepForm, b: &SepForm) -> SepForm {
        let mut out = Vec::with_capacity(a.len() * b.len());
        for (ta, xa) in a {
            for (tb, xb) in b {
                out.push((mul_nodes(ta, tb), xa * xb));
            }
        }
        out
    }

    /// Collapse a separable form to one product `T(t) * X(x)`, if possible.
    fn single(&self, whole: &Node, s: SepForm) -> Result<(Node, RationalExpr), FieldError> {
        let s: SepForm = s.into_iter().filter(|(_, x)| !x.is_zero()).collect();
        if s.is_empty() {
            return Err(ExprError::DivisionByZero.into());
        }
        // common t-part: sum the x-parts
        let mut by_t: BTreeMap<String, (Node, RationalExpr)> = BTreeMap::new();
        for (t, x) in &s {
            let key = self.t_key(t);
            let entry = by_t.entry(key).or_insert_with(|| (t.clone(), RationalExpr::zero()));
            entry.1 = &entry.1 + x;
        }
        by_t.retain(|_, (_, x)| !x.is_zero());
        if by_t.len() == 1 {
            return Ok(by_t.into_values().next().expect("one entry"));
        }
        // common x-part up to a constant: sum the t-parts
        let first = &s[0].1;
        let mut t_sum: Option<Node> = None;
        for (t, x) in &s {
            let ratio = x.checked_div(first)?;
            let Some(c) = ratio.as_constant() else {
                return Err(FieldError::NotSeparable(whole.to_string()));
            };
            let term = mul_nodes(&Node::Num(c), t);
            t_sum = Some(match t_sum {
                None => term,
                Some(prev) => Node::Add(Box::new(prev), Box::new(term)),
            });
        }
        Ok((t_sum.expect("nonempty"), first.clone()))
    }

    fn t_key(&self, t: &Node) -> String {
        if !t.is_transcendental() {
            if let Ok(r) = t.to_rational() {
                return format!("r:{r}");
            }
        }
        format!("n:{t}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_node, parse_rational, q, vars};

    fn field(vs: &[&str], comps: &[&str]) -> VectorField {
        let v = vars(vs);
        let c = comps.iter().map(|s| parse_rational(s, &v).unwrap()).collect();
        VectorField::new(v, c).unwrap()
    }

    fn sl2() -> [VectorField; 3] {
        [field(&["x"], &["1"]), field(&["x"], &["x"]), field(&["x"], &["x^2"])]
    }

    #[test]
    fn sl2_brackets() {
        let [d, e, h] = sl2();
        assert_eq!(d.lie_bracket(&e).unwrap(), d);
        assert_eq!(e.lie_bracket(&h).unwrap(), h);
        assert_eq!(d.lie_bracket(&h).unwrap(), e.scale(&q(2)));
        assert!(h.lie_bracket(&h).unwrap().is_zero());
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let a = field(&["x"], &["1"]);
        let b = field(&["x", "y"], &["1", "0"]);
        assert!(matches!(a.lie_bracket(&b), Err(FieldError::DimensionMismatch(..))));
    }

    #[test]
    fn lifts() {
        let l = lift_to_power(&field(&["x"], &["1"]), 2, false);
        assert_eq!(l.field(), &field(&["x_1", "x_2"], &["1", "1"]));
        let l = lift_to_power(&field(&["x"], &["x"]), 3, false);
        assert_eq!(l.field(), &field(&["x_1", "x_2", "x_3"], &["x_1", "x_2", "x_3"]));
        let l = lift_to_power(&field(&["x"], &["x^2"]), 2, true);
        assert_eq!(l.field().vars(), vars(&["x_1", "x_2", "x"]).as_slice());
    }

    #[test]
    fn apply_to_functions() {
        let e = field(&["x"], &["x"]);
        let x2 = parse_rational("x^2", &vars(&["x"])).unwrap();
        assert_eq!(e.apply(&x2).unwrap(), x2.scale(&q(2)));
        assert!(e.apply(&RationalExpr::one()).unwrap().is_zero());
        let y = parse_rational("y", &vars(&["y"])).unwrap();
        assert!(matches!(e.apply(&y), Err(FieldError::UnknownVariable(_))));
    }

    fn system(vs: &[&str], rhs: &[&str]) -> TimeSystem {
        let nodes: Vec<Node> = rhs.iter().map(|s| parse_node(s).unwrap()).collect();
        TimeSystem::from_rhs(Var::new("t"), vars(vs), &nodes).unwrap()
    }

    #[test]
    fn riccati_constant_coefficients_freeze() {
        let s = system(&["x"], &["1 + 0*x + 0*x^2"]);
        assert_eq!(s.freeze_time(&q(5)).unwrap(), field(&["x"], &["1"]));
    }

    #[test]
    fn lorenz_riccati_u_slice() {
        let s = system(&["u"], &["2*u/t - 2/t^2 - u^2"]);
        assert_eq!(s.terms().len(), 3);
        assert_eq!(s.freeze_time(&q(1)).unwrap(), field(&["u"], &["2*u - 2 - u^2"]));
        assert!(matches!(s.freeze_time(&q(0)), Err(FieldError::PoleAtTime(_))));
    }

    #[test]
    fn separable_split_merges_equal_coefficients() {
        let s = system(&["x", "y"], &["t*x + 3*t*y", "sin(t)*x - x/(1 + t)"]);
        assert_eq!(s.terms().len(), 3);
        let slice = s.freeze_time(&q(1)).unwrap();
        let s1 = 1f64.sin();
        let want = s1 - 0.5;
        let got = crate::expr::rational_to_f64(&slice.component(1).numerator().leading_coeff());
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn non_separable_rejected() {
        let nodes = vec![parse_node("1/(t + x)").unwrap()];
        let r = TimeSystem::from_rhs(Var::new("t"), vars(&["x"]), &nodes);
        assert!(matches!(r, Err(FieldError::NotSeparable(_))));
        let nodes = vec![parse_node("sin(x)").unwrap()];
        let r = TimeSystem::from_rhs(Var::new("t"), vars(&["x"]), &nodes);
        assert!(matches!(r, Err(FieldError::NotSeparable(_))));
    }

    #[test]
    fn compiled_rhs_matches_exact_slice() {
        let s = system(&["x"], &["1 + t*x + t^2*x^2"]);
        let c = s.compile().unwrap();
        let mut out = [0.0; 2];
        c.rhs(0.5, &[2.0, -1.0], &mut out);
        assert!((out[0] - (1.0 + 1.0 + 1.0)).abs() < 1e-15);
        assert!((out[1] - (1.0 - 0.5 + 0.25)).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use crate::expr::{Monomial, Poly};
        use proptest::prelude::*;

        fn poly(vs: Vec<Var>) -> impl Strategy<Value = RationalExpr> {
            proptest::collection::vec((-3i64..=3, 0u32..=2, 0u32..=2), 0..4).prop_map(move |ts| {
                let p = Poly::from_terms(ts.into_iter().map(|(c, a, b)| {
                    (Monomial::from_pairs(vec![(vs[0].clone(), a), (vs[1].clone(), b)]), q(c))
                }));
                RationalExpr::from_poly(p)
            })
        }

        fn vf() -> impl Strategy<Value = VectorField> {
            let v = vars(&["x", "y"]);
            (poly(v.clone()), poly(v.clone()), 0u8..2).prop_map(move |(a, b, d)| {
                // occasionally a rational component
                let b = if d == 1 { b.checked_div(&parse_rational("1 + x^2", &v).unwrap()).unwrap() } else { b };
                VectorField::new(v.clone(), vec![a, b]).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn antisymmetry(a in vf(), b in vf()) {
                let ab = a.lie_bracket(&b).unwrap();
                let ba = b.lie_bracket(&a).unwrap();
                prop_assert!(ab.add(&ba).unwrap().is_zero());
            }

            #[test]
            fn jacobi(a in vf(), b in vf(), c in vf()) {
                let t1 = a.lie_bracket(&b.lie_bracket(&c).unwrap()).unwrap();
                let t2 = b.lie_bracket(&c.lie_bracket(&a).unwrap()).unwrap();
                let t3 = c.lie_bracket(&a.lie_bracket(&b).unwrap()).unwrap();
                prop_assert!(t1.add(&t2).unwrap().add(&t3).unwrap().is_zero());
            }

            #[test]
            fn lift_is_a_homomorphism(a in vf(), b in vf(), r in 1usize..=3) {
                let la = lift_to_power(&a, r, false);
                let lb = lift_to_power(&b, r, false);
                let lab = lift_to_power(&a.lie_bracket(&b).unwrap(), r, false);
                prop_assert_eq!(la.field().lie_bracket(lb.field()).unwrap(), lab.field().clone());
            }

            #[test]
            fn derivation_rule(a in vf(), f in poly(vars(&["x", "y"])), g in poly(vars(&["x", "y"]))) {
                let lhs = a.apply(&(&f * &g)).unwrap();
                let rhs = &(&a.apply(&f).unwrap() * &g) + &(&f * &a.apply(&g).unwrap());
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn bracket_acts_as_commutator(a in vf(), b in vf(), f in poly(vars(&["x", "y"]))) {
                let ab = a.lie_bracket(&b).unwrap();
                let lhs = ab.apply(&f).unwrap();
                let rhs = &a.apply(&b.apply(&f).unwrap()).unwrap() - &b.apply(&a.apply(&f).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
