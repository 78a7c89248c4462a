use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::envelope::StructureConstants;
use crate::expr::{fmt_rational, parse_rational, q, rational_to_f64, RationalExpr, Var};
use crate::linalg::{solve_columns, Solution};
use crate::sampling::RationalSampler;
use crate::vfield::VectorField;

use super::AutoError;

pub type ExactMatrix = Vec<Vec<BigRational>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// `x -> sigma x` on `R^d`.
    Linear,
    /// `x -> (a x + b)/(c x + d)` on the line.
    Mobius,
    /// `x -> a x + b`, matrices `[[a, b], [0, 1]]`.
    Affine,
}

impl Action {
    fn parse(s: &str) -> Option<Action> {
        match s {
            "linear" => Some(Action::Linear),
            "mobius" => Some(Action::Mobius),
            "affine" => Some(Action::Affine),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Action::Linear => "linear",
            Action::Mobius => "mobius",
            Action::Affine => "affine",
        }
    }
}

/// Matrix group with a right-invariant basis `A_1..A_s` and an action.
///
/// The bracket table is that of right-invariant fields,
/// `[A_i, A_j] = A_j A_i - A_i A_j`, which is also the vector-field bracket
/// of the fundamental fields of the action.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPresentation {
    pub name: String,
    pub d: usize,
    pub generators: Vec<ExactMatrix>,
    pub constants: StructureConstants,
    pub action: Action,
}

fn mat_mul(a: &ExactMatrix, b: &ExactMatrix) -> ExactMatrix {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| &a[i][k] * &b[k][j]).sum()).collect()).collect()
}

fn flatten(a: &ExactMatrix) -> Vec<BigRational> {
    a.iter().flatten().cloned().collect()
}

pub(crate) fn to_dmatrix(a: &ExactMatrix) -> DMatrix<f64> {
    let d = a.len();
    DMatrix::from_fn(d, d, |i, j| rational_to_f64(&a[i][j]))
}

/// Bracket of right-invariant fields.
pub fn right_bracket(a: &ExactMatrix, b: &ExactMatrix) -> ExactMatrix {
    let ab = mat_mul(a, b);
    let ba = mat_mul(b, a);
    ba.iter().zip(&ab).map(|(x, y)| x.iter().zip(y).map(|(p, r)| p - r).collect()).collect()
}

fn unit(d: usize, i: usize, j: usize) -> ExactMatrix {
    (0..d).map(|r| (0..d).map(|c| if (r, c) == (i, j) { q(1) } else { q(0) }).collect()).collect()
}

impl GroupPresentation {
    /// `GL(n)` for n = 1..4, `SL(2)-Mobius`, `Affine(1)`.
    pub fn builtin(name: &str) -> Result<GroupPresentation, AutoError> {
        let name = name.trim();
        let half = BigRational::new(1.into(), 2.into());
        let (d, generators, action) = match name {
            "SL(2)-Mobius" => (
                2,
                vec![
                    vec![vec![q(0), q(1)], vec![q(0), q(0)]],
                    vec![vec![half.clone(), q(0)], vec![q(0), -half]],
                    vec![vec![q(0), q(0)], vec![q(-1), q(0)]],
                ],
                Action::Mobius,
            ),
            "Affine(1)" => (2, vec![unit(2, 0, 1), unit(2, 0, 0)], Action::Affine),
            _ => {
                let n = name
                    .strip_prefix("GL(")
                    .and_then(|s| s.strip_suffix(')'))
                    .and_then(|s| s.trim().parse::<usize>().ok())
                    .filter(|n| (1..=4).contains(n))
                    .ok_or_else(|| AutoError::UnknownPresentation(name.to_string()))?;
                let gens = (0..n).flat_map(|i| (0..n).map(move |j| unit(n, i, j))).collect();
                (n, gens, Action::Linear)
            }
        };
        let constants = Self::commutator_table(&generators)?;
        Ok(GroupPresentation { name: name.to_string(), d, generators, constants, action })
    }

    pub fn s(&self) -> usize {
        self.generators.len()
    }

    /// Dimension of the space acted on.
    pub fn point_dim(&self) -> usize {
        match self.action {
            Action::Linear => self.d,
            Action::Mobius | Action::Affine => 1,
        }
    }

    /// Coordinates of `m` in the generator basis.
    pub fn coordinates(&self, m: &ExactMatrix) -> Option<Vec<BigRational>> {
        let cols: Vec<Vec<BigRational>> = self.generators.iter().map(flatten).collect();
        match solve_columns(&cols, &flatten(m)) {
            Solution::Unique(c) => Some(c),
            _ => None,
        }
    }

    fn commutator_table(gens: &[ExactMatrix]) -> Result<StructureConstants, AutoError> {
        let probe = GroupPresentation {
            name: String::new(),
            d: gens.first().map_or(0, Vec::len),
            generators: gens.to_vec(),
            constants: StructureConstants::zeros(0),
            action: Action::Linear,
        };
        let s = gens.len();
        let mut c = StructureConstants::zeros(s);
        for i in 0..s {
            for j in 0..s {
                let b = right_bracket(&gens[i], &gens[j]);
                let coords = probe.coordinates(&b).ok_or_else(|| {
                    AutoError::InvalidPresentation(format!("[A{}, A{}] leaves the span of the generators", i + 1, j + 1))
                })?;
                for (k, v) in coords.into_iter().enumerate() {
                    c.set(i, j, k, v);
                }
            }
        }
        Ok(c)
    }

    /// Fundamental field of `A` on `vars`: `d/de act(I + e A, x)` at `e = 0`.
    pub fn fundamental_field(&self, a: &ExactMatrix, vars: &[Var]) -> Result<VectorField, AutoError> {
        if vars.len() != self.point_dim() {
            return Err(AutoError::DimensionMismatch { expected: self.point_dim(), found: vars.len() });
        }
        let x = |i: usize| RationalExpr::var(vars[i].clone());
        let comps = match self.action {
            Action::Linear => (0..self.d)
                .map(|i| (0..self.d).fold(RationalExpr::zero(), |acc, j| &acc + &x(j).scale(&a[i][j])))
                .collect(),
            Action::Mobius | Action::Affine => {
                // b + (a - d) x - c x^2
                let lin = &a[0][0] - &a[1][1];
                let sq = &x(0) * &x(0);
                vec![&(&RationalExpr::constant(a[0][1].clone()) + &x(0).scale(&lin)) - &sq.scale(&a[1][0])]
            }
        };
        Ok(VectorField::new(vars.to_vec(), comps)?)
    }

    pub fn fundamental_fields(&self, vars: &[Var]) -> Result<Vec<VectorField>, AutoError> {
        self.generators.iter().map(|a| self.fundamental_field(a, vars)).collect()
    }

    /// `sigma . x`; `None` at a pole of the action.
    pub fn act(&self, sigma: &DMatrix<f64>, x: &[f64]) -> Option<Vec<f64>> {
        match self.action {
            Action::Linear => Some((sigma * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()),
            Action::Mobius | Action::Affine => {
                let num = sigma[(0, 0)] * x[0] + sigma[(0, 1)];
                let den = sigma[(1, 0)] * x[0] + sigma[(1, 1)];
                let scale = sigma.amax() * (1.0 + x[0].abs());
                (den.abs() > 1e-8 * scale && den.is_finite()).then(|| vec![num / den])
            }
        }
    }

    /// A random group element near the identity.
    pub fn random_element(&self, seed: u64) -> DMatrix<f64> {
        let mut rng = RationalSampler::new(seed, 31);
        let mut u = || rng.unit() - 0.5;
        match self.action {
            Action::Linear => loop {
                let m = DMatrix::from_fn(self.d, self.d, |i, j| if i == j { 1.0 } else { 0.0 } + u());
                if m.determinant().abs() > 0.1 {
                    return m;
                }
            },
            Action::Mobius => {
                let (a, b, c) = (1.0 + u(), u(), u());
                DMatrix::from_row_slice(2, 2, &[a, b, c, (1.0 + b * c) / a])
            }
            Action::Affine => DMatrix::from_row_slice(2, 2, &[1.0 + u(), u(), 0.0, 1.0]),
        }
    }

    /// Exact closure with the declared table, and the action axioms on samples.
    pub fn validate(&self, seed: u64) -> Result<(), AutoError> {
        if self.generators.iter().any(|g| g.len() != self.d || g.iter().any(|r| r.len() != self.d)) {
            return Err(AutoError::InvalidPresentation(format!("generators must be {0}x{0}", self.d)));
        }
        if matches!(self.action, Action::Mobius | Action::Affine) && self.d != 2 {
            return Err(AutoError::InvalidPresentation("projective actions need d = 2".into()));
        }
        if self.action == Action::Affine && self.generators.iter().any(|g| !g[1][0].is_zero() || !g[1][1].is_zero()) {
            return Err(AutoError::InvalidPresentation("affine generators need a zero bottom row".into()));
        }
        let table = Self::commutator_table(&self.generators)?;
        if let Some((i, j, k)) = table.first_difference(&self.constants) {
            return Err(AutoError::InvalidPresentation(format!(
                "declared c({},{},{}) = {} but the generators give {}",
                i + 1,
                j + 1,
                k + 1,
                fmt_rational(self.constants.get(i, j, k)),
                fmt_rational(table.get(i, j, k))
            )));
        }
        let mut rng = RationalSampler::new(seed, 32);
        let id = DMatrix::identity(self.d, self.d);
        for trial in 0..8 {
            let x: Vec<f64> = (0..self.point_dim()).map(|_| rng.unit() - 0.5).collect();
            let s = self.random_element(seed.wrapping_add(2 * trial));
            let t = self.random_element(seed.wrapping_add(2 * trial + 1));
            let bad = |a: Option<Vec<f64>>, b: Option<Vec<f64>>| match (a, b) {
                (Some(a), Some(b)) => a.iter().zip(&b).any(|(p, r)| (p - r).abs() > 1e-12 * (1.0 + r.abs())),
                _ => false,
            };
            if bad(self.act(&id, &x), Some(x.clone())) {
                return Err(AutoError::InvalidPresentation("act(I, x) != x".into()));
            }
            if bad(self.act(&(&s * &t), &x), self.act(&t, &x).and_then(|y| self.act(&s, &y))) {
                return Err(AutoError::InvalidPresentation("action is not a group action".into()));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "action = {}", self.action.as_str());
        for (i, g) in self.generators.iter().enumerate() {
            let rows: Vec<String> =
                g.iter().map(|r| format!("[{}]", r.iter().map(fmt_rational).collect::<Vec<_>>().join(", "))).collect();
            let _ = writeln!(out, "A{} = [{}]", i + 1, rows.join(", "));
        }
        let _ = writeln!(out, "# [Ai, Aj] = Aj Ai - Ai Aj");
        let s = self.s();
        for i in 0..s {
            for j in i + 1..s {
                let terms: Vec<(Var, BigRational)> = (0..s)
                    .filter(|&k| !self.constants.get(i, j, k).is_zero())
                    .map(|k| (Var::new(format!("A{}", k + 1)), self.constants.get(i, j, k).clone()))
                    .collect();
                if terms.is_empty() {
                    continue;
                }
                let e = terms.into_iter().fold(RationalExpr::zero(), |acc, (v, c)| &acc + &RationalExpr::var(v).scale(&c));
                let _ = writeln!(out, "[A{}, A{}] = {e}", i + 1, j + 1);
            }
        }
        out
    }

    /// Parse and validate a presentation file.
    pub fn from_text(text: &str) -> Result<GroupPresentation, AutoError> {
        let err = |line: usize, message: String| AutoError::Format { line, message };
        let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(no + 1, "expected `key = value`".into()))?;
            let key: String = k.chars().filter(|c| !c.is_whitespace()).collect();
            if fields.insert(key.clone(), (no + 1, v.trim().to_string())).is_some() {
                return Err(err(no + 1, format!("duplicate key `{key}`")));
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| err(0, format!("missing `{k}`")));
        let name = get("name")?.1.clone();
        let (dl, dv) = get("d")?;
        let d: usize = dv.parse().ok().filter(|&d| d > 0).ok_or_else(|| err(*dl, "`d` must be a positive integer".into()))?;
        let (al, av) = get("action")?;
        let action = Action::parse(av).ok_or_else(|| err(*al, format!("unknown action `{av}`")))?;
        let mut generators = Vec::new();
        while let Some((line, v)) = fields.get(&format!("A{}", generators.len() + 1)) {
            generators.push(parse_matrix(v, d).map_err(|m| err(*line, m))?);
        }
        if generators.is_empty() {
            return Err(err(0, "no generators `A1 = ...`".into()));
        }
        let s = generators.len();
        let names: Vec<Var> = (1..=s).map(|k| Var::new(format!("A{k}"))).collect();
        let mut constants = StructureConstants::zeros(s);
        for (key, (line, v)) in &fields {
            if matches!(key.as_str(), "name" | "d" | "action") || names.iter().any(|n| n.name() == key) {
                continue;
            }
            let (i, j) = parse_bracket_key(key, s).ok_or_else(|| err(*line, format!("unknown key `{key}`")))?;
            let coords = parse_linear(v, &names).map_err(|m| err(*line, m))?;
            for (k, c) in coords.into_iter().enumerate() {
                constants.set(j, i, k, -c.clone());
                constants.set(i, j, k, c);
            }
        }
        let p = GroupPresentation { name, d, generators, constants, action };
        p.validate(0)?;
        Ok(p)
    }
}

fn parse_matrix(s: &str, d: usize) -> Result<ExactMatrix, String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = compact
        .strip_prefix("[[")
        .and_then(|x| x.strip_suffix("]]"))
        .ok_or_else(|| "matrix must look like [[a, b], [c, d]]".to_string())?;
    let m: ExactMatrix = inner
        .split("],[")
        .map(|row| {
            row.split(',')
                .map(|e| {
                    parse_rational(e, &[])
                        .ok()
                        .and_then(|r| r.as_constant())
                        .ok_or_else(|| format!("matrix entry `{e}` is not a rational number"))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(format!("matrix must be {d}x{d}"));
    }
    Ok(m)
}

fn parse_bracket_key(key: &str, s: usize) -> Option<(usize, usize)> {
    let (a, b) = key.strip_prefix("[A")?.strip_suffix(']')?.split_once(",A")?;
    let (i, j): (usize, usize) = (a.parse().ok()?, b.parse().ok()?);
    (1..=s).contains(&i).then_some(())?;
    (1..=s).contains(&j).then_some(())?;
    (i < j).then_some((i - 1, j - 1))
}

fn parse_linear(s: &str, names: &[Var]) -> Result<Vec<BigRational>, String> {
    let e = parse_rational(s, names).map_err(|e| e.to_string())?;
    let mut out = vec![BigRational::zero(); names.len()];
    if e.is_zero() {
        return Ok(out);
    }
    if !e.denominator().is_one() {
        return Err("bracket must be a linear combination of generators".into());
    }
    for (m, c) in e.numerator().terms() {
        match m.factors() {
            [(v, 1)] => {
                let k = names.iter().position(|n| n == v).expect("parsed against names");
                out[k] = c.clone();
            }
            _ => return Err("bracket must be a linear combination of generators".into()),
        }
    }
    Ok(out)
}
