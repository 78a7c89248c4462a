//! The Lie test: enveloping algebra of a time-dependent field by time-slice
//! sampling and bracket closure, plus the decomposition `X = d/dt + sum f_i(t) X_i`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::expr::{gcd, rational_to_f64, ExprError, Monomial, NumericExpr, Poly, RationalExpr, Var};
use crate::linalg::{rref, solve_columns, EchelonBasis, Solution};
use crate::sampling::{Point, RationalSampler};
use crate::vfield::{FieldError, TimeSystem, VectorField};

pub const DEFAULT_CAP: usize = 64;
/// Redraws allowed per evaluation point before giving up.
pub const RESAMPLE_BUDGET: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("every sampled point hit a pole; resample budget exhausted")]
    DegenerateSampling,
    #[error("time slice at t = {0} lies outside the span of the basis")]
    InconsistentSlice(String),
    #[error("bracket [X{0}, X{1}] is not in the span of the basis")]
    NotClosed(usize, usize),
    #[error("empty family of fields")]
    Empty,
    #[error("basis fields are linearly dependent")]
    DependentBasis,
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl From<ExprError> for EnvelopeError {
    fn from(e: ExprError) -> Self {
        EnvelopeError::Field(e.into())
    }
}

/// `c[i][j][k]` with `[X_i, X_j] = sum_k c[i][j][k] X_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureConstants {
    s: usize,
    c: Vec<BigRational>,
}

impl StructureConstants {
    pub fn zeros(s: usize) -> Self {
        StructureConstants { s, c: vec![BigRational::zero(); s * s * s] }
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &BigRational {
        &self.c[(i * self.s + j) * self.s + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: BigRational) {
        let s = self.s;
        self.c[(i * s + j) * s + k] = v;
    }

    pub fn is_antisymmetric(&self) -> bool {
        let s = self.s;
        (0..s).all(|i| (0..s).all(|j| (0..s).all(|k| *self.get(i, j, k) == -self.get(j, i, k))))
    }

    pub fn satisfies_jacobi(&self) -> bool {
        let s = self.s;
        for i in 0..s {
            for j in 0..s {
                for k in 0..s {
                    for l in 0..s {
                        let mut acc = BigRational::zero();
                        for m in 0..s {
                            acc += self.get(i, j, m) * self.get(m, k, l);
                            acc += self.get(j, k, m) * self.get(m, i, l);
                            acc += self.get(k, i, m) * self.get(m, j, l);
                        }
                        if !acc.is_zero() {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// First triple where the tables differ.
    pub fn first_difference(&self, other: &StructureConstants) -> Option<(usize, usize, usize)> {
        if self.s != other.s {
            return Some((0, 0, 0));
        }
        let s = self.s;
        for i in 0..s {
            for j in 0..s {
                for k in 0..s {
                    if self.get(i, j, k) != other.get(i, j, k) {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    /// Relabel with `perm[i]` the new index of old basis element `i`.
    pub fn permuted(&self, perm: &[usize]) -> StructureConstants {
        let mut out = StructureConstants::zeros(self.s);
        for i in 0..self.s {
            for j in 0..self.s {
                for k in 0..self.s {
                    out.set(perm[i], perm[j], perm[k], self.get(i, j, k).clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Closed,
    ExceededCap(usize),
}

/// Evaluation points and the exact rank they certify.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub points: Vec<Point>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopingAlgebra {
    vars: Vec<Var>,
    basis: Vec<VectorField>,
    constants: Option<StructureConstants>,
    verdict: Verdict,
    sample_trace: Vec<BigRational>,
    samples_drawn: usize,
}

impl EnvelopingAlgebra {
    /// Wrap an explicit basis; brackets must close over the rationals.
    pub fn from_basis(basis: Vec<VectorField>) -> Result<Self, EnvelopeError> {
        let vars = basis.first().ok_or(EnvelopeError::Empty)?.vars().to_vec();
        let frame = MonomialFrame::new(&basis)?;
        if frame.rank() < basis.len() {
            return Err(EnvelopeError::DependentBasis);
        }
        let constants = structure_constants(&basis)?;
        Ok(EnvelopingAlgebra {
            vars,
            basis,
            constants: Some(constants),
            verdict: Verdict::Closed,
            sample_trace: Vec::new(),
            samples_drawn: 0,
        })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn basis(&self) -> &[VectorField] {
        &self.basis
    }

    /// `None` unless the verdict is `Closed`.
    pub fn dim(&self) -> Option<usize> {
        match self.verdict {
            Verdict::Closed => Some(self.basis.len()),
            Verdict::ExceededCap(_) => None,
        }
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn structure_constants(&self) -> Option<&StructureConstants> {
        self.constants.as_ref()
    }

    /// Times whose slices seeded the closure.
    pub fn sample_trace(&self) -> &[BigRational] {
        &self.sample_trace
    }

    pub fn samples_drawn(&self) -> usize {
        self.samples_drawn
    }

    /// Exact coordinates of `f` in the basis, or `None` outside the span.
    pub fn coordinates(&self, f: &VectorField) -> Result<Option<Vec<BigRational>>, EnvelopeError> {
        coordinates_in(&self.basis, f)
    }

    /// Same span as `other`, tested exactly.
    pub fn same_span(&self, other: &[VectorField]) -> Result<bool, EnvelopeError> {
        let mut all = self.basis.clone();
        all.extend(other.iter().cloned());
        let r = MonomialFrame::new(&all)?.rank();
        Ok(r == self.basis.len() && MonomialFrame::new(other)?.rank() == r)
    }
}

/// Common-denominator coefficient table of a family of fields: column
/// `(l, m)` holds the coefficient of monomial `m` in component `l` times `L`.
struct MonomialFrame {
    den: Poly,
    columns: Vec<(usize, Monomial)>,
    rows: Vec<Vec<BigRational>>,
}

fn lcm(a: &Poly, b: &Poly) -> Poly {
    let g = gcd(a, b);
    (a * b).div_exact(&g).expect("gcd divides product")
}

fn scaled_coefficients(f: &VectorField, den: &Poly) -> Option<BTreeMap<(usize, Monomial), BigRational>> {
    let mut out = BTreeMap::new();
    for (l, c) in f.components().iter().enumerate() {
        let factor = den.div_exact(c.denominator())?;
        for (m, v) in (c.numerator() * &factor).terms() {
            out.insert((l, m.clone()), v.clone());
        }
    }
    Some(out)
}

impl MonomialFrame {
    fn new(fields: &[VectorField]) -> Result<Self, EnvelopeError> {
        let mut den = Poly::one();
        for f in fields {
            for c in f.components() {
                den = lcm(&den, c.denominator());
            }
        }
        let tables: Vec<_> = fields
            .iter()
            .map(|f| scaled_coefficients(f, &den).expect("den is a common multiple"))
            .collect();
        let columns: Vec<(usize, Monomial)> =
            tables.iter().flat_map(|t| t.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
        let rows = tables
            .iter()
            .map(|t| columns.iter().map(|k| t.get(k).cloned().unwrap_or_else(BigRational::zero)).collect())
            .collect();
        Ok(MonomialFrame { den, columns, rows })
    }

    fn rank(&self) -> usize {
        crate::linalg::rank(&self.rows)
    }

    /// Reduced row echelon basis of the span, as fields.
    fn canonical(&self, vars: &[Var]) -> Vec<VectorField> {
        let mut m = self.rows.clone();
        let pivots = rref(&mut m);
        m.truncate(pivots.len());
        m.iter()
            .map(|row| {
                let mut comps = vec![Vec::new(); vars.len()];
                for ((l, mono), v) in self.columns.iter().zip(row) {
                    if !v.is_zero() {
                        comps[*l].push((mono.clone(), v.clone()));
                    }
                }
                let comps = comps
                    .into_iter()
                    .map(|terms| RationalExpr::new(Poly::from_terms(terms), self.den.clone()))
                    .collect();
                VectorField::new(vars.to_vec(), comps).expect("same variables")
            })
            .collect()
    }
}

/// Exact coordinates of `f` in `basis` by monomial comparison.
pub fn coordinates_in(basis: &[VectorField], f: &VectorField) -> Result<Option<Vec<BigRational>>, EnvelopeError> {
    let mut all = basis.to_vec();
    all.push(f.clone());
    let frame = MonomialFrame::new(&all)?;
    let (target, cols) = frame.rows.split_last().expect("nonempty");
    Ok(match solve_columns(cols, target) {
        Solution::Unique(c) => Some(c),
        Solution::Inconsistent => None,
        Solution::Underdetermined => return Err(EnvelopeError::DependentBasis),
    })
}

fn structure_constants(basis: &[VectorField]) -> Result<StructureConstants, EnvelopeError> {
    let s = basis.len();
    let mut c = StructureConstants::zeros(s);
    for i in 0..s {
        for j in (i + 1)..s {
            let b = basis[i].lie_bracket(&basis[j])?;
            if b.is_zero() {
                continue;
            }
            let coords = coordinates_in(basis, &b)?.ok_or(EnvelopeError::NotClosed(i, j))?;
            // symbolic confirmation of the identity
            let terms: Vec<_> = coords.iter().cloned().zip(basis.iter()).collect();
            let combo = VectorField::linear_combination(basis[0].vars(), &terms)?;
            if !b.sub(&combo)?.is_zero() {
                return Err(EnvelopeError::NotClosed(i, j));
            }
            for (k, v) in coords.into_iter().enumerate() {
                c.set(j, i, k, -v.clone());
                c.set(i, j, k, v);
            }
        }
    }
    Ok(c)
}

/// Incremental independence test by exact evaluation at seeded random points.
struct SpanTester {
    vars: Vec<Var>,
    sampler: RationalSampler,
    points: Vec<Point>,
    members: Vec<VectorField>,
    echelon: EchelonBasis<BigRational>,
}

impl SpanTester {
    fn new(vars: &[Var], seed: u64, stream: u64) -> Self {
        SpanTester {
            vars: vars.to_vec(),
            sampler: RationalSampler::new(seed, stream),
            points: Vec::new(),
            members: Vec::new(),
            echelon: EchelonBasis::new(),
        }
    }

    fn certificate(&self) -> Certificate {
        Certificate { points: self.points.clone(), rank: self.echelon.rank() }
    }

    fn evaluate_at(f: &VectorField, p: &Point) -> Result<Option<Vec<BigRational>>, EnvelopeError> {
        match f.eval_exact(p) {
            Ok(v) => Ok(Some(v)),
            Err(ExprError::PoleAtPoint) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// A fresh point where every member and `extra` is finite.
    fn draw_point(&mut self, extra: Option<&VectorField>) -> Result<Point, EnvelopeError> {
        'draw: for _ in 0..RESAMPLE_BUDGET {
            let p = self.sampler.point(&self.vars);
            for f in self.members.iter().chain(extra) {
                if Self::evaluate_at(f, &p)?.is_none() {
                    continue 'draw;
                }
            }
            return Ok(p);
        }
        Err(EnvelopeError::DegenerateSampling)
    }

    fn rebuild(&mut self) -> Result<(), EnvelopeError> {
        let mut e = EchelonBasis::new();
        for f in &self.members {
            let v = self.eval_members_only(f)?;
            e.insert(&v);
        }
        self.echelon = e;
        Ok(())
    }

    fn eval_members_only(&self, f: &VectorField) -> Result<Vec<BigRational>, EnvelopeError> {
        let mut out = Vec::with_capacity(self.points.len() * self.vars.len());
        for p in &self.points {
            out.extend(Self::evaluate_at(f, p)?.ok_or(EnvelopeError::DegenerateSampling)?);
        }
        Ok(out)
    }

    /// Evaluation vector of `f`, replacing points where it has a pole.
    fn eval(&mut self, f: &VectorField) -> Result<Vec<BigRational>, EnvelopeError> {
        let mut replaced = false;
        for j in 0..self.points.len() {
            if Self::evaluate_at(f, &self.points[j])?.is_none() {
                self.points[j] = self.draw_point(Some(f))?;
                replaced = true;
            }
        }
        if replaced {
            self.rebuild()?;
        }
        self.eval_members_only(f)
    }

    fn ensure_points(&mut self, members: usize, extra: &VectorField) -> Result<(), EnvelopeError> {
        let needed = 2 * members + 3;
        if self.points.len() >= needed {
            return Ok(());
        }
        let target = needed.max(2 * self.points.len());
        while self.points.len() < target {
            let p = self.draw_point(Some(extra))?;
            self.points.push(p);
        }
        self.rebuild()
    }

    /// Adjoin `f` when it is independent of the current members.
    fn try_insert(&mut self, f: &VectorField) -> Result<bool, EnvelopeError> {
        self.ensure_points(self.members.len() + 1, f)?;
        let v = self.eval(f)?;
        if self.echelon.insert(&v) {
            self.members.push(f.clone());
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

/// A maximal independent subfamily, earliest indices kept.
pub fn independent_subset(fields: &[VectorField], seed: u64) -> Result<(Vec<usize>, Certificate), EnvelopeError> {
    let first = fields.first().ok_or(EnvelopeError::Empty)?;
    for f in fields {
        if f.vars() != first.vars() {
            return Err(FieldError::DimensionMismatch(first.dim(), f.dim()).into());
        }
    }
    let mut t = SpanTester::new(first.vars(), seed, 1);
    // enough points for the whole family up front
    t.ensure_points(fields.len(), first)?;
    let mut idx = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        if !f.is_zero() && t.try_insert(f)? {
            idx.push(i);
        }
    }
    Ok((idx, t.certificate()))
}

/// Sample times on `[1, 2]`: a grid with seeded jitter inside each cell.
fn sample_times(m: usize, sampler: &mut RationalSampler, cell: usize) -> BigRational {
    let lo = BigRational::one() + BigRational::new(BigInt::from(cell), BigInt::from(m));
    let hi = BigRational::one() + BigRational::new(BigInt::from(cell + 1), BigInt::from(m));
    sampler.rational_in(&lo, &hi)
}

pub fn compute_enveloping_algebra(s: &TimeSystem, cap: usize, seed: u64) -> Result<EnvelopingAlgebra, EnvelopeError> {
    assert!(cap >= 1, "cap must be positive");
    let vars = s.vars().to_vec();
    let m_t = 2 * cap + 1;
    let mut times = RationalSampler::new(seed, 0);
    let mut tester = SpanTester::new(&vars, seed, 1);
    let mut trace = Vec::new();
    let mut drawn = 0;
    let bound = s.terms().len();

    for cell in 0..m_t {
        if tester.members.len() >= bound {
            // every further slice lies in the span of the term fields
            break;
        }
        let mut slice = None;
        for _ in 0..RESAMPLE_BUDGET {
            let t0 = sample_times(m_t, &mut times, cell);
            drawn += 1;
            match s.freeze_time(&t0) {
                Ok(f) => {
                    slice = Some((t0, f));
                    break;
                }
                Err(FieldError::PoleAtTime(_)) | Err(FieldError::NonRealCoefficient(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let Some((t0, f)) = slice else { continue };
        if f.is_zero() {
            continue;
        }
        if tester.try_insert(&f)? {
            trace.push(t0);
            if tester.members.len() > cap {
                return Ok(exceeded(vars, tester.members, cap, trace, drawn));
            }
        }
    }
    if tester.members.is_empty() {
        return Ok(EnvelopingAlgebra {
            vars,
            basis: Vec::new(),
            constants: Some(StructureConstants::zeros(0)),
            verdict: Verdict::Closed,
            sample_trace: trace,
            samples_drawn: drawn,
        });
    }

    // breadth-first closure over generations
    let mut seen: HashSet<VectorField> = tester.members.iter().cloned().collect();
    let mut done = 0usize;
    let mut frontier_start = 0usize;
    loop {
        let current = tester.members.len();
        let mut grew = false;
        for j in frontier_start.max(1)..current {
            for i in 0..j {
                if j < done && i < done {
                    continue;
                }
                let b = tester.members[i].lie_bracket(&tester.members[j])?;
                if b.is_zero() || !seen.insert(b.clone()) {
                    continue;
                }
                if tester.try_insert(&b)? {
                    grew = true;
                    if tester.members.len() > cap {
                        return Ok(exceeded(vars, tester.members, cap, trace, drawn));
                    }
                }
            }
        }
        done = current;
        frontier_start = current;
        if !grew {
            break;
        }
    }

    let frame = MonomialFrame::new(&tester.members)?;
    let basis = frame.canonical(&vars);
    let constants = structure_constants(&basis)?;
    Ok(EnvelopingAlgebra {
        vars,
        basis,
        constants: Some(constants),
        verdict: Verdict::Closed,
        sample_trace: trace,
        samples_drawn: drawn,
    })
}

fn exceeded(vars: Vec<Var>, basis: Vec<VectorField>, cap: usize, trace: Vec<BigRational>, drawn: usize) -> EnvelopingAlgebra {
    EnvelopingAlgebra {
        vars,
        basis,
        constants: None,
        verdict: Verdict::ExceededCap(cap),
        sample_trace: trace,
        samples_drawn: drawn,
    }
}

/// A coefficient `f_i(t)` of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    /// Closed form, with its exact rational version when there is one.
    Closed { expr: NumericExpr, exact: Option<RationalExpr> },
    Tabulated(Tabulated),
}

impl Coefficient {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient::Closed { expr, .. } => expr.eval_at(t).map(|z| z.re).unwrap_or(f64::NAN),
            Coefficient::Tabulated(tab) => tab.eval(t),
        }
    }
}

/// Barycentric interpolant on Chebyshev points of the second kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    weights: Vec<f64>,
}

impl Tabulated {
    pub fn chebyshev_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let x = (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect()
    }

    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        let n = nodes.len();
        let weights = (0..n)
            .map(|j| {
                let w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        Tabulated { nodes, values, weights }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((x, y), w) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = t - x;
            if d == 0.0 {
                return *y;
            }
            num += w * y / d;
            den += w / d;
        }
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub coefficients: Vec<Coefficient>,
    pub basis: Vec<VectorField>,
}

impl Decomposition {
    /// `sum f_i(t0) X_i` with exact coefficients where available.
    pub fn field_at(&self, t0: &BigRational) -> Result<VectorField, EnvelopeError> {
        let vars = self.basis.first().ok_or(EnvelopeError::Empty)?.vars();
        let mut terms = Vec::new();
        for (c, x) in self.coefficients.iter().zip(&self.basis) {
            let v = match c {
                Coefficient::Closed { exact: Some(e), .. } => e.eval_rational(&|_| Some(t0.clone()))?,
                other => BigRational::from_float(other.eval(rational_to_f64(t0)))
                    .ok_or_else(|| EnvelopeError::InconsistentSlice(t0.to_string()))?,
            };
            terms.push((v, x));
        }
        Ok(VectorField::linear_combination(vars, &terms)?)
    }
}

const TABLE_NODES: usize = 33;

/// Coordinates of `S` against the basis of `E`.
pub fn decompose_system(s: &TimeSystem, e: &EnvelopingAlgebra) -> Result<Decomposition, EnvelopeError> {
    let basis = e.basis().to_vec();
    if basis.is_empty() {
        return Ok(Decomposition { coefficients: Vec::new(), basis });
    }
    let time = vec![s.time().clone()];
    let mut per_term = Vec::new();
    for term in s.terms() {
        match e.coordinates(&term.field)? {
            Some(c) => per_term.push(c),
            None => return tabulate(s, e),
        }
    }
    let mut coefficients = Vec::with_capacity(basis.len());
    for i in 0..basis.len() {
        let combo: Vec<(BigRational, &NumericExpr)> =
            per_term.iter().zip(s.terms()).map(|(a, t)| (a[i].clone(), &t.coeff)).collect();
        let expr = NumericExpr::linear_combination(time.clone(), &combo);
        let exact = s
            .terms()
            .iter()
            .zip(&per_term)
            .try_fold(RationalExpr::zero(), |acc, (t, a)| t.exact.as_ref().map(|g| &acc + &g.scale(&a[i])));
        let expr = match &exact {
            Some(r) => NumericExpr::from_rational(time.clone(), r)?,
            None => expr,
        };
        coefficients.push(Coefficient::Closed { expr, exact });
    }
    Ok(Decomposition { coefficients, basis })
}

fn tabulate(s: &TimeSystem, e: &EnvelopingAlgebra) -> Result<Decomposition, EnvelopeError> {
    let nodes = Tabulated::chebyshev_nodes(1.0, 2.0, TABLE_NODES);
    let mut values = vec![Vec::with_capacity(nodes.len()); e.basis().len()];
    for &t in &nodes {
        let t0 = BigRational::from_float(t).expect("finite node");
        let slice = s.freeze_time(&t0)?;
        let c = e.coordinates(&slice)?.ok_or_else(|| EnvelopeError::InconsistentSlice(t0.to_string()))?;
        for (col, v) in values.iter_mut().zip(c) {
            col.push(rational_to_f64(&v));
        }
    }
    let coefficients = values
        .into_iter()
        .map(|v| Coefficient::Tabulated(Tabulated::new(nodes.clone(), v)))
        .collect();
    Ok(Decomposition { coefficients, basis: e.basis().to_vec() })
}
