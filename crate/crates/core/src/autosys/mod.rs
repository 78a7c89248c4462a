//! Automorphic systems on matrix groups: the matrix equation
//! `sigma' = (sum f_i(t) A_i) sigma` built from a group presentation, its
//! solution, the action on initial conditions, and translation constancy.

mod presentation;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::envelope::{coordinates_in, Decomposition, EnvelopeError, EnvelopingAlgebra};
use crate::expr::rational_to_f64;
use crate::numint::{integrate_matrix_ivp, IntegrationError, IvpSpec, MatrixTrajectory, StepStats};
use crate::vfield::FieldError;

pub use presentation::{right_bracket, Action, ExactMatrix, GroupPresentation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutoError {
    #[error("unknown group presentation `{0}`")]
    UnknownPresentation(String),
    #[error("presentation file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("structure constants differ at ({i}, {j}, {k})")]
    StructureConstantMismatch { i: usize, j: usize, k: usize },
    #[error("basis field {0} is not a combination of fundamental fields")]
    NotInSpan(usize),
    #[error("the enveloping algebra did not close")]
    NotClosed,
    #[error("the action has a pole at t = {t}")]
    ActionPole { t: f64 },
    #[error("singular matrix at t = {t}")]
    SingularMatrix { t: f64 },
    #[error("integration failed: {0}")]
    IntegrationFailure(#[from] IntegrationError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

impl From<FieldError> for AutoError {
    fn from(e: FieldError) -> Self {
        AutoError::Envelope(e.into())
    }
}

/// Images of the enveloping basis in the generator basis: `X_i -> sum_a m[i][a] A_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    rows: Vec<Vec<BigRational>>,
}

impl Matching {
    /// `X_i -> A_{perm[i]}`.
    pub fn bijection(perm: &[usize]) -> Matching {
        let s = perm.len();
        let rows = perm
            .iter()
            .map(|&p| (0..s).map(|a| if a == p { BigRational::one() } else { BigRational::zero() }).collect())
            .collect();
        Matching { rows }
    }

    /// Express each basis field through the fundamental fields of `p`.
    pub fn by_fundamental_fields(e: &EnvelopingAlgebra, p: &GroupPresentation) -> Result<Matching, AutoError> {
        let fields = p.fundamental_fields(e.vars())?;
        let rows = e
            .basis()
            .iter()
            .enumerate()
            .map(|(i, x)| coordinates_in(&fields, x)?.ok_or(AutoError::NotInSpan(i)))
            .collect::<Result<_, _>>()?;
        Ok(Matching { rows })
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    fn as_permutation(&self) -> Option<Vec<usize>> {
        let s = self.rows.len();
        let perm: Vec<usize> = self
            .rows
            .iter()
            .map(|r| {
                let ones: Vec<usize> = (0..r.len()).filter(|&a| !r[a].is_zero()).collect();
                match ones.as_slice() {
                    [a] if r[*a].is_one() && r.len() == s => Some(*a),
                    _ => None,
                }
            })
            .collect::<Option<_>>()?;
        let mut seen = vec![false; s];
        for &p in &perm {
            if std::mem::replace(&mut seen[p], true) {
                return None;
            }
        }
        Some(perm)
    }
}

pub type CoefficientFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `sigma' = M(t) sigma`, `M(t) = sum f_a(t) A_a`.
#[derive(Clone)]
pub struct AutomorphicSystem {
    presentation: GroupPresentation,
    coefficients: Vec<CoefficientFn>,
    generators: Vec<DMatrix<f64>>,
    sigma0: DMatrix<f64>,
}

impl fmt::Debug for AutomorphicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AutomorphicSystem")
            .field("presentation", &self.presentation.name)
            .field("coefficients", &self.coefficients.len())
            .field("sigma0", &self.sigma0)
            .finish()
    }
}

impl AutomorphicSystem {
    pub fn new(presentation: GroupPresentation, coefficients: Vec<CoefficientFn>) -> Result<Self, AutoError> {
        if coefficients.len() != presentation.s() {
            return Err(AutoError::DimensionMismatch { expected: presentation.s(), found: coefficients.len() });
        }
        let generators = presentation.generators.iter().map(presentation::to_dmatrix).collect();
        let d = presentation.d;
        Ok(AutomorphicSystem { presentation, coefficients, generators, sigma0: DMatrix::identity(d, d) })
    }

    /// Start from `sigma(t0) = sigma0` instead of the identity.
    pub fn with_initial(mut self, sigma0: DMatrix<f64>) -> Self {
        self.sigma0 = sigma0;
        self
    }

    pub fn presentation(&self) -> &GroupPresentation {
        &self.presentation
    }

    pub fn initial(&self) -> &DMatrix<f64> {
        &self.sigma0
    }

    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        self.coefficients.iter().map(|f| f(t)).collect()
    }

    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        let d = self.presentation.d;
        self.coefficients
            .iter()
            .zip(&self.generators)
            .fold(DMatrix::zeros(d, d), |acc, (f, a)| acc + a * f(t))
    }
}

/// Check the matching against the structure constants and reindex the
/// decomposition coefficients onto the generators.
pub fn build_automorphic_system(
    e: &EnvelopingAlgebra,
    dec: &Decomposition,
    p: &GroupPresentation,
    matching: &Matching,
) -> Result<AutomorphicSystem, AutoError> {
    let ce = e.structure_constants().ok_or(AutoError::NotClosed)?;
    let s = ce.dim();
    if matching.rows.len() != s {
        return Err(AutoError::DimensionMismatch { expected: s, found: matching.rows.len() });
    }
    if let Some(r) = matching.rows.iter().find(|r| r.len() != p.s()) {
        return Err(AutoError::DimensionMismatch { expected: p.s(), found: r.len() });
    }
    if dec.coefficients.len() != s {
        return Err(AutoError::DimensionMismatch { expected: s, found: dec.coefficients.len() });
    }
    match matching.as_permutation() {
        Some(perm) if perm.len() == p.s() => {
            let mut inv = vec![0; s];
            for (i, &a) in perm.iter().enumerate() {
                inv[a] = i;
            }
            if let Some((i, j, k)) = ce.first_difference(&p.constants.permuted(&inv)) {
                return Err(AutoError::StructureConstantMismatch { i, j, k });
            }
        }
        _ => {
            let m = &matching.rows;
            let cp = &p.constants;
            for i in 0..s {
                for j in 0..s {
                    for c in 0..p.s() {
                        let mut lhs = BigRational::zero();
                        for a in 0..p.s() {
                            for b in 0..p.s() {
                                if !m[i][a].is_zero() && !m[j][b].is_zero() {
                                    lhs += &m[i][a] * &m[j][b] * cp.get(a, b, c);
                                }
                            }
                        }
                        let rhs: BigRational = (0..s).map(|k| ce.get(i, j, k) * &m[k][c]).sum();
                        if lhs != rhs {
                            return Err(AutoError::StructureConstantMismatch { i, j, k: c });
                        }
                    }
                }
            }
        }
    }
    let coeffs: Vec<CoefficientFn> = (0..p.s())
        .map(|a| {
            let parts: Vec<(f64, crate::envelope::Coefficient)> = (0..s)
                .filter(|&i| !matching.rows[i][a].is_zero())
                .map(|i| (rational_to_f64(&matching.rows[i][a]), dec.coefficients[i].clone()))
                .collect();
            Arc::new(move |t: f64| parts.iter().map(|(w, c)| w * c.eval(t)).sum()) as CoefficientFn
        })
        .collect();
    AutomorphicSystem::new(p.clone(), coeffs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTrajectory {
    pub traj: MatrixTrajectory,
    /// Max of `|det sigma(t) - det sigma(t0)|` over the checkpoints.
    pub det_drift: f64,
}

impl SigmaTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.traj.times
    }

    pub fn states(&self) -> &[DMatrix<f64>] {
        &self.traj.states
    }

    pub fn stats(&self) -> &StepStats {
        &self.traj.stats
    }

    pub fn at(&self, t: f64) -> Option<DMatrix<f64>> {
        self.traj.at(t)
    }
}

/// Solve `sigma' = M(t) sigma` on `span` with `checkpoints + 1` uniform outputs.
pub fn solve_automorphic(
    a: &AutomorphicSystem,
    span: (f64, f64),
    tol: f64,
    checkpoints: usize,
) -> Result<SigmaTrajectory, AutoError> {
    let spec = IvpSpec::new(span.0, Vec::new(), span.1).tolerances(tol, tol).uniform(checkpoints).dense();
    let traj = integrate_matrix_ivp(&spec, &a.sigma0, |t, s, out| {
        out.copy_from(&(a.matrix_at(t) * s));
    })?;
    let d0 = a.sigma0.determinant();
    let det_drift = traj.states.iter().map(|s| (s.determinant() - d0).abs()).fold(0.0, f64::max);
    Ok(SigmaTrajectory { traj, det_drift })
}

/// Max of `|sigma' - M(t) sigma|` at checkpoint midpoints, differentiating the dense output.
pub fn solution_residual(a: &AutomorphicSystem, sigma: &SigmaTrajectory) -> Option<f64> {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for w in sigma.times().windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        let d = (sigma.at(t + h)? - sigma.at(t - h)?) / (2.0 * h);
        worst = worst.max((d - a.matrix_at(t) * sigma.at(t)?).amax());
    }
    Some(worst)
}

/// `sigma(t) . x0` at every checkpoint.
pub fn act_solution(p: &GroupPresentation, sigma: &SigmaTrajectory, x0: &[f64]) -> Result<Vec<Vec<f64>>, AutoError> {
    if x0.len() != p.point_dim() {
        return Err(AutoError::DimensionMismatch { expected: p.point_dim(), found: x0.len() });
    }
    sigma
        .times()
        .iter()
        .zip(sigma.states())
        .map(|(&t, s)| p.act(s, x0).ok_or(AutoError::ActionPole { t }))
        .collect()
}

/// Max entrywise drift of `sigma(t)^-1 tau(t)` from its value at the first checkpoint.
pub fn check_translation_constancy(sigma: &SigmaTrajectory, tau: &SigmaTrajectory) -> Result<f64, AutoError> {
    if sigma.times().len() != tau.times().len() || sigma.times().iter().zip(tau.times()).any(|(a, b)| a != b) {
        return Err(AutoError::DimensionMismatch { expected: sigma.times().len(), found: tau.times().len() });
    }
    let mut first: Option<DMatrix<f64>> = None;
    let mut drift: f64 = 0.0;
    for ((&t, s), u) in sigma.times().iter().zip(sigma.states()).zip(tau.states()) {
        let inv = s
            .clone()
            .try_inverse()
            .filter(|_| s.determinant().abs() > 1e-14 * s.amax().powi(s.nrows() as i32))
            .ok_or(AutoError::SingularMatrix { t })?;
        let l = inv * u;
        match &first {
            None => first = Some(l),
            Some(l0) => drift = drift.max((l - l0).amax()),
        }
    }
    Ok(drift)
}

/// Right translation `sigma -> sigma l` of the group.
#[derive(Debug, Clone, PartialEq)]
pub struct RightTranslation(pub ExactMatrix);

impl RightTranslation {
    pub fn apply(&self, sigma: &ExactMatrix) -> ExactMatrix {
        let n = sigma.len();
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| &sigma[i][k] * &self.0[k][j]).sum()).collect()).collect()
    }

    /// `self o other`.
    pub fn after(&self, other: &RightTranslation) -> RightTranslation {
        let n = self.0.len();
        let id: ExactMatrix =
            (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
        RightTranslation(self.apply(&other.apply(&id)))
    }

    /// The group element attached to the translation: its value at the identity.
    pub fn element(&self) -> &ExactMatrix {
        &self.0
    }
}

#[cfg(test)]
mod tests;
