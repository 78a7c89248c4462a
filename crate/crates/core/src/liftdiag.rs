//! Diagnostics on cartesian powers: generic rank of lifted families, minimal
//! faithful power, Lie inequality, constancy of structure functions and
//! transversality to the last factor.

use num_rational::BigRational;
use serde::Serialize;

use crate::envelope::{EnvelopeError, StructureConstants, RESAMPLE_BUDGET};
use crate::expr::ExprError;
use crate::linalg::{rank, solve_columns, Solution};
use crate::sampling::{Point, RationalSampler};
use crate::vfield::{FieldError, VectorField};

/// Random frames per rank or constancy test.
pub const GENERIC_POINTS: usize = 5;

const STREAM_RANK: u64 = 11;
const STREAM_CONSTANCY: u64 = 12;

/// A point of `M^k` as `k` points of `M`.
pub type Frame = Vec<Point>;

fn check_dims(fields: &[VectorField]) -> Result<(), EnvelopeError> {
    let first = fields.first().ok_or(EnvelopeError::Empty)?;
    for f in fields {
        if f.vars() != first.vars() {
            return Err(FieldError::DimensionMismatch(first.dim(), f.dim()).into());
        }
    }
    Ok(())
}

/// Components of the lift of `f` at a frame, copy by copy; `None` on a pole.
fn eval_lifted(f: &VectorField, frame: &[Point]) -> Result<Option<Vec<BigRational>>, EnvelopeError> {
    let mut out = Vec::with_capacity(frame.len() * f.dim());
    for p in frame {
        match f.eval_exact(p) {
            Ok(v) => out.extend(v),
            Err(ExprError::PoleAtPoint) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(out))
}

/// Rows of lifted components for every field, redrawing on poles.
fn sample_rows(
    fields: &[VectorField],
    copies: usize,
    sampler: &mut RationalSampler,
) -> Result<(Frame, Vec<Vec<BigRational>>), EnvelopeError> {
    let vars = fields[0].vars();
    'draw: for _ in 0..RESAMPLE_BUDGET {
        let frame: Frame = (0..copies).map(|_| sampler.point(vars)).collect();
        let mut rows = Vec::with_capacity(fields.len());
        for f in fields {
            match eval_lifted(f, &frame)? {
                Some(r) => rows.push(r),
                None => continue 'draw,
            }
        }
        return Ok((frame, rows));
    }
    Err(EnvelopeError::DegenerateSampling)
}

/// Max over seeded random frames of the rank of the lifted family on `M^r`.
pub fn generic_rank(fields: &[VectorField], r: usize, seed: u64) -> Result<usize, EnvelopeError> {
    assert!(r >= 1, "power must be positive");
    check_dims(fields)?;
    let mut sampler = RationalSampler::new(seed, STREAM_RANK + ((r as u64) << 8));
    let mut best = 0;
    for _ in 0..GENERIC_POINTS {
        let (_, rows) = sample_rows(fields, r, &mut sampler)?;
        best = best.max(rank(&rows));
        if best == fields.len() {
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaithfulPower {
    Reached(usize),
    NotReached(usize),
}

/// Smallest `r <= r_max` at which the lifted family has full generic rank.
pub fn minimal_faithful_power(fields: &[VectorField], r_max: usize, seed: u64) -> Result<FaithfulPower, EnvelopeError> {
    check_dims(fields)?;
    for r in 1..=r_max {
        if generic_rank(fields, r, seed)? == fields.len() {
            return Ok(FaithfulPower::Reached(r));
        }
    }
    Ok(FaithfulPower::NotReached(r_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LieInequality {
    pub s: usize,
    pub n: usize,
    pub r: usize,
    pub holds: bool,
    pub equality: bool,
}

/// `s <= n * r`.
pub fn check_lie_inequality(s: usize, n: usize, r: usize) -> LieInequality {
    LieInequality { s, n, r, holds: s <= n * r, equality: s == n * r }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constancy {
    Constant(StructureConstants),
    /// Frames at which the solved structure functions disagree or have no solution.
    NonConstant { pair: (usize, usize), witnesses: Vec<Frame> },
}

impl Constancy {
    pub fn is_constant(&self) -> bool {
        matches!(self, Constancy::Constant(_))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstancyError {
    #[error("lifted family is singular at every sampled frame")]
    SingularSolve,
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

impl From<FieldError> for ConstancyError {
    fn from(e: FieldError) -> Self {
        ConstancyError::Envelope(e.into())
    }
}

/// Solve `[Y_i, Y_j] = sum_k l_ijk Y_k` on `M^(r+1)` at random frames and
/// test that the `l_ijk` are the same constants everywhere.
pub fn check_structure_constancy(fields: &[VectorField], r: usize, seed: u64) -> Result<Constancy, ConstancyError> {
    check_dims(fields)?;
    let s = fields.len();
    let copies = r + 1;
    let mut brackets = Vec::new();
    for i in 0..s {
        for j in (i + 1)..s {
            brackets.push(((i, j), fields[i].lie_bracket(&fields[j])?));
        }
    }
    let mut all = fields.to_vec();
    all.extend(brackets.iter().map(|(_, b)| b.clone()));

    let mut sampler = RationalSampler::new(seed, STREAM_CONSTANCY + ((r as u64) << 8));
    let mut first: Option<(Frame, Vec<Vec<BigRational>>)> = None;
    for _ in 0..GENERIC_POINTS {
        // redraw frames where the lifted family drops rank
        let mut solved = None;
        for _ in 0..RESAMPLE_BUDGET {
            let (frame, rows) = sample_rows(&all, copies, &mut sampler)?;
            let (cols, targets) = rows.split_at(s);
            let mut sols = Vec::with_capacity(targets.len());
            let mut singular = false;
            for (idx, target) in targets.iter().enumerate() {
                match solve_columns(cols, target) {
                    Solution::Unique(c) => sols.push(c),
                    Solution::Inconsistent => {
                        return Ok(Constancy::NonConstant { pair: brackets[idx].0, witnesses: vec![frame] });
                    }
                    Solution::Underdetermined => {
                        singular = true;
                        break;
                    }
                }
            }
            if !singular {
                solved = Some((frame, sols));
                break;
            }
        }
        let (frame, sols) = solved.ok_or(ConstancyError::SingularSolve)?;
        match &first {
            None => first = Some((frame, sols)),
            Some((f0, s0)) => {
                if let Some(idx) = (0..sols.len()).find(|&k| sols[k] != s0[k]) {
                    return Ok(Constancy::NonConstant { pair: brackets[idx].0, witnesses: vec![f0.clone(), frame] });
                }
            }
        }
    }
    let (f0, sols) = first.expect("at least one frame");
    let mut c = StructureConstants::zeros(s);
    for (((i, j), b), coeffs) in brackets.iter().zip(&sols) {
        let terms: Vec<_> = coeffs.iter().cloned().zip(fields.iter()).collect();
        let combo = VectorField::linear_combination(fields[0].vars(), &terms)?;
        if !b.sub(&combo)?.is_zero() {
            return Ok(Constancy::NonConstant { pair: (*i, *j), witnesses: vec![f0] });
        }
        for (k, v) in coeffs.iter().enumerate() {
            c.set(*i, *j, k, v.clone());
            c.set(*j, *i, k, -v.clone());
        }
    }
    Ok(Constancy::Constant(c))
}

/// Full rank of the family lifted to the first `r` copies only.
pub fn check_transversality(fields: &[VectorField], r: usize, seed: u64) -> Result<bool, EnvelopeError> {
    Ok(generic_rank(fields, r, seed)? == fields.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{compute_enveloping_algebra, DEFAULT_CAP};
    use crate::expr::{parse_rational, vars};
    use crate::vfield::TimeSystem;

    fn field(vs: &[&str], comps: &[&str]) -> VectorField {
        let v = vars(vs);
        let c = comps.iter().map(|s| parse_rational(s, &v).unwrap()).collect();
        VectorField::new(v, c).unwrap()
    }

    fn sl2() -> Vec<VectorField> {
        vec![field(&["x"], &["1"]), field(&["x"], &["x"]), field(&["x"], &["x^2"])]
    }

    fn gl(n: usize) -> Vec<VectorField> {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let v: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let comps: Vec<&str> = (0..n).map(|l| if l == i { v[j] } else { "0" }).collect();
                out.push(field(&v, &comps));
            }
        }
        out
    }

    #[test]
    fn sl2_ranks() {
        let f = sl2();
        assert_eq!(generic_rank(&f, 1, 0).unwrap(), 1);
        assert_eq!(generic_rank(&f, 2, 0).unwrap(), 2);
        assert_eq!(generic_rank(&f, 3, 0).unwrap(), 3);
        assert_eq!(minimal_faithful_power(&f, 5, 0).unwrap(), FaithfulPower::Reached(3));
        assert_eq!(minimal_faithful_power(&f, 2, 0).unwrap(), FaithfulPower::NotReached(2));
    }

    #[test]
    fn gl_ranks() {
        for n in 1..=3 {
            let f = gl(n);
            assert_eq!(generic_rank(&f, n, 4).unwrap(), n * n);
            assert_eq!(minimal_faithful_power(&f, 4, 4).unwrap(), FaithfulPower::Reached(n));
        }
    }

    #[test]
    fn single_field() {
        let f = vec![field(&["x"], &["1"])];
        for r in 1..=3 {
            assert_eq!(generic_rank(&f, r, 0).unwrap(), 1);
        }
        assert!(check_structure_constancy(&f, 1, 0).unwrap().is_constant());
        assert!(check_transversality(&f, 1, 0).unwrap());
    }

    #[test]
    fn lie_inequality() {
        assert!(check_lie_inequality(3, 1, 3).holds);
        assert!(check_lie_inequality(3, 1, 3).equality);
        assert!(!check_lie_inequality(4, 1, 3).holds);
        let g = check_lie_inequality(9, 3, 3);
        assert!(g.holds && g.equality);
    }

    #[test]
    fn sl2_constancy_matches_envelope() {
        let nodes = vec![crate::expr::parse_node("1 + t*x + t^2*x^2").unwrap()];
        let s = TimeSystem::from_rhs(crate::expr::Var::new("t"), vars(&["x"]), &nodes).unwrap();
        let e = compute_enveloping_algebra(&s, DEFAULT_CAP, 2).unwrap();
        let Constancy::Constant(c) = check_structure_constancy(e.basis(), 3, 9).unwrap() else { panic!() };
        assert_eq!(&c, e.structure_constants().unwrap());
    }

    #[test]
    fn open_pair_is_not_constant() {
        let f = vec![field(&["x"], &["1"]), field(&["x"], &["x^3"])];
        for r in 1..=3 {
            assert!(!check_structure_constancy(&f, r, 0).unwrap().is_constant());
        }
    }

    #[test]
    fn transversality() {
        assert!(check_transversality(&sl2(), 3, 0).unwrap());
        assert!(!check_transversality(&sl2(), 2, 0).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn family() -> impl Strategy<Value = Vec<VectorField>> {
            prop_oneof![
                proptest::sample::subsequence(sl2(), 1..=3),
                proptest::sample::subsequence(gl(2), 1..=4),
                Just(vec![field(&["x"], &["1"]), field(&["x"], &["x^3"])]),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn generic_rank_is_monotone_and_bounded(fs in family(), seed in any::<u64>()) {
                let (s, n) = (fs.len(), fs[0].dim());
                let mut prev = 0;
                for r in 1..=4 {
                    let k = generic_rank(&fs, r, seed).unwrap();
                    prop_assert!(k >= prev && k <= s.min(n * r));
                    prev = k;
                }
            }

            #[test]
            fn faithful_power_satisfies_the_lie_inequality(fs in family(), seed in any::<u64>(), other in any::<u64>()) {
                let p = minimal_faithful_power(&fs, 6, seed).unwrap();
                prop_assert_eq!(p, minimal_faithful_power(&fs, 6, other).unwrap());
                if let FaithfulPower::Reached(r) = p {
                    prop_assert!(check_lie_inequality(fs.len(), fs[0].dim(), r).holds);
                    prop_assert_eq!(check_transversality(&fs, r, seed).unwrap(), check_transversality(&fs, r, other).unwrap());
                }
            }

            #[test]
            fn constancy_verdict_is_seed_independent(seed in any::<u64>()) {
                let c = check_structure_constancy(&sl2(), 3, seed).unwrap();
                let e = crate::envelope::EnvelopingAlgebra::from_basis(sl2()).unwrap();
                prop_assert_eq!(c, Constancy::Constant(e.structure_constants().unwrap().clone()));
                let open = [field(&["x"], &["1"]), field(&["x"], &["x^3"])];
                prop_assert!(!check_structure_constancy(&open, 3, seed).unwrap().is_constant());
            }
        }
    }
}
