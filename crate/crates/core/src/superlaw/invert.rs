use num_rational::BigRational;

use crate::expr::{Monomial, Poly, RationalExpr};
use crate::linalg::{solve_columns, Solution};

use super::{LawError, SuperpositionLaw};

/// Solve `phi(xbar; lambda) = x` for `lambda`, when every equation is affine
/// in the `lambda`s after clearing denominators.
pub fn invert_law_locally(law: &SuperpositionLaw) -> Result<Vec<RationalExpr>, LawError> {
    let lambdas = law.lambdas();
    let n = law.n();
    let mut columns = vec![vec![RationalExpr::zero(); n]; n];
    let mut rhs = vec![RationalExpr::zero(); n];
    for (i, (phi, x)) in law.phi.iter().zip(&law.vars).enumerate() {
        let eq = phi.numerator() - &(phi.denominator() * &Poly::var(x.clone()));
        let mut parts: Vec<Vec<(Monomial, BigRational)>> = vec![Vec::new(); n + 1];
        for (m, c) in eq.terms() {
            let hits: Vec<usize> = (0..n).filter(|&j| m.exponent(&lambdas[j]) > 0).collect();
            match hits.as_slice() {
                [] => parts[n].push((m.clone(), c.clone())),
                [j] if m.exponent(&lambdas[*j]) == 1 => {
                    let rest = m.div(&Monomial::var(lambdas[*j].clone(), 1)).expect("divisible");
                    parts[*j].push((rest, c.clone()));
                }
                _ => {
                    return Err(LawError::NotInvertibleInScope(format!(
                        "phi[{}] is not linear-fractional in the parameters",
                        i + 1
                    )))
                }
            }
        }
        for (j, col) in columns.iter_mut().enumerate() {
            col[i] = RationalExpr::from_poly(Poly::from_terms(parts[j].drain(..)));
        }
        rhs[i] = -RationalExpr::from_poly(Poly::from_terms(parts[n].drain(..)));
    }
    let psi = match solve_columns(&columns, &rhs) {
        Solution::Unique(v) => v,
        Solution::Underdetermined => {
            return Err(LawError::NotInvertibleInScope("Jacobian in the parameters is singular".into()))
        }
        Solution::Inconsistent => return Err(LawError::NotInvertibleInScope("no solution for the parameters".into())),
    };
    let mut check = law.clone();
    check.psi = psi.clone();
    if check.round_trip()? != (true, true) {
        return Err(LawError::NotInvertibleInScope("round trip fails".into()));
    }
    Ok(psi)
}
