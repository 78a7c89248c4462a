use crate::expr::{parse_rational, vars, Poly, RationalExpr, Var};

use super::{invert_law_locally, lambda_vars, LawError, SuperpositionLaw};

pub const CATALOG: [&str; 3] = ["linear(n)", "riccati", "affine"];

const RICCATI_PHI: &str = "(x_3*(x_1 - x_2) - lambda1*x_1*(x_3 - x_2))/((x_1 - x_2) - lambda1*(x_3 - x_2))";
const RICCATI_PSI: &str = "(x_1 - x_2)*(x_3 - x)/((x_1 - x)*(x_3 - x_2))";
const RICCATI_GUARD: &str = "(x_1 - x_2)*(x_3 - x_2)*(x_1 - x_3)";

/// Laws by name: `linear(n)`, `riccati`, `affine`.
pub fn catalog_law(name: &str) -> Result<SuperpositionLaw, LawError> {
    let name = name.trim();
    match name {
        "riccati" => Ok(riccati()),
        "affine" => Ok(affine()),
        _ => {
            let n = name
                .strip_prefix("linear(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.trim().parse::<usize>().ok())
                .filter(|&n| (1..=6).contains(&n))
                .ok_or_else(|| LawError::UnknownName(name.to_string()))?;
            linear(n)
        }
    }
}

fn scoped(vs: &[&str], r: usize, with_lambda: bool, bare: bool) -> Vec<Var> {
    let base = vars(vs);
    let mut scope = crate::vfield::power_vars(&base, r, bare);
    if with_lambda {
        scope.extend(lambda_vars(base.len()));
    }
    scope
}

fn riccati() -> SuperpositionLaw {
    let p = |s: &str, scope: &[Var]| parse_rational(s, scope).expect("catalog expression");
    SuperpositionLaw {
        name: "riccati".into(),
        vars: vars(&["x"]),
        r: 3,
        phi: vec![p(RICCATI_PHI, &scoped(&["x"], 3, true, false))],
        psi: vec![p(RICCATI_PSI, &scoped(&["x"], 3, false, true))],
        guard: p(RICCATI_GUARD, &scoped(&["x"], 3, false, false)),
    }
}

fn affine() -> SuperpositionLaw {
    let p = |s: &str, scope: &[Var]| parse_rational(s, scope).expect("catalog expression");
    SuperpositionLaw {
        name: "affine".into(),
        vars: vars(&["x"]),
        r: 2,
        phi: vec![p("x_1 + lambda1*(x_2 - x_1)", &scoped(&["x"], 2, true, false))],
        psi: vec![p("(x - x_1)/(x_2 - x_1)", &scoped(&["x"], 2, false, true))],
        guard: p("x_2 - x_1", &scoped(&["x"], 2, false, false)),
    }
}

fn det(m: &[Vec<Poly>]) -> Poly {
    match m.len() {
        0 => Poly::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = Poly::zero();
            for (j, a) in m[0].iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Poly>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, p)| p.clone()).collect())
                    .collect();
                let term = a * &det(&minor);
                acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

fn linear(n: usize) -> Result<SuperpositionLaw, LawError> {
    let base: Vec<Var> = (1..=n).map(|i| Var::new(format!("x{i}"))).collect();
    let lambdas = lambda_vars(n);
    let phi = base
        .iter()
        .map(|xi| {
            lambdas
                .iter()
                .enumerate()
                .fold(RationalExpr::zero(), |acc, (j, l)| &acc + &(&RationalExpr::var(l.clone()) * &RationalExpr::var(xi.copy(j + 1))))
        })
        .collect();
    let m: Vec<Vec<Poly>> = base.iter().map(|xi| (1..=n).map(|j| Poly::var(xi.copy(j))).collect()).collect();
    let mut law = SuperpositionLaw {
        name: format!("linear({n})"),
        vars: base,
        r: n,
        phi,
        psi: Vec::new(),
        guard: RationalExpr::from_poly(det(&m)),
    };
    law.psi = invert_law_locally(&law)?;
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::q;
    use num_rational::BigRational;

    fn at(e: &RationalExpr, vals: &[(&str, i64)]) -> BigRational {
        e.eval_rational(&|v| vals.iter().find(|(n, _)| *n == v.name()).map(|(_, x)| q(*x))).unwrap()
    }

    #[test]
    fn riccati_lambda_zero_is_third_frame() {
        let law = catalog_law("riccati").unwrap();
        let sub = [("x_1", 2), ("x_2", -1), ("x_3", 7), ("lambda1", 0)];
        assert_eq!(at(&law.phi[0], &sub), q(7));
        assert_eq!(law.round_trip().unwrap(), (true, true));
    }

    #[test]
    fn linear_unit_coefficient_gives_first_frame() {
        let law = catalog_law("linear(2)").unwrap();
        let sub = [("x1_1", 3), ("x2_1", 5), ("x1_2", -2), ("x2_2", 4), ("lambda1", 1), ("lambda2", 0)];
        assert_eq!(at(&law.phi[0], &sub), q(3));
        assert_eq!(at(&law.phi[1], &sub), q(5));
        assert_eq!(law.round_trip().unwrap(), (true, true));
        // Cramer: det = x1_1*x2_2 - x1_2*x2_1
        let g = at(&law.guard, &sub);
        assert_eq!(g, q(3 * 4 - (-2) * 5));
    }

    #[test]
    fn affine_psi_vanishes_on_first_frame() {
        let law = catalog_law("affine").unwrap();
        assert_eq!(at(&law.psi[0], &[("x_1", 4), ("x_2", 9), ("x", 4)]), q(0));
        assert_eq!(law.round_trip().unwrap(), (true, true));
    }

    #[test]
    fn unknown_names() {
        for bad in ["linear", "linear(0)", "linear(x)", "bessel"] {
            assert!(matches!(catalog_law(bad), Err(LawError::UnknownName(_))));
        }
    }
}
