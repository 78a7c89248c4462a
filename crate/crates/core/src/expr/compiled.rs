use super::poly::{rational_to_f64, Poly};
use super::rational::RationalExpr;
use super::var::Var;
use super::ExprError;

#[derive(Debug, Clone)]
struct CompiledPoly {
    // (coefficient, [(slot, exponent)])
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    fn new(p: &Poly, slots: &[Var]) -> Result<Self, ExprError> {
        let mut terms = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            let mut f = Vec::with_capacity(m.factors().len());
            for (v, e) in m.factors() {
                let slot = slots
                    .iter()
                    .position(|s| s == v)
                    .ok_or_else(|| ExprError::UnknownVariable(v.name().to_string()))?;
                f.push((slot, *e));
            }
            terms.push((rational_to_f64(c), f));
        }
        Ok(CompiledPoly { terms })
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, f) in &self.terms {
            let mut t = *c;
            for &(slot, e) in f {
                t *= x[slot].powi(e as i32);
            }
            acc += t;
        }
        acc
    }
}

/// A rational expression lowered to `f64` arithmetic over a fixed slot layout.
#[derive(Debug, Clone)]
pub struct CompiledRational {
    num: CompiledPoly,
    den: Option<CompiledPoly>,
}

impl CompiledRational {
    /// Compile with variable `slots[i]` read from index `i` of the input.
    pub fn new(e: &RationalExpr, slots: &[Var]) -> Result<Self, ExprError> {
        let num = CompiledPoly::new(e.numerator(), slots)?;
        let den = if e.denominator().is_one() {
            None
        } else {
            Some(CompiledPoly::new(e.denominator(), slots)?)
        };
        Ok(CompiledRational { num, den })
    }

    /// Value at `x`; a vanishing denominator yields a non-finite result.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.num.eval(x);
        match &self.den {
            None => n,
            Some(d) => n / d.eval(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_rational, vars};

    #[test]
    fn matches_exact_evaluation() {
        let v = vars(&["x", "y"]);
        let e = parse_rational("(x^2 - 3*y)/(1 + x*y)", &v).unwrap();
        let c = CompiledRational::new(&e, &v).unwrap();
        let got = c.eval(&[0.5, -2.0]);
        assert!(!got.is_finite());
        let got = c.eval(&[1.5, 0.25]);
        let want = (2.25 - 0.75) / (1.0 + 0.375);
        assert!((got - want).abs() < 1e-15);
    }
}
