use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::gcd::gcd;
use super::poly::{q, Poly};
use super::var::Var;
use super::ExprError;

/// An exact rational function `numerator / denominator`.
///
/// Always held in canonical form: numerator and denominator are coprime and
/// the denominator's graded-lex leading coefficient is 1. Two expressions
/// denote the same function exactly when they compare equal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalExpr {
    num: Poly,
    den: Poly,
}

impl RationalExpr {
    pub fn zero() -> Self {
        RationalExpr { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        RationalExpr { num: Poly::one(), den: Poly::one() }
    }

    pub fn var(v: Var) -> Self {
        RationalExpr { num: Poly::var(v), den: Poly::one() }
    }

    pub fn constant(c: BigRational) -> Self {
        RationalExpr { num: Poly::constant(c), den: Poly::one() }
    }

    pub fn integer(n: i64) -> Self {
        RationalExpr::constant(q(n))
    }

    pub fn from_poly(p: Poly) -> Self {
        RationalExpr { num: p, den: Poly::one() }
    }

    /// Build `num / den` and bring it to canonical form.
    ///
    /// Panics if `den` is the zero polynomial; use [`RationalExpr::try_new`]
    /// when that can happen.
    pub fn new(num: Poly, den: Poly) -> Self {
        Self::try_new(num, den).expect("zero denominator")
    }

    pub fn try_new(num: Poly, den: Poly) -> Result<Self, ExprError> {
        if den.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Self::zero());
        }
        let (num, den) = if den.is_constant() {
            (num, den)
        } else {
            let g = gcd(&num, &den);
            if g.is_one() {
                (num, den)
            } else {
                (
                    num.div_exact(&g).expect("gcd divides numerator"),
                    den.div_exact(&g).expect("gcd divides denominator"),
                )
            }
        };
        Ok(Self::coprime(num, den))
    }

    /// `num / den` for coprime, nonzero `den`: only the leading coefficient is fixed.
    fn coprime(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        let lc = den.leading_coeff();
        if lc.is_one() {
            RationalExpr { num, den }
        } else {
            let inv = lc.recip();
            RationalExpr { num: num.scale(&inv), den: den.scale(&inv) }
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    /// Variables that actually occur.
    pub fn variables(&self) -> Vec<Var> {
        let mut v = self.num.variables();
        v.extend(self.den.variables());
        v.sort();
        v.dedup();
        v
    }

    pub fn depends_on(&self, v: &Var) -> bool {
        self.num.contains(v) || self.den.contains(v)
    }

    pub fn recip(&self) -> Result<Self, ExprError> {
        Self::try_new(self.den.clone(), self.num.clone())
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, ExprError> {
        if rhs.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let (a, d) = cancel(&self.num, &rhs.num);
        let (b, c) = cancel(&rhs.den, &self.den);
        Ok(Self::coprime(&a * &b, &c * &d))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        RationalExpr { num: self.num.scale(c), den: self.den.clone() }
    }

    pub fn powi(&self, e: i32) -> Result<Self, ExprError> {
        if e >= 0 {
            Ok(RationalExpr { num: self.num.pow(e as u32), den: self.den.pow(e as u32) })
        } else {
            self.recip()?.powi(-e)
        }
    }

    /// Exact partial derivative by the quotient rule.
    pub fn differentiate(&self, v: &Var) -> Self {
        let dn = self.num.derivative(v);
        if self.den.is_constant() {
            return RationalExpr { num: dn, den: self.den.clone() };
        }
        let dd = self.den.derivative(v);
        if dd.is_zero() {
            return Self::new(dn, self.den.clone());
        }
        // with d = g e and d' = g f: (n'e - n f) / (d e)
        let g = gcd(&self.den, &dd);
        let e = self.den.div_exact(&g).expect("gcd divides");
        let f = dd.div_exact(&g).expect("gcd divides");
        let top = &(&dn * &e) - &(&self.num * &f);
        Self::new(top, &self.den * &e)
    }

    /// Simultaneous substitution of variables by rational expressions.
    pub fn substitute(&self, map: &BTreeMap<Var, RationalExpr>) -> Result<Self, ExprError> {
        let n = substitute_poly(&self.num, map);
        let d = substitute_poly(&self.den, map);
        n.checked_div(&d)
    }

    /// Rename variables; the map must be injective on the variables present.
    pub fn rename(&self, map: &dyn Fn(&Var) -> Var) -> Self {
        Self::new(self.num.rename(map), self.den.rename(map))
    }

    /// Exact value at a rational point.
    pub fn eval_rational(&self, point: &dyn Fn(&Var) -> Option<BigRational>) -> Result<BigRational, ExprError> {
        let d = self.den.eval_rational(point).ok_or_else(|| self.unbound(point))?;
        if d.is_zero() {
            return Err(ExprError::PoleAtPoint);
        }
        let n = self.num.eval_rational(point).ok_or_else(|| self.unbound(point))?;
        Ok(n / d)
    }

    /// Double-precision complex value.
    pub fn eval_complex(&self, point: &dyn Fn(&Var) -> Option<Complex64>) -> Result<Complex64, ExprError> {
        let d = self
            .den
            .eval_complex(point)
            .ok_or_else(|| self.unbound_c(point))?;
        if d == Complex64::new(0.0, 0.0) {
            return Err(ExprError::PoleAtPoint);
        }
        let n = self
            .num
            .eval_complex(point)
            .ok_or_else(|| self.unbound_c(point))?;
        Ok(n / d)
    }

    fn unbound(&self, point: &dyn Fn(&Var) -> Option<BigRational>) -> ExprError {
        let v = self
            .variables()
            .into_iter()
            .find(|v| point(v).is_none())
            .map(|v| v.name().to_string())
            .unwrap_or_default();
        ExprError::UnknownVariable(v)
    }

    fn unbound_c(&self, point: &dyn Fn(&Var) -> Option<Complex64>) -> ExprError {
        let v = self
            .variables()
            .into_iter()
            .find(|v| point(v).is_none())
            .map(|v| v.name().to_string())
            .unwrap_or_default();
        ExprError::UnknownVariable(v)
    }
}

/// Divide both by their gcd.
fn cancel(a: &Poly, b: &Poly) -> (Poly, Poly) {
    if a.is_constant() || b.is_constant() {
        return (a.clone(), b.clone());
    }
    let g = gcd(a, b);
    if g.is_one() {
        (a.clone(), b.clone())
    } else {
        (a.div_exact(&g).expect("gcd divides"), b.div_exact(&g).expect("gcd divides"))
    }
}

fn substitute_poly(p: &Poly, map: &BTreeMap<Var, RationalExpr>) -> RationalExpr {
    let mut acc = RationalExpr::zero();
    let mut cache: BTreeMap<(Var, u32), RationalExpr> = BTreeMap::new();
    // group by denominator-free part first to limit gcd work
    let mut poly_part = Poly::zero();
    for (m, c) in p.terms() {
        let mut term = RationalExpr::constant(c.clone());
        let mut plain = Vec::new();
        for (v, e) in m.factors() {
            match map.get(v) {
                Some(r) => {
                    let pw = cache
                        .entry((v.clone(), *e))
                        .or_insert_with(|| r.powi(*e as i32).expect("nonnegative power"))
                        .clone();
                    term = &term * &pw;
                }
                None => plain.push((v.clone(), *e)),
            }
        }
        let mono = super::poly::Monomial::from_pairs(plain);
        if term.is_polynomial() {
            poly_part = &poly_part + &term.num.mul_monomial(&mono, &BigRational::one());
        } else {
            let t = RationalExpr::new(term.num.mul_monomial(&mono, &BigRational::one()), term.den);
            acc = &acc + &t;
        }
    }
    &acc + &RationalExpr::from_poly(poly_part)
}

impl Add for &RationalExpr {
    type Output = RationalExpr;
    fn add(self, rhs: &RationalExpr) -> RationalExpr {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return RationalExpr::new(&self.num + &rhs.num, self.den.clone());
        }
        if self.den.is_constant() || rhs.den.is_constant() {
            let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
            return RationalExpr::coprime(num, &self.den * &rhs.den);
        }
        let g = gcd(&self.den, &rhs.den);
        let b = self.den.div_exact(&g).expect("gcd divides");
        let d = rhs.den.div_exact(&g).expect("gcd divides");
        let num = &(&self.num * &d) + &(&rhs.num * &b);
        if g.is_one() {
            return RationalExpr::coprime(num, &self.den * &d);
        }
        // common factors of the result can only come from g
        let (num, g) = cancel(&num, &g);
        RationalExpr::coprime(num, &(&b * &d) * &g)
    }
}

impl Sub for &RationalExpr {
    type Output = RationalExpr;
    fn sub(self, rhs: &RationalExpr) -> RationalExpr {
        self + &(-rhs)
    }
}

impl Mul for &RationalExpr {
    type Output = RationalExpr;
    fn mul(self, rhs: &RationalExpr) -> RationalExpr {
        if self.is_zero() || rhs.is_zero() {
            return RationalExpr::zero();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return RationalExpr { num: &self.num * &rhs.num, den: Poly::one() };
        }
        let (a, d) = cancel(&self.num, &rhs.den);
        let (c, b) = cancel(&rhs.num, &self.den);
        RationalExpr::coprime(&a * &c, &b * &d)
    }
}

impl Div for &RationalExpr {
    type Output = RationalExpr;
    /// Panics on division by the zero expression.
    fn div(self, rhs: &RationalExpr) -> RationalExpr {
        self.checked_div(rhs).expect("division by zero expression")
    }
}

impl Neg for &RationalExpr {
    type Output = RationalExpr;
    fn neg(self) -> RationalExpr {
        RationalExpr { num: -&self.num, den: self.den.clone() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for RationalExpr {
            type Output = RationalExpr;
            fn $m(self, rhs: RationalExpr) -> RationalExpr {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for RationalExpr {
    type Output = RationalExpr;
    fn neg(self) -> RationalExpr {
        -&self
    }
}

impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |p: &Poly| {
            p.num_terms() > 1 || p.terms().any(|(m, c)| !c.is_one() || m.factors().len() > 1)
        };
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        if self.num.num_terms() > 1 {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        if wrap(&self.den) {
            write!(f, "/({})", self.den)
        } else {
            write!(f, "/{}", self.den)
        }
    }
}

impl fmt::Debug for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> RationalExpr {
        RationalExpr::var(Var::new(n))
    }

    #[test]
    fn canonical_denominator_is_monic() {
        let e = &v("x") / &(&v("y").scale(&q(2)) + &RationalExpr::integer(4));
        assert!(e.denominator().leading_coeff().is_one());
        assert_eq!(e.to_string(), "1/2*x/(y + 2)");
    }

    #[test]
    fn cancellation() {
        let (x, y) = (v("x"), v("y"));
        let e = &(&(&x * &x) - &(&y * &y)) / &(&x - &y);
        assert_eq!(e, &x + &y);
    }

    #[test]
    fn quotient_rule() {
        // d/dx (x-a)/(x-b) = (a-b)/(x-b)^2
        let (x, a, b) = (v("x"), v("a"), v("b"));
        let e = &(&x - &a) / &(&x - &b);
        let d = e.differentiate(&Var::new("x"));
        let expected = &(&a - &b) / &(&(&x - &b) * &(&x - &b));
        assert_eq!(d, expected);
    }

    #[test]
    fn substitution() {
        let (x, y) = (v("x"), v("y"));
        let e = &(&x * &x) / &(&y + &RationalExpr::one());
        let mut map = BTreeMap::new();
        map.insert(Var::new("x"), &y - &RationalExpr::one());
        let s = e.substitute(&map).unwrap();
        assert_eq!(s, &(&(&y - &RationalExpr::one()) * &(&y - &RationalExpr::one())) / &(&y + &RationalExpr::one()));
    }

    #[test]
    fn pole_detection() {
        let e = &RationalExpr::one() / &(&v("x1") - &v("x2"));
        let p = |_: &Var| Some(q(1));
        assert_eq!(e.eval_rational(&p), Err(ExprError::PoleAtPoint));
    }

    mod props {
        use super::*;
        use crate::expr::Monomial;
        use proptest::prelude::*;

        fn poly() -> impl Strategy<Value = Poly> {
            proptest::collection::vec((-6i64..=6, 1i64..=3, 0u32..=2, 0u32..=2), 0..4).prop_map(|ts| {
                Poly::from_terms(ts.into_iter().map(|(n, d, a, b)| {
                    let m = Monomial::from_pairs(vec![(Var::new("x"), a), (Var::new("y"), b)]);
                    (m, BigRational::new(n.into(), d.into()))
                }))
            })
        }

        fn expr() -> impl Strategy<Value = RationalExpr> {
            (poly(), poly()).prop_map(|(n, d)| {
                let d = if d.is_zero() { Poly::one() } else { d };
                RationalExpr::new(n, d)
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn ring_laws(a in expr(), b in expr(), c in expr()) {
                prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
                prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
                prop_assert_eq!(&a * &b, &b * &a);
                prop_assert!((&a - &a).is_zero());
            }

            #[test]
            fn canonical_form_is_idempotent(a in expr()) {
                let again = RationalExpr::new(a.numerator().clone(), a.denominator().clone());
                prop_assert_eq!(&again, &a);
                prop_assert!(a.denominator().leading_coeff().is_one());
                prop_assert!(crate::expr::gcd(a.numerator(), a.denominator()).is_one() || a.is_zero());
            }

            #[test]
            fn division_inverts_multiplication(a in expr(), b in expr()) {
                prop_assume!(!b.is_zero());
                prop_assert_eq!((&a * &b).checked_div(&b).unwrap(), a);
            }

            #[test]
            fn differentiation_is_a_linear_derivation(a in expr(), b in expr(), k in -5i64..5) {
                let x = Var::new("x");
                prop_assert_eq!((&a + &b.scale(&q(k))).differentiate(&x), &a.differentiate(&x) + &b.differentiate(&x).scale(&q(k)));
                prop_assert_eq!((&a * &b).differentiate(&x), &(&a.differentiate(&x) * &b) + &(&a * &b.differentiate(&x)));
            }

            #[test]
            fn derivative_matches_finite_differences(a in expr(), px in -30i64..30, py in -30i64..30) {
                let (x0, y0) = (px as f64 / 7.0, py as f64 / 7.0);
                let point = |x: f64| move |v: &Var| Some(Complex64::new(if v.name() == "x" { x } else { y0 }, 0.0));
                // stay away from poles, where central differences are meaningless
                let den = a.denominator().eval_complex(&point(x0)).unwrap().re;
                prop_assume!(den.abs() > 0.1);
                let h = 1e-5;
                let f = |x: f64| a.eval_complex(&point(x)).unwrap().re;
                let fd = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
                let exact = a.differentiate(&Var::new("x")).eval_complex(&point(x0)).unwrap().re;
                prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "fd {} exact {}", fd, exact);
            }
        }
    }
}
