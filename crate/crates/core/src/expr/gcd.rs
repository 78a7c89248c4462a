//! Multivariate polynomial gcd over the rationals.
//!
//! Recursive content / primitive-part scheme: the largest variable present is
//! the main variable, coefficients live in the polynomial ring of the
//! remaining variables, and the primitive part is found with a primitive
//! pseudo-remainder sequence. Results are monic under graded-lex order.
//!
//! A heuristic gcd (evaluate at a large integer, recurse, reconstruct the
//! xi-adic digits, confirm by trial division) is tried first.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::poly::{Monomial, Poly};
use super::var::Var;

pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a == b {
        return a.monic();
    }
    if let Some(g) = heuristic_gcd(a, b) {
        return g.monic();
    }
    prs_gcd(a, b)
}

fn prs_gcd(a: &Poly, b: &Poly) -> Poly {
    let va = a.variables();
    let vb = b.variables();
    let main = match (va.last(), vb.last()) {
        (Some(x), Some(y)) => std::cmp::max(x, y).clone(),
        _ => return Poly::one(),
    };
    if !a.contains(&main) {
        return gcd(a, &content(b, &main));
    }
    if !b.contains(&main) {
        return gcd(&content(a, &main), b);
    }
    let ca = content(a, &main);
    let cb = content(b, &main);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let c = gcd(&ca, &cb);
    let g = primitive_gcd(pa, pb, &main);
    (&c * &g).monic()
}

/// Gcd of the coefficients of `p` viewed as a polynomial in `v`.
pub fn content(p: &Poly, v: &Var) -> Poly {
    let coeffs = p.to_univariate(v);
    let mut g = Poly::zero();
    for c in coeffs.iter().rev() {
        if c.is_zero() {
            continue;
        }
        g = gcd(&g, c);
        if g.is_one() {
            break;
        }
    }
    g
}

fn primitive_part(p: &Poly, v: &Var) -> Poly {
    if p.is_zero() {
        return Poly::zero();
    }
    let c = content(p, v);
    p.div_exact(&c).expect("content divides").monic()
}

fn lc_in(p: &Poly, v: &Var) -> Poly {
    let coeffs = p.to_univariate(v);
    coeffs.last().cloned().unwrap_or_else(Poly::zero)
}

fn pseudo_remainder(f: &Poly, g: &Poly, v: &Var) -> Poly {
    let dg = g.degree_in(v);
    let lcg = lc_in(g, v);
    let mut r = f.clone();
    while !r.is_zero() && r.degree_in(v) >= dg {
        let dr = r.degree_in(v);
        let lcr = lc_in(&r, v);
        let shift = Poly::term(num_traits::One::one(), Monomial::var(v.clone(), dr - dg));
        r = &(&r * &lcg) - &(&(&lcr * &shift) * g);
    }
    r
}

fn primitive_gcd(a: Poly, b: Poly, v: &Var) -> Poly {
    let (mut f, mut g) = if a.degree_in(v) >= b.degree_in(v) { (a, b) } else { (b, a) };
    loop {
        let r = pseudo_remainder(&f, &g, v);
        if r.is_zero() {
            return primitive_part(&g, v);
        }
        if r.degree_in(v) == 0 {
            return Poly::one();
        }
        f = g;
        g = primitive_part(&r, v);
    }
}

const HEU_ATTEMPTS: usize = 6;

fn heuristic_gcd(a: &Poly, b: &Poly) -> Option<Poly> {
    heu(&integral(a), &integral(b))
}

/// `p` scaled to coprime integer coefficients.
fn integral(p: &Poly) -> Poly {
    let den = p.terms().fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
    let scaled = p.scale(&BigRational::from_integer(den));
    let content = ground_content(&scaled);
    scaled.scale(&BigRational::new(BigInt::one(), content))
}

fn ground_content(p: &Poly) -> BigInt {
    p.terms().fold(BigInt::zero(), |acc, (_, c)| acc.gcd(c.numer()))
}

fn max_norm(p: &Poly) -> BigInt {
    p.terms().map(|(_, c)| c.numer().abs()).max().unwrap_or_else(BigInt::zero)
}

fn eval_at(p: &Poly, v: &Var, xi: &BigInt) -> Poly {
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        let (e, rest) = m.split_off(v);
        out.add_term(rest, c * BigRational::from_integer(xi.pow(e)));
    }
    out
}

/// Rebuild a polynomial in `v` from its value at `v = xi` via symmetric xi-adic digits.
fn interpolate(h: &Poly, xi: &BigInt, v: &Var) -> Poly {
    let half = xi / 2;
    let mut h = h.clone();
    let mut out = Poly::zero();
    let mut k = 0;
    while !h.is_zero() {
        let mut next = Poly::zero();
        for (m, c) in h.terms() {
            let mut d = c.numer().mod_floor(xi);
            if d > half {
                d -= xi;
            }
            if !d.is_zero() {
                out.add_term(m.mul(&Monomial::var(v.clone(), k)), BigRational::from_integer(d.clone()));
            }
            next.add_term(m.clone(), BigRational::from_integer((c.numer() - d) / xi));
        }
        h = next;
        k += 1;
    }
    out
}

/// Integer gcd of integer polynomials, content included, or `None` when the heuristic gives up.
fn heu(f: &Poly, g: &Poly) -> Option<Poly> {
    let common = ground_content(f).gcd(&ground_content(g));
    let unit = BigRational::from_integer(common.clone());
    if f.is_constant() || g.is_constant() {
        return Some(Poly::constant(unit));
    }
    let f = f.scale(&unit.recip());
    let g = g.scale(&unit.recip());
    let main = std::cmp::max(f.variables().pop()?, g.variables().pop()?);
    let (fnorm, gnorm) = (max_norm(&f), max_norm(&g));
    let bound: BigInt = 2 * std::cmp::min(&fnorm, &gnorm) + 29;
    let ratio = |n: &BigInt, p: &Poly| n / p.leading_coeff().numer().abs();
    let mut xi = std::cmp::max(
        std::cmp::min(bound.clone(), 99 * bound.sqrt()),
        2 * std::cmp::min(ratio(&fnorm, &f), ratio(&gnorm, &g)) + 2,
    );
    for _ in 0..HEU_ATTEMPTS {
        let ff = eval_at(&f, &main, &xi);
        let gg = eval_at(&g, &main, &xi);
        if !ff.is_zero() && !gg.is_zero() {
            let h = heu(&ff, &gg)?;
            let cand = interpolate(&h, &xi, &main);
            if !cand.is_zero() {
                let cand = integral(&cand);
                if f.div_exact(&cand).is_some() && g.div_exact(&cand).is_some() {
                    return Some(cand.scale(&unit));
                }
            }
        }
        xi = xi.clone() * 73794 * xi.sqrt().sqrt() / 27011;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::poly::q;

    fn v(n: &str) -> Poly {
        Poly::var(Var::new(n))
    }

    #[test]
    fn univariate() {
        let x = v("x");
        let a = &(&x - &Poly::one()) * &(&x + &Poly::constant(q(2)));
        let b = &(&x - &Poly::one()) * &(&x - &Poly::constant(q(3)));
        assert_eq!(gcd(&a, &b), &x - &Poly::one());
    }

    #[test]
    fn multivariate_common_factor() {
        let (x, y, z) = (v("x"), v("y"), v("z"));
        let common = &(&x * &y) - &z.pow(2);
        let a = &common * &(&x + &y);
        let b = &common * &(&(&x * &z) + &Poly::one());
        let g = gcd(&a, &b);
        assert_eq!(g, common.monic());
    }

    #[test]
    fn coprime_and_constants() {
        let (x, y) = (v("x"), v("y"));
        assert!(gcd(&(&x + &y), &(&x - &y)).is_one());
        assert!(gcd(&Poly::constant(q(6)), &x).is_one());
        assert_eq!(gcd(&Poly::zero(), &x.scale(&q(3))), x);
    }

    #[test]
    fn content_in_main_variable() {
        let (x, y) = (v("x"), v("y"));
        // (y^2 - 1) x + (y - 1) has content y - 1 in x
        let p = &(&(&y.pow(2) - &Poly::one()) * &x) + &(&y - &Poly::one());
        assert_eq!(content(&p, &Var::new("x")), &y - &Poly::one());
    }

    #[test]
    fn heuristic_handles_powers() {
        let (x, y) = (v("x"), v("y"));
        let a = &(&x.pow(2) + &Poly::one()).pow(3) * &(&y - &Poly::constant(q(3))).pow(2);
        let b = &(&x.pow(2) + &Poly::one()) * &(&y - &Poly::constant(q(3))).pow(4);
        let want = (&(&x.pow(2) + &Poly::one()) * &(&y - &Poly::constant(q(3))).pow(2)).monic();
        assert_eq!(heuristic_gcd(&a, &b).unwrap().monic(), want);
        assert_eq!(prs_gcd(&a, &b), want);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly() -> impl Strategy<Value = Poly> {
            proptest::collection::vec((-9i64..=9, 1i64..=4, 0u32..=3, 0u32..=3, 0u32..=2), 1..5).prop_map(|ts| {
                Poly::from_terms(ts.into_iter().map(|(n, d, a, b, c)| {
                    let m = Monomial::from_pairs(vec![(Var::new("x"), a), (Var::new("y"), b), (Var::new("z"), c)]);
                    (m, BigRational::new(n.into(), d.into()))
                }))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn heuristic_agrees_with_prs(a in poly(), b in poly(), c in poly()) {
                let (f, g) = (&a * &c, &b * &c);
                prop_assume!(!f.is_constant() && !g.is_constant());
                prop_assert_eq!(gcd(&f, &g), prs_gcd(&f, &g));
                prop_assert!(f.div_exact(&gcd(&f, &g)).is_some());
            }
        }
    }
}
