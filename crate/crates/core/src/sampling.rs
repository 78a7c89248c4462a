//! Seeded random rational points, the source of every "generic point" in the
//! crate. Coordinates are drawn from `{p/q : |p|, |q| <= 97, q != 0}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Var;

pub const HEIGHT: i64 = 97;

/// Deterministic stream of rational samples. Distinct `stream` tags give
/// independent streams from one user seed.
pub struct RationalSampler {
    rng: ChaCha8Rng,
}

impl RationalSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RationalSampler { rng }
    }

    pub fn rational(&mut self) -> BigRational {
        let p = self.rng.gen_range(-HEIGHT..=HEIGHT);
        let q = self.rng.gen_range(1..=HEIGHT);
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    /// A rational in `[lo, hi]` on a grid of spacing `(hi - lo) / (97 * 97)`.
    pub fn rational_in(&mut self, lo: &BigRational, hi: &BigRational) -> BigRational {
        let steps = HEIGHT * HEIGHT;
        let k = self.rng.gen_range(0..=steps);
        lo + (hi - lo) * BigRational::new(BigInt::from(k), BigInt::from(steps))
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn point(&mut self, vars: &[Var]) -> Point {
        Point::new(vars.iter().map(|v| (v.clone(), self.rational())).collect())
    }
}

/// An assignment of exact rational values to variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    values: Vec<(Var, BigRational)>,
}

impl Point {
    pub fn new(values: Vec<(Var, BigRational)>) -> Self {
        Point { values }
    }

    pub fn get(&self, v: &Var) -> Option<BigRational> {
        self.values.iter().find(|(w, _)| w == v).map(|(_, x)| x.clone())
    }

    pub fn lookup(&self) -> impl Fn(&Var) -> Option<BigRational> + '_ {
        move |v| self.get(v)
    }

    pub fn values(&self) -> &[(Var, BigRational)] {
        &self.values
    }

    pub fn extend(&mut self, other: &Point) {
        self.values.extend(other.values.iter().cloned());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{Signed, Zero};

    #[test]
    fn deterministic_and_bounded() {
        let mut a = RationalSampler::new(7, 1);
        let mut b = RationalSampler::new(7, 1);
        for _ in 0..100 {
            let x = a.rational();
            assert_eq!(x, b.rational());
            assert!(x.numer().abs() <= BigInt::from(HEIGHT));
            assert!(!x.denom().is_zero() && x.denom().abs() <= BigInt::from(HEIGHT));
        }
        let mut c = RationalSampler::new(7, 2);
        let xs: Vec<_> = (0..5).map(|_| c.rational()).collect();
        let mut a = RationalSampler::new(7, 1);
        let ys: Vec<_> = (0..5).map(|_| a.rational()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn interval_draws_stay_inside() {
        let mut s = RationalSampler::new(1, 0);
        let lo = BigRational::from_integer(1.into());
        let hi = BigRational::from_integer(2.into());
        for _ in 0..50 {
            let x = s.rational_in(&lo, &hi);
            assert!(x >= lo && x <= hi && !x.is_negative());
        }
    }
}
