//! Adaptive Dormand–Prince 5(4) integration with dense output, for real,
//! complex and matrix-valued initial value problems.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Butcher tableau as exact `(numerator, denominator)` pairs.
pub mod tableau {
    pub type Q = (i64, i64);

    pub const C: [Q; 7] = [(0, 1), (1, 5), (3, 10), (4, 5), (8, 9), (1, 1), (1, 1)];

    pub const A: [[Q; 6]; 7] = [
        [(0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1)],
        [(1, 5), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1)],
        [(3, 40), (9, 40), (0, 1), (0, 1), (0, 1), (0, 1)],
        [(44, 45), (-56, 15), (32, 9), (0, 1), (0, 1), (0, 1)],
        [(19372, 6561), (-25360, 2187), (64448, 6561), (-212, 729), (0, 1), (0, 1)],
        [(9017, 3168), (-355, 33), (46732, 5247), (49, 176), (-5103, 18656), (0, 1)],
        [(35, 384), (0, 1), (500, 1113), (125, 192), (-2187, 6784), (11, 84)],
    ];

    /// Fifth-order weights (the last row of `A`, FSAL).
    pub const B: [Q; 7] = [(35, 384), (0, 1), (500, 1113), (125, 192), (-2187, 6784), (11, 84), (0, 1)];

    /// Embedded fourth-order weights.
    pub const B_HAT: [Q; 7] = [
        (5179, 57600),
        (0, 1),
        (7571, 16695),
        (393, 640),
        (-92097, 339200),
        (187, 2100),
        (1, 40),
    ];

    /// Dense-output coefficients of the fifth continuous stage.
    pub const D: [Q; 7] = [
        (-12715105075, 11282082432),
        (0, 1),
        (87487479700, 32700410799),
        (-10690763975, 1880347072),
        (701980252875, 199316789632),
        (-1453857185, 822651844),
        (69997945, 29380423),
    ];

    pub fn f(q: Q) -> f64 {
        q.0 as f64 / q.1 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {last_t}")]
    StepUnderflow { last_t: f64, last_state: Vec<f64> },
    #[error("maximum number of steps exceeded at t = {last_t}")]
    MaxStepsExceeded { last_t: f64 },
    #[error("right-hand side is not finite at the initial point")]
    NonFiniteInitial,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvpSpec {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Output times, ordered in the direction of integration; empty means `[t_end]`.
    pub checkpoints: Vec<f64>,
    /// Keep per-step interpolation data.
    pub dense: bool,
}

impl IvpSpec {
    pub fn new(t0: f64, x0: Vec<f64>, t_end: f64) -> Self {
        IvpSpec {
            t0,
            x0,
            t_end,
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
            checkpoints: Vec::new(),
            dense: false,
        }
    }

    pub fn tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn checkpoints(mut self, c: Vec<f64>) -> Self {
        self.checkpoints = c;
        self
    }

    /// `n + 1` evenly spaced checkpoints from `t0` to `t_end`.
    pub fn uniform(self, n: usize) -> Self {
        let (a, b) = (self.t0, self.t_end);
        let c = (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect();
        self.checkpoints(c)
    }

    pub fn dense(mut self) -> Self {
        self.dense = true;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// One accepted step's continuous extension.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    t: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            let r = |k: usize| self.r[k][i];
            *o = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
    }
}

/// Piecewise quartic interpolant over the accepted steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseOutput {
    segments: Vec<Segment>,
}

impl DenseOutput {
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        Some((first.t, last.t + last.h))
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let (a, b) = self.span()?;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if t < lo || t > hi {
            return None;
        }
        let forward = a <= b;
        let idx = self.segments.partition_point(|s| {
            let end = s.t + s.h;
            if forward {
                end < t
            } else {
                end > t
            }
        });
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        let mut out = vec![0.0; seg.r[0].len()];
        seg.eval(t, &mut out);
        Some(out)
    }

    pub fn step_times(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.t + s.h).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
    pub dense: Option<DenseOutput>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrate `x' = f(t, x)` from `spec.t0` to `spec.t_end`.
pub fn integrate_ivp<F>(spec: &IvpSpec, mut rhs: F) -> Result<Trajectory, IntegrationError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    use tableau::{f as q, A, B, B_HAT, C, D};

    if !(spec.rtol > 0.0 && spec.atol > 0.0) {
        return Err(IntegrationError::InvalidSpec("tolerances must be positive".into()));
    }
    let dir = if spec.t_end >= spec.t0 { 1.0 } else { -1.0 };
    let checkpoints = if spec.checkpoints.is_empty() { vec![spec.t_end] } else { spec.checkpoints.clone() };
    for w in checkpoints.windows(2) {
        if (w[1] - w[0]) * dir < 0.0 {
            return Err(IntegrationError::InvalidSpec("checkpoints out of order".into()));
        }
    }
    if checkpoints.iter().any(|&c| (c - spec.t0) * dir < 0.0 || (spec.t_end - c) * dir < 0.0) {
        return Err(IntegrationError::InvalidSpec("checkpoint outside span".into()));
    }

    let n = spec.x0.len();
    let a: Vec<Vec<f64>> = A.iter().map(|row| row.iter().map(|&x| q(x)).collect()).collect();
    let c: Vec<f64> = C.iter().map(|&x| q(x)).collect();
    let e: Vec<f64> = (0..7).map(|i| q(B[i]) - q(B_HAT[i])).collect();
    let d: Vec<f64> = D.iter().map(|&x| q(x)).collect();

    let mut stats = StepStats::default();
    let mut t = spec.t0;
    let mut y = spec.x0.clone();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    rhs(t, &y, &mut k[0]);
    stats.evaluations += 1;
    if !k[0].iter().chain(&y).all(|v| v.is_finite()) {
        return Err(IntegrationError::NonFiniteInitial);
    }

    let mut out_t = Vec::with_capacity(checkpoints.len());
    let mut out_x = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    while next_cp < checkpoints.len() && checkpoints[next_cp] == t {
        out_t.push(t);
        out_x.push(y.clone());
        next_cp += 1;
    }
    let mut dense = spec.dense.then(DenseOutput::default);

    let span = (spec.t_end - spec.t0).abs();
    if span == 0.0 {
        return Ok(Trajectory { times: out_t, states: out_x, stats, dense });
    }

    // initial step
    let sc0 = spec.atol + spec.rtol * norm(&y);
    let d0 = norm(&y) / sc0;
    let d1 = norm(&k[0]) / sc0;
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    {
        let y1: Vec<f64> = y.iter().zip(&k[0]).map(|(yi, fi)| yi + dir * h * fi).collect();
        let mut f1 = vec![0.0; n];
        rhs(t + dir * h, &y1, &mut f1);
        stats.evaluations += 1;
        let diff: Vec<f64> = f1.iter().zip(&k[0]).map(|(a, b)| a - b).collect();
        let d2 = norm(&diff) / sc0 / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        if h1.is_finite() {
            h = (100.0 * h).min(h1);
        }
    }
    h = h.min(span) * dir;

    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut last_rejected = false;
    let eps = f64::EPSILON;
    while (spec.t_end - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= spec.max_steps {
            return Err(IntegrationError::MaxStepsExceeded { last_t: t });
        }
        if h.abs() < 16.0 * eps * t.abs().max(1.0) {
            return Err(IntegrationError::StepUnderflow { last_t: t, last_state: y });
        }
        if (t + h - spec.t_end) * dir > 0.0 {
            h = spec.t_end - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    if a[s][j] != 0.0 {
                        acc += h * a[s][j] * kj[i];
                    }
                }
                ytmp[i] = acc;
            }
            let (_, rest) = k.split_at_mut(s);
            rhs(t + c[s] * h, &ytmp, &mut rest[0]);
            stats.evaluations += 1;
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        let mut err = vec![0.0; n];
        for (i, ei) in err.iter_mut().enumerate() {
            *ei = h * (0..7).map(|s| e[s] * k[s][i]).sum::<f64>();
        }
        let sc = spec.atol + spec.rtol * norm(&y).max(norm(&ynew));
        let en = norm(&err) / sc;
        let finite = en.is_finite() && ynew.iter().all(|v| v.is_finite()) && k[6].iter().all(|v| v.is_finite());
        if !finite {
            stats.rejected += 1;
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if en <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            let need_seg = dense.is_some() || (next_cp < checkpoints.len() && (checkpoints[next_cp] - t_new) * dir <= 0.0);
            if need_seg {
                let ydiff: Vec<f64> = ynew.iter().zip(&y).map(|(a, b)| a - b).collect();
                let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
                let r5: Vec<f64> = (0..n).map(|i| h * (0..7).map(|s| d[s] * k[s][i]).sum::<f64>()).collect();
                let seg = Segment { t, h, r: [y.clone(), ydiff, bspl, r4, r5] };
                while next_cp < checkpoints.len() && (checkpoints[next_cp] - t_new) * dir <= 0.0 {
                    let tc = checkpoints[next_cp];
                    let mut v = vec![0.0; n];
                    if tc == t_new {
                        v.copy_from_slice(&ynew);
                    } else {
                        seg.eval(tc, &mut v);
                    }
                    out_t.push(tc);
                    out_x.push(v);
                    next_cp += 1;
                }
                if let Some(dn) = dense.as_mut() {
                    dn.segments.push(seg);
                }
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            let mut fac = (0.9 * en.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h *= fac;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(Trajectory { times: out_t, states: out_x, stats, dense })
}

/// Checkpoint times, complex states and step statistics.
pub type ComplexTrajectory = (Vec<f64>, Vec<Vec<Complex64>>, StepStats);

/// Complex state, integrated as interleaved real and imaginary parts.
pub fn integrate_ivp_complex<F>(
    spec: &IvpSpec,
    x0: &[Complex64],
    mut rhs: F,
) -> Result<ComplexTrajectory, IntegrationError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = x0.len();
    let mut real = spec.clone();
    real.x0 = x0.iter().flat_map(|z| [z.re, z.im]).collect();
    let unpack = |v: &[f64]| -> Vec<Complex64> { v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect() };
    let mut zin = vec![Complex64::new(0.0, 0.0); n];
    let mut zout = vec![Complex64::new(0.0, 0.0); n];
    let tr = integrate_ivp(&real, |t, x, out| {
        for (z, p) in zin.iter_mut().zip(x.chunks(2)) {
            *z = Complex64::new(p[0], p[1]);
        }
        rhs(t, &zin, &mut zout);
        for (p, z) in out.chunks_mut(2).zip(&zout) {
            p[0] = z.re;
            p[1] = z.im;
        }
    })?;
    let states = tr.states.iter().map(|s| unpack(s)).collect();
    Ok((tr.times, states, tr.stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<f64>>,
    pub stats: StepStats,
    pub dense: Option<DenseOutput>,
    rows: usize,
    cols: usize,
}

impl MatrixTrajectory {
    /// Interpolated state, when dense output was kept.
    pub fn at(&self, t: f64) -> Option<DMatrix<f64>> {
        let v = self.dense.as_ref()?.eval(t)?;
        Some(DMatrix::from_vec(self.rows, self.cols, v))
    }
}

/// `S' = F(t, S)` for a matrix state; error control in the Frobenius norm.
pub fn integrate_matrix_ivp<F>(spec: &IvpSpec, s0: &DMatrix<f64>, mut rhs: F) -> Result<MatrixTrajectory, IntegrationError>
where
    F: FnMut(f64, &DMatrix<f64>, &mut DMatrix<f64>),
{
    let (rows, cols) = s0.shape();
    let mut flat = spec.clone();
    flat.x0 = s0.as_slice().to_vec();
    let mut m_in = DMatrix::zeros(rows, cols);
    let mut m_out = DMatrix::zeros(rows, cols);
    let tr = integrate_ivp(&flat, |t, x, out| {
        m_in.as_mut_slice().copy_from_slice(x);
        rhs(t, &m_in, &mut m_out);
        out.copy_from_slice(m_out.as_slice());
    })?;
    let states = tr.states.iter().map(|v| DMatrix::from_vec(rows, cols, v.clone())).collect();
    Ok(MatrixTrajectory { times: tr.times, states, stats: tr.stats, dense: tr.dense, rows, cols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use std::f64::consts::{E, FRAC_PI_2};

    fn r(x: tableau::Q) -> BigRational {
        BigRational::new(BigInt::from(x.0), BigInt::from(x.1))
    }

    fn qi(n: i64, d: i64) -> BigRational {
        r((n, d))
    }

    #[test]
    fn tableau_order_conditions_hold_exactly() {
        let c: Vec<BigRational> = tableau::C.iter().map(|&x| r(x)).collect();
        let a: Vec<Vec<BigRational>> = (0..7)
            .map(|i| (0..7).map(|j| if j < 6 { r(tableau::A[i][j]) } else { qi(0, 1) }).collect())
            .collect();
        for i in 0..7 {
            let s: BigRational = a[i].iter().sum();
            assert_eq!(s, c[i], "row sum {i}");
        }
        let av = |v: &[BigRational]| -> Vec<BigRational> {
            (0..7).map(|i| (0..7).map(|j| &a[i][j] * &v[j]).sum()).collect()
        };
        let had = |u: &[BigRational], v: &[BigRational]| -> Vec<BigRational> { u.iter().zip(v).map(|(x, y)| x * y).collect() };
        let dot = |b: &[BigRational], v: &[BigRational]| -> BigRational { b.iter().zip(v).map(|(x, y)| x * y).sum() };
        let one = vec![qi(1, 1); 7];
        let c2 = had(&c, &c);
        let c3 = had(&c2, &c);
        let c4 = had(&c3, &c);
        let ac = av(&c);
        let ac2 = av(&c2);
        let aac = av(&ac);
        let conditions: Vec<(Vec<BigRational>, BigRational, usize)> = vec![
            (one.clone(), qi(1, 1), 1),
            (c.clone(), qi(1, 2), 2),
            (c2.clone(), qi(1, 3), 3),
            (ac.clone(), qi(1, 6), 3),
            (c3.clone(), qi(1, 4), 4),
            (had(&c, &ac), qi(1, 8), 4),
            (ac2.clone(), qi(1, 12), 4),
            (aac.clone(), qi(1, 24), 4),
            (c4, qi(1, 5), 5),
            (had(&c2, &ac), qi(1, 10), 5),
            (had(&c, &ac2), qi(1, 15), 5),
            (had(&c, &aac), qi(1, 30), 5),
            (had(&ac, &ac), qi(1, 20), 5),
            (av(&c3), qi(1, 20), 5),
            (av(&had(&c, &ac)), qi(1, 40), 5),
            (av(&ac2), qi(1, 60), 5),
            (av(&aac), qi(1, 120), 5),
        ];
        let b: Vec<BigRational> = tableau::B.iter().map(|&x| r(x)).collect();
        let bh: Vec<BigRational> = tableau::B_HAT.iter().map(|&x| r(x)).collect();
        for (v, want, order) in &conditions {
            assert_eq!(&dot(&b, v), want, "fifth-order weights, order {order}");
            if *order <= 4 {
                assert_eq!(&dot(&bh, v), want, "embedded weights, order {order}");
            }
        }
        // the embedded pair is genuinely of order four
        assert!(conditions.iter().filter(|(_, _, o)| *o == 5).any(|(v, w, _)| &dot(&bh, v) != w));
        // FSAL: b equals the last row of A
        assert_eq!(b, a[6]);
        // the continuous extension reproduces the step end: sum of d vanishes
        let ds: BigRational = tableau::D.iter().map(|&x| r(x)).sum();
        assert_eq!(ds, qi(0, 1));
    }

    #[test]
    fn exponential() {
        let spec = IvpSpec::new(0.0, vec![1.0], 1.0).tolerances(1e-10, 1e-12);
        let tr = integrate_ivp(&spec, |_, x, o| o[0] = x[0]).unwrap();
        assert!((tr.last()[0] - E).abs() < 1e-9);
    }

    #[test]
    fn constant_has_no_rejections() {
        let spec = IvpSpec::new(0.0, vec![3.0, -1.0], 10.0).uniform(10);
        let tr = integrate_ivp(&spec, |_, _, o| o.fill(0.0)).unwrap();
        assert_eq!(tr.stats.rejected, 0);
        assert!(tr.states.iter().all(|s| s == &vec![3.0, -1.0]));
        assert_eq!(tr.times.len(), 11);
    }

    #[test]
    fn tan_blows_up() {
        // the double nearest pi/2 sits just below the pole, so aim past it
        let spec = IvpSpec::new(0.0, vec![0.0], 2.0);
        match integrate_ivp(&spec, |_, x, o| o[0] = 1.0 + x[0] * x[0]) {
            Err(IntegrationError::StepUnderflow { last_t, .. }) => assert!(last_t > 1.55 && (last_t - FRAC_PI_2).abs() < 1e-6, "{last_t}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tan_checkpoints_and_dense_output() {
        let spec = IvpSpec::new(0.0, vec![0.0], 1.0).uniform(50).dense();
        let tr = integrate_ivp(&spec, |_, x, o| o[0] = 1.0 + x[0] * x[0]).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!((x[0] - t.tan()).abs() < 1e-8, "{t}");
        }
        let dn = tr.dense.unwrap();
        for t in [0.013, 0.5, 0.77, 0.999] {
            assert!((dn.eval(t).unwrap()[0] - f64::tan(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn rotation_matrix() {
        let spec = IvpSpec::new(0.0, vec![], FRAC_PI_2).tolerances(1e-11, 1e-13);
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let tr = integrate_matrix_ivp(&spec, &DMatrix::identity(2, 2), |_, s, o| o.copy_from(&(&j * s))).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((tr.states.last().unwrap() - want).amax() < 1e-9);
    }

    #[test]
    fn nilpotent_generator() {
        let spec = IvpSpec::new(0.0, vec![], 1.0);
        let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let tr = integrate_matrix_ivp(&spec, &DMatrix::identity(2, 2), |_, s, o| o.copy_from(&(&a1 * s))).unwrap();
        let want = DMatrix::identity(2, 2) + &a1;
        assert!((tr.states.last().unwrap() - want).amax() < 1e-12);
        let zero = integrate_matrix_ivp(&spec, &DMatrix::identity(2, 2), |_, _, o| o.fill(0.0)).unwrap();
        assert_eq!(zero.states.last().unwrap(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn time_reversal() {
        let (rtol, atol) = (1e-9, 1e-12);
        let f = |t: f64, x: &[f64], o: &mut [f64]| {
            o[0] = x[1];
            o[1] = -x[0] + 0.1 * t.sin();
        };
        let x0 = vec![1.0, 0.5];
        let fwd = integrate_ivp(&IvpSpec::new(0.0, x0.clone(), 3.0).tolerances(rtol, atol), f).unwrap();
        let back = integrate_ivp(&IvpSpec::new(3.0, fwd.last().to_vec(), 0.0).tolerances(rtol, atol), f).unwrap();
        let dev = norm(&[back.last()[0] - x0[0], back.last()[1] - x0[1]]);
        assert!(dev <= 50.0 * (atol + rtol * norm(&x0)), "{dev}");
    }

    #[test]
    fn error_decreases_with_tolerance() {
        let mut prev = f64::INFINITY;
        for k in 4..10 {
            let tol = 10f64.powi(-k);
            let spec = IvpSpec::new(0.0, vec![1.0], 2.0).tolerances(tol, tol * 1e-3);
            let err = (integrate_ivp(&spec, |_, x, o| o[0] = x[0]).unwrap().last()[0] - 2f64.exp()).abs();
            assert!(err < prev, "tol {tol}: {err} !< {prev}");
            prev = err;
        }
    }

    #[test]
    fn complex_rotation() {
        let spec = IvpSpec::new(0.0, vec![], 2.0);
        let (_, states, _) =
            integrate_ivp_complex(&spec, &[Complex64::new(1.0, 0.0)], |_, z, o| o[0] = Complex64::i() * z[0]).unwrap();
        let want = Complex64::new(0.0, 2.0).exp();
        assert!((states.last().unwrap()[0] - want).norm() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let spec = IvpSpec::new(0.0, vec![0.3, -0.2], 4.0).uniform(7);
        let f = |t: f64, x: &[f64], o: &mut [f64]| {
            o[0] = x[1] * t.cos();
            o[1] = -x[0] * x[0];
        };
        assert_eq!(integrate_ivp(&spec, f).unwrap(), integrate_ivp(&spec, f).unwrap());
    }

    #[test]
    fn backward_checkpoints() {
        let spec = IvpSpec::new(1.0, vec![E], 0.0).uniform(4);
        let tr = integrate_ivp(&spec, |_, x, o| o[0] = x[0]).unwrap();
        assert_eq!(tr.times, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        assert!((tr.last()[0] - 1.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn linear_flows_reverse_and_repeat(m in proptest::array::uniform4(-1.0f64..1.0), x0 in proptest::array::uniform2(-2.0f64..2.0)) {
                let (rtol, atol) = (1e-9, 1e-12);
                let f = |_t: f64, x: &[f64], o: &mut [f64]| {
                    o[0] = m[0] * x[0] + m[1] * x[1];
                    o[1] = m[2] * x[0] + m[3] * x[1];
                };
                let spec = IvpSpec::new(0.0, x0.to_vec(), 1.0).tolerances(rtol, atol).uniform(8);
                let fwd = integrate_ivp(&spec, f).unwrap();
                prop_assert_eq!(&fwd, &integrate_ivp(&spec, f).unwrap());
                let back = integrate_ivp(&IvpSpec::new(1.0, fwd.last().to_vec(), 0.0).tolerances(rtol, atol), f).unwrap();
                let dev = norm(&[back.last()[0] - x0[0], back.last()[1] - x0[1]]);
                prop_assert!(dev <= 50.0 * (atol + rtol * norm(&x0)), "{}", dev);
            }
        }
    }
}
