use num_rational::BigRational;
use serde::Serialize;

use crate::envelope::{compute_enveloping_algebra, Verdict};
use crate::expr::{fmt_rational, CompiledRational, ExprError};
use crate::linalg::rank;
use crate::numint::{integrate_ivp, IvpSpec};
use crate::sampling::RationalSampler;
use crate::vfield::{lift_to_power, TimeSystem};

use super::{LawError, SuperpositionLaw};

const STREAM_JACOBIAN: u64 = 21;
const STREAM_FRAMES: u64 = 22;
const JACOBIAN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Symbolic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn exact(name: impl Into<String>, pass: bool, detail: Option<String>) -> Self {
        Check { name: name.into(), pass, residual: None, detail }
    }

    fn numeric(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check { name: name.into(), pass: residual <= tol, residual: Some(residual), detail: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub lambda: Vec<f64>,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub t: f64,
    pub direct: Vec<f64>,
    pub law: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub mode: Mode,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeRecord>,
    /// First probe along the checkpoints.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<TableRow>,
}

impl VerificationReport {
    fn new(mode: Mode, checks: Vec<Check>, tolerance: Option<f64>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerificationReport { mode, pass, checks, tolerance, frames: Vec::new(), probes: Vec::new(), table: Vec::new() }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Exact test that every enveloping basis field, lifted to `M^(r+1)`,
/// annihilates each `psi_i`; plus round trips and transversality of `psi`.
pub fn verify_first_integrals(
    law: &SuperpositionLaw,
    s: &TimeSystem,
    cap: usize,
    seed: u64,
) -> Result<VerificationReport, LawError> {
    let law = law.rename_to(s.vars())?;
    let mut checks = Vec::new();
    let (phi_psi, psi_phi) = law.round_trip()?;
    checks.push(Check::exact("round_trip_phi_psi", phi_psi, None));
    checks.push(Check::exact("round_trip_psi_phi", psi_phi, None));

    let e = compute_enveloping_algebra(s, cap, seed)?;
    if let Verdict::ExceededCap(c) = e.verdict() {
        checks.push(Check::exact("enveloping_algebra", false, Some(format!("closure exceeded cap {c}"))));
        return Ok(VerificationReport::new(Mode::Symbolic, checks, None));
    }
    for (k, x) in e.basis().iter().enumerate() {
        let lift = lift_to_power(x, law.r, true);
        for (i, psi) in law.psi.iter().enumerate() {
            let res = lift.apply(psi)?;
            let detail = (!res.is_zero()).then(|| res.to_string());
            checks.push(Check::exact(format!("annihilates X{}^{} psi[{}]", k + 1, law.r + 1, i + 1), res.is_zero(), detail));
        }
    }
    if let Some(t0) = e.sample_trace().first() {
        let lift = lift_to_power(&s.freeze_time(t0)?, law.r, true);
        for (i, psi) in law.psi.iter().enumerate() {
            let res = lift.apply(psi)?;
            checks.push(Check::exact(
                format!("annihilates X(t0)^{} psi[{}]", law.r + 1, i + 1),
                res.is_zero(),
                Some(if res.is_zero() { format!("t0 = {}", fmt_rational(t0)) } else { res.to_string() }),
            ));
        }
    }
    let transversal = jacobian_rank(&law, seed)?;
    checks.push(Check::exact(
        "psi_transversal",
        transversal == law.n(),
        Some(format!("generic rank of d psi / d x is {transversal} of {}", law.n())),
    ));
    Ok(VerificationReport::new(Mode::Symbolic, checks, None))
}

fn jacobian_rank(law: &SuperpositionLaw, seed: u64) -> Result<usize, LawError> {
    let jac: Vec<Vec<_>> = law.psi.iter().map(|p| law.vars.iter().map(|x| p.differentiate(x)).collect()).collect();
    let scope = law.psi_scope();
    let mut sampler = RationalSampler::new(seed, STREAM_JACOBIAN);
    let mut best = 0;
    let mut tries = 0;
    let mut taken = 0;
    while taken < JACOBIAN_POINTS && tries < 10 * JACOBIAN_POINTS {
        tries += 1;
        let p = sampler.point(&scope);
        let look = p.lookup();
        match law.guard.eval_rational(&look) {
            Ok(g) if !num_traits::Zero::is_zero(&g) => {}
            Ok(_) | Err(ExprError::PoleAtPoint) => continue,
            Err(e) => return Err(e.into()),
        }
        let mut rows: Vec<Vec<BigRational>> = Vec::new();
        let mut pole = false;
        for row in &jac {
            let mut out = Vec::new();
            for d in row {
                match d.eval_rational(&look) {
                    Ok(v) => out.push(v),
                    Err(ExprError::PoleAtPoint) => pole = true,
                    Err(e) => return Err(e.into()),
                }
            }
            rows.push(out);
        }
        if pole {
            continue;
        }
        taken += 1;
        best = best.max(rank(&rows));
    }
    Ok(best)
}

/// A probe is given by its parameters or by its initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Lambda(Vec<f64>),
    Initial(Vec<f64>),
}

/// Closed-form solution `x(t)` through `x(t0) = x0`.
pub type Oracle = dyn Fn(f64, f64, &[f64]) -> Vec<f64>;

pub struct NumericOptions<'a> {
    pub t_span: (f64, f64),
    pub tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub checkpoints: usize,
    /// Initial frame, one state per copy; drawn at random when absent.
    pub frames: Option<Vec<Vec<f64>>>,
    /// Defaults: a random initial state and the last frame state.
    pub probes: Vec<Probe>,
    pub seed: u64,
    /// Box for random initial states.
    pub sample_box: (f64, f64),
    pub oracle: Option<&'a Oracle>,
}

impl Default for NumericOptions<'_> {
    fn default() -> Self {
        NumericOptions {
            t_span: (0.0, 1.0),
            tol: 1e-7,
            rtol: 1e-10,
            atol: 1e-12,
            checkpoints: 50,
            frames: None,
            probes: Vec::new(),
            seed: 0,
            sample_box: (-1.0, 0.0),
            oracle: None,
        }
    }
}

struct Compiled {
    phi: Vec<CompiledRational>,
    psi: Vec<CompiledRational>,
    guard: CompiledRational,
}

impl Compiled {
    fn phi(&self, frame: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut slots = frame.to_vec();
        slots.extend_from_slice(lambda);
        self.phi.iter().map(|c| c.eval(&slots)).collect()
    }

    fn psi(&self, frame: &[f64], x: &[f64]) -> Vec<f64> {
        let mut slots = frame.to_vec();
        slots.extend_from_slice(x);
        self.psi.iter().map(|c| c.eval(&slots)).collect()
    }
}

/// Largest `|a_i - b_i| / max(1, |b_i|)`: absolute near zero, relative for large values.
fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) })
}

/// Integrate frames and probes jointly; compare `phi(xbar(t); lambda)` to
/// direct integration and track the drift of `psi(xbar(t), x(t))`.
pub fn verify_numeric_superposition(
    law: &SuperpositionLaw,
    s: &TimeSystem,
    opts: &NumericOptions<'_>,
) -> Result<VerificationReport, LawError> {
    let law = law.rename_to(s.vars())?;
    let n = law.n();
    let r = law.r;
    let mut phi_slots = law.frame_vars();
    phi_slots.extend(law.lambdas());
    let psi_slots = law.psi_scope();
    let c = Compiled {
        phi: law.phi.iter().map(|e| CompiledRational::new(e, &phi_slots)).collect::<Result<_, _>>()?,
        psi: law.psi.iter().map(|e| CompiledRational::new(e, &psi_slots)).collect::<Result<_, _>>()?,
        guard: CompiledRational::new(&law.guard, &law.frame_vars())?,
    };

    let mut sampler = RationalSampler::new(opts.seed, STREAM_FRAMES);
    let (lo, hi) = opts.sample_box;
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| lo + (hi - lo) * sampler.unit()).collect() };

    let frame: Vec<f64> = match &opts.frames {
        Some(f) => {
            if f.len() != r || f.iter().any(|x| x.len() != n) {
                return Err(LawError::DimensionMismatch { law: n, system: f.first().map_or(0, Vec::len) });
            }
            let flat: Vec<f64> = f.concat();
            let g = c.guard.eval(&flat);
            if !(g.is_finite() && g.abs() > 1e-12) {
                return Err(LawError::GuardViolation(g));
            }
            flat
        }
        None => {
            let mut chosen = None;
            for _ in 0..100 {
                let cand = draw(n * r);
                let g = c.guard.eval(&cand);
                if g.is_finite() && g.abs() > 1e-3 {
                    chosen = Some(cand);
                    break;
                }
            }
            chosen.ok_or(LawError::GuardViolation(0.0))?
        }
    };

    let probes = if opts.probes.is_empty() {
        vec![Probe::Initial(draw(n)), Probe::Initial(frame[(r - 1) * n..].to_vec())]
    } else {
        opts.probes.clone()
    };
    let records: Vec<ProbeRecord> = probes
        .iter()
        .map(|p| match p {
            Probe::Lambda(l) => ProbeRecord { x0: c.phi(&frame, l), lambda: l.clone() },
            Probe::Initial(x) => ProbeRecord { lambda: c.psi(&frame, x), x0: x.clone() },
        })
        .collect();

    let mut checks = Vec::new();
    let mut rt = 0.0f64;
    for p in &records {
        rt = rt.max(max_diff(&c.psi(&frame, &c.phi(&frame, &p.lambda)), &p.lambda));
        rt = rt.max(max_diff(&c.phi(&frame, &c.psi(&frame, &p.x0)), &p.x0));
    }
    checks.push(Check::numeric("round_trip_numeric", rt, opts.tol));

    let mut y0 = frame.clone();
    for p in &records {
        y0.extend_from_slice(&p.x0);
    }
    let (t0, t1) = opts.t_span;
    let mut report_frames: Vec<Vec<f64>> = frame.chunks(n).map(<[f64]>::to_vec).collect();
    if y0.iter().any(|v| !v.is_finite()) {
        checks.push(Check::numeric("reconstruction", f64::INFINITY, opts.tol));
        let mut rep = VerificationReport::new(Mode::Numeric, checks, Some(opts.tol));
        rep.frames = std::mem::take(&mut report_frames);
        rep.probes = records;
        return Ok(rep);
    }
    let spec = IvpSpec::new(t0, y0.clone(), t1).tolerances(opts.rtol, opts.atol).uniform(opts.checkpoints);
    let sys = s.compile()?;
    let tr = integrate_ivp(&spec, |t, x, out| sys.rhs(t, x, out))?;

    let mut recon = 0.0f64;
    let mut drift = 0.0f64;
    let mut oracle_err = 0.0f64;
    let mut table = Vec::new();
    for (t, y) in tr.times.iter().zip(&tr.states) {
        let (fr, xs) = y.split_at(n * r);
        for (j, (p, x)) in records.iter().zip(xs.chunks(n)).enumerate() {
            let law_x = c.phi(fr, &p.lambda);
            let psi = c.psi(fr, x);
            recon = recon.max(max_diff(&law_x, x));
            drift = drift.max(max_diff(&psi, &p.lambda));
            if let Some(o) = opts.oracle {
                let want = o(*t, t0, &p.x0);
                oracle_err = oracle_err.max(max_diff(&law_x, &want)).max(max_diff(x, &want));
            }
            if j == 0 {
                table.push(TableRow { t: *t, direct: x.to_vec(), law: law_x, psi });
            }
        }
        if let Some(o) = opts.oracle {
            for (k, fx) in fr.chunks(n).enumerate() {
                oracle_err = oracle_err.max(max_diff(fx, &o(*t, t0, &frame[k * n..(k + 1) * n])));
            }
        }
    }
    checks.push(Check::numeric("reconstruction", recon, opts.tol));
    checks.push(Check::numeric("psi_drift", drift, opts.tol));
    if opts.oracle.is_some() {
        checks.push(Check::numeric("oracle", oracle_err, opts.tol));
    }
    let mut rep = VerificationReport::new(Mode::Numeric, checks, Some(opts.tol));
    rep.frames = report_frames;
    rep.probes = records;
    rep.table = table;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::DEFAULT_CAP;
    use crate::expr::{parse_node, parse_rational, vars, Node, Var};
    use crate::superlaw::catalog_law;

    fn system(vs: &[&str], rhs: &[&str]) -> TimeSystem {
        let nodes: Vec<Node> = rhs.iter().map(|s| parse_node(s).unwrap()).collect();
        TimeSystem::from_rhs(Var::new("t"), vars(vs), &nodes).unwrap()
    }

    #[test]
    fn riccati_symbolic() {
        let s = system(&["x"], &["1 + t*x + t^2*x^2"]);
        let rep = verify_first_integrals(&catalog_law("riccati").unwrap(), &s, DEFAULT_CAP, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.checks.iter().filter(|c| c.name.starts_with("annihilates")).count(), 4);
    }

    #[test]
    fn linear_symbolic_against_gl2() {
        let s = system(&["x1", "x2"], &["t*x1 + x2", "t^2*x1 + (t - 1)*x2"]);
        let rep = verify_first_integrals(&catalog_law("linear(2)").unwrap(), &s, DEFAULT_CAP, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn corrupted_psi_fails() {
        let s = system(&["x"], &["1 + x^2"]);
        let mut law = catalog_law("riccati").unwrap();
        let scope = law.psi_scope();
        law.psi[0] = parse_rational("(x_1 - x_2)*(x_3 + x)/((x_1 - x)*(x_3 - x_2))", &scope).unwrap();
        let rep = verify_first_integrals(&law, &s, DEFAULT_CAP, 1).unwrap();
        assert!(!rep.pass);
        let rep = verify_numeric_superposition(&law, &s, &NumericOptions::default()).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn riccati_numeric_against_tan() {
        let s = system(&["x"], &["1 + x^2"]);
        let oracle = |t: f64, t0: f64, x0: &[f64]| vec![(t - t0 + x0[0].atan()).tan()];
        let opts = NumericOptions { oracle: Some(&oracle), ..Default::default() };
        let rep = verify_numeric_superposition(&catalog_law("riccati").unwrap(), &s, &opts).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
        assert_eq!(rep.table.len(), 51);
        // the last-frame probe has lambda = 0
        assert!(rep.probes[1].lambda[0].abs() < 1e-15);
    }

    #[test]
    fn rotation_numeric() {
        let s = system(&["x1", "x2"], &["x2", "-x1"]);
        let oracle = |t: f64, t0: f64, x0: &[f64]| {
            let (sn, cs) = (t - t0).sin_cos();
            vec![x0[0] * cs + x0[1] * sn, -x0[0] * sn + x0[1] * cs]
        };
        let opts = NumericOptions { t_span: (0.0, 5.0), oracle: Some(&oracle), ..Default::default() };
        let rep = verify_numeric_superposition(&catalog_law("linear(2)").unwrap(), &s, &opts).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
    }

    #[test]
    fn degenerate_frame_is_rejected() {
        let s = system(&["x"], &["1 + x^2"]);
        let opts = NumericOptions { frames: Some(vec![vec![0.1], vec![0.1], vec![0.5]]), ..Default::default() };
        assert!(matches!(
            verify_numeric_superposition(&catalog_law("riccati").unwrap(), &s, &opts),
            Err(LawError::GuardViolation(_))
        ));
    }

    #[test]
    fn probe_on_a_frame_solution() {
        let s = system(&["x"], &["2 - t*x"]);
        let opts = NumericOptions { probes: vec![Probe::Lambda(vec![0.0]), Probe::Lambda(vec![1.0])], ..Default::default() };
        let rep = verify_numeric_superposition(&catalog_law("affine").unwrap(), &s, &opts).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
        assert!(rep.check("reconstruction").unwrap().residual.unwrap() < 1e-12);
    }

    mod props {
        use super::*;
        use crate::expr::{Poly, RationalExpr};
        use proptest::prelude::*;

        fn flip_one_sign(e: &RationalExpr, k: usize) -> RationalExpr {
            let n = e.numerator().num_terms();
            let flipped = Poly::from_terms(
                e.numerator().terms().enumerate().map(|(i, (m, c))| (m.clone(), if i == k % n { -c } else { c.clone() })),
            );
            RationalExpr::new(flipped, e.denominator().clone())
        }

        fn case(which: usize) -> (SuperpositionLaw, TimeSystem) {
            match which {
                0 => (catalog_law("riccati").unwrap(), system(&["x"], &["1 + t*x + t^2*x^2"])),
                1 => (catalog_law("linear(2)").unwrap(), system(&["x1", "x2"], &["t*x1 + x2", "t^2*x1 + (t - 1)*x2"])),
                _ => (catalog_law("affine").unwrap(), system(&["x"], &["2 - t*x"])),
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn single_sign_corruptions_fail_both_verifiers(which in 0usize..3, comp in 0usize..2, k in 0usize..16, on_psi in any::<bool>()) {
                let (mut law, s) = case(which);
                let comp = comp % law.n();
                if on_psi {
                    law.psi[comp] = flip_one_sign(&law.psi[comp], k);
                } else {
                    law.phi[comp] = flip_one_sign(&law.phi[comp], k);
                }
                let sym = verify_first_integrals(&law, &s, DEFAULT_CAP, 1).unwrap();
                prop_assert!(!sym.pass);
                let opts = NumericOptions { t_span: (1.0, 1.5), ..Default::default() };
                match verify_numeric_superposition(&law, &s, &opts) {
                    Ok(num) => prop_assert!(!num.pass),
                    Err(e) => prop_assert!(matches!(e, LawError::GuardViolation(_)), "{:?}", e),
                }
            }

            #[test]
            fn catalog_laws_pass_for_any_seed(which in 0usize..3, seed in any::<u64>()) {
                let (law, s) = case(which);
                prop_assert!(verify_first_integrals(&law, &s, DEFAULT_CAP, seed).unwrap().pass);
                let opts = NumericOptions { t_span: (1.0, 1.5), seed, ..Default::default() };
                let rep = verify_numeric_superposition(&law, &s, &opts).unwrap();
                prop_assert!(rep.pass, "{:?}", rep.checks);
                for c in &rep.checks {
                    prop_assert!(c.residual.unwrap() <= 100.0 * opts.tol);
                }
            }
        }
    }
}
