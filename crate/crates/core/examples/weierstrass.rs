//! Addition law of the Weierstrass function as a superposition law.
//!
//! `x = P(F(t) + c)` with `F' = f` solves `x' = f(t) y`, `y' = f(t) (6 x^2 - g2/2)`
//! on the curve `y^2 = 4 x^3 - g2 x - g3`. Carrying `y` fixes the square-root branch.
//! One particular solution and a point `lambda` on the curve give every other
//! solution by the chord-tangent law.
//!
//! ```text
//! cargo run --example weierstrass
//! ```

use std::process::ExitCode;

use lievessiot::numint::{integrate_ivp, IvpSpec};

const G2: f64 = 4.0;
const G3: f64 = 1.0;

fn f(t: f64) -> f64 {
    1.0 + 0.5 * t.sin()
}

fn curve_y(x: f64, sign: f64) -> f64 {
    sign * (4.0 * x.powi(3) - G2 * x - G3).sqrt()
}

/// `p + q` for the chord-tangent group law, `p != +-q`.
fn add(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    let m = (p[1] - q[1]) / (p[0] - q[0]);
    let x = m * m / 4.0 - p[0] - q[0];
    [x, -(p[1] + m * (x - p[0]))]
}

fn rhs(t: f64, s: &[f64], out: &mut [f64]) {
    for (o, p) in out.chunks_mut(2).zip(s.chunks(2)) {
        o[0] = f(t) * p[1];
        o[1] = f(t) * (6.0 * p[0] * p[0] - G2 / 2.0);
    }
}

fn main() -> ExitCode {
    let frame = [2.0, curve_y(2.0, 1.0)];
    let lambda = [3.0, curve_y(3.0, 1.0)];
    let probe = add(frame, lambda);
    let spec = IvpSpec::new(0.0, vec![frame[0], frame[1], probe[0], probe[1]], 0.3)
        .tolerances(1e-11, 1e-12)
        .uniform(10);
    let tr = match integrate_ivp(&spec, rhs) {
        Ok(tr) => tr,
        Err(e) => {
            eprintln!("integration failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("{:>6} {:>16} {:>16} {:>10}", "t", "direct x", "law x", "residual");
    let mut worst: f64 = 0.0;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let law = add([s[0], s[1]], lambda);
        let res = (law[0] - s[2]).abs().max((law[1] - s[3]).abs()) / s[2].abs().max(1.0);
        let on_curve = (s[3] * s[3] - (4.0 * s[2].powi(3) - G2 * s[2] - G3)).abs() / s[3].abs().max(1.0).powi(2);
        worst = worst.max(res).max(on_curve);
        println!("{t:>6.3} {:>16.10} {:>16.10} {res:>10.2e}", s[2], law[0]);
    }
    println!("max residual {worst:.2e}");
    if worst <= 1e-7 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
