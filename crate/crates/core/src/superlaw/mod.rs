//! Superposition laws: representation, text format, catalog, local inversion
//! and verification (symbolic first integrals, numeric reconstruction).

mod catalog;
mod invert;
mod verify;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::envelope::EnvelopeError;
use crate::expr::{parse_rational, ExprError, RationalExpr, Var};
use crate::numint::IntegrationError;
use crate::vfield::FieldError;

pub use catalog::{catalog_law, CATALOG};
pub use invert::invert_law_locally;
pub use verify::{
    verify_first_integrals, verify_numeric_superposition, Check, Mode, NumericOptions, Oracle, Probe, TableRow,
    VerificationReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("unknown catalog law `{0}`")]
    UnknownName(String),
    #[error("law file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dimension mismatch: law has n = {law}, system has n = {system}")]
    DimensionMismatch { law: usize, system: usize },
    #[error("law is not invertible within the linear-fractional class: {0}")]
    NotInvertibleInScope(String),
    #[error("initial frame violates the guard (value {0:e})")]
    GuardViolation(f64),
    #[error("integration failed: {0}")]
    IntegrationFailure(#[from] IntegrationError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl From<FieldError> for LawError {
    fn from(e: FieldError) -> Self {
        LawError::Envelope(e.into())
    }
}

/// `phi(xbar; lambda)` with partial inverse `psi(xbar, x)` on `guard != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionLaw {
    pub name: String,
    /// Base coordinates `x1..xn`; frame copy `k` of `xi` is `xi_k`.
    pub vars: Vec<Var>,
    pub r: usize,
    pub phi: Vec<RationalExpr>,
    pub psi: Vec<RationalExpr>,
    pub guard: RationalExpr,
}

impl SuperpositionLaw {
    pub fn n(&self) -> usize {
        self.vars.len()
    }

    /// `lambda1..lambdan`.
    pub fn lambdas(&self) -> Vec<Var> {
        lambda_vars(self.n())
    }

    /// Frame copies `x_1 .. x_r`, copy by copy.
    pub fn frame_vars(&self) -> Vec<Var> {
        crate::vfield::power_vars(&self.vars, self.r, false)
    }

    fn phi_scope(&self) -> Vec<Var> {
        let mut v = self.frame_vars();
        v.extend(self.lambdas());
        v
    }

    fn psi_scope(&self) -> Vec<Var> {
        crate::vfield::power_vars(&self.vars, self.r, true)
    }

    /// The same law over other base coordinates, matched by position.
    pub fn rename_to(&self, vars: &[Var]) -> Result<SuperpositionLaw, LawError> {
        if vars.len() != self.n() {
            return Err(LawError::DimensionMismatch { law: self.n(), system: vars.len() });
        }
        let mut map: BTreeMap<Var, Var> = BTreeMap::new();
        for (old, new) in self.vars.iter().zip(vars) {
            map.insert(old.clone(), new.clone());
            for k in 1..=self.r {
                map.insert(old.copy(k), new.copy(k));
            }
        }
        let f = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.clone());
        Ok(SuperpositionLaw {
            name: self.name.clone(),
            vars: vars.to_vec(),
            r: self.r,
            phi: self.phi.iter().map(|e| e.rename(&f)).collect(),
            psi: self.psi.iter().map(|e| e.rename(&f)).collect(),
            guard: self.guard.rename(&f),
        })
    }

    /// Text block: `key = value` lines in the expression grammar.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "n = {}", self.n());
        let _ = writeln!(s, "r = {}", self.r);
        let names: Vec<&str> = self.vars.iter().map(Var::name).collect();
        let _ = writeln!(s, "vars = {}", names.join(", "));
        for (i, e) in self.phi.iter().enumerate() {
            let _ = writeln!(s, "phi[{}] = {e}", i + 1);
        }
        for (i, e) in self.psi.iter().enumerate() {
            let _ = writeln!(s, "psi[{}] = {e}", i + 1);
        }
        let _ = writeln!(s, "guard = {}", self.guard);
        s
    }

    /// Parse a law block. Missing `psi` entries are recovered by local inversion.
    pub fn from_text(text: &str) -> Result<SuperpositionLaw, LawError> {
        let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LawError::Format { line: no + 1, message: "expected `key = value`".into() })?;
            let key = k.trim().replace(' ', "");
            if fields.insert(key.clone(), (no + 1, v.trim().to_string())).is_some() {
                return Err(LawError::Format { line: no + 1, message: format!("duplicate key `{key}`") });
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| LawError::Format { line: 0, message: format!("missing `{k}`") });
        let int = |k: &str| -> Result<usize, LawError> {
            let (line, v) = get(k)?;
            v.parse()
                .map_err(|_| LawError::Format { line: *line, message: format!("`{k}` must be a positive integer") })
        };
        let name = get("name").map(|(_, v)| v.clone()).unwrap_or_else(|_| "custom".into());
        let r = int("r")?;
        let vars: Vec<Var> = get("vars")?
            .1
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(Var::new)
            .collect();
        let n = match fields.get("n") {
            Some(_) => int("n")?,
            None => vars.len(),
        };
        if n == 0 || r == 0 || vars.len() != n {
            return Err(LawError::Format { line: 0, message: "n, r and vars must agree and be positive".into() });
        }
        let mut law = SuperpositionLaw { name, vars, r, phi: Vec::new(), psi: Vec::new(), guard: RationalExpr::one() };
        let parse_at = |key: &str, scope: &[Var]| -> Result<RationalExpr, LawError> {
            let (line, v) = get(key)?;
            parse_rational(v, scope).map_err(|e| LawError::Format { line: *line, message: format!("{key}: {e}") })
        };
        let phi_scope = law.phi_scope();
        let psi_scope = law.psi_scope();
        for i in 1..=n {
            law.phi.push(parse_at(&format!("phi[{i}]"), &phi_scope)?);
        }
        let has_psi = (1..=n).any(|i| fields.contains_key(&format!("psi[{i}]")));
        if has_psi {
            for i in 1..=n {
                law.psi.push(parse_at(&format!("psi[{i}]"), &psi_scope)?);
            }
        } else {
            law.psi = invert_law_locally(&law)?;
        }
        if fields.contains_key("guard") {
            law.guard = parse_at("guard", &law.frame_vars())?;
        }
        for key in fields.keys() {
            let known = matches!(key.as_str(), "name" | "n" | "r" | "vars" | "guard")
                || (1..=n).any(|i| *key == format!("phi[{i}]") || *key == format!("psi[{i}]"));
            if !known {
                return Err(LawError::Format { line: fields[key].0, message: format!("unknown key `{key}`") });
            }
        }
        Ok(law)
    }

    /// `phi(xbar, psi(xbar, x)) = x` and `psi(xbar, phi(xbar, lambda)) = lambda`, exactly.
    pub fn round_trip(&self) -> Result<(bool, bool), LawError> {
        let lambdas = self.lambdas();
        let sub_psi: BTreeMap<Var, RationalExpr> = lambdas.iter().cloned().zip(self.psi.iter().cloned()).collect();
        let mut phi_psi = true;
        for (p, x) in self.phi.iter().zip(&self.vars) {
            match p.substitute(&sub_psi) {
                Ok(e) => phi_psi &= e == RationalExpr::var(x.clone()),
                Err(ExprError::DivisionByZero) | Err(ExprError::PoleAtPoint) => phi_psi = false,
                Err(e) => return Err(e.into()),
            }
        }
        let sub_phi: BTreeMap<Var, RationalExpr> = self.vars.iter().cloned().zip(self.phi.iter().cloned()).collect();
        let mut psi_phi = true;
        for (p, l) in self.psi.iter().zip(&lambdas) {
            match p.substitute(&sub_phi) {
                Ok(e) => psi_phi &= e == RationalExpr::var(l.clone()),
                Err(ExprError::DivisionByZero) | Err(ExprError::PoleAtPoint) => psi_phi = false,
                Err(e) => return Err(e.into()),
            }
        }
        Ok((phi_psi, psi_phi))
    }
}

pub fn lambda_vars(n: usize) -> Vec<Var> {
    (1..=n).map(|i| Var::new(format!("lambda{i}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{q, vars};

    #[test]
    fn text_round_trip() {
        for name in ["riccati", "affine", "linear(2)", "linear(3)"] {
            let law = catalog_law(name).unwrap();
            let again = SuperpositionLaw::from_text(&law.to_text()).unwrap();
            assert_eq!(again, law, "{name}");
        }
    }

    #[test]
    fn missing_psi_is_inverted() {
        let law = catalog_law("riccati").unwrap();
        let text: String = law.to_text().lines().filter(|l| !l.starts_with("psi")).map(|l| format!("{l}\n")).collect();
        let again = SuperpositionLaw::from_text(&text).unwrap();
        assert_eq!(again.psi, law.psi);
    }

    #[test]
    fn format_errors() {
        assert!(matches!(SuperpositionLaw::from_text("r = 1\nvars = x\nphi[1] = x_1 +\n"), Err(LawError::Format { line: 3, .. })));
        assert!(matches!(SuperpositionLaw::from_text("r = 1\nvars = x\n"), Err(LawError::Format { .. })));
        assert!(matches!(
            SuperpositionLaw::from_text("r = 1\nvars = x\nphi[1] = lambda1*x_1\nbogus = 1\n"),
            Err(LawError::Format { line: 4, .. })
        ));
    }

    #[test]
    fn renaming_is_positional() {
        let law = catalog_law("affine").unwrap().rename_to(&vars(&["u"])).unwrap();
        let (a, b) = law.round_trip().unwrap();
        assert!(a && b);
        assert!(law.psi[0].depends_on(&Var::new("u_2")));
        let at = law.psi[0].eval_rational(&|v| match v.name() {
            "u_1" => Some(q(1)),
            "u_2" => Some(q(3)),
            "u" => Some(q(1)),
            _ => None,
        });
        assert_eq!(at.unwrap(), q(0));
    }
}
