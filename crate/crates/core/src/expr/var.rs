use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Segment {
    Digits(u64),
    Text(String),
}

#[derive(Debug)]
struct VarData {
    name: String,
    key: Vec<Segment>,
}

/// A named variable.
///
/// Variables are ordered "naturally": names are split into runs of digits and
/// non-digits, digit runs compare numerically. This gives
/// `x1 < x1_1 < x1_2 < x2 < x10`, so frame copies sort right after their base
/// coordinate. The order is fixed for the whole crate, which is what makes the
/// graded-lexicographic normal form canonical.
#[derive(Clone)]
pub struct Var(Arc<VarData>);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let key = segments(&name);
        Var(Arc::new(VarData { name, key }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    /// The `k`-th frame copy of this variable (`x1` becomes `x1_k`).
    pub fn copy(&self, k: usize) -> Var {
        Var::new(format!("{}_{}", self.0.name, k))
    }
}

fn segments(name: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut chars = name.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if !d.is_ascii_digit() {
                    break;
                }
                s.push(d);
                chars.next();
            }
            out.push(Segment::Digits(s.parse().unwrap_or(u64::MAX)));
        } else {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_ascii_digit() {
                    break;
                }
                s.push(d);
                chars.next();
            }
            out.push(Segment::Text(s));
        }
    }
    out
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.name == other.0.name
    }
}

impl Eq for Var {}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0
            .key
            .cmp(&other.0.key)
            .then_with(|| self.0.name.cmp(&other.0.name))
    }
}

impl std::hash::Hash for Var {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.name.hash(state)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.name)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Convenience: build a list of variables from names.
pub fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(*n)).collect()
}
