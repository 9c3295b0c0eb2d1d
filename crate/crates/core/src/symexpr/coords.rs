use std::fmt;
use std::sync::Arc;

use super::SymError;

/// Names reserved by the expression grammar; they can never be coordinates.
pub const RESERVED: [&str; 4] = ["sin", "cos", "exp", "pi"];

/// Largest chart dimension supported. Free-variable sets are tracked as a bitmask.
pub const MAX_DIM: usize = 128;

#[derive(Debug, PartialEq, Eq)]
struct Inner {
    names: Vec<String>,
    split: Option<Split>,
}

/// A (base, fiber) partition of the coordinates: `q^i` and `u^i` with matching indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub base: Vec<usize>,
    pub fiber: Vec<usize>,
}

/// Ordered list of named chart coordinates, optionally split into base and fiber halves.
#[derive(Clone, PartialEq, Eq)]
pub struct CoordSystem {
    inner: Arc<Inner>,
}

impl fmt::Debug for CoordSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoordSystem({})", self.inner.names.join(","))
    }
}

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl CoordSystem {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, SymError> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if names.len() > MAX_DIM {
            return Err(SymError::Chart(format!(
                "dimension {} exceeds the supported maximum {MAX_DIM}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if !valid_ident(n) {
                return Err(SymError::Chart(format!("invalid coordinate name `{n}`")));
            }
            if RESERVED.contains(&n.as_str()) {
                return Err(SymError::Chart(format!("`{n}` is a reserved name")));
            }
            if names[..i].contains(n) {
                return Err(SymError::Chart(format!("duplicate coordinate `{n}`")));
            }
        }
        Ok(CoordSystem {
            inner: Arc::new(Inner { names, split: None }),
        })
    }

    /// Chart `(q1..qn, u1..un)` with the natural base/fiber split.
    pub fn tangent(n: usize) -> Self {
        let q: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
        let u: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        Self::split(&q, &u).expect("generated names are valid")
    }

    /// Chart whose names are `base ++ fiber`, split accordingly.
    pub fn split<S: AsRef<str>>(base: &[S], fiber: &[S]) -> Result<Self, SymError> {
        if base.len() != fiber.len() {
            return Err(SymError::Chart("base and fiber must have equal size".to_string()));
        }
        let mut names: Vec<&str> = base.iter().map(|s| s.as_ref()).collect();
        names.extend(fiber.iter().map(|s| s.as_ref()));
        let n = base.len();
        let plain = Self::new(&names)?;
        plain.with_split((0..n).collect(), (n..2 * n).collect())
    }

    pub fn with_split(&self, base: Vec<usize>, fiber: Vec<usize>) -> Result<Self, SymError> {
        let dim = self.dim();
        if base.len() != fiber.len() || base.len() * 2 != dim {
            return Err(SymError::Chart(format!(
                "split sizes {}+{} do not halve dimension {dim}",
                base.len(),
                fiber.len()
            )));
        }
        let mut seen = vec![false; dim];
        for &i in base.iter().chain(fiber.iter()) {
            if i >= dim || seen[i] {
                return Err(SymError::Chart("split is not a partition".to_string()));
            }
            seen[i] = true;
        }
        Ok(CoordSystem {
            inner: Arc::new(Inner {
                names: self.inner.names.clone(),
                split: Some(Split { base, fiber }),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.inner.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.inner.names.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, SymError> {
        self.index_of(name)
            .ok_or_else(|| SymError::UnknownCoordinate(name.to_string()))
    }

    pub fn get_split(&self) -> Option<&Split> {
        self.inner.split.as_ref()
    }

    pub fn require_split(&self) -> Result<&Split, SymError> {
        self.get_split()
            .ok_or_else(|| SymError::Chart("chart has no (q,u) split".to_string()))
    }

    /// Half dimension `n` of a split chart.
    pub fn half(&self) -> Option<usize> {
        self.get_split().map(|s| s.base.len())
    }
}

/// Point of a chart: one value per coordinate in chart order.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    values: Vec<f64>,
}

impl Point {
    pub fn new(values: Vec<f64>) -> Self {
        Point { values }
    }

    /// Build from `(name, value)` pairs; every coordinate must be assigned exactly once.
    pub fn from_pairs(coords: &CoordSystem, pairs: &[(&str, f64)]) -> Result<Self, SymError> {
        let mut values = vec![None; coords.dim()];
        for (name, v) in pairs {
            let i = coords.require(name)?;
            if values[i].replace(*v).is_some() {
                return Err(SymError::Chart(format!("coordinate `{name}` assigned twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| SymError::Chart(format!("coordinate `{}` not assigned", coords.name(i)))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Point { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}
