//! Check results as they appear in JSON reports.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::symexpr::CoordSystem;

fn finite_or_null<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        _ => s.serialize_none(),
    }
}

/// One named check: verdict, worst residual and the point where it occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    #[serde(serialize_with = "finite_or_null")]
    pub max_residual: Option<f64>,
    /// Coordinate name to value; present only for failures located at a point.
    pub witness: Option<BTreeMap<String, f64>>,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn new(name: &str, pass: bool, max_residual: Option<f64>, tol: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            pass,
            max_residual,
            witness: None,
            tol,
            note: None,
        }
    }

    /// A check decided structurally (no residual involved).
    pub fn structural(name: &str, pass: bool) -> Self {
        CheckReport::new(name, pass, None, 0.0)
    }

    pub fn with_witness_point(mut self, w: Option<(CoordSystem, Vec<f64>)>) -> Self {
        self.witness = w.map(|(c, x)| c.names().iter().cloned().zip(x.iter().copied()).collect());
        self
    }

    pub fn with_witness(mut self, w: BTreeMap<String, f64>) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// An ordered list of checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ComplianceReport {
    pub checks: Vec<CheckReport>,
}

impl ComplianceReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: CheckReport) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: ComplianceReport) {
        self.checks.extend(other.checks);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest finite residual across checks (0 if none).
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().filter_map(|c| c.max_residual).fold(0.0, f64::max)
    }

    pub fn first_failure(&self) -> Option<&CheckReport> {
        self.checks.iter().find(|c| !c.pass)
    }

    /// Combine reports of the same checks taken at different points: one entry
    /// per name, failing if any input failed, with the worst residual and the
    /// first failing witness.
    pub fn merge_worst<I: IntoIterator<Item = ComplianceReport>>(reports: I) -> ComplianceReport {
        let mut out = ComplianceReport::new();
        for r in reports {
            for c in r.checks {
                match out.checks.iter_mut().find(|o| o.name == c.name) {
                    None => out.checks.push(c),
                    Some(o) => {
                        o.max_residual = match (o.max_residual, c.max_residual) {
                            (Some(a), Some(b)) => Some(if b.is_nan() || b > a { b } else { a }),
                            (a, b) => a.or(b),
                        };
                        if o.pass && !c.pass {
                            o.witness = c.witness;
                            o.note = c.note.or(o.note.take());
                        }
                        o.pass &= c.pass;
                    }
                }
            }
        }
        out
    }
}
