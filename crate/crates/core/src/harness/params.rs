use std::collections::BTreeMap;

use serde_json::Value;

use super::HarnessError;
use crate::symexpr::{parse, CoordSystem, Expr};

/// Scenario parameters. Values are JSON: integers, numbers, expression
/// strings, or (nested) arrays of those.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, Value>);

fn perr(key: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Param {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.0.insert(key.to_string(), value);
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.set(key, value);
        self
    }

    /// Parse `key=value`. The value is read as JSON when it parses, and as a
    /// plain expression string otherwise.
    pub fn parse_assignment(&mut self, text: &str) -> Result<(), HarnessError> {
        let (key, value) = text.split_once('=').ok_or_else(|| perr(text, "expected key=value"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(perr(text, "empty key"));
        }
        let value = value.trim();
        let v = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        self.set(key, v);
        Ok(())
    }

    /// A JSON object of parameters.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let v: Value = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("parameter file: {e}")))?;
        match v {
            Value::Object(m) => Ok(Params(m.into_iter().collect())),
            _ => Err(HarnessError::Config("parameter file must hold a JSON object".into())),
        }
    }

    /// Entries of `other` override those of `self`.
    pub fn merge(&mut self, other: Params) {
        self.0.extend(other.0);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    pub(crate) fn usize(&self, key: &str, default: usize) -> Result<usize, HarnessError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| perr(key, "expected a non-negative integer")),
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map_err(|_| perr(key, "expected a non-negative integer")),
            Some(_) => Err(perr(key, "expected a non-negative integer")),
        }
    }

    pub(crate) fn expr(&self, key: &str, default: &str, chart: &CoordSystem) -> Result<Expr, HarnessError> {
        match self.0.get(key) {
            None => parse(default, chart).map_err(|e| perr(key, e.to_string())),
            Some(v) => scalar_expr(key, v, chart),
        }
    }

    pub(crate) fn list(&self, key: &str, chart: &CoordSystem) -> Result<Option<Vec<Expr>>, HarnessError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| scalar_expr(key, v, chart))
                .collect::<Result<_, _>>()
                .map(Some),
            Some(_) => Err(perr(key, "expected an array")),
        }
    }

    pub(crate) fn matrix(&self, key: &str, chart: &CoordSystem) -> Result<Option<Vec<Vec<Expr>>>, HarnessError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(rows)) => rows
                .iter()
                .map(|r| match r {
                    Value::Array(a) => a.iter().map(|v| scalar_expr(key, v, chart)).collect(),
                    _ => Err(perr(key, "expected an array of rows")),
                })
                .collect::<Result<_, _>>()
                .map(Some),
            Some(_) => Err(perr(key, "expected an array of rows")),
        }
    }
}

fn scalar_expr(key: &str, v: &Value, chart: &CoordSystem) -> Result<Expr, HarnessError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(perr(key, "expected a number or an expression string")),
    };
    parse(&text, chart).map_err(|e| perr(key, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments() {
        let mut p = Params::new();
        p.parse_assignment("n=3").unwrap();
        p.parse_assignment("alpha=[[2,0],[0,3]]").unwrap();
        p.parse_assignment("L = u1^2/2 + q1").unwrap();
        assert_eq!(p.usize("n", 1).unwrap(), 3);
        let c = CoordSystem::tangent(1);
        assert_eq!(p.matrix("alpha", &c).unwrap().unwrap()[1][1], Expr::int(3));
        assert!(p.expr("L", "0", &c).is_ok());
        assert!(p.parse_assignment("novalue").is_err());
        assert!(p.expr("L", "0", &CoordSystem::new(&["x"]).unwrap()).is_err());
    }

    #[test]
    fn json_file() {
        let p = Params::from_json(r#"{"p": 2, "alpha": "1/2"}"#).unwrap();
        assert_eq!(p.usize("p", 1).unwrap(), 2);
        let c = CoordSystem::new(&["x"]).unwrap();
        assert_eq!(p.expr("alpha", "1", &c).unwrap(), Expr::frac(1, 2));
        assert!(Params::from_json("[1]").is_err());
        assert!(Params::from_json("{").is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn integer_assignments_roundtrip(key in "[a-z][a-z0-9_]{0,8}", v in 0u32..100000) {
            let mut p = Params::new();
            p.parse_assignment(&format!("{key}={v}")).unwrap();
            prop_assert_eq!(p.usize(&key, 0).unwrap(), v as usize);
            let json = serde_json::to_string(&serde_json::json!({ key.clone(): v })).unwrap();
            prop_assert_eq!(Params::from_json(&json).unwrap(), p);
        }
    }
}
