//! Coordinate tensor calculus on a single chart.

mod bivector;
mod field;
mod form;
mod musical;
mod potential;

use thiserror::Error;

use crate::symexpr::SymError;

pub use bivector::{Bivector, Trivector};
pub use field::{lie_derivative_bilinear, EndField, VectorField};
pub use form::PForm;
pub use musical::{bigrade, flat_metric, sharp_omega, sharp_omega_at, MetricBlock, Splitting};
pub use potential::{fiber_curl, leafwise_potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("{what} is degenerate{}", fmt_witness(.witness))]
    Degenerate { what: String, witness: Option<Vec<f64>> },
    #[error("form is not leafwise closed (residual {residual:e}){}", fmt_witness(.witness))]
    NotClosed { residual: f64, witness: Option<Vec<f64>> },
    #[error("splitting frames are rank deficient{}", fmt_witness(.witness))]
    RankDeficient { witness: Option<Vec<f64>> },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sym(#[from] SymError),
}

fn fmt_witness(w: &Option<Vec<f64>>) -> String {
    match w {
        Some(x) => format!(" at {x:?}"),
        None => String::new(),
    }
}
