//! Tangent structures, Lagrangian symplectic forms and the constructions built on them.

mod dynamics;
mod lagrangian;
mod tangent;

use thiserror::Error;

use crate::report::CheckReport;
use crate::symexpr::SymError;
use crate::tensor::TensorError;

pub use dynamics::{
    assemble_tn_form, base_potential, check_hamiltonian, energy, energy_hamiltonian, solve_vertical_correction, TnForm,
};
pub use lagrangian::{
    check_compat, global_witness_check, lagrangian_form, lagrangian_form_explicit, lambda_matrix, projectability,
    tangent_from_metric, theta_metric, transition_check, LagrangianChart,
};
pub use tangent::{
    almost_product, canonical_s, check_tangent, euler_field, is_second_order, AlmostProduct, SecondOrderMode,
    TangentStructure,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructError {
    #[error("{what} is degenerate{}", fmt_witness(.witness))]
    Degenerate { what: String, witness: Option<Vec<f64>> },
    #[error("precondition `{}` failed{}", .0.name, fmt_report(.0))]
    Precondition(Box<CheckReport>),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

impl StructError {
    pub(crate) fn failed(c: CheckReport) -> Self {
        StructError::Precondition(Box::new(c))
    }

    /// The failing check, when the error came from one.
    pub fn report(&self) -> Option<&CheckReport> {
        match self {
            StructError::Precondition(c) => Some(c),
            _ => None,
        }
    }
}

fn fmt_witness(w: &Option<Vec<f64>>) -> String {
    match w {
        Some(x) => format!(" at {x:?}"),
        None => String::new(),
    }
}

fn fmt_report(c: &CheckReport) -> String {
    let mut s = String::new();
    if let Some(r) = c.max_residual {
        s.push_str(&format!(" (residual {r:e})"));
    }
    if let Some(w) = &c.witness {
        s.push_str(&format!(" at {w:?}"));
    }
    s
}

/// Turn a failing check into an error.
pub(crate) fn require(c: CheckReport) -> Result<CheckReport, StructError> {
    if c.pass {
        Ok(c)
    } else {
        Err(StructError::failed(c))
    }
}
