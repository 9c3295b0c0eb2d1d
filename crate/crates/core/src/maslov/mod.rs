//! Calibrated complex structures, Gauss–Weingarten data of Lagrangian
//! immersions, Chern–Weil–Bott forms and the first Maslov class on loops.

mod calibrate;
mod forms;
mod frames;
mod loops;

use thiserror::Error;

use crate::structures::StructError;
use crate::symexpr::SymError;
use crate::tensor::TensorError;

pub use calibrate::{calibrate, Calibrated};
pub use forms::{
    connection_curvature, curvature_variation, cwb_form, kronecker_contraction, unitary_connections, CForm, CwbForm,
    FormMatrix,
};
pub use frames::{check_gauss_weingarten, gauss_weingarten_at, ConnectionMode, FramedLagrangian, GwPoint};
pub use loops::{first_maslov_loop, winding_oracle, LoopSpec, MaslovIntegral, Winding};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaslovError {
    #[error("structure is not elliptic: g is not positive definite at {witness:?}")]
    NotElliptic { witness: Vec<f64> },
    #[error("{what} is degenerate{}", fmt_witness(.witness))]
    Degenerate { what: String, witness: Option<Vec<f64>> },
    #[error("connection mode inapplicable: {0}")]
    ModeInapplicable(String),
    #[error("frame is not g-orthonormal (residual {residual:e})")]
    FrameNotOrthonormal { residual: f64 },
    #[error("immersion is not periodic with period {period} (residual {residual:e} at s = {at})")]
    NotPeriodic { period: f64, residual: f64, at: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Struct(#[from] StructError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

fn fmt_witness(w: &Option<Vec<f64>>) -> String {
    match w {
        Some(x) => format!(" at {x:?}"),
        None => String::new(),
    }
}
