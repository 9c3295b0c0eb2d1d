//! Poisson bivectors paired with an endomorphism field: the locally Lagrangian
//! axioms, leafwise restriction, the fibered-product family and tangent lifts.

mod fibered;
mod lift;
mod llp;

use thiserror::Error;

use crate::report::ComplianceReport;
use crate::sampling::{check_zero, SampleConfig};
use crate::structures::StructError;
use crate::symexpr::{Expr, SymError};
use crate::tensor::{Bivector, PForm, TensorError, VectorField};

pub use fibered::{fibered_product, FiberedProduct, LAMBDA_CONDITION_LIMIT};
pub use lift::{check_lift_brackets, hat, lift_obstruction, tangent_lift, tn_poisson_check, TangentLift};
pub use llp::{leaf_at, leaf_restriction, llp_check, LLPReport, Leaf, SampleRank};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoissonError {
    #[error("bivector is not Poisson (Schouten residual {residual:e}){}", fmt_witness(.witness))]
    NotPoisson { residual: f64, witness: Option<Vec<f64>> },
    #[error("{what} is degenerate{}", fmt_witness(.witness))]
    Degenerate { what: String, witness: Option<Vec<f64>> },
    #[error("rank of P is not locally constant near {witness:?}: {ranks:?}")]
    RankNotConstant { witness: Vec<f64>, ranks: Vec<usize> },
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

/// A bivector together with the outcome of its Jacobi check.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonBivector {
    pub p: Bivector,
    pub jacobi_verified: bool,
}

impl PoissonBivector {
    /// Run [`check_jacobi`]; fails with the worst Schouten residual.
    pub fn new(p: Bivector, cfg: &SampleConfig) -> Result<Self, PoissonError> {
        let r = check_jacobi(&p, cfg);
        let c = &r.checks[0];
        if !c.pass {
            let witness = c
                .witness
                .as_ref()
                .map(|w| p.coords().names().iter().map(|n| w[n]).collect());
            return Err(PoissonError::NotPoisson {
                residual: c.max_residual.unwrap_or(f64::INFINITY),
                witness,
            });
        }
        Ok(PoissonBivector {
            p,
            jacobi_verified: true,
        })
    }

    pub fn unchecked(p: Bivector) -> Self {
        PoissonBivector {
            p,
            jacobi_verified: false,
        }
    }

    pub fn sharp(&self, a: &PForm) -> VectorField {
        sharp_p(&self.p, a)
    }
}

/// `(♯_P α)^i = Σ_j α_j P^{ji}`, so `⟨♯_P α, β⟩ = P(α, β)`.
pub fn sharp_p(p: &Bivector, a: &PForm) -> VectorField {
    p.sharp(a)
}

/// All components of `[P, P]` vanish at the samples.
pub fn check_jacobi(p: &Bivector, cfg: &SampleConfig) -> ComplianceReport {
    let t = p.schouten_square();
    let comps: Vec<Expr> = t.components().map(|(_, e)| e.clone()).collect();
    let mut r = ComplianceReport::new();
    r.push(check_zero("Jacobi", p.coords(), &comps, cfg));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse, CoordSystem};

    fn chart3() -> CoordSystem {
        CoordSystem::new(&["x", "y", "z"]).unwrap()
    }

    #[test]
    fn sharp_of_dy_is_dz() {
        let c = chart3();
        let p = Bivector::from_terms(&c, [(1, 2, Expr::one())]);
        assert_eq!(
            sharp_p(&p, &PForm::dx(&c, 1)).simplify(),
            VectorField::coordinate(&c, 2)
        );
        assert_eq!(
            sharp_p(&p, &PForm::dx(&c, 2)).simplify(),
            VectorField::coordinate(&c, 1).neg().simplify()
        );
        assert!(sharp_p(&p, &PForm::zero(&c, 1)).simplify().is_zero());
        assert!(sharp_p(&p, &PForm::dx(&c, 0)).simplify().is_zero());
    }

    #[test]
    fn jacobi_examples() {
        let cfg = SampleConfig::default();
        let c = chart3();
        let konst = Bivector::from_terms(&c, [(0, 1, Expr::int(2)), (1, 2, Expr::int(-3))]);
        assert!(check_jacobi(&konst, &cfg).pass());
        // T^{xyz} = P^{xz} ∂_x P^{xy} = 1
        let bad = Bivector::from_terms(&c, [(0, 1, parse("x", &c).unwrap()), (0, 2, Expr::one())]);
        let r = check_jacobi(&bad, &cfg);
        assert!(!r.pass());
        assert!((r.checks[0].max_residual.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.checks[0].witness.is_some());
        match PoissonBivector::new(bad, &cfg) {
            Err(PoissonError::NotPoisson { residual, witness }) => {
                assert_eq!(residual, 1.0);
                assert_eq!(witness.unwrap().len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
