use super::{PForm, TensorError};
use crate::quadrature::gauss_legendre_unit;
use crate::sampling::{max_with_index, SampleConfig};
use crate::symexpr::{Expr, Split};

const NODES: usize = 16;

/// Fiber residuals `∂ξ_i/∂u^j - ∂ξ_j/∂u^i` of a form `Σ ξ_i du^i`.
pub fn fiber_curl(xi: &[Expr], split: &Split) -> Vec<Expr> {
    let n = split.fiber.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(xi[i].diff(split.fiber[j]) - xi[j].diff(split.fiber[i]));
        }
    }
    out
}

/// Potential of a leafwise-closed form `ξ = Σ ξ_i du^i` along the fibers:
/// `φ(q,u) = ∫_0^1 Σ_i ξ_i(q, t u) u^i dt`.
///
/// Exact when every `ξ_i` is polynomial in the fiber variables; otherwise a
/// 16-node Gauss-Legendre rule is built into the expression.
pub fn leafwise_potential(xi: &PForm, cfg: &SampleConfig) -> Result<Expr, TensorError> {
    let coords = xi.coords();
    let split = coords.require_split()?.clone();
    if xi.degree() != 1 {
        return Err(TensorError::Invalid("leafwise potential needs a 1-form".into()));
    }
    for &b in &split.base {
        if xi.get(&[b]).is_zero_exact() != Some(true) {
            return Err(TensorError::Invalid(format!(
                "form has a d{} component, so it is not of type (0,1)",
                coords.name(b)
            )));
        }
    }
    let comps: Vec<Expr> = split.fiber.iter().map(|&f| xi.get(&[f])).collect();

    let curl = fiber_curl(&comps, &split);
    let points = cfg.points(coords.dim());
    let res: Vec<f64> = points
        .iter()
        .map(|x| curl.iter().map(|e| e.eval(x).abs()).fold(0.0, f64::max))
        .collect();
    let (max, at) = max_with_index(&res);
    if !(max <= cfg.tol) {
        return Err(TensorError::NotClosed {
            residual: max,
            witness: at.map(|i| points[i].clone()),
        });
    }

    let polys: Option<Vec<_>> = comps.iter().map(|c| c.polynomial_in(&split.fiber)).collect();
    if let Some(polys) = polys {
        let mut terms = Vec::new();
        for (i, poly) in polys.into_iter().enumerate() {
            for (exps, coeff) in poly {
                let total: u32 = exps.iter().sum();
                let mut factors = vec![coeff, Expr::frac(1, total as i64 + 1), Expr::var(split.fiber[i])];
                for (k, &e) in exps.iter().enumerate() {
                    if e > 0 {
                        factors.push(Expr::var(split.fiber[k]).powi(e as i32));
                    }
                }
                terms.push(Expr::product(factors));
            }
        }
        return Ok(Expr::sum(terms).simplify());
    }

    let mut terms = Vec::new();
    for (t, w) in gauss_legendre_unit(NODES) {
        let scaled = |k: usize| {
            if split.fiber.contains(&k) {
                Expr::real(t) * Expr::var(k)
            } else {
                Expr::var(k)
            }
        };
        for (i, c) in comps.iter().enumerate() {
            terms.push(Expr::product([
                Expr::real(w),
                c.substitute(&scaled),
                Expr::var(split.fiber[i]),
            ]));
        }
    }
    Ok(Expr::sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse, CoordSystem};

    fn form(c: &CoordSystem, comps: &[&str]) -> PForm {
        PForm::one_form(c, comps.iter().map(|s| parse(s, c).unwrap()).collect())
    }

    #[test]
    fn polynomial_examples() {
        let c = CoordSystem::tangent(1);
        let cfg = SampleConfig::default();
        let phi = leafwise_potential(&form(&c, &["0", "u1"]), &cfg).unwrap();
        assert_eq!(phi, parse("u1^2/2", &c).unwrap().simplify());
        let phi = leafwise_potential(&form(&c, &["0", "q1"]), &cfg).unwrap();
        assert_eq!(phi, parse("q1*u1", &c).unwrap().simplify());
        let c2 = CoordSystem::tangent(2);
        let phi = leafwise_potential(&form(&c2, &["0", "0", "u2", "u1"]), &cfg).unwrap();
        assert_eq!(phi, parse("u1*u2", &c2).unwrap().simplify());
    }

    #[test]
    fn quadrature_branch() {
        // ξ = cos(u1) du1 has potential sin(u1)
        let c = CoordSystem::tangent(1);
        let cfg = SampleConfig::default();
        let phi = leafwise_potential(&form(&c, &["0", "cos(u1) * q1"]), &cfg).unwrap();
        for x in cfg.points(2) {
            assert!((phi.eval(&x) - x[0] * x[1].sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn not_closed_is_reported() {
        let c = CoordSystem::tangent(2);
        let err = leafwise_potential(&form(&c, &["0", "0", "u2", "0"]), &SampleConfig::default()).unwrap_err();
        assert!(matches!(err, TensorError::NotClosed { .. }));
    }

    #[test]
    fn base_component_rejected() {
        let c = CoordSystem::tangent(1);
        let err = leafwise_potential(&form(&c, &["1", "u1"]), &SampleConfig::default()).unwrap_err();
        assert!(matches!(err, TensorError::Invalid(_)));
    }
}
