use super::lagrangian::canonical;
use super::{check_compat, lagrangian_form, require, LagrangianChart, StructError};
use crate::linalg::{self, ExprMatrix};
use crate::quadrature::gauss_legendre_unit;
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{leafwise_potential, PForm, VectorField};

/// `E L - L` with `E` the Euler field.
pub fn energy(l: &LagrangianChart) -> Expr {
    let split = l.chart.get_split().unwrap();
    let el = Expr::sum(split.fiber.iter().map(|&u| Expr::var(u) * l.l.diff(u)));
    (el - l.l.clone()).simplify()
}

/// The energy and its Hamiltonian field for `ω_L`, `i(X)ω_L = -dE`.
///
/// The `q`-components of `X` are `u`; the `u`-components solve `H b = r` with
/// `r_j = -∂E/∂q^j - Σ_i A_ij u^i` and `A_ij = ∂²L/∂q^i∂u^j - ∂²L/∂q^j∂u^i`.
pub fn energy_hamiltonian(l: &LagrangianChart, cfg: &SampleConfig) -> Result<(Expr, VectorField), StructError> {
    let nd = l.check_nondegenerate(cfg);
    if !nd.pass {
        return Err(StructError::Degenerate {
            what: "Lagrangian Hessian".into(),
            witness: nd.witness.map(|w| l.chart.names().iter().map(|n| w[n]).collect()),
        });
    }
    let split = l.chart.get_split().unwrap();
    let n = l.n();
    let e = energy(l);
    let a = |i: usize, j: usize| {
        l.l.diff(split.base[i]).diff(split.fiber[j]) - l.l.diff(split.base[j]).diff(split.fiber[i])
    };
    let r: Vec<Expr> = (0..n)
        .map(|j| {
            let mut t = vec![-e.diff(split.base[j])];
            for i in 0..n {
                t.push(-(a(i, j) * Expr::var(split.fiber[i])));
            }
            Expr::sum(t).simplify()
        })
        .collect();
    let b = linalg::solve_expr(&l.hessian, &r).ok_or_else(|| StructError::Degenerate {
        what: "Lagrangian Hessian (symbolic)".into(),
        witness: None,
    })?;
    let mut comps = vec![Expr::zero(); l.chart.dim()];
    for i in 0..n {
        comps[split.base[i]] = Expr::var(split.fiber[i]);
        comps[split.fiber[i]] = b[i].clone();
    }
    Ok((e, VectorField::new(&l.chart, comps)))
}

/// `i(X)ω + dh = 0` at the sample points.
pub fn check_hamiltonian(omega: &PForm, x: &VectorField, h: &Expr, cfg: &SampleConfig) -> CheckReport {
    let coords = omega.coords();
    let dh = PForm::one_form(coords, (0..coords.dim()).map(|k| h.diff(k)).collect());
    let res = omega.interior(x).add(&dh);
    check_zero("i(X)omega = -dh", coords, &res.components(), cfg)
}

/// A form `ω = π*Φ + dζ` together with its local Lagrangian data.
#[derive(Debug, Clone, PartialEq)]
pub struct TnForm {
    /// Closed 2-form pulled back from the base.
    pub phi: PForm,
    /// `(1,0)`-form `Σ ζ_i dq^i`.
    pub zeta: PForm,
    pub omega: PForm,
    /// Fiber potential with `∂φ/∂u^i = ζ_i`.
    pub potential: Expr,
    /// Base 1-form `α` with `dα = Φ`.
    pub alpha: PForm,
    /// `φ + α_i u^i`.
    pub lagrangian: Expr,
    pub report: ComplianceReport,
}

fn base_only(e: &Expr, chart: &CoordSystem) -> bool {
    let split = chart.get_split().unwrap();
    split.fiber.iter().all(|&u| !e.simplify().depends_on(u))
}

/// Radial primitive on the base: `α_j = Σ_k q^k ∫_0^1 t Φ_kj(t q) dt`.
pub fn base_potential(phi: &PForm) -> Result<PForm, StructError> {
    let chart = phi.coords();
    let split = chart.require_split()?.clone();
    let w = phi.matrix();
    let n = split.base.len();
    let comp = |j: usize| -> Expr {
        let qj = split.base[j];
        let mut terms = Vec::new();
        for k in 0..n {
            let qk = split.base[k];
            let c = &w[qk][qj];
            if c.is_zero() {
                continue;
            }
            match c.polynomial_in(&split.base) {
                Some(poly) => {
                    for (exps, coeff) in poly {
                        let total: u32 = exps.iter().sum();
                        let mut f = vec![coeff, Expr::frac(1, total as i64 + 2), Expr::var(qk)];
                        for (m, &e) in exps.iter().enumerate() {
                            if e > 0 {
                                f.push(Expr::var(split.base[m]).powi(e as i32));
                            }
                        }
                        terms.push(Expr::product(f));
                    }
                }
                None => {
                    for (t, wt) in gauss_legendre_unit(16) {
                        let scaled = |v: usize| {
                            if split.base.contains(&v) {
                                Expr::real(t) * Expr::var(v)
                            } else {
                                Expr::var(v)
                            }
                        };
                        terms.push(Expr::product([
                            Expr::real(wt * t),
                            c.substitute(&scaled),
                            Expr::var(qk),
                        ]));
                    }
                }
            }
        }
        Expr::sum(terms).simplify()
    };
    Ok(PForm::from_terms(
        chart,
        1,
        (0..n).map(|j| (vec![split.base[j]], comp(j))),
    ))
}

/// Build `ω = π*Φ + dζ` after checking the hypotheses, then recover a local
/// Lagrangian `φ + α_i u^i` and verify it reproduces `ω`.
pub fn assemble_tn_form(phi: &PForm, zeta: &PForm, cfg: &SampleConfig) -> Result<TnForm, StructError> {
    let chart = phi.coords().clone();
    let split = chart.require_split()?.clone();
    if phi.degree() != 2 || zeta.degree() != 1 || *zeta.coords() != chart {
        return Err(StructError::Invalid(
            "expected a 2-form Φ and a 1-form ζ on the same chart".into(),
        ));
    }
    for (idx, c) in phi.terms() {
        if idx.iter().any(|i| split.fiber.contains(i)) || !base_only(c, &chart) {
            return Err(StructError::Invalid("Φ must be a form on the base".into()));
        }
    }
    for (idx, _) in zeta.terms() {
        if split.fiber.contains(&idx[0]) {
            return Err(StructError::Invalid("ζ must be of type (1,0)".into()));
        }
    }
    let mut report = ComplianceReport::new();
    let dphi: Vec<Expr> = phi.d().terms().map(|(_, c)| c.clone()).collect();
    report.push(require(check_zero("Phi closed", &chart, &dphi, cfg))?);

    let zc: Vec<Expr> = split.base.iter().map(|&q| zeta.get(&[q])).collect();
    let hz: ExprMatrix = zc
        .iter()
        .map(|z| split.fiber.iter().map(|&u| z.diff(u)).collect())
        .collect();
    let n = split.base.len();
    let mut asym = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            asym.push(&hz[i][j] - &hz[j][i]);
        }
    }
    report.push(require(check_zero("zeta leafwise closed", &chart, &asym, cfg))?);

    let omega = phi.add(&zeta.d()).simplify();
    let w = omega.matrix();
    let dim = chart.dim();
    let rank_tol = cfg.rank_tol;
    report.push(require(check_points(
        "omega nondegenerate",
        &chart,
        &cfg.points(dim),
        0.0,
        cfg.mode,
        |x| dim as f64 - linalg::rank(&linalg::eval_matrix(&w, x), rank_tol) as f64,
    ))?);

    let s = canonical(&chart, cfg)?;
    report.extend(check_compat(&omega, &s, cfg));

    let mut xi = PForm::zero(&chart, 1);
    for (i, &u) in split.fiber.iter().enumerate() {
        xi = xi.add(&PForm::from_terms(&chart, 1, [(vec![u], zc[i].clone())]));
    }
    let potential = leafwise_potential(&xi, cfg)?;
    let grad: Vec<Expr> = (0..n).map(|i| potential.diff(split.fiber[i]) - zc[i].clone()).collect();
    report.push(check_zero("d''phi = zeta", &chart, &grad, cfg));

    let alpha = base_potential(phi)?;
    let da: Vec<Expr> = alpha.d().sub(phi).terms().map(|(_, c)| c.clone()).collect();
    report.push(check_zero("d alpha = Phi", &chart, &da, cfg));

    let omega_phi = lagrangian_form(&LagrangianChart::new(&chart, potential.clone())?, cfg)?;
    let r: Vec<Expr> = phi
        .add(&omega_phi)
        .sub(&omega)
        .terms()
        .map(|(_, c)| c.clone())
        .collect();
    report.push(check_zero("omega = Phi + omega_phi", &chart, &r, cfg));

    let alpha_c = alpha.components();
    let lagrangian = Expr::sum(
        std::iter::once(potential.clone()).chain((0..n).map(|i| &alpha_c[split.base[i]] * &Expr::var(split.fiber[i]))),
    );
    let omega_l = lagrangian_form(&LagrangianChart::new(&chart, lagrangian.clone())?, cfg)?;
    let r: Vec<Expr> = omega_l.sub(&omega).terms().map(|(_, c)| c.clone()).collect();
    report.push(check_zero("omega = omega_L", &chart, &r, cfg));

    Ok(TnForm {
        phi: phi.clone(),
        zeta: zeta.clone(),
        omega,
        potential,
        alpha,
        lagrangian,
        report,
    })
}

/// Vertical `Z` with `Ψ + i(Z)d''ζ = df`, where `Ψ = i(X)π*Φ`: solves
/// `Σ_j ∂ζ_i/∂u^j Z^j = ∂f/∂q^i - Σ_k X^k Φ_ki`.
pub fn solve_vertical_correction(
    tn: &TnForm,
    x: &VectorField,
    f: &Expr,
    cfg: &SampleConfig,
) -> Result<VectorField, StructError> {
    let chart = tn.omega.coords();
    let split = chart.require_split()?;
    if !base_only(f, chart) {
        return Err(StructError::Invalid("f must be a function on the base".into()));
    }
    let n = split.base.len();
    let w = tn.phi.matrix();
    let zc: Vec<Expr> = split.base.iter().map(|&q| tn.zeta.get(&[q])).collect();
    let hz: ExprMatrix = zc
        .iter()
        .map(|z| split.fiber.iter().map(|&u| z.diff(u).simplify()).collect())
        .collect();
    let rhs: Vec<Expr> = (0..n)
        .map(|i| {
            let qi = split.base[i];
            let psi = Expr::sum((0..chart.dim()).map(|k| &x.comps()[k] * &w[k][qi]));
            (f.diff(qi) - psi).simplify()
        })
        .collect();
    let rank_tol = cfg.rank_tol;
    let nd = check_points(
        "zeta Hessian nondegenerate",
        chart,
        &cfg.points(chart.dim()),
        0.0,
        cfg.mode,
        |x| n as f64 - linalg::rank(&linalg::eval_matrix(&hz, x), rank_tol) as f64,
    );
    if !nd.pass {
        return Err(StructError::Degenerate {
            what: "fiber Hessian of ζ".into(),
            witness: nd.witness.map(|w| chart.names().iter().map(|n| w[n]).collect()),
        });
    }
    let z = linalg::solve_expr(&hz, &rhs).ok_or_else(|| StructError::Degenerate {
        what: "fiber Hessian of ζ (symbolic)".into(),
        witness: None,
    })?;
    let mut comps = vec![Expr::zero(); chart.dim()];
    for i in 0..n {
        comps[split.fiber[i]] = z[i].clone();
    }
    Ok(VectorField::new(chart, comps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn lag(n: usize, s: &str) -> LagrangianChart {
        let c = CoordSystem::tangent(n);
        LagrangianChart::new(&c, parse(s, &c).unwrap()).unwrap()
    }

    fn vf(c: &CoordSystem, s: &[&str]) -> VectorField {
        VectorField::new(c, s.iter().map(|t| parse(t, c).unwrap()).collect()).simplify()
    }

    #[test]
    fn free_particle_energy() {
        let cfg = SampleConfig::default();
        let l = lag(1, "u1^2/2");
        let (e, x) = energy_hamiltonian(&l, &cfg).unwrap();
        assert_eq!(e, parse("u1^2/2", &l.chart).unwrap().simplify());
        assert_eq!(x, vf(&l.chart, &["u1", "0"]));
    }

    #[test]
    fn oscillator_field() {
        let cfg = SampleConfig::default();
        let l = lag(1, "(u1^2 + 3*q1^2)/2");
        let (e, x) = energy_hamiltonian(&l, &cfg).unwrap();
        assert_eq!(x, vf(&l.chart, &["u1", "3*q1"]));
        let w = lagrangian_form(&l, &cfg).unwrap();
        assert!(check_hamiltonian(&w, &x, &e, &cfg).pass);
    }

    #[test]
    fn gyroscopic_term() {
        let cfg = SampleConfig::default();
        let l = lag(2, "(u1^2 + u2^2)/2 + q1*u2 + q1^2*q2");
        let (e, x) = energy_hamiltonian(&l, &cfg).unwrap();
        let w = lagrangian_form(&l, &cfg).unwrap();
        assert!(check_hamiltonian(&w, &x, &e, &cfg).pass);
    }

    #[test]
    fn tn_free_particle() {
        let cfg = SampleConfig::default();
        let c = CoordSystem::tangent(1);
        let zeta = PForm::from_terms(&c, 1, [(vec![0], Expr::var(1))]);
        let tn = assemble_tn_form(&PForm::zero(&c, 2), &zeta, &cfg).unwrap();
        assert!(tn.report.pass(), "{:?}", tn.report);
        assert_eq!(tn.potential, parse("u1^2/2", &c).unwrap().simplify());
        let x = vf(&c, &["u1", "0"]);
        let z = solve_vertical_correction(&tn, &x, &Expr::zero(), &cfg).unwrap();
        assert!(z.is_zero());
        let z = solve_vertical_correction(&tn, &x, &Expr::var(0), &cfg).unwrap();
        assert_eq!(z, VectorField::coordinate(&c, 1));
    }

    #[test]
    fn tn_magnetic() {
        let cfg = SampleConfig::default();
        let c = CoordSystem::tangent(2);
        let phi = PForm::dx(&c, 0).wedge(&PForm::dx(&c, 1));
        let zeta = PForm::one_form(&c, vec![Expr::var(2), Expr::var(3), Expr::zero(), Expr::zero()]);
        let tn = assemble_tn_form(&phi, &zeta, &cfg).unwrap();
        assert!(tn.report.pass(), "{:?}", tn.report);
        let x = vf(&c, &["u1", "u2", "0", "0"]);
        let z = solve_vertical_correction(&tn, &x, &Expr::zero(), &cfg).unwrap();
        assert_eq!(z, vf(&c, &["0", "0", "u2", "-u1"]));
        let l = LagrangianChart::new(&c, tn.potential.clone()).unwrap();
        let e = energy(&l);
        assert!(check_hamiltonian(&tn.omega, &x.add(&z), &e, &cfg).pass);
    }

    #[test]
    fn asymmetric_zeta_rejected() {
        let cfg = SampleConfig::default();
        let c = CoordSystem::tangent(2);
        let zeta = PForm::one_form(&c, vec![Expr::var(3), Expr::zero(), Expr::zero(), Expr::zero()]);
        let err = assemble_tn_form(&PForm::zero(&c, 2), &zeta, &cfg).unwrap_err();
        assert_eq!(err.report().unwrap().name, "zeta leafwise closed");
        assert!(err.report().unwrap().witness.is_some());
        let c1 = CoordSystem::tangent(1);
        let zeta = PForm::from_terms(&c1, 1, [(vec![0], Expr::var(1).powi(2))]);
        assert!(assemble_tn_form(&PForm::zero(&c1, 2), &zeta, &cfg).is_ok());
    }
}
