use super::{canonical_s, require, StructError, TangentStructure};
use crate::linalg::{self, ExprMatrix};
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{
    flat_metric, lie_derivative_bilinear, sharp_omega, EndField, MetricBlock, PForm, Splitting, VectorField,
};

/// A Lagrangian function on a chart with a `(q, u)` split.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianChart {
    pub chart: CoordSystem,
    pub l: Expr,
    /// `H_ij = ∂²L/∂u^i∂u^j`.
    pub hessian: ExprMatrix,
}

impl LagrangianChart {
    pub fn new(chart: &CoordSystem, l: Expr) -> Result<Self, StructError> {
        let split = chart.require_split()?;
        let hessian = split
            .fiber
            .iter()
            .map(|&i| split.fiber.iter().map(|&j| l.diff(i).diff(j).simplify()).collect())
            .collect();
        Ok(LagrangianChart {
            chart: chart.clone(),
            l,
            hessian,
        })
    }

    pub fn n(&self) -> usize {
        self.hessian.len()
    }

    /// Full rank of the fiber Hessian at every sample point.
    pub fn check_nondegenerate(&self, cfg: &SampleConfig) -> CheckReport {
        let n = self.n();
        let rank_tol = cfg.rank_tol;
        check_points(
            "Hessian rank n",
            &self.chart,
            &cfg.points(self.chart.dim()),
            0.0,
            cfg.mode,
            |x| n as f64 - linalg::rank(&linalg::eval_matrix(&self.hessian, x), rank_tol) as f64,
        )
    }

    /// `θ_L = dL ∘ S = Σ ∂L/∂u^i dq^i`.
    pub fn theta_form(&self) -> PForm {
        let split = self.chart.get_split().unwrap();
        PForm::from_terms(
            &self.chart,
            1,
            split
                .base
                .iter()
                .zip(&split.fiber)
                .map(|(&q, &u)| (vec![q], self.l.diff(u))),
        )
    }
}

/// `ω_L = dθ_L`, after checking the Hessian is nondegenerate.
pub fn lagrangian_form(l: &LagrangianChart, cfg: &SampleConfig) -> Result<PForm, StructError> {
    let c = l.check_nondegenerate(cfg);
    if !c.pass {
        return Err(StructError::Degenerate {
            what: "Lagrangian Hessian".into(),
            witness: c.witness.map(|w| l.chart.names().iter().map(|n| w[n]).collect()),
        });
    }
    Ok(l.theta_form().d().simplify())
}

/// `½(∂²L/∂q^i∂u^j - ∂²L/∂q^j∂u^i) dq^i∧dq^j + ∂²L/∂u^i∂u^j du^i∧dq^j`, written out directly.
pub fn lagrangian_form_explicit(l: &LagrangianChart) -> PForm {
    let split = l.chart.get_split().unwrap();
    let n = l.n();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (qi, qj, ui, uj) = (split.base[i], split.base[j], split.fiber[i], split.fiber[j]);
            let a = l.l.diff(qi).diff(uj) - l.l.diff(qj).diff(ui);
            terms.push((vec![qi, qj], Expr::frac(1, 2) * a));
            terms.push((vec![ui, qj], l.hessian[i][j].clone()));
        }
    }
    PForm::from_terms(&l.chart, 2, terms).simplify()
}

fn nondegenerate_check(omega: &PForm, cfg: &SampleConfig) -> CheckReport {
    let w = omega.matrix();
    let dim = omega.coords().dim();
    let rank_tol = cfg.rank_tol;
    check_points("nondegenerate", omega.coords(), &cfg.points(dim), 0.0, cfg.mode, |x| {
        dim as f64 - linalg::rank(&linalg::eval_matrix(&w, x), rank_tol) as f64
    })
}

fn q_frame(chart: &CoordSystem) -> Option<Vec<VectorField>> {
    chart
        .get_split()
        .map(|s| s.base.iter().map(|&q| VectorField::coordinate(chart, q)).collect())
}

/// `λ_ik = ω(e_k, S e_i)` on a frame of `V′`; symmetric iff compatibility holds on that frame.
pub fn lambda_matrix(omega: &PForm, s: &EndField, frame: &[VectorField]) -> ExprMatrix {
    frame
        .iter()
        .map(|ei| {
            let sei = s.apply(ei);
            frame.iter().map(|ek| omega.eval_fields(&[ek, &sei])).collect()
        })
        .collect()
}

/// Closedness, nondegeneracy and `ω(X,SY) = ω(Y,SX)` on the coordinate frame,
/// plus symmetry of `λ` on the `q`-frame when the chart is split.
pub fn check_compat(omega: &PForm, s: &EndField, cfg: &SampleConfig) -> ComplianceReport {
    let coords = omega.coords();
    let mut r = ComplianceReport::new();
    r.push(check_zero(
        "closed",
        coords,
        &omega.d().terms().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
        cfg,
    ));
    r.push(nondegenerate_check(omega, cfg));
    let n = coords.dim();
    let e: Vec<VectorField> = (0..n).map(|i| VectorField::coordinate(coords, i)).collect();
    let se: Vec<VectorField> = e.iter().map(|v| s.apply(v)).collect();
    let mut res = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            res.push(omega.eval_fields(&[&e[a], &se[b]]) - omega.eval_fields(&[&e[b], &se[a]]));
        }
    }
    r.push(check_zero("compat", coords, &res, cfg));
    if let Some(frame) = q_frame(coords) {
        let lam = lambda_matrix(omega, s, &frame);
        let k = lam.len();
        let mut asym = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                asym.push(&lam[i][j] - &lam[j][i]);
            }
        }
        r.push(check_zero("lambda symmetric", coords, &asym, cfg));
    }
    r
}

/// `Θ(e_a, e_b) = ω(S e_a, e_b)` on the `V′` frame.
pub fn theta_metric(
    omega: &PForm,
    s: &EndField,
    split: &Splitting,
    cfg: &SampleConfig,
) -> Result<MetricBlock, StructError> {
    let frame = &split.v_prime;
    let coords = omega.coords();
    let dim = coords.dim();
    let sframe: Vec<VectorField> = frame.iter().map(|e| s.apply(e)).collect();
    let cols: ExprMatrix = (0..dim)
        .map(|i| frame.iter().chain(&sframe).map(|f| f.comps()[i].clone()).collect())
        .collect();
    let rank_tol = cfg.rank_tol;
    let t = check_points("V' transversal to im S", coords, &cfg.points(dim), 0.0, cfg.mode, |x| {
        dim as f64 - linalg::rank(&linalg::eval_matrix(&cols, x), rank_tol) as f64
    });
    require(t)?;
    let m = frame
        .iter()
        .map(|a| {
            let sa = s.apply(a);
            frame.iter().map(|b| omega.eval_fields(&[&sa, b]).simplify()).collect()
        })
        .collect();
    Ok(MetricBlock::new(frame.clone(), m)?)
}

/// `L_v T = 0` for the frame fields `v` of `V`, where `T = Σ Θ_ab θ^a θ^b`.
pub fn projectability(theta: &MetricBlock, split: &Splitting, cfg: &SampleConfig) -> Result<CheckReport, StructError> {
    let coframe = split.coframe()?;
    let coords = split.coords();
    let n = coords.dim();
    let k = theta.len();
    let comps: Vec<Vec<Expr>> = coframe[..k].iter().map(PForm::components).collect();
    let t: ExprMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    Expr::sum((0..k).flat_map(|a| {
                        let comps = &comps;
                        (0..k).map(move |b| {
                            Expr::product([theta.m[a][b].clone(), comps[a][i].clone(), comps[b][j].clone()])
                        })
                    }))
                })
                .collect()
        })
        .collect();
    let mut exprs = Vec::new();
    for v in &split.v {
        exprs.extend(lie_derivative_bilinear(&t, v).into_iter().flatten());
    }
    Ok(check_zero("Theta projectable", coords, &exprs, cfg))
}

/// The tangent structure with `S = 0` on `V` and `S = ♯_ω ∘ ♭_Θ` on `V′`,
/// together with the report of its verification.
pub fn tangent_from_metric(
    omega: &PForm,
    split: &Splitting,
    theta: &MetricBlock,
    cfg: &SampleConfig,
) -> Result<(TangentStructure, ComplianceReport), StructError> {
    let coords = omega.coords();
    let mut pre = Vec::new();
    for (name, frame) in [("V' Lagrangian", &split.v_prime), ("V Lagrangian", &split.v)] {
        let mut vals = Vec::new();
        for a in 0..frame.len() {
            for b in a + 1..frame.len() {
                vals.push(omega.eval_fields(&[&frame[a], &frame[b]]));
            }
        }
        pre.push(require(check_zero(name, coords, &vals, cfg))?);
    }
    let k = theta.len();
    let rank_tol = cfg.rank_tol;
    let nd = check_points(
        "Theta nondegenerate",
        coords,
        &cfg.points(coords.dim()),
        0.0,
        cfg.mode,
        |x| k as f64 - linalg::rank(&theta.at(x), rank_tol) as f64,
    );
    if !nd.pass {
        return Err(StructError::Degenerate {
            what: "transversal metric".into(),
            witness: nd.witness.map(|w| coords.names().iter().map(|n| w[n]).collect()),
        });
    }
    pre.push(nd);
    pre.push(require(projectability(theta, split, cfg)?)?);

    let coframe = split.coframe()?;
    let n = coords.dim();
    let mut m = linalg::zeros(n, n);
    for (a, e) in split.v_prime.iter().enumerate() {
        let se = sharp_omega(omega, &flat_metric(theta, split, e)?)?;
        let th = coframe[a].components();
        for i in 0..n {
            for j in 0..n {
                m[i][j] = &m[i][j] + &(&se.comps()[i] * &th[j]);
            }
        }
    }
    let s = EndField::from_matrix(coords, linalg::simplify_matrix(&m));

    let mut report = ComplianceReport { checks: pre };
    let (t, tr) = TangentStructure::verify(s, cfg);
    report.extend(tr);
    report.extend(check_compat(omega, &t.s, cfg));
    let back = theta_metric(omega, &t.s, split, cfg)?;
    let diff: Vec<Expr> = back
        .m
        .iter()
        .flatten()
        .zip(theta.m.iter().flatten())
        .map(|(a, b)| a - b)
        .collect();
    report.push(check_zero("Theta roundtrip", coords, &diff, cfg));
    Ok((t, report))
}

/// Compare two Lagrangians across a transition `map` (images of `lb`'s chart
/// coordinates over `la`'s chart).
pub fn transition_check(
    la: &LagrangianChart,
    lb: &LagrangianChart,
    map: &[Expr],
    cfg: &SampleConfig,
) -> Result<ComplianceReport, StructError> {
    let (sa, sb) = (la.chart.require_split()?, lb.chart.require_split()?);
    if map.len() != lb.chart.dim() || sa.base.len() != sb.base.len() {
        return Err(StructError::Invalid("transition map does not match the charts".into()));
    }
    let n = sa.base.len();
    let mut shape = Vec::new();
    for i in 0..n {
        let qt = &map[sb.base[i]];
        let ut = &map[sb.fiber[i]];
        for j in 0..n {
            shape.push(qt.diff(sa.fiber[j]));
            shape.push(ut.diff(sa.fiber[j]) - qt.diff(sa.base[j]));
        }
    }
    let shape = check_zero("transition affine in u", &la.chart, &shape, cfg);
    if !shape.pass {
        return Err(StructError::failed(shape));
    }
    let mut r = ComplianceReport::new();
    r.push(shape);
    let dl = (lb.l.compose(map) - la.l.clone()).simplify();
    let mut hess = Vec::new();
    let mut curl = Vec::new();
    for i in 0..n {
        let di = dl.diff(sa.fiber[i]);
        for j in 0..n {
            hess.push(di.diff(sa.fiber[j]));
            if j > i {
                curl.push(di.diff(sa.base[j]) - dl.diff(sa.fiber[j]).diff(sa.base[i]));
            }
        }
    }
    r.push(check_zero("u-Hessian of dL = 0", &la.chart, &hess, cfg));
    r.push(check_zero("alpha closed", &la.chart, &curl, cfg));
    let wa = lagrangian_form(la, cfg)?;
    let wb = lagrangian_form(lb, cfg)?.pullback(&la.chart, map);
    let diff: Vec<Expr> = wb.sub(&wa).terms().map(|(_, c)| c.clone()).collect();
    r.push(check_zero("omega agrees on overlap", &la.chart, &diff, cfg));
    Ok(r)
}

/// `ω = dε`, `ε ∘ S = 0` and `ε = dL ∘ S`.
pub fn global_witness_check(
    epsilon: &PForm,
    l: &Expr,
    omega: &PForm,
    s: &EndField,
    cfg: &SampleConfig,
) -> ComplianceReport {
    let coords = omega.coords();
    let mut r = ComplianceReport::new();
    let d: Vec<Expr> = epsilon.d().sub(omega).terms().map(|(_, c)| c.clone()).collect();
    r.push(check_zero("omega = d epsilon", coords, &d, cfg));
    r.push(check_zero(
        "epsilon vanishes on V",
        coords,
        &epsilon.compose_end(s).components(),
        cfg,
    ));
    let dl = PForm::one_form(coords, (0..coords.dim()).map(|k| l.diff(k)).collect());
    let eta: Vec<Expr> = epsilon
        .components()
        .iter()
        .zip(dl.compose_end(s).components())
        .map(|(a, b)| a - &b)
        .collect();
    r.push(check_zero("epsilon = dL o S", coords, &eta, cfg));
    r
}

/// Canonical `S` on a split chart, checked.
pub(crate) fn canonical(chart: &CoordSystem, cfg: &SampleConfig) -> Result<EndField, StructError> {
    Ok(canonical_s(chart, cfg)?.s)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::gen;
    use crate::structures::canonical_s;
    use proptest::prelude::*;

    fn cfg() -> SampleConfig {
        SampleConfig::default().with_samples(20)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn lagrangian_forms_are_compatible(seed in any::<u64>(), n in 1usize..=3) {
            let cfg = cfg();
            let c = CoordSystem::tangent(n);
            let l = LagrangianChart::new(&c, gen::random_lagrangian(&mut gen::rng(seed), &c)).unwrap();
            let w = lagrangian_form(&l, &cfg).unwrap();
            let s = canonical_s(&c, &cfg).unwrap().s;
            let r = check_compat(&w, &s, &cfg);
            prop_assert!(r.pass(), "{:?}", r.first_failure());
            prop_assert!(w.sub(&lagrangian_form_explicit(&l)).simplify().is_empty());
        }

        #[test]
        fn gauge_terms_do_not_change_the_form(seed in any::<u64>(), n in 1usize..=3) {
            let cfg = cfg();
            let c = CoordSystem::tangent(n);
            let split = c.get_split().unwrap().clone();
            let mut rng = gen::rng(seed);
            let l = gen::random_lagrangian(&mut rng, &c);
            let f = gen::random_poly(&mut rng, &split.base, 3, 3);
            let g = gen::random_poly(&mut rng, &split.base, 3, 3);
            let gauge = Expr::sum(split.base.iter().zip(&split.fiber).map(|(&q, &u)| g.diff(q) * Expr::var(u)));
            let a = lagrangian_form(&LagrangianChart::new(&c, l.clone()).unwrap(), &cfg).unwrap();
            let b = lagrangian_form(&LagrangianChart::new(&c, l + f + gauge).unwrap(), &cfg).unwrap();
            prop_assert!(a.sub(&b).simplify().is_empty());
        }

        #[test]
        fn theta_is_the_fiber_hessian(seed in any::<u64>(), n in 1usize..=2) {
            let cfg = cfg();
            let c = CoordSystem::tangent(n);
            let l = LagrangianChart::new(&c, gen::random_lagrangian(&mut gen::rng(seed), &c)).unwrap();
            let w = lagrangian_form(&l, &cfg).unwrap();
            let s = canonical_s(&c, &cfg).unwrap().s;
            let th = theta_metric(&w, &s, &Splitting::coordinate(&c).unwrap(), &cfg).unwrap();
            for x in cfg.points(2 * n) {
                prop_assert!((th.at(&x) - crate::linalg::eval_matrix(&l.hessian, &x)).amax() < 1e-12);
            }
        }
    }
}
