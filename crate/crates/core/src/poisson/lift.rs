use super::{check_jacobi, llp_check, PoissonBivector, PoissonError};
use crate::linalg;
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::structures::canonical_s;
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{Bivector, PForm};

/// The lift of a base Poisson bivector `W` to the tangent bundle chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentLift {
    pub w: Bivector,
    pub p: PoissonBivector,
    pub report: ComplianceReport,
}

/// `α̂ = Σ α_j(q) u^j` for a 1-form along the base directions.
pub fn hat(alpha: &PForm) -> Expr {
    let chart = alpha.coords();
    let split = chart.get_split().expect("split chart");
    let a = alpha.components();
    Expr::sum(
        split
            .base
            .iter()
            .zip(&split.fiber)
            .map(|(&q, &u)| &a[q] * &Expr::var(u)),
    )
}

fn base_only(chart: &CoordSystem, e: &Expr) -> bool {
    let split = chart.get_split().expect("split chart");
    e.free_vars().iter().all(|v| split.base.contains(v))
}

/// `P(du^i, dq^j) = W^{ij}`, `P(du^i, du^j) = u^k ∂_k W^{ij}`, `P(dq^i, dq^j) = 0`.
/// `W` must live on the split chart, with base components depending on `q` only.
pub fn tangent_lift(w: &Bivector, cfg: &SampleConfig) -> Result<TangentLift, PoissonError> {
    let chart = w.coords();
    let split = chart.require_split()?.clone();
    for (&(i, j), c) in w.terms() {
        if !split.base.contains(&i) || !split.base.contains(&j) || !base_only(chart, c) {
            return Err(PoissonError::Invalid(
                "W must be a bivector in the base directions with coefficients in q only".into(),
            ));
        }
    }
    let w = w.simplify();
    PoissonBivector::new(w.clone(), cfg)?;
    let n = split.base.len();
    let (q, u) = (&split.base, &split.fiber);
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let wij = w.get(q[i], q[j]);
            if wij.is_zero() {
                continue;
            }
            terms.push((u[i], q[j], wij.clone()));
            if i < j {
                let d = Expr::sum((0..n).map(|k| Expr::var(u[k]) * wij.diff(q[k])));
                terms.push((u[i], u[j], d));
            }
        }
    }
    let p = Bivector::from_terms(chart, terms).simplify();

    let alphas: Vec<PForm> = (0..n)
        .map(|a| PForm::dx(chart, q[a]))
        .chain((0..n).map(|a| PForm::dx(chart, q[(a + 1) % n]).scale(&Expr::var(q[a]))))
        .collect();
    let fs: Vec<Expr> = (0..n)
        .map(|a| Expr::var(q[a]))
        .chain((0..n).map(|a| Expr::var(q[a]) * Expr::var(q[(a + 1) % n])))
        .collect();
    let mut report = check_lift_brackets(&p, &w, &alphas, &fs, cfg);
    report.extend(check_jacobi(&p, cfg));
    let jacobi = report.get("Jacobi").is_some_and(|c| c.pass);
    Ok(TangentLift {
        w,
        p: PoissonBivector {
            p,
            jacobi_verified: jacobi,
        },
        report,
    })
}

/// `[α, β]_W = L_{♯α}β - L_{♯β}α - d(W(α, β))`.
fn koszul(w: &Bivector, a: &PForm, b: &PForm) -> PForm {
    let chart = w.coords();
    b.lie_derivative(&w.sharp(a))
        .sub(&a.lie_derivative(&w.sharp(b)))
        .sub(&PForm::scalar(chart, w.pair(a, b)).d())
}

/// The defining relations of the lift on the given base functions and base
/// 1-forms: `{f, g} = 0`, `{α̂, f} = (♯_W α) f` and `{α̂, β̂} = [α, β]_W^`.
pub fn check_lift_brackets(
    p: &Bivector,
    w: &Bivector,
    alphas: &[PForm],
    fs: &[Expr],
    cfg: &SampleConfig,
) -> ComplianceReport {
    let chart = p.coords();
    let mut ff = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        for g in &fs[i + 1..] {
            ff.push(p.bracket(f, g));
        }
    }
    let mut af = Vec::new();
    for a in alphas {
        let ah = hat(a);
        let sa = w.sharp(a);
        for f in fs {
            af.push(p.bracket(&ah, f) - sa.apply(f));
        }
    }
    let mut ab = Vec::new();
    for (i, a) in alphas.iter().enumerate() {
        for b in &alphas[i + 1..] {
            ab.push(p.bracket(&hat(a), &hat(b)) - hat(&koszul(w, a, b)));
        }
    }
    let mut r = ComplianceReport::new();
    r.push(check_zero("{f, g} = 0", chart, &ff, cfg));
    r.push(check_zero("{alpha^, f} = (#alpha) f", chart, &af, cfg));
    r.push(check_zero("{alpha^, beta^} = [alpha, beta]^", chart, &ab, cfg));
    r
}

/// A second order Hamiltonian field `X = ♯_P dh` of the lift would need
/// `Σ_i W^{ij} ∂h/∂u^i = u^j`, so `∂²h/∂u∂u = (Wᵀ)⁻¹`, which is never
/// symmetric for an invertible antisymmetric `W`. Passes when at every sample
/// `W` is singular or `W⁻¹` fails to be symmetric.
pub fn lift_obstruction(w: &Bivector, cfg: &SampleConfig) -> Result<CheckReport, PoissonError> {
    let chart = w.coords();
    let split = chart.require_split()?.clone();
    let rank_tol = cfg.rank_tol;
    let tol = cfg.tol;
    Ok(check_points(
        "no second-order Hamiltonian",
        chart,
        &cfg.points(chart.dim()),
        0.0,
        cfg.mode,
        |x| {
            let full = w.at(x);
            let n = split.base.len();
            let wb = nalgebra::DMatrix::from_fn(n, n, |i, j| full[(split.base[i], split.base[j])]);
            if linalg::rank(&wb, rank_tol) < n {
                return 0.0;
            }
            match wb.try_inverse() {
                None => 0.0,
                Some(m) if (&m - m.transpose()).amax() > tol => 0.0,
                Some(_) => 1.0,
            }
        },
    )
    .with_note("derived: the mixed block of the lift is antisymmetric"))
}

/// Conditions on `P` for `(TN, P, S)` with canonical `S`: zero-related,
/// symmetric mixed block, antisymmetric `uu` block, `rank P = 2 rank(P^{ij})`,
/// and whether the full axiom set holds.
pub fn tn_poisson_check(p: &Bivector, cfg: &SampleConfig) -> Result<ComplianceReport, PoissonError> {
    let chart = p.coords();
    let split = chart.require_split()?.clone();
    let (q, u) = (&split.base, &split.fiber);
    let n = q.len();
    let mut r = ComplianceReport::new();
    let mut qq = Vec::new();
    let mut mixed = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i < j {
                qq.push(p.get(q[i], q[j]));
                mixed.push(p.get(q[i], u[j]) - p.get(q[j], u[i]));
            }
        }
    }
    r.push(check_zero("zero-related", chart, &qq, cfg));
    r.push(check_zero("mixed block symmetric", chart, &mixed, cfg));
    r.push(CheckReport::structural("uu block antisymmetric", true).with_note("holds for every bivector"));
    let rank_tol = cfg.rank_tol;
    r.push(
        check_points(
            "rank P = 2 rank(P^ij)",
            chart,
            &cfg.points(chart.dim()),
            0.0,
            cfg.mode,
            |x| {
                let full = p.at(x);
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| full[(q[i], u[j])]);
                (linalg::rank(&full, rank_tol) as f64 - 2.0 * linalg::rank(&m, rank_tol) as f64).abs()
            },
        )
        .with_note("pointwise at the samples"),
    );
    let s = canonical_s(chart, cfg)?.s;
    let llp = llp_check(p, &s, cfg);
    let failing: Vec<String> = llp
        .to_compliance()
        .checks
        .into_iter()
        .filter(|c| !c.pass)
        .map(|c| c.name)
        .collect();
    let mut c = CheckReport::structural("l.L.P. with canonical S", llp.pass());
    if !failing.is_empty() {
        c = c.with_note(format!("failing: {}", failing.join(", ")));
    }
    r.push(c);
    Ok(r)
}
