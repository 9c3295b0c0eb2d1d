use super::{require, StructError};
use crate::linalg;
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{EndField, Splitting, VectorField};

/// An endomorphism field together with the outcome of the tangent-structure checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentStructure {
    pub s: EndField,
    pub chart: CoordSystem,
    pub square_zero: bool,
    pub rank_half: bool,
    pub integrable: bool,
}

impl TangentStructure {
    /// Run [`check_tangent`] and record the flags.
    pub fn verify(s: EndField, cfg: &SampleConfig) -> (Self, ComplianceReport) {
        let r = check_tangent(&s, cfg);
        let flag = |n: &str| r.get(n).is_some_and(|c| c.pass);
        let t = TangentStructure {
            chart: s.coords().clone(),
            square_zero: flag("S^2 = 0"),
            rank_half: flag("rank S = n"),
            integrable: flag("N_S = 0"),
            s,
        };
        (t, r)
    }

    pub fn is_verified(&self) -> bool {
        self.square_zero && self.rank_half && self.integrable
    }
}

/// `S ∂q^i = ∂u^i`, `S ∂u^i = 0`.
pub fn canonical_s(chart: &CoordSystem, cfg: &SampleConfig) -> Result<TangentStructure, StructError> {
    let split = chart.require_split()?;
    let n = chart.dim();
    let mut m = linalg::zeros(n, n);
    for (&q, &u) in split.base.iter().zip(&split.fiber) {
        m[u][q] = Expr::one();
    }
    let (t, _) = TangentStructure::verify(EndField::from_matrix(chart, m), cfg);
    Ok(t)
}

/// `S² = 0`, `rank S = dim/2` and `N_S = 0` at the sample points.
pub fn check_tangent(s: &EndField, cfg: &SampleConfig) -> ComplianceReport {
    let coords = s.coords();
    let dim = coords.dim();
    let mut r = ComplianceReport::new();
    let sq = s.square();
    let entries: Vec<Expr> = sq.matrix().iter().flatten().cloned().collect();
    r.push(check_zero("S^2 = 0", coords, &entries, cfg));

    if dim % 2 == 1 {
        r.push(CheckReport::structural("rank S = n", false).with_note("odd dimension"));
    } else {
        let half = dim / 2;
        let rank_tol = cfg.rank_tol;
        r.push(
            check_points("rank S = n", coords, &cfg.points(dim), 0.0, cfg.mode, |x| {
                (linalg::rank(&s.at(x), rank_tol) as f64 - half as f64).abs()
            })
            .with_note("rank deviation from dim/2"),
        );
    }

    let nij: Vec<Expr> = s
        .nijenhuis_coordinate()
        .into_iter()
        .flat_map(|(_, v)| v.comps().to_vec())
        .collect();
    r.push(check_zero("N_S = 0", coords, &nij, cfg));
    r
}

/// `E = Σ u^i ∂u^i`.
pub fn euler_field(chart: &CoordSystem) -> Result<VectorField, StructError> {
    let split = chart.require_split()?;
    let mut c = vec![Expr::zero(); chart.dim()];
    for &u in &split.fiber {
        c[u] = Expr::var(u);
    }
    Ok(VectorField::new(chart, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderMode {
    /// `SX = E`.
    TangentBundle,
    /// `SX - E` is a projectable vertical field (fiber components free of `u`).
    General,
}

pub fn is_second_order(
    x: &VectorField,
    s: &EndField,
    mode: SecondOrderMode,
    cfg: &SampleConfig,
) -> Result<CheckReport, StructError> {
    let chart = x.coords();
    let split = chart.require_split()?;
    let diff = s.apply(x).sub(&euler_field(chart)?);
    Ok(match mode {
        SecondOrderMode::TangentBundle => check_zero("SX = E", chart, diff.comps(), cfg),
        SecondOrderMode::General => {
            let mut exprs: Vec<Expr> = split.base.iter().map(|&q| diff.comps()[q].clone()).collect();
            for &i in &split.fiber {
                for &j in &split.fiber {
                    exprs.push(diff.comps()[i].diff(j));
                }
            }
            check_zero("SX - E projectable", chart, &exprs, cfg)
        }
    })
}

/// `F = L_X S` and its `(-1)`-eigenspace `V′`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostProduct {
    pub f: EndField,
    pub v_prime: Splitting,
    pub report: ComplianceReport,
}

/// For a second order field `X`: `F = L_X S`, `V′_i = ½(Id - F)∂q^i`, with checks
/// `F² = Id`, `F V′ = -V′` and agreement with the closed form
/// `∂q^i - ½(∂α^j/∂q^i - ∂β^j/∂u^i) ∂u^j` where `X = (u + α)∂q + β∂u`.
pub fn almost_product(x: &VectorField, s: &EndField, cfg: &SampleConfig) -> Result<AlmostProduct, StructError> {
    let chart = x.coords();
    let split = chart.require_split()?.clone();
    require(is_second_order(x, s, SecondOrderMode::General, cfg)?)?;
    let f = s.lie_derivative(x).simplify();
    let id = EndField::identity(chart);
    let half = Expr::frac(1, 2);
    let proj = id.sub(&f).scale(&half).simplify();
    let v_prime: Vec<VectorField> = split
        .base
        .iter()
        .map(|&q| proj.apply(&VectorField::coordinate(chart, q)).simplify())
        .collect();

    let mut report = ComplianceReport::new();
    let f2 = f.square().sub(&id);
    report.push(check_zero("F^2 = Id", chart, &f2.matrix().concat(), cfg));
    let eig: Vec<Expr> = v_prime
        .iter()
        .flat_map(|v| f.apply(v).add(v).comps().to_vec())
        .collect();
    report.push(check_zero("F V' = -V'", chart, &eig, cfg));

    let mut closed = Vec::new();
    for (i, &qi) in split.base.iter().enumerate() {
        for (j, &uj) in split.fiber.iter().enumerate() {
            let alpha_j = x.comps()[split.base[j]].clone() - Expr::var(uj);
            let beta_j = &x.comps()[uj];
            let expect = -(half.clone() * (alpha_j.diff(qi) - beta_j.diff(split.fiber[i])));
            closed.push(&v_prime[i].comps()[uj] - &expect);
        }
        for (k, &qk) in split.base.iter().enumerate() {
            let delta = if k == i { Expr::one() } else { Expr::zero() };
            closed.push(&v_prime[i].comps()[qk] - &delta);
        }
    }
    report.push(check_zero("V' closed form", chart, &closed, cfg));
    let v_prime = Splitting::with_vertical_default(v_prime)?;
    Ok(AlmostProduct { f, v_prime, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn field(c: &CoordSystem, s: &[&str]) -> VectorField {
        VectorField::new(c, s.iter().map(|t| parse(t, c).unwrap()).collect())
    }

    #[test]
    fn canonical_matrix_n1() {
        let c = CoordSystem::tangent(1);
        let cfg = SampleConfig::default();
        let t = canonical_s(&c, &cfg).unwrap();
        assert!(t.is_verified());
        assert_eq!(t.s.matrix()[1][0], Expr::one());
        assert!(t.s.matrix()[0][0].is_zero() && t.s.matrix()[0][1].is_zero() && t.s.matrix()[1][1].is_zero());
        let x = field(&c, &["u1", "q1"]);
        assert_eq!(t.s.apply(&x).simplify(), field(&c, &["0", "u1"]));
    }

    #[test]
    fn rank_deficient_s_fails_with_witness() {
        let c = CoordSystem::tangent(2);
        let cfg = SampleConfig::default();
        // S ∂q1 = ∂u1, S ∂q2 = u1 ∂u1
        let m = vec![
            vec![Expr::zero(); 4],
            vec![Expr::zero(); 4],
            vec![Expr::one(), Expr::var(2), Expr::zero(), Expr::zero()],
            vec![Expr::zero(); 4],
        ];
        let r = check_tangent(&EndField::from_matrix(&c, m), &cfg);
        assert!(r.get("S^2 = 0").unwrap().pass);
        let rank = r.get("rank S = n").unwrap();
        assert!(!rank.pass);
        assert!(rank.witness.is_some());
    }

    #[test]
    fn second_order_modes() {
        let c = CoordSystem::tangent(1);
        let cfg = SampleConfig::default();
        let s = canonical_s(&c, &cfg).unwrap().s;
        let tb = SecondOrderMode::TangentBundle;
        let gen = SecondOrderMode::General;
        let x = field(&c, &["u1", "q1*u1^2"]);
        assert!(is_second_order(&x, &s, tb, &cfg).unwrap().pass);
        let x = field(&c, &["u1 + q1", "u1"]);
        assert!(!is_second_order(&x, &s, tb, &cfg).unwrap().pass);
        assert!(is_second_order(&x, &s, gen, &cfg).unwrap().pass);
        let x = field(&c, &["u1^2", "0"]);
        assert!(!is_second_order(&x, &s, tb, &cfg).unwrap().pass);
        assert!(!is_second_order(&x, &s, gen, &cfg).unwrap().pass);
    }

    #[test]
    fn almost_product_examples() {
        let c = CoordSystem::tangent(1);
        let cfg = SampleConfig::default();
        let s = canonical_s(&c, &cfg).unwrap().s;
        for x in [["u1", "0"], ["u1", "-q1"]] {
            let ap = almost_product(&field(&c, &x), &s, &cfg).unwrap();
            assert!(ap.report.pass(), "{:?}", ap.report);
            assert_eq!(ap.v_prime.v_prime[0], VectorField::coordinate(&c, 0));
        }
        let ap = almost_product(&field(&c, &["u1 + q1^2", "q1*u1^2 - u1"]), &s, &cfg).unwrap();
        assert!(ap.report.pass(), "{:?}", ap.report);
        // ∂q - ½(2q - (2qu - 1)) ∂u
        let expect = field(&c, &["1", "-q1 + q1*u1 - 1/2"]).simplify();
        assert_eq!(ap.v_prime.v_prime[0], expect);
    }
}
