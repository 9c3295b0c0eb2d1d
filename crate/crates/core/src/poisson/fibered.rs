use nalgebra::DMatrix;

use super::{leaf_restriction, llp_check, PoissonBivector, PoissonError};
use crate::linalg::{self, ExprMatrix};
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_zero, max_with_index, SampleConfig};
use crate::structures::{canonical_s, global_witness_check, lagrangian_form, LagrangianChart};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{Bivector, EndField, PForm, VectorField};

/// Largest condition number accepted when inverting `P_sym` at a point.
pub const LAMBDA_CONDITION_LIMIT: f64 = 1e10;

/// The fibered product of two copies of `TN` over an `n`-dimensional `N`, on
/// the chart `(x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberedProduct {
    pub n: usize,
    pub chart: CoordSystem,
    pub p_sym: ExprMatrix,
    pub t: ExprMatrix,
    /// `Π = P^{ij} ∂y^i∧∂z^j`.
    pub pi: PoissonBivector,
    /// `S ∂y^i = ∂z^i`, zero on `∂z` and on the transversal frame.
    pub s: EndField,
    /// `X_i = ∂x^i + t^j_i ∂z^j`.
    pub transversal: Vec<VectorField>,
    /// `Λ = P_sym⁻¹`, present when `P_sym` is constant.
    pub lambda: Option<ExprMatrix>,
    /// `½ Λ_ij z^i z^j` on the whole chart, present with `lambda`.
    pub lagrangian: Option<Expr>,
    pub report: ComplianceReport,
    /// Regularity of `Λ_ij z^i y^j` as a leaf Lagrangian; expected to fail
    /// since its `z`-Hessian vanishes.
    pub zy_lagrangian: CheckReport,
}

impl FiberedProduct {
    pub fn x(&self, i: usize) -> usize {
        i
    }

    pub fn y(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn z(&self, i: usize) -> usize {
        2 * self.n + i
    }

    /// `(y, z)` with `y` as base and `z` as fiber.
    pub fn leaf_chart(&self) -> CoordSystem {
        let y: Vec<String> = (1..=self.n).map(|i| format!("y{i}")).collect();
        let z: Vec<String> = (1..=self.n).map(|i| format!("z{i}")).collect();
        CoordSystem::split(&y, &z).expect("distinct names")
    }

    /// `Λ(x) = P_sym(x)⁻¹` with a condition-number guard.
    pub fn lambda_at(&self, x: &[f64]) -> Result<DMatrix<f64>, PoissonError> {
        let p = linalg::eval_matrix(&self.p_sym, x);
        let cond = linalg::condition_number(&p);
        if !cond.is_finite() || cond > LAMBDA_CONDITION_LIMIT {
            return Err(PoissonError::Degenerate {
                what: "P_sym".into(),
                witness: Some(x.to_vec()),
            });
        }
        p.try_inverse().ok_or_else(|| PoissonError::Degenerate {
            what: "P_sym".into(),
            witness: Some(x.to_vec()),
        })
    }

    /// The leaf form `Λ_ij dz^i∧dy^j` as a matrix on the leaf chart.
    pub fn leaf_form_at(&self, x: &[f64]) -> Result<DMatrix<f64>, PoissonError> {
        let l = self.lambda_at(x)?;
        let n = self.n;
        let mut w = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                w[(n + i, j)] = l[(i, j)];
                w[(j, n + i)] = -l[(i, j)];
            }
        }
        Ok(w)
    }

    /// `½ Λ_ij(x) z^i z^j` on the leaf through `x`.
    pub fn leaf_lagrangian_at(&self, x: &[f64]) -> Result<Expr, PoissonError> {
        let n = self.n;
        if let Some(l) = &self.lagrangian {
            let images: Vec<Expr> = (0..3 * n)
                .map(|k| if k < n { Expr::real(x[k]) } else { Expr::var(k - n) })
                .collect();
            return Ok(l.compose(&images).simplify());
        }
        let lam = self.lambda_at(x)?;
        Ok(quadratic(
            n,
            |i, j| Expr::real(lam[(i, j)]),
            |i| Expr::var(n + i),
            |i| Expr::var(n + i),
        )
        .simplify())
    }

    /// Global Lagrangian witness on the leaf through `x`: the leaf form equals
    /// `dε` with `ε = d𝓛 ∘ S` for the leaf Lagrangian.
    pub fn leaf_witness(&self, x: &[f64], cfg: &SampleConfig) -> Result<ComplianceReport, PoissonError> {
        let leaf = self.leaf_chart();
        let w = self.leaf_form_at(x)?;
        let m: Vec<Vec<Expr>> = (0..2 * self.n)
            .map(|i| (0..2 * self.n).map(|j| Expr::real(w[(i, j)])).collect())
            .collect();
        let omega = PForm::two_form_from_matrix(&leaf, &m);
        let lc = LagrangianChart::new(&leaf, self.leaf_lagrangian_at(x)?)?;
        let s = canonical_s(&leaf, cfg)?.s;
        Ok(global_witness_check(&lc.theta_form(), &lc.l, &omega, &s, cfg))
    }

    /// `Π` restricted to the `(y, z)` indices at `x`.
    pub fn leaf_bivector_at(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let p = self.pi.p.at(x);
        DMatrix::from_fn(2 * n, 2 * n, |a, b| p[(n + a, n + b)])
    }
}

/// `½ Σ c_ij a_i b_j`.
fn quadratic(n: usize, c: impl Fn(usize, usize) -> Expr, a: impl Fn(usize) -> Expr, b: impl Fn(usize) -> Expr) -> Expr {
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            t.push(Expr::frac(1, 2) * c(i, j) * a(i) * b(j));
        }
    }
    Expr::sum(t)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter()
        .fold(0.0, |a, v| if v.is_nan() { f64::INFINITY } else { a.max(v.abs()) })
}

/// Build `(chart, Π, S, 𝓛)` from a symmetric nondegenerate `P_sym(x)` and the
/// transversal coefficients `t` (row `i` holds the `z`-components of `X_i`),
/// then run the full check pipeline. Expressions refer to `x^i` by index `i`.
pub fn fibered_product(
    p_sym: &[Vec<Expr>],
    t: &[Vec<Expr>],
    cfg: &SampleConfig,
) -> Result<FiberedProduct, PoissonError> {
    let n = p_sym.len();
    if n == 0 || p_sym.iter().any(|r| r.len() != n) || t.len() != n || t.iter().any(|r| r.len() != n) {
        return Err(PoissonError::Invalid(
            "P_sym and t must be square of the same size".into(),
        ));
    }
    if p_sym
        .iter()
        .chain(t)
        .flatten()
        .any(|e| e.free_vars().iter().any(|&v| v >= n))
    {
        return Err(PoissonError::Invalid("P_sym and t may depend on x only".into()));
    }
    let names: Vec<String> = ["x", "y", "z"]
        .iter()
        .flat_map(|p| (1..=n).map(move |i| format!("{p}{i}")))
        .collect();
    let chart = CoordSystem::new(&names)?;
    let dim = 3 * n;

    let mut asym = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            asym.push(&p_sym[i][j] - &p_sym[j][i]);
        }
    }
    if !check_zero("P_sym symmetric", &chart, &asym, cfg).pass {
        return Err(PoissonError::Invalid("P_sym is not symmetric".into()));
    }

    let mut fp = FiberedProduct {
        n,
        chart: chart.clone(),
        p_sym: p_sym.to_vec(),
        t: t.to_vec(),
        pi: PoissonBivector::unchecked(Bivector::zero(&chart)),
        s: EndField::zero(&chart),
        transversal: Vec::new(),
        lambda: None,
        lagrangian: None,
        report: ComplianceReport::new(),
        zy_lagrangian: CheckReport::structural("Lambda z y regular", false),
    };
    let points = cfg.points(dim);
    for x in &points {
        fp.lambda_at(x)?;
    }

    let mut s = linalg::zeros(dim, dim);
    for i in 0..n {
        s[fp.z(i)][fp.y(i)] = Expr::one();
    }
    fp.s = EndField::from_matrix(&chart, s);
    fp.transversal = (0..n)
        .map(|i| {
            let mut c = vec![Expr::zero(); dim];
            c[fp.x(i)] = Expr::one();
            for j in 0..n {
                c[fp.z(j)] = t[i][j].clone();
            }
            VectorField::new(&chart, c)
        })
        .collect();
    let terms: Vec<(usize, usize, Expr)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (fp.y(i), fp.z(j), p_sym[i][j].clone()))
        .collect();
    fp.pi = PoissonBivector::new(Bivector::from_terms(&chart, terms), cfg)?;

    if p_sym.iter().flatten().all(Expr::is_constant) {
        let lam = linalg::inverse(p_sym).ok_or_else(|| PoissonError::Degenerate {
            what: "P_sym".into(),
            witness: None,
        })?;
        let z = |i: usize| Expr::var(2 * n + i);
        fp.lagrangian = Some(quadratic(n, |i, j| lam[i][j].clone(), z, z).simplify());
        fp.lambda = Some(lam);
    }

    let mut r = ComplianceReport::new();
    let sx: Vec<Expr> = fp
        .transversal
        .iter()
        .flat_map(|x| fp.s.apply(x).comps().to_vec())
        .collect();
    r.push(check_zero("S(X_i) = 0", &chart, &sx, cfg));
    r.push(check_zero("S^2 = 0", &chart, &fp.s.square().matrix().concat(), cfg));
    let nij: Vec<Expr> =
        fp.s.nijenhuis_coordinate()
            .into_iter()
            .flat_map(|(_, v)| v.comps().to_vec())
            .collect();
    r.push(check_zero("N_S = 0", &chart, &nij, cfg));
    r.extend(llp_check(&fp.pi.p, &fp.s, cfg).to_compliance());

    let leaf_points: Vec<Vec<f64>> = points.iter().take(10).cloned().collect();
    let mut leaves = Vec::new();
    for x in &leaf_points {
        leaves.push(leaf_restriction(&fp.pi.p, &fp.s, x, cfg)?);
    }
    r.extend(ComplianceReport::merge_worst(leaves));

    let leaf_chart = fp.leaf_chart();
    let mut form_res = Vec::new();
    let mut lag_res = Vec::new();
    for x in &leaf_points {
        let w = fp.leaf_form_at(x)?;
        let pl = fp.leaf_bivector_at(x);
        form_res.push(max_abs(&(&pl * &w - DMatrix::identity(2 * n, 2 * n))));
        let lc = LagrangianChart::new(&leaf_chart, fp.leaf_lagrangian_at(x)?)?;
        let wl = lagrangian_form(&lc, cfg)?.matrix();
        let leaf_x = &x[n..];
        lag_res.push(max_abs(&(linalg::eval_matrix(&wl, leaf_x) - w)));
    }
    let summarize = |name: &str, v: &[f64]| {
        let (worst, at) = max_with_index(v);
        let pass = worst <= cfg.tol;
        CheckReport::new(name, pass, Some(worst), cfg.tol).with_witness_point(if pass {
            None
        } else {
            at.map(|i| (chart.clone(), leaf_points[i].clone()))
        })
    };
    r.push(summarize("leaf form = Lambda dz^dy", &form_res));
    r.push(summarize("leaf Lagrangian", &lag_res));
    fp.report = r;

    let x0 = &leaf_points[0];
    let lam = fp.lambda_at(x0)?;
    let zy = quadratic(n, |i, j| Expr::real(2.0 * lam[(i, j)]), |i| Expr::var(n + i), Expr::var);
    fp.zy_lagrangian = LagrangianChart::new(&leaf_chart, zy)?
        .check_nondegenerate(cfg)
        .renamed("Lambda z y regular")
        .with_note("z-Hessian of Lambda_ij z^i y^j vanishes");
    Ok(fp)
}
