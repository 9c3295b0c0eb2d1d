use nalgebra::DMatrix;

use super::{Calibrated, FormMatrix, MaslovError};
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::scalar::{Dual, Scalar};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{PForm, VectorField};

/// A parametrized Lagrangian immersion `t ↦ ι(t)` into a calibrated chart.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedLagrangian {
    pub params: CoordSystem,
    pub ambient: CoordSystem,
    pub immersion: Vec<Expr>,
    /// `tangents[k][i] = ∂ι^i/∂t_k`.
    pub tangents: Vec<Vec<Expr>>,
}

impl FramedLagrangian {
    pub fn new(params: &CoordSystem, ambient: &CoordSystem, immersion: Vec<Expr>) -> Result<Self, MaslovError> {
        let n = params.dim();
        if ambient.dim() != 2 * n {
            return Err(MaslovError::Invalid(format!(
                "a {n}-parameter Lagrangian needs a {}-dimensional chart, got {}",
                2 * n,
                ambient.dim()
            )));
        }
        if immersion.len() != ambient.dim() {
            return Err(MaslovError::Invalid("one image per ambient coordinate".into()));
        }
        if immersion.iter().flat_map(Expr::free_vars).any(|v| v >= n) {
            return Err(MaslovError::Invalid(
                "immersion uses a variable outside the parameter chart".into(),
            ));
        }
        let immersion: Vec<Expr> = immersion.iter().map(Expr::simplify).collect();
        let tangents = (0..n)
            .map(|k| immersion.iter().map(|e| e.diff(k).simplify()).collect())
            .collect();
        Ok(FramedLagrangian {
            params: params.clone(),
            ambient: ambient.clone(),
            immersion,
            tangents,
        })
    }

    pub fn n(&self) -> usize {
        self.params.dim()
    }

    /// Rank, Lagrangian condition and orthonormality of the frame at the
    /// parameter samples.
    pub fn check(&self, cal: &Calibrated, cfg: &SampleConfig) -> ComplianceReport {
        let n = self.n();
        let pts = cfg.points(n);
        let mut r = ComplianceReport::new();
        r.push(check_points(
            "immersion rank n",
            &self.params,
            &pts,
            0.0,
            cfg.mode,
            |t| {
                let m = DMatrix::from_fn(2 * n, n, |i, k| self.tangents[k][i].eval(t));
                if crate::linalg::rank(&m, cfg.rank_tol) == n {
                    0.0
                } else {
                    1.0
                }
            },
        ));
        let pulled = cal.omega.pullback(&self.params, &self.immersion);
        let comps: Vec<Expr> = pulled.terms().map(|(_, e)| e.clone()).collect();
        r.push(check_zero("immersion Lagrangian", &self.params, &comps, cfg));
        r.push(check_points(
            "frame orthonormal",
            &self.params,
            &pts,
            cfg.tol,
            cfg.mode,
            |t| match self.frame_at(cal, t) {
                Ok((e, _)) => {
                    let x = self.point(t);
                    let g = cal.g.at(&x);
                    (e.transpose() * g * &e - DMatrix::identity(n, n)).amax()
                }
                Err(_) => f64::INFINITY,
            },
        ));
        r
    }

    pub fn point(&self, t: &[f64]) -> Vec<f64> {
        self.immersion.iter().map(|e| e.eval(t)).collect()
    }

    /// Columns `e_i` and `J e_i` at `ι(t)`.
    pub fn frame_at(&self, cal: &Calibrated, t: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), MaslovError> {
        let x = self.point(t);
        let tau: Vec<Vec<f64>> = self
            .tangents
            .iter()
            .map(|c| c.iter().map(|e| e.eval(t)).collect())
            .collect();
        let g = eval_sq(&cal.g.m, &x);
        let e = gram_schmidt(&tau, &g).ok_or_else(|| self.degenerate(t))?;
        let dim = x.len();
        let em = DMatrix::from_fn(dim, e.len(), |i, k| e[k][i]);
        let jm = cal.j.at(&x) * &em;
        Ok((em, jm))
    }

    fn degenerate(&self, t: &[f64]) -> MaslovError {
        MaslovError::Degenerate {
            what: "immersion".into(),
            witness: Some(t.to_vec()),
        }
    }
}

/// Which metric connection `∇⁰` of `V` is used.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ConnectionMode {
    /// Coordinate derivative; needs `g` and `J` with constant coefficients.
    Flat,
    /// A declared `g`-orthonormal frame of `V` is parallel, and so is its
    /// image under `S′`.
    FrameParallel(Vec<VectorField>),
    /// Flat when `g` and `J` are constant, otherwise frame-parallel for the
    /// `g`-orthonormalization of `S` applied to the `V′` frame.
    #[default]
    Auto,
}

pub(super) enum Resolved {
    Flat,
    Declared { v: Vec<Vec<Expr>>, sv: Vec<Vec<Expr>> },
    Induced { sframe: Vec<Vec<Expr>> },
}

fn constant_coefficients(cal: &Calibrated) -> bool {
    cal.g
        .m
        .iter()
        .chain(cal.j.matrix())
        .flatten()
        .all(|e| e.simplify().is_constant())
}

impl ConnectionMode {
    pub(super) fn resolve(&self, cal: &Calibrated, cfg: &SampleConfig) -> Result<Resolved, MaslovError> {
        let n = cal.dim() / 2;
        match self {
            ConnectionMode::Flat => {
                if constant_coefficients(cal) {
                    Ok(Resolved::Flat)
                } else {
                    Err(MaslovError::ModeInapplicable("flat mode needs constant g and J".into()))
                }
            }
            ConnectionMode::Auto => {
                if constant_coefficients(cal) {
                    Ok(Resolved::Flat)
                } else {
                    let sframe = cal
                        .v_prime
                        .iter()
                        .map(|e| cal.s.apply(e).simplify().comps().to_vec())
                        .collect();
                    Ok(Resolved::Induced { sframe })
                }
            }
            ConnectionMode::FrameParallel(vs) => {
                if vs.len() != n || vs.iter().any(|v| *v.coords() != cal.chart) {
                    return Err(MaslovError::Invalid(format!(
                        "declared frame needs {n} fields on the calibrated chart"
                    )));
                }
                let vertical: Vec<Expr> = vs.iter().flat_map(|v| cal.s.apply(v).comps().to_vec()).collect();
                let c = check_zero("declared frame vertical", &cal.chart, &vertical, cfg);
                if !c.pass {
                    return Err(MaslovError::ModeInapplicable("declared frame is not in im S".into()));
                }
                let pts = cfg.points(cal.dim());
                let mut residual: f64 = 0.0;
                for x in &pts {
                    let g = cal.g.at(x);
                    let m = DMatrix::from_fn(cal.dim(), n, |i, a| vs[a].comps()[i].eval(x));
                    residual = residual.max((m.transpose() * g * &m - DMatrix::identity(n, n)).amax());
                }
                if !(residual <= cfg.tol.max(1e-10)) {
                    return Err(MaslovError::FrameNotOrthonormal { residual });
                }
                Ok(Resolved::Declared {
                    v: vs.iter().map(|v| v.comps().to_vec()).collect(),
                    sv: vs
                        .iter()
                        .map(|v| cal.s_prime.apply(v).simplify().comps().to_vec())
                        .collect(),
                })
            }
        }
    }
}

fn eval_sq<T: Scalar>(m: &[Vec<Expr>], x: &[T]) -> Vec<Vec<T>> {
    m.iter().map(|r| r.iter().map(|e| e.eval_with(x)).collect()).collect()
}

fn eval_vec<T: Scalar>(v: &[Expr], x: &[T]) -> Vec<T> {
    v.iter().map(|e| e.eval_with(x)).collect()
}

fn mat_vec<T: Scalar>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter()
        .map(|r| {
            r.iter()
                .zip(v)
                .fold(T::constant(0.0), |acc, (a, b)| acc + a.clone() * b.clone())
        })
        .collect()
}

fn inner<T: Scalar>(g: &[Vec<T>], a: &[T], b: &[T]) -> T {
    let gb = mat_vec(g, b);
    a.iter()
        .zip(gb)
        .fold(T::constant(0.0), |acc, (x, y)| acc + x.clone() * y)
}

/// Modified Gram–Schmidt in the metric `g`; `None` on linear dependence.
fn gram_schmidt<T: Scalar>(vs: &[Vec<T>], g: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let mut out: Vec<Vec<T>> = Vec::with_capacity(vs.len());
    for v in vs {
        let scale = inner(g, v, v).value().abs();
        let mut w = v.clone();
        for e in &out {
            let c = inner(g, e, &w);
            w = w
                .iter()
                .zip(e)
                .map(|(a, b)| a.clone() - c.clone() * b.clone())
                .collect();
        }
        let nn = inner(g, &w, &w);
        if !(nn.value() > 1e-20 * scale.max(f64::MIN_POSITIVE)) {
            return None;
        }
        let norm = nn.sqrt();
        out.push(w.into_iter().map(|a| a / norm.clone()).collect());
    }
    Some(out)
}

/// Solve `A x = b` by Gaussian elimination with pivoting on values.
fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))?;
        if a[piv][col].value().abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col].clone() / a[col][col].clone();
            for c in col..n {
                a[r][c] = a[r][c].clone() - f.clone() * a[col][c].clone();
            }
            b[r] = b[r].clone() - f * b[col].clone();
        }
    }
    let mut x = vec![T::constant(0.0); n];
    for r in (0..n).rev() {
        let mut s = b[r].clone();
        for c in r + 1..n {
            s = s - a[r][c].clone() * x[c].clone();
        }
        x[r] = s / a[r][r].clone();
    }
    Some(x)
}

fn grad(d: &Dual, k: usize) -> f64 {
    d.d.get(k).copied().unwrap_or(0.0)
}

/// Gauss–Weingarten coefficients at one parameter point, one slot per seed
/// direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GwPoint {
    /// `lambda[i][j][k] = λ_i^j(∂_k)`.
    pub lambda: Vec<Vec<Vec<f64>>>,
    /// `b[i][j][k] = b_i^j(∂_k)`.
    pub b: Vec<Vec<Vec<f64>>>,
    pub e: DMatrix<f64>,
    pub je: DMatrix<f64>,
}

impl GwPoint {
    /// `max |λ_i^j + λ_j^i|` and `max |b_i^j - b_j^i|`.
    pub fn symmetry_residuals(&self) -> (f64, f64) {
        let n = self.lambda.len();
        let (mut la, mut bs) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                for k in 0..self.lambda[i][j].len() {
                    la = la.max((self.lambda[i][j][k] + self.lambda[j][i][k]).abs());
                    bs = bs.max((self.b[i][j][k] - self.b[j][i][k]).abs());
                }
            }
        }
        (la, bs)
    }

    /// `Σ_i b_i^i` on seed direction `k`.
    pub fn trace_b(&self, k: usize) -> f64 {
        (0..self.b.len()).map(|i| self.b[i][i][k]).sum()
    }
}

/// `∇⁰e_i` expanded in `(e_j, Je_j)` at the parameter point carried by `t`,
/// whose gradients give the directions of differentiation.
pub(super) fn gw_along(
    l: &FramedLagrangian,
    cal: &Calibrated,
    res: &Resolved,
    t: &[Dual],
    seeds: usize,
) -> Result<GwPoint, MaslovError> {
    let n = l.n();
    let dim = 2 * n;
    let tv: Vec<f64> = t.iter().map(|d| d.v).collect();
    let x: Vec<Dual> = eval_vec(&l.immersion, t);
    let xv: Vec<f64> = x.iter().map(|d| d.v).collect();
    let tau: Vec<Vec<Dual>> = l.tangents.iter().map(|c| eval_vec(c, t)).collect();
    let g: Vec<Vec<Dual>> = eval_sq(&cal.g.m, &x);
    let e = gram_schmidt(&tau, &g).ok_or_else(|| l.degenerate(&tv))?;

    // nabla[i][k] = ∇_k e_i as a value vector
    let nabla: Vec<Vec<Vec<f64>>> = match res {
        Resolved::Flat => e
            .iter()
            .map(|ei| (0..seeds).map(|k| ei.iter().map(|c| grad(c, k)).collect()).collect())
            .collect(),
        _ => {
            let cols: Vec<Vec<Dual>> = match res {
                Resolved::Declared { v, sv } => v.iter().chain(sv).map(|c| eval_vec(c, &x)).collect(),
                Resolved::Induced { sframe } => {
                    let raw: Vec<Vec<Dual>> = sframe.iter().map(|c| eval_vec(c, &x)).collect();
                    let v = gram_schmidt(&raw, &g).ok_or_else(|| MaslovError::Degenerate {
                        what: "vertical frame".into(),
                        witness: Some(xv.clone()),
                    })?;
                    let sp: Vec<Vec<Dual>> = eval_sq(cal.s_prime.matrix(), &x);
                    let sv: Vec<Vec<Dual>> = v.iter().map(|c| mat_vec(&sp, c)).collect();
                    v.into_iter().chain(sv).collect()
                }
                Resolved::Flat => unreachable!(),
            };
            let p: Vec<Vec<Dual>> = (0..dim).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
            let mut out = Vec::with_capacity(n);
            for ei in &e {
                let c = solve(p.clone(), ei.clone()).ok_or_else(|| MaslovError::Degenerate {
                    what: "parallel frame".into(),
                    witness: Some(xv.clone()),
                })?;
                out.push(
                    (0..seeds)
                        .map(|k| {
                            (0..dim)
                                .map(|i| (0..dim).map(|a| p[i][a].v * grad(&c[a], k)).sum())
                                .collect()
                        })
                        .collect(),
                );
            }
            out
        }
    };

    let gv = DMatrix::from_fn(dim, dim, |i, j| g[i][j].v);
    let em = DMatrix::from_fn(dim, n, |i, a| e[a][i].v);
    let je = cal.j.at(&xv) * &em;
    let ge = &gv * &em;
    let gje = &gv * &je;
    let mut lambda = vec![vec![vec![0.0; seeds]; n]; n];
    let mut b = vec![vec![vec![0.0; seeds]; n]; n];
    for i in 0..n {
        for k in 0..seeds {
            let nv = nalgebra::DVector::from_vec(nabla[i][k].clone());
            for j in 0..n {
                lambda[i][j][k] = nv.dot(&ge.column(j));
                b[i][j][k] = nv.dot(&gje.column(j));
            }
        }
    }
    Ok(GwPoint { lambda, b, e: em, je })
}

pub(super) fn seeded(t: &[f64]) -> Vec<Dual> {
    t.iter().enumerate().map(|(k, &v)| Dual::seed(v, k, t.len())).collect()
}

/// `λ` and `b` at the parameter point `t` as matrices of constant-coefficient
/// 1-forms, `[i][j]` holding `λ_i^j` and `b_i^j`.
pub fn gauss_weingarten_at(
    l: &FramedLagrangian,
    cal: &Calibrated,
    mode: &ConnectionMode,
    t: &[f64],
    cfg: &SampleConfig,
) -> Result<(FormMatrix, FormMatrix), MaslovError> {
    if l.ambient != cal.chart {
        return Err(MaslovError::Invalid("immersion and calibration charts differ".into()));
    }
    let res = mode.resolve(cal, cfg)?;
    let gw = gw_along(l, cal, &res, &seeded(t), l.n())?;
    let to_forms = |c: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<PForm>> {
        c.iter()
            .map(|row| {
                row.iter()
                    .map(|v| PForm::one_form(&l.params, v.iter().map(|&a| Expr::real(a)).collect()).simplify())
                    .collect()
            })
            .collect()
    };
    Ok((
        FormMatrix::from_real(&l.params, to_forms(&gw.lambda)),
        FormMatrix::from_real(&l.params, to_forms(&gw.b)),
    ))
}

/// `λ + λᵀ = 0` and `b = bᵀ` at the parameter samples.
pub fn check_gauss_weingarten(
    l: &FramedLagrangian,
    cal: &Calibrated,
    mode: &ConnectionMode,
    cfg: &SampleConfig,
) -> Result<ComplianceReport, MaslovError> {
    let res = mode.resolve(cal, cfg)?;
    let pts = cfg.points(l.n());
    let vals: Vec<Result<(f64, f64), MaslovError>> = pts
        .iter()
        .map(|t| gw_along(l, cal, &res, &seeded(t), l.n()).map(|g| g.symmetry_residuals()))
        .collect();
    let vals: Vec<(f64, f64)> = vals.into_iter().collect::<Result<_, _>>()?;
    let mut r = ComplianceReport::new();
    for (name, pick) in [("lambda antisymmetric", 0usize), ("b symmetric", 1)] {
        let v: Vec<f64> = vals.iter().map(|p| if pick == 0 { p.0 } else { p.1 }).collect();
        let (max, at) = crate::sampling::max_with_index(&v);
        let pass = max <= cfg.tol;
        let w = if pass {
            None
        } else {
            at.map(|i| (l.params.clone(), pts[i].clone()))
        };
        r.push(CheckReport::new(name, pass, Some(max), cfg.tol).with_witness_point(w));
    }
    Ok(r)
}
