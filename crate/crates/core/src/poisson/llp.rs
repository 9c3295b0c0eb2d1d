use nalgebra::DMatrix;
use serde::Serialize;

use super::{check_jacobi, PoissonError};
use crate::exec;
use crate::linalg::{self, mat_mul, transpose, ExprMatrix};
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, max_with_index, sample_points, SampleConfig};
use crate::symexpr::Expr;
use crate::tensor::{Bivector, EndField};

/// Ranks observed at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleRank {
    pub rank_p: usize,
    /// Rank of `S` restricted to `im ♯_P`.
    pub rank_s: usize,
}

/// Outcome of the locally Lagrangian Poisson axioms for a pair `(P, S)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LLPReport {
    pub jacobi: CheckReport,
    /// `P(α, β∘S) = P(β, α∘S)`.
    pub symmetry: CheckReport,
    /// `P(α∘S, β∘S) = 0`.
    pub isotropy: CheckReport,
    /// `rank S|im ♯_P = ½ rank P`, pointwise at the samples.
    pub rank: CheckReport,
    /// `N_S(X, Y) = 0` for `X, Y` in `im ♯_P`.
    pub nijenhuis: CheckReport,
    /// `S ♯_P α + ♯_P(α∘S) = 0`, equivalent to the symmetry axiom.
    pub anticommute: CheckReport,
    pub ranks: Vec<SampleRank>,
}

impl LLPReport {
    pub fn pass(&self) -> bool {
        self.almost() && self.nijenhuis.pass
    }

    /// Every axiom except the Nijenhuis condition.
    pub fn almost(&self) -> bool {
        self.jacobi.pass && self.symmetry.pass && self.isotropy.pass && self.rank.pass
    }

    pub fn to_compliance(&self) -> ComplianceReport {
        ComplianceReport {
            checks: vec![
                self.jacobi.clone(),
                self.symmetry.clone(),
                self.isotropy.clone(),
                self.rank.clone(),
                self.nijenhuis.clone(),
                self.anticommute.clone(),
            ],
        }
    }
}

fn entries(m: &ExprMatrix) -> Vec<Expr> {
    m.iter().flatten().cloned().collect()
}

/// Evaluate the axioms on the coordinate coframe. In matrix form, with
/// `♯_P = Pᵀ` and `α∘S = Sᵀα`: `P Sᵀ` symmetric, `S P Sᵀ = 0`,
/// `S Pᵀ + Pᵀ Sᵀ = 0`.
pub fn llp_check(p: &Bivector, s: &EndField, cfg: &SampleConfig) -> LLPReport {
    assert_eq!(p.coords(), s.coords(), "P and S must live on the same chart");
    let coords = p.coords();
    let dim = coords.dim();
    let pm = p.matrix();
    let sm = s.matrix().clone();
    let st = transpose(&sm);
    let pt = transpose(&pm);

    let jacobi = check_jacobi(p, cfg).checks.remove(0);

    let pst = mat_mul(&pm, &st);
    let mut asym = Vec::new();
    for a in 0..dim {
        for b in a + 1..dim {
            asym.push(&pst[a][b] - &pst[b][a]);
        }
    }
    let symmetry = check_zero("S-symmetry", coords, &asym, cfg);
    let isotropy = check_zero("S-isotropy", coords, &entries(&mat_mul(&sm, &pst)), cfg);
    let anti: Vec<Expr> = mat_mul(&sm, &pt)
        .iter()
        .flatten()
        .zip(mat_mul(&pt, &st).iter().flatten())
        .map(|(a, b)| a + b)
        .collect();
    let anticommute = check_zero("sharp anticommutes with S", coords, &anti, cfg);

    let points = cfg.points(dim);
    let rank_tol = cfg.rank_tol;
    let ranks: Vec<SampleRank> = exec::map(cfg.mode, &points, |x| {
        let pn = p.at(x);
        let u = linalg::column_space(&pn, rank_tol);
        let rank_p = u.ncols();
        let rank_s = if rank_p == 0 {
            0
        } else {
            linalg::rank(&(s.at(x) * &u), rank_tol)
        };
        SampleRank { rank_p, rank_s }
    });
    let dev: Vec<f64> = ranks
        .iter()
        .map(|r| (2.0 * r.rank_s as f64 - r.rank_p as f64).abs() / 2.0)
        .collect();
    let (worst, at) = max_with_index(&dev);
    let ok = worst == 0.0;
    let rank = CheckReport::new("leaf rank", ok, Some(worst), 0.0)
        .with_witness_point(if ok {
            None
        } else {
            at.map(|i| (coords.clone(), points[i].clone()))
        })
        .with_note("certified pointwise at the samples only");

    let nij: Vec<((usize, usize), Vec<Expr>)> = s
        .nijenhuis_coordinate()
        .into_iter()
        .map(|(ij, v)| (ij, v.comps().iter().map(Expr::simplify).collect::<Vec<_>>()))
        .filter(|(_, v)| v.iter().any(|e| !e.is_zero()))
        .collect();
    let nijenhuis = if nij.is_empty() {
        CheckReport::new("leafwise Nijenhuis", true, Some(0.0), cfg.tol)
    } else {
        check_points("leafwise Nijenhuis", coords, &points, cfg.tol, cfg.mode, |x| {
            let pn = p.at(x);
            let nn: Vec<((usize, usize), Vec<f64>)> = nij
                .iter()
                .map(|(ij, v)| (*ij, v.iter().map(|e| e.eval(x)).collect()))
                .collect();
            // N_S(♯dx^a, ♯dx^b), with (♯dx^a)^i = P^{ai}
            let mut worst = 0.0f64;
            for a in 0..dim {
                for b in a + 1..dim {
                    for k in 0..dim {
                        let v: f64 = nn
                            .iter()
                            .map(|((i, j), c)| (pn[(a, *i)] * pn[(b, *j)] - pn[(a, *j)] * pn[(b, *i)]) * c[k])
                            .sum();
                        worst = worst.max(if v.is_nan() { f64::INFINITY } else { v.abs() });
                    }
                }
            }
            worst
        })
    };

    LLPReport {
        jacobi,
        symmetry,
        isotropy,
        rank,
        nijenhuis,
        anticommute,
        ranks,
    }
}

/// The symplectic leaf through a point, in an orthonormal basis of `im ♯_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    /// Columns span `im ♯_P`.
    pub basis: DMatrix<f64>,
    /// `Ω_ab = ω(v_a, v_b) = -P(α_a, α_b)` where `♯_P α_a = v_a`.
    pub omega: DMatrix<f64>,
    /// `S` on the basis: `S v_a ≈ Σ_b F_ba v_b`.
    pub f: DMatrix<f64>,
    /// `max |S U - U F|`; zero when the leaf is `S`-invariant.
    pub invariance: f64,
}

impl Leaf {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter()
        .fold(0.0, |a, v| if v.is_nan() { f64::INFINITY } else { a.max(v.abs()) })
}

pub fn leaf_at(p: &Bivector, s: &EndField, x: &[f64], rank_tol: f64) -> Leaf {
    let pn = p.at(x);
    let u = linalg::column_space(&pn, rank_tol);
    let r = u.ncols();
    if r == 0 {
        return Leaf {
            basis: u,
            omega: DMatrix::zeros(0, 0),
            f: DMatrix::zeros(0, 0),
            invariance: 0.0,
        };
    }
    let sigma = linalg::singular_values(&pn)[0];
    let pinv = pn
        .transpose()
        .pseudo_inverse(rank_tol * sigma)
        .expect("nonnegative epsilon");
    let alpha = &pinv * &u;
    let omega = -(alpha.transpose() * &pn * &alpha);
    let sn = s.at(x);
    let su = &sn * &u;
    let f = u.transpose() * &su;
    let invariance = max_abs(&(su - &u * &f));
    Leaf {
        basis: u,
        omega,
        f,
        invariance,
    }
}

/// Restrict `(P, S)` to the leaf through `x` and check that `F = S|leaf` is
/// a tangent structure compatible with the leaf form: `F² = 0`,
/// `rank F = ½ dim leaf` and `ΩF` symmetric.
pub fn leaf_restriction(
    p: &Bivector,
    s: &EndField,
    x: &[f64],
    cfg: &SampleConfig,
) -> Result<ComplianceReport, PoissonError> {
    let coords = p.coords();
    let dim = coords.dim();
    let rank_tol = cfg.rank_tol;
    let base = linalg::rank(&p.at(x), rank_tol);
    let mut ranks = vec![base];
    for d in sample_points(cfg.seed, 8, dim, -1e-4, 1e-4) {
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        ranks.push(linalg::rank(&p.at(&y), rank_tol));
    }
    if ranks.iter().any(|&r| r != base) {
        return Err(PoissonError::RankNotConstant {
            witness: x.to_vec(),
            ranks,
        });
    }

    let leaf = leaf_at(p, s, x, rank_tol);
    let r = leaf.dim();
    let mut out = ComplianceReport::new();
    let witness = |pass: bool| if pass { None } else { Some((coords.clone(), x.to_vec())) };
    let mut push = |name: &str, residual: f64, tol: f64| {
        let pass = residual.is_finite() && residual <= tol;
        let mut c = CheckReport::new(name, pass, Some(residual), tol).with_witness_point(witness(pass));
        if r == 0 {
            c = c.with_note("empty leaf");
        }
        out.push(c);
    };
    if r == 0 {
        for name in [
            "leaf S-invariant",
            "F^2 = 0",
            "rank F = half leaf",
            "leaf form nondegenerate",
            "leaf compat",
        ] {
            push(name, 0.0, cfg.tol);
        }
        return Ok(out);
    }
    let scale = max_abs(&leaf.omega).max(1.0) * max_abs(&leaf.f).max(1.0);
    push("leaf S-invariant", leaf.invariance, cfg.tol);
    push("F^2 = 0", max_abs(&(&leaf.f * &leaf.f)), cfg.tol);
    let rank_f = linalg::rank(&leaf.f, rank_tol) as f64;
    push("rank F = half leaf", (2.0 * rank_f - r as f64).abs() / 2.0, 0.0);
    push(
        "leaf form nondegenerate",
        (r - linalg::rank(&leaf.omega, rank_tol)) as f64,
        0.0,
    );
    let of = &leaf.omega * &leaf.f;
    push("leaf compat", max_abs(&(&of - of.transpose())) / scale, cfg.tol);
    Ok(out)
}
