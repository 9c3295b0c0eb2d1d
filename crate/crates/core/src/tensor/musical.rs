use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{PForm, TensorError, VectorField};
use crate::linalg::{self, ExprMatrix};
use crate::sampling::SampleConfig;
use crate::symexpr::{CoordSystem, Expr};

/// Complementary frames spanning `V′` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    pub v_prime: Vec<VectorField>,
    pub v: Vec<VectorField>,
}

impl Splitting {
    pub fn new(v_prime: Vec<VectorField>, v: Vec<VectorField>) -> Result<Self, TensorError> {
        let coords = v_prime
            .first()
            .or(v.first())
            .map(|f| f.coords().clone())
            .ok_or_else(|| TensorError::Invalid("empty splitting".into()))?;
        if v_prime.len() + v.len() != coords.dim() {
            return Err(TensorError::Invalid(format!(
                "frames have {} + {} fields on a {}-dimensional chart",
                v_prime.len(),
                v.len(),
                coords.dim()
            )));
        }
        if v_prime.iter().chain(&v).any(|f| *f.coords() != coords) {
            return Err(TensorError::ChartMismatch("splitting frames".into()));
        }
        Ok(Splitting { v_prime, v })
    }

    /// `V′` spanned by `∂q^i`, `V` by `∂u^i`.
    pub fn coordinate(coords: &CoordSystem) -> Result<Self, TensorError> {
        let s = coords.require_split()?;
        Splitting::new(
            s.base.iter().map(|&i| VectorField::coordinate(coords, i)).collect(),
            s.fiber.iter().map(|&i| VectorField::coordinate(coords, i)).collect(),
        )
    }

    /// Given `V′`, take `V` to be the fiber-coordinate frame.
    pub fn with_vertical_default(v_prime: Vec<VectorField>) -> Result<Self, TensorError> {
        let coords = v_prime
            .first()
            .map(|f| f.coords().clone())
            .ok_or_else(|| TensorError::Invalid("empty splitting".into()))?;
        let s = coords.require_split()?;
        let v = s.fiber.iter().map(|&i| VectorField::coordinate(&coords, i)).collect();
        Splitting::new(v_prime, v)
    }

    pub fn coords(&self) -> &CoordSystem {
        self.v_prime.first().or(self.v.first()).unwrap().coords()
    }

    pub fn frame(&self) -> Vec<&VectorField> {
        self.v_prime.iter().chain(&self.v).collect()
    }

    /// Matrix whose columns are the frame fields (`V′` first).
    pub fn frame_matrix(&self) -> ExprMatrix {
        let frame = self.frame();
        let n = frame.len();
        (0..n)
            .map(|i| frame.iter().map(|f| f.comps()[i].clone()).collect())
            .collect()
    }

    /// Dual coframe as 1-forms, `θ^a(e_b) = δ^a_b`.
    pub fn coframe(&self) -> Result<Vec<PForm>, TensorError> {
        let inv = linalg::inverse(&self.frame_matrix()).ok_or(TensorError::RankDeficient { witness: None })?;
        Ok(inv.into_iter().map(|row| PForm::one_form(self.coords(), row)).collect())
    }

    /// Full rank of the combined frame at every sample point.
    pub fn check_rank(&self, cfg: &SampleConfig) -> Result<(), TensorError> {
        let m = self.frame_matrix();
        let n = m.len();
        for x in cfg.points(n) {
            if linalg::rank(&linalg::eval_matrix(&m, &x), cfg.rank_tol) < n {
                return Err(TensorError::RankDeficient { witness: Some(x) });
            }
        }
        Ok(())
    }
}

/// Symmetric matrix of expressions attached to an ordered frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    pub frame: Vec<VectorField>,
    pub m: ExprMatrix,
}

impl MetricBlock {
    pub fn new(frame: Vec<VectorField>, m: ExprMatrix) -> Result<Self, TensorError> {
        let k = frame.len();
        if m.len() != k || m.iter().any(|r| r.len() != k) {
            return Err(TensorError::Invalid(format!("metric block must be {k}x{k}")));
        }
        for i in 0..k {
            for j in i + 1..k {
                if (&m[i][j] - &m[j][i]).is_zero_exact() == Some(false) {
                    return Err(TensorError::Invalid(format!("metric block not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(MetricBlock { frame, m })
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        linalg::eval_matrix(&self.m, x)
    }

    pub fn len(&self) -> usize {
        self.frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame.is_empty()
    }

    /// Positive definite at every sample point (leading principal minors).
    pub fn is_elliptic(&self, cfg: &SampleConfig) -> bool {
        let dim = self.frame.first().map_or(0, |f| f.dim());
        cfg.points(dim).iter().all(|x| linalg::positive_definite(&self.at(x)))
    }
}

/// `♯_ω α`, the field with `i(♯_ω α) ω = α`. With `(i(X)ω)_j = Σ_i X^i W_ij`
/// this solves `-W X = α`.
pub fn sharp_omega(omega: &PForm, alpha: &PForm) -> Result<VectorField, TensorError> {
    let w = omega.matrix();
    let inv = linalg::inverse(&w).ok_or(TensorError::Degenerate {
        what: "symplectic form".into(),
        witness: None,
    })?;
    let a = alpha.components();
    let x = linalg::mat_vec(&inv, &a).into_iter().map(|e| (-e).simplify()).collect();
    Ok(VectorField::new(omega.coords(), x))
}

/// Numeric `♯_ω α` at one point.
pub fn sharp_omega_at(omega: &PForm, alpha: &[f64], x: &[f64], rank_tol: f64) -> Result<DVector<f64>, TensorError> {
    let w = linalg::eval_matrix(&omega.matrix(), x);
    let a = DVector::from_column_slice(alpha);
    linalg::solve(&(-w), &a, rank_tol).ok_or_else(|| TensorError::Degenerate {
        what: "symplectic form".into(),
        witness: Some(x.to_vec()),
    })
}

/// `♭_Θ X = Σ_ab θ^a(X) Θ_ab θ^b`, where `θ` is the coframe of `s` restricted to
/// the `V′` slots. The metric frame must be `s.v_prime`.
pub fn flat_metric(theta: &MetricBlock, s: &Splitting, x: &VectorField) -> Result<PForm, TensorError> {
    if theta.frame != s.v_prime {
        return Err(TensorError::Invalid("metric frame differs from V′".into()));
    }
    let coframe = s.coframe()?;
    let k = theta.len();
    let c: Vec<Expr> = (0..k).map(|a| coframe[a].interior(x).get(&[])).collect();
    let mut out = PForm::zero(x.coords(), 1);
    for b in 0..k {
        let coeff = Expr::sum((0..k).map(|a| &c[a] * &theta.m[a][b]));
        out = out.add(&coframe[b].scale(&coeff));
    }
    Ok(out.simplify())
}

fn subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, p, cur, out);
            cur.pop();
        }
    }
    go(0, n, p, &mut cur, &mut out);
    out
}

/// Split a form by type: key `(p, q)` holds the part with `p` factors dual to
/// `V′` and `q` dual to `V`. Zero components are omitted.
pub fn bigrade(omega: &PForm, s: &Splitting) -> Result<BTreeMap<(usize, usize), PForm>, TensorError> {
    if s.coords() != omega.coords() {
        return Err(TensorError::ChartMismatch("form and splitting".into()));
    }
    let coframe = s.coframe()?;
    let frame = s.frame();
    let kp = s.v_prime.len();
    let deg = omega.degree();
    let mut out: BTreeMap<(usize, usize), PForm> = BTreeMap::new();
    for k in subsets(frame.len(), deg) {
        let args: Vec<&VectorField> = k.iter().map(|&a| frame[a]).collect();
        let c = omega.eval_fields(&args).simplify();
        if c.is_zero() {
            continue;
        }
        let mut piece = PForm::scalar(omega.coords(), c);
        for &a in &k {
            piece = piece.wedge(&coframe[a]);
        }
        let p = k.iter().filter(|&&a| a < kp).count();
        let key = (p, deg - p);
        let entry = out.remove(&key).unwrap_or_else(|| PForm::zero(omega.coords(), deg));
        out.insert(key, entry.add(&piece));
    }
    Ok(out
        .into_iter()
        .map(|(k, f)| (k, f.simplify()))
        .filter(|(_, f)| !f.is_empty())
        .collect())
}
