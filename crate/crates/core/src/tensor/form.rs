use std::collections::BTreeMap;

use serde_json::json;

use super::{EndField, TensorError, VectorField};
use crate::linalg::ExprMatrix;
use crate::symexpr::{CoordSystem, Expr};

/// Sort an index list, returning the permutation sign, or `None` on a repeat.
pub(crate) fn sort_indices(idx: &[usize]) -> Option<(Vec<usize>, bool)> {
    let mut v = idx.to_vec();
    let mut odd = false;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            odd = !odd;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, odd))
}

fn det(m: &mut [Vec<f64>]) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap())
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

/// Differential form of fixed degree with expression coefficients.
///
/// Keys are strictly increasing index tuples; absent keys are zero.
/// Evaluation on vectors uses the determinant convention
/// `(dx^1 ∧ dx^2)(X, Y) = X^1 Y^2 - X^2 Y^1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PForm {
    coords: CoordSystem,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

impl PForm {
    pub fn zero(coords: &CoordSystem, degree: usize) -> Self {
        PForm {
            coords: coords.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(coords: &CoordSystem, f: Expr) -> Self {
        PForm::from_terms(coords, 0, [(vec![], f)])
    }

    /// `f dx^i`.
    pub fn dx(coords: &CoordSystem, i: usize) -> Self {
        PForm::from_terms(coords, 1, [(vec![i], Expr::one())])
    }

    /// 1-form `Σ c_i dx^i`.
    pub fn one_form(coords: &CoordSystem, comps: Vec<Expr>) -> Self {
        assert_eq!(comps.len(), coords.dim(), "component count must match the chart");
        PForm::from_terms(coords, 1, comps.into_iter().enumerate().map(|(i, c)| (vec![i], c)))
    }

    /// 2-form `Σ_{i<j} W_ij dx^i ∧ dx^j` from a full (antisymmetric) matrix; only the upper triangle is read.
    pub fn two_form_from_matrix(coords: &CoordSystem, w: &[Vec<Expr>]) -> Self {
        let n = coords.dim();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                terms.push((vec![i, j], w[i][j].clone()));
            }
        }
        PForm::from_terms(coords, 2, terms)
    }

    /// Build from unsorted index tuples; repeated indices drop out and
    /// duplicate keys accumulate.
    pub fn from_terms<I>(coords: &CoordSystem, degree: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<usize>, Expr)>,
    {
        let mut f = PForm::zero(coords, degree);
        for (idx, c) in terms {
            assert_eq!(idx.len(), degree, "index tuple length must equal the degree");
            assert!(idx.iter().all(|&i| i < coords.dim()), "index out of range");
            f.add_term(&idx, c);
        }
        f
    }

    fn add_term(&mut self, idx: &[usize], c: Expr) {
        if c.is_zero() {
            return;
        }
        let Some((key, odd)) = sort_indices(idx) else {
            return;
        };
        let c = if odd { -c } else { c };
        let entry = match self.terms.remove(&key) {
            Some(old) => old + c,
            None => c,
        };
        if !entry.is_zero() {
            self.terms.insert(key, entry);
        }
    }

    pub fn coords(&self) -> &CoordSystem {
        &self.coords
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Structurally zero (no stored terms).
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient on `dx^{idx}` in any index order.
    pub fn get(&self, idx: &[usize]) -> Expr {
        match sort_indices(idx) {
            None => Expr::zero(),
            Some((key, odd)) => {
                let c = self.terms.get(&key).cloned().unwrap_or_else(Expr::zero);
                if odd {
                    -c
                } else {
                    c
                }
            }
        }
    }

    /// Components of a 1-form.
    pub fn components(&self) -> Vec<Expr> {
        assert_eq!(self.degree, 1, "components() needs a 1-form");
        (0..self.coords.dim()).map(|i| self.get(&[i])).collect()
    }

    /// Full antisymmetric matrix `W_ij = ω(∂_i, ∂_j)` of a 2-form.
    pub fn matrix(&self) -> ExprMatrix {
        assert_eq!(self.degree, 2, "matrix() needs a 2-form");
        let n = self.coords.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(&[i, j])).collect()).collect()
    }

    fn same_chart(&self, other: &PForm) {
        assert!(
            self.coords == other.coords,
            "forms live on different charts: {:?} vs {:?}",
            self.coords,
            other.coords
        );
    }

    pub fn add(&self, other: &PForm) -> PForm {
        self.same_chart(other);
        assert_eq!(self.degree, other.degree, "cannot add forms of different degree");
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &PForm) -> PForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PForm {
        self.map_coeffs(|c| -c)
    }

    pub fn scale(&self, f: &Expr) -> PForm {
        self.map_coeffs(|c| f * c)
    }

    pub fn map_coeffs(&self, f: impl Fn(&Expr) -> Expr) -> PForm {
        let mut out = PForm::zero(&self.coords, self.degree);
        for (k, v) in &self.terms {
            out.add_term(k, f(v));
        }
        out
    }

    /// Canonical coefficients; entries that cancel exactly are dropped.
    pub fn simplify(&self) -> PForm {
        self.map_coeffs(Expr::simplify)
    }

    /// Exterior derivative.
    pub fn d(&self) -> PForm {
        let mut out = PForm::zero(&self.coords, self.degree + 1);
        if self.degree + 1 > self.coords.dim() {
            return out;
        }
        for (idx, f) in &self.terms {
            for k in f.free_vars() {
                if idx.contains(&k) {
                    continue;
                }
                let mut key = Vec::with_capacity(idx.len() + 1);
                key.push(k);
                key.extend_from_slice(idx);
                out.add_term(&key, f.diff(k));
            }
        }
        out
    }

    pub fn wedge(&self, other: &PForm) -> PForm {
        self.same_chart(other);
        let degree = self.degree + other.degree;
        let mut out = PForm::zero(&self.coords, degree);
        if degree > self.coords.dim() {
            return out;
        }
        for (a, f) in &self.terms {
            for (b, g) in &other.terms {
                if a.iter().any(|i| b.contains(i)) {
                    continue;
                }
                let mut key = a.clone();
                key.extend_from_slice(b);
                out.add_term(&key, f * g);
            }
        }
        out
    }

    /// Interior product `i(X)ω`, contracting the first slot.
    pub fn interior(&self, x: &VectorField) -> PForm {
        assert!(self.coords == *x.coords(), "field and form live on different charts");
        if self.degree == 0 {
            return PForm::zero(&self.coords, 0);
        }
        let mut out = PForm::zero(&self.coords, self.degree - 1);
        for (idx, f) in &self.terms {
            for (m, &i) in idx.iter().enumerate() {
                let xi = &x.comps()[i];
                if xi.is_zero() {
                    continue;
                }
                let mut key = idx.clone();
                key.remove(m);
                let t = xi * f;
                out.add_term(&key, if m % 2 == 1 { -t } else { t });
            }
        }
        out
    }

    /// `ω(X_1, ..., X_p)` as an expression.
    pub fn eval_fields(&self, xs: &[&VectorField]) -> Expr {
        assert_eq!(xs.len(), self.degree, "need one field per slot");
        let mut f = self.clone();
        for x in xs {
            f = f.interior(x);
        }
        f.get(&[])
    }

    /// Numeric value at `x` on the vectors `vs` (each given in chart components).
    pub fn eval_vectors_at(&self, x: &[f64], vs: &[&[f64]]) -> f64 {
        assert_eq!(vs.len(), self.degree, "need one vector per slot");
        let p = self.degree;
        let mut total = 0.0;
        for (idx, f) in &self.terms {
            let mut m: Vec<Vec<f64>> = (0..p).map(|a| (0..p).map(|b| vs[a][idx[b]]).collect()).collect();
            let d = det(&mut m);
            if d != 0.0 {
                total += f.eval(x) * d;
            }
        }
        total
    }

    /// Coefficients at a point.
    pub fn at(&self, x: &[f64]) -> BTreeMap<Vec<usize>, f64> {
        self.terms.iter().map(|(k, v)| (k.clone(), v.eval(x))).collect()
    }

    /// Largest coefficient magnitude at `x` (NaN propagates as infinity).
    pub fn max_abs_at(&self, x: &[f64]) -> f64 {
        self.terms
            .values()
            .map(|v| {
                let a = v.eval(x).abs();
                if a.is_nan() {
                    f64::INFINITY
                } else {
                    a
                }
            })
            .fold(0.0, f64::max)
    }

    /// Pullback along a map given by the images of this form's chart
    /// coordinates as expressions over `source`.
    pub fn pullback(&self, source: &CoordSystem, images: &[Expr]) -> PForm {
        assert_eq!(images.len(), self.coords.dim(), "one image per target coordinate");
        let dphi: Vec<PForm> = images
            .iter()
            .map(|e| PForm::one_form(source, (0..source.dim()).map(|k| e.diff(k)).collect()))
            .collect();
        let mut out = PForm::zero(source, self.degree);
        for (idx, f) in &self.terms {
            let mut acc = PForm::scalar(source, f.compose(images));
            for &i in idx {
                acc = acc.wedge(&dphi[i]);
            }
            out = out.add(&acc);
        }
        out
    }

    /// Re-express on another chart with the same dimension and meaning of indices.
    pub fn on_chart(&self, coords: &CoordSystem) -> Result<PForm, TensorError> {
        if coords.dim() != self.coords.dim() {
            return Err(TensorError::ChartMismatch(format!(
                "dimension {} vs {}",
                coords.dim(),
                self.coords.dim()
            )));
        }
        Ok(PForm {
            coords: coords.clone(),
            degree: self.degree,
            terms: self.terms.clone(),
        })
    }

    /// `α ∘ A` for a 1-form `α`: `(α∘A)_j = Σ_i α_i A^i_j`.
    pub fn compose_end(&self, a: &EndField) -> PForm {
        let comps = self.components();
        let n = self.coords.dim();
        let out = (0..n)
            .map(|j| Expr::sum((0..n).map(|i| &comps[i] * &a.matrix()[i][j])))
            .collect();
        PForm::one_form(&self.coords, out)
    }

    /// Lie derivative by Cartan's formula.
    pub fn lie_derivative(&self, x: &VectorField) -> PForm {
        let a = self.d().interior(x);
        if self.degree == 0 {
            return a;
        }
        a.add(&self.interior(x).d())
    }

    /// JSON shape `{degree, terms: [{indices, expr}]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let names = self.coords.names();
        json!({
            "degree": self.degree,
            "terms": self.terms.iter().map(|(k, v)| json!({
                "indices": k,
                "expr": v.display(&self.coords).to_string(),
            })).collect::<Vec<_>>(),
            "coords": names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn chart(n: usize) -> CoordSystem {
        CoordSystem::tangent(n)
    }

    #[test]
    fn sorting_signs() {
        assert_eq!(sort_indices(&[2, 0, 1]), Some((vec![0, 1, 2], false)));
        assert_eq!(sort_indices(&[1, 0]), Some((vec![0, 1], true)));
        assert_eq!(sort_indices(&[1, 1]), None);
    }

    #[test]
    fn d_of_q1_dq2() {
        let c = chart(2);
        let f = PForm::from_terms(&c, 1, [(vec![1], Expr::var(0))]);
        assert_eq!(f.d(), PForm::from_terms(&c, 2, [(vec![0, 1], Expr::one())]));
        assert!(f.d().d().is_empty());
    }

    #[test]
    fn wedge_basics() {
        let c = chart(1);
        let dq = PForm::dx(&c, 0);
        let du = PForm::dx(&c, 1);
        assert!(dq.wedge(&dq).is_empty());
        assert_eq!(du.wedge(&dq), dq.wedge(&du).neg());
    }

    #[test]
    fn interior_examples() {
        let c = chart(1);
        let omega = PForm::dx(&c, 1).wedge(&PForm::dx(&c, 0)); // du∧dq
        let du_field = VectorField::coordinate(&c, 1);
        assert_eq!(omega.interior(&du_field), PForm::dx(&c, 0));
        let x = VectorField::new(&c, vec![Expr::var(1), Expr::zero()]); // u ∂q
        let r = omega.interior(&x);
        assert_eq!(r.get(&[1]).eval(&[0.0, 2.0]), -2.0);
        assert!(r.get(&[0]).is_zero());
    }

    #[test]
    fn numeric_evaluation_matches_interior() {
        let c = chart(2);
        let w = PForm::from_terms(
            &c,
            2,
            [
                (vec![0, 2], parse("q1*u1 + 1", &c).unwrap()),
                (vec![1, 3], parse("sin(q2)", &c).unwrap()),
                (vec![2, 1], parse("u2", &c).unwrap()),
            ],
        );
        let x = [0.2, -0.4, 0.9, 0.3];
        let v1 = [1.0, 2.0, -1.0, 0.5];
        let v2 = [0.0, -1.5, 2.0, 1.0];
        let f1 = VectorField::new(&c, v1.iter().map(|&v| Expr::real(v)).collect());
        let f2 = VectorField::new(&c, v2.iter().map(|&v| Expr::real(v)).collect());
        let sym = w.eval_fields(&[&f1, &f2]).eval(&x);
        let num = w.eval_vectors_at(&x, &[&v1, &v2]);
        assert!((sym - num).abs() < 1e-13);
    }

    #[test]
    fn pullback_of_area_form() {
        // polar coordinates pull dx∧dy back to r dr∧dθ
        let target = CoordSystem::new(&["x", "y"]).unwrap();
        let source = CoordSystem::new(&["r", "t"]).unwrap();
        let area = PForm::dx(&target, 0).wedge(&PForm::dx(&target, 1));
        let r = Expr::var(0);
        let t = Expr::var(1);
        let pulled = area.pullback(&source, &[&r * &t.cos(), &r * &t.sin()]);
        let coeff = pulled.get(&[0, 1]);
        for p in [[0.5, 0.3], [2.0, -1.0]] {
            assert!((coeff.eval(&p) - p[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_overflow_is_zero() {
        let c = chart(1);
        let w = PForm::dx(&c, 0).wedge(&PForm::dx(&c, 1));
        assert!(w.wedge(&PForm::dx(&c, 0)).is_empty());
        assert_eq!(w.d().degree(), 3);
        assert!(w.d().is_empty());
    }
}
