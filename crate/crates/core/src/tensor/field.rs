use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, ExprMatrix};
use crate::symexpr::{CoordSystem, Expr};

/// Contravariant vector field `Σ X^i ∂_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    coords: CoordSystem,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(coords: &CoordSystem, comps: Vec<Expr>) -> Self {
        assert_eq!(comps.len(), coords.dim(), "component count must match the chart");
        VectorField {
            coords: coords.clone(),
            comps,
        }
    }

    pub fn zero(coords: &CoordSystem) -> Self {
        VectorField::new(coords, vec![Expr::zero(); coords.dim()])
    }

    /// `∂_i`.
    pub fn coordinate(coords: &CoordSystem, i: usize) -> Self {
        let mut c = vec![Expr::zero(); coords.dim()];
        c[i] = Expr::one();
        VectorField::new(coords, c)
    }

    pub fn coords(&self) -> &CoordSystem {
        &self.coords
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(
            f.free_vars()
                .into_iter()
                .filter(|&k| !self.comps[k].is_zero())
                .map(|k| &self.comps[k] * &f.diff(k)),
        )
    }

    /// `[X, Y]^i = X(Y^i) - Y(X^i)`.
    pub fn bracket(&self, y: &VectorField) -> VectorField {
        assert!(self.coords == y.coords, "fields live on different charts");
        let comps = (0..self.dim())
            .map(|i| self.apply(&y.comps[i]) - y.apply(&self.comps[i]))
            .collect();
        VectorField::new(&self.coords, comps)
    }

    pub fn add(&self, y: &VectorField) -> VectorField {
        self.zip(y, |a, b| a + b)
    }

    pub fn sub(&self, y: &VectorField) -> VectorField {
        self.zip(y, |a, b| a - b)
    }

    pub fn neg(&self) -> VectorField {
        self.map(|c| -c)
    }

    pub fn scale(&self, f: &Expr) -> VectorField {
        self.map(|c| f * c)
    }

    pub fn simplify(&self) -> VectorField {
        self.map(Expr::simplify)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> VectorField {
        VectorField::new(&self.coords, self.comps.iter().map(f).collect())
    }

    fn zip(&self, y: &VectorField, f: impl Fn(&Expr, &Expr) -> Expr) -> VectorField {
        assert!(self.coords == y.coords, "fields live on different charts");
        VectorField::new(
            &self.coords,
            self.comps.iter().zip(&y.comps).map(|(a, b)| f(a, b)).collect(),
        )
    }

    pub fn at(&self, x: &[f64]) -> DVector<f64> {
        linalg::eval_vector(&self.comps, x)
    }

    pub fn max_abs_at(&self, x: &[f64]) -> f64 {
        max_abs(self.comps.iter().map(|c| c.eval(x)))
    }

    /// Structurally zero.
    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }
}

pub(crate) fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values
        .map(|v| if v.is_nan() { f64::INFINITY } else { v.abs() })
        .fold(0.0, f64::max)
}

/// Field of endomorphisms; `m[i][j]` is the `∂_i` component of `A ∂_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndField {
    coords: CoordSystem,
    m: ExprMatrix,
}

impl EndField {
    pub fn from_matrix(coords: &CoordSystem, m: ExprMatrix) -> Self {
        let n = coords.dim();
        assert!(
            m.len() == n && m.iter().all(|r| r.len() == n),
            "endomorphism matrix must be {n}x{n}"
        );
        EndField {
            coords: coords.clone(),
            m,
        }
    }

    pub fn identity(coords: &CoordSystem) -> Self {
        EndField::from_matrix(coords, linalg::identity(coords.dim()))
    }

    pub fn zero(coords: &CoordSystem) -> Self {
        EndField::from_matrix(coords, linalg::zeros(coords.dim(), coords.dim()))
    }

    /// Endomorphism whose `j`-th column is `A ∂_j = cols[j]`.
    pub fn from_columns(coords: &CoordSystem, cols: &[VectorField]) -> Self {
        let n = coords.dim();
        assert_eq!(cols.len(), n, "need one column per coordinate");
        let m = (0..n)
            .map(|i| (0..n).map(|j| cols[j].comps[i].clone()).collect())
            .collect();
        EndField::from_matrix(coords, m)
    }

    pub fn coords(&self) -> &CoordSystem {
        &self.coords
    }

    pub fn matrix(&self) -> &ExprMatrix {
        &self.m
    }

    pub fn column(&self, j: usize) -> VectorField {
        VectorField::new(&self.coords, self.m.iter().map(|r| r[j].clone()).collect())
    }

    pub fn apply(&self, x: &VectorField) -> VectorField {
        VectorField::new(&self.coords, linalg::mat_vec(&self.m, &x.comps))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &EndField) -> EndField {
        EndField::from_matrix(&self.coords, linalg::mat_mul(&self.m, &other.m))
    }

    pub fn square(&self) -> EndField {
        self.compose(self)
    }

    pub fn add(&self, other: &EndField) -> EndField {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &EndField) -> EndField {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, f: &Expr) -> EndField {
        self.map(|c| f * c)
    }

    pub fn neg(&self) -> EndField {
        self.map(|c| -c)
    }

    pub fn simplify(&self) -> EndField {
        self.map(Expr::simplify)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> EndField {
        EndField::from_matrix(
            &self.coords,
            self.m.iter().map(|r| r.iter().map(&f).collect()).collect(),
        )
    }

    fn zip(&self, o: &EndField, f: impl Fn(&Expr, &Expr) -> Expr) -> EndField {
        assert!(self.coords == o.coords, "endomorphisms live on different charts");
        EndField::from_matrix(
            &self.coords,
            self.m
                .iter()
                .zip(&o.m)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
                .collect(),
        )
    }

    /// `(L_X A)^i_j = X(A^i_j) - A^k_j ∂_k X^i + A^i_k ∂_j X^k`.
    pub fn lie_derivative(&self, x: &VectorField) -> EndField {
        let n = self.coords.dim();
        let dx: Vec<Vec<Expr>> = (0..n).map(|i| (0..n).map(|k| x.comps[i].diff(k)).collect()).collect();
        let m = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut t = vec![x.apply(&self.m[i][j])];
                        for k in 0..n {
                            t.push(-(&self.m[k][j] * &dx[i][k]));
                            t.push(&self.m[i][k] * &dx[k][j]);
                        }
                        Expr::sum(t)
                    })
                    .collect()
            })
            .collect();
        EndField::from_matrix(&self.coords, m)
    }

    /// `N_A(X,Y) = [AX,AY] - A[AX,Y] - A[X,AY] + A²[X,Y]`.
    pub fn nijenhuis(&self, x: &VectorField, y: &VectorField) -> VectorField {
        let ax = self.apply(x);
        let ay = self.apply(y);
        let xy = x.bracket(y);
        ax.bracket(&ay)
            .sub(&self.apply(&ax.bracket(y)))
            .sub(&self.apply(&x.bracket(&ay)))
            .add(&self.apply(&self.apply(&xy)))
    }

    /// All `N_A(∂_i, ∂_j)` for `i < j`.
    pub fn nijenhuis_coordinate(&self) -> Vec<((usize, usize), VectorField)> {
        let n = self.coords.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let e = |k| VectorField::coordinate(&self.coords, k);
                out.push(((i, j), self.nijenhuis(&e(i), &e(j))));
            }
        }
        out
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        linalg::eval_matrix(&self.m, x)
    }
}

/// `(L_X T)_ij = X(T_ij) + T_kj ∂_i X^k + T_ik ∂_j X^k` for a covariant 2-tensor.
pub fn lie_derivative_bilinear(t: &[Vec<Expr>], x: &VectorField) -> ExprMatrix {
    let n = x.dim();
    let dx: Vec<Vec<Expr>> = (0..n).map(|k| (0..n).map(|i| x.comps[k].diff(i)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut terms = vec![x.apply(&t[i][j])];
                    for k in 0..n {
                        terms.push(&t[k][j] * &dx[k][i]);
                        terms.push(&t[i][k] * &dx[k][j]);
                    }
                    Expr::sum(terms)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn field(c: &CoordSystem, s: &[&str]) -> VectorField {
        VectorField::new(c, s.iter().map(|t| parse(t, c).unwrap()).collect())
    }

    #[test]
    fn coordinate_fields_commute() {
        let c = CoordSystem::tangent(1);
        let b = VectorField::coordinate(&c, 0).bracket(&VectorField::coordinate(&c, 1));
        assert!(b.is_zero());
    }

    #[test]
    fn bracket_example() {
        let c = CoordSystem::tangent(1);
        let x = field(&c, &["u1", "0"]);
        let y = field(&c, &["0", "q1"]);
        let b = x.bracket(&y).simplify();
        assert_eq!(b, field(&c, &["-q1", "u1"]).simplify());
    }

    #[test]
    fn lie_derivative_matches_bracket_formula() {
        let c = CoordSystem::tangent(1);
        let a = EndField::from_matrix(
            &c,
            vec![
                vec![parse("q1*u1", &c).unwrap(), parse("1", &c).unwrap()],
                vec![parse("u1^2", &c).unwrap(), parse("sin(q1)", &c).unwrap()],
            ],
        );
        let x = field(&c, &["u1 + q1^2", "cos(u1)"]);
        let y = field(&c, &["q1", "u1*q1"]);
        let lhs = a.lie_derivative(&x).apply(&y);
        let rhs = x.bracket(&a.apply(&y)).sub(&a.apply(&x.bracket(&y)));
        for p in [[0.3, -0.2], [0.9, 0.4]] {
            assert!(lhs.sub(&rhs).max_abs_at(&p) < 1e-12);
        }
    }

    #[test]
    fn nijenhuis_is_antisymmetric_on_diagonal() {
        let c = CoordSystem::tangent(1);
        let a = EndField::from_matrix(
            &c,
            vec![
                vec![parse("q1", &c).unwrap(), parse("u1^2", &c).unwrap()],
                vec![parse("q1*u1", &c).unwrap(), parse("1", &c).unwrap()],
            ],
        );
        let x = field(&c, &["u1", "q1^2"]);
        assert!(a.nijenhuis(&x, &x).max_abs_at(&[0.4, 0.7]) < 1e-13);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::gen;
    use proptest::prelude::*;

    fn random_field(seed: u64, c: &CoordSystem) -> VectorField {
        let mut rng = gen::rng(seed);
        let vars: Vec<usize> = (0..c.dim()).collect();
        VectorField::new(
            c,
            (0..c.dim()).map(|_| gen::random_poly(&mut rng, &vars, 2, 3)).collect(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn bracket_is_antisymmetric_and_jacobi(seed in any::<u64>(), x in proptest::array::uniform3(-1.0f64..1.0)) {
            let c = CoordSystem::new(&["x", "y", "z"]).unwrap();
            let (a, b, d) = (random_field(seed, &c), random_field(seed + 1, &c), random_field(seed + 2, &c));
            prop_assert!(a.bracket(&b).add(&b.bracket(&a)).max_abs_at(&x) < 1e-12);
            let jac = a.bracket(&b.bracket(&d)).add(&b.bracket(&d.bracket(&a))).add(&d.bracket(&a.bracket(&b)));
            prop_assert!(jac.max_abs_at(&x) < 1e-9);
        }

        #[test]
        fn bracket_is_a_commutator_on_functions(seed in any::<u64>(), x in proptest::array::uniform3(-1.0f64..1.0)) {
            let c = CoordSystem::new(&["x", "y", "z"]).unwrap();
            let (a, b) = (random_field(seed, &c), random_field(seed + 7, &c));
            let f = gen::random_poly(&mut gen::rng(seed + 9), &[0, 1, 2], 3, 4);
            let lhs = a.bracket(&b).apply(&f);
            let rhs = a.apply(&b.apply(&f)) - b.apply(&a.apply(&f));
            prop_assert!((lhs.eval(&x) - rhs.eval(&x)).abs() < 1e-9);
        }
    }
}
