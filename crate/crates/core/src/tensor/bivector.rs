use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::field::max_abs;
use super::{PForm, VectorField};
use crate::linalg::ExprMatrix;
use crate::symexpr::{CoordSystem, Expr};

/// Bivector field `Σ_{i<j} P^{ij} ∂_i ∧ ∂_j`; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Bivector {
    coords: CoordSystem,
    upper: BTreeMap<(usize, usize), Expr>,
}

impl Bivector {
    pub fn zero(coords: &CoordSystem) -> Self {
        Bivector {
            coords: coords.clone(),
            upper: BTreeMap::new(),
        }
    }

    /// Accumulate `c ∂_i ∧ ∂_j` terms in any index order.
    pub fn from_terms<I>(coords: &CoordSystem, terms: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Expr)>,
    {
        let mut b = Bivector::zero(coords);
        for (i, j, c) in terms {
            b.add_term(i, j, c);
        }
        b
    }

    /// Read the upper triangle of a full matrix.
    pub fn from_matrix(coords: &CoordSystem, m: &[Vec<Expr>]) -> Self {
        let n = coords.dim();
        let mut b = Bivector::zero(coords);
        for i in 0..n {
            for j in i + 1..n {
                b.add_term(i, j, m[i][j].clone());
            }
        }
        b
    }

    fn add_term(&mut self, i: usize, j: usize, c: Expr) {
        let n = self.coords.dim();
        assert!(i < n && j < n, "index out of range");
        if i == j || c.is_zero() {
            return;
        }
        let (key, c) = if i < j { ((i, j), c) } else { ((j, i), -c) };
        let e = match self.upper.remove(&key) {
            Some(old) => old + c,
            None => c,
        };
        if !e.is_zero() {
            self.upper.insert(key, e);
        }
    }

    pub fn coords(&self) -> &CoordSystem {
        &self.coords
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &Expr)> {
        self.upper.iter()
    }

    pub fn get(&self, i: usize, j: usize) -> Expr {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => Expr::zero(),
            Less => self.upper.get(&(i, j)).cloned().unwrap_or_else(Expr::zero),
            Greater => -self.upper.get(&(j, i)).cloned().unwrap_or_else(Expr::zero),
        }
    }

    pub fn matrix(&self) -> ExprMatrix {
        let n = self.coords.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.coords.dim();
        let mut m = DMatrix::zeros(n, n);
        for (&(i, j), e) in &self.upper {
            let v = e.eval(x);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
        m
    }

    pub fn add(&self, o: &Bivector) -> Bivector {
        assert!(self.coords == o.coords, "bivectors live on different charts");
        let mut b = self.clone();
        for (&(i, j), c) in &o.upper {
            b.add_term(i, j, c.clone());
        }
        b
    }

    pub fn simplify(&self) -> Bivector {
        Bivector::from_terms(&self.coords, self.upper.iter().map(|(&(i, j), c)| (i, j, c.simplify())))
    }

    /// `P(α, β) = Σ α_i β_j P^{ij}`.
    pub fn pair(&self, a: &PForm, b: &PForm) -> Expr {
        let (a, b) = (a.components(), b.components());
        Expr::sum(
            self.upper
                .iter()
                .map(|(&(i, j), p)| p * &(&a[i] * &b[j] - &a[j] * &b[i])),
        )
    }

    /// `(♯α)^j = Σ_i α_i P^{ij}`, so that `β(♯α) = P(α, β)`.
    pub fn sharp(&self, a: &PForm) -> VectorField {
        let a = a.components();
        let n = self.coords.dim();
        let comps = (0..n)
            .map(|j| Expr::sum((0..n).map(|i| &a[i] * &self.get(i, j))))
            .collect();
        VectorField::new(&self.coords, comps)
    }

    /// Poisson bracket `{F, G} = Σ P^{ij} ∂_i F ∂_j G`.
    pub fn bracket(&self, f: &Expr, g: &Expr) -> Expr {
        Expr::sum(
            self.upper
                .iter()
                .map(|(&(i, j), p)| p * &(&f.diff(i) * &g.diff(j) - &f.diff(j) * &g.diff(i))),
        )
    }

    /// `T^{ijk} = Σ_l (P^{li} ∂_l P^{jk} + P^{lj} ∂_l P^{ki} + P^{lk} ∂_l P^{ij})`
    /// for `i < j < k`; zero exactly when the Jacobi identity holds.
    pub fn schouten_square(&self) -> Trivector {
        let n = self.coords.dim();
        let m = self.matrix();
        let dm: Vec<Vec<Vec<Expr>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i < j {
                            (0..n).map(|l| m[i][j].diff(l)).collect()
                        } else {
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect();
        let d = |i: usize, j: usize, l: usize| -> Expr {
            use std::cmp::Ordering::*;
            match i.cmp(&j) {
                Equal => Expr::zero(),
                Less => dm[i][j][l].clone(),
                Greater => -dm[j][i][l].clone(),
            }
        };
        let mut comps = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let mut t = Vec::new();
                    for l in 0..n {
                        t.push(&m[l][i] * &d(j, k, l));
                        t.push(&m[l][j] * &d(k, i, l));
                        t.push(&m[l][k] * &d(i, j, l));
                    }
                    let e = Expr::sum(t);
                    if !e.is_zero() {
                        comps.insert((i, j, k), e);
                    }
                }
            }
        }
        Trivector {
            coords: self.coords.clone(),
            comps,
        }
    }
}

/// Totally antisymmetric 3-vector, components stored for `i < j < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trivector {
    coords: CoordSystem,
    comps: BTreeMap<(usize, usize, usize), Expr>,
}

impl Trivector {
    pub fn coords(&self) -> &CoordSystem {
        &self.coords
    }

    pub fn components(&self) -> impl Iterator<Item = (&(usize, usize, usize), &Expr)> {
        self.comps.iter()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Expr {
        self.comps.get(&(i, j, k)).cloned().unwrap_or_else(Expr::zero)
    }

    /// Structurally zero.
    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn max_abs_at(&self, x: &[f64]) -> f64 {
        max_abs(self.comps.values().map(|e| e.eval(x)))
    }

    /// Component with the largest magnitude at `x`.
    pub fn worst_at(&self, x: &[f64]) -> Option<((usize, usize, usize), f64)> {
        self.comps
            .iter()
            .map(|(k, e)| (*k, e.eval(x)))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn r3() -> CoordSystem {
        CoordSystem::new(&["x", "y", "z"]).unwrap()
    }

    #[test]
    fn constant_bivector_is_poisson() {
        let c = r3();
        let p = Bivector::from_terms(&c, [(1, 2, Expr::one())]);
        assert!(p.schouten_square().is_empty());
    }

    #[test]
    fn sharp_of_dy() {
        let c = r3();
        let p = Bivector::from_terms(&c, [(1, 2, Expr::one())]);
        let v = p.sharp(&PForm::dx(&c, 1));
        assert_eq!(v, VectorField::coordinate(&c, 2));
    }

    #[test]
    fn non_poisson_detected() {
        // y ∂y∧∂z + ∂x∧∂y: T^{xyz} = P^{yx} ∂_y P^{yz} = -1
        let c = r3();
        let p = Bivector::from_terms(&c, [(1, 2, parse("y", &c).unwrap()), (0, 1, Expr::one())]);
        let t = p.schouten_square();
        assert_eq!(t.get(0, 1, 2).eval(&[0.3, 0.1, -0.2]), -1.0);
    }

    #[test]
    fn so3_bracket_is_poisson() {
        let c = r3();
        let p = Bivector::from_terms(
            &c,
            [
                (0, 1, parse("z", &c).unwrap()),
                (1, 2, parse("x", &c).unwrap()),
                (2, 0, parse("y", &c).unwrap()),
            ],
        );
        let t = p.schouten_square();
        assert!(t.max_abs_at(&[0.4, -0.3, 0.9]) < 1e-15);
    }

    #[test]
    fn pair_and_bracket_agree() {
        let c = r3();
        let p = Bivector::from_terms(&c, [(0, 1, parse("z^2 + 1", &c).unwrap())]);
        let f = parse("x*y", &c).unwrap();
        let g = parse("sin(x) + y^2", &c).unwrap();
        let df = PForm::one_form(&c, (0..3).map(|k| f.diff(k)).collect());
        let dg = PForm::one_form(&c, (0..3).map(|k| g.diff(k)).collect());
        let x = [0.2, 0.5, -0.7];
        assert!((p.pair(&df, &dg).eval(&x) - p.bracket(&f, &g).eval(&x)).abs() < 1e-14);
    }
}
