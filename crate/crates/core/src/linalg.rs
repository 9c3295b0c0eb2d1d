//! Small dense linear algebra: numeric (nalgebra) and over expressions.

use nalgebra::{DMatrix, DVector};

use crate::symexpr::Expr;

/// Square or rectangular matrix of expressions, row-major.
pub type ExprMatrix = Vec<Vec<Expr>>;

pub fn eval_matrix(m: &[Vec<Expr>], x: &[f64]) -> DMatrix<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows, cols, |i, j| m[i][j].eval(x))
}

pub fn eval_vector(v: &[Expr], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|e| e.eval(x)))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 || !top.is_finite() {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&a), Some(&b)) if b > 0.0 => a / b,
        _ => f64::INFINITY,
    }
}

/// Solve `a x = b` for square nonsingular `a` (rank tested with `rel_tol`).
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    if a.nrows() != a.ncols() || rank(a, rel_tol) < a.nrows() {
        return None;
    }
    a.clone().lu().solve(b)
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let r = rank(m, rel_tol);
    if r == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));
    DMatrix::from_fn(m.nrows(), r, |i, j| u[(i, order[j])])
}

/// Positive definiteness via leading principal minors of the symmetric part.
pub fn positive_definite(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    (1..=n).all(|k| sym.view((0, 0), (k, k)).into_owned().determinant() > 0.0)
}

// ---- expression matrices ----------------------------------------------------

pub fn identity(n: usize) -> ExprMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Expr::one() } else { Expr::zero() })
                .collect()
        })
        .collect()
}

pub fn zeros(rows: usize, cols: usize) -> ExprMatrix {
    vec![vec![Expr::zero(); cols]; rows]
}

pub fn transpose(m: &[Vec<Expr>]) -> ExprMatrix {
    let cols = m.first().map_or(0, |r| r.len());
    (0..cols).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mat_mul(a: &[Vec<Expr>], b: &[Vec<Expr>]) -> ExprMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| Expr::sum((0..inner).map(|k| &row[k] * &b[k][j])))
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &[Vec<Expr>], v: &[Expr]) -> Vec<Expr> {
    a.iter()
        .map(|row| Expr::sum(row.iter().zip(v).map(|(x, y)| x * y)))
        .collect()
}

pub fn simplify_matrix(m: &[Vec<Expr>]) -> ExprMatrix {
    m.iter().map(|r| r.iter().map(Expr::simplify).collect()).collect()
}

fn pivot_score(e: &Expr) -> Option<(u8, usize)> {
    if e.is_zero() {
        return None;
    }
    if e.is_constant() {
        return match e.is_zero_exact() {
            Some(true) => None,
            _ => Some((0, e.size())),
        };
    }
    match e.is_zero_exact() {
        Some(false) => Some((1, e.size())),
        _ => None,
    }
}

/// Gauss-Jordan inverse over expressions. Pivots prefer nonzero constants,
/// then the smallest certified-nonzero entry. `None` if no admissible pivot
/// exists in some column (the matrix is singular as a rational function).
pub fn inverse(m: &[Vec<Expr>]) -> Option<ExprMatrix> {
    let n = m.len();
    let mut a: ExprMatrix = m.iter().map(|r| r.to_vec()).collect();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .filter_map(|r| pivot_score(&a[r][col]).map(|s| (s, r)))
            .min()?
            .1;
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p = a[col][col].clone();
        let p_inv = p.recip();
        for j in 0..n {
            if j == col {
                a[col][j] = Expr::one();
            } else {
                a[col][j] = (&a[col][j] * &p_inv).simplify();
            }
            inv[col][j] = (&inv[col][j] * &p_inv).simplify();
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                if j == col {
                    a[r][j] = Expr::zero();
                } else {
                    a[r][j] = (&a[r][j] - &(&f * &a[col][j])).simplify();
                }
                inv[r][j] = (&inv[r][j] - &(&f * &inv[col][j])).simplify();
            }
        }
    }
    Some(inv)
}

/// Solve `a x = b` over expressions.
pub fn solve_expr(a: &[Vec<Expr>], b: &[Expr]) -> Option<Vec<Expr>> {
    let inv = inverse(a)?;
    Some(mat_vec(&inv, b).iter().map(Expr::simplify).collect())
}

/// Determinant by cofactor expansion (intended for n <= 4).
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: ExprMatrix = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let t = &m[0][j] * &determinant(&minor);
                terms.push(if j % 2 == 0 { t } else { -t });
            }
            Expr::sum(terms)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse, CoordSystem};

    #[test]
    fn numeric_rank() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(rank(&m, 1e-8), 2);
        assert_eq!(rank(&DMatrix::zeros(2, 2), 1e-8), 0);
        assert!(condition_number(&m).is_infinite() || condition_number(&m) > 1e12);
    }

    #[test]
    fn symbolic_inverse_roundtrip() {
        let c = CoordSystem::tangent(1);
        let p = |s: &str| parse(s, &c).unwrap();
        let m = vec![vec![p("1 + q1^2"), p("q1")], vec![p("0"), p("2")]];
        let inv = inverse(&m).unwrap();
        let prod = mat_mul(&m, &inv);
        for x in [[0.3, 0.1], [-0.7, 2.0]] {
            let e = eval_matrix(&prod, &x);
            assert!((e - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        }
    }

    #[test]
    fn singular_symbolic_matrix() {
        let c = CoordSystem::tangent(1);
        let p = |s: &str| parse(s, &c).unwrap();
        let m = vec![vec![p("q1"), p("q1")], vec![p("u1"), p("u1")]];
        assert!(inverse(&m).is_none());
    }

    #[test]
    fn determinant_3x3() {
        let m: ExprMatrix = [[2, 0, 1], [1, 3, 0], [0, 1, 4]]
            .iter()
            .map(|r| r.iter().map(|&v| Expr::int(v)).collect())
            .collect();
        assert_eq!(determinant(&m).simplify(), Expr::int(25));
    }

    #[test]
    fn definiteness() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(positive_definite(&a));
        assert!(!positive_definite(&b));
    }
}
