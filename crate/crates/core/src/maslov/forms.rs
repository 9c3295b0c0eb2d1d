use std::f64::consts::PI;

use super::MaslovError;
use crate::quadrature::gauss_legendre_unit;
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::PForm;

/// A complex-valued form stored as its real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CForm {
    pub re: PForm,
    pub im: PForm,
}

impl CForm {
    pub fn new(re: PForm, im: PForm) -> Self {
        assert_eq!(re.degree(), im.degree(), "parts of a complex form must share a degree");
        CForm { re, im }
    }

    pub fn zero(coords: &CoordSystem, degree: usize) -> Self {
        CForm::new(PForm::zero(coords, degree), PForm::zero(coords, degree))
    }

    pub fn real(re: PForm) -> Self {
        let im = PForm::zero(re.coords(), re.degree());
        CForm { re, im }
    }

    pub fn degree(&self) -> usize {
        self.re.degree()
    }

    pub fn add(&self, o: &CForm) -> CForm {
        CForm::new(self.re.add(&o.re), self.im.add(&o.im))
    }

    pub fn sub(&self, o: &CForm) -> CForm {
        CForm::new(self.re.sub(&o.re), self.im.sub(&o.im))
    }

    pub fn neg(&self) -> CForm {
        CForm::new(self.re.neg(), self.im.neg())
    }

    pub fn scale(&self, f: &Expr) -> CForm {
        CForm::new(self.re.scale(f), self.im.scale(f))
    }

    /// Multiplication by `√-1`.
    pub fn times_i(&self) -> CForm {
        CForm::new(self.im.neg(), self.re.clone())
    }

    pub fn conj(&self) -> CForm {
        CForm::new(self.re.clone(), self.im.neg())
    }

    pub fn wedge(&self, o: &CForm) -> CForm {
        let re = self.re.wedge(&o.re).sub(&self.im.wedge(&o.im));
        let im = self.re.wedge(&o.im).add(&self.im.wedge(&o.re));
        CForm::new(re, im)
    }

    pub fn d(&self) -> CForm {
        CForm::new(self.re.d(), self.im.d())
    }

    pub fn simplify(&self) -> CForm {
        CForm::new(self.re.simplify(), self.im.simplify())
    }

    pub fn max_abs_at(&self, x: &[f64]) -> f64 {
        self.re.max_abs_at(x).max(self.im.max_abs_at(x))
    }
}

/// Square matrix of complex forms on a parameter domain.
///
/// Column convention: for a connection, `∇ε_c = Σ_r θ[r][c] ε_r`, so that
/// the curvature is `dθ + θ∧θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrix {
    pub params: CoordSystem,
    pub entries: Vec<Vec<CForm>>,
}

impl FormMatrix {
    pub fn zeros(params: &CoordSystem, n: usize, degree: usize) -> Self {
        FormMatrix {
            params: params.clone(),
            entries: vec![vec![CForm::zero(params, degree); n]; n],
        }
    }

    pub fn from_entries(params: &CoordSystem, entries: Vec<Vec<CForm>>) -> Self {
        let n = entries.len();
        assert!(entries.iter().all(|r| r.len() == n), "form matrix must be square");
        FormMatrix {
            params: params.clone(),
            entries,
        }
    }

    /// Real and imaginary parts given separately.
    pub fn from_parts(params: &CoordSystem, re: Vec<Vec<PForm>>, im: Vec<Vec<PForm>>) -> Self {
        let entries = re
            .into_iter()
            .zip(im)
            .map(|(r, i)| r.into_iter().zip(i).map(|(a, b)| CForm::new(a, b)).collect())
            .collect();
        FormMatrix::from_entries(params, entries)
    }

    pub fn from_real(params: &CoordSystem, re: Vec<Vec<PForm>>) -> Self {
        let entries = re
            .into_iter()
            .map(|r| r.into_iter().map(CForm::real).collect())
            .collect();
        FormMatrix::from_entries(params, entries)
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn degree(&self) -> usize {
        self.entries.first().and_then(|r| r.first()).map_or(0, CForm::degree)
    }

    pub fn get(&self, r: usize, c: usize) -> &CForm {
        &self.entries[r][c]
    }

    pub fn re(&self) -> Vec<Vec<PForm>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|e| e.re.clone()).collect())
            .collect()
    }

    pub fn im(&self) -> Vec<Vec<PForm>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|e| e.im.clone()).collect())
            .collect()
    }

    fn zip(&self, o: &FormMatrix, f: impl Fn(&CForm, &CForm) -> CForm) -> FormMatrix {
        assert_eq!(self.n(), o.n(), "form matrix size mismatch");
        let entries = self
            .entries
            .iter()
            .zip(&o.entries)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
            .collect();
        FormMatrix::from_entries(&self.params, entries)
    }

    pub fn map(&self, f: impl Fn(&CForm) -> CForm) -> FormMatrix {
        let entries = self.entries.iter().map(|r| r.iter().map(&f).collect()).collect();
        FormMatrix::from_entries(&self.params, entries)
    }

    pub fn add(&self, o: &FormMatrix) -> FormMatrix {
        self.zip(o, CForm::add)
    }

    pub fn sub(&self, o: &FormMatrix) -> FormMatrix {
        self.zip(o, CForm::sub)
    }

    pub fn scale(&self, f: &Expr) -> FormMatrix {
        self.map(|e| e.scale(f))
    }

    pub fn d(&self) -> FormMatrix {
        self.map(CForm::d)
    }

    pub fn simplify(&self) -> FormMatrix {
        self.map(CForm::simplify)
    }

    pub fn transpose(&self) -> FormMatrix {
        let n = self.n();
        let entries = (0..n)
            .map(|r| (0..n).map(|c| self.entries[c][r].clone()).collect())
            .collect();
        FormMatrix::from_entries(&self.params, entries)
    }

    /// `M θ` for a matrix of functions `M`.
    pub fn left_mul(&self, m: &[Vec<Expr>]) -> FormMatrix {
        let n = self.n();
        let entries = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        (0..n).fold(CForm::zero(&self.params, self.degree()), |acc, k| {
                            acc.add(&self.entries[k][c].scale(&m[r][k]))
                        })
                    })
                    .collect()
            })
            .collect();
        FormMatrix::from_entries(&self.params, entries)
    }

    /// `θ M` for a matrix of functions `M`.
    pub fn right_mul(&self, m: &[Vec<Expr>]) -> FormMatrix {
        let n = self.n();
        let entries = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        (0..n).fold(CForm::zero(&self.params, self.degree()), |acc, k| {
                            acc.add(&self.entries[r][k].scale(&m[k][c]))
                        })
                    })
                    .collect()
            })
            .collect();
        FormMatrix::from_entries(&self.params, entries)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> FormMatrix {
        self.transpose().map(CForm::conj)
    }

    /// Matrix product with entries multiplied by `∧`.
    pub fn wedge(&self, o: &FormMatrix) -> FormMatrix {
        let n = self.n();
        assert_eq!(n, o.n(), "form matrix size mismatch");
        let deg = self.degree() + o.degree();
        let entries = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        (0..n).fold(CForm::zero(&self.params, deg), |acc, k| {
                            acc.add(&self.entries[r][k].wedge(&o.entries[k][c]))
                        })
                    })
                    .collect()
            })
            .collect();
        FormMatrix::from_entries(&self.params, entries)
    }

    pub fn trace(&self) -> CForm {
        (0..self.n()).fold(CForm::zero(&self.params, self.degree()), |acc, i| {
            acc.add(&self.entries[i][i])
        })
    }

    pub fn max_abs_at(&self, x: &[f64]) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|e| e.max_abs_at(x))
            .fold(0.0, f64::max)
    }

    /// Largest entry of `θ + θ†` at `x`.
    pub fn skew_hermitian_residual_at(&self, x: &[f64]) -> f64 {
        self.add(&self.adjoint()).max_abs_at(x)
    }
}

/// The connections `θ⁰ = λ + √-1 b` and `θ¹ = λ` on the unitary frame built
/// from `e_i`, given `[i][j]`-indexed `λ_i^j` and `b_i^j`.
pub fn unitary_connections(lambda: &FormMatrix, b: &FormMatrix) -> (FormMatrix, FormMatrix) {
    let lt = lambda.transpose();
    let bt = b.transpose().map(CForm::times_i);
    (lt.add(&bt), lt)
}

/// `Θ = dθ + θ∧θ`.
pub fn connection_curvature(theta: &FormMatrix) -> FormMatrix {
    theta.d().add(&theta.wedge(theta)).simplify()
}

/// `Θ_t = (1-t)Θ₀ + tΘ₁ - t(1-t) α∧α`, the curvature of `θ⁰ + tα` when
/// `Θ_a` are the curvatures of `θ⁰` and `θ⁰ + α`.
pub fn curvature_variation(theta0: &FormMatrix, theta1: &FormMatrix, alpha: &FormMatrix, t: f64) -> FormMatrix {
    let aa = alpha.wedge(alpha);
    theta0
        .scale(&Expr::real(1.0 - t))
        .add(&theta1.scale(&Expr::real(t)))
        .sub(&aa.scale(&Expr::real(t * (1.0 - t))))
        .simplify()
}

fn permutations(k: usize) -> Vec<(Vec<usize>, bool)> {
    if k == 0 {
        return vec![(Vec::new(), true)];
    }
    let mut out = Vec::new();
    for (p, even) in permutations(k - 1) {
        // insert k-1 at every slot; moving it left past m entries flips parity m times
        for slot in 0..=p.len() {
            let mut q = p.clone();
            q.insert(slot, k - 1);
            let moved = p.len() - slot;
            out.push((q, even == (moved % 2 == 0)));
        }
    }
    out
}

fn injective_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, k, &mut cur, &mut out);
    out
}

/// `δ^{i₁…i_k}_{j₁…j_k} A₁^{j₁}_{i₁} ∧ … ∧ A_k^{j_k}_{i_k}` with upper index
/// the row.
pub fn kronecker_contraction(mats: &[&FormMatrix]) -> CForm {
    let first = mats.first().expect("at least one matrix");
    let params = &first.params;
    let n = first.n();
    let k = mats.len();
    let degree: usize = mats.iter().map(|m| m.degree()).sum();
    let mut acc = CForm::zero(params, degree);
    if k > n {
        return acc;
    }
    let perms = permutations(k);
    for idx in injective_tuples(n, k) {
        for (p, even) in &perms {
            let mut term: Option<CForm> = None;
            for (slot, m) in mats.iter().enumerate() {
                let e = m.get(idx[p[slot]], idx[slot]);
                term = Some(match term {
                    None => e.clone(),
                    Some(t) => t.wedge(e).simplify(),
                });
            }
            let term = term.expect("k >= 1");
            acc = if *even { acc.add(&term) } else { acc.sub(&term) };
        }
        acc = acc.simplify();
    }
    acc
}

/// A transgression form together with its imaginary part, which vanishes
/// for unitary data.
#[derive(Debug, Clone, PartialEq)]
pub struct CwbForm {
    pub h: usize,
    pub form: PForm,
    pub imag: PForm,
    pub notice: Option<String>,
}

/// The `(4h-3)`-form `Δ(∇⁰, ∇¹)c_{2h-1}` for connection matrices `θ⁰`, `θ¹`
/// in a common unitary frame. The `t`-integral uses `2h-1` Gauss–Legendre
/// nodes, which is exact for the polynomial integrand.
pub fn cwb_form(h: usize, theta0: &FormMatrix, theta1: &FormMatrix) -> Result<CwbForm, MaslovError> {
    if h == 0 {
        return Err(MaslovError::Invalid("h must be positive".into()));
    }
    if theta0.n() != theta1.n() || theta0.params != theta1.params {
        return Err(MaslovError::Invalid(
            "connections must share frame size and domain".into(),
        ));
    }
    if theta0.degree() != 1 || theta1.degree() != 1 {
        return Err(MaslovError::Invalid("connection matrices must hold 1-forms".into()));
    }
    let params = &theta0.params;
    let deg = 4 * h - 3;
    if deg > params.dim() {
        return Ok(CwbForm {
            h,
            form: PForm::zero(params, deg),
            imag: PForm::zero(params, deg),
            notice: Some(format!(
                "no {deg}-forms on a {}-parameter domain; returning zero",
                params.dim()
            )),
        });
    }
    let alpha = theta1.sub(theta0).simplify();
    let integral = if h == 1 {
        kronecker_contraction(&[&alpha])
    } else {
        let c0 = connection_curvature(theta0);
        let c1 = connection_curvature(theta1);
        gauss_legendre_unit(2 * h - 1)
            .into_iter()
            .fold(CForm::zero(params, deg), |acc, (t, w)| {
                let th = curvature_variation(&c0, &c1, &alpha, t);
                let mut mats: Vec<&FormMatrix> = vec![&alpha];
                mats.extend(std::iter::repeat_n(&th, 2 * h - 2));
                acc.add(&kronecker_contraction(&mats).scale(&Expr::real(w)))
            })
    };
    // (√-1)^{2h-1} = √-1 (-1)^{h+1}
    let fact: f64 = (1..=2 * h - 2).map(|k| k as f64).product();
    let sign = if h % 2 == 1 { 1.0 } else { -1.0 };
    let c = sign / ((2.0 * PI).powi(2 * h as i32 - 1) * fact);
    let z = integral.times_i().scale(&Expr::real(c)).simplify();
    Ok(CwbForm {
        h,
        form: z.re,
        imag: z.im,
        notice: None,
    })
}
