//! Seeded random inputs: polynomials, Lagrangians, closed forms, Poisson
//! bivectors and connection matrices.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::maslov::{CForm, FormMatrix};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{Bivector, PForm};

pub use rand::SeedableRng;

pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coefficient `k/4` with `k` uniform in `[-span, span]`.
pub fn small_rational(rng: &mut GenRng, span: i64) -> Expr {
    Expr::frac(rng.gen_range(-span..=span), 4)
}

fn monomials(vars: &[usize], degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; vars.len()]];
    for _ in 0..degree {
        let mut next = out.clone();
        for m in &out {
            for k in 0..vars.len() {
                let mut m2 = m.clone();
                m2[k] += 1;
                if !next.contains(&m2) {
                    next.push(m2);
                }
            }
        }
        out = next;
    }
    out
}

/// Random polynomial of total degree at most `degree` in `vars`, with about
/// `terms` monomials.
pub fn random_poly(rng: &mut GenRng, vars: &[usize], degree: u32, terms: usize) -> Expr {
    let monos = monomials(vars, degree);
    let mut parts = Vec::new();
    for _ in 0..terms {
        let m = &monos[rng.gen_range(0..monos.len())];
        let mut f = vec![small_rational(rng, 8)];
        for (k, &e) in m.iter().enumerate() {
            if e > 0 {
                f.push(Expr::var(vars[k]).powi(e as i32));
            }
        }
        parts.push(Expr::product(f));
    }
    Expr::sum(parts).simplify()
}

/// `½ Σ a_i (u^i)² + Σ b_i(q) u^i + V(q) + ⅛ q^1 (u^1)²` with `a_i ∈ [1, 2]`,
/// so the fiber Hessian stays positive definite on `[-1, 1]^{2n}`.
pub fn random_lagrangian(rng: &mut GenRng, chart: &CoordSystem) -> Expr {
    let split = chart.get_split().expect("split chart");
    let mut parts = Vec::new();
    for (i, &u) in split.fiber.iter().enumerate() {
        let a = Expr::frac(rng.gen_range(4..=8), 8);
        parts.push(a * Expr::var(u).powi(2));
        parts.push(random_poly(rng, &split.base, 2, 2) * Expr::var(u));
        if i == 0 {
            parts.push(Expr::frac(1, 8) * Expr::var(split.base[0]) * Expr::var(u).powi(2));
        }
    }
    parts.push(random_poly(rng, &split.base, 3, 3));
    Expr::sum(parts).simplify()
}

/// Closed 2-form on the base: `d` of a random polynomial 1-form in the `q`s.
pub fn random_closed_base_form(rng: &mut GenRng, chart: &CoordSystem) -> PForm {
    let split = chart.get_split().expect("split chart");
    let mut a = PForm::zero(chart, 1);
    for &q in &split.base {
        a = a.add(&PForm::from_terms(
            chart,
            1,
            [(vec![q], random_poly(rng, &split.base, 2, 2))],
        ));
    }
    a.d().simplify()
}

/// Poisson bivector on the base coordinates: `f(q1,q2) ∂1∧∂2` for `n = 2`,
/// plus `g(q3,q4) ∂3∧∂4` for `n = 4`.
pub fn random_poisson_w(rng: &mut GenRng, chart: &CoordSystem) -> Bivector {
    let split = chart.get_split().expect("split chart");
    let b = &split.base;
    let mut terms = Vec::new();
    for pair in b.chunks(2) {
        if pair.len() == 2 {
            let f = random_poly(rng, pair, 2, 3);
            let f = if f.is_zero() { Expr::one() } else { f };
            terms.push((pair[0], pair[1], f));
        }
    }
    Bivector::from_terms(chart, terms)
}

/// Constant symmetric positive definite `n×n` matrix (identity plus a small perturbation).
pub fn random_spd(rng: &mut GenRng, n: usize) -> Vec<Vec<Expr>> {
    let mut m = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let e = if i == j {
                Expr::frac(rng.gen_range(4..=8), 4)
            } else {
                Expr::frac(rng.gen_range(-2..=2), 8 * n as i64)
            };
            m[i][j] = e.clone();
            m[j][i] = e;
        }
    }
    m
}

/// Random Lagrangian graph `u = ∇F(q)` as the images of the split coordinates
/// over a parameter chart `q`; `F` is a random cubic.
pub fn random_gradient_graph(rng: &mut GenRng, n: usize) -> (CoordSystem, Vec<Expr>) {
    let names: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let params = CoordSystem::new(&names).expect("valid names");
    let vars: Vec<usize> = (0..n).collect();
    let f = random_poly(rng, &vars, 3, 2 * n + 2);
    let mut images: Vec<Expr> = vars.iter().map(|&i| Expr::var(i)).collect();
    images.extend(vars.iter().map(|&i| f.diff(i).simplify()));
    (params, images)
}

fn sparse_one_form(rng: &mut GenRng, params: &CoordSystem) -> PForm {
    let comps = (0..params.dim())
        .map(|_| {
            if rng.gen_bool(0.3) {
                small_rational(rng, 4)
            } else {
                Expr::zero()
            }
        })
        .collect();
    PForm::one_form(params, comps)
}

/// A random constant-coefficient complex connection matrix `θ⁰` on `params`
/// together with its gauge transform `θ¹ = g⁻¹θ⁰g + g⁻¹dg` by a unipotent
/// `g = I + N`. The corner entry of `N` is linear, the rest constant, which
/// keeps the transgression forms small enough to handle symbolically.
pub fn random_gauge_pair(rng: &mut GenRng, params: &CoordSystem, n: usize) -> (FormMatrix, FormMatrix) {
    let entries = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| CForm::new(sparse_one_form(rng, params), sparse_one_form(rng, params)))
                .collect()
        })
        .collect();
    let theta0 = FormMatrix::from_entries(params, entries);
    let vars: Vec<usize> = (0..params.dim()).collect();
    let mut nil = vec![vec![Expr::zero(); n]; n];
    for (r, row) in nil.iter_mut().enumerate() {
        for e in row.iter_mut().skip(r + 1) {
            *e = small_rational(rng, 4);
        }
    }
    if n > 1 {
        nil[0][n - 1] = Expr::var(rng.gen_range(0..vars.len())).scale(&Expr::frac(rng.gen_range(1..=4), 4));
    }
    let id = linalg::identity(n);
    let g: Vec<Vec<Expr>> = (0..n)
        .map(|r| (0..n).map(|c| &id[r][c] + &nil[r][c]).collect())
        .collect();
    // (I + N)⁻¹ = Σ (-N)^k, finite since N is nilpotent
    let mut ginv = id.clone();
    let mut power = id;
    for k in 1..n {
        power = linalg::mat_mul(&power, &nil);
        let sign = if k % 2 == 1 { Expr::int(-1) } else { Expr::one() };
        for r in 0..n {
            for c in 0..n {
                ginv[r][c] = &ginv[r][c] + &(&sign * &power[r][c]);
            }
        }
    }
    let ginv = linalg::simplify_matrix(&ginv);
    let dg = FormMatrix::from_real(
        params,
        g.iter()
            .map(|row| {
                row.iter()
                    .map(|e| PForm::one_form(params, vars.iter().map(|&k| e.diff(k)).collect()))
                    .collect()
            })
            .collect(),
    );
    let theta1 = theta0.right_mul(&g).left_mul(&ginv).add(&dg.left_mul(&ginv)).simplify();
    (theta0, theta1)
}
