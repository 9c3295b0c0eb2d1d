use std::f64::consts::PI;

use serde::Serialize;

use super::{HarnessError, ParamSpec, Params, Scenario};
use crate::linalg::{self, mat_mul, transpose, ExprMatrix};
use crate::maslov::{
    calibrate, check_gauss_weingarten, first_maslov_loop, winding_oracle, Calibrated, ConnectionMode, FramedLagrangian,
    LoopSpec, MaslovError,
};
use crate::poisson::{fibered_product, lift_obstruction, llp_check, tangent_lift, tn_poisson_check, PoissonError};
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::structures::{
    almost_product, assemble_tn_form, canonical_s, check_compat, check_hamiltonian, check_tangent, energy_hamiltonian,
    is_second_order, lagrangian_form, lagrangian_form_explicit, solve_vertical_correction, tangent_from_metric,
    theta_metric, transition_check, LagrangianChart, SecondOrderMode, StructError,
};
use crate::symexpr::{CoordSystem, Expr, SymError};
use crate::tensor::{EndField, MetricBlock, PForm, Splitting, TensorError, VectorField};

/// Why a builder stopped: bad user input, or a construction that failed.
#[derive(Debug)]
pub(crate) enum BuildError {
    Param(HarnessError),
    Failed(String),
}

impl From<HarnessError> for BuildError {
    fn from(e: HarnessError) -> Self {
        BuildError::Param(e)
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for BuildError {
            fn from(e: $t) -> Self {
                BuildError::Failed(e.to_string())
            }
        }
    )*};
}
failed_from!(StructError, PoissonError, MaslovError, TensorError, SymError);

fn bad(key: &str, msg: impl Into<String>) -> BuildError {
    BuildError::Param(HarnessError::Param {
        key: key.to_string(),
        msg: msg.into(),
    })
}

/// What a builder hands back: its checks, expectation overrides that depend
/// on the parameters, and loop data for Maslov scenarios.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub checks: ComplianceReport,
    pub expected: Vec<(String, bool)>,
    pub maslov: Option<MaslovSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaslovSummary {
    pub maslov_integral: f64,
    /// Winding of `det² U` over the loop.
    pub winding: f64,
    /// Winding of `det U` over the loop.
    pub winding_det: f64,
    /// Integral and `det² U` winding agree within the tolerance.
    pub agreement: bool,
    pub crossings: usize,
}

pub(super) static REGISTRY: &[Scenario] = &[
    Scenario {
        name: "torus_oscillator",
        summary: "modified harmonic oscillator on the torus T^2n",
        details: "L = (|u|^2 + alpha_ij q^i q^j)/2 on TR^n, quotiented by integer shifts of q and u.\n\
                  The local Lagrangians differ by s.u + f(q) across the shift, so they define the\n\
                  same symplectic form sum du^i^dq^i.",
        params: &[
            ParamSpec {
                key: "n",
                default: "2",
                help: "base dimension",
            },
            ParamSpec {
                key: "alpha",
                default: "[[2,0],[0,3]]",
                help: "constant symmetric matrix (identity if n != 2)",
            },
            ParamSpec {
                key: "shift_q",
                default: "[1,..,1]",
                help: "integer shift of q",
            },
            ParamSpec {
                key: "shift_u",
                default: "[1,..,1]",
                help: "integer shift of u",
            },
        ],
        expected: &[
            ("Hessian rank n", true),
            ("omega = sum du^dq", true),
            ("closed", true),
            ("nondegenerate", true),
            ("compat", true),
            ("lambda symmetric", true),
            ("transition affine in u", true),
            ("u-Hessian of dL = 0", true),
            ("alpha closed", true),
            ("omega agrees on overlap", true),
            ("S invariant under shifts", true),
            ("i(X)omega = -dh", true),
            ("SX = E", true),
        ],
        build: torus_oscillator,
    },
    Scenario {
        name: "heisenberg",
        summary: "elliptic structure on a quotient of H(1,p) x H(1,q)",
        details: "Chart (X1, y1, Z1, X2, y2, Z2) on H(1,p) x H(1,q). omega = dX1^(dZ1 - X1 dy1)\n\
                  + dX2^(dZ2 - X2 dy2) + dy1^dy2, the foliation X1, X2, y1 - alpha y2 = const,\n\
                  and the transversal metric dX1^2 + dX2^2 + [d(y1 - alpha y2)]^2. S is built from\n\
                  (omega, V, Theta) and the lattice acts by integer left translations.\n\
                  Erratum: the printed metric has an unbalanced bracket \"[d(y1 - alpha y2]\"; it is\n\
                  read as [d(y1 - alpha y2)] (x) [d(y1 - alpha y2)].",
        params: &[
            ParamSpec {
                key: "p",
                default: "1",
                help: "size of X1, Z1",
            },
            ParamSpec {
                key: "q",
                default: "1",
                help: "size of X2, Z2",
            },
            ParamSpec {
                key: "alpha",
                default: "1",
                help: "real constant of the foliation",
            },
        ],
        expected: &[
            ("omega = printed form", true),
            ("V tangent to the leaves", true),
            ("V involutive", true),
            ("V' Lagrangian", true),
            ("V Lagrangian", true),
            ("Theta nondegenerate", true),
            ("Theta projectable", true),
            ("S^2 = 0", true),
            ("rank S = n", true),
            ("N_S = 0", true),
            ("closed", true),
            ("nondegenerate", true),
            ("compat", true),
            ("Theta roundtrip", true),
            ("Theta positive", true),
            ("J^2 = -Id", true),
            ("omega J-invariant", true),
            ("g positive", true),
            ("g = printed metric", true),
            ("omega lattice-invariant", true),
            ("S lattice-invariant", true),
            ("g lattice-invariant", true),
        ],
        build: heisenberg,
    },
    Scenario {
        name: "fibered_product",
        summary: "fibered product of two copies of TN with Pi = P^ij dy^i ^ dz^j",
        details: "Chart (x, y, z). P_sym(x) symmetric nondegenerate, S dy^i = dz^i. The leaves\n\
                  x = const carry Lambda dz^dy with Lagrangian Lambda_ij z^i z^j / 2. The\n\
                  cross term Lambda_ij z^i y^j is degenerate as a Lagrangian and is expected to fail.",
        params: &[
            ParamSpec {
                key: "n",
                default: "2",
                help: "dimension of N",
            },
            ParamSpec {
                key: "p_sym",
                default: "[[2,1],[1,2]]",
                help: "symmetric matrix in x1..xn (identity if n != 2)",
            },
            ParamSpec {
                key: "t",
                default: "0",
                help: "transversal coefficients, matrix in x1..xn",
            },
        ],
        expected: &[
            ("S(X_i) = 0", true),
            ("S^2 = 0", true),
            ("N_S = 0", true),
            ("Jacobi", true),
            ("S-symmetry", true),
            ("S-isotropy", true),
            ("leaf rank", true),
            ("leafwise Nijenhuis", true),
            ("sharp anticommutes with S", true),
            ("leaf S-invariant", true),
            ("F^2 = 0", true),
            ("rank F = half leaf", true),
            ("leaf form nondegenerate", true),
            ("leaf compat", true),
            ("leaf form = Lambda dz^dy", true),
            ("leaf Lagrangian", true),
            ("omega = d epsilon", true),
            ("epsilon vanishes on V", true),
            ("epsilon = dL o S", true),
            ("Lambda z y regular", false),
        ],
        build: fibered,
    },
    Scenario {
        name: "tangent_lift_negative",
        summary: "tangent lift of a Poisson structure W on N, which is not l.L.P.",
        details: "W = w dq1^dq2 on N = R^2 lifted to TN by its bracket relations. The lift is\n\
                  Poisson and zero-related, but with the canonical S it fails the symmetry axiom\n\
                  P(alpha, beta o S) = P(beta, alpha o S) whenever W != 0; its mixed block is\n\
                  antisymmetric where the axiom needs it symmetric.",
        params: &[ParamSpec {
            key: "w",
            default: "1 + q2^2",
            help: "coefficient of dq1^dq2, a function of q",
        }],
        expected: &[
            ("{f, g} = 0", true),
            ("{alpha^, f} = (#alpha) f", true),
            ("{alpha^, beta^} = [alpha, beta]^", true),
            ("Jacobi", true),
            ("lLP Jacobi", true),
            ("lLP S-symmetry", false),
            ("lLP S-isotropy", true),
            ("lLP leaf rank", true),
            ("lLP leafwise Nijenhuis", true),
            ("lLP sharp anticommutes with S", false),
            ("no second-order Hamiltonian", true),
            ("zero-related", true),
            ("mixed block symmetric", false),
            ("uu block antisymmetric", true),
            ("rank P = 2 rank(P^ij)", true),
            ("l.L.P. with canonical S", false),
        ],
        build: tangent_lift_negative,
    },
    Scenario {
        name: "circle_maslov",
        summary: "first Maslov class of a closed curve in the standard (R^2, du^dq)",
        details: "The curve (a cos t, b sin t) with the flat calibration J = S' - S. The integral of\n\
                  tr(b)/2pi over the loop is compared with the winding of det U and of det^2 U,\n\
                  where U is the unitary frame of the tangent line. The integral equals the det U\n\
                  winding; the det^2 U winding is twice as large, so that comparison is expected\n\
                  to fail (normalization factor 2).",
        params: &[
            ParamSpec {
                key: "a",
                default: "1",
                help: "semi-axis along q",
            },
            ParamSpec {
                key: "b",
                default: "1",
                help: "semi-axis along u",
            },
            ParamSpec {
                key: "turns",
                default: "1",
                help: "number of traversals",
            },
        ],
        expected: &[
            ("immersion rank n", true),
            ("immersion Lagrangian", true),
            ("frame orthonormal", true),
            ("lambda antisymmetric", true),
            ("b symmetric", true),
            ("integral converged", true),
            ("integral is an integer", true),
            ("integral = det U winding", true),
            ("integral = det^2 U winding", false),
        ],
        build: circle_maslov,
    },
    Scenario {
        name: "tn_forms",
        summary: "omega = pi*Phi + d zeta on TN and the vertical correction of a field",
        details: "Phi = phi dq1^dq2 on N = R^2 and zeta = zeta_i dq^i leafwise closed. The local\n\
                  Lagrangian is recovered, and for a field X and base function f the vertical Z with\n\
                  i(X)pi*Phi + i(Z)d''zeta = df is solved and substituted back.",
        params: &[
            ParamSpec {
                key: "phi",
                default: "1",
                help: "coefficient of Phi, a function of q",
            },
            ParamSpec {
                key: "zeta",
                default: "[\"(1 + q1^2)*u1\", \"u2\"]",
                help: "components of zeta",
            },
            ParamSpec {
                key: "x",
                default: "[\"u1\", \"u2\", \"0\", \"0\"]",
                help: "field X",
            },
            ParamSpec {
                key: "f",
                default: "q1*q2",
                help: "base function",
            },
        ],
        expected: &[
            ("Phi closed", true),
            ("zeta leafwise closed", true),
            ("omega nondegenerate", true),
            ("closed", true),
            ("nondegenerate", true),
            ("compat", true),
            ("lambda symmetric", true),
            ("d''phi = zeta", true),
            ("d alpha = Phi", true),
            ("omega = Phi + omega_phi", true),
            ("omega = omega_L", true),
            ("Z vertical", true),
            ("Psi + i(Z)d''zeta = df", true),
            ("S(X + Z) = SX", true),
        ],
        build: tn_forms,
    },
    Scenario {
        name: "lagrangian",
        summary: "Lagrangian symplectic form, energy field and almost product of a chart Lagrangian",
        details: "Any nondegenerate L(q, u): omega_L from d(dL o S) and from the explicit\n\
                  coordinate formula, compatibility with the canonical S, the energy field X with\n\
                  i(X)omega = -dE, SX = E and F = L_X S with F^2 = Id.",
        params: &[
            ParamSpec {
                key: "n",
                default: "2",
                help: "base dimension",
            },
            ParamSpec {
                key: "L",
                default: "(u1^2+u2^2)/2 + q1*u2 + q1^2*q2",
                help: "Lagrangian in q1..qn, u1..un",
            },
        ],
        expected: &[
            ("S^2 = 0", true),
            ("rank S = n", true),
            ("N_S = 0", true),
            ("Hessian rank n", true),
            ("omega routes agree", true),
            ("closed", true),
            ("nondegenerate", true),
            ("compat", true),
            ("lambda symmetric", true),
            ("Theta = u-Hessian", true),
            ("i(X)omega = -dh", true),
            ("SX = E", true),
            ("F^2 = Id", true),
            ("F V' = -V'", true),
            ("V' closed form", true),
        ],
        build: lagrangian,
    },
];

fn entries(m: &ExprMatrix) -> Vec<Expr> {
    m.iter().flatten().cloned().collect()
}

fn form_residual(a: &PForm, b: &PForm) -> Vec<Expr> {
    a.sub(b).terms().map(|(_, c)| c.clone()).collect()
}

fn jacobian(map: &[Expr], dim: usize) -> ExprMatrix {
    map.iter().map(|m| (0..dim).map(|j| m.diff(j)).collect()).collect()
}

fn at_image(m: &ExprMatrix, map: &[Expr]) -> ExprMatrix {
    m.iter().map(|r| r.iter().map(|e| e.compose(map)).collect()).collect()
}

/// `Dφ · S = (S ∘ φ) · Dφ`.
fn end_invariant(name: &str, s: &EndField, map: &[Expr], cfg: &SampleConfig) -> CheckReport {
    let jac = jacobian(map, s.coords().dim());
    let lhs = mat_mul(&jac, s.matrix());
    let rhs = mat_mul(&at_image(s.matrix(), map), &jac);
    let res: Vec<Expr> = entries(&lhs)
        .into_iter()
        .zip(entries(&rhs))
        .map(|(a, b)| a - b)
        .collect();
    check_zero(name, s.coords(), &res, cfg)
}

/// `Dφᵀ · (G ∘ φ) · Dφ = G`.
fn metric_invariant(name: &str, chart: &CoordSystem, g: &ExprMatrix, map: &[Expr], cfg: &SampleConfig) -> CheckReport {
    let jac = jacobian(map, chart.dim());
    let pulled = mat_mul(&transpose(&jac), &mat_mul(&at_image(g, map), &jac));
    let res: Vec<Expr> = entries(&pulled)
        .into_iter()
        .zip(entries(g))
        .map(|(a, b)| a - b)
        .collect();
    check_zero(name, chart, &res, cfg)
}

fn integer_of(key: &str, e: &Expr) -> Result<i64, BuildError> {
    let v = e.simplify();
    match v.as_rational() {
        Some(r) if r.is_integer() => r.to_integer().try_into().map_err(|_| bad(key, "integer out of range")),
        _ => Err(bad(key, "expected integer entries")),
    }
}

fn require_constant(key: &str, e: &Expr) -> Result<Expr, BuildError> {
    let e = e.simplify();
    if e.is_constant() {
        Ok(e)
    } else {
        Err(bad(key, "expected a constant"))
    }
}

fn positive_size(p: &Params, key: &str, default: usize, max: usize) -> Result<usize, BuildError> {
    let n = p.usize(key, default)?;
    if n == 0 || n > max {
        return Err(bad(key, format!("must be between 1 and {max}")));
    }
    Ok(n)
}

fn standard_omega(chart: &CoordSystem) -> PForm {
    let split = chart.get_split().expect("split chart");
    split
        .base
        .iter()
        .zip(&split.fiber)
        .fold(PForm::zero(chart, 2), |w, (&q, &u)| {
            w.add(&PForm::dx(chart, u).wedge(&PForm::dx(chart, q)))
        })
}

fn torus_oscillator(p: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let n = positive_size(p, "n", 2, 6)?;
    let chart = CoordSystem::tangent(n);
    let alpha = match p.matrix("alpha", &chart)? {
        Some(m) => m,
        None if n == 2 => vec![vec![Expr::int(2), Expr::zero()], vec![Expr::zero(), Expr::int(3)]],
        None => linalg::identity(n),
    };
    if alpha.len() != n || alpha.iter().any(|r| r.len() != n) {
        return Err(bad("alpha", format!("expected a {n}x{n} matrix")));
    }
    let alpha: ExprMatrix = alpha
        .iter()
        .map(|r| r.iter().map(|e| require_constant("alpha", e)).collect())
        .collect::<Result<_, _>>()?;
    for i in 0..n {
        for j in i + 1..n {
            if !(&alpha[i][j] - &alpha[j][i]).simplify().is_zero() {
                return Err(bad("alpha", "matrix must be symmetric"));
            }
        }
    }
    let shift = |key: &str| -> Result<Vec<i64>, BuildError> {
        match p.list(key, &chart)? {
            None => Ok(vec![1; n]),
            Some(v) if v.len() == n => v.iter().map(|e| integer_of(key, e)).collect(),
            Some(_) => Err(bad(key, format!("expected {n} entries"))),
        }
    };
    let (m, s) = (shift("shift_q")?, shift("shift_u")?);

    let q = |i: usize| Expr::var(i);
    let u = |i: usize| Expr::var(n + i);
    let mut terms: Vec<Expr> = (0..n).map(|i| u(i).powi(2)).collect();
    for i in 0..n {
        for j in 0..n {
            terms.push(Expr::product([alpha[i][j].clone(), q(i), q(j)]));
        }
    }
    let l = (Expr::frac(1, 2) * Expr::sum(terms)).simplify();
    let la = LagrangianChart::new(&chart, l)?;

    let mut r = ComplianceReport::new();
    r.push(la.check_nondegenerate(cfg));
    let omega = lagrangian_form(&la, cfg)?;
    r.push(check_zero(
        "omega = sum du^dq",
        &chart,
        &form_residual(&omega, &standard_omega(&chart)),
        cfg,
    ));
    let s_can = canonical_s(&chart, cfg)?.s;
    r.extend(check_compat(&omega, &s_can, cfg));
    let map: Vec<Expr> = (0..n)
        .map(|i| q(i) + Expr::int(m[i]))
        .chain((0..n).map(|i| u(i) + Expr::int(s[i])))
        .collect();
    r.extend(transition_check(&la, &la, &map, cfg)?);
    r.push(end_invariant("S invariant under shifts", &s_can, &map, cfg));
    let (e, x) = energy_hamiltonian(&la, cfg)?;
    r.push(check_hamiltonian(&omega, &x, &e, cfg));
    r.push(is_second_order(&x, &s_can, SecondOrderMode::TangentBundle, cfg)?);
    Ok(Outcome {
        checks: r,
        ..Outcome::default()
    })
}

/// Index layout of the chart `(X1, y1, Z1, X2, y2, Z2)`.
struct HeisenbergChart {
    p: usize,
    q: usize,
}

impl HeisenbergChart {
    fn x1(&self, k: usize) -> usize {
        k
    }
    fn y1(&self) -> usize {
        self.p
    }
    fn z1(&self, k: usize) -> usize {
        self.p + 1 + k
    }
    fn x2(&self, k: usize) -> usize {
        2 * self.p + 1 + k
    }
    fn y2(&self) -> usize {
        2 * self.p + 1 + self.q
    }
    fn z2(&self, k: usize) -> usize {
        2 * self.p + 2 + self.q + k
    }
    fn dim(&self) -> usize {
        2 * (self.p + self.q + 1)
    }

    fn names(&self) -> Vec<String> {
        let vec_names = |stem: &str, len: usize| -> Vec<String> {
            if len == 1 {
                vec![stem.to_string()]
            } else {
                (1..=len).map(|k| format!("{stem}_{k}")).collect()
            }
        };
        let mut out = vec_names("X1", self.p);
        out.push("y1".into());
        out.extend(vec_names("Z1", self.p));
        out.extend(vec_names("X2", self.q));
        out.push("y2".into());
        out.extend(vec_names("Z2", self.q));
        out
    }
}

fn heisenberg(params: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let p = positive_size(params, "p", 1, 8)?;
    let q = positive_size(params, "q", 1, 8)?;
    let h = HeisenbergChart { p, q };
    let chart = CoordSystem::new(&h.names())?;
    let alpha = require_constant("alpha", &params.expr("alpha", "1", &CoordSystem::new::<&str>(&[])?)?)?;
    let n = p + q + 1;
    let dx = |i: usize| PForm::dx(&chart, i);
    let var = Expr::var;

    // invariant coframe: dX1, dX2, d(y1 - αy2), dZ1 - X1 dy1, dZ2 - X2 dy2, dy2
    let mut theta: Vec<PForm> = Vec::with_capacity(2 * n);
    theta.extend((0..p).map(|k| dx(h.x1(k))));
    theta.extend((0..q).map(|k| dx(h.x2(k))));
    theta.push(dx(h.y1()).sub(&dx(h.y2()).scale(&alpha)));
    theta.extend((0..p).map(|k| dx(h.z1(k)).sub(&dx(h.y1()).scale(&var(h.x1(k))))));
    theta.extend((0..q).map(|k| dx(h.z2(k)).sub(&dx(h.y2()).scale(&var(h.x2(k))))));
    theta.push(dx(h.y2()));

    let coframe: ExprMatrix = theta.iter().map(PForm::components).collect();
    let frame = linalg::simplify_matrix(
        &linalg::inverse(&coframe).ok_or_else(|| BuildError::Failed("coframe is singular".into()))?,
    );
    let column = |a: usize| VectorField::new(&chart, (0..h.dim()).map(|i| frame[i][a].clone()).collect());
    let v_prime: Vec<VectorField> = (0..n).map(column).collect();
    let v: Vec<VectorField> = (n..2 * n).map(column).collect();
    let split = Splitting::new(v_prime.clone(), v.clone())?;

    let omega = (0..n)
        .fold(PForm::zero(&chart, 2), |w, a| w.add(&theta[a].wedge(&theta[a + n])))
        .simplify();
    let mut printed = dx(h.y1()).wedge(&dx(h.y2()));
    for k in 0..p {
        printed = printed.add(&dx(h.x1(k)).wedge(&dx(h.z1(k)).sub(&dx(h.y1()).scale(&var(h.x1(k))))));
    }
    for k in 0..q {
        printed = printed.add(&dx(h.x2(k)).wedge(&dx(h.z2(k)).sub(&dx(h.y2()).scale(&var(h.x2(k))))));
    }

    let mut r = ComplianceReport::new();
    r.push(check_zero(
        "omega = printed form",
        &chart,
        &form_residual(&omega, &printed),
        cfg,
    ));
    // the leaves X1, X2, y1 - αy2 = const
    let leaf_defs: Vec<Expr> = theta[..n]
        .iter()
        .flat_map(|t| v.iter().map(|e| t.eval_fields(&[e])))
        .collect();
    r.push(check_zero("V tangent to the leaves", &chart, &leaf_defs, cfg));
    let mut brackets = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let b = v[i].bracket(&v[j]);
            brackets.extend(theta[..n].iter().map(|t| t.eval_fields(&[&b])));
        }
    }
    r.push(check_zero("V involutive", &chart, &brackets, cfg));

    let theta_metric_block = MetricBlock::new(v_prime, linalg::identity(n))?;
    let (s, tr) = tangent_from_metric(&omega, &split, &theta_metric_block, cfg)?;
    r.extend(tr);
    let back = theta_metric(&omega, &s.s, &split, cfg)?;
    r.push(check_points(
        "Theta positive",
        &chart,
        &cfg.points(h.dim()),
        0.0,
        cfg.mode,
        |x| {
            if linalg::positive_definite(&back.at(x)) {
                0.0
            } else {
                1.0
            }
        },
    ));

    let cal = calibrate(&s, &split, &omega, false, cfg)?;
    for name in ["J^2 = -Id", "omega J-invariant"] {
        r.push(cal.report.get(name).expect("calibration check").clone());
    }
    let gm = cal.g.m.clone();
    r.push(check_points(
        "g positive",
        &chart,
        &cfg.points(h.dim()),
        0.0,
        cfg.mode,
        |x| {
            if linalg::positive_definite(&linalg::eval_matrix(&gm, x)) {
                0.0
            } else {
                1.0
            }
        },
    ));
    let printed_g = linalg::simplify_matrix(&mat_mul(&transpose(&coframe), &coframe));
    let gres: Vec<Expr> = entries(&cal.g.m)
        .into_iter()
        .zip(entries(&printed_g))
        .map(|(a, b)| a - b)
        .collect();
    r.push(check_zero("g = printed metric", &chart, &gres, cfg));

    // integer left translation: X ↦ X + A, y ↦ y + b, Z ↦ Z + A y + C
    let mut map: Vec<Expr> = (0..h.dim()).map(var).collect();
    map[h.y1()] = var(h.y1()) + Expr::one();
    map[h.y2()] = var(h.y2()) + Expr::one();
    for k in 0..p {
        map[h.x1(k)] = var(h.x1(k)) + Expr::one();
        map[h.z1(k)] = var(h.z1(k)) + var(h.y1()) + Expr::one();
    }
    for k in 0..q {
        map[h.x2(k)] = var(h.x2(k)) + Expr::one();
        map[h.z2(k)] = var(h.z2(k)) + var(h.y2()) + Expr::one();
    }
    let pulled = omega.pullback(&chart, &map);
    r.push(check_zero(
        "omega lattice-invariant",
        &chart,
        &form_residual(&pulled, &omega),
        cfg,
    ));
    r.push(end_invariant("S lattice-invariant", &s.s, &map, cfg));
    r.push(metric_invariant("g lattice-invariant", &chart, &printed_g, &map, cfg));
    Ok(Outcome {
        checks: r,
        ..Outcome::default()
    })
}

fn square(key: &str, m: Vec<Vec<Expr>>, n: usize) -> Result<Vec<Vec<Expr>>, BuildError> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(bad(key, format!("expected a {n}x{n} matrix")));
    }
    Ok(m)
}

fn fibered(p: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let n = positive_size(p, "n", 2, 6)?;
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let xc = CoordSystem::new(&names)?;
    let p_sym = match p.matrix("p_sym", &xc)? {
        Some(m) => square("p_sym", m, n)?,
        None if n == 2 => vec![vec![Expr::int(2), Expr::one()], vec![Expr::one(), Expr::int(2)]],
        None => linalg::identity(n),
    };
    let t = match p.matrix("t", &xc)? {
        Some(m) => square("t", m, n)?,
        None => linalg::zeros(n, n),
    };
    let fp = fibered_product(&p_sym, &t, cfg)?;
    let mut r = fp.report.clone();
    let x0 = cfg.points(fp.chart.dim()).remove(0);
    r.extend(fp.leaf_witness(&x0, cfg)?);
    r.push(fp.zy_lagrangian.clone());
    Ok(Outcome {
        checks: r,
        ..Outcome::default()
    })
}

fn tangent_lift_negative(p: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let chart = CoordSystem::tangent(2);
    let w = p.expr("w", "1 + q2^2", &chart)?;
    if w.free_vars().iter().any(|&v| v >= 2) {
        return Err(bad("w", "must be a function of q1, q2"));
    }
    let wb = crate::tensor::Bivector::from_terms(&chart, [(0, 1, w.clone())]);
    let lift = tangent_lift(&wb, cfg)?;
    let mut r = lift.report.clone();
    let s = canonical_s(&chart, cfg)?.s;
    for c in llp_check(&lift.p.p, &s, cfg).to_compliance().checks {
        let name = format!("lLP {}", c.name);
        r.push(c.renamed(&name));
    }
    r.push(lift_obstruction(&lift.w, cfg)?);
    r.extend(tn_poisson_check(&lift.p.p, cfg)?);
    let mut expected = Vec::new();
    if w.simplify().is_zero() {
        // the zero lift is trivially l.L.P.
        for name in [
            "lLP S-symmetry",
            "lLP sharp anticommutes with S",
            "mixed block symmetric",
            "l.L.P. with canonical S",
        ] {
            expected.push((name.to_string(), true));
        }
    }
    Ok(Outcome {
        checks: r,
        expected,
        maslov: None,
    })
}

fn circle_maslov(p: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let tc = CoordSystem::new(&["t"])?;
    let a = require_constant("a", &p.expr("a", "1", &tc)?)?;
    let b = require_constant("b", &p.expr("b", "1", &tc)?)?;
    if a.eval(&[]) == 0.0 || b.eval(&[]) == 0.0 {
        return Err(bad("a", "semi-axes must be nonzero"));
    }
    let turns = positive_size(p, "turns", 1, 16)?;
    let cal = Calibrated::standard(1, cfg)?;
    let t = Expr::var(0);
    let l = FramedLagrangian::new(&tc, &cal.chart, vec![a * t.cos(), b * t.sin()])?;
    let spec = LoopSpec::default()
        .with_period(2.0 * PI * turns as f64)
        .with_steps(720 * turns);

    let mut r = l.check(&cal, cfg);
    let mode = ConnectionMode::Auto;
    r.extend(check_gauss_weingarten(&l, &cal, &mode, cfg)?);
    let m = first_maslov_loop(&l, &cal, &mode, &spec, cfg)?;
    let w = winding_oracle(&l, &cal, &spec)?;
    let tol = 1e-6;
    r.push(CheckReport::structural("integral converged", m.converged).with_note(format!("{} intervals", m.intervals)));
    let frac = (m.value - m.value.round()).abs();
    r.push(CheckReport::new("integral is an integer", frac <= tol, Some(frac), tol));
    let d1 = (m.value - w.det).abs();
    r.push(CheckReport::new("integral = det U winding", d1 <= tol, Some(d1), tol));
    let d2 = (m.value - w.det_squared).abs();
    r.push(
        CheckReport::new("integral = det^2 U winding", d2 <= tol, Some(d2), tol)
            .with_note("det^2 U winds twice as often as det U"),
    );
    Ok(Outcome {
        checks: r,
        expected: Vec::new(),
        maslov: Some(MaslovSummary {
            maslov_integral: m.value,
            winding: w.det_squared,
            winding_det: w.det,
            agreement: d2 <= tol,
            crossings: w.crossings.len(),
        }),
    })
}

fn tn_forms(p: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let chart = CoordSystem::tangent(2);
    let split = chart.get_split().expect("tangent chart").clone();
    let phi_c = p.expr("phi", "1", &chart)?;
    let zeta_c = match p.list("zeta", &chart)? {
        Some(v) if v.len() == 2 => v,
        Some(_) => return Err(bad("zeta", "expected 2 components")),
        None => vec![p.expr("zeta", "(1 + q1^2)*u1", &chart)?, Expr::var(3)],
    };
    let x_c = match p.list("x", &chart)? {
        Some(v) if v.len() == 4 => v,
        Some(_) => return Err(bad("x", "expected 4 components")),
        None => vec![Expr::var(2), Expr::var(3), Expr::zero(), Expr::zero()],
    };
    let f = p.expr("f", "q1*q2", &chart)?;
    let phi = PForm::dx(&chart, 0).wedge(&PForm::dx(&chart, 1)).scale(&phi_c);
    let zeta = PForm::one_form(
        &chart,
        vec![zeta_c[0].clone(), zeta_c[1].clone(), Expr::zero(), Expr::zero()],
    );
    let tn = assemble_tn_form(&phi, &zeta, cfg)?;
    let x = VectorField::new(&chart, x_c);
    let z = solve_vertical_correction(&tn, &x, &f, cfg)?;

    let mut r = tn.report.clone();
    let zq: Vec<Expr> = split.base.iter().map(|&q| z.comps()[q].clone()).collect();
    r.push(check_zero("Z vertical", &chart, &zq, cfg));
    let w = phi.matrix();
    let res: Vec<Expr> = split
        .base
        .iter()
        .enumerate()
        .map(|(i, &qi)| {
            let psi = Expr::sum((0..4).map(|k| &x.comps()[k] * &w[k][qi]));
            let dz = Expr::sum(split.fiber.iter().map(|&u| &z.comps()[u] * &zeta_c[i].diff(u)));
            psi + dz - f.diff(qi)
        })
        .collect();
    r.push(check_zero("Psi + i(Z)d''zeta = df", &chart, &res, cfg));
    let s = canonical_s(&chart, cfg)?.s;
    let sx: Vec<Expr> = s.apply(&x.add(&z)).sub(&s.apply(&x)).comps().to_vec();
    r.push(check_zero("S(X + Z) = SX", &chart, &sx, cfg));
    Ok(Outcome {
        checks: r,
        ..Outcome::default()
    })
}

fn lagrangian(p: &Params, cfg: &SampleConfig) -> Result<Outcome, BuildError> {
    let n = positive_size(p, "n", 2, 6)?;
    let chart = CoordSystem::tangent(n);
    let default = if n == 2 {
        "(u1^2+u2^2)/2 + q1*u2 + q1^2*q2".to_string()
    } else {
        (1..=n).map(|i| format!("u{i}^2/2")).collect::<Vec<_>>().join(" + ")
    };
    let l = p.expr("L", &default, &chart)?;
    let la = LagrangianChart::new(&chart, l)?;
    let s = canonical_s(&chart, cfg)?.s;

    let mut r = check_tangent(&s, cfg);
    let nd = la.check_nondegenerate(cfg);
    let degenerate = !nd.pass;
    r.push(nd);
    if degenerate {
        return Ok(Outcome {
            checks: r,
            ..Outcome::default()
        });
    }
    let omega = lagrangian_form(&la, cfg)?;
    let explicit = lagrangian_form_explicit(&la);
    r.push(check_zero(
        "omega routes agree",
        &chart,
        &form_residual(&omega, &explicit),
        cfg,
    ));
    r.extend(check_compat(&omega, &s, cfg));
    let th = theta_metric(&omega, &s, &Splitting::coordinate(&chart)?, cfg)?;
    let tres: Vec<Expr> = entries(&th.m)
        .into_iter()
        .zip(entries(&la.hessian))
        .map(|(a, b)| a - b)
        .collect();
    r.push(check_zero("Theta = u-Hessian", &chart, &tres, cfg));
    let (e, x) = energy_hamiltonian(&la, cfg)?;
    r.push(check_hamiltonian(&omega, &x, &e, cfg));
    r.push(is_second_order(&x, &s, SecondOrderMode::TangentBundle, cfg)?);
    r.extend(almost_product(&x, &s, cfg)?.report);
    Ok(Outcome {
        checks: r,
        ..Outcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::super::{describe, list_scenarios, run_scenario, RunConfig};
    use super::*;

    fn quick() -> RunConfig {
        RunConfig {
            samples: 20,
            timing: false,
            ..RunConfig::default()
        }
    }

    #[test]
    fn every_default_scenario_meets_its_expectations() {
        for s in list_scenarios() {
            let rep = run_scenario(s.name, &quick(), &Params::new()).unwrap();
            let bad: Vec<_> = rep.mismatches().map(|c| (&c.name, c.pass, &c.note)).collect();
            assert!(rep.passed(), "{}: {bad:?}", s.name);
            let names: Vec<&str> = rep.checks.iter().map(|c| c.name.as_str()).collect();
            let listed: Vec<&str> = s.expected.iter().map(|(n, _)| *n).collect();
            assert_eq!(names, listed, "{}", s.name);
        }
    }

    #[test]
    fn catalog_and_descriptions() {
        let names: Vec<&str> = list_scenarios().iter().map(|s| s.name).collect();
        for n in [
            "torus_oscillator",
            "heisenberg",
            "fibered_product",
            "tangent_lift_negative",
            "circle_maslov",
            "tn_forms",
        ] {
            assert!(names.contains(&n), "{n}");
        }
        let d = describe("tangent_lift_negative").unwrap();
        assert!(d.contains("symmetry axiom"));
        assert!(d.contains("FAIL"));
        assert!(describe("heisenberg").unwrap().contains("unbalanced bracket"));
        assert!(matches!(describe("nosuch"), Err(HarnessError::UnknownScenario(_))));
    }

    fn run(name: &str, kv: &[&str]) -> Result<crate::harness::Report, HarnessError> {
        let mut p = Params::new();
        for a in kv {
            p.parse_assignment(a).unwrap();
        }
        run_scenario(name, &quick(), &p)
    }

    #[test]
    fn json_is_byte_identical_across_runs() {
        let a = run("heisenberg", &[]).unwrap().to_json();
        let b = run("heisenberg", &[]).unwrap().to_json();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["scenario"], "heisenberg");
        assert_eq!(v["config"]["box"], serde_json::json!([-1.0, 1.0]));
        assert!(v["ms"].is_null());
        assert_eq!(v["verdict"], "pass");
        for key in ["name", "pass", "max_residual", "witness"] {
            assert!(v["checks"][0].get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn heisenberg_variants() {
        for kv in [&["p=2", "q=1"][..], &["alpha=1/2"], &["q=2", "alpha=-3"]] {
            let r = run("heisenberg", kv).unwrap();
            assert!(r.passed(), "{kv:?}: {:?}", r.mismatches().collect::<Vec<_>>());
        }
    }

    #[test]
    fn circle_variants() {
        let r = run("circle_maslov", &["a=2", "b=1/2"]).unwrap();
        assert!(r.passed());
        let m = r.maslov.unwrap();
        assert!((m.maslov_integral + 1.0).abs() < 1e-6);
        assert!(!m.agreement);
        let r = run("circle_maslov", &["turns=2"]).unwrap();
        assert!(r.passed());
        let m = r.maslov.unwrap();
        assert!((m.maslov_integral + 2.0).abs() < 1e-6);
        assert!((m.winding + 4.0).abs() < 1e-6);
    }

    #[test]
    fn zero_lift_flips_expectations() {
        let r = run("tangent_lift_negative", &["w=0"]).unwrap();
        assert!(r.passed(), "{:?}", r.mismatches().collect::<Vec<_>>());
        let c = r.checks.iter().find(|c| c.name == "lLP S-symmetry").unwrap();
        assert!(c.pass && c.expected);
    }

    #[test]
    fn mismatch_and_errors() {
        // singular P_sym: the construction itself fails
        let r = run("fibered_product", &["p_sym=[[1,0],[0,0]]"]).unwrap();
        assert!(!r.passed());
        assert_eq!(r.checks[0].name, "scenario built");
        assert!(matches!(run("nosuch", &[]), Err(HarnessError::UnknownScenario(_))));
        assert!(matches!(run("heisenberg", &["r=1"]), Err(HarnessError::Param { .. })));
        assert!(matches!(run("heisenberg", &["p=0"]), Err(HarnessError::Param { .. })));
        assert!(matches!(
            run("torus_oscillator", &["alpha=[[1,2],[3,4]]"]),
            Err(HarnessError::Param { .. })
        ));
        assert!(matches!(
            run("torus_oscillator", &["shift_q=[1/2, 1]"]),
            Err(HarnessError::Param { .. })
        ));
        let cfg = RunConfig { samples: 0, ..quick() };
        assert!(matches!(
            run_scenario("heisenberg", &cfg, &Params::new()),
            Err(HarnessError::Config(_))
        ));
        let cfg = RunConfig {
            lo: 1.0,
            hi: -1.0,
            ..quick()
        };
        assert!(matches!(
            run_scenario("heisenberg", &cfg, &Params::new()),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn lagrangian_with_degenerate_input_reports_failure() {
        let r = run("lagrangian", &["n=1", "L=q1*u1"]).unwrap();
        assert!(!r.passed());
        assert!(r.checks.iter().any(|c| c.name == "Hessian rank n" && !c.pass));
    }
}
