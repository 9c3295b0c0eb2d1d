use super::MaslovError;
use crate::linalg::{self, mat_mul, simplify_matrix, transpose, ExprMatrix};
use crate::report::{CheckReport, ComplianceReport};
use crate::sampling::{check_points, check_zero, SampleConfig};
use crate::structures::{check_compat, TangentStructure};
use crate::symexpr::{CoordSystem, Expr};
use crate::tensor::{EndField, MetricBlock, PForm, Splitting, VectorField};

/// `J = S′ - S` with its metric `g(X, Y) = ω(X, JY)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub chart: CoordSystem,
    pub omega: PForm,
    pub s: EndField,
    pub v_prime: Vec<VectorField>,
    /// Inverse of `S|V′`, extended by zero on `V′`.
    pub s_prime: EndField,
    pub j: EndField,
    /// `g` on the coordinate frame.
    pub g: MetricBlock,
    pub elliptic: bool,
    pub report: ComplianceReport,
}

fn sym_residual(m: &ExprMatrix) -> Vec<Expr> {
    let n = m.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(&m[i][j] - &m[j][i]);
        }
    }
    out
}

fn entries(m: &ExprMatrix) -> Vec<Expr> {
    m.iter().flatten().cloned().collect()
}

/// Build `S′`, `J` and `g` from a compatible pair `(ω, S)` and a Lagrangian
/// complement `V′` of `im S`. With `require_positive`, a non-elliptic input is
/// an error; otherwise it is recorded in `elliptic`.
pub fn calibrate(
    s: &TangentStructure,
    v_prime: &Splitting,
    omega: &PForm,
    require_positive: bool,
    cfg: &SampleConfig,
) -> Result<Calibrated, MaslovError> {
    let chart = omega.coords().clone();
    if s.chart != chart || *v_prime.coords() != chart {
        return Err(MaslovError::Invalid("omega, S and V' must share a chart".into()));
    }
    let dim = chart.dim();
    let mut report = check_compat(omega, &s.s, cfg);
    if let Some(c) = report.first_failure() {
        return Err(crate::structures::StructError::Precondition(Box::new(c.clone())).into());
    }

    let frame = &v_prime.v_prime;
    let mut lag = Vec::new();
    for a in 0..frame.len() {
        for b in a + 1..frame.len() {
            lag.push(omega.eval_fields(&[&frame[a], &frame[b]]));
        }
    }
    let c = check_zero("V' Lagrangian", &chart, &lag, cfg);
    if !c.pass {
        return Err(crate::structures::StructError::Precondition(Box::new(c)).into());
    }
    report.push(c);

    let sframe: Vec<VectorField> = frame.iter().map(|e| s.s.apply(e).simplify()).collect();
    let cols: Vec<&VectorField> = frame.iter().chain(&sframe).collect();
    let b: ExprMatrix = (0..dim)
        .map(|i| cols.iter().map(|f| f.comps()[i].clone()).collect())
        .collect();
    let inv = linalg::inverse(&b).ok_or_else(|| MaslovError::Degenerate {
        what: "V' + S V'".into(),
        witness: None,
    })?;
    // S′ sends S e_a to e_a and kills e_a
    let zero = VectorField::zero(&chart);
    let targets: Vec<&VectorField> = frame.iter().map(|_| &zero).chain(frame.iter()).collect();
    let z: ExprMatrix = (0..dim)
        .map(|i| targets.iter().map(|f| f.comps()[i].clone()).collect())
        .collect();
    let s_prime = EndField::from_matrix(&chart, simplify_matrix(&mat_mul(&z, &inv)));
    let j = s_prime.sub(&s.s).simplify();
    let w = omega.matrix();
    let jm = j.matrix().clone();
    let g = simplify_matrix(&mat_mul(&w, &jm));

    let id = linalg::identity(dim);
    let j2: Vec<Expr> = entries(&mat_mul(&jm, &jm))
        .into_iter()
        .zip(entries(&id))
        .map(|(a, b)| a + b)
        .collect();
    report.push(check_zero("J^2 = -Id", &chart, &j2, cfg));
    let jwj = mat_mul(&transpose(&jm), &mat_mul(&w, &jm));
    let inv_res: Vec<Expr> = entries(&jwj).into_iter().zip(entries(&w)).map(|(a, b)| a - b).collect();
    report.push(check_zero("omega J-invariant", &chart, &inv_res, cfg));
    report.push(check_zero("g symmetric", &chart, &sym_residual(&g), cfg));
    report.push(check_zero(
        "S' compat",
        &chart,
        &sym_residual(&mat_mul(&w, s_prime.matrix())),
        cfg,
    ));
    report.push(check_zero("S'^2 = 0", &chart, &entries(s_prime.square().matrix()), cfg));

    let positive = check_points("g positive", &chart, &cfg.points(dim), 0.0, cfg.mode, |x| {
        if linalg::positive_definite(&linalg::eval_matrix(&g, x)) {
            0.0
        } else {
            1.0
        }
    });
    let elliptic = positive.pass;
    if require_positive && !elliptic {
        let witness = positive
            .witness
            .as_ref()
            .map(|w| chart.names().iter().map(|n| w[n]).collect())
            .unwrap_or_default();
        return Err(MaslovError::NotElliptic { witness });
    }
    report.push(if require_positive {
        positive
    } else {
        CheckReport::structural("g positive", true).with_note(if elliptic {
            "elliptic"
        } else {
            "indefinite, not required"
        })
    });

    let coord_frame = (0..dim).map(|i| VectorField::coordinate(&chart, i)).collect();
    Ok(Calibrated {
        g: MetricBlock::new(coord_frame, g)?,
        chart,
        omega: omega.clone(),
        s: s.s.clone(),
        v_prime: frame.clone(),
        s_prime,
        j,
        elliptic,
        report,
    })
}

impl Calibrated {
    /// `ω = Σ du^i∧dq^i` with canonical `S` and `V′ = span ∂q`.
    pub fn standard(n: usize, cfg: &SampleConfig) -> Result<Self, MaslovError> {
        let chart = CoordSystem::tangent(n);
        let omega = (0..n).fold(PForm::zero(&chart, 2), |w, i| {
            w.add(&PForm::dx(&chart, n + i).wedge(&PForm::dx(&chart, i)))
        });
        let s = crate::structures::canonical_s(&chart, cfg)?;
        calibrate(&s, &Splitting::coordinate(&chart)?, &omega, true, cfg)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
}
