use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use super::frames::{gw_along, ConnectionMode, FramedLagrangian};
use super::{Calibrated, MaslovError};
use crate::quadrature::adaptive_simpson;
use crate::sampling::SampleConfig;
use crate::scalar::Dual;
use crate::symexpr::Expr;

/// How a closed loop is traced through the parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSpec {
    /// Parameter values as expressions in the loop variable `s` (variable 0).
    /// `None` means the parameter domain is itself the loop.
    pub curve: Option<Vec<Expr>>,
    pub start: f64,
    pub period: f64,
    /// Phase-unwrapping resolution of the winding oracle.
    pub steps: usize,
}

impl Default for LoopSpec {
    fn default() -> Self {
        LoopSpec {
            curve: None,
            start: 0.0,
            period: 2.0 * PI,
            steps: 720,
        }
    }
}

impl LoopSpec {
    pub fn with_curve(mut self, curve: Vec<Expr>) -> Self {
        self.curve = Some(curve);
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = period;
        self
    }

    pub fn with_start(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    /// Parameter point and velocity at `s`.
    fn at(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.curve {
            None => (vec![s], vec![1.0]),
            Some(c) => (
                c.iter().map(|e| e.eval(&[s])).collect(),
                c.iter().map(|e| e.diff(0).eval(&[s])).collect(),
            ),
        }
    }

    fn validate(&self, l: &FramedLagrangian) -> Result<(), MaslovError> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(MaslovError::Invalid("period must be positive".into()));
        }
        if self.steps < 4 {
            return Err(MaslovError::Invalid("winding needs at least 4 steps".into()));
        }
        match &self.curve {
            None if l.n() != 1 => Err(MaslovError::Invalid(
                "a loop curve is required on a multi-parameter domain".into(),
            )),
            Some(c) if c.len() != l.n() => Err(MaslovError::Invalid("loop curve needs one entry per parameter".into())),
            Some(c) if c.iter().flat_map(Expr::free_vars).any(|v| v > 0) => {
                Err(MaslovError::Invalid("loop curve must depend on s only".into()))
            }
            _ => Ok(()),
        }
    }

    /// The immersed loop closes up after one period.
    pub fn check_periodic(&self, l: &FramedLagrangian) -> Result<(), MaslovError> {
        self.validate(l)?;
        for j in 0..16 {
            let s = self.start + self.period * j as f64 / 16.0;
            let a = l.point(&self.at(s).0);
            let b = l.point(&self.at(s + self.period).0);
            let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let residual = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            if !(residual <= 1e-8 * scale) {
                return Err(MaslovError::NotPeriodic {
                    period: self.period,
                    residual,
                    at: s,
                });
            }
        }
        Ok(())
    }
}

/// Loop integral of `(1/2π) b_i^i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaslovIntegral {
    pub value: f64,
    pub intervals: usize,
    pub converged: bool,
}

/// `(1/2π) ∮ b_i^i` by adaptive Simpson (tolerance `1e-8`, at most `10⁶`
/// subintervals).
pub fn first_maslov_loop(
    l: &FramedLagrangian,
    cal: &Calibrated,
    mode: &ConnectionMode,
    spec: &LoopSpec,
    cfg: &SampleConfig,
) -> Result<MaslovIntegral, MaslovError> {
    if l.ambient != cal.chart {
        return Err(MaslovError::Invalid("immersion and calibration charts differ".into()));
    }
    spec.check_periodic(l)?;
    let res = mode.resolve(cal, cfg)?;
    let failure: RefCell<Option<MaslovError>> = RefCell::new(None);
    let f = |s: f64| {
        let (t, v) = spec.at(s);
        let duals: Vec<Dual> = t.iter().zip(&v).map(|(&a, &b)| Dual { v: a, d: vec![b] }).collect();
        match gw_along(l, cal, &res, &duals, 1) {
            Ok(g) => g.trace_b(0) / (2.0 * PI),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let out = adaptive_simpson(f, spec.start, spec.start + spec.period, 1e-8, 1_000_000);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(MaslovIntegral {
        value: out.value,
        intervals: out.intervals,
        converged: out.converged,
    })
}

/// Winding numbers of `det U` and `det² U` around a loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Winding {
    pub det_squared: f64,
    pub det: f64,
    /// Loop parameters where the tangent space meets the vertical fiber.
    pub crossings: Vec<f64>,
    pub steps: usize,
}

fn unitary_at(l: &FramedLagrangian, cal: &Calibrated, t: &[f64]) -> Result<DMatrix<Complex<f64>>, MaslovError> {
    let n = l.n();
    let x = l.point(t);
    let (e, _) = l.frame_at(cal, t)?;
    let g = cal.g.at(&x);
    let sm = cal.s.at(&x);
    let raw = DMatrix::from_fn(x.len(), n, |i, a| {
        let ea = cal.v_prime[a].at(&x);
        (&sm * ea)[i]
    });
    // g-orthonormal reference frame of the vertical subspace
    let mut v = raw.clone();
    for a in 0..n {
        let mut w = raw.column(a).into_owned();
        for b in 0..a {
            let vb = v.column(b).into_owned();
            let c = (vb.transpose() * &g * &w)[0];
            w -= vb * c;
        }
        let nn = (w.transpose() * &g * &w)[0];
        if !(nn > 1e-20) {
            return Err(MaslovError::Degenerate {
                what: "vertical frame".into(),
                witness: Some(x.clone()),
            });
        }
        v.set_column(a, &(w / nn.sqrt()));
    }
    let jv = cal.j.at(&x) * &v;
    let gx = (&e.transpose() * &g * &v).transpose();
    let gy = (&e.transpose() * &g * &jv).transpose();
    Ok(DMatrix::from_fn(n, n, |a, i| Complex::new(gx[(a, i)], gy[(a, i)])))
}

fn unwrap_turns(phases: &[f64]) -> f64 {
    let mut total = 0.0;
    for w in phases.windows(2) {
        let mut d = w[1] - w[0];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d <= -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    total / (2.0 * PI)
}

/// Phase-unwrapped winding of `det U` and `det² U`, where
/// `U_{ai} = g(e_i, v_a) + √-1 g(e_i, J v_a)` compares the tangent frame with
/// a unitary frame of the vertical subspace.
pub fn winding_oracle(l: &FramedLagrangian, cal: &Calibrated, spec: &LoopSpec) -> Result<Winding, MaslovError> {
    if l.ambient != cal.chart {
        return Err(MaslovError::Invalid("immersion and calibration charts differ".into()));
    }
    spec.check_periodic(l)?;
    let mut det_phase = Vec::with_capacity(spec.steps + 1);
    let mut sq_phase = Vec::with_capacity(spec.steps + 1);
    let mut crossings = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=spec.steps {
        let s = spec.start + spec.period * k as f64 / spec.steps as f64;
        let u = unitary_at(l, cal, &spec.at(s).0)?;
        let d = u.clone().determinant();
        det_phase.push(d.arg());
        sq_phase.push((d * d).arg());
        if k < spec.steps {
            let re = u.map(|z| z.re).determinant();
            if re.abs() < 1e-12 {
                crossings.push(s);
                prev = None;
            } else {
                if let Some((ps, pr)) = prev {
                    if pr.signum() != re.signum() {
                        crossings.push(ps + (s - ps) * pr / (pr - re));
                    }
                }
                prev = Some((s, re));
            }
        }
    }
    Ok(Winding {
        det_squared: unwrap_turns(&sq_phase),
        det: unwrap_turns(&det_phase),
        crossings,
        steps: spec.steps,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::symexpr::{CoordSystem, Expr};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn loop_integral_is_deformation_and_shift_invariant(a in 0.3f64..3.0, b in 0.3f64..3.0, start in -3.0f64..3.0) {
            let cfg = SampleConfig::default().with_samples(10);
            let cal = Calibrated::standard(1, &cfg).unwrap();
            let p = CoordSystem::new(&["t"]).unwrap();
            let t = Expr::var(0);
            let l = FramedLagrangian::new(&p, &cal.chart, vec![Expr::real(a) * t.cos(), Expr::real(b) * t.sin()]).unwrap();
            let spec = LoopSpec::default().with_start(start);
            let m = first_maslov_loop(&l, &cal, &ConnectionMode::Auto, &spec, &cfg).unwrap();
            prop_assert!((m.value + 1.0).abs() < 1e-6, "{}", m.value);
            let w = winding_oracle(&l, &cal, &spec).unwrap();
            prop_assert!((w.det - m.value).abs() < 1e-6);
            prop_assert!((w.det_squared - 2.0 * w.det).abs() < 1e-9);
        }
    }
}
