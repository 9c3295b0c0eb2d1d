//! Seeded sample points and pointwise residual checks.
//!
//! Sample coordinates are rounded to multiples of 2^-20, so every sample is a
//! short dyadic rational and can be fed to [`Expr::eval_exact`] cheaply.

use num::rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{self, ExecMode};
use crate::report::CheckReport;
use crate::symexpr::{exact_of_f64, CoordSystem, Expr};

const GRID: f64 = 1048576.0; // 2^20

/// Sampling and tolerance settings shared by every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub samples: usize,
    /// The sample box is `[lo, hi]^dim`.
    pub lo: f64,
    pub hi: f64,
    /// Absolute residual tolerance.
    pub tol: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    #[serde(skip)]
    pub mode: ExecMode,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            seed: 42,
            samples: 100,
            lo: -1.0,
            hi: 1.0,
            tol: 1e-9,
            rank_tol: 1e-8,
            mode: ExecMode::default(),
        }
    }
}

impl SampleConfig {
    pub fn with_tol(&self, tol: f64) -> Self {
        SampleConfig { tol, ..self.clone() }
    }

    pub fn with_samples(&self, samples: usize) -> Self {
        SampleConfig {
            samples,
            ..self.clone()
        }
    }

    pub fn with_box(&self, lo: f64, hi: f64) -> Self {
        SampleConfig { lo, hi, ..self.clone() }
    }

    /// `samples` points in `[lo, hi]^dim`, deterministic in `(seed, dim)`.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        sample_points(self.seed, self.samples, dim, self.lo, self.hi)
    }
}

pub fn sample_points(seed: u64, count: usize, dim: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((dim as u64) << 32));
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let v: f64 = rng.gen_range(lo..=hi);
                    (v * GRID).round() / GRID
                })
                .collect()
        })
        .collect()
}

/// Exact rational copy of a sample point.
pub fn exact_point(x: &[f64]) -> Vec<BigRational> {
    x.iter().map(|&v| exact_of_f64(v)).collect()
}

/// Largest residual and the index where it occurs. NaN counts as infinite.
pub fn max_with_index(values: &[f64]) -> (f64, Option<usize>) {
    let mut best = 0.0f64;
    let mut at = None;
    for (i, &v) in values.iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
        if at.is_none() || v > best {
            best = v;
            at = Some(i);
        }
    }
    (best, at)
}

/// Evaluate `residual` at every point and summarise as a check.
pub fn check_points<F>(
    name: &str,
    coords: &CoordSystem,
    points: &[Vec<f64>],
    tol: f64,
    mode: ExecMode,
    residual: F,
) -> CheckReport
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let values = exec::map(mode, points, |p| residual(p));
    let (max, at) = max_with_index(&values);
    let pass = max.is_finite() && max <= tol;
    let witness = if pass {
        None
    } else {
        at.map(|i| (coords.clone(), points[i].clone()))
    };
    CheckReport::new(name, pass, Some(max), tol).with_witness_point(witness)
}

/// Check that every expression vanishes: structurally after canonical
/// simplification, otherwise numerically at the sample points.
pub fn check_zero(name: &str, coords: &CoordSystem, exprs: &[Expr], cfg: &SampleConfig) -> CheckReport {
    let rest: Vec<Expr> = exprs.iter().map(Expr::simplify).filter(|e| !e.is_zero()).collect();
    if rest.is_empty() {
        return CheckReport::new(name, true, Some(0.0), cfg.tol);
    }
    check_points(name, coords, &cfg.points(coords.dim()), cfg.tol, cfg.mode, |x| {
        rest.iter()
            .map(|e| {
                let v = e.eval(x).abs();
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            })
            .fold(0.0, f64::max)
    })
}

/// Outcome of an exactness test on one expression at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exactness {
    /// Certified zero in exact rational arithmetic.
    Exact,
    /// Not exactly representable; numeric residual given.
    Numeric(f64),
    /// Certified nonzero; numeric value given.
    NonZero(f64),
}

/// Zero test of `e` at `x`: exact arithmetic when the expression allows it,
/// otherwise IEEE evaluation.
pub fn exact_zero_at(e: &Expr, x: &[f64], exact_x: &[BigRational]) -> Exactness {
    if e.is_zero() {
        return Exactness::Exact;
    }
    match e.eval_exact(exact_x) {
        Some(v) if num::Zero::is_zero(&v) => Exactness::Exact,
        Some(_) => Exactness::NonZero(e.eval(x)),
        None => Exactness::Numeric(e.eval(x)),
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn points_stay_in_the_box(seed in any::<u64>(), dim in 1usize..6, lo in -5.0f64..0.0, width in 0.1f64..5.0) {
            let hi = lo + width;
            let pts = sample_points(seed, 20, dim, lo, hi);
            prop_assert_eq!(&pts, &sample_points(seed, 20, dim, lo, hi));
            for p in &pts {
                prop_assert_eq!(p.len(), dim);
                for &v in p {
                    prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
                    prop_assert_eq!((v * GRID).fract(), 0.0);
                }
            }
        }
    }
}
