//! Gauss-Legendre rules and adaptive Simpson integration.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n > 0, "rule needs at least one node");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// `P_n(x)` and `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub intervals: usize,
    /// False when the interval cap was hit before the tolerance was met.
    pub converged: bool,
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol` and a cap on the
/// number of subintervals.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_intervals: usize) -> Integral {
    struct Seg {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // seed with a few panels so periodic integrands are not misjudged
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut stack = Vec::new();
    for k in (0..panels).rev() {
        let (x0, x1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (fa, fm, fb) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        stack.push(Seg {
            a: x0,
            b: x1,
            fa,
            fm,
            fb,
            whole: simpson(x0, x1, fa, fm, fb),
            tol: tol / panels as f64,
        });
    }
    let mut total = 0.0;
    let mut intervals = panels;
    let mut converged = true;
    while let Some(s) = stack.pop() {
        let m = 0.5 * (s.a + s.b);
        let (lm, rm) = (0.5 * (s.a + m), 0.5 * (m + s.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(s.a, m, s.fa, flm, s.fm);
        let right = simpson(m, s.b, s.fm, frm, s.fb);
        let delta = left + right - s.whole;
        if delta.abs() <= 15.0 * s.tol || intervals >= max_intervals {
            if delta.abs() > 15.0 * s.tol {
                converged = false;
            }
            total += left + right + delta / 15.0;
            continue;
        }
        intervals += 1;
        stack.push(Seg {
            a: m,
            b: s.b,
            fa: s.fm,
            fm: frm,
            fb: s.fb,
            whole: right,
            tol: 0.5 * s.tol,
        });
        stack.push(Seg {
            a: s.a,
            b: m,
            fa: s.fa,
            fm: flm,
            fb: s.fm,
            whole: left,
            tol: 0.5 * s.tol,
        });
    }
    Integral {
        value: total,
        intervals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..8 {
            let rule = gauss_legendre_unit(n);
            for deg in 0..(2 * n) {
                let v: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((v - exact).abs() < 1e-14, "n={n} deg={deg}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn three_point_nodes() {
        let r = gauss_legendre(3);
        assert!((r[0].0 + (0.6f64).sqrt()).abs() < 1e-15);
        assert!((r[1].0).abs() < 1e-15);
        assert!((r[1].1 - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_on_smooth_periodic() {
        let r = adaptive_simpson(
            |t: f64| t.cos().powi(2),
            0.0,
            2.0 * std::f64::consts::PI,
            1e-10,
            1_000_000,
        );
        assert!(r.converged);
        assert!((r.value - std::f64::consts::PI).abs() < 1e-9);
    }
}
