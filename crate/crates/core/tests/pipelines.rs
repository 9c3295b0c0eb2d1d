//! End-to-end runs through the public API.

use llsp_core::exec::ExecMode;
use llsp_core::harness::{self, Params, RunConfig};
use llsp_core::maslov::{
    calibrate, check_gauss_weingarten, first_maslov_loop, winding_oracle, ConnectionMode, FramedLagrangian, LoopSpec,
};
use llsp_core::poisson::{fibered_product, leaf_restriction, llp_check};
use llsp_core::sampling::SampleConfig;
use llsp_core::structures::{canonical_s, check_hamiltonian, energy_hamiltonian, lagrangian_form, LagrangianChart};
use llsp_core::symexpr::{parse, CoordSystem, Expr};
use llsp_core::tensor::Splitting;

fn cfg() -> SampleConfig {
    SampleConfig::default().with_samples(30)
}

#[test]
fn lagrangian_to_maslov_loop() {
    let cfg = cfg();
    let chart = CoordSystem::tangent(1);
    let l = LagrangianChart::new(&chart, parse("u1^2/2 - q1^2/2", &chart).unwrap()).unwrap();
    let omega = lagrangian_form(&l, &cfg).unwrap();
    let (e, x) = energy_hamiltonian(&l, &cfg).unwrap();
    assert!(check_hamiltonian(&omega, &x, &e, &cfg).pass);

    let s = canonical_s(&chart, &cfg).unwrap();
    let cal = calibrate(&s, &Splitting::coordinate(&chart).unwrap(), &omega, true, &cfg).unwrap();
    assert!(cal.report.pass(), "{:?}", cal.report.first_failure());

    let t = CoordSystem::new(&["t"]).unwrap();
    let v = Expr::var(0);
    let lp = FramedLagrangian::new(&t, &cal.chart, vec![v.cos(), v.sin()]).unwrap();
    assert!(lp.check(&cal, &cfg).pass());
    assert!(check_gauss_weingarten(&lp, &cal, &ConnectionMode::Auto, &cfg)
        .unwrap()
        .pass());
    let spec = LoopSpec::default();
    let m = first_maslov_loop(&lp, &cal, &ConnectionMode::Auto, &spec, &cfg).unwrap();
    let w = winding_oracle(&lp, &cal, &spec).unwrap();
    assert!((m.value - w.det).abs() < 1e-6);
    assert!((m.value.round() - m.value).abs() < 1e-6);
}

#[test]
fn fibered_product_leaves_are_lagrangian() {
    let cfg = cfg();
    let xc = CoordSystem::new(&["x1", "x2"]).unwrap();
    let p_sym = vec![
        vec![parse("2 + x1^2", &xc).unwrap(), Expr::one()],
        vec![Expr::one(), Expr::int(3)],
    ];
    let t = vec![vec![Expr::zero(), parse("x2", &xc).unwrap()], vec![Expr::zero(); 2]];
    let fp = fibered_product(&p_sym, &t, &cfg).unwrap();
    let llp = llp_check(&fp.pi.p, &fp.s, &cfg);
    assert!(llp.pass(), "{:?}", llp.to_compliance().first_failure());
    for x in cfg.with_samples(4).points(fp.chart.dim()) {
        let r = leaf_restriction(&fp.pi.p, &fp.s, &x, &cfg).unwrap();
        assert!(r.pass(), "{:?}", r.first_failure());
    }
}

#[test]
fn harness_reports_do_not_depend_on_the_mode() {
    let base = RunConfig {
        samples: 25,
        timing: false,
        ..RunConfig::default()
    };
    let seq = RunConfig {
        mode: ExecMode::Sequential,
        ..base.clone()
    };
    let a = harness::run_all(&base).unwrap();
    let b = harness::run_all(&seq).unwrap();
    assert_eq!(a.len(), harness::list_scenarios().len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_json(), y.to_json());
        assert!(x.passed(), "{}", x.to_text());
    }
}

#[test]
fn harness_parameters_reach_the_scenario() {
    let run = RunConfig {
        samples: 20,
        timing: false,
        ..RunConfig::default()
    };
    let r = harness::run_scenario("circle_maslov", &run, &Params::new().with("turns", 3.into())).unwrap();
    let m = r.maslov.unwrap();
    assert!((m.maslov_integral + 3.0).abs() < 1e-6);
    assert!((m.winding + 6.0).abs() < 1e-6);
    assert!(harness::run_scenario("circle_maslov", &run, &Params::new().with("radius", 1.into())).is_err());
}
