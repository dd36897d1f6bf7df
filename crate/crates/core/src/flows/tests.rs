use super::*;
use crate::complex::Builtin;
use crate::curvature::cr_curvature;

fn symmetric(n: usize) -> PackingMetric {
    PackingMetric::uniform(Geometry::Euclidean, n, 1.0)
}

fn fixture(b: Builtin) -> (Triangulation, PackingMetric) {
    let t = b.build();
    let n = t.vertex_count();
    (t, symmetric(n))
}

#[test]
fn config_is_checked() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let hyp = PackingMetric::uniform(Geometry::Hyperbolic, 5, 1.0);
    assert!(matches!(
        run_flow(&t, &FlowConfig::new(FlowKind::G4, hyp.clone())),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        run_flow(&t, &FlowConfig::new(FlowKind::Cr2Normalized, hyp)),
        Err(Error::Config(_))
    ));
    let bad_target = FlowKind::Cr4Prescribed {
        target: vec![1.0; 3],
    };
    assert!(matches!(
        run_flow(&t, &FlowConfig::new(bad_target, m.clone())),
        Err(Error::DimensionMismatch { .. })
    ));
    let mut cfg = FlowConfig::new(FlowKind::Cr4, m);
    cfg.options.step.dt_min = 2.0;
    assert!(matches!(run_flow(&t, &cfg), Err(Error::Config(_))));
    assert!(FlowKind::from_name("cr4_prescribed", None).is_err());
    assert!(FlowKind::from_name("nope", None).is_err());
    for name in FlowKind::NAMES {
        let kind = FlowKind::from_name(name, Some(vec![0.0; 5])).unwrap();
        assert_eq!(kind.name(), name);
    }
}

#[test]
fn inadmissible_start_is_rejected() {
    let t = Builtin::Pentachoron.build();
    let m = PackingMetric::new(Geometry::Euclidean, vec![1.0, 1.0, 1.0, 1.0, 0.05]).unwrap();
    assert!(matches!(
        run_flow(&t, &FlowConfig::new(FlowKind::Cr4, m)),
        Err(Error::InadmissibleInitialMetric(_))
    ));
}

#[test]
fn critical_start_converges_immediately() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let res = find_dqe(&t, &m, FlowOptions::default()).unwrap();
    assert_eq!(res.verdict, Verdict::Converged);
    assert!(res.steps <= 1);
    let k = cr_curvature(&t, &m).unwrap().k;
    let res = run_flow(
        &t,
        &FlowConfig::new(FlowKind::Cr4Prescribed { target: k }, m),
    )
    .unwrap();
    assert_eq!(res.verdict, Verdict::Converged);
    assert_eq!(res.steps, 0);
    assert_eq!(res.target_residual, Some(0.0));
}

#[test]
fn backward_cr4_step_increases_energy() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let m = m.perturbed(0.05, 3);
    let e0 = cr_curvature(&t, &m).unwrap().quadratic_energy;
    let forward = single_step(&t, FlowKind::Cr4, &m, 1e-4).unwrap();
    let back = single_step(&t, FlowKind::Cr4, &m, -1e-4).unwrap();
    assert!(cr_curvature(&t, &forward).unwrap().quadratic_energy < e0);
    assert!(cr_curvature(&t, &back).unwrap().quadratic_energy > e0);
}

#[test]
fn plain_cr4_is_repelled_by_the_symmetric_pentachoron() {
    // |K|² has a strict local maximum on the Σu slice at the constant metric,
    // so the unnormalized flow moves away from it.
    let (t, m) = fixture(Builtin::Pentachoron);
    let start = m.perturbed(0.01, 11);
    let mut cfg = FlowConfig::new(FlowKind::Cr4, start.clone());
    cfg.options.stop.max_steps = 200;
    let res = run_flow(&t, &cfg).unwrap();
    assert!(res.drift.monotonicity_violations.is_empty());
    let spread = |m: &PackingMetric| {
        let r = m.radii();
        r.iter().cloned().fold(f64::MIN, f64::max) / r.iter().cloned().fold(f64::MAX, f64::min)
    };
    assert!(spread(&res.final_metric) > spread(&start));
    assert_ne!(res.verdict, Verdict::Converged);
}

#[test]
fn normalized_cr4_converges_to_the_symmetric_pentachoron() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let k_star = cr_curvature(&t, &m).unwrap().k;
    let cfg = FlowConfig::new(
        FlowKind::Cr4Normalized { target: k_star },
        m.perturbed(0.05, 7),
    );
    let res = run_flow(&t, &cfg).unwrap();
    assert_eq!(res.verdict, Verdict::Converged);
    let dqe = res.dqe.unwrap();
    assert!(dqe.residual <= 1e-8, "{dqe:?}");
    assert_eq!(dqe.class, DqeClass::Positive);
    assert!(res.drift.product_r.unwrap() <= 1e-6);
    assert!(res.drift.monotonicity_violations.is_empty());
    let times: Vec<f64> = res.samples.iter().map(|s| s.t).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn rcoord_flow_conserves_norm() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let mut cfg = FlowConfig::new(FlowKind::Cr4Rcoord, m.perturbed(0.05, 5));
    cfg.options.stop.max_steps = 50;
    let res = run_flow(&t, &cfg).unwrap();
    assert!(res.drift.norm_r_sq.unwrap() <= 1e-6);
    assert!(res.drift.product_r.is_none());
    assert!(res.drift.monotonicity_violations.is_empty());
}

#[test]
fn g4_follows_the_shrinking_solution() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let lambda = cr_curvature(&t, &m).unwrap().g_energy / 5.0;
    let mut cfg = FlowConfig::new(FlowKind::G4, m);
    cfg.options.stop.t_end = Some(0.01);
    let res = run_flow(&t, &cfg).unwrap();
    assert_eq!(res.verdict, Verdict::MaxSteps);
    assert!((res.t - 0.01).abs() <= 1e-12);
    for s in &res.samples {
        let exact = 1.0 / (1.0 + 2.0 * lambda * s.t).sqrt();
        for r in &s.r {
            assert!(
                (r / exact - 1.0).abs() <= 1e-6,
                "t = {}: {r} vs {exact}",
                s.t
            );
        }
    }
    assert!(res.drift.monotonicity_violations.is_empty());
}

#[test]
fn find_dqe_on_cross16() {
    let (t, m) = fixture(Builtin::Cross16);
    let start = m.perturbed(0.05, 2);
    let res = find_dqe(&t, &start, FlowOptions::default()).unwrap();
    assert_eq!(res.verdict, Verdict::Converged);
    let r = res.final_metric.radii();
    for x in r {
        assert!((x / r[0] - 1.0).abs() <= 1e-7);
    }
    assert!(res.drift.product_r.unwrap() <= 1e-6);
    assert_eq!(res.dqe.unwrap().class, DqeClass::Positive);
}

#[test]
fn hyperbolic_cr4_decreases_energy() {
    let t = Builtin::Pentachoron.build();
    let m = PackingMetric::uniform(Geometry::Hyperbolic, 5, 0.8).perturbed(0.05, 1);
    let mut cfg = FlowConfig::new(FlowKind::Cr4, m);
    cfg.options.stop.max_steps = 30;
    let res = run_flow(&t, &cfg).unwrap();
    assert!(res.drift.monotonicity_violations.is_empty());
    assert!(res.dqe.is_none());
    let e: Vec<f64> = res.energies().collect();
    assert!(e.last() < e.first());
}

#[test]
fn prescribed_strategies_agree() {
    let (t, m) = fixture(Builtin::Pentachoron);
    let target_metric = m.perturbed(0.1, 21);
    let k = cr_curvature(&t, &target_metric).unwrap().k;
    let start = target_metric.perturbed(0.02, 22);
    let gm = |m: &PackingMetric| m.radii().iter().map(|r| r.ln()).sum::<f64>() / 5.0;
    let start = start
        .scaled((gm(&target_metric) - gm(&start)).exp())
        .unwrap();
    let target = Target::K(k);
    let flow =
        prescribe_curvature(&t, &target, &start, Strategy::Flow, FlowOptions::default()).unwrap();
    let gd = prescribe_curvature(
        &t,
        &target,
        &start,
        Strategy::GradientDescent,
        FlowOptions::default(),
    )
    .unwrap();
    for res in [&flow, &gd] {
        assert_eq!(res.verdict, Verdict::Converged);
        assert!(sup_diff(res.final_metric.radii(), target_metric.radii()) <= 1e-6);
    }
}
