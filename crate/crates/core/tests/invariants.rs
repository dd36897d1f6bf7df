use approx::assert_relative_eq;
use dqeflow::complex::{Builtin, Triangulation};
use dqeflow::curvature::{cr_curvature, Geometry, PackingMetric};
use dqeflow::euclid::{solid_angles, TetRadii};
use dqeflow::hyperbolic::hyp_solid_angles;
use dqeflow::operators::{assemble, AssemblyMethod};
use proptest::prelude::*;

fn relative_q(r: &[f64]) -> f64 {
    let s: f64 = r.iter().map(|x| 1.0 / x).sum();
    let s2: f64 = r.iter().map(|x| 1.0 / (x * x)).sum();
    (s * s - 2.0 * s2) / (s * s)
}

fn admissible_tet() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_map(|u| u.map(f64::exp))
        .prop_filter("realizable", |r| relative_q(r) > 1e-3)
}

fn metric_on(t: Triangulation, spread: f64) -> impl Strategy<Value = (Triangulation, Vec<f64>)> {
    let n = t.vertex_count();
    prop::collection::vec(-spread..spread, n)
        .prop_map(|u| u.into_iter().map(f64::exp).collect::<Vec<f64>>())
        .prop_filter("realizable", {
            let t = t.clone();
            move |r| {
                t.tets()
                    .iter()
                    .all(|tet| relative_q(&tet.map(|v| r[v])) > 1e-2)
            }
        })
        .prop_map(move |r| (t.clone(), r))
}

fn fixture_metric() -> impl Strategy<Value = (Triangulation, Vec<f64>)> {
    prop_oneof![
        metric_on(Builtin::Pentachoron.build(), 0.5),
        metric_on(Builtin::Cross16.build(), 0.4),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solid_angles_lie_in_open_hemisphere(r in admissible_tet()) {
        let a = solid_angles(&TetRadii(r)).unwrap();
        for x in a.0 {
            prop_assert!(x > 0.0 && x < 2.0 * std::f64::consts::PI);
        }
    }

    #[test]
    fn solid_angles_follow_vertex_permutations(r in admissible_tet(), shift in 0usize..4) {
        let perm = [shift, (shift + 1) % 4, (shift + 2) % 4, (shift + 3) % 4];
        let a = solid_angles(&TetRadii(r)).unwrap();
        let b = solid_angles(&TetRadii(perm.map(|i| r[i]))).unwrap();
        for k in 0..4 {
            prop_assert!((b[k] - a[perm[k]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn hyperbolic_angles_are_thinner(r in admissible_tet(), c in 0.05f64..0.5) {
        let rad = TetRadii(r.map(|x| c * x));
        if let Ok(h) = hyp_solid_angles(&rad) {
            let e = solid_angles(&rad).unwrap();
            let total_h: f64 = h.0.iter().sum();
            let total_e: f64 = e.0.iter().sum();
            prop_assert!(total_h < total_e);
        }
    }

    #[test]
    fn curvature_ignores_scale_and_g_curvature_scales((t, r) in fixture_metric(), c in 0.1f64..10.0) {
        let m = PackingMetric::new(Geometry::Euclidean, r.clone()).unwrap();
        let a = cr_curvature(&t, &m).unwrap();
        let b = cr_curvature(&t, &m.scaled(c).unwrap()).unwrap();
        for i in 0..r.len() {
            prop_assert!((a.k[i] - b.k[i]).abs() <= 1e-12 * a.k[i].abs().max(1.0));
            prop_assert!((b.c[i] - c * a.c[i]).abs() <= 1e-12 * (c * a.c[i]).abs().max(1e-12));
        }
        let s: f64 = a.c.iter().sum();
        prop_assert!((a.total.unwrap() - s).abs() <= 1e-12 * s.abs());
    }

    #[test]
    fn jacobian_kills_radii_and_is_symmetric((t, r) in fixture_metric()) {
        let m = PackingMetric::new(Geometry::Euclidean, r.clone()).unwrap();
        let ops = assemble(&t, &m, AssemblyMethod::DualGeometry).unwrap();
        let scale = ops.lambda.abs().max();
        let lr = &ops.lambda * nalgebra::DVector::from_vec(r);
        prop_assert!(lr.abs().max() <= 1e-12 * scale);
        prop_assert_eq!(&ops.lambda, &ops.lambda.transpose());
        for w in &ops.edge_weights {
            prop_assert!(w.forward > 0.0 && w.backward > 0.0);
        }
    }

    #[test]
    fn quadratic_form_vanishes_only_along_radii((t, r) in fixture_metric(), x in prop::collection::vec(-1.0f64..1.0, 8)) {
        let n = r.len();
        let m = PackingMetric::new(Geometry::Euclidean, r.clone()).unwrap();
        let ops = assemble(&t, &m, AssemblyMethod::DualGeometry).unwrap();
        let x = nalgebra::DVector::from_column_slice(&x[..n]);
        let rv = nalgebra::DVector::from_vec(r);
        let q = (x.transpose() * &ops.lambda * &x)[0];
        let scale = ops.lambda.abs().max() * x.norm_squared();
        prop_assert!(q >= -1e-12 * scale);
        // Remove the radial part; what is left must have strictly positive energy.
        let perp = &x - &rv * (rv.dot(&x) / rv.norm_squared());
        if perp.norm() > 1e-3 * x.norm() {
            let qp = (perp.transpose() * &ops.lambda * &perp)[0];
            prop_assert!(qp > 1e-9 * ops.lambda.abs().max() * perp.norm_squared());
        }
    }
}

#[test]
fn cross16_is_vertex_transitive() {
    let t = Builtin::Cross16.build();
    let m = PackingMetric::uniform(Geometry::Euclidean, 8, 1.0);
    let k = cr_curvature(&t, &m).unwrap().k;
    for x in &k {
        assert_relative_eq!(*x, k[0], max_relative = 1e-13);
    }
    // Every vertex lies in 8 tets.
    for v in 0..8 {
        assert_eq!(t.vertex_tets(v).len(), 8);
    }
}
