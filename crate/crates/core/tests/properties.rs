//! Randomized properties of norms, distances, sections and causal sets.

use proptest::prelude::*;
use randers::scenarios::{self, StripBumps};
use randers::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn coord() -> impl Strategy<Value = f64> {
    -1.5f64..1.5
}

fn planar_point() -> impl Strategy<Value = [f64; 2]> {
    (coord(), coord()).prop_map(|(x, y)| [x, y])
}

/// Constant Randers data with `h = L L^T` and `|omega|_h = s < 1`.
fn constant_data(l: [f64; 3], angle: f64, s: f64) -> RandersData2 {
    let h = [[l[0] * l[0], l[0] * l[1]], [l[0] * l[1], l[1] * l[1] + l[2] * l[2]]];
    // omega = s * h(u, .) with u of h-norm one
    let u = [angle.cos(), angle.sin()];
    let hu = [h[0][0] * u[0] + h[0][1] * u[1], h[1][0] * u[0] + h[1][1] * u[1]];
    let nu = (u[0] * hu[0] + u[1] * hu[1]).sqrt();
    let w = [s * hu[0] / nu, s * hu[1] / nu];
    let chart = Chart::rectangle([(-2.0, 2.0), (-2.0, 2.0)], 33).unwrap();
    RandersData::new(Field::constant(h), Field::constant(w), chart)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn norm_is_homogeneous_and_subadditive(
        l in (0.3f64..2.0, -1.0f64..1.0, 0.3f64..2.0),
        angle in 0.0f64..6.3,
        s in 0.0f64..0.95,
        v in planar_point(),
        w in planar_point(),
        lam in 0.01f64..100.0,
    ) {
        let f = FinslerNorm::forward(constant_data([l.0, l.1, l.2], angle, s));
        let x = [0.1, -0.2];
        let fv = f.eval(&x, &v);
        prop_assert!(fv >= 0.0);
        prop_assert!((f.eval(&x, &[lam * v[0], lam * v[1]]) - lam * fv).abs() <= 1e-12 * (1.0 + lam * fv));
        let sum = [v[0] + w[0], v[1] + w[1]];
        prop_assert!(f.eval(&x, &sum) <= fv + f.eval(&x, &w) + 1e-12);
    }

    #[test]
    fn fundamental_tensor_is_symmetric_positive(
        l in (0.3f64..2.0, -1.0f64..1.0, 0.3f64..2.0),
        angle in 0.0f64..6.3,
        s in 0.0f64..0.95,
        v in planar_point(),
    ) {
        prop_assume!(v[0].abs() + v[1].abs() > 1e-3);
        let f = FinslerNorm::forward(constant_data([l.0, l.1, l.2], angle, s));
        let g = fundamental_tensor(&f, &TangentVector::new(Point([0.0, 0.0]), v)).unwrap();
        prop_assert!((g[0][1] - g[1][0]).abs() <= 1e-8);
        prop_assert!(linalg::is_spd(&g));
        // closed form: (F / alpha)(h - l l^T) + (l + w)(l + w)^T with l = h v / alpha
        let (h, w) = f.data().fields_at(&[0.0, 0.0]);
        let hv = [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]];
        let alpha = (v[0] * hv[0] + v[1] * hv[1]).sqrt();
        let fv = alpha + w[0] * v[0] + w[1] * v[1];
        let l = [hv[0] / alpha, hv[1] / alpha];
        let scale = g[0][0].abs().max(g[1][1].abs());
        for i in 0..2 {
            for j in 0..2 {
                let exact = fv / alpha * (h[i][j] - l[i] * l[j]) + (l[i] + w[i]) * (l[j] + w[j]);
                prop_assert!((g[i][j] - exact).abs() <= 1e-6 * scale, "g[{i}][{j}] = {} vs {exact}", g[i][j]);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn distance_triangle_inequality(p in planar_point(), q in planar_point(), z in planar_point()) {
        let f = FinslerNorm::forward(scenarios::strip_cylinder([49, 65], 8.0, StripBumps::default()));
        let scale = |a: [f64; 2]| Point([3.0 * a[0], 4.0 * a[1]]);
        let d = |a: [f64; 2], b: [f64; 2]| forward_distance(&f, &scale(a), &scale(b), Level::Refined).unwrap().value;
        let excess = d(p, z) - d(p, q) - d(q, z);
        prop_assert!(excess <= 1e-3 * 16.0, "excess {excess}");
    }

    #[test]
    fn set_distance_is_lipschitz(p in planar_point(), q in planar_point()) {
        // distance from the outside of a disk under a constant one-form
        let r = scenarios::constant_form(0.4, 41);
        let c = RegionMask::from_level(&r.chart, scenarios::outside_disk([0.0, 0.0], 1.6));
        let f = FinslerNorm::forward(r);
        let sd = distance_to_set(&f, &c, SetOrientation::FromSet).unwrap();
        let (p, q) = (p.map(|c| c * 0.6), q.map(|c| c * 0.6));
        let (rp, rq) = (sd.refined(&p).unwrap().value, sd.refined(&q).unwrap().value);
        let dpq = forward_distance(&f, &Point(p), &Point(q), Level::Refined).unwrap().value;
        let dqp = forward_distance(&f, &Point(q), &Point(p), Level::Refined).unwrap().value;
        // rho(q) <= rho(p) + d(p, q) and the mirrored bound
        prop_assert!(rq <= rp + dpq + 1e-6);
        prop_assert!(rp <= rq + dqp + 1e-6);
        let euclid = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        prop_assert!((rp - rq).abs() <= 2.0 * euclid + 1e-6);
    }

    #[test]
    fn lifted_polylines_reach_the_chronological_future(
        pts in proptest::collection::vec(planar_point(), 2..5),
        slack in 0.01f64..0.5,
    ) {
        let r = scenarios::strip_cylinder([49, 65], 8.0, StripBumps::default());
        let st = stationary_from_randers(&r).unwrap();
        let scaled: Vec<[f64; 2]> = pts.iter().map(|a| [3.0 * a[0], 4.0 * a[1]]).collect();
        let mut dense = Vec::new();
        for w in scaled.windows(2) {
            for k in 0..200 {
                let u = k as f64 / 200.0;
                dense.push([w[0][0] + u * (w[1][0] - w[0][0]), w[0][1] + u * (w[1][1] - w[0][1])]);
            }
        }
        dense.push(*scaled.last().unwrap());
        let curve = SampledCurve::uniform(dense, 0.0, 1.0).unwrap();
        let lift = arrival_time(&st, &curve, 0.0).unwrap();
        let e0 = Event::new(0.0, scaled[0]);
        let end = Event::new(lift.arrival() * (1.0 + slack) + 1e-3, *scaled.last().unwrap());
        prop_assert!(in_chronological_future(&st, &e0, &end).unwrap());
        let before = Event::new(-1e-3, *scaled.last().unwrap());
        prop_assert!(!in_chronological_future(&st, &e0, &before).unwrap());
    }

    #[test]
    fn section_change_shifts_lengths_by_endpoint_values(
        c in (-0.3f64..0.3, -0.3f64..0.3, -0.1f64..0.1),
        pts in proptest::collection::vec(planar_point(), 2..6),
    ) {
        let r = scenarios::constant_form(0.3, 33);
        let f = ScalarField::with_gradient(
            move |x: &[f64; 2]| c.0 * x[0] + c.1 * x[1] + c.2 * x[0] * x[1],
            move |x: &[f64; 2]| [c.0 + c.2 * x[1], c.1 + c.2 * x[0]],
        );
        let rf = match section_change(&r, &f) {
            Ok(rf) => rf,
            // the graph of f may fail to be spacelike
            Err(_) => return Ok(()),
        };
        let curve = SampledCurve::uniform(pts, 0.0, 1.0).unwrap();
        let shift = curve_length(&FinslerNorm::forward(rf), &curve) - curve_length(&FinslerNorm::forward(r), &curve);
        let expected = f.at(&curve.start()) - f.at(&curve.end());
        prop_assert!((shift - expected).abs() <= 1e-9);
    }

    #[test]
    fn development_slices_are_nested(a0 in -1.2f64..0.0, width in 0.2f64..1.4, t in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let a1 = (a0 + width).min(1.3);
        let (r, a) = scenarios::minkowski_development(121, (a0, a1));
        let dev = cauchy_development(&r, &a, 0.0, Side::Future).unwrap();
        let (s1, s2) = (dev.slice(t), dev.slice(t + dt));
        prop_assert!(s2.is_subset_of(&s1));
        prop_assert!(dev.slice(0.0).is_subset_of(&a.mask));
    }
}
