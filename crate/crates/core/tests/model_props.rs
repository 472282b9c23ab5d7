use cyclone_tipping::model::*;
use nalgebra::Matrix3;
use proptest::prelude::*;

const FIG1: ModelParams = ModelParams::raw(0.43, 0.286);

/// Positive real roots of (γ-1)v³ - 3c v² + (1-γ-3c²)v - c³ from the companion matrix.
fn companion_positive_roots(g: f64, c: f64) -> usize {
    let a3 = g - 1.0;
    let (b2, b1, b0) = (-3.0 * c / a3, (1.0 - g - 3.0 * c * c) / a3, -c.powi(3) / a3);
    let m = Matrix3::new(0.0, 0.0, -b0, 1.0, 0.0, -b1, 0.0, 1.0, -b2);
    m.complex_eigenvalues().iter().filter(|z| z.im.abs() < 1e-9 && z.re > 0.0).count()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = (x.iter().map(|v| v.ln()).collect(), y.iter().map(|v| v.ln()).collect());
    let (sx, sy) = (lx.iter().sum::<f64>(), ly.iter().sum::<f64>());
    let sxx: f64 = lx.iter().map(|v| v * v).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn root_count_is_zero_or_two(g in 0.001f64..0.999, c in 0.001f64..0.999) {
        let p = ModelParams::raw(g, c);
        let (roots, double) = positive_roots(&p);
        prop_assert!(roots.len() == 2 || roots.is_empty());
        prop_assert!(!(double.is_some() && !roots.is_empty()));
        // away from the fold the companion matrix gives the same count
        if cubic_p_peak(g, c).abs() > 1e-6 {
            prop_assert_eq!(companion_positive_roots(g, c), roots.len());
        }
        for r in roots {
            prop_assert!(cubic_p(r, &p).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn square_is_forward_invariant(g in 0.0f64..1.0, c in 0.0f64..1.0, s in 0.0f64..=1.0) {
        prop_assert!(f_component(0.0, s, g) >= 0.0);
        prop_assert!(f_component(1.0, s, g) <= 0.0);
        prop_assert!(g_component(s, 0.0, c) >= 0.0);
        prop_assert!(g_component(s, 1.0, c) <= 0.0);
    }

    #[test]
    fn equilibria_have_small_residual(g in 0.01f64..0.99, c in 0.01f64..0.6) {
        let p = ModelParams::raw(g, c);
        let fp = fixed_points(&p).unwrap();
        for e in fp.all() {
            prop_assert!(vector_field(e.state, &p).norm() <= 1e-10);
        }
        if fp.status == FixedPointStatus::ThreeEquilibria {
            prop_assert_eq!(fp.saddle.unwrap().stability, Stability::Saddle);
            prop_assert!(fp.storm.unwrap().stability.is_stable());
            prop_assert!(fp.saddle.unwrap().state.v < fp.storm.unwrap().state.v);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(
        g in 0.01f64..0.99, c in 0.01f64..1.0, v in -0.5f64..1.5, m in -0.5f64..1.5,
    ) {
        let p = ModelParams::raw(g, c);
        let j = jacobian(State::new(v, m), &p);
        let h = 1e-6;
        let fd = |dv: f64, dm: f64| {
            let a = vector_field(State::new(v + dv, m + dm), &p);
            let b = vector_field(State::new(v - dv, m - dm), &p);
            ((a.v - b.v) / (2.0 * h), (a.m - b.m) / (2.0 * h))
        };
        let (dfv, dgv) = fd(h, 0.0);
        let (dfm, dgm) = fd(0.0, h);
        let scale = 1.0 + j.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        for (e, o) in [(j[0][0], dfv), (j[1][0], dgv), (j[0][1], dfm), (j[1][1], dgm)] {
            prop_assert!((e - o).abs() <= 1e-6 * scale, "{} vs {}", e, o);
        }
    }

    #[test]
    fn center_manifold_order_five_is_sixth_order_asymptotically(g in 0.2f64..0.8, c in 0.2f64..0.35) {
        let p = ModelParams::raw(g, c);
        let e5 = center_manifold_residual_exponent(&p, 5, 2e-3, 2e-4).unwrap();
        prop_assert!(e5 >= 5.8, "order 5 exponent {}", e5);
    }

    #[test]
    fn center_manifold_order_three_is_fourth_order_asymptotically(g in 0.2f64..0.8, c in 0.2f64..0.35) {
        let p = ModelParams::raw(g, c);
        let e3 = center_manifold_residual_exponent(&p, 3, 1e-4, 1e-5).unwrap();
        prop_assert!(e3 >= 3.8, "order 3 exponent {}", e3);
    }
}

#[test]
#[ignore = "order-3 exponent at v in {1e-2, 1e-3} is pre-asymptotic (about 3.5) at the default parameters"]
fn center_manifold_order_three_exponent_at_coarse_v() {
    let e3 = center_manifold_residual_exponent(&FIG1, 3, 1e-2, 1e-3).unwrap();
    assert!(e3 >= 3.8, "{e3}");
}

#[test]
fn saddle_expansion_converges() {
    let cs = [0.02, 0.05, 0.1];
    let (mut ev, mut em) = (vec![], vec![]);
    for &c in &cs {
        let p = ModelParams::raw(0.43, c);
        let u = fixed_points(&p).unwrap().saddle.unwrap().state;
        let (ua, _) = asymptotic_fixed_points(&p);
        ev.push((u.v - ua.v).abs());
        em.push((u.m - ua.m).abs());
    }
    assert!(slope(&cs, &ev) >= 5.0, "v slope {}", slope(&cs, &ev));
    assert!(slope(&cs, &em) >= 4.0, "m slope {}", slope(&cs, &em));
}

#[test]
fn rk4_endpoint_is_fourth_order() {
    let x0 = State::new(0.5, 0.5);
    let end = |dt: f64| integrate_ode(x0, &FIG1, 10.0, dt).unwrap().last();
    let (a, b, c) = (end(0.2), end(0.1), end(0.05));
    let ratio = a.dist(b) / b.dist(c);
    let order = ratio.log2();
    assert!((3.5..=4.5).contains(&order), "order {order}");
}

#[test]
fn center_manifold_exponents_at_default_parameters() {
    let e5 = center_manifold_residual_exponent(&FIG1, 5, 1e-2, 1e-3).unwrap();
    assert!(e5 >= 5.8, "{e5}");
    for k in 1..=100 {
        let v = 1e-4 * k as f64;
        assert!(origin_center_dynamics(v, &FIG1) < 0.0, "v = {v}");
    }
}
