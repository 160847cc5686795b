use approx::assert_abs_diff_eq;
use ddcacc::dynamics::{
    av_derivative, build_system, disturbance_bound, hv_derivative, range_policy, true_disturbance,
    HvBox, HvParams, LiftLayout, ParamBox, PlatoonSpec, Vehicle, VehicleBox, VehicleParams,
    VehicleState,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn av_params() -> impl Strategy<Value = VehicleParams> {
    prop::array::uniform6(0.9f64..=1.1).prop_map(|f| VehicleParams::nominal().scaled(f).unwrap())
}

fn hv_params() -> impl Strategy<Value = HvParams> {
    (
        0.05f64..1.0,
        0.0f64..1.0,
        0.2f64..1.5,
        1.0f64..10.0,
        10.0f64..60.0,
        20.0f64..45.0,
    )
        .prop_map(|(a, b, tau, hs, span, vmax)| {
            HvParams::new(a, b, tau, hs, hs + span, vmax).unwrap()
        })
}

/// Platoons of up to five vehicles with an automated head.
fn platoon() -> impl Strategy<Value = PlatoonSpec> {
    (
        av_params(),
        prop::collection::vec(
            prop_oneof![
                av_params().prop_map(Vehicle::Automated),
                hv_params().prop_map(Vehicle::Human)
            ],
            0..5,
        ),
        5.0f64..40.0,
        10.0f64..30.0,
        prop::sample::select(vec![0.01, 0.05, 0.1]),
    )
        .prop_map(|(head, rest, h, v, t_s)| {
            let mut vehicles = vec![Vehicle::Automated(head)];
            vehicles.extend(rest);
            PlatoonSpec::new(vehicles, h, v, t_s).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discretization_adds_identity_on_states(spec in platoon()) {
        let sys = build_system(&spec).unwrap();
        let (n_x, n_z) = (sys.n_x(), sys.n_z());
        let expected = DMatrix::from_fn(n_x, n_z, |r, c| if r == c { 1.0 } else { 0.0 });
        let diff = &sys.a - &sys.a_c * spec.t_s() - expected;
        prop_assert!(diff.amax() <= 1e-12, "{}", diff.amax());
        prop_assert_eq!(&sys.b, &(&sys.b_c * spec.t_s()));
        prop_assert_eq!(&sys.d, &(&sys.d_c * spec.t_s()));
    }

    #[test]
    fn lift_keeps_state_and_appends_products(spec in platoon(), seed in prop::collection::vec(-5.0f64..5.0, 15)) {
        let layout = LiftLayout::for_spec(&spec);
        let x: Vec<f64> = seed.iter().cycle().take(layout.n_x()).copied().collect();
        let z = layout.lift(&x).unwrap();
        prop_assert_eq!(&z.as_slice()[..x.len()], x.as_slice());
        let mut k = x.len();
        for (i, v) in spec.vehicles().iter().enumerate() {
            if v.is_automated() {
                let (ve, a) = (x[3 * i + 1], x[3 * i + 2]);
                prop_assert_eq!(z[k], ve * a);
                prop_assert_eq!(z[k + 1], ve * ve);
                k += 2;
            }
        }
        prop_assert_eq!(k, z.len());
    }

    #[test]
    fn monomials_vanish_faster_than_the_state(spec in platoon(), dir in prop::collection::vec(-1.0f64..1.0, 15)) {
        let layout = LiftLayout::for_spec(&spec);
        let u: Vec<f64> = dir.iter().cycle().take(layout.n_x()).copied().collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let ratio = |t: f64| {
            let x: Vec<f64> = u.iter().map(|v| t * v / norm).collect();
            let z = layout.lift(&x).unwrap();
            z.rows(x.len(), z.len() - x.len()).norm() / t
        };
        // Quadratic monomials: the ratio is linear in t.
        let (r1, r2) = (ratio(1e-2), ratio(1e-4));
        prop_assert!(r2 <= r1 * 1e-2 + 1e-15);
        prop_assert!(r2 <= 1e-4 * (2.0 * layout.n_vehicles() as f64).sqrt());
    }

    #[test]
    fn range_policy_is_monotone_and_bounded(p in hv_params(), h1 in -10.0f64..120.0, dh in 0.0f64..30.0) {
        let (a, b) = (range_policy(h1, &p), range_policy(h1 + dh, &p));
        prop_assert!(a <= b + 1e-12);
        prop_assert!((0.0..=p.v_max).contains(&a));
        for eps in [1e-4, 1e-7] {
            prop_assert!((range_policy(p.h_stop + eps, &p) - range_policy(p.h_stop, &p)).abs() <= p.v_max * eps);
            prop_assert!((range_policy(p.h_go - eps, &p) - range_policy(p.h_go, &p)).abs() <= p.v_max * eps);
        }
    }

    #[test]
    fn disturbance_bound_covers_every_draw(
        factors in prop::array::uniform6(0.9f64..=1.1),
        hv in hv_params(),
        gap_fraction in 0.0f64..=1.0,
        v_star in 5.0f64..35.0,
    ) {
        let nominal = VehicleParams::nominal();
        let drawn = nominal.scaled(factors).unwrap();
        let spec = PlatoonSpec::new(vec![Vehicle::Automated(drawn), Vehicle::Human(hv)], 20.0, v_star, 0.05).unwrap();
        let bound = disturbance_bound(
            &[VehicleBox::Automated(ParamBox::relative(nominal, 0.1).unwrap()), VehicleBox::Human(HvBox::exact(hv))],
            &spec,
        )
        .unwrap();
        let gap = gap_fraction * 2.0 * hv.h_go;
        for (i, v) in spec.vehicles().iter().enumerate() {
            prop_assert!(true_disturbance(v, gap, v_star).abs() <= bound.per_vehicle[i] + 1e-12);
        }
    }

    #[test]
    fn cruising_effort_holds_speed(p in av_params(), v in 1.0f64..40.0) {
        let u = -p.tau * p.mass * p.drift_jerk(v, 0.0);
        let d = av_derivative(&VehicleState::new(0.0, v, 0.0), &p, u);
        prop_assert_eq!(d[1], 0.0);
        prop_assert!(d[2].abs() <= 1e-12);
    }

    #[test]
    fn free_flow_is_an_equilibrium(p in hv_params(), extra in 0.0f64..50.0) {
        let pred = VehicleState::new(p.h_go + extra, p.v_max, 0.0);
        let own = VehicleState::new(0.0, p.v_max, 0.0);
        let d = hv_derivative(&own, &pred, &p);
        prop_assert_eq!(d, [0.0, 0.0, 0.0]);
    }
}

#[test]
fn hand_checked_discrete_entry() {
    let spec = PlatoonSpec::automated(&[VehicleParams::nominal()], 20.0, 20.0, 0.05).unwrap();
    let sys = build_system(&spec).unwrap();
    // h̃⁺ = h̃ − t_s·ṽ for the head vehicle.
    assert_abs_diff_eq!(sys.a[(0, 1)], -0.05, epsilon = 1e-15);
}
