use ddcacc::datagen::{
    collect_data, us06, CollectionMode, CollectionOptions, ControlFault, DataError, Dither,
    DriveCycleOptions, HighFidelitySimulator, PlatoonController, ReferenceProfile, SimStart,
};
use ddcacc::dynamics::{
    build_system, step_design_consistent, HvParams, PlatoonSpec, Vehicle, VehicleParams,
    VehicleState,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn mixed(factors: [f64; 6]) -> PlatoonSpec {
    let av = VehicleParams::nominal().scaled(factors).unwrap();
    PlatoonSpec::new(
        vec![
            Vehicle::Automated(av),
            Vehicle::Human(HvParams::reference()),
            Vehicle::Automated(av),
        ],
        20.0,
        20.0,
        0.05,
    )
    .unwrap()
}

fn initial(offsets: &[f64]) -> Vec<VehicleState> {
    offsets
        .iter()
        .enumerate()
        .map(|(i, d)| VehicleState::new(-25.0 * i as f64 + d, 20.0 + 0.5 * d, 0.0))
        .collect()
}

fn design_options(seed: u64, samples: usize) -> CollectionOptions {
    CollectionOptions {
        mode: CollectionMode::DesignConsistent,
        samples,
        dither: Some(Dither {
            amplitude: 1.0,
            seed,
        }),
        ..Default::default()
    }
}

/// Holds the same efforts for every sample.
struct Hold(Vec<f64>);

impl PlatoonController for Hold {
    fn control(&mut self, _step: usize, _x: &[f64], out: &mut [f64]) -> Result<(), ControlFault> {
        out.copy_from_slice(&self.0);
        Ok(())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn design_batches_satisfy_the_model_exactly(
        factors in prop::array::uniform6(0.9f64..=1.1),
        offsets in prop::array::uniform3(-2.0f64..2.0),
        seed in any::<u64>(),
    ) {
        let spec = mixed(factors);
        let profile = us06(&DriveCycleOptions::default()).unwrap();
        let c = collect_data(&spec, &profile, &initial(&offsets), &design_options(seed, 200)).unwrap();
        let residual = c.batch.model_residual(&build_system(&spec).unwrap()).unwrap();
        prop_assert!(residual <= 1e-10, "{residual:e}");
        let t = c.batch.samples();
        for k in 0..t - 1 {
            prop_assert_eq!(c.batch.x1.column(k), c.batch.x0.column(k + 1));
        }
    }

    #[test]
    fn collection_is_bit_reproducible(seed in any::<u64>(), high_fidelity in any::<bool>()) {
        let spec = mixed([1.0; 6]);
        let profile = us06(&DriveCycleOptions::default()).unwrap();
        let mut options = design_options(seed, 100);
        if high_fidelity {
            options.mode = CollectionMode::HighFidelity;
        }
        let init = initial(&[0.0, 0.0, 0.0]);
        let a = collect_data(&spec, &profile, &init, &options).unwrap();
        let b = collect_data(&spec, &profile, &init, &options).unwrap();
        prop_assert_eq!(&a.batch, &b.batch);
        prop_assert_eq!(a.batch.hash(), b.batch.hash());
    }
}

/// Error of one integrator step against one Euler step of the lifted model
/// over a constant reference, for sample time `t_s`.
fn one_step_gap(t_s: f64, u: f64) -> f64 {
    let av = VehicleParams::nominal();
    let spec = PlatoonSpec::automated(&[av; 2], 20.0, 20.0, t_s).unwrap();
    let profile = ReferenceProfile::constant(20.0, 10.0).unwrap();
    let init = vec![
        VehicleState::new(20.0, 21.0, 0.5),
        VehicleState::new(-2.0, 19.0, -0.3),
    ];
    let sim = HighFidelitySimulator::new(&spec, &profile, &init);
    let start = SimStart {
        step: 0,
        states: init.clone(),
    };
    let traj = sim.run(&start, 1, &mut Hold(vec![u, -u])).unwrap();
    let s = &traj.samples[0];
    let x0 = DVector::from_iterator(6, s.errors.iter().flat_map(|e| [e.h_err, e.v_err, e.a]));
    let euler = step_design_consistent(
        &build_system(&spec).unwrap(),
        &x0,
        &DVector::from_vec(vec![u, -u]),
        &DVector::from_column_slice(&s.w),
    )
    .unwrap();
    let rk = DVector::from_iterator(
        6,
        traj.end_errors.iter().flat_map(|e| [e.h_err, e.v_err, e.a]),
    );
    (rk - euler).amax()
}

#[test]
fn euler_step_error_is_second_order() {
    for u in [0.0, 800.0] {
        let (full, half) = (one_step_gap(0.05, u), one_step_gap(0.025, u));
        let order = (full / half).log2();
        assert!(
            (1.8..=2.2).contains(&order),
            "u = {u}: local error order {order}"
        );
    }
}

#[test]
fn collection_never_closes_a_gap() {
    let spec = PlatoonSpec::automated(&[VehicleParams::nominal(); 4], 20.0, 20.0, 0.05).unwrap();
    let profile = us06(&DriveCycleOptions::default()).unwrap();
    let init = [(65.0, 20.0), (40.0, 15.0), (25.0, 18.0), (0.0, 15.0)]
        .map(|(p, v)| VehicleState::new(p, v, 0.0));
    let options = CollectionOptions {
        dither: Some(Dither {
            amplitude: 1.0,
            seed: 2,
        }),
        ..Default::default()
    };
    let c = collect_data(&spec, &profile, &init, &options).unwrap();
    assert!(c.trajectory.min_gap().unwrap() > 0.0);
}

#[test]
fn overlapping_start_is_rejected() {
    let spec = PlatoonSpec::automated(&[VehicleParams::nominal(); 2], 20.0, 20.0, 0.05).unwrap();
    let profile = us06(&DriveCycleOptions::default()).unwrap();
    let init = [
        VehicleState::new(0.0, 20.0, 0.0),
        VehicleState::new(1.0, 20.0, 0.0),
    ];
    let r = collect_data(&spec, &profile, &init, &CollectionOptions::default());
    assert!(matches!(r, Err(DataError::Collision { .. })), "{r:?}");
}
