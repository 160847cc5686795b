//! Builds the lifted error model of a mixed platoon and the disturbance
//! bound the synthesis has to tolerate.

use ddcacc::dynamics::{
    build_system, disturbance_bound, HvBox, HvParams, ParamBox, PlatoonSpec, Vehicle, VehicleBox,
    VehicleParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let av = VehicleParams::nominal();
    let hv = HvParams::reference();
    let spec = PlatoonSpec::new(
        vec![
            Vehicle::Automated(av),
            Vehicle::Human(hv),
            Vehicle::Automated(av),
        ],
        20.0,
        20.0,
        0.05,
    )?;
    let sys = build_system(&spec)?;
    println!(
        "n_x = {}, n_z = {}, n_u = {}",
        sys.n_x(),
        sys.n_z(),
        sys.n_u()
    );
    println!("automated vehicles driven by U: {:?}", sys.input_vehicles);

    let boxes = [
        VehicleBox::Automated(ParamBox::relative(av, 0.1)?),
        VehicleBox::Human(HvBox::exact(hv)),
        VehicleBox::Automated(ParamBox::relative(av, 0.1)?),
    ];
    let bound = disturbance_bound(&boxes, &spec)?;
    println!(
        "per-vehicle |w| bounds {:.3?}, δ = {:.3}",
        bound.per_vehicle, bound.delta
    );
    println!(
        "drift jerk at 25 m/s, 1 m/s²: {:.4} m/s³",
        av.drift_jerk(25.0, 1.0)
    );
    Ok(())
}
