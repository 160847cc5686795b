//! Learns a CACC gain for two automated vehicles from data recorded on the
//! exact discrete model, then checks the certificate and the closed loop.

use ddcacc::datagen::{
    collect_data, us06, CollectionMode, CollectionOptions, Dither, DriveCycleOptions,
};
use ddcacc::dynamics::{
    disturbance_bound, ParamBox, PlatoonSpec, VehicleBox, VehicleParams, VehicleState,
};
use ddcacc::synthesis::{
    disturbance_matrix, solve_sdp, verify_closed_loop, SynthesisProblem, SynthesisSettings,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let nominal = VehicleParams::nominal();
    let spec = PlatoonSpec::automated(&[nominal; 2], 20.0, 20.0, 0.05)?;
    let initial = [
        VehicleState::new(25.0, 20.0, 0.0),
        VehicleState::new(0.0, 18.0, 0.0),
    ];
    let options = CollectionOptions {
        mode: CollectionMode::DesignConsistent,
        dither: Some(Dither {
            amplitude: 1.0,
            seed: 11,
        }),
        ..Default::default()
    };
    let batch = collect_data(
        &spec,
        &us06(&DriveCycleOptions::default())?,
        &initial,
        &options,
    )?
    .batch;

    let boxes = vec![VehicleBox::Automated(ParamBox::relative(nominal, 0.1)?); 2];
    let delta = disturbance_bound(&boxes, &spec)?.delta;
    let problem = SynthesisProblem::from_batch(&batch, delta)?;
    let result = solve_sdp(&problem, &SynthesisSettings::default())?;
    println!(
        "{}: γ = {:.4}, ε = ({}, {}), {:.2} s",
        result.status, result.gamma, result.epsilon1, result.epsilon2, result.solve_seconds
    );
    println!("K =\n{:.2}", result.k);
    println!(
        "max equality residual {:.2e}",
        result.residuals.max_equality()
    );

    let w0 = batch.w0.as_ref().expect("design-consistent data records w");
    let d = disturbance_matrix(&batch.layout, batch.t_s);
    let diag = verify_closed_loop(
        &batch.z0, &batch.x1, w0, &d, &result.p, &result.y, &result.g2,
    )?;
    println!(
        "spectral radius of the closed loop: {:.4}",
        diag.spectral_radius
    );
    Ok(())
}
