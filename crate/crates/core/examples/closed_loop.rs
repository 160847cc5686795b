//! Learns a pairwise controller, then drives the perturbed four-vehicle
//! platoon over the rest of the drive cycle with it and with ACC.

use ddcacc::datagen::AccController;
use ddcacc::experiment::{
    collect, compute_metrics, evaluate, synthesize_variant, ExperimentConfig, Window,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let resolved = ExperimentConfig::case1().resolve()?;
    let profile = resolved.config.profile.load()?;
    let collection = collect(&resolved, &profile)?;
    let mut bundle = synthesize_variant(&resolved, &collection.batch, 2)?
        .bundle
        .ok_or("pairwise synthesis was infeasible")?;
    let acc = &resolved.config.acc;
    let mut baseline = AccController::new(&resolved.spec, acc.gains(), acc.nominal_mass, None);

    let window = Window::from(resolved.window_start());
    for (name, traj) in [
        (
            "ACC",
            evaluate(&resolved, &profile, &collection, &mut baseline)?,
        ),
        (
            "CACC",
            evaluate(&resolved, &profile, &collection, &mut bundle)?,
        ),
    ] {
        let m = compute_metrics(&traj.samples, window, name)?;
        println!(
            "{name:<5} rms velocity {:.3?}  rms spacing {:.3?}  min gap {:.2} m",
            m.rms_velocity_deviation,
            m.rms_spacing_error,
            m.min_gap.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
