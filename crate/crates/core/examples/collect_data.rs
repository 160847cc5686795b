//! Drives four automated vehicles under ACC with probing noise over the
//! drive cycle and checks that the recorded data is rich enough.

use ddcacc::datagen::{
    check_richness, collect_data, us06, CollectionOptions, Dither, DriveCycleOptions,
};
use ddcacc::dynamics::{PlatoonSpec, VehicleParams, VehicleState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = PlatoonSpec::automated(&[VehicleParams::nominal(); 4], 20.0, 20.0, 0.05)?;
    let profile = us06(&DriveCycleOptions::default())?;
    let initial: Vec<VehicleState> = [(65.0, 20.0), (40.0, 15.0), (25.0, 18.0), (0.0, 15.0)]
        .iter()
        .map(|&(p, v)| VehicleState::new(p, v, 0.0))
        .collect();
    let options = CollectionOptions {
        dither: Some(Dither {
            amplitude: 1.0,
            seed: 7,
        }),
        ..Default::default()
    };
    let collection = collect_data(&spec, &profile, &initial, &options)?;
    let report = check_richness(&collection.batch.z0);
    println!(
        "{} samples, rank(Z0) = {} of {}, σ range [{:.3e}, {:.3e}]",
        report.samples,
        report.rank,
        report.n_z,
        report.smallest_singular_value,
        report.largest_singular_value
    );
    println!("batch hash {}", collection.batch.hash());
    let path = std::env::temp_dir().join("ddcacc_collection.csv");
    collection
        .trajectory
        .write_csv(std::fs::File::create(&path)?)?;
    println!("trajectory written to {}", path.display());
    Ok(())
}
