//! Compares one SDP for four vehicles with two SDPs for pairs of vehicles,
//! each learned from the same recorded batch.

use ddcacc::experiment::{collect, synthesize_variant, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let resolved = ExperimentConfig::case1().resolve()?;
    let profile = resolved.config.profile.load()?;
    let collection = collect(&resolved, &profile)?;
    for size in [2, 4] {
        let v = synthesize_variant(&resolved, &collection.batch, size)?;
        println!(
            "{} ({}): {:.1} s in total",
            v.name,
            v.status(),
            v.solve_seconds
        );
        for g in &v.groups {
            println!(
                "  vehicles {}..={}: n_z = {}, δ = {:.3}, {:.1} s, ρ = {:?}",
                g.range.start + 1,
                g.range.end,
                g.n_z,
                g.delta,
                g.solve_seconds,
                g.spectral_radius
            );
        }
    }
    Ok(())
}
