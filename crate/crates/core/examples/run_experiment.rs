//! Runs the whole pipeline from a TOML configuration and lists the
//! artifacts it wrote.

use ddcacc::experiment::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
name = "three-avs"
seed = 5
output_dir = "target/example-three-avs"

[platoon]
h_star = 20.0
v_star = 20.0
t_s = 0.05
vehicles = [
    { kind = "automated", initial = [45.0, 20.0, 0.0] },
    { kind = "automated", initial = [20.0, 18.0, 0.0] },
    { kind = "automated", initial = [0.0, 16.0, 0.0] },
]

[synthesis]
max_subplatoon_sizes = [1]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    let report = run_experiment(&config)?;
    for m in &report.metrics {
        println!(
            "{:<12} {:<10} rms velocity {:.3?}",
            m.controller, m.status, m.rms_velocity_deviation
        );
    }
    for path in &report.artifacts {
        println!("{}", path.display());
    }
    std::process::exit(report.exit_code());
}
