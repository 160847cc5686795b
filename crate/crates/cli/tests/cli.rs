use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddcacc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddcacc"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_config(dir: &Path, samples: usize) -> String {
    let path = dir.join("small.toml");
    let profile = dir.join("constant.csv");
    fs::write(&profile, "time_s,speed_mps\n0,20\n30,20\n").unwrap();
    fs::write(
        &path,
        format!(
            r#"
name = "small"
output_dir = "{}"

[platoon]
h_star = 20.0
v_star = 20.0
t_s = 0.05
vehicles = [
    {{ kind = "automated", initial = [24.0, 20.5, 0.0] }},
    {{ kind = "automated", initial = [0.0, 19.0, 0.0] }},
]

[collection]
samples = {samples}

[profile]
file = "{}"
hold_duration = 20.0
"#,
            dir.join("out").display(),
            profile.display()
        ),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seed = [").unwrap();
    let out = ddcacc(&["--config", path.to_str().unwrap(), "collect"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn too_few_samples_exits_with_infeasible_code() {
    // Two automated vehicles lift to n_z = 10; nine samples cannot span it.
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 9);
    let out = ddcacc(&["--config", &config, "run", "case1"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stepwise_commands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 300);
    let out_dir = dir.path().join("out");
    let step = |args: &[&str]| {
        let mut all = vec!["--config", config.as_str()];
        all.extend_from_slice(args);
        let out = ddcacc(&all);
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };

    step(&["collect"]);
    assert!(out_dir.join("batch.json").is_file());
    step(&["synthesize"]);
    let controller = out_dir.join("synthesis").join("controller_monolithic.json");
    assert!(controller.is_file());
    step(&["simulate", "--controller", controller.to_str().unwrap()]);
    step(&["simulate", "--acc"]);

    let cacc = out_dir.join("trajectory_cacc_monolithic.csv");
    let acc = out_dir.join("trajectory_acc.csv");
    let metrics = step(&[
        "metrics",
        "--trajectory",
        cacc.to_str().unwrap(),
        "--trajectory",
        acc.to_str().unwrap(),
    ]);
    let table = String::from_utf8(metrics.stdout).unwrap();
    assert!(table.starts_with("controller,status,metric,index,value"));
    assert!(table.contains("cacc_monolithic,recorded,rms_velocity_deviation,1,"));
    assert!(out_dir.join("metrics.csv").is_file());

    step(&[
        "plot",
        "--trajectory",
        cacc.to_str().unwrap(),
        "--trajectory",
        acc.to_str().unwrap(),
    ]);
    assert!(out_dir.join("spacing.svg").is_file());
    assert!(out_dir.join("velocity_deviation.svg").is_file());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 300);
    let elsewhere = dir.path().join("elsewhere");
    let out = ddcacc(&[
        "--config",
        &config,
        "--seed",
        "11",
        "--output-dir",
        elsewhere.to_str().unwrap(),
        "collect",
    ]);
    assert_eq!(code(&out), 0);
    let echo = fs::read_to_string(elsewhere.join("config.csv")).unwrap();
    assert!(echo.lines().any(|l| l == "config.seed,11"), "{echo}");
}
