//! End-to-end tests of the `stiffbuck` binary: exit codes, CSV
//! round-tripping, and description-file workflows.

use std::process::{Command, Output};

use stiffbuck_cli::csv;

fn stiffbuck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stiffbuck"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn missing_model_source_is_a_usage_error() {
    let out = stiffbuck(&["trace"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn both_model_sources_is_a_usage_error() {
    let out = stiffbuck(&[
        "trace",
        "--scenario",
        "modelA-S",
        "--config",
        "whatever.toml",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = stiffbuck(&["analyze", "--scenario", "modelQ-X"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown scenario"), "{err}");
}

#[test]
fn malformed_ray_is_a_usage_error() {
    let out = stiffbuck(&["trace", "--scenario", "modelA-S", "--ray", "diagonal"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_steps_is_a_usage_error() {
    let out = stiffbuck(&["trace", "--scenario", "modelA-S", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convergence_gaps_exit_with_code_two() {
    // One iteration cannot reach the displaced targets, so every loaded
    // point records a gap.
    let out = stiffbuck(&[
        "trace",
        "--scenario",
        "modelB-Pi",
        "--max-iters",
        "1",
        "--steps",
        "4",
        "--delta-max",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(",gap,"), "{text}");
}

#[test]
fn traced_csv_starts_with_the_header_and_round_trips() {
    let out = stiffbuck(&[
        "trace",
        "--scenario",
        "modelA-S",
        "--delta-max",
        "0.4",
        "--steps",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(csv::HEADER), "header must be the first line");

    // Bit-exact round trip: parse, re-render from the parsed values,
    // compare bytes.
    let rows = csv::parse(&text).unwrap();
    assert_eq!(rows.len(), 9);
    let mut again = String::from(csv::HEADER);
    again.push('\n');
    for r in &rows {
        let fields = [
            format!("{}", r.delta),
            format!("{}", r.f_along),
            format!("{}", r.force[0]),
            format!("{}", r.force[1]),
            format!("{}", r.force[2]),
            format!("{}", r.moment[0]),
            format!("{}", r.moment[1]),
            format!("{}", r.moment[2]),
            format!("{}", r.energy),
            r.stable.clone(),
            format!("{}", r.min_eig),
            format!("{}", r.tangent_stiffness),
        ];
        again.push_str(&fields.join(","));
        again.push('\n');
    }
    assert_eq!(text, again);
}

#[test]
fn buckle_writes_the_trace_csv_to_the_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("b.csv");
    let out = stiffbuck(&[
        "buckle",
        "--scenario",
        "modelB-S",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("F_crit"), "{report}");
    assert!(report.contains("modelB-S"), "{report}");
    let rows = csv::parse(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(rows.len() > 10);
}

#[test]
fn description_file_chain_traces_and_analyzes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("column.toml");
    std::fs::write(
        &path,
        r#"
[chain]
[[chain.elements]]
joint = { kind = "actuated", axis = "tx", value = 0.0 }
[[chain.elements]]
spring = { dof = 6, beam = { L = 1.0, a = 0.02, b = 0.05, E = 4.8e6, G = 2.0e6 } }
[[chain.elements]]
transform = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
"#,
    )
    .unwrap();

    let out = stiffbuck(&[
        "trace",
        "--config",
        path.to_str().unwrap(),
        "--delta-max",
        "0.01",
        "--steps",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.stable == "stable"));

    let out = stiffbuck(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rank: 6"), "{text}");

    // A sweep on a description file needs an explicit window.
    let out = stiffbuck(&["trace", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_code_one_and_name_the_element() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        r#"
[chain]
[[chain.elements]]
spring = { dof = 2, K = [1.0, 0.5, 0.3, 1.0] }
"#,
    )
    .unwrap();
    let out = stiffbuck(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("spring block not symmetric"), "{err}");
    assert!(err.contains("element 0"), "{err}");
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(stiffbuck(&["--help"]).status.code(), Some(0));
    assert_eq!(stiffbuck(&["--version"]).status.code(), Some(0));
}
