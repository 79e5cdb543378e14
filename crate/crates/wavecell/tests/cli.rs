//! End-to-end tests of the `wavecell` binary: exit codes, artifact files,
//! CSV headers, and config-file handling.

use std::path::Path;
use std::process::{Command, Output};

fn wavecell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn first_line(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    text.lines().next().unwrap_or_default().to_string()
}

#[test]
fn spring_chain_run_succeeds_and_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavecell(&["spring-chain", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let recv = dir.path().join("receivers.csv");
    let energy = dir.path().join("energy.csv");
    let error = dir.path().join("error.csv");
    let report = dir.path().join("report.txt");
    for f in [&recv, &energy, &error, &report] {
        assert!(f.is_file(), "missing artifact {f:?}");
    }
    assert_eq!(first_line(&recv), "t,r0,r1,r2,r3,r4,r5,r6,r7,r8,r9");
    assert_eq!(first_line(&energy), "t,E");
    assert_eq!(first_line(&error), "dt,integrator,e_l2,runtime_s");

    let error_row = std::fs::read_to_string(&error).unwrap();
    let row = error_row.lines().nth(1).expect("error.csv has a data row");
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[1], "imex");
    assert!(fields[2].parse::<f64>().unwrap().is_finite());

    let rep = std::fs::read_to_string(&report).unwrap();
    assert!(rep.contains("scenario=spring-chain"), "report: {rep}");
    assert!(rep.contains("n_dof=10"), "report: {rep}");
    assert!(rep.contains("dt_explicit="), "report: {rep}");

    let stdout = stdout_of(&out);
    assert_eq!(stdout.matches("wrote ").count(), 4, "stdout: {stdout}");
}

#[test]
fn unstable_time_step_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavecell(&[
        "spring-chain",
        "--integrator",
        "cdm",
        "--dt",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("instability"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn config_errors_exit_with_code_2() {
    // Unreadable config file.
    let out = wavecell(&["spring-chain", "--config", "/no/such/file.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("cannot read"));

    // Config whose geometry contradicts the subcommand.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plate.cfg");
    std::fs::write(&cfg, "geometry = box(0, 0, 1, 1)\n").unwrap();
    let out = wavecell(&["spring-chain", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));

    // Unknown integrator name.
    let out = wavecell(&["spring-chain", "--integrator", "warp"]);
    assert_eq!(out.status.code(), Some(2));

    // Negative time step.
    let out = wavecell(&["spring-chain", "--dt", "-1"]);
    assert_eq!(out.status.code(), Some(2));

    // Malformed key = value syntax inside the file.
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "geometry = spring-chain\nchain.k banana\n").unwrap();
    let out = wavecell(&["spring-chain", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown command-line flag (usage error).
    let out = wavecell(&["spring-chain", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn critical_dt_reports_both_scopes_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavecell(&["critical-dt", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.starts_with("scope,omega_max,dt_crit"), "{stdout}");

    let csv = std::fs::read_to_string(dir.path().join("critical_dt.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "csv: {csv}");
    let mut rows = std::collections::HashMap::new();
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 3);
        rows.insert(
            f[0].to_string(),
            (f[1].parse::<f64>().unwrap(), f[2].parse::<f64>().unwrap()),
        );
    }
    let global = rows["global"];
    let explicit = rows["explicit_subsystem"];
    // The stiff light tail raises the global frequency far above the
    // explicit (heavy-only) subsystem's, so its critical step is smaller.
    assert!(global.1 < explicit.1);
    assert!((global.1 - 2.0 / global.0).abs() < 1e-12 * global.1);
}

#[test]
fn cutcell_spectrum_sweeps_eta_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavecell(&[
        "cutcell-spectrum",
        "--depth",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(dir.path().join("cutcell_spectrum.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "eta,p,omega_max");
    assert_eq!(lines.len(), 1 + 3 * 6, "three orders, six fill fractions");
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[2].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn custom_plate_config_runs_and_reports_fill_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(
        &cfg,
        "\
# Tiny immersed strip with one hole.
scenario = tiny-strip
geometry = difference(box(0, 0, 2, 1), disk(1.0, 0.5, 0.3))
dim = 2
extent = 0, 0, 2, 1
mesh.cells = 4, 2
mesh.p = 2
mesh.depth = 3
duration = 0.5
source.kind = gaussian_derivative
source.fs = 1.0
source.center = 0.4, 0.5
source.sigma = 0.2
receiver.0 = 1.6, 0.5
integrator.kind = imex
",
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = wavecell(&[
        "plate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert_eq!(first_line(&out_dir.join("receivers.csv")), "t,r0");
    let rep = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(rep.contains("scenario=tiny-strip"), "report: {rep}");
    assert!(rep.contains("fill."), "fill histogram missing: {rep}");

    // The same config drives the stability report.
    let out = wavecell(&["critical-dt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("global"), "{stdout}");
    assert!(stdout.contains("explicit"), "{stdout}");
}
