//! Command-line front end: built-in benchmark scenarios, custom config files,
//! and stability / cut-cell-spectrum reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavecell::scenario::{
    build_block3d, build_block3d_desk, build_plate, build_plate_desk, build_spring_chain,
    build_system, config_to_scenario, parse_config, run, run_spring_chain, standard_spring_chain,
    write_artifacts, ConfigMap, IntegratorKind, RunReport, ScenarioConfig, PLATE_SEED,
};
use wavecell::spectra::{critical_dt, cut_cell_spectrum, CriticalDtReport, Scope};
use wavecell::WaveError;

#[derive(Parser)]
#[command(
    name = "wavecell",
    version,
    about = "Immersed spectral-cell solver for the scalar wave equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ten-mass spring chain with a stiff light tail under a harmonic drive.
    #[command(name = "spring-chain")]
    SpringChain(RunOpts),
    /// Perforated 2-D plate excited by a Gaussian-derivative pulse.
    #[command(name = "plate")]
    Plate(RunOpts),
    /// 3-D block with spherical voids excited by a sine burst.
    #[command(name = "block3d")]
    Block3d(RunOpts),
    /// Report maximum eigenfrequencies and critical time steps as CSV.
    #[command(name = "critical-dt")]
    CriticalDt(CriticalDtOpts),
    /// Sweep the maximum eigenfrequency of a single cut cell as CSV.
    #[command(name = "cutcell-spectrum")]
    CutcellSpectrum(SpectrumOpts),
}

#[derive(Args)]
struct RunOpts {
    /// Scenario config file (key = value lines); replaces the built-in setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Time step; default is 90% of the governing stability bound.
    #[arg(long)]
    dt: Option<f64>,
    /// cdm | cdm-hrz | trapezoidal | imex | leapfrog
    #[arg(long)]
    integrator: Option<String>,
    /// Substep count for the leap-frog integrator.
    #[arg(long = "m")]
    m: Option<usize>,
    /// Seed for the randomized plate holes and for sample points.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for receivers.csv, energy.csv, error.csv, report.txt.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use the small CI-scale mesh instead of the production one.
    #[arg(long)]
    desk: bool,
}

#[derive(Args)]
struct CriticalDtOpts {
    /// Scenario config file; when given, the report covers that system.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in system when no config is given: spring-chain | plate | block3d.
    #[arg(long, default_value = "spring-chain")]
    scenario: String,
    /// Lumping follows the integrator (cdm-hrz switches cut cells to HRZ).
    #[arg(long)]
    integrator: Option<String>,
    /// Seed for the randomized plate holes.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the CSV to <OUT>/critical_dt.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the small CI-scale mesh instead of the production one.
    #[arg(long)]
    desk: bool,
}

#[derive(Args)]
struct SpectrumOpts {
    /// Quadrature-tree depth for the composite rule on the cut cell.
    #[arg(long, default_value_t = 12)]
    depth: u32,
    /// Void-indicator exponent: fictitious scaling is 10^-beta.
    #[arg(long, default_value_t = 6)]
    beta: u32,
    /// Also write the CSV to <OUT>/cutcell_spectrum.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SpringChain(o) => cmd_spring_chain(o),
        Command::Plate(o) => cmd_mesh_scenario(o, BuiltIn::Plate),
        Command::Block3d(o) => cmd_mesh_scenario(o, BuiltIn::Block3d),
        Command::CriticalDt(o) => cmd_critical_dt(o),
        Command::CutcellSpectrum(o) => cmd_spectrum(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_config_map(path: &Path) -> Result<ConfigMap, WaveError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WaveError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

enum BuiltIn {
    Plate,
    Block3d,
}

fn built_in_scenario(which: BuiltIn, seed: Option<u64>, desk: bool) -> ScenarioConfig {
    match which {
        BuiltIn::Plate => {
            let seed = seed.unwrap_or(PLATE_SEED);
            if desk {
                build_plate_desk(seed)
            } else {
                build_plate(seed)
            }
        }
        BuiltIn::Block3d => {
            if desk {
                build_block3d_desk()
            } else {
                build_block3d()
            }
        }
    }
}

fn apply_overrides(config: &mut ScenarioConfig, o: &RunOpts) -> Result<(), WaveError> {
    if let Some(dt) = o.dt {
        config.dt = Some(dt);
    }
    if let Some(name) = &o.integrator {
        config.integrator = IntegratorKind::parse(name)?;
    }
    if let Some(m) = o.m {
        config.substeps = m;
    }
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    config.validate()
}

fn cmd_mesh_scenario(o: RunOpts, which: BuiltIn) -> Result<(), WaveError> {
    let mut config = match &o.config {
        Some(path) => config_to_scenario(&read_config_map(path)?)?,
        None => built_in_scenario(which, o.seed, o.desk),
    };
    apply_overrides(&mut config, &o)?;
    let artifacts = run(&config)?;
    let files = write_artifacts(
        &o.out,
        &artifacts.times,
        &artifacts.traces,
        &artifacts.energies,
        &artifacts.report,
    )?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_spring_chain(o: RunOpts) -> Result<(), WaveError> {
    let mut chain = standard_spring_chain();
    let mut integrator = IntegratorKind::Imex;
    let mut substeps = 5usize;
    let mut dt_opt = None;

    if let Some(path) = &o.config {
        let map = read_config_map(path)?;
        match map.get("geometry") {
            Some("spring-chain") => {}
            Some(other) => {
                return Err(WaveError::config(format!(
                    "this subcommand runs `geometry = spring-chain`, the config says `{other}`"
                )))
            }
            None => {
                return Err(WaveError::config(
                    "config for the spring chain needs `geometry = spring-chain`",
                ))
            }
        }
        let heavy = map.get_usize("chain.heavy")?.unwrap_or(8);
        let light = map.get_usize("chain.light")?.unwrap_or(2);
        let m_heavy = map.get_f64("chain.m_heavy")?.unwrap_or(1.0);
        let m_light = map.get_f64("chain.m_light")?.unwrap_or(1e-3);
        let k = map.get_f64("chain.k")?.unwrap_or(1.0);
        if heavy < 1 || heavy + light < 3 {
            return Err(WaveError::config(
                "chain needs at least one heavy mass and three masses in total",
            ));
        }
        if !(m_heavy > 0.0 && m_light > 0.0 && k > 0.0) {
            return Err(WaveError::config(
                "chain masses and stiffness must be positive",
            ));
        }
        chain = build_spring_chain(heavy, light, m_heavy, m_light, k);
        if let Some(fs) = map.get_f64("source.fs")? {
            if !(fs > 0.0) {
                return Err(WaveError::config("source.fs must be positive"));
            }
            chain.f_s = fs;
        }
        if let Some(t) = map.get_f64("duration")? {
            if !(t > 0.0) {
                return Err(WaveError::config("duration must be positive"));
            }
            chain.duration = t;
        }
        if let Some(s) = map.get("integrator.kind") {
            integrator = IntegratorKind::parse(s)?;
        }
        dt_opt = map.get_f64("integrator.dt")?;
        if let Some(m) = map.get_usize("integrator.m")? {
            substeps = m;
        }
    }
    if let Some(name) = &o.integrator {
        integrator = IntegratorKind::parse(name)?;
    }
    if let Some(m) = o.m {
        substeps = m;
    }
    if o.dt.is_some() {
        dt_opt = o.dt;
    }

    let global = critical_dt(&chain.sys, Scope::Global)?;
    let explicit = critical_dt(&chain.sys, Scope::ExplicitSubsystem)?;
    let dt = dt_opt.unwrap_or_else(|| {
        0.9 * match integrator {
            IntegratorKind::Cdm | IntegratorKind::CdmHrz => global.dt_crit,
            _ => explicit.dt_crit,
        }
    });
    let result = run_spring_chain(&chain, integrator, dt, substeps)?;

    let n = chain.sys.n;
    let mut traces = vec![Vec::with_capacity(result.times.len()); n];
    for u in &result.trajectory {
        for (trace, &ui) in traces.iter_mut().zip(u) {
            trace.push(ui);
        }
    }
    let report = RunReport {
        scenario: "spring-chain".to_string(),
        integrator,
        n_dof: n,
        n_d: chain.sys.partition.i_d.len(),
        n_c: chain.sys.partition.i_c.len(),
        histogram: Vec::new(),
        dt_global: global.dt_crit,
        dt_explicit: Some(explicit.dt_crit),
        dt_used: result.dt,
        n_steps: result.n_steps,
        wall_seconds: result.wall_seconds,
        e_l2: Some(result.error),
    };
    let files = write_artifacts(&o.out, &result.times, &traces, &result.energies, &report)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_critical_dt(o: CriticalDtOpts) -> Result<(), WaveError> {
    let integrator = match &o.integrator {
        Some(name) => IntegratorKind::parse(name)?,
        None => IntegratorKind::Imex,
    };
    let reports: Vec<CriticalDtReport> = match &o.config {
        None if o.scenario == "spring-chain" => {
            let chain = standard_spring_chain();
            vec![
                critical_dt(&chain.sys, Scope::Global)?,
                critical_dt(&chain.sys, Scope::ExplicitSubsystem)?,
            ]
        }
        maybe => {
            let mut config = match maybe {
                Some(path) => config_to_scenario(&read_config_map(path)?)?,
                None => match o.scenario.as_str() {
                    "plate" => built_in_scenario(BuiltIn::Plate, o.seed, o.desk),
                    "block3d" => built_in_scenario(BuiltIn::Block3d, o.seed, o.desk),
                    other => {
                        return Err(WaveError::config(format!(
                            "unknown scenario `{other}` (expected spring-chain, plate, block3d)"
                        )))
                    }
                },
            };
            config.integrator = integrator;
            let (_mesh, sys) = build_system(&config)?;
            let mut v = vec![critical_dt(&sys, Scope::Global)?];
            if !sys.partition.i_d.is_empty() {
                v.push(critical_dt(&sys, Scope::ExplicitSubsystem)?);
            }
            v
        }
    };
    let mut csv = String::from("scope,omega_max,dt_crit\n");
    for r in &reports {
        csv.push_str(&format!("{},{},{}\n", r.scope, r.omega_max, r.dt_crit));
    }
    print!("{csv}");
    if let Some(dir) = &o.out {
        write_report_csv(dir, "critical_dt.csv", &csv)?;
    }
    Ok(())
}

fn cmd_spectrum(o: SpectrumOpts) -> Result<(), WaveError> {
    let etas = [1.0, 0.9, 0.5, 0.1, 0.05, 0.01];
    let alpha = 10f64.powi(-(o.beta as i32));
    let mut csv = String::from("eta,p,omega_max\n");
    for p in 1..=3usize {
        for &eta in &etas {
            let w = cut_cell_spectrum(eta, p, o.depth, alpha)?;
            csv.push_str(&format!("{eta},{p},{w}\n"));
        }
    }
    print!("{csv}");
    if let Some(dir) = &o.out {
        write_report_csv(dir, "cutcell_spectrum.csv", &csv)?;
    }
    Ok(())
}

fn write_report_csv(dir: &Path, name: &str, csv: &str) -> Result<(), WaveError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| WaveError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, csv)
        .map_err(|e| WaveError::config(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
