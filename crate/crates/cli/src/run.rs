//! Argument parsing and the four command drivers.
//!
//! Every command names its model either by built-in scenario
//! (`--scenario modelB-S`) or by description file (`--config legs.toml`),
//! never both. Sweep commands (`trace`, `buckle`) follow a displacement
//! ray; held-pose commands (`analyze`, `stability`) examine the unloaded
//! reference pose, or a single displaced pose when `--delta-max` is
//! given. Exit codes: 0 when every requested solve converged, 2 when any
//! did not, 1 for usage or configuration errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use nalgebra::{Matrix6, Vector6};
use stiffbuck_core::assembly::AssemblyState;
use stiffbuck_core::equilibrium::solve_for_pose;
use stiffbuck_core::pathtrace::{detect_buckling, trace, CrossingKind, Mechanism, PathPoint};
use stiffbuck_core::scenarios::{by_name, scenario_names, Built};
use stiffbuck_core::stability::classify;
use stiffbuck_core::stiffness::{kc_full, SingularKind, StiffnessResult};
use stiffbuck_core::{tol, EquilibriumState, SolverSettings};

use crate::config;
use crate::csv;
use crate::error::{io_context, CliError};

#[derive(Parser, Debug)]
#[command(
    name = "stiffbuck",
    version,
    about = "Elastostatics of elastic kinematic chains: equilibrium, stiffness, stability, buckling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cartesian stiffness, rank, and stability at a held pose
    Analyze(CommonArgs),
    /// Force-deflection sweep along a ray, emitted as CSV
    Trace(CommonArgs),
    /// Sweep plus buckling detection and a summary table
    Buckle(CommonArgs),
    /// Stability verdict at a held pose
    Stability(CommonArgs),
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "config"])))]
pub struct CommonArgs {
    /// Built-in scenario name (modelA-S .. modelC-Z, orthoglide-Q0 .. -Q4)
    #[arg(long, value_name = "NAME")]
    pub scenario: Option<String>,

    /// Model description file
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Displacement direction: x|y|z (compress along that axis), bisect
    /// (compress along the space diagonal), or six comma-separated twist
    /// components, translation first
    #[arg(long, value_name = "RAY")]
    pub ray: Option<String>,

    /// Largest displacement magnitude of the sweep (or the held offset
    /// for analyze/stability)
    #[arg(long, value_name = "DELTA")]
    pub delta_max: Option<f64>,

    /// Number of uniform sweep increments
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,

    /// Seed for the solver's randomized restarts
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Convergence threshold on the weighted equilibrium residual
    #[arg(long, value_name = "TOL")]
    pub residual_tol: Option<f64>,

    /// Iteration budget per solve attempt
    #[arg(long, value_name = "N")]
    pub max_iters: Option<usize>,

    /// Output file (CSV for trace/buckle, report text otherwise)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Runs the process: parse arguments, dispatch, map errors to exit codes.
pub fn entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(&resolve(&args)?),
        Command::Trace(args) => cmd_trace(&resolve(&args)?),
        Command::Buckle(args) => cmd_buckle(&resolve(&args)?),
        Command::Stability(args) => cmd_stability(&resolve(&args)?),
    }
}

/// A command with its model and parameters fully determined.
struct Resolved {
    label: String,
    built: Built,
    /// Reference force normalization (bending rate over link length),
    /// echoed in reports when the model declares one.
    force_unit: Option<f64>,
    ray: Vector6<f64>,
    /// `--delta-max` exactly as given (held-pose commands).
    held_delta: Option<f64>,
    /// `--delta-max`, falling back to the scenario suggestion (sweeps).
    sweep_delta: Option<f64>,
    steps: usize,
    settings: SolverSettings,
    out: Option<PathBuf>,
}

impl Resolved {
    fn mechanism(&self) -> Mechanism<'_> {
        match &self.built {
            Built::Chain(chain) => Mechanism::Chain(chain),
            Built::Assembly(assembly) => Mechanism::Assembly(assembly),
        }
    }

    fn unit_ray(&self) -> Vector6<f64> {
        let n = self.ray.norm();
        if n > 0.0 {
            self.ray / n
        } else {
            self.ray
        }
    }
}

fn resolve(args: &CommonArgs) -> Result<Resolved, CliError> {
    let (label, built, force_unit, default_ray, suggested_delta, suggested_steps) =
        match (&args.scenario, &args.config) {
            (Some(name), None) => {
                let scenario = by_name(name).ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown scenario '{name}'; known scenarios: {}",
                        scenario_names().join(", ")
                    ))
                })??;
                (
                    scenario.name.to_string(),
                    scenario.built,
                    Some(scenario.force_unit),
                    scenario.default_ray,
                    Some(scenario.suggested_delta_max),
                    Some(scenario.suggested_steps),
                )
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(io_context(format!("reading {}", path.display())))?;
                let built = config::parse_document(&text)?;
                let ray = match &built {
                    Built::Chain(_) => Vector6::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
                    Built::Assembly(_) => {
                        Vector6::new(-1.0, -1.0, -1.0, 0.0, 0.0, 0.0) / 3f64.sqrt()
                    }
                };
                (path.display().to_string(), built, None, ray, None, None)
            }
            _ => unreachable!("the argument group admits exactly one source"),
        };
    let ray = match &args.ray {
        Some(text) => parse_ray(text)?,
        None => default_ray,
    };
    if let Some(d) = args.delta_max {
        if !(d.is_finite() && d >= 0.0) {
            return Err(CliError::Usage(format!(
                "--delta-max must be finite and non-negative, got {d}"
            )));
        }
    }
    let defaults = SolverSettings::default();
    let residual_tol = args.residual_tol.unwrap_or(defaults.residual_tol);
    if !(residual_tol.is_finite() && residual_tol > 0.0) {
        return Err(CliError::Usage(format!(
            "--residual-tol must be positive, got {residual_tol}"
        )));
    }
    Ok(Resolved {
        label,
        built,
        force_unit,
        ray,
        held_delta: args.delta_max,
        sweep_delta: args.delta_max.or(suggested_delta),
        steps: args.steps.or(suggested_steps).unwrap_or(50),
        settings: SolverSettings {
            rng_seed: args.seed.unwrap_or(0),
            residual_tol,
            max_iters: args.max_iters.unwrap_or(defaults.max_iters),
            ..defaults
        },
        out: args.out.clone(),
    })
}

fn parse_ray(text: &str) -> Result<Vector6<f64>, CliError> {
    let axis = |x: f64, y: f64, z: f64| Vector6::new(x, y, z, 0.0, 0.0, 0.0);
    match text {
        "x" => return Ok(axis(-1.0, 0.0, 0.0)),
        "y" => return Ok(axis(0.0, -1.0, 0.0)),
        "z" => return Ok(axis(0.0, 0.0, -1.0)),
        "bisect" => return Ok(axis(-1.0, -1.0, -1.0) / 3f64.sqrt()),
        _ => {}
    }
    let parts: Vec<&str> = text.split([',', ' ']).filter(|s| !s.is_empty()).collect();
    if parts.len() != 6 {
        return Err(CliError::Usage(format!(
            "ray '{text}' is neither x|y|z|bisect nor six comma-separated numbers"
        )));
    }
    let mut v = Vector6::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .parse::<f64>()
            .map_err(|e| CliError::Usage(format!("ray component '{p}': {e}")))?;
    }
    if !(v.norm() > 0.0) {
        return Err(CliError::Usage("ray must be nonzero".into()));
    }
    Ok(v)
}

/// Solved state of a held-pose command, by mechanism kind.
enum Held {
    Chain(EquilibriumState),
    Assembly(AssemblyState),
}

/// Solves the equilibrium at the reference pose, displaced by
/// `--delta-max` along the ray when one was given.
fn solve_held(r: &Resolved) -> Result<(f64, Held), CliError> {
    let delta = r.held_delta.unwrap_or(0.0);
    let reference = r.mechanism().reference_pose();
    let target = reference.displaced(&(r.unit_ray() * delta));
    match &r.built {
        Built::Chain(chain) => {
            let state = solve_for_pose(
                chain,
                &target,
                &chain.reference_configuration(),
                &r.settings,
            );
            if !state.converged {
                return Err(CliError::Solve(format!(
                    "equilibrium at delta {delta} did not converge (best residual {:.3e})",
                    state.residual_norm
                )));
            }
            Ok((delta, Held::Chain(state)))
        }
        Built::Assembly(assembly) => {
            let state = assembly.solve_for_pose(&target, None, &r.settings);
            if !state.converged {
                let worst = state
                    .chain_states
                    .iter()
                    .map(|s| s.residual_norm)
                    .fold(0.0, f64::max);
                return Err(CliError::Solve(format!(
                    "assembly equilibrium at delta {delta} did not converge (worst residual {worst:.3e})"
                )));
            }
            Ok((delta, Held::Assembly(state)))
        }
    }
}

fn state_line(r: &Resolved, delta: f64) -> String {
    if delta == 0.0 {
        "state: unloaded reference pose".to_string()
    } else {
        format!("state: displaced by {delta} along {}", ray_text(&r.unit_ray()))
    }
}

fn ray_text(ray: &Vector6<f64>) -> String {
    let parts: Vec<String> = ray.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn force_unit_line(r: &Resolved, text: &mut String) {
    if let Some(unit) = r.force_unit {
        let _ = writeln!(text, "force unit: K_theta/L = {unit}");
    }
}

fn matrix_text(k: &Matrix6<f64>) -> String {
    let mut out = String::new();
    for row in 0..6 {
        out.push(' ');
        for col in 0..6 {
            let _ = write!(out, " {:>13.6e}", k[(row, col)]);
        }
        out.push('\n');
    }
    out
}

fn stiffness_section(result: &StiffnessResult, text: &mut String) {
    let _ = writeln!(text, "cartesian stiffness K_c:");
    text.push_str(&matrix_text(&result.k_c));
    let _ = writeln!(text, "rank: {}", result.rank);
    let _ = writeln!(text, "condition: {:.6e}", result.condition);
    if result.condition > tol::CONDITION_WARN {
        let _ = writeln!(
            text,
            "warning: condition number exceeds {:e}; rank and directions near the cutoff are unreliable",
            tol::CONDITION_WARN
        );
    }
    let _ = writeln!(text, "symmetry defect: {:.3e}", result.asymmetry);
    if result.singular_directions.is_empty() {
        let _ = writeln!(text, "singular directions: none");
    } else {
        let _ = writeln!(text, "singular directions:");
        for d in &result.singular_directions {
            let kind = match d.kind {
                SingularKind::Infinite => "rigid (unbounded stiffness)",
                SingularKind::Mechanism => "free motion (zero stiffness)",
            };
            let _ = writeln!(text, "  {kind}: {}", ray_text(&d.direction));
        }
    }
    if result.s_q.nrows() > 0 || result.s_theta.nrows() > 0 {
        let _ = writeln!(
            text,
            "sensitivity norms: |S_q| = {:.6e}, |S_theta| = {:.6e}",
            result.s_q.norm(),
            result.s_theta.norm()
        );
    }
    if result.spring_critical {
        let _ = writeln!(text, "warning: a spring-coordinate mode is near critical");
    }
}

/// Prints to stdout; also writes the same text to `--out` when given.
fn emit_report(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text).map_err(io_context(format!("writing {}", path.display())))?;
    }
    Ok(())
}

fn cmd_analyze(r: &Resolved) -> Result<i32, CliError> {
    let (delta, held) = solve_held(r)?;
    let mut text = String::new();
    let _ = writeln!(text, "analyze: {}", r.label);
    force_unit_line(r, &mut text);
    let _ = writeln!(text, "{}", state_line(r, delta));
    match (&r.built, &held) {
        (Built::Chain(chain), Held::Chain(state)) => {
            let _ = writeln!(
                text,
                "converged: residual {:.3e}, energy {}",
                state.residual_norm, state.energy
            );
            let verdict = classify(chain, state, tol::CRITICAL_BAND)?;
            let _ = writeln!(
                text,
                "stability: {} (min eigenvalue {}, basis rank {})",
                verdict.classification, verdict.min_eigenvalue, verdict.basis_rank
            );
            let result = kc_full(chain, state)?;
            stiffness_section(&result, &mut text);
        }
        (Built::Assembly(assembly), Held::Assembly(state)) => {
            let worst = state
                .chain_states
                .iter()
                .map(|s| s.residual_norm)
                .fold(0.0, f64::max);
            let _ = writeln!(
                text,
                "converged: worst chain residual {:.3e}, energy {}",
                worst, state.energy
            );
            let verdict = assembly.classify(state)?;
            let _ = writeln!(
                text,
                "stability: {} (min eigenvalue {}, summed basis rank {})",
                verdict.classification, verdict.min_eigenvalue, verdict.basis_rank
            );
            let result = assembly.aggregate_stiffness(state)?;
            stiffness_section(&result, &mut text);
        }
        _ => unreachable!("held state matches the built kind"),
    }
    emit_report(&text, &r.out)?;
    Ok(0)
}

fn cmd_stability(r: &Resolved) -> Result<i32, CliError> {
    let (delta, held) = solve_held(r)?;
    let mut text = String::new();
    let _ = writeln!(text, "stability: {}", r.label);
    let _ = writeln!(text, "{}", state_line(r, delta));
    match (&r.built, &held) {
        (Built::Chain(chain), Held::Chain(state)) => {
            let verdict = classify(chain, state, tol::CRITICAL_BAND)?;
            let _ = writeln!(text, "verdict: {}", verdict.classification);
            let _ = writeln!(text, "min eigenvalue: {}", verdict.min_eigenvalue);
            let _ = writeln!(text, "constrained basis rank: {}", verdict.basis_rank);
        }
        (Built::Assembly(assembly), Held::Assembly(state)) => {
            for (i, (chain, chain_state)) in assembly
                .chains()
                .iter()
                .zip(&state.chain_states)
                .enumerate()
            {
                let v = classify(chain, chain_state, tol::CRITICAL_BAND)?;
                let _ = writeln!(
                    text,
                    "chain {i}: {} (min eigenvalue {}, basis rank {})",
                    v.classification, v.min_eigenvalue, v.basis_rank
                );
            }
            let verdict = assembly.classify(state)?;
            let _ = writeln!(
                text,
                "overall: {} (min eigenvalue {}, summed basis rank {})",
                verdict.classification, verdict.min_eigenvalue, verdict.basis_rank
            );
        }
        _ => unreachable!("held state matches the built kind"),
    }
    emit_report(&text, &r.out)?;
    Ok(0)
}

fn sweep_window(r: &Resolved) -> Result<(f64, usize), CliError> {
    let delta_max = r.sweep_delta.ok_or_else(|| {
        CliError::Usage("--delta-max is required with --config (no scenario default)".into())
    })?;
    Ok((delta_max, r.steps))
}

fn cmd_trace(r: &Resolved) -> Result<i32, CliError> {
    let (delta_max, steps) = sweep_window(r)?;
    let path = trace(r.mechanism(), &r.ray, delta_max, steps, &r.settings)?;
    let gaps = path.iter().filter(|p| !p.converged).count();
    let text = csv::render(&path);
    match &r.out {
        Some(out) => {
            std::fs::write(out, &text)
                .map_err(io_context(format!("writing {}", out.display())))?;
        }
        None => print!("{text}"),
    }
    eprintln!(
        "traced {}: {} points, {} gaps",
        r.label,
        path.len(),
        gaps
    );
    Ok(if gaps > 0 { 2 } else { 0 })
}

fn first_converged_tangent(path: &[PathPoint]) -> f64 {
    path.iter()
        .find(|p| p.converged && p.tangent_stiffness.is_finite())
        .map(|p| p.tangent_stiffness)
        .unwrap_or(f64::NAN)
}

fn cmd_buckle(r: &Resolved) -> Result<i32, CliError> {
    let (delta_max, steps) = sweep_window(r)?;
    let path = trace(r.mechanism(), &r.ray, delta_max, steps, &r.settings)?;
    let gaps = path.iter().filter(|p| !p.converged).count();
    let report = detect_buckling(r.mechanism(), &path, &r.ray, &r.settings);

    let mut text = String::new();
    let _ = writeln!(text, "buckling report: {}", r.label);
    force_unit_line(r, &mut text);
    let _ = writeln!(
        text,
        "window: delta 0..{delta_max} in {steps} steps along {} ({} points, {} gaps)",
        ray_text(&r.unit_ray()),
        path.len(),
        gaps
    );
    let _ = writeln!(
        text,
        "{:<16} {:>12} {:>12} {:>12} {:>12} {:>12}  {}",
        "case", "K_0", "F_crit", "d_crit", "K_pre", "K_post", "detection"
    );
    let k0 = first_converged_tangent(&path);
    match &report {
        Some(b) => {
            let kind = match b.crossing_kind {
                CrossingKind::Eigenvalue => "eigenvalue-crossing",
                CrossingKind::StiffnessDrop => "stiffness-drop",
            };
            let _ = writeln!(
                text,
                "{:<16} {:>12.5} {:>12.5} {:>12.6} {:>12.5} {:>12.5}  {}",
                r.label,
                k0,
                b.critical_force,
                b.critical_deflection,
                b.pre_stiffness,
                b.post_stiffness,
                kind
            );
        }
        None => {
            let _ = writeln!(
                text,
                "{:<16} {:>12.5} none detected within the traced window",
                r.label, k0
            );
        }
    }
    emit_report(&text, &None)?;
    if let Some(out) = &r.out {
        std::fs::write(out, csv::render(&path))
            .map_err(io_context(format!("writing {}", out.display())))?;
    }
    Ok(if gaps > 0 { 2 } else { 0 })
}
