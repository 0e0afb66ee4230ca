//! Loaded-path tracing and buckling detection.
//!
//! A path drives the end effector (or platform) along a fixed twist ray
//! away from its unloaded pose, in uniform deflection increments, solving
//! each point warm-started from the previous converged one. Every point
//! records the reaction wrench, its component along the ray, the elastic
//! energy, and a stability verdict, from which two detectors are built:
//!
//! * [`detect_buckling`] — finds the first stable-to-nonstable verdict
//!   crossing and refines the critical deflection by bisection; falls back
//!   to flagging a large drop in tangent stiffness when the verdict never
//!   flips inside the window.
//! * [`work_energy_audit`] — checks that the trapezoidal work integral of
//!   the ray force matches the elastic-energy difference, a global
//!   consistency test of solver, wrench, and energy bookkeeping.

use nalgebra::Vector6;

use crate::assembly::{Assembly, AssemblyState};
use crate::chain::{ChainModel, Configuration};
use crate::equilibrium::{solve_for_pose, EquilibriumState, SolverSettings};
use crate::error::{Error, Result};
use crate::pose::{Pose, Wrench};
use crate::stability::{classify, softest_mode, Classification, StabilityVerdict};
use crate::tol;

/// What is being traced: a single chain or a parallel assembly.
#[derive(Clone, Copy)]
pub enum Mechanism<'a> {
    Chain(&'a ChainModel),
    Assembly(&'a Assembly),
}

/// Solved state of one path point, matching the mechanism kind.
#[derive(Debug, Clone)]
pub enum MechState {
    Chain(EquilibriumState),
    Assembly(AssemblyState),
}

impl MechState {
    pub fn converged(&self) -> bool {
        match self {
            MechState::Chain(s) => s.converged,
            MechState::Assembly(s) => s.converged,
        }
    }

    pub fn wrench(&self) -> Wrench {
        match self {
            MechState::Chain(s) => s.wrench.clone(),
            MechState::Assembly(s) => s.wrench.clone(),
        }
    }

    pub fn energy(&self) -> f64 {
        match self {
            MechState::Chain(s) => s.energy,
            MechState::Assembly(s) => s.energy,
        }
    }

    /// Configurations used to warm-start the next solve.
    fn warm_starts(&self) -> Vec<Configuration> {
        match self {
            MechState::Chain(s) => vec![s.cfg.clone()],
            MechState::Assembly(s) => s.chain_states.iter().map(|c| c.cfg.clone()).collect(),
        }
    }
}

impl<'a> Mechanism<'a> {
    /// Unloaded tool pose.
    pub fn reference_pose(&self) -> Pose {
        match self {
            Mechanism::Chain(chain) => chain.forward_pose(&chain.reference_configuration()),
            Mechanism::Assembly(assembly) => assembly.reference_pose(),
        }
    }

    /// Reference configurations, used as the cold start of a trace.
    fn reference_starts(&self) -> Vec<Configuration> {
        match self {
            Mechanism::Chain(chain) => vec![chain.reference_configuration()],
            Mechanism::Assembly(assembly) => assembly
                .chains()
                .iter()
                .map(|c| c.reference_configuration())
                .collect(),
        }
    }

    fn solve(&self, target: &Pose, starts: &[Configuration], settings: &SolverSettings) -> MechState {
        match self {
            Mechanism::Chain(chain) => {
                MechState::Chain(solve_for_pose(chain, target, &starts[0], settings))
            }
            Mechanism::Assembly(assembly) => {
                MechState::Assembly(assembly.solve_for_pose(target, Some(starts), settings))
            }
        }
    }

    fn classify(&self, state: &MechState) -> Option<StabilityVerdict> {
        match (self, state) {
            (Mechanism::Chain(chain), MechState::Chain(s)) => {
                classify(chain, s, tol::CRITICAL_BAND).ok()
            }
            (Mechanism::Assembly(assembly), MechState::Assembly(s)) => assembly.classify(s).ok(),
            _ => None,
        }
    }
}

/// One solved point of a loaded path.
#[derive(Debug, Clone)]
pub struct PathPoint {
    /// Deflection along the ray from the unloaded pose.
    pub delta: f64,
    /// Reaction wrench component along the ray (positive when the
    /// mechanism pushes back against the imposed motion).
    pub f_along: f64,
    /// Full reaction wrench at the tool.
    pub wrench: Wrench,
    /// Stability verdict; `None` when the point did not converge.
    pub verdict: Option<StabilityVerdict>,
    /// Centered finite-difference slope of `f_along` versus `delta`,
    /// `NaN` where undefined (gaps, single-point paths).
    pub tangent_stiffness: f64,
    /// Elastic energy stored at the point.
    pub energy: f64,
    /// Whether the equilibrium solve converged.
    pub converged: bool,
    /// Full solved state, kept for warm starts and refinement.
    pub state: MechState,
}

/// Per-point solver settings: every path point gets at least one noisy
/// probe attempt so a branch that bifurcates mid-path is not missed, and
/// the random stream is decorrelated between points.
fn point_settings(settings: &SolverSettings, index: usize) -> SolverSettings {
    SolverSettings {
        probe_attempts: settings.probe_attempts.max(1),
        rng_seed: settings
            .rng_seed
            .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9)),
        ..settings.clone()
    }
}

/// Traces the mechanism along `ray` up to `delta_max` in `steps` uniform
/// increments (so `steps + 1` points including the unloaded one).
///
/// `ray` is a twist direction (translation first); it is normalized here.
/// A zero `delta_max` yields the single unloaded point. Points that fail
/// to converge are kept as gap entries; the trace then continues from the
/// last converged point.
pub fn trace(
    mech: Mechanism,
    ray: &Vector6<f64>,
    delta_max: f64,
    steps: usize,
    settings: &SolverSettings,
) -> Result<Vec<PathPoint>> {
    if !delta_max.is_finite() || delta_max < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "deflection limit must be finite and non-negative, got {delta_max}"
        )));
    }
    let single = delta_max == 0.0;
    if !single && steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "a loaded path needs at least 2 steps, got {steps}"
        )));
    }
    let norm = ray.norm();
    if !single && !(norm > 0.0) {
        return Err(Error::InvalidParameter("ray direction must be nonzero".into()));
    }
    let unit = if norm > 0.0 { ray / norm } else { Vector6::zeros() };

    let reference = mech.reference_pose();
    let count = if single { 1 } else { steps + 1 };
    let mut warm = mech.reference_starts();
    let mut warm_state: Option<MechState> = None;
    let mut points = Vec::with_capacity(count);
    for j in 0..count {
        let delta = if single {
            0.0
        } else {
            delta_max * j as f64 / steps as f64
        };
        let target = reference.displaced(&(unit * delta));
        let local = point_settings(settings, j);
        let mut state = mech.solve(&target, &warm, &local);
        if !state.converged() {
            // The branch being followed may have ended at a limit point;
            // retry with branch-capturing noise and mode kicks from the
            // last converged state before recording a gap.
            if let Some(ref ws) = warm_state {
                state = solve_dropped(mech, &target, ws, &local, Some(state));
            }
        }
        let converged = state.converged();
        if converged {
            warm = state.warm_starts();
            warm_state = Some(state.clone());
        }
        let wrench = state.wrench();
        let (f_along, energy, verdict) = if converged {
            (
                wrench.as_vector().dot(&unit),
                state.energy(),
                mech.classify(&state),
            )
        } else {
            (f64::NAN, f64::NAN, None)
        };
        points.push(PathPoint {
            delta,
            f_along,
            wrench,
            verdict,
            tangent_stiffness: f64::NAN,
            energy,
            converged,
            state,
        });
    }
    fill_tangents(&mut points);
    Ok(points)
}

/// Fills `tangent_stiffness` with difference quotients between each
/// converged point's nearest converged neighbours.
fn fill_tangents(points: &mut [PathPoint]) {
    let solved: Vec<usize> = (0..points.len()).filter(|&i| points[i].converged).collect();
    for (pos, &i) in solved.iter().enumerate() {
        let lo = if pos > 0 { solved[pos - 1] } else { i };
        let hi = if pos + 1 < solved.len() { solved[pos + 1] } else { i };
        if hi == lo {
            continue;
        }
        let df = points[hi].f_along - points[lo].f_along;
        let dd = points[hi].delta - points[lo].delta;
        points[i].tangent_stiffness = df / dd;
    }
}

/// How a buckling event was recognized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// The stability verdict flipped from stable to non-stable.
    Eigenvalue,
    /// No verdict flip, but the tangent stiffness collapsed.
    StiffnessDrop,
}

/// A detected buckling event on a traced path.
#[derive(Debug, Clone)]
pub struct BucklingReport {
    /// Ray force just below the critical point.
    pub critical_force: f64,
    /// Refined deflection at which the verdict crosses.
    pub critical_deflection: f64,
    /// Average tangent stiffness over up to three points before the event.
    pub pre_stiffness: f64,
    /// Average tangent stiffness over up to three points after the event.
    pub post_stiffness: f64,
    pub crossing_kind: CrossingKind,
}

fn average_tangent(points: &[PathPoint], indices: impl Iterator<Item = usize>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for i in indices {
        let t = points[i].tangent_stiffness;
        if points[i].converged && t.is_finite() {
            sum += t;
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn is_stable(p: &PathPoint) -> Option<bool> {
    p.verdict
        .as_ref()
        .map(|v| v.classification == Classification::Stable)
}

/// Warm-start configurations displaced along each chain's softest
/// constrained mode by `amplitude` (signed). Chains whose mode is
/// unavailable keep their plain warm start.
fn kicked_starts(mech: Mechanism, warm_state: &MechState, amplitude: f64) -> Vec<Configuration> {
    let kick_one = |chain: &ChainModel, state: &EquilibriumState| -> Configuration {
        let mut cfg = state.cfg.clone();
        if let Ok(Some((d_theta, d_q))) = softest_mode(chain, state) {
            cfg.theta += amplitude * d_theta;
            cfg.q += amplitude * d_q;
        }
        cfg
    };
    match (mech, warm_state) {
        (Mechanism::Chain(chain), MechState::Chain(s)) => vec![kick_one(chain, s)],
        (Mechanism::Assembly(assembly), MechState::Assembly(s)) => assembly
            .chains()
            .iter()
            .zip(&s.chain_states)
            .map(|(chain, state)| kick_one(chain, state))
            .collect(),
        _ => warm_state.warm_starts(),
    }
}

/// Solves a post-critical point trying to capture the lower-energy branch
/// the mechanism falls onto: plain warm solve first, then probe attempts
/// with escalating noise, then warm starts kicked along the softest
/// constrained mode, keeping the lowest-energy converged state. The tiny
/// default probe noise cannot leave the Newton basin of the branch being
/// continued, and past a limit point even large isotropic noise rarely
/// lands in the fallen branch's basin, so the structured kicks matter.
fn solve_dropped(
    mech: Mechanism,
    target: &Pose,
    warm_state: &MechState,
    settings: &SolverSettings,
    plain: Option<MechState>,
) -> MechState {
    let warm = warm_state.warm_starts();
    let better = |candidate: &MechState, best: &MechState| {
        candidate.converged()
            && (!best.converged()
                || candidate.energy() < best.energy() - 1e-12 * (1.0 + best.energy().abs()))
    };
    let mut best = plain.unwrap_or_else(|| mech.solve(target, &warm, settings));
    for (k, noise) in [1e-4, 1e-3, 1e-2, 5e-2].into_iter().enumerate() {
        let local = SolverSettings {
            probe_attempts: settings.probe_attempts.max(3),
            probe_noise: noise,
            rng_seed: settings.rng_seed.wrapping_add(0xD1F_u64 << k),
            ..settings.clone()
        };
        let candidate = mech.solve(target, &warm, &local);
        if better(&candidate, &best) {
            best = candidate;
        }
    }
    if warm_state.converged() {
        'kicks: for amplitude in [0.02, 0.05, 0.1, 0.2, 0.4] {
            for sign in [1.0, -1.0] {
                let starts = kicked_starts(mech, warm_state, sign * amplitude);
                let candidate = mech.solve(target, &starts, settings);
                if better(&candidate, &best) {
                    best = candidate;
                    break 'kicks;
                }
            }
        }
    }
    best
}

/// Scans a traced path for loss of stability and refines the critical
/// deflection by bisection to a resolution of `1e-4` of the path length.
///
/// The primary signal is the first adjacent pair of converged points whose
/// verdicts change from stable to unstable or critical. If no verdict
/// crossing exists, a drop of the tangent stiffness by a factor of five or
/// more between consecutive converged points is reported instead. Returns
/// `None` when neither occurs inside the window.
pub fn detect_buckling(
    mech: Mechanism,
    path: &[PathPoint],
    ray: &Vector6<f64>,
    settings: &SolverSettings,
) -> Option<BucklingReport> {
    let solved: Vec<usize> = (0..path.len()).filter(|&i| path[i].converged).collect();
    if solved.len() < 2 {
        return None;
    }
    let unit = {
        let n = ray.norm();
        if !(n > 0.0) {
            return None;
        }
        ray / n
    };
    // Primary: verdict crossing between consecutive converged points.
    for w in solved.windows(2) {
        let (a, b) = (w[0], w[1]);
        if is_stable(&path[a]) != Some(true) || is_stable(&path[b]) != Some(false) {
            continue;
        }
        let reference = mech.reference_pose();
        let delta_span = path.last().map(|p| p.delta).unwrap_or(1.0);
        let tol_delta = tol::BUCKLING_REFINE_REL * delta_span.max(f64::MIN_POSITIVE);
        let mut lo = path[a].delta;
        let mut hi = path[b].delta;
        let mut warm_state = path[a].state.clone();
        let mut force_lo = path[a].f_along;
        let mut iterations = 0;
        while hi - lo > tol_delta && iterations < 60 {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let target = reference.displaced(&(unit * mid));
            let local = point_settings(settings, 10_000 + iterations);
            let state = mech.solve(&target, &warm_state.warm_starts(), &local);
            let stable_mid = state
                .converged()
                .then(|| mech.classify(&state))
                .flatten()
                .map(|v| v.classification == Classification::Stable);
            match stable_mid {
                Some(true) => {
                    lo = mid;
                    force_lo = state.wrench().as_vector().dot(&unit);
                    warm_state = state;
                }
                // Treat non-stable and non-converged alike: the crossing
                // is at or below the midpoint.
                _ => hi = mid,
            }
        }
        let pre = average_tangent(path, solved.iter().copied().filter(|&i| i <= a).rev().take(3));
        // The warm-started trace keeps following the branch that just went
        // unstable, so its force slope past the crossing says nothing about
        // the configuration the mechanism actually falls onto. Re-solve the
        // post-crossing points with branch-capturing noise and measure the
        // slope of the fallen branch instead.
        let mut post_samples: Vec<(f64, f64)> = Vec::new();
        let mut warm_post = warm_state.clone();
        for &i in solved.iter().filter(|&&i| i >= b).take(3) {
            let target = reference.displaced(&(unit * path[i].delta));
            let local = point_settings(settings, 20_000 + i);
            let state = solve_dropped(mech, &target, &warm_post, &local, None);
            if state.converged() {
                post_samples.push((path[i].delta, state.wrench().as_vector().dot(&unit)));
                warm_post = state;
            }
        }
        let post = if post_samples.len() >= 2 {
            let n = post_samples.len() as f64;
            let (sd, sf) = post_samples
                .iter()
                .fold((0.0, 0.0), |(sd, sf), (d, f)| (sd + d, sf + f));
            let (md, mf) = (sd / n, sf / n);
            let (num, den) = post_samples.iter().fold((0.0, 0.0), |(num, den), (d, f)| {
                (num + (d - md) * (f - mf), den + (d - md) * (d - md))
            });
            num / den
        } else {
            average_tangent(path, solved.iter().copied().filter(|&i| i >= b).take(3))
        };
        return Some(BucklingReport {
            critical_force: force_lo,
            critical_deflection: 0.5 * (lo + hi),
            pre_stiffness: pre,
            post_stiffness: post,
            crossing_kind: CrossingKind::Eigenvalue,
        });
    }
    // Secondary: collapse of the tangent stiffness.
    for w in solved.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (ti, tj) = (path[i].tangent_stiffness, path[j].tangent_stiffness);
        if !(ti.is_finite() && tj.is_finite()) || ti <= 0.0 {
            continue;
        }
        if tj <= ti / tol::STIFFNESS_DROP_FACTOR {
            let pre = average_tangent(path, solved.iter().copied().filter(|&k| k <= i).rev().take(3));
            let post = average_tangent(path, solved.iter().copied().filter(|&k| k >= j).take(3));
            return Some(BucklingReport {
                critical_force: path[i].f_along,
                critical_deflection: 0.5 * (path[i].delta + path[j].delta),
                pre_stiffness: pre,
                post_stiffness: post,
                crossing_kind: CrossingKind::StiffnessDrop,
            });
        }
    }
    None
}

/// Compares the trapezoidal work integral of the ray force against the
/// stored elastic-energy difference over a traced path and returns the
/// largest relative discrepancy.
///
/// Every point of the slice must have converged; the comparison is made
/// cumulatively from the first point, so the slice may start anywhere on
/// the path (useful to skip a force jump at the unloaded point).
pub fn work_energy_audit(path: &[PathPoint]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InvalidParameter(
            "work-energy audit needs at least two path points".into(),
        ));
    }
    if let Some(bad) = path.iter().position(|p| !p.converged) {
        return Err(Error::InvalidParameter(format!(
            "work-energy audit requires a fully converged path (gap at index {bad})"
        )));
    }
    let mut work = 0.0;
    let mut worst: f64 = 0.0;
    for w in path.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        work += 0.5 * (p.f_along + q.f_along) * (q.delta - p.delta);
        let de = q.energy - path[0].energy;
        let scale = work.abs().max(de.abs());
        if scale > 1e-14 {
            worst = worst.max((work - de).abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{
        build_chain, build_orthoglide_like, model_a_analytic, BenchConfiguration, Branch,
        ModelKind, ScenarioSpec, WorkspacePoint,
    };
    use approx::assert_relative_eq;

    fn compression_ray() -> Vector6<f64> {
        Vector6::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn traced_forces_match_the_closed_form_law() {
        let chain = build_chain(&ScenarioSpec::new(ModelKind::A, BenchConfiguration::S)).unwrap();
        let path = trace(
            Mechanism::Chain(&chain),
            &compression_ray(),
            1.0,
            10,
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(path.len(), 11);
        for p in &path[1..] {
            assert!(p.converged, "gap at delta {}", p.delta);
            let expected = model_a_analytic(p.delta, Branch::Stable).unwrap();
            assert_relative_eq!(p.f_along, expected, max_relative = 1e-6);
            // A compressed fold of this column is stable.
            assert_eq!(
                p.verdict.as_ref().unwrap().classification,
                Classification::Stable
            );
        }
    }

    #[test]
    fn zero_length_ray_gives_the_unloaded_point() {
        let chain = build_chain(&ScenarioSpec::new(ModelKind::A, BenchConfiguration::Pi)).unwrap();
        let path = trace(
            Mechanism::Chain(&chain),
            &compression_ray(),
            0.0,
            50,
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(path.len(), 1);
        assert!(path[0].converged);
        assert_relative_eq!(path[0].wrench.norm(), 0.0, epsilon = 1e-7);
        assert!(path[0].tangent_stiffness.is_nan());
        assert!(trace(
            Mechanism::Chain(&chain),
            &compression_ray(),
            0.5,
            1,
            &SolverSettings::default()
        )
        .is_err());
    }

    #[test]
    fn flexible_planar_column_buckles_near_unit_force() {
        let chain = build_chain(&ScenarioSpec::new(ModelKind::B, BenchConfiguration::S)).unwrap();
        let settings = SolverSettings::default();
        let path = trace(Mechanism::Chain(&chain), &compression_ray(), 2e-3, 40, &settings).unwrap();
        let report = detect_buckling(Mechanism::Chain(&chain), &path, &compression_ray(), &settings)
            .expect("a verdict crossing inside the window");
        assert_eq!(report.crossing_kind, CrossingKind::Eigenvalue);
        assert_relative_eq!(report.critical_force, 1.0, max_relative = 0.05);
        assert!(report.critical_deflection > 0.0 && report.critical_deflection < 2e-3);
        assert!(report.pre_stiffness > 0.0);
    }

    #[test]
    fn audit_passes_on_a_smooth_stable_branch() {
        let chain = build_chain(&ScenarioSpec::new(ModelKind::A, BenchConfiguration::S)).unwrap();
        let path = trace(
            Mechanism::Chain(&chain),
            &compression_ray(),
            0.5,
            50,
            &SolverSettings::default(),
        )
        .unwrap();
        // Skip the unloaded point: the buckled branch carries finite force
        // at vanishing deflection, so the first segment is discontinuous.
        let disc = work_energy_audit(&path[5..]).unwrap();
        assert!(disc < 1e-3, "discrepancy {disc}");
    }

    #[test]
    fn same_seed_reproduces_the_path_bitwise() {
        let chain = build_chain(&ScenarioSpec::new(ModelKind::B, BenchConfiguration::Z)).unwrap();
        let settings = SolverSettings {
            rng_seed: 7,
            ..SolverSettings::default()
        };
        let a = trace(Mechanism::Chain(&chain), &compression_ray(), 1e-3, 12, &settings).unwrap();
        let b = trace(Mechanism::Chain(&chain), &compression_ray(), 1e-3, 12, &settings).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.f_along.to_bits(), q.f_along.to_bits());
            assert_eq!(p.energy.to_bits(), q.energy.to_bits());
        }
    }

    #[test]
    fn assembly_traces_and_stays_stable_under_small_load() {
        let assembly =
            build_orthoglide_like(&ScenarioSpec::orthoglide(WorkspacePoint::Q0)).unwrap();
        let s = 1.0 / 3.0_f64.sqrt();
        let ray = Vector6::new(-s, -s, -s, 0.0, 0.0, 0.0);
        let path = trace(
            Mechanism::Assembly(&assembly),
            &ray,
            2e-4,
            2,
            &SolverSettings::default(),
        )
        .unwrap();
        for p in &path {
            assert!(p.converged, "gap at delta {}", p.delta);
        }
        let last = path.last().unwrap();
        assert!(last.f_along > 0.0, "compression must push back");
        assert_eq!(
            last.verdict.as_ref().unwrap().classification,
            Classification::Stable
        );
    }
}
