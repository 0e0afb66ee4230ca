//! Static equilibrium of a loaded chain.
//!
//! At equilibrium the springs balance the applied end-effector wrench and
//! the passive joints carry no torque:
//!
//! ```text
//! J_theta^T F = K_theta (theta - theta0)
//! J_q^T     F = 0
//! g(q, theta) = t
//! ```
//!
//! [`solve_for_pose`] drives the end-effector to a target pose with a
//! Newton iteration on a reduced bordered system of size `k + n` (task
//! dimension plus passive coordinates), optionally walking the target in
//! along a continuation schedule and restarting from noisy configurations
//! when a descent stagnates. [`solve_for_wrench`] is the load-driven dual,
//! an outer update through the Cartesian stiffness; it requires that
//! stiffness to be nonsingular and therefore rejects chains with passive
//! joints.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainModel, Configuration};
use crate::error::{Error, Result};
use crate::pose::{pose_residual, Pose, Wrench};
use crate::tol;

/// Knobs of the equilibrium search. The defaults mirror [`crate::tol`].
#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Convergence threshold on the weighted residual norm.
    pub residual_tol: f64,
    /// Newton iteration cap per continuation step.
    pub max_iters: usize,
    /// Number of uniform continuation steps toward the target pose. With 1
    /// the target is attacked directly; on total failure the solve is
    /// retried once with 20 steps.
    pub continuation_steps: usize,
    /// Noisy restarts allowed after a failed descent.
    pub restart_count: usize,
    /// Amplitude of restart noise on all coordinates.
    pub restart_noise: f64,
    /// Seed for all solver randomness; fixing it makes solves bit-for-bit
    /// reproducible.
    pub rng_seed: u64,
    /// Additional noisy attempts run even when the direct solve converges,
    /// so lower-energy branches hidden by symmetry can be found.
    pub probe_attempts: usize,
    /// Amplitude of the probe-attempt noise.
    pub probe_noise: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            residual_tol: tol::RESIDUAL_TOL,
            max_iters: tol::MAX_ITERS,
            continuation_steps: 1,
            restart_count: tol::RESTART_COUNT,
            restart_noise: tol::RESTART_NOISE,
            rng_seed: 0,
            probe_attempts: 0,
            probe_noise: tol::PROBE_NOISE,
        }
    }
}

/// One bordered solve inside the Newton descent.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Continuation fraction of the target being attacked.
    pub alpha: f64,
    /// Weighted residual norm entering the iteration.
    pub residual: f64,
    /// Condition number of the bordered matrix (may be infinite).
    pub condition: f64,
}

/// A solved (or abandoned) equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    /// Joint coordinates at equilibrium.
    pub cfg: Configuration,
    /// External wrench the end-effector must carry there.
    pub wrench: Wrench,
    /// Pose target that was solved for.
    pub target: Pose,
    /// Final weighted residual norm.
    pub residual_norm: f64,
    /// Total bordered solves spent.
    pub iterations: usize,
    /// Whether the residual dropped below tolerance.
    pub converged: bool,
    /// Stored elastic energy at `cfg`.
    pub energy: f64,
    /// Per-iteration log of the winning attempt.
    pub trace: Vec<IterationRecord>,
}

impl EquilibriumState {
    /// Wraps an externally known equilibrium (configuration plus wrench)
    /// after verifying that it actually balances, to weighted residual
    /// 1e-6. Useful for states constructed analytically rather than solved.
    pub fn at_configuration(
        chain: &ChainModel,
        cfg: Configuration,
        wrench: Wrench,
    ) -> Result<EquilibriumState> {
        let target = chain.forward_pose(&cfg);
        let parts = equilibrium_residual(chain, &cfg, &wrench, &target);
        if !(parts.weighted_norm < 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "configuration and wrench are not an equilibrium (weighted residual {:.3e})",
                parts.weighted_norm
            )));
        }
        let energy = chain.elastic_energy(&cfg);
        Ok(EquilibriumState {
            cfg,
            wrench,
            target,
            residual_norm: parts.weighted_norm,
            iterations: 0,
            converged: true,
            energy,
            trace: Vec::new(),
        })
    }
}

/// The three equilibrium residual blocks and their weighted norm.
#[derive(Debug, Clone)]
pub struct ResidualParts {
    /// Spring balance `J_theta^T F - K_theta (theta - theta0)`.
    pub stat_theta: DVector<f64>,
    /// Passive balance `J_q^T F`.
    pub stat_q: DVector<f64>,
    /// Masked pose residual toward the target.
    pub kin: DVector<f64>,
    /// `|stat_theta| / w_tau + |stat_q| / w_tau + |kin| / w_t` with
    /// `w_tau = max(1, max-entry of K_theta)` and `w_t = max(1, reach)`.
    pub weighted_norm: f64,
}

/// Evaluates the equilibrium residual of `(cfg, wrench)` against `target`.
pub fn equilibrium_residual(
    chain: &ChainModel,
    cfg: &Configuration,
    wrench: &Wrench,
    target: &Pose,
) -> ResidualParts {
    let (jt, jq) = chain.jacobians(cfg);
    let f6 = wrench.as_vector();
    let stat_theta =
        jt.transpose() * f6 - chain.k_theta() * (&cfg.theta - chain.theta0());
    let stat_q = jq.transpose() * f6;
    let actual = chain.forward_pose(cfg);
    let kin = chain.task().select(&pose_residual(target, &actual));
    let w_tau = chain.k_theta().amax().max(1.0);
    let w_t = chain.reach();
    let weighted_norm = stat_theta.norm() / w_tau + stat_q.norm() / w_tau + kin.norm() / w_t;
    ResidualParts {
        stat_theta,
        stat_q,
        kin,
        weighted_norm,
    }
}

/// Truncated least-squares solve of a square bordered system; returns the
/// solution and the condition number. Singular values below
/// [`tol::SOLVE_TRUNCATION_REL`] of the largest are treated as zero, which
/// turns structurally singular systems with consistent right-hand sides
/// into well-defined minimum-norm solves.
fn bordered_solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = matrix.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    if !(smax.is_finite()) || smax == 0.0 {
        return Err(Error::NotConverged {
            best_residual: f64::INFINITY,
        });
    }
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let sol = svd
        .solve(rhs, tol::SOLVE_TRUNCATION_REL * smax)
        .map_err(|_| Error::NotConverged {
            best_residual: f64::INFINITY,
        })?;
    Ok((sol.column(0).into_owned(), condition))
}

struct Attempt {
    cfg: Configuration,
    wrench: Wrench,
    residual: f64,
    iterations: usize,
    trace: Vec<IterationRecord>,
    /// Whether the full-system finisher had to step in. Rescued attempts
    /// do not suppress the noisy-restart exploration, so an energy-ordered
    /// comparison against unrescued candidates still happens.
    rescued: bool,
}

/// Newton iteration on the full coupled system over `(theta, q, f)`,
/// including the load Hessian blocks the reduced iteration drops. The
/// reduced scheme converges linearly with a rate that grows with the
/// load-to-stiffness ratio and loses contraction altogether on heavily
/// loaded branches; this finisher is quadratically convergent near any
/// regular solution and rescues those cases. Returns the polished iterate
/// once the weighted residual passes `tol`, or `None`.
#[allow(clippy::too_many_arguments)]
fn full_system_polish(
    chain: &ChainModel,
    target: &Pose,
    cfg0: &Configuration,
    wrench0: &Wrench,
    settings: &SolverSettings,
    alpha: f64,
    iterations: &mut usize,
    trace: &mut Vec<IterationRecord>,
) -> Option<(Configuration, Wrench)> {
    let task = chain.task();
    let k = task.dim();
    let m = chain.m();
    let n = chain.n();
    // Locality guards: refuse iterates that are not already close to a
    // solution, and never drift far from the entry point. Without these
    // the finisher happily converges onto coiled joint-angle copies and
    // remote unrelated equilibria.
    let entry = equilibrium_residual(chain, cfg0, wrench0, target).weighted_norm;
    if !(entry <= 3e-2) {
        return None;
    }
    let trust_radius = 1.5;
    let mut cfg = cfg0.clone();
    let mut f = task.select(&wrench0.as_vector());
    let mut wrench = wrench0.clone();
    let mut best = f64::INFINITY;
    let mut since_improved = 0usize;
    for _ in 0..settings.max_iters {
        let parts = equilibrium_residual(chain, &cfg, &wrench, target);
        let r = parts.weighted_norm;
        if !r.is_finite() || r > 1e9 {
            return None;
        }
        let drift = (&cfg.theta - &cfg0.theta).norm() + (&cfg.q - &cfg0.q).norm();
        if drift > trust_radius {
            return None;
        }
        if r <= settings.residual_tol {
            return Some((cfg, wrench));
        }
        if r < best - 1e-12 {
            best = r;
            since_improved = 0;
        } else {
            since_improved += 1;
            if since_improved >= 6 {
                return None;
            }
        }
        let (jt, jq) = chain.masked_jacobians(&cfg);
        let hess = chain.torque_hessians(&cfg, &wrench.as_vector());
        let mut kkt = DMatrix::zeros(m + n + k, m + n + k);
        kkt.view_mut((0, 0), (m, m))
            .copy_from(&(&hess.h_thetatheta - chain.k_theta()));
        kkt.view_mut((0, m), (m, n)).copy_from(&hess.h_thetaq());
        kkt.view_mut((m, 0), (n, m)).copy_from(&hess.h_qtheta);
        kkt.view_mut((m, m), (n, n)).copy_from(&hess.h_qq);
        kkt.view_mut((0, m + n), (m, k)).copy_from(&jt.transpose());
        kkt.view_mut((m, m + n), (n, k)).copy_from(&jq.transpose());
        kkt.view_mut((m + n, 0), (k, m)).copy_from(&jt);
        kkt.view_mut((m + n, m), (k, n)).copy_from(&jq);
        let mut rhs = DVector::zeros(m + n + k);
        rhs.rows_mut(0, m).copy_from(&(-&parts.stat_theta));
        rhs.rows_mut(m, n).copy_from(&(-&parts.stat_q));
        rhs.rows_mut(m + n, k).copy_from(&parts.kin);
        let (sol, condition) = bordered_solve(&kkt, &rhs).ok()?;
        trace.push(IterationRecord {
            alpha,
            residual: r,
            condition,
        });
        *iterations += 1;
        let d_theta = sol.rows(0, m).into_owned();
        let d_q = sol.rows(m, n).into_owned();
        let d_f = sol.rows(m + n, k).into_owned();
        let theta_prev = cfg.theta.clone();
        let q_prev = cfg.q.clone();
        let f_prev = f.clone();
        let mut accepted = false;
        for halving in 0..=4 {
            let lambda = f64::powi(0.5, halving);
            cfg.theta = &theta_prev + lambda * &d_theta;
            cfg.q = &q_prev + lambda * &d_q;
            f = &f_prev + lambda * &d_f;
            wrench = Wrench::from_vector(&task.embed(&f));
            let applied = equilibrium_residual(chain, &cfg, &wrench, target).weighted_norm;
            let ok = if halving == 0 {
                applied.is_finite() && applied <= 10.0 * r
            } else {
                applied.is_finite() && applied < r
            };
            if ok {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// One continuation-plus-Newton descent from a fixed start. Fails on
/// stagnation, divergence, or iteration exhaustion; the error value is the
/// weighted residual of the abandoned iterate measured against the final
/// target, so callers see how far the search actually got.
fn descend(
    chain: &ChainModel,
    target: &Pose,
    start: &Configuration,
    steps: usize,
    settings: &SolverSettings,
) -> std::result::Result<Attempt, f64> {
    let task = chain.task();
    let k = task.dim();
    let n = chain.n();
    let k_inv = chain
        .k_theta()
        .clone()
        .cholesky()
        .expect("chain stiffness is positive definite by construction")
        .inverse();
    let anchor = chain.forward_pose(start);
    let mut cfg = start.clone();
    let mut wrench = Wrench::zero();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let give_up = |cfg: &Configuration, wrench: &Wrench| {
        let r = equilibrium_residual(chain, cfg, wrench, target).weighted_norm;
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    };
    let mut rescued = false;
    for step in 1..=steps.max(1) {
        let alpha = step as f64 / steps.max(1) as f64;
        let stage_target = Pose::interpolate(&anchor, target, alpha);
        let mut history: Vec<f64> = Vec::new();
        let mut stage_done = false;
        for _ in 0..settings.max_iters {
            let parts = equilibrium_residual(chain, &cfg, &wrench, &stage_target);
            let r = parts.weighted_norm;
            if !r.is_finite() || r > 1e9 {
                return Err(give_up(&cfg, &wrench));
            }
            if r <= settings.residual_tol {
                stage_done = true;
                break;
            }
            history.push(r);
            if history.len() >= 6 {
                let w = &history[history.len() - 6..];
                if w[0] - w[5] < 1e-12 {
                    // Stagnation: the reduced iteration has stopped
                    // contracting; hand the iterate to the full-system
                    // finisher before giving up.
                    match full_system_polish(
                        chain,
                        &stage_target,
                        &cfg,
                        &wrench,
                        settings,
                        alpha,
                        &mut iterations,
                        &mut trace,
                    ) {
                        Some((c, w)) => {
                            cfg = c;
                            wrench = w;
                            rescued = true;
                            stage_done = true;
                            break;
                        }
                        None => return Err(give_up(&cfg, &wrench)),
                    }
                }
            }
            let (jt, jq) = chain.masked_jacobians(&cfg);
            // eps = masked pose residual + J_theta (theta - theta0)
            let eps = &parts.kin + &jt * (&cfg.theta - chain.theta0());
            let a = &jt * &k_inv * jt.transpose();
            let mut bordered = DMatrix::zeros(k + n, k + n);
            bordered.view_mut((0, 0), (k, k)).copy_from(&a);
            bordered.view_mut((0, k), (k, n)).copy_from(&jq);
            bordered
                .view_mut((k, 0), (n, k))
                .copy_from(&jq.transpose());
            let mut rhs = DVector::zeros(k + n);
            rhs.rows_mut(0, k).copy_from(&eps);
            let (sol, condition) =
                bordered_solve(&bordered, &rhs).map_err(|_| give_up(&cfg, &wrench))?;
            trace.push(IterationRecord {
                alpha,
                residual: r,
                condition,
            });
            iterations += 1;
            let f_masked = sol.rows(0, k).into_owned();
            let dq = sol.rows(k, n).into_owned();
            cfg.q += dq;
            cfg.theta = chain.theta0() + &k_inv * (jt.transpose() * &f_masked);
            wrench = Wrench::from_vector(&task.embed(&f_masked));
        }
        if !stage_done {
            let parts = equilibrium_residual(chain, &cfg, &wrench, &stage_target);
            if parts.weighted_norm > settings.residual_tol {
                match full_system_polish(
                    chain,
                    &stage_target,
                    &cfg,
                    &wrench,
                    settings,
                    alpha,
                    &mut iterations,
                    &mut trace,
                ) {
                    Some((c, w)) => {
                        cfg = c;
                        wrench = w;
                        rescued = true;
                    }
                    None => return Err(give_up(&cfg, &wrench)),
                }
            }
        }
    }
    let parts = equilibrium_residual(chain, &cfg, &wrench, target);
    let residual = if parts.weighted_norm > settings.residual_tol {
        match full_system_polish(
            chain,
            target,
            &cfg,
            &wrench,
            settings,
            1.0,
            &mut iterations,
            &mut trace,
        ) {
            Some((c, w)) => {
                let polished = equilibrium_residual(chain, &c, &w, target).weighted_norm;
                cfg = c;
                wrench = w;
                rescued = true;
                polished
            }
            None => return Err(give_up(&cfg, &wrench)),
        }
    } else {
        parts.weighted_norm
    };
    Ok(Attempt {
        cfg,
        wrench,
        residual,
        iterations,
        trace,
        rescued,
    })
}

fn noisy(cfg: &Configuration, amplitude: f64, seed: u64) -> Configuration {
    if amplitude <= 0.0 {
        return cfg.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = cfg.clone();
    for i in 0..out.q.len() {
        out.q[i] += rng.random_range(-amplitude..amplitude);
    }
    for i in 0..out.theta.len() {
        out.theta[i] += rng.random_range(-amplitude..amplitude);
    }
    out
}

fn attempt_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs the pose-driven search and returns every converged equilibrium
/// found, sorted by stored elastic energy (lowest first). The list is empty
/// if nothing converged.
pub fn solve_for_pose_all(
    chain: &ChainModel,
    target: &Pose,
    start: &Configuration,
    settings: &SolverSettings,
) -> (Vec<EquilibriumState>, f64) {
    let mut found: Vec<Attempt> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let run_cycle = |steps: usize, found: &mut Vec<Attempt>, best_residual: &mut f64| {
        let explore = match descend(chain, target, start, steps, settings) {
            Ok(a) => {
                // A rescued attempt may sit on a branch the plain
                // iteration would not have chosen; keep exploring so the
                // energy ordering can compare it against restart finds.
                let explore = a.rescued;
                found.push(a);
                explore
            }
            Err(r) => {
                *best_residual = best_residual.min(r);
                true
            }
        };
        if explore {
            for restart in 1..=settings.restart_count {
                // Noise doubles every retry so late restarts can escape
                // flat symmetric configurations the base amplitude
                // cannot.
                let amplitude =
                    settings.restart_noise * f64::powi(2.0, (restart as i32 - 1).min(12));
                let s = noisy(
                    start,
                    amplitude,
                    attempt_seed(settings.rng_seed, restart as u64),
                );
                match descend(chain, target, &s, steps, settings) {
                    Ok(a) => {
                        found.push(a);
                        break;
                    }
                    Err(r) => *best_residual = best_residual.min(r),
                }
            }
        }
        for probe in 0..settings.probe_attempts {
            let s = noisy(
                start,
                settings.probe_noise,
                attempt_seed(settings.rng_seed, 1000 + probe as u64),
            );
            match descend(chain, target, &s, steps, settings) {
                Ok(a) => found.push(a),
                Err(r) => *best_residual = best_residual.min(r),
            }
        }
    };
    run_cycle(settings.continuation_steps, &mut found, &mut best_residual);
    if found.is_empty() && settings.continuation_steps == 1 {
        run_cycle(20, &mut found, &mut best_residual);
    }
    let mut states: Vec<EquilibriumState> = found
        .into_iter()
        .map(|a| {
            let energy = chain.elastic_energy(&a.cfg);
            EquilibriumState {
                cfg: a.cfg,
                wrench: a.wrench,
                target: target.clone(),
                residual_norm: a.residual,
                iterations: a.iterations,
                converged: true,
                energy,
                trace: a.trace,
            }
        })
        .collect();
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    (states, best_residual)
}

/// Drives the end-effector to `target` and returns the lowest-energy
/// converged equilibrium. If every attempt fails, the returned state has
/// `converged = false` and records the best residual reached.
pub fn solve_for_pose(
    chain: &ChainModel,
    target: &Pose,
    start: &Configuration,
    settings: &SolverSettings,
) -> EquilibriumState {
    let (mut states, best_residual) = solve_for_pose_all(chain, target, start, settings);
    if states.is_empty() {
        EquilibriumState {
            cfg: start.clone(),
            wrench: Wrench::zero(),
            target: target.clone(),
            residual_norm: best_residual,
            iterations: 0,
            converged: false,
            energy: chain.elastic_energy(start),
            trace: Vec::new(),
        }
    } else {
        states.swap_remove(0)
    }
}

/// Load-driven dual solve: walks the target pose by `K_c^{-1} (F - F_i)`
/// until the reaction matches `F`.
///
/// The update direction exists only when the Cartesian stiffness is
/// nonsingular over the task space, which fails for any single chain with
/// passive joints; such chains produce [`Error::SingularStiffness`].
pub fn solve_for_wrench(
    chain: &ChainModel,
    wrench: &Wrench,
    start: &Configuration,
    settings: &SolverSettings,
) -> Result<EquilibriumState> {
    let task = chain.task();
    let k = task.dim();
    let f_target = task.select(&wrench.as_vector());
    let mut target = chain.forward_pose(start);
    let mut state = solve_for_pose(chain, &target, start, settings);
    if !state.converged {
        return Err(Error::NotConverged {
            best_residual: state.residual_norm,
        });
    }
    let tol_f = settings.residual_tol * f_target.norm().max(1.0);
    for _ in 0..60 {
        let f_now = task.select(&state.wrench.as_vector());
        let df = &f_target - &f_now;
        if df.norm() <= tol_f {
            return Ok(state);
        }
        let kc = crate::stiffness::kc_full(chain, &state)?;
        let idx: Vec<usize> = task.components().collect();
        let kc_sq = DMatrix::from_fn(k, k, |i, j| kc.k_c[(idx[i], idx[j])]);
        let rank = kc_sq
            .clone()
            .rank(tol::KERNEL_REL * kc_sq.amax().max(f64::MIN_POSITIVE));
        if rank < k {
            return Err(Error::SingularStiffness { rank, size: k });
        }
        let dt = kc_sq
            .clone()
            .lu()
            .solve(&df)
            .ok_or(Error::SingularStiffness { rank, size: k })?;
        // Backtrack if the full step overshoots.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let candidate = target.displaced(&task.embed(&(&dt * scale)));
            let s = solve_for_pose(chain, &candidate, &state.cfg, settings);
            if s.converged {
                let f_new = task.select(&s.wrench.as_vector());
                let gap = (&f_target - &f_new).norm();
                if gap < df.norm() || gap <= tol_f {
                    accepted = Some((candidate, s));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((t, s)) => {
                target = t;
                state = s;
            }
            None => {
                return Err(Error::NotConverged {
                    best_residual: df.norm(),
                })
            }
        }
    }
    Err(Error::NotConverged {
        best_residual: (f_target - task.select(&state.wrench.as_vector())).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Element, JointAxis, JointKind, TaskSpace};
    use crate::elasticity::SpringBlock;
    use approx::assert_relative_eq;
    use nalgebra::{Vector3, Vector6};

    fn spring_z(k: f64) -> JointKind {
        JointKind::VirtualSpring {
            axes: vec![JointAxis::RotZ],
            block: SpringBlock::scalar(k).unwrap(),
        }
    }

    /// Planar three-link column with passive base, unit links, unit hinge
    /// springs; task constrains the end point only.
    fn column() -> ChainModel {
        ChainModel::with_task(
            vec![
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotZ,
                    reference: 0.0,
                }),
                Element::link_x(1.0),
                Element::Joint(spring_z(1.0)),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: 0.0,
                }),
                Element::link_x(1.0),
                Element::Joint(spring_z(1.0)),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: 0.0,
                }),
                Element::link_x(1.0),
            ],
            TaskSpace::point_xy(),
        )
        .unwrap()
    }

    /// Spatial chain with one six-coordinate spring and no passive joints.
    fn no_passive_chain() -> ChainModel {
        let mut k = DMatrix::identity(6, 6);
        for (i, v) in [40.0, 30.0, 20.0, 8.0, 6.0, 4.0].iter().enumerate() {
            k[(i, i)] = *v;
        }
        k[(1, 5)] = -2.0;
        k[(5, 1)] = -2.0;
        ChainModel::new(vec![
            Element::link_x(0.5),
            Element::Joint(JointKind::VirtualSpring {
                axes: vec![
                    JointAxis::TransX,
                    JointAxis::TransY,
                    JointAxis::TransZ,
                    JointAxis::RotX,
                    JointAxis::RotY,
                    JointAxis::RotZ,
                ],
                block: SpringBlock::from_stiffness(k).unwrap(),
            }),
            Element::link_x(0.5),
        ])
        .unwrap()
    }

    #[test]
    fn straight_column_balances_axial_force_exactly() {
        // Every joint twist is orthogonal to x at the straight configuration,
        // so an axial force produces no torque anywhere, at any magnitude.
        let chain = column();
        let cfg = chain.reference_configuration();
        for f in [0.1, 1.0, 10.0] {
            let wrench = Wrench::from_force(Vector3::new(-f, 0.0, 0.0));
            let target = chain.forward_pose(&cfg);
            let parts = equilibrium_residual(&chain, &cfg, &wrench, &target);
            assert_relative_eq!(parts.stat_q.norm(), 0.0, epsilon = 1e-14);
            assert_relative_eq!(parts.stat_theta.norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn axial_compression_finds_symmetric_fold() {
        // Closed form for the folded column: end at x = 3 - delta, hinge
        // angle phi = arccos(1 - delta/2), axial force (K/L) phi / sin(phi).
        let chain = column();
        let delta = 0.5;
        let target = Pose::new(Vector3::new(3.0 - delta, 0.0, 0.0), Default::default());
        let settings = SolverSettings::default();
        let state = solve_for_pose(&chain, &target, &chain.reference_configuration(), &settings);
        assert!(state.converged, "residual {}", state.residual_norm);
        let phi = (1.0 - delta / 2.0).acos();
        assert_relative_eq!(state.cfg.q[0].abs(), phi, epsilon = 1e-7);
        let f_axial = -state.wrench.force.x;
        assert_relative_eq!(f_axial, phi / phi.sin(), epsilon = 1e-7);
        assert_relative_eq!(state.wrench.force.y, 0.0, epsilon = 1e-7);
        // The pose residual itself is tiny.
        assert!(state.residual_norm < 1e-9);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let chain = column();
        let target = Pose::new(Vector3::new(2.6, 0.0, 0.0), Default::default());
        let settings = SolverSettings {
            rng_seed: 42,
            ..Default::default()
        };
        let a = solve_for_pose(&chain, &target, &chain.reference_configuration(), &settings);
        let b = solve_for_pose(&chain, &target, &chain.reference_configuration(), &settings);
        assert_eq!(a.cfg.q, b.cfg.q);
        assert_eq!(a.cfg.theta, b.cfg.theta);
        assert_eq!(a.wrench, b.wrench);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn no_passive_chain_response_matches_linear_stiffness() {
        let chain = no_passive_chain();
        let cfg = chain.reference_configuration();
        let (jt, _) = chain.jacobians(&cfg);
        let kc = (&jt
            * chain.k_theta().clone().try_inverse().unwrap()
            * jt.transpose())
        .try_inverse()
        .unwrap();
        let dt = Vector6::new(1e-6, -2e-6, 1e-6, 0.0, 1e-6, -1e-6);
        let target = chain.forward_pose(&cfg).displaced(&dt);
        let state = solve_for_pose(&chain, &target, &cfg, &SolverSettings::default());
        assert!(state.converged);
        let dt_dyn = DVector::from_column_slice(dt.as_slice());
        let expected = &kc * dt_dyn;
        let got = state.wrench.as_vector();
        for i in 0..6 {
            assert_relative_eq!(got[i], expected[i], epsilon = 1e-9, max_relative = 1e-4);
        }
    }

    #[test]
    fn wrench_solve_round_trips_on_full_rank_chain() {
        let chain = no_passive_chain();
        let cfg = chain.reference_configuration();
        let dt = Vector6::new(2e-3, -1e-3, 5e-4, 1e-3, 0.0, -2e-3);
        let target = chain.forward_pose(&cfg).displaced(&dt);
        let settings = SolverSettings::default();
        let fwd = solve_for_pose(&chain, &target, &cfg, &settings);
        assert!(fwd.converged);
        let back = solve_for_wrench(&chain, &fwd.wrench, &cfg, &settings).unwrap();
        let gap = pose_residual(&back.target, &target);
        assert!(gap.norm() < 1e-8, "pose gap {}", gap.norm());
    }

    #[test]
    fn wrench_solve_rejects_passive_chains() {
        let chain = column();
        let err = solve_for_wrench(
            &chain,
            &Wrench::from_force(Vector3::new(0.0, 0.1, 0.0)),
            &chain.reference_configuration(),
            &SolverSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularStiffness { .. }));
    }

    #[test]
    fn reduced_step_matches_full_bordered_step() {
        // One Newton update computed through the full (k+n+m) bordered
        // system must equal the reduced (k+n) update, for the same iterate.
        let chain = column();
        let mut cfg = chain.reference_configuration();
        cfg.q[0] = 0.4;
        cfg.theta[0] = -0.35;
        cfg.theta[1] = -0.3;
        let target = Pose::new(Vector3::new(2.4, 0.0, 0.0), Default::default());
        let task = chain.task();
        let (k, n, m) = (task.dim(), chain.n(), chain.m());
        let (jt, jq) = chain.masked_jacobians(&cfg);
        let actual = chain.forward_pose(&cfg);
        let r = task.select(&pose_residual(&target, &actual));

        // Full system in unknowns [F, q_next, theta_next].
        let mut full = DMatrix::zeros(k + n + m, k + n + m);
        full.view_mut((0, k), (k, n)).copy_from(&jq);
        full.view_mut((0, k + n), (k, m)).copy_from(&jt);
        full.view_mut((k, 0), (n, k)).copy_from(&jq.transpose());
        full.view_mut((k + n, 0), (m, k)).copy_from(&jt.transpose());
        full.view_mut((k + n, k + n), (m, m))
            .copy_from(&(-chain.k_theta()));
        let mut rhs = DVector::zeros(k + n + m);
        let affine = &r + &jq * &cfg.q + &jt * &cfg.theta;
        rhs.rows_mut(0, k).copy_from(&affine);
        rhs.rows_mut(k + n, m)
            .copy_from(&(-(chain.k_theta() * chain.theta0())));
        let sol = full.lu().solve(&rhs).unwrap();
        let f_full = sol.rows(0, k).into_owned();
        let q_full = sol.rows(k, n).into_owned();
        let th_full = sol.rows(k + n, m).into_owned();

        // Reduced system in [F, dq].
        let k_inv = chain.k_theta().clone().try_inverse().unwrap();
        let a = &jt * &k_inv * jt.transpose();
        let mut red = DMatrix::zeros(k + n, k + n);
        red.view_mut((0, 0), (k, k)).copy_from(&a);
        red.view_mut((0, k), (k, n)).copy_from(&jq);
        red.view_mut((k, 0), (n, k)).copy_from(&jq.transpose());
        let mut rhs2 = DVector::zeros(k + n);
        rhs2.rows_mut(0, k)
            .copy_from(&(&r + &jt * (&cfg.theta - chain.theta0())));
        let sol2 = red.lu().solve(&rhs2).unwrap();
        let f_red = sol2.rows(0, k).into_owned();
        let q_red = &cfg.q + sol2.rows(k, n).into_owned();
        let th_red = chain.theta0() + &k_inv * (jt.transpose() * &f_red);

        assert_relative_eq!(f_full, f_red, epsilon = 1e-10);
        assert_relative_eq!(q_full, q_red, epsilon = 1e-10);
        assert_relative_eq!(th_full, th_red, epsilon = 1e-10);
    }
}
