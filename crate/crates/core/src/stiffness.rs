//! Cartesian stiffness about a loaded equilibrium.
//!
//! Linearizing the equilibrium conditions in `(dF, dq, dtheta)` against a
//! pose increment `dt` gives a bordered symmetric system; the upper-left
//! block of its inverse is the Cartesian stiffness `K_c` (`dF = K_c dt`),
//! and the remaining blocks of the first block-column are the joint
//! sensitivities. Three equivalent routes are provided: the full bordered
//! inverse ([`kc_full`]), a spring-condensed reduced inverse
//! ([`kc_reduced`]), and a closed-form block factorization
//! ([`kc_frobenius`]). Parallel assemblies sum chain matrices expressed at
//! a common tool frame ([`aggregate_parallel`]).

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::chain::ChainModel;
use crate::equilibrium::{solve_for_pose, EquilibriumState, SolverSettings};
use crate::error::{Error, Result};
use crate::pose::{rotation_log, Pose};
use crate::tol;

/// What a singular direction of the bordered system means physically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularKind {
    /// No admissible motion produces this pose direction: the structure is
    /// rigid along it and the stiffness is unbounded.
    Infinite,
    /// A joint-space motion exists that needs no force: zero stiffness
    /// along the direction (or an internal mechanism if the direction is
    /// zero).
    Mechanism,
}

/// One singular direction, as a unit pose/wrench 6-vector where one exists.
#[derive(Debug, Clone)]
pub struct SingularDirection {
    pub kind: SingularKind,
    pub direction: Vector6<f64>,
}

/// Cartesian stiffness with joint sensitivities and diagnostics.
#[derive(Debug, Clone)]
pub struct StiffnessResult {
    /// `6 x 6` Cartesian stiffness; rows and columns outside the chain's
    /// task space are zero.
    pub k_c: Matrix6<f64>,
    /// `n x 6` passive-joint sensitivity: `dq = S_q dt`.
    pub s_q: DMatrix<f64>,
    /// `m x 6` elastic-coordinate sensitivity: `dtheta = S_theta dt`.
    pub s_theta: DMatrix<f64>,
    /// Numerical rank of the task-space block of `k_c`.
    pub rank: usize,
    /// Condition number of the bordered matrix that was inverted.
    pub condition: f64,
    /// Relative asymmetry of `k_c`; loaded states may legitimately be
    /// asymmetric, so this is reported rather than asserted.
    pub asymmetry: f64,
    /// Kernel of the bordered system, annotated.
    pub singular_directions: Vec<SingularDirection>,
    /// Tool pose the matrix is expressed at (for aggregation checks).
    pub frame: Pose,
    /// Set when the spring-condensed route found `K_theta - H_thetatheta`
    /// singular (a spring-level critical load) and fell back to the full
    /// inverse.
    pub spring_critical: bool,
}

fn require_converged(state: &EquilibriumState) -> Result<()> {
    if !state.converged {
        return Err(Error::InvalidParameter(
            "stiffness requires a converged equilibrium".into(),
        ));
    }
    Ok(())
}

fn relative_asymmetry(k: &DMatrix<f64>) -> f64 {
    let scale = k.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (k - k.transpose()).amax() / scale
}

fn masked_rank(k: &DMatrix<f64>) -> usize {
    let svd = k.clone().svd(false, false);
    let smax = svd.singular_values.amax();
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > tol::KERNEL_REL * smax)
        .count()
}

/// Embeds an `rows x k` task-column matrix into `rows x 6`.
fn embed_columns(chain: &ChainModel, partial: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(partial.nrows(), 6);
    for (col, i) in chain.task().components().enumerate() {
        out.set_column(i, &partial.column(col));
    }
    out
}

struct BorderedPieces {
    jt: DMatrix<f64>,
    jq: DMatrix<f64>,
    h_qq: DMatrix<f64>,
    h_qtheta: DMatrix<f64>,
    h_thetatheta: DMatrix<f64>,
}

fn pieces(chain: &ChainModel, state: &EquilibriumState) -> BorderedPieces {
    let (jt, jq) = chain.masked_jacobians(&state.cfg);
    let hess = chain.torque_hessians(&state.cfg, &state.wrench.as_vector());
    BorderedPieces {
        jt,
        jq,
        h_qq: hess.h_qq,
        h_qtheta: hess.h_qtheta,
        h_thetatheta: hess.h_thetatheta,
    }
}

/// Symmetric Ruiz equilibration scales for a square matrix: iteratively
/// normalizes row infinity-norms so the scale spread between spring rates
/// and geometric terms stops inflating the condition number.
fn ruiz_scales(matrix: &DMatrix<f64>) -> DVector<f64> {
    let size = matrix.nrows();
    let mut scales = DVector::from_element(size, 1.0);
    let mut work = matrix.clone();
    for _ in 0..8 {
        let mut settled = true;
        let mut step = DVector::from_element(size, 1.0);
        for i in 0..size {
            let row_norm = work.row(i).amax();
            if row_norm > 0.0 {
                step[i] = 1.0 / row_norm.sqrt();
                if (row_norm - 1.0).abs() > 1e-2 {
                    settled = false;
                }
            }
        }
        for i in 0..size {
            for j in 0..size {
                work[(i, j)] *= step[i] * step[j];
            }
        }
        scales.component_mul_assign(&step);
        if settled {
            break;
        }
    }
    scales
}

/// Inverts a symmetric bordered matrix by truncated SVD after symmetric
/// equilibration; returns the pseudo-inverse, the condition number of the
/// equilibrated matrix, and the kernel columns (in the original scaling).
fn pseudo_invert(matrix: DMatrix<f64>) -> (DMatrix<f64>, f64, Vec<DVector<f64>>) {
    let size = matrix.nrows();
    let d = ruiz_scales(&matrix);
    let mut scaled = matrix;
    for i in 0..size {
        for j in 0..size {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.amax();
    if smax == 0.0 {
        return (DMatrix::zeros(size, size), f64::INFINITY, Vec::new());
    }
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let v_t = svd.v_t.as_ref().expect("V requested");
    let mut kernel = Vec::new();
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= tol::KERNEL_REL * smax {
            // Kernel of the scaled matrix maps back through the scales.
            let mut z = v_t.row(i).transpose();
            z.component_mul_assign(&d);
            let norm = z.norm();
            if norm > 0.0 {
                z /= norm;
            }
            kernel.push(z);
        }
    }
    let mut pinv = svd
        .pseudo_inverse(tol::SOLVE_TRUNCATION_REL * smax)
        .expect("positive cutoff");
    for i in 0..size {
        for j in 0..size {
            pinv[(i, j)] *= d[i] * d[j];
        }
    }
    (pinv, condition, kernel)
}

/// Annotates bordered-kernel vectors whose leading `k` entries are the
/// wrench part; `motion_to_twist` maps the trailing motion entries to a
/// world twist for mechanism directions.
fn annotate_kernel(
    chain: &ChainModel,
    kernel: Vec<DVector<f64>>,
    k: usize,
    motion_to_twist: impl Fn(&DVector<f64>) -> Vector6<f64>,
) -> Vec<SingularDirection> {
    let task = chain.task();
    kernel
        .into_iter()
        .map(|v| {
            let f_part = v.rows(0, k).into_owned();
            if f_part.norm() >= 0.99 {
                SingularDirection {
                    kind: SingularKind::Infinite,
                    direction: task.embed(&(&f_part / f_part.norm())),
                }
            } else {
                let motion = v.rows(k, v.len() - k).into_owned();
                let twist = motion_to_twist(&motion);
                let direction = if twist.norm() > 1e-9 {
                    twist / twist.norm()
                } else {
                    Vector6::zeros()
                };
                SingularDirection {
                    kind: SingularKind::Mechanism,
                    direction,
                }
            }
        })
        .collect()
}

/// Full-route Cartesian stiffness: assemble the `(k+n+m)` bordered matrix
/// over `(dF, dq, dtheta)`, invert, and extract the first block column.
/// A singular bordered matrix is reported through `singular_directions`,
/// with the pseudo-inverse standing in for the unreachable entries.
pub fn kc_full(chain: &ChainModel, state: &EquilibriumState) -> Result<StiffnessResult> {
    require_converged(state)?;
    let p = pieces(chain, state);
    let task = chain.task();
    let (k, n, m) = (task.dim(), chain.n(), chain.m());
    let size = k + n + m;
    let mut bordered = DMatrix::zeros(size, size);
    bordered.view_mut((0, k), (k, n)).copy_from(&p.jq);
    bordered.view_mut((0, k + n), (k, m)).copy_from(&p.jt);
    bordered.view_mut((k, 0), (n, k)).copy_from(&p.jq.transpose());
    bordered.view_mut((k, k), (n, n)).copy_from(&p.h_qq);
    bordered.view_mut((k, k + n), (n, m)).copy_from(&p.h_qtheta);
    bordered
        .view_mut((k + n, 0), (m, k))
        .copy_from(&p.jt.transpose());
    bordered
        .view_mut((k + n, k), (m, n))
        .copy_from(&p.h_qtheta.transpose());
    bordered
        .view_mut((k + n, k + n), (m, m))
        .copy_from(&(&p.h_thetatheta - chain.k_theta()));
    let (pinv, condition, kernel) = pseudo_invert(bordered);
    let kc_masked = pinv.view((0, 0), (k, k)).into_owned();
    let s_q_masked = pinv.view((k, 0), (n, k)).into_owned();
    let s_theta_masked = pinv.view((k + n, 0), (m, k)).into_owned();
    let (jt_full, jq_full) = chain.jacobians(&state.cfg);
    let singular_directions = annotate_kernel(chain, kernel, k, |motion| {
        let dq = motion.rows(0, n).into_owned();
        let dth = motion.rows(n, m).into_owned();
        let t = &jq_full * dq + &jt_full * dth;
        Vector6::from_iterator(t.iter().cloned())
    });
    Ok(StiffnessResult {
        k_c: task.embed_matrix(&kc_masked),
        s_q: embed_columns(chain, &s_q_masked),
        s_theta: embed_columns(chain, &s_theta_masked),
        rank: masked_rank(&kc_masked),
        condition,
        asymmetry: relative_asymmetry(&kc_masked),
        singular_directions,
        frame: state.target.clone(),
        spring_critical: false,
    })
}

/// Reduced-route stiffness: condense the elastic coordinates through
/// `k_theta_f = (K_theta - H_thetatheta)^-1` and invert a `(k+n)` bordered
/// matrix. Falls back to [`kc_full`] (flagging `spring_critical`) when the
/// condensation matrix is singular — a spring-level critical load.
pub fn kc_reduced(chain: &ChainModel, state: &EquilibriumState) -> Result<StiffnessResult> {
    require_converged(state)?;
    let p = pieces(chain, state);
    let task = chain.task();
    let (k, n) = (task.dim(), chain.n());
    let core = chain.k_theta() - &p.h_thetatheta;
    let m = chain.m();
    let d_core = ruiz_scales(&core);
    let mut core_eq = core;
    for i in 0..m {
        for j in 0..m {
            core_eq[(i, j)] *= d_core[i] * d_core[j];
        }
    }
    let core_svd = core_eq.svd(true, true);
    let smax = core_svd.singular_values.amax();
    let smin = core_svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smax == 0.0 || smin <= 1e-13 * smax {
        let mut fallback = kc_full(chain, state)?;
        fallback.spring_critical = true;
        return Ok(fallback);
    }
    let mut k_theta_f = core_svd.pseudo_inverse(0.0).expect("nonsingular by check");
    for i in 0..m {
        for j in 0..m {
            k_theta_f[(i, j)] *= d_core[i] * d_core[j];
        }
    }
    let h_thetaq = p.h_qtheta.transpose();
    let a = &p.jt * &k_theta_f * p.jt.transpose();
    let b = &p.jq + &p.jt * &k_theta_f * &h_thetaq;
    let d = &p.h_qq + &p.h_qtheta * &k_theta_f * &h_thetaq;
    let mut bordered = DMatrix::zeros(k + n, k + n);
    bordered.view_mut((0, 0), (k, k)).copy_from(&a);
    bordered.view_mut((0, k), (k, n)).copy_from(&b);
    bordered.view_mut((k, 0), (n, k)).copy_from(&b.transpose());
    bordered.view_mut((k, k), (n, n)).copy_from(&d);
    let (pinv, condition, kernel) = pseudo_invert(bordered);
    let kc_masked = pinv.view((0, 0), (k, k)).into_owned();
    let s_q_masked = pinv.view((k, 0), (n, k)).into_owned();
    // dtheta follows from the condensation relation.
    let s_theta_masked = &k_theta_f * (p.jt.transpose() * &kc_masked + &h_thetaq * &s_q_masked);
    let (jt_full, jq_full) = chain.jacobians(&state.cfg);
    let singular_directions = annotate_kernel(chain, kernel, k, |motion| {
        // Recover the condensed elastic motion for the twist direction
        // (the wrench part of a mechanism kernel vector is negligible).
        let dth = &k_theta_f * (&h_thetaq * motion);
        let t = &jq_full * motion + &jt_full * dth;
        Vector6::from_iterator(t.iter().cloned())
    });
    Ok(StiffnessResult {
        k_c: task.embed_matrix(&kc_masked),
        s_q: embed_columns(chain, &s_q_masked),
        s_theta: embed_columns(chain, &s_theta_masked),
        rank: masked_rank(&kc_masked),
        condition,
        asymmetry: relative_asymmetry(&kc_masked),
        singular_directions,
        frame: state.target.clone(),
        spring_critical: false,
    })
}

/// Closed-form stiffness by block factorization of the reduced bordered
/// matrix: `K_c = A^-1 + A^-1 B (D - B^T A^-1 B)^-1 B^T A^-1` with
/// `A = J_theta k_theta_f J_theta^T`. Errors when an inner inverse does
/// not exist; [`kc_full`] always remains available.
pub fn kc_frobenius(chain: &ChainModel, state: &EquilibriumState) -> Result<Matrix6<f64>> {
    require_converged(state)?;
    let p = pieces(chain, state);
    let task = chain.task();
    let n = chain.n();
    let core = chain.k_theta() - &p.h_thetatheta;
    let k_theta_f = core.try_inverse().ok_or(Error::SingularFactor {
        context: "spring condensation matrix".into(),
    })?;
    let h_thetaq = p.h_qtheta.transpose();
    let a = &p.jt * &k_theta_f * p.jt.transpose();
    let a_inv = a.try_inverse().ok_or(Error::SingularFactor {
        context: "leading elastic block".into(),
    })?;
    if n == 0 {
        return Ok(task.embed_matrix(&a_inv));
    }
    let b = &p.jq + &p.jt * &k_theta_f * &h_thetaq;
    let d = &p.h_qq + &p.h_qtheta * &k_theta_f * &h_thetaq;
    let schur = &d - b.transpose() * &a_inv * &b;
    let schur_inv = schur.try_inverse().ok_or(Error::SingularFactor {
        context: "passive-joint Schur complement".into(),
    })?;
    let correction = &a_inv * &b * schur_inv * b.transpose() * &a_inv;
    Ok(task.embed_matrix(&(&a_inv + correction)))
}

/// Sums chain stiffness matrices expressed at one common tool frame.
/// Per-chain sensitivities stay with the inputs; the aggregate's own
/// sensitivity blocks are empty.
pub fn aggregate_parallel(results: &[StiffnessResult]) -> Result<StiffnessResult> {
    let first = results.first().ok_or_else(|| {
        Error::InvalidParameter("aggregation needs at least one chain".into())
    })?;
    let mut k_c = Matrix6::zeros();
    let mut spring_critical = false;
    for r in results {
        let gap = (r.frame.position - first.frame.position).norm()
            + rotation_log(&(r.frame.rotation * first.frame.rotation.inverse())).norm();
        if gap > 1e-9 * (1.0 + first.frame.position.norm()) {
            return Err(Error::FrameMismatch { gap });
        }
        if !r.singular_directions.is_empty() {
            return Err(Error::InvalidParameter(
                "cannot aggregate a chain with unresolved singular directions".into(),
            ));
        }
        k_c += r.k_c;
        spring_critical |= r.spring_critical;
    }
    let dense = DMatrix::from_fn(6, 6, |i, j| k_c[(i, j)]);
    let svd = dense.clone().svd(false, true);
    let smax = svd.singular_values.amax();
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut singular_directions = Vec::new();
    if smax > 0.0 {
        let v_t = svd.v_t.as_ref().expect("V requested");
        for i in 0..svd.singular_values.len() {
            if svd.singular_values[i] <= tol::KERNEL_REL * smax {
                let dir = v_t.row(i).transpose();
                singular_directions.push(SingularDirection {
                    kind: SingularKind::Mechanism,
                    direction: Vector6::from_iterator(dir.iter().cloned()),
                });
            }
        }
    }
    Ok(StiffnessResult {
        k_c,
        s_q: DMatrix::zeros(0, 6),
        s_theta: DMatrix::zeros(0, 6),
        rank: masked_rank(&dense),
        condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        asymmetry: relative_asymmetry(&dense),
        singular_directions,
        frame: first.frame.clone(),
        spring_critical,
    })
}

/// Finite-difference stiffness oracle: re-solves the equilibrium at pose
/// targets displaced by `±step` along each task direction and differences
/// the returned wrenches. Columns whose probe solves fail are flagged;
/// off-task columns are identically zero.
#[derive(Debug, Clone)]
pub struct FdProbe {
    pub matrix: Matrix6<f64>,
    pub failed: [bool; 6],
}

pub fn fd_stiffness_probe(
    chain: &ChainModel,
    state: &EquilibriumState,
    step: f64,
) -> Result<FdProbe> {
    require_converged(state)?;
    if step <= 0.0 {
        return Err(Error::InvalidParameter("probe step must be positive".into()));
    }
    let settings = SolverSettings {
        residual_tol: 1e-12,
        probe_attempts: 0,
        ..SolverSettings::default()
    };
    let mut matrix = Matrix6::zeros();
    let mut failed = [false; 6];
    for i in chain.task().components() {
        let mut dt = Vector6::zeros();
        dt[i] = step;
        let plus = solve_for_pose(chain, &state.target.displaced(&dt), &state.cfg, &settings);
        dt[i] = -step;
        let minus = solve_for_pose(chain, &state.target.displaced(&dt), &state.cfg, &settings);
        if !(plus.converged && minus.converged) {
            failed[i] = true;
            continue;
        }
        let diff = (plus.wrench.as_vector() - minus.wrench.as_vector()) / (2.0 * step);
        for r in 0..6 {
            matrix[(r, i)] = diff[r];
        }
    }
    Ok(FdProbe { matrix, failed })
}
