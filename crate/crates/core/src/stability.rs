//! Stability of loaded equilibria.
//!
//! An equilibrium is stable when every admissible joint-space variation —
//! one that keeps the end-effector pose fixed to first order — raises the
//! total potential. Admissible variations span the kernel of the combined
//! Jacobian `[J_theta  J_q]`; projecting the load-and-spring Hessian onto
//! that kernel yields a small symmetric matrix `M` whose negative
//! definiteness is the stability test. [`energy_probe`] cross-checks the
//! verdict by sampling actual constrained energy changes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainModel, Configuration};
use crate::equilibrium::EquilibriumState;
use crate::error::{Error, Result};
use crate::pose::pose_residual;
use crate::tol;

/// Orthonormal basis of the admissible variations at a configuration.
///
/// Columns pair a `theta` part with a `q` part; stacked as
/// `[v_theta; v_q]` they span the kernel of `[J_theta  J_q]`.
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    /// `m x r` elastic rows of the basis.
    pub v_theta: DMatrix<f64>,
    /// `n x r` passive rows of the basis.
    pub v_q: DMatrix<f64>,
    /// Row rank of the combined Jacobian.
    pub rank: usize,
}

impl NullSpaceBasis {
    /// Kernel dimension `r`.
    pub fn r(&self) -> usize {
        self.v_theta.ncols()
    }

    /// The `(m + n) x r` stacked basis, elastic rows first.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (m, n, r) = (self.v_theta.nrows(), self.v_q.nrows(), self.r());
        let mut out = DMatrix::zeros(m + n, r);
        out.view_mut((0, 0), (m, r)).copy_from(&self.v_theta);
        out.view_mut((m, 0), (n, r)).copy_from(&self.v_q);
        out
    }
}

/// Stability classification of one equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    /// Smallest eigenvalue inside the tolerance band around zero: the
    /// equilibrium sits at (or numerically at) a stability boundary.
    Critical,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Critical => "critical",
        })
    }
}

/// Outcome of the eigenvalue test.
#[derive(Debug, Clone)]
pub struct StabilityVerdict {
    pub classification: Classification,
    /// Smallest eigenvalue of the negated projected matrix `-M`; positive
    /// for stable equilibria. Infinite when the kernel is empty.
    pub min_eigenvalue: f64,
    /// Kernel dimension `r` the test was run over.
    pub basis_rank: usize,
}

/// Orthonormal kernel basis of `[j_theta  j_q]` (any common row count).
///
/// Singular directions with value below [`tol::KERNEL_REL`] of the largest
/// are part of the kernel. The matrix is zero-padded to square before the
/// SVD so the factor carries the full right basis even for wide inputs.
pub fn constraint_nullspace(j_theta: &DMatrix<f64>, j_q: &DMatrix<f64>) -> NullSpaceBasis {
    assert_eq!(j_theta.nrows(), j_q.nrows(), "jacobian row counts");
    let k = j_theta.nrows();
    let (m, n) = (j_theta.ncols(), j_q.ncols());
    let total = m + n;
    let rows = total.max(k);
    let mut j = DMatrix::zeros(rows, total);
    j.view_mut((0, 0), (k, m)).copy_from(j_theta);
    j.view_mut((0, m), (k, n)).copy_from(j_q);
    let svd = j.svd(false, true);
    let v_t = svd.v_t.expect("SVD with V requested");
    let smax = svd.singular_values.amax();
    let threshold = tol::KERNEL_REL * smax;
    let mut kernel_rows: Vec<usize> = Vec::new();
    let mut rank = 0;
    for i in 0..v_t.nrows() {
        let s = if i < svd.singular_values.len() {
            svd.singular_values[i]
        } else {
            0.0
        };
        if s <= threshold {
            kernel_rows.push(i);
        } else {
            rank += 1;
        }
    }
    let r = kernel_rows.len();
    let mut v_theta = DMatrix::zeros(m, r);
    let mut v_q = DMatrix::zeros(n, r);
    for (col, &row) in kernel_rows.iter().enumerate() {
        for a in 0..m {
            v_theta[(a, col)] = v_t[(row, a)];
        }
        for b in 0..n {
            v_q[(b, col)] = v_t[(row, m + b)];
        }
    }
    NullSpaceBasis { v_theta, v_q, rank }
}

/// Hessian of the total potential over `[theta; q]`, elastic rows first:
/// load Hessian at the state's wrench minus the spring stiffness in the
/// elastic block.
fn potential_hessian(chain: &ChainModel, state: &EquilibriumState) -> DMatrix<f64> {
    let (m, n) = (chain.m(), chain.n());
    let hess = chain.torque_hessians(&state.cfg, &state.wrench.as_vector());
    let mut big = DMatrix::zeros(m + n, m + n);
    big.view_mut((0, 0), (m, m))
        .copy_from(&(&hess.h_thetatheta - chain.k_theta()));
    big.view_mut((0, m), (m, n)).copy_from(&hess.h_thetaq());
    big.view_mut((m, 0), (n, m)).copy_from(&hess.h_qtheta);
    big.view_mut((m, m), (n, n)).copy_from(&hess.h_qq);
    big
}

fn nullspace_at(chain: &ChainModel, cfg: &Configuration) -> NullSpaceBasis {
    let (jt, jq) = chain.masked_jacobians(cfg);
    constraint_nullspace(&jt, &jq)
}

/// Projects the potential Hessian onto the admissible kernel: the `r x r`
/// matrix whose negative definiteness certifies stability.
pub fn stability_matrix(chain: &ChainModel, state: &EquilibriumState) -> Result<DMatrix<f64>> {
    if !state.converged {
        return Err(Error::InvalidParameter(
            "stability test requires a converged equilibrium".into(),
        ));
    }
    let basis = nullspace_at(chain, &state.cfg);
    let v = basis.stacked();
    let big = potential_hessian(chain, state);
    let m = v.transpose() * big * &v;
    // The projection of a symmetric matrix is symmetric; keep it exactly so.
    Ok((&m + m.transpose()) * 0.5)
}

/// Unit direction in `(theta, q)` space along which the potential grows
/// slowest (or falls fastest) without violating the pose constraint to
/// first order: the kernel lift of the eigenvector of the projected
/// potential Hessian with the smallest eigenvalue. `None` when no
/// admissible variation exists. Useful as a structured kick for jumping
/// onto a post-buckling branch that random noise cannot reach.
pub fn softest_mode(
    chain: &ChainModel,
    state: &EquilibriumState,
) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
    if !state.converged {
        return Err(Error::InvalidParameter(
            "softest mode requires a converged equilibrium".into(),
        ));
    }
    let basis = nullspace_at(chain, &state.cfg);
    if basis.r() == 0 {
        return Ok(None);
    }
    let v = basis.stacked();
    let big = potential_hessian(chain, state);
    let m = v.transpose() * &big * &v;
    // `big` is the negated potential Hessian, so the softest direction of
    // the potential is the largest eigenvalue here; negate to use argmin.
    let eigen = (-(&m + m.transpose()) * 0.5).symmetric_eigen();
    let mut idx = 0;
    for i in 1..eigen.eigenvalues.len() {
        if eigen.eigenvalues[i] < eigen.eigenvalues[idx] {
            idx = i;
        }
    }
    let w = &v * eigen.eigenvectors.column(idx);
    let m_rows = chain.m();
    let theta = w.rows(0, m_rows).into_owned();
    let q = w.rows(m_rows, chain.n()).into_owned();
    Ok(Some((theta, q)))
}

/// Eigenvalue classification of an equilibrium. `band` is the relative
/// width of the Critical band around zero (use [`tol::CRITICAL_BAND`]).
pub fn classify(chain: &ChainModel, state: &EquilibriumState, band: f64) -> Result<StabilityVerdict> {
    let m = stability_matrix(chain, state)?;
    let r = m.nrows();
    if r == 0 {
        // No admissible variation exists; nothing can lower the potential.
        return Ok(StabilityVerdict {
            classification: Classification::Stable,
            min_eigenvalue: f64::INFINITY,
            basis_rank: 0,
        });
    }
    let eigen = (-m).symmetric_eigen();
    let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, |a, b| a.max(b.abs()));
    let classification = if scale == 0.0 {
        Classification::Critical
    } else if min > band * scale {
        Classification::Stable
    } else if min < -band * scale {
        Classification::Unstable
    } else {
        Classification::Critical
    };
    Ok(StabilityVerdict {
        classification,
        min_eigenvalue: min,
        basis_rank: r,
    })
}

/// Sampling cross-check of [`classify`].
#[derive(Debug, Clone)]
pub struct ProbeReport {
    /// Directions drawn.
    pub samples: usize,
    /// Probes whose pose constraint was restored exactly.
    pub restored: usize,
    /// Probes discarded because restoration failed.
    pub discarded: usize,
    /// Restored probes with a clear energy rise.
    pub ascending: usize,
    /// Restored probes with a clear energy drop.
    pub descending: usize,
    /// Restored probes below the energy resolution either way.
    pub inconclusive: usize,
    /// Fraction of restored probes whose measured energy change agrees in
    /// sign with the quadratic-form prediction (inconclusive ones count as
    /// agreeing). 1.0 when nothing was restored.
    pub agreement: f64,
    /// Verdict implied by the samples alone: unstable iff a descending
    /// direction was found.
    pub probe_verdict: Classification,
    /// The eigenvalue verdict being checked.
    pub eigen_verdict: StabilityVerdict,
}

/// Restores `g(q, theta) = target` by Newton steps confined to the
/// orthogonal complement of `frozen` (the probe direction), so the probe
/// displacement itself is not undone. Coordinates are ordered
/// `[theta; q]` in `frozen`.
fn restore_constraint(
    chain: &ChainModel,
    cfg: &Configuration,
    target: &crate::pose::Pose,
    frozen: &DVector<f64>,
) -> Result<Configuration> {
    let task = chain.task();
    let (m, n) = (chain.m(), chain.n());
    let mut current = cfg.clone();
    let tol_kin = 1e-12 * chain.reach();
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let actual = chain.forward_pose(&current);
        let r = task.select(&pose_residual(target, &actual));
        if r.norm() <= tol_kin {
            return Ok(current);
        }
        if r.norm() > 1e3 * last.max(1e-9) {
            break;
        }
        last = r.norm();
        let (jt, jq) = chain.masked_jacobians(&current);
        let mut j = DMatrix::zeros(task.dim(), m + n);
        j.view_mut((0, 0), (task.dim(), m)).copy_from(&jt);
        j.view_mut((0, m), (task.dim(), n)).copy_from(&jq);
        // Project columns onto the complement of the probe direction.
        let jp = &j - (&j * frozen) * frozen.transpose();
        let svd = jp.svd(true, true);
        let smax = svd.singular_values.amax();
        if smax == 0.0 {
            break;
        }
        let step = svd
            .solve(&r, tol::SOLVE_TRUNCATION_REL * smax)
            .map_err(|e| Error::ConstraintRestoration(e.to_string()))?;
        let step = step.column(0).into_owned();
        let step = &step - frozen * frozen.dot(&step);
        for i in 0..m {
            current.theta[i] += step[i];
        }
        for i in 0..n {
            current.q[i] += step[m + i];
        }
    }
    Err(Error::ConstraintRestoration(format!(
        "pose residual stuck at {last:.3e}"
    )))
}

/// Samples `samples` random admissible directions of length `radius`,
/// restores the pose constraint exactly, and compares the measured
/// potential change against the quadratic-form prediction direction by
/// direction.
pub fn energy_probe(
    chain: &ChainModel,
    state: &EquilibriumState,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ProbeReport> {
    let eigen_verdict = classify(chain, state, tol::CRITICAL_BAND)?;
    let m_mat = stability_matrix(chain, state)?;
    let basis = nullspace_at(chain, &state.cfg);
    let r = basis.r();
    let (m, n) = (chain.m(), chain.n());
    if r == 0 {
        return Ok(ProbeReport {
            samples: 0,
            restored: 0,
            discarded: 0,
            ascending: 0,
            descending: 0,
            inconclusive: 0,
            agreement: 1.0,
            probe_verdict: Classification::Stable,
            eigen_verdict,
        });
    }
    let stacked = basis.stacked();
    let e_eq = chain.elastic_energy(&state.cfg);
    let f6 = state.wrench.as_vector();
    // Below this magnitude a probe's energy change drowns in third-order
    // terms and round-off; such probes are inconclusive, not evidence.
    let deadband = 100.0 * state.wrench.norm().max(1.0) * radius.powi(3)
        + 1e3 * f64::EPSILON * e_eq.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut restored = 0;
    let mut discarded = 0;
    let mut ascending = 0;
    let mut descending = 0;
    let mut inconclusive = 0;
    let mut consistent = 0;
    for _ in 0..samples {
        let mut w = DVector::zeros(r);
        loop {
            for i in 0..r {
                w[i] = rng.random_range(-1.0..1.0);
            }
            if w.norm() > 1e-3 {
                break;
            }
        }
        w /= w.norm();
        let dir = &stacked * &w; // unit length: the basis is orthonormal
        let mut probe_cfg = state.cfg.clone();
        for i in 0..m {
            probe_cfg.theta[i] += radius * dir[i];
        }
        for i in 0..n {
            probe_cfg.q[i] += radius * dir[m + i];
        }
        let restored_cfg = match restore_constraint(chain, &probe_cfg, &state.target, &dir) {
            Ok(c) => c,
            Err(_) => {
                discarded += 1;
                continue;
            }
        };
        restored += 1;
        // Potential change: elastic energy minus residual work by the
        // (masked) load over the leftover pose error.
        let leftover = pose_residual(&state.target, &chain.forward_pose(&restored_cfg));
        let measured = chain.elastic_energy(&restored_cfg) - e_eq + f6.dot(&leftover);
        let predicted = -0.5 * radius * radius * (w.transpose() * &m_mat * &w)[(0, 0)];
        if measured > deadband {
            ascending += 1;
        } else if measured < -deadband {
            descending += 1;
        } else {
            inconclusive += 1;
        }
        let same_sign = (measured > deadband && predicted > 0.0)
            || (measured < -deadband && predicted < 0.0)
            || (measured.abs() <= deadband && predicted.abs() <= deadband * 10.0)
            || measured.abs() <= deadband;
        if same_sign {
            consistent += 1;
        }
    }
    let agreement = if restored == 0 {
        1.0
    } else {
        consistent as f64 / restored as f64
    };
    let probe_verdict = if descending > 0 {
        Classification::Unstable
    } else {
        Classification::Stable
    };
    Ok(ProbeReport {
        samples,
        restored,
        discarded,
        ascending,
        descending,
        inconclusive,
        agreement,
        probe_verdict,
        eigen_verdict,
    })
}
