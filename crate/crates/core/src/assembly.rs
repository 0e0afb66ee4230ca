//! Parallel assemblies: several chains rigidly sharing one tool platform.
//!
//! Every chain's end-effector is welded to the common platform, so driving
//! the platform to a pose decomposes into independent per-chain solves;
//! the platform reaction is the sum of chain wrenches, and the Cartesian
//! stiffness is the sum of chain matrices expressed at the tool point.
//! Stability here is displacement-held stability: the platform pose is
//! prescribed, so chain variations decouple and the assembly verdict is
//! the worst chain verdict.

use crate::chain::{ChainModel, Configuration};
use crate::equilibrium::{solve_for_pose, EquilibriumState, SolverSettings};
use crate::error::{Error, Result};
use crate::pose::{pose_residual, Pose, Wrench};
use crate::stability::{classify, Classification, StabilityVerdict};
use crate::stiffness::{aggregate_parallel, kc_full, StiffnessResult};
use crate::tol;

/// A set of chains with a common tool frame.
#[derive(Debug, Clone)]
pub struct Assembly {
    chains: Vec<ChainModel>,
}

/// Joint solution of all chains at one platform pose.
#[derive(Debug, Clone)]
pub struct AssemblyState {
    /// Per-chain equilibria, in chain order.
    pub chain_states: Vec<EquilibriumState>,
    /// The platform pose that was solved for.
    pub target: Pose,
    /// Total platform wrench (sum over chains).
    pub wrench: Wrench,
    /// True when every chain converged.
    pub converged: bool,
    /// Total stored elastic energy.
    pub energy: f64,
}

impl Assembly {
    /// Builds an assembly, checking that all chains meet at one tool pose
    /// in their reference configurations.
    pub fn new(chains: Vec<ChainModel>) -> Result<Self> {
        let first = chains.first().ok_or_else(|| {
            Error::InvalidParameter("assembly needs at least one chain".into())
        })?;
        let reference = first.forward_pose(&first.reference_configuration());
        for chain in &chains {
            let pose = chain.forward_pose(&chain.reference_configuration());
            let gap = pose_residual(&reference, &pose).norm();
            if gap > 1e-9 * (1.0 + reference.position.norm()) {
                return Err(Error::FrameMismatch { gap });
            }
        }
        Ok(Self { chains })
    }

    pub fn chains(&self) -> &[ChainModel] {
        &self.chains
    }

    /// Common tool pose in the unloaded reference configuration.
    pub fn reference_pose(&self) -> Pose {
        self.chains[0].forward_pose(&self.chains[0].reference_configuration())
    }

    /// Per-chain solver settings with decorrelated random streams, so
    /// symmetric chains do not share restart noise.
    fn chain_settings(&self, settings: &SolverSettings, index: usize) -> SolverSettings {
        SolverSettings {
            rng_seed: settings
                .rng_seed
                .wrapping_add(1_000_003_u64.wrapping_mul(index as u64 + 1)),
            ..settings.clone()
        }
    }

    /// Drives the platform to `target`. `starts` supplies per-chain warm
    /// starts (defaults to each chain's reference configuration).
    pub fn solve_for_pose(
        &self,
        target: &Pose,
        starts: Option<&[Configuration]>,
        settings: &SolverSettings,
    ) -> AssemblyState {
        let mut chain_states = Vec::with_capacity(self.chains.len());
        for (i, chain) in self.chains.iter().enumerate() {
            let start = match starts {
                Some(s) => s[i].clone(),
                None => chain.reference_configuration(),
            };
            let s = solve_for_pose(chain, target, &start, &self.chain_settings(settings, i));
            chain_states.push(s);
        }
        let mut wrench = Wrench::zero();
        let mut energy = 0.0;
        let mut converged = true;
        for s in &chain_states {
            wrench = wrench.clone() + s.wrench.clone();
            energy += s.energy;
            converged &= s.converged;
        }
        AssemblyState {
            chain_states,
            target: target.clone(),
            wrench,
            converged,
            energy,
        }
    }

    /// Displacement-held stability: worst chain verdict, with the smallest
    /// eigenvalue across chains and the summed kernel dimension.
    pub fn classify(&self, state: &AssemblyState) -> Result<StabilityVerdict> {
        let mut worst = Classification::Stable;
        let mut min_eig = f64::INFINITY;
        let mut rank = 0;
        for (chain, s) in self.chains.iter().zip(&state.chain_states) {
            let v = classify(chain, s, tol::CRITICAL_BAND)?;
            min_eig = min_eig.min(v.min_eigenvalue);
            rank += v.basis_rank;
            worst = match (worst, v.classification) {
                (_, Classification::Unstable) | (Classification::Unstable, _) => {
                    Classification::Unstable
                }
                (_, Classification::Critical) | (Classification::Critical, _) => {
                    Classification::Critical
                }
                _ => Classification::Stable,
            };
        }
        Ok(StabilityVerdict {
            classification: worst,
            min_eigenvalue: min_eig,
            basis_rank: rank,
        })
    }

    /// Aggregated Cartesian stiffness at the state's platform pose.
    pub fn aggregate_stiffness(&self, state: &AssemblyState) -> Result<StiffnessResult> {
        let per_chain: Result<Vec<StiffnessResult>> = self
            .chains
            .iter()
            .zip(&state.chain_states)
            .map(|(chain, s)| kc_full(chain, s))
            .collect();
        aggregate_parallel(&per_chain?)
    }

    /// Load-driven solve through the aggregated stiffness: walk the
    /// platform pose by `K_C^{-1} (F - F_i)` until the total reaction
    /// matches `F`. Requires the aggregate to be nonsingular.
    pub fn solve_for_wrench(
        &self,
        wrench: &Wrench,
        settings: &SolverSettings,
    ) -> Result<AssemblyState> {
        let f_target = wrench.as_vector();
        let mut target = self.reference_pose();
        let mut state = self.solve_for_pose(&target, None, settings);
        if !state.converged {
            return Err(Error::NotConverged {
                best_residual: f64::INFINITY,
            });
        }
        let tol_f = settings.residual_tol * wrench.norm().max(1.0);
        for _ in 0..60 {
            let df = f_target - state.wrench.as_vector();
            if df.norm() <= tol_f {
                return Ok(state);
            }
            let agg = self.aggregate_stiffness(&state)?;
            if agg.rank < 6 {
                return Err(Error::SingularStiffness {
                    rank: agg.rank,
                    size: 6,
                });
            }
            let kc = agg.k_c;
            let dt = kc.lu().solve(&df).ok_or(Error::SingularStiffness {
                rank: agg.rank,
                size: 6,
            })?;
            let starts: Vec<Configuration> =
                state.chain_states.iter().map(|s| s.cfg.clone()).collect();
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..8 {
                let candidate = target.displaced(&(dt * scale));
                let s = self.solve_for_pose(&candidate, Some(&starts), settings);
                if s.converged {
                    let gap = (f_target - s.wrench.as_vector()).norm();
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
            best_residual: (f_target - state.wrench.as_vector()).norm(),
        })
    }
}
