//! Serial chain model: rigid transforms, joints, and springs in sequence.
//!
//! A chain is an ordered element list. Walking it left to right composes
//! the world pose of the end-effector. Joint coordinates split into two
//! vectors: `q` collects perfectly passive coordinates (no restoring
//! torque) and `theta` collects elastic coordinates (preloaded passive
//! joints and every coordinate of a virtual spring block). Locked actuated
//! joints contribute geometry but no coordinate.

use nalgebra::{DMatrix, DVector, Rotation3, Vector3, Vector6};

use crate::elasticity::{assemble_chain_springs, SpringBlock};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Elementary joint axis: rotation about or translation along a local axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointAxis {
    RotX,
    RotY,
    RotZ,
    TransX,
    TransY,
    TransZ,
}

impl JointAxis {
    pub fn is_rotation(self) -> bool {
        matches!(self, JointAxis::RotX | JointAxis::RotY | JointAxis::RotZ)
    }

    /// Unit direction of the axis in the local frame.
    pub fn direction(self) -> Vector3<f64> {
        match self {
            JointAxis::RotX | JointAxis::TransX => Vector3::x(),
            JointAxis::RotY | JointAxis::TransY => Vector3::y(),
            JointAxis::RotZ | JointAxis::TransZ => Vector3::z(),
        }
    }

    /// Rigid motion of this axis at coordinate `value`.
    pub fn motion(self, value: f64) -> Pose {
        let d = self.direction();
        if self.is_rotation() {
            Pose::new(Vector3::zeros(), Rotation3::new(d * value))
        } else {
            Pose::new(d * value, Rotation3::identity())
        }
    }
}

/// Joint behaviour at one chain position.
#[derive(Debug, Clone, PartialEq)]
pub enum JointKind {
    /// Drive held at a commanded coordinate; contributes no free coordinate.
    ActuatedLocked { axis: JointAxis, value: f64 },
    /// Ideal passive joint: a `q` coordinate with zero restoring torque.
    /// `reference` is its value in the chain's reference configuration.
    PassivePerfect { axis: JointAxis, reference: f64 },
    /// Passive joint restrained by a scalar spring: a `theta` coordinate
    /// with rate `stiffness` and rest value `rest`.
    PassivePreloaded {
        axis: JointAxis,
        stiffness: f64,
        rest: f64,
    },
    /// Multidimensional localized spring: one `theta` coordinate per axis,
    /// applied in order, restrained by the block stiffness.
    VirtualSpring {
        axes: Vec<JointAxis>,
        block: SpringBlock,
    },
}

/// One entry of a chain: fixed geometry or a joint.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    /// Rigid transform (link geometry).
    Fixed(Pose),
    Joint(JointKind),
}

impl Element {
    /// Fixed translation along world-of-this-element `x`.
    pub fn link_x(length: f64) -> Element {
        Element::Fixed(Pose::new(Vector3::new(length, 0.0, 0.0), Rotation3::identity()))
    }
}

/// Which end-effector pose components the chain constrains and loads.
///
/// Planar reductions restrict the task to in-plane components; the columns
/// of masked Jacobians and the components of applied wrenches then live in
/// this subspace. Components outside the mask are neither constrained by
/// pose targets nor loaded by wrenches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpace {
    mask: [bool; 6],
}

impl TaskSpace {
    /// All six pose components (spatial chains).
    pub fn full() -> Self {
        Self { mask: [true; 6] }
    }

    /// Planar task: `x`, `y`, and in-plane rotation `phi_z`.
    pub fn planar_xy() -> Self {
        Self {
            mask: [true, true, false, false, false, true],
        }
    }

    /// Planar point task: `x` and `y` only; the in-plane orientation is
    /// free and carries no moment.
    pub fn point_xy() -> Self {
        Self {
            mask: [true, true, false, false, false, false],
        }
    }

    /// Number of constrained components.
    pub fn dim(self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_full(self) -> bool {
        self.mask == [true; 6]
    }

    /// Indices (into 6-vectors) of the constrained components, ascending.
    pub fn components(self) -> impl Iterator<Item = usize> {
        self.mask
            .into_iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    /// Restricts a 6-vector to the constrained components.
    pub fn select(self, v: &Vector6<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.components().map(|i| v[i]))
    }

    /// Restricts the rows of a 6-row matrix to the constrained components.
    pub fn select_rows(self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let rows: Vec<usize> = self.components().collect();
        DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
    }

    /// Expands a masked vector back to six components, zero elsewhere.
    pub fn embed(self, v: &DVector<f64>) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        for (row, i) in self.components().enumerate() {
            out[i] = v[row];
        }
        out
    }

    /// Expands a masked `k x k` matrix to `6 x 6`, zero elsewhere.
    pub fn embed_matrix(self, m: &DMatrix<f64>) -> nalgebra::Matrix6<f64> {
        let mut out = nalgebra::Matrix6::zeros();
        let idx: Vec<usize> = self.components().collect();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(i, j)] = m[(a, b)];
            }
        }
        out
    }
}

/// Joint coordinates of a chain: passive `q` and elastic `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub q: DVector<f64>,
    pub theta: DVector<f64>,
}

impl Configuration {
    pub fn new(q: DVector<f64>, theta: DVector<f64>) -> Self {
        Self { q, theta }
    }

    /// Total coordinate count `n + m`.
    pub fn len(&self) -> usize {
        self.q.len() + self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy with one coordinate shifted; indices run over `q` then `theta`.
    pub fn perturbed(&self, index: usize, delta: f64) -> Configuration {
        let mut out = self.clone();
        if index < self.q.len() {
            out.q[index] += delta;
        } else {
            out.theta[index - self.q.len()] += delta;
        }
        out
    }
}

/// Geometric Hessians of the load potential `Psi = g(q, theta)^T F` with
/// respect to the joint coordinates, at fixed applied wrench.
///
/// The mixed block is stored once; its transpose is [`HessianSet::h_thetaq`].
#[derive(Debug, Clone)]
pub struct HessianSet {
    /// `n x n` block over passive coordinates.
    pub h_qq: DMatrix<f64>,
    /// `n x m` mixed block (row: passive, column: elastic).
    pub h_qtheta: DMatrix<f64>,
    /// `m x m` block over elastic coordinates.
    pub h_thetatheta: DMatrix<f64>,
}

impl HessianSet {
    /// `m x n` mixed block in the other order.
    pub fn h_thetaq(&self) -> DMatrix<f64> {
        self.h_qtheta.transpose()
    }
}

/// A serial chain with its assembled spring data and task space.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    elements: Vec<Element>,
    task: TaskSpace,
    n: usize,
    m: usize,
    k_theta: DMatrix<f64>,
    theta0: DVector<f64>,
    q_reference: DVector<f64>,
    reach: f64,
}

impl ChainModel {
    /// Builds a spatial chain (full task space).
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        Self::with_task(elements, TaskSpace::full())
    }

    /// Builds a chain with an explicit task space.
    pub fn with_task(elements: Vec<Element>, task: TaskSpace) -> Result<Self> {
        let mut n = 0;
        let mut blocks: Vec<SpringBlock> = Vec::new();
        let mut q_reference = Vec::new();
        let mut reach = 0.0;
        for (index, element) in elements.iter().enumerate() {
            match element {
                Element::Fixed(pose) => {
                    reach += pose.position.norm();
                }
                Element::Joint(kind) => match kind {
                    JointKind::ActuatedLocked { axis, value } => {
                        if !value.is_finite() {
                            return Err(Error::InvalidElement {
                                index,
                                reason: "actuated joint value must be finite".into(),
                            });
                        }
                        if !axis.is_rotation() {
                            reach += value.abs();
                        }
                    }
                    JointKind::PassivePerfect { reference, .. } => {
                        if !reference.is_finite() {
                            return Err(Error::InvalidElement {
                                index,
                                reason: "passive joint reference must be finite".into(),
                            });
                        }
                        n += 1;
                        q_reference.push(*reference);
                    }
                    JointKind::PassivePreloaded {
                        stiffness, rest, ..
                    } => {
                        let block = SpringBlock::scalar_preloaded(*stiffness, *rest)
                            .map_err(|e| Error::InvalidElement {
                                index,
                                reason: e.to_string(),
                            })?;
                        blocks.push(block);
                    }
                    JointKind::VirtualSpring { axes, block } => {
                        if axes.len() != block.dim() {
                            return Err(Error::InvalidElement {
                                index,
                                reason: format!(
                                    "spring lists {} axes but its block has {} coordinates",
                                    axes.len(),
                                    block.dim()
                                ),
                            });
                        }
                        for (i, a) in axes.iter().enumerate() {
                            if axes[..i].contains(a) {
                                return Err(Error::InvalidElement {
                                    index,
                                    reason: format!("duplicate axis {a:?} within one spring block"),
                                });
                            }
                        }
                        blocks.push(block.clone());
                    }
                },
            }
        }
        let block_refs: Vec<&SpringBlock> = blocks.iter().collect();
        let (k_theta, theta0) = assemble_chain_springs(&block_refs);
        let m = k_theta.nrows();
        if n + m == 0 {
            return Err(Error::InvalidParameter(
                "chain has no joint coordinates".into(),
            ));
        }
        Ok(Self {
            elements,
            task,
            n,
            m,
            k_theta,
            theta0,
            q_reference: DVector::from_vec(q_reference),
            reach: reach.max(1.0),
        })
    }

    /// Number of passive coordinates.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of elastic coordinates.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn task(&self) -> TaskSpace {
        self.task
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Assembled block-diagonal spring stiffness, `m x m`.
    pub fn k_theta(&self) -> &DMatrix<f64> {
        &self.k_theta
    }

    /// Rest values of the elastic coordinates.
    pub fn theta0(&self) -> &DVector<f64> {
        &self.theta0
    }

    /// Characteristic length of the chain (at least one), used to weight
    /// pose residuals.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// Configuration with passive joints at their reference values and
    /// springs at rest. The chain is in unloaded equilibrium here.
    pub fn reference_configuration(&self) -> Configuration {
        Configuration::new(self.q_reference.clone(), self.theta0.clone())
    }

    /// Elastic energy stored in the springs at `cfg`.
    pub fn elastic_energy(&self, cfg: &Configuration) -> f64 {
        let d = &cfg.theta - &self.theta0;
        0.5 * (&self.k_theta * &d).dot(&d)
    }

    fn check_cfg(&self, cfg: &Configuration) {
        assert_eq!(cfg.q.len(), self.n, "configuration q length");
        assert_eq!(cfg.theta.len(), self.m, "configuration theta length");
    }

    /// World pose of the end-effector at `cfg`.
    pub fn forward_pose(&self, cfg: &Configuration) -> Pose {
        self.check_cfg(cfg);
        let mut pose = Pose::identity();
        let mut iq = 0;
        let mut it = 0;
        for element in &self.elements {
            match element {
                Element::Fixed(t) => pose = pose.compose(t),
                Element::Joint(kind) => match kind {
                    JointKind::ActuatedLocked { axis, value } => {
                        pose = pose.compose(&axis.motion(*value));
                    }
                    JointKind::PassivePerfect { axis, .. } => {
                        pose = pose.compose(&axis.motion(cfg.q[iq]));
                        iq += 1;
                    }
                    JointKind::PassivePreloaded { axis, .. } => {
                        pose = pose.compose(&axis.motion(cfg.theta[it]));
                        it += 1;
                    }
                    JointKind::VirtualSpring { axes, .. } => {
                        for axis in axes {
                            pose = pose.compose(&axis.motion(cfg.theta[it]));
                            it += 1;
                        }
                    }
                },
            }
        }
        pose
    }

    /// Geometric Jacobians `(J_theta, J_q)` at `cfg`, sized `6 x m` and
    /// `6 x n`.
    ///
    /// Column `j` is the world twist of unit motion of coordinate `j`:
    /// translational velocity of the end-effector point over angular
    /// velocity. For a revolute coordinate with world axis `w` at point
    /// `p`, the column is `[w x (p_ee - p); w]`; for a prismatic one it is
    /// `[w; 0]`.
    pub fn jacobians(&self, cfg: &Configuration) -> (DMatrix<f64>, DMatrix<f64>) {
        self.check_cfg(cfg);
        // One walk records each coordinate's world axis and origin.
        struct Record {
            elastic: bool,
            index: usize,
            rotation: bool,
            world_dir: Vector3<f64>,
            world_point: Vector3<f64>,
        }
        let mut records: Vec<Record> = Vec::with_capacity(self.n + self.m);
        let mut pose = Pose::identity();
        let mut iq = 0;
        let mut it = 0;
        let record = |pose: &Pose, axis: JointAxis, elastic: bool, index: usize| Record {
            elastic,
            index,
            rotation: axis.is_rotation(),
            world_dir: pose.rotation * axis.direction(),
            world_point: pose.position,
        };
        for element in &self.elements {
            match element {
                Element::Fixed(t) => pose = pose.compose(t),
                Element::Joint(kind) => match kind {
                    JointKind::ActuatedLocked { axis, value } => {
                        pose = pose.compose(&axis.motion(*value));
                    }
                    JointKind::PassivePerfect { axis, .. } => {
                        records.push(record(&pose, *axis, false, iq));
                        pose = pose.compose(&axis.motion(cfg.q[iq]));
                        iq += 1;
                    }
                    JointKind::PassivePreloaded { axis, .. } => {
                        records.push(record(&pose, *axis, true, it));
                        pose = pose.compose(&axis.motion(cfg.theta[it]));
                        it += 1;
                    }
                    JointKind::VirtualSpring { axes, .. } => {
                        for axis in axes {
                            records.push(record(&pose, *axis, true, it));
                            pose = pose.compose(&axis.motion(cfg.theta[it]));
                            it += 1;
                        }
                    }
                },
            }
        }
        let p_ee = pose.position;
        let mut j_theta = DMatrix::zeros(6, self.m);
        let mut j_q = DMatrix::zeros(6, self.n);
        for r in records {
            let (v, w) = if r.rotation {
                (r.world_dir.cross(&(p_ee - r.world_point)), r.world_dir)
            } else {
                (r.world_dir, Vector3::zeros())
            };
            let col = Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z);
            if r.elastic {
                j_theta.set_column(r.index, &col);
            } else {
                j_q.set_column(r.index, &col);
            }
        }
        (j_theta, j_q)
    }

    /// Jacobians restricted to the chain's task components.
    pub fn masked_jacobians(&self, cfg: &Configuration) -> (DMatrix<f64>, DMatrix<f64>) {
        let (jt, jq) = self.jacobians(cfg);
        (self.task.select_rows(&jt), self.task.select_rows(&jq))
    }

    /// Generalized torques `(J_q^T F, J_theta^T F)` of a dead wrench.
    pub fn joint_torques(
        &self,
        cfg: &Configuration,
        wrench: &Vector6<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let (jt, jq) = self.jacobians(cfg);
        (jq.transpose() * wrench, jt.transpose() * wrench)
    }

    /// Second derivatives of the load potential under the dead wrench
    /// `F`, by central differences of the torque maps with step
    /// [`crate::tol::FD_STEP`], symmetrised.
    pub fn torque_hessians(&self, cfg: &Configuration, wrench: &Vector6<f64>) -> HessianSet {
        self.check_cfg(cfg);
        let total = self.n + self.m;
        let h = crate::tol::FD_STEP;
        let mut full = DMatrix::zeros(total, total);
        for j in 0..total {
            let (tq_p, tt_p) = self.joint_torques(&cfg.perturbed(j, h), wrench);
            let (tq_m, tt_m) = self.joint_torques(&cfg.perturbed(j, -h), wrench);
            for i in 0..self.n {
                full[(i, j)] = (tq_p[i] - tq_m[i]) / (2.0 * h);
            }
            for i in 0..self.m {
                full[(self.n + i, j)] = (tt_p[i] - tt_m[i]) / (2.0 * h);
            }
        }
        // Exact symmetry can be lost to round-off (and to non-conservative
        // moment loads); the symmetric part is the usable quadratic form.
        let sym = (&full + full.transpose()) * 0.5;
        HessianSet {
            h_qq: sym.view((0, 0), (self.n, self.n)).into_owned(),
            h_qtheta: sym.view((0, self.n), (self.n, self.m)).into_owned(),
            h_thetatheta: sym
                .view((self.n, self.n), (self.m, self.m))
                .into_owned(),
        }
    }
}
