//! Benchmark chains and assemblies.
//!
//! Three columns of increasing fidelity, each three unit links long and
//! posed in one of three postures (`S` straight, `Pi` trapezoid, `Z`
//! zigzag) with the base hinge pre-rotated so the tip starts on the `x`
//! axis:
//!
//! * **Model A** — planar, rigid links, two elastic actuator hinges, one
//!   passive base hinge; the tip is a point task. Has a closed-form
//!   force–deflection law ([`model_a_analytic`]) to test everything else
//!   against.
//! * **Model B** — planar flexible links (3-dof tip springs), passive
//!   hinges at both ends, planar task.
//! * **Model C** — spatial flexible links (6-dof tip springs), universal
//!   base and spherical tip passive joints, full task.
//!
//! Plus an Orthoglide-inspired assembly: three identical chains on
//! mutually orthogonal linear drives, each with an elastic foot, a slender
//! bar suspended between passive swing hinges, and a shared tool platform
//! ([`build_orthoglide_like`]).
//!
//! All builders use a normalized reference beam section whose in-plane
//! bending coefficient `E Iz / L` is exactly 1, so forces read in units of
//! bending stiffness per link length.

use nalgebra::{Rotation3, Vector3, Vector6};

use crate::assembly::Assembly;
use crate::chain::{ChainModel, Element, JointAxis, JointKind, TaskSpace};
use crate::elasticity::{BeamSection, SpringBlock};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Which benchmark model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    A,
    B,
    C,
    OrthoglideLike,
}

/// Benchmark posture: actuated coordinates of the two elbow drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchConfiguration {
    /// Straight: both elbows at 0.
    S,
    /// Trapezoid: both elbows at -30 degrees.
    Pi,
    /// Zigzag: +30 and -30 degrees.
    Z,
}

impl BenchConfiguration {
    /// Elbow drive angles in radians.
    pub fn actuated_values(self) -> (f64, f64) {
        let deg30 = 30.0_f64.to_radians();
        match self {
            BenchConfiguration::S => (0.0, 0.0),
            BenchConfiguration::Pi => (-deg30, -deg30),
            BenchConfiguration::Z => (deg30, -deg30),
        }
    }

    /// Base hinge angle that puts the tip of three unit links back on the
    /// `x` axis: the argument of `1 + e^{i qa1} + e^{i (qa1+qa2)}` negated.
    pub fn base_angle(self) -> f64 {
        let (qa1, qa2) = self.actuated_values();
        let re = 1.0 + qa1.cos() + (qa1 + qa2).cos();
        let im = qa1.sin() + (qa1 + qa2).sin();
        -im.atan2(re)
    }

    /// Tip `x` coordinate (per unit link length) in the reference posture.
    pub fn tip_x(self) -> f64 {
        let (qa1, qa2) = self.actuated_values();
        let re = 1.0 + qa1.cos() + (qa1 + qa2).cos();
        let im = qa1.sin() + (qa1 + qa2).sin();
        re.hypot(im)
    }
}

/// Workspace point of the assembly scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkspacePoint {
    /// Symmetric point on the (1,1,1) diagonal.
    Q0,
    Q1,
    Q2,
    Q3,
    Q4,
}

impl WorkspacePoint {
    /// Tool-point coordinates. `Q0` sits on the cube diagonal where the
    /// three chains are related by cyclic axis permutation; `Q1..Q4` are
    /// vertices of a cube of side 0.2 centred on `Q0` (placement is a
    /// documented choice; only qualitative behaviour is asserted there).
    pub fn coordinates(self) -> Vector3<f64> {
        let q0 = Vector3::new(0.25, 0.25, 0.25);
        let h = 0.1;
        match self {
            WorkspacePoint::Q0 => q0,
            WorkspacePoint::Q1 => q0 + Vector3::new(h, h, h),
            WorkspacePoint::Q2 => q0 + Vector3::new(-h, -h, -h),
            WorkspacePoint::Q3 => q0 + Vector3::new(h, h, -h),
            WorkspacePoint::Q4 => q0 + Vector3::new(h, -h, -h),
        }
    }
}

/// Scenario request: model, posture or workspace point, and scales.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub model: ModelKind,
    pub configuration: BenchConfiguration,
    pub workspace_point: WorkspacePoint,
    /// Link length.
    pub l: f64,
    /// Reference bending coefficient (hinge spring rate for Model A).
    pub k_theta_ref: f64,
    /// Beam section for the flexible-link models.
    pub section: BeamSection,
}

impl ScenarioSpec {
    pub fn new(model: ModelKind, configuration: BenchConfiguration) -> Self {
        Self {
            model,
            configuration,
            workspace_point: WorkspacePoint::Q0,
            l: 1.0,
            k_theta_ref: 1.0,
            section: reference_section(),
        }
    }

    pub fn orthoglide(point: WorkspacePoint) -> Self {
        Self {
            model: ModelKind::OrthoglideLike,
            configuration: BenchConfiguration::S,
            workspace_point: point,
            l: 1.0,
            k_theta_ref: 1.0,
            section: reference_section(),
        }
    }
}

/// Normalized thin rectangular section: unit length, width 0.05, thickness
/// 0.02, modulus chosen so the in-plane bending coefficient `E Iz / L` is
/// exactly 1, shear modulus 0.385 of the modulus.
pub fn reference_section() -> BeamSection {
    let (a, b): (f64, f64) = (0.02, 0.05);
    let youngs = 12.0 / (a * b.powi(3));
    BeamSection {
        length: 1.0,
        a,
        b,
        youngs,
        shear: 0.385 * youngs,
    }
}

fn spring1_rotz(k: f64) -> Result<JointKind> {
    Ok(JointKind::VirtualSpring {
        axes: vec![JointAxis::RotZ],
        block: SpringBlock::scalar(k)?,
    })
}

/// Planar 3-dof benchmark link: bending lumped into the rotational rate.
/// The decoupled block keeps the three-link column's buckling threshold
/// at the bending coefficient over the link length, as the benchmark
/// postures require; the coupled cantilever block would overshoot it at
/// this coarse one-spring-per-link discretization.
fn link3_planar(section: &BeamSection) -> Result<JointKind> {
    Ok(JointKind::VirtualSpring {
        axes: vec![JointAxis::TransX, JointAxis::TransY, JointAxis::RotZ],
        block: SpringBlock::rigid_link_planar(section)?,
    })
}

fn all_axes() -> Vec<JointAxis> {
    vec![
        JointAxis::TransX,
        JointAxis::TransY,
        JointAxis::TransZ,
        JointAxis::RotX,
        JointAxis::RotY,
        JointAxis::RotZ,
    ]
}

/// Spatial 6-dof benchmark link; see [`link3_planar`] for the lumping.
fn link6_spatial(section: &BeamSection) -> Result<JointKind> {
    Ok(JointKind::VirtualSpring {
        axes: all_axes(),
        block: SpringBlock::rigid_link_spatial(section)?,
    })
}

/// Coupled cantilever 6-dof spring (assembly foot and couplings).
fn spring6_beam(section: &BeamSection) -> Result<JointKind> {
    Ok(JointKind::VirtualSpring {
        axes: all_axes(),
        block: SpringBlock::beam_spatial(section)?,
    })
}

/// Builds Model A, B, or C at the requested posture.
pub fn build_chain(spec: &ScenarioSpec) -> Result<ChainModel> {
    let (qa1, qa2) = spec.configuration.actuated_values();
    let q0 = spec.configuration.base_angle();
    let l = spec.l;
    if !(l > 0.0) {
        return Err(Error::InvalidParameter("link length must be positive".into()));
    }
    let mut section = spec.section.clone();
    section.length = l;
    match spec.model {
        ModelKind::A => {
            let k = spec.k_theta_ref;
            let elements = vec![
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotZ,
                    reference: q0,
                }),
                Element::link_x(l),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: qa1,
                }),
                Element::Joint(spring1_rotz(k)?),
                Element::link_x(l),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: qa2,
                }),
                Element::Joint(spring1_rotz(k)?),
                Element::link_x(l),
            ];
            ChainModel::with_task(elements, TaskSpace::point_xy())
        }
        ModelKind::B => {
            let elements = vec![
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotZ,
                    reference: q0,
                }),
                Element::link_x(l),
                Element::Joint(link3_planar(&section)?),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: qa1,
                }),
                Element::link_x(l),
                Element::Joint(link3_planar(&section)?),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: qa2,
                }),
                Element::link_x(l),
                Element::Joint(link3_planar(&section)?),
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotZ,
                    reference: -(q0 + qa1 + qa2),
                }),
            ];
            ChainModel::with_task(elements, TaskSpace::planar_xy())
        }
        ModelKind::C => {
            let elements = vec![
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotY,
                    reference: 0.0,
                }),
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotZ,
                    reference: q0,
                }),
                Element::link_x(l),
                Element::Joint(link6_spatial(&section)?),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: qa1,
                }),
                Element::link_x(l),
                Element::Joint(link6_spatial(&section)?),
                Element::Joint(JointKind::ActuatedLocked {
                    axis: JointAxis::RotZ,
                    value: qa2,
                }),
                Element::link_x(l),
                Element::Joint(link6_spatial(&section)?),
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotX,
                    reference: 0.0,
                }),
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotY,
                    reference: 0.0,
                }),
                Element::Joint(JointKind::PassivePerfect {
                    axis: JointAxis::RotZ,
                    reference: -(q0 + qa1 + qa2),
                }),
            ];
            ChainModel::new(elements)
        }
        ModelKind::OrthoglideLike => Err(Error::InvalidParameter(
            "use build_orthoglide_like for the assembly scenario".into(),
        )),
    }
}

/// Which branch of the closed-form Model A law to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Stable,
    Unstable,
}

/// Closed-form axial force of Model A at normalized tip shortening
/// `delta` (in link lengths), in units of hinge rate per link length.
///
/// The stable branch is the symmetric fold (base hinge and both elastic
/// hinges share one magnitude); the unstable branch is the straight-ish
/// saddle family connecting it to the straight shape.
pub fn model_a_analytic(delta: f64, branch: Branch) -> Result<f64> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "deflection {delta} outside the open interval (0, 2)"
        )));
    }
    match branch {
        Branch::Stable => {
            let phi = (1.0 - delta / 2.0).acos();
            Ok(phi / phi.sin())
        }
        Branch::Unstable => {
            let cq = (12.0 - 6.0 * delta + delta * delta) / (12.0 - 4.0 * delta);
            let ct = 1.0 - 1.5 * delta + 0.25 * delta * delta;
            if !(-1.0..=1.0).contains(&cq) || !(-1.0..=1.0).contains(&ct) {
                return Err(Error::InvalidParameter(format!(
                    "deflection {delta} outside the unstable-branch domain"
                )));
            }
            let q = cq.acos();
            let theta = -ct.acos();
            Ok(theta * ((q + theta).cos() + 2.0 * q.cos()) / theta.sin())
        }
    }
}

/// Geometry and rates of the assembly scenario, fixed here so tests and
/// the CLI agree on one structure.
struct OrthoglideGeometry {
    foot: f64,
    bar: f64,
    k_act: f64,
}

impl OrthoglideGeometry {
    fn nominal() -> Self {
        Self {
            foot: 0.6,
            bar: 1.0,
            k_act: 1000.0,
        }
    }
}

/// Short stocky square section for the hinge couplings.
fn stocky_section(length: f64) -> BeamSection {
    let base = reference_section();
    BeamSection {
        length,
        a: 0.05,
        b: 0.05,
        youngs: base.youngs,
        shear: base.shear,
    }
}

/// One drive chain of the assembly, in a local frame whose drive runs
/// along `x` and whose swing hinges rotate about `y`.
///
/// Structure: locked prismatic drive with a 1-dof spring, an elastic foot
/// bracket, then a slender bar suspended between two perfect swing hinges
/// (the platform stays level through the symmetric hinge pair), joined by
/// short stiff couplings. The foot bracket and the bar are the two
/// compliant members; the bracket's lateral bending, released through the
/// free swing pair, is what gives the leg a finite critical compression.
fn orthoglide_chain(local_target: Vector3<f64>, frame: Rotation3<f64>) -> Result<ChainModel> {
    let g = OrthoglideGeometry::nominal();
    let swing = {
        let s = -local_target.z / g.bar;
        if s.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "workspace point out of reach: swing sine {s}"
            )));
        }
        s.asin()
    };
    let drive = local_target.x - g.foot - g.bar * swing.cos();
    let lateral = local_target.y;
    let foot_section = BeamSection {
        length: g.foot,
        ..reference_section()
    };
    let bar_section = BeamSection {
        length: g.bar,
        ..reference_section()
    };
    let bar_block = SpringBlock::beam_spatial(&bar_section)?.removing_coordinate(4)?;
    let elements = vec![
        Element::Fixed(Pose::new(Vector3::zeros(), frame)),
        Element::Fixed(Pose::new(
            Vector3::new(0.0, lateral, 0.0),
            Rotation3::identity(),
        )),
        Element::Joint(JointKind::ActuatedLocked {
            axis: JointAxis::TransX,
            value: drive,
        }),
        Element::Joint(JointKind::VirtualSpring {
            axes: vec![JointAxis::TransX],
            block: SpringBlock::scalar(g.k_act)?,
        }),
        Element::link_x(g.foot),
        Element::Joint(spring6_beam(&foot_section)?),
        Element::Joint(JointKind::PassivePerfect {
            axis: JointAxis::RotY,
            reference: swing,
        }),
        Element::Joint(spring6_beam(&stocky_section(0.05))?),
        Element::link_x(g.bar),
        Element::Joint(JointKind::VirtualSpring {
            axes: vec![
                JointAxis::TransX,
                JointAxis::TransY,
                JointAxis::TransZ,
                JointAxis::RotX,
                JointAxis::RotZ,
            ],
            block: bar_block,
        }),
        Element::Joint(spring6_beam(&stocky_section(0.05))?),
        Element::Joint(JointKind::PassivePerfect {
            axis: JointAxis::RotY,
            reference: -swing,
        }),
        Element::Fixed(Pose::new(Vector3::zeros(), frame.inverse())),
    ];
    ChainModel::new(elements)
}

/// Builds the three-chain assembly at a workspace point. Chain `i` is the
/// local chain conjugated by the `i`-th cyclic axis permutation, so the
/// drives run along `x`, `y`, and `z`. Each chain is also rolled 45°
/// about its own drive axis, which puts all three swing planes
/// perpendicular to the cube diagonal: at the workspace centre the bars
/// run parallel to their drives and a diagonal platform shift leaves the
/// swing angles untouched.
pub fn build_orthoglide_like(spec: &ScenarioSpec) -> Result<Assembly> {
    let q = spec.workspace_point.coordinates();
    let cycle = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
        0.0, 0.0, 1.0, //
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0,
    ));
    let roll = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_4);
    let mut chains = Vec::with_capacity(3);
    let mut frame = roll;
    for _ in 0..3 {
        let local_target = frame.inverse() * q;
        chains.push(orthoglide_chain(local_target, frame)?);
        frame = cycle * frame;
    }
    Assembly::new(chains)
}

/// A named, ready-to-run scenario for the command-line tools.
pub struct Scenario {
    pub name: &'static str,
    pub built: Built,
    /// Force normalization (bending coefficient over link length).
    pub force_unit: f64,
    /// Compression direction used when no ray is given.
    pub default_ray: Vector6<f64>,
    /// Trace window that brackets the scenario's interesting behaviour.
    pub suggested_delta_max: f64,
    pub suggested_steps: usize,
}

/// What a scenario builds.
#[derive(Debug, Clone)]
pub enum Built {
    Chain(ChainModel),
    Assembly(Assembly),
}

/// All scenario names, in presentation order.
pub fn scenario_names() -> &'static [&'static str] {
    &[
        "modelA-S",
        "modelA-Pi",
        "modelA-Z",
        "modelB-S",
        "modelB-Pi",
        "modelB-Z",
        "modelC-S",
        "modelC-Pi",
        "modelC-Z",
        "orthoglide-Q0",
        "orthoglide-Q1",
        "orthoglide-Q2",
        "orthoglide-Q3",
        "orthoglide-Q4",
    ]
}

/// Builds a scenario by name; `None` for unknown names.
pub fn by_name(name: &str) -> Option<Result<Scenario>> {
    let axis_ray = |x: f64, y: f64, z: f64| Vector6::new(x, y, z, 0.0, 0.0, 0.0);
    let (model, rest) = match name.split_once('-') {
        Some((m, r)) => (m, r),
        None => return None,
    };
    let configuration = match rest {
        "S" => Some(BenchConfiguration::S),
        "Pi" => Some(BenchConfiguration::Pi),
        "Z" => Some(BenchConfiguration::Z),
        _ => None,
    };
    let point = match rest {
        "Q0" => Some(WorkspacePoint::Q0),
        "Q1" => Some(WorkspacePoint::Q1),
        "Q2" => Some(WorkspacePoint::Q2),
        "Q3" => Some(WorkspacePoint::Q3),
        "Q4" => Some(WorkspacePoint::Q4),
        _ => None,
    };
    let interned = scenario_names().iter().find(|&&n| n == name)?;
    let build = || -> Result<Scenario> {
        match model {
            "modelA" => {
                let spec = ScenarioSpec::new(ModelKind::A, configuration.unwrap());
                Ok(Scenario {
                    name: interned,
                    built: Built::Chain(build_chain(&spec)?),
                    force_unit: spec.k_theta_ref / spec.l,
                    default_ray: axis_ray(-1.0, 0.0, 0.0),
                    suggested_delta_max: 1.0,
                    suggested_steps: 50,
                })
            }
            "modelB" => {
                let spec = ScenarioSpec::new(ModelKind::B, configuration.unwrap());
                // The straight column buckles almost immediately; the
                // zigzag carries substantial deflection first.
                let (delta_max, steps) = match configuration.unwrap() {
                    BenchConfiguration::S => (2e-3, 50),
                    BenchConfiguration::Pi => (0.2, 50),
                    BenchConfiguration::Z => (0.2, 100),
                };
                Ok(Scenario {
                    name: interned,
                    built: Built::Chain(build_chain(&spec)?),
                    force_unit: spec.k_theta_ref / spec.l,
                    default_ray: axis_ray(-1.0, 0.0, 0.0),
                    suggested_delta_max: delta_max,
                    suggested_steps: steps,
                })
            }
            "modelC" => {
                let spec = ScenarioSpec::new(ModelKind::C, configuration.unwrap());
                let (delta_max, steps) = match configuration.unwrap() {
                    BenchConfiguration::S => (5e-4, 50),
                    BenchConfiguration::Pi => (0.3, 100),
                    BenchConfiguration::Z => (0.05, 100),
                };
                Ok(Scenario {
                    name: interned,
                    built: Built::Chain(build_chain(&spec)?),
                    force_unit: spec.k_theta_ref / spec.l,
                    default_ray: axis_ray(-1.0, 0.0, 0.0),
                    suggested_delta_max: delta_max,
                    suggested_steps: steps,
                })
            }
            "orthoglide" => {
                let spec = ScenarioSpec::orthoglide(point.unwrap());
                let s = 1.0 / 3.0_f64.sqrt();
                Ok(Scenario {
                    name: interned,
                    built: Built::Assembly(build_orthoglide_like(&spec)?),
                    force_unit: spec.k_theta_ref / spec.l,
                    default_ray: axis_ray(-s, -s, -s),
                    suggested_delta_max: 0.012,
                    suggested_steps: 60,
                })
            }
            _ => unreachable!("interned name"),
        }
    };
    Some(build())
}
