//! Structured-text model descriptions: parsing, validation, and export.
//!
//! A document describes either one chain or a parallel assembly of
//! chains. Chains are element lists; each element is exactly one of a
//! rigid transform, a joint, or a localized spring:
//!
//! ```toml
//! [chain]
//! task = "planar-xy"            # optional; "full" when omitted
//!
//! [[chain.elements]]
//! transform = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0]
//!
//! [[chain.elements]]
//! joint = { kind = "actuated", axis = "rz", value = 0.3 }
//!
//! [[chain.elements]]
//! spring = { dof = 1, axes = ["rz"], K = [2.0] }
//! ```
//!
//! A `transform` is twelve numbers: the nine rotation entries in
//! row-major order followed by the translation vector. Joint kinds are
//! `actuated` (drive locked at `value`), `passive` (ideal free
//! coordinate with reference `value`), and `preloaded` (spring-restrained
//! coordinate with rate `k` and rest offset `theta0`). A spring carries
//! one of an explicit stiffness `K` (`dof`×`dof`, row-major), an explicit
//! `compliance` (inverted on load), or rectangular-section beam
//! parameters `beam = { L, a, b, E, G }` expanded to the matching 3- or
//! 6-dof cantilever block; an explicit matrix wins over `beam` when both
//! appear, so identified data can override a nominal section. `axes`
//! defaults to the first `dof` of `tx, ty, tz, rx, ry, rz`, and an
//! optional `theta0` list gives the spring coordinates a nonzero rest.
//!
//! An assembly lists chains plus optional per-chain `tool_frames`
//! transforms appended at each tip:
//!
//! ```toml
//! [assembly]
//! tool_frames = [[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.1]]
//! [[assembly.chains]]
//! # ... elements as above ...
//! ```
//!
//! Exporting a model and parsing the result reproduces it exactly:
//! numbers are printed with full round-trip precision.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use stiffbuck_core::elasticity::SpringBlock;
use stiffbuck_core::scenarios::Built;
use stiffbuck_core::{Assembly, ChainModel, Element, JointAxis, JointKind, Pose, TaskSpace};

use crate::error::CliError;

/// Orthonormality slack accepted for rotation blocks.
const ROTATION_TOL: f64 = 1e-9;
/// Relative asymmetry accepted for spring matrices.
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    chain: Option<ChainDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    assembly: Option<AssemblyDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    task: Option<String>,
    elements: Vec<ElementDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssemblyDoc {
    chains: Vec<ChainDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tool_frames: Option<Vec<Vec<f64>>>,
}

/// One chain entry; exactly one of the three fields must be present.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    transform: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint: Option<JointDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spring: Option<SpringDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    kind: String,
    axis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpringDoc {
    dof: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    axes: Option<Vec<String>>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    k: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compliance: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam: Option<BeamDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamDoc {
    #[serde(rename = "L")]
    length: f64,
    a: f64,
    b: f64,
    #[serde(rename = "E")]
    youngs: f64,
    #[serde(rename = "G")]
    shear: f64,
}

const AXIS_NAMES: [(&str, JointAxis); 6] = [
    ("tx", JointAxis::TransX),
    ("ty", JointAxis::TransY),
    ("tz", JointAxis::TransZ),
    ("rx", JointAxis::RotX),
    ("ry", JointAxis::RotY),
    ("rz", JointAxis::RotZ),
];

fn parse_axis(name: &str) -> Option<JointAxis> {
    AXIS_NAMES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|&(_, axis)| axis)
}

fn axis_name(axis: JointAxis) -> &'static str {
    AXIS_NAMES
        .iter()
        .find(|&&(_, a)| a == axis)
        .map(|&(n, _)| n)
        .expect("every joint axis has a name")
}

fn bad(context: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{context}: {reason}"))
}

/// Parses and validates a document, producing a ready-to-analyze model.
pub fn parse_document(text: &str) -> Result<Built, CliError> {
    let doc: ConfigDoc =
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
    match (doc.chain, doc.assembly) {
        (Some(chain), None) => Ok(Built::Chain(build_chain(&chain, "chain")?)),
        (None, Some(assembly)) => Ok(Built::Assembly(build_assembly(&assembly)?)),
        (Some(_), Some(_)) => Err(CliError::Config(
            "config must contain either [chain] or [assembly], not both".into(),
        )),
        (None, None) => Err(CliError::Config(
            "config must contain a [chain] or [assembly] table".into(),
        )),
    }
}

fn build_assembly(doc: &AssemblyDoc) -> Result<Assembly, CliError> {
    if doc.chains.is_empty() {
        return Err(CliError::Config("assembly lists no chains".into()));
    }
    if let Some(frames) = &doc.tool_frames {
        if frames.len() != doc.chains.len() {
            return Err(CliError::Config(format!(
                "assembly has {} chains but {} tool_frames",
                doc.chains.len(),
                frames.len()
            )));
        }
    }
    let mut chains = Vec::with_capacity(doc.chains.len());
    for (c, chain_doc) in doc.chains.iter().enumerate() {
        let context = format!("assembly chain {c}");
        let mut elements = chain_elements(chain_doc, &context)?;
        if let Some(frames) = &doc.tool_frames {
            let frame_context = format!("assembly tool_frames[{c}]");
            elements.push(Element::Fixed(parse_transform(&frames[c], &frame_context)?));
        }
        chains.push(finish_chain(chain_doc, elements, &context)?);
    }
    Assembly::new(chains).map_err(|e| bad("assembly", e))
}

fn build_chain(doc: &ChainDoc, context: &str) -> Result<ChainModel, CliError> {
    let elements = chain_elements(doc, context)?;
    finish_chain(doc, elements, context)
}

fn finish_chain(
    doc: &ChainDoc,
    elements: Vec<Element>,
    context: &str,
) -> Result<ChainModel, CliError> {
    let task = match doc.task.as_deref() {
        None | Some("full") => TaskSpace::full(),
        Some("planar-xy") => TaskSpace::planar_xy(),
        Some("point-xy") => TaskSpace::point_xy(),
        Some(other) => {
            return Err(bad(
                context,
                format!("unknown task '{other}' (expected full|planar-xy|point-xy)"),
            ))
        }
    };
    ChainModel::with_task(elements, task).map_err(|e| bad(context, e))
}

fn chain_elements(doc: &ChainDoc, context: &str) -> Result<Vec<Element>, CliError> {
    if doc.elements.is_empty() {
        return Err(bad(context, "element list is empty"));
    }
    let mut elements = Vec::with_capacity(doc.elements.len());
    for (i, e) in doc.elements.iter().enumerate() {
        let ctx = format!("{context} element {i}");
        let element = match (&e.transform, &e.joint, &e.spring) {
            (Some(t), None, None) => Element::Fixed(parse_transform(t, &ctx)?),
            (None, Some(j), None) => Element::Joint(parse_joint(j, &ctx)?),
            (None, None, Some(s)) => Element::Joint(parse_spring(s, &ctx)?),
            _ => {
                return Err(bad(
                    &ctx,
                    "exactly one of transform, joint, spring must be present",
                ))
            }
        };
        elements.push(element);
    }
    Ok(elements)
}

fn parse_transform(numbers: &[f64], context: &str) -> Result<Pose, CliError> {
    if numbers.len() != 12 {
        return Err(bad(
            context,
            format!(
                "transform needs 12 numbers (9 rotation entries then translation), got {}",
                numbers.len()
            ),
        ));
    }
    let r = Matrix3::new(
        numbers[0], numbers[1], numbers[2], //
        numbers[3], numbers[4], numbers[5], //
        numbers[6], numbers[7], numbers[8],
    );
    let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(defect <= ROTATION_TOL) || r.determinant() <= 0.0 {
        return Err(bad(
            context,
            format!("bad rigid transform: rotation block is not a rotation (orthonormality defect {defect:.3e}, det {:.6})", r.determinant()),
        ));
    }
    let t = Vector3::new(numbers[9], numbers[10], numbers[11]);
    Ok(Pose::new(t, Rotation3::from_matrix_unchecked(r)))
}

fn parse_joint(doc: &JointDoc, context: &str) -> Result<JointKind, CliError> {
    let axis = parse_axis(&doc.axis)
        .ok_or_else(|| bad(context, format!("unknown axis '{}' (expected tx|ty|tz|rx|ry|rz)", doc.axis)))?;
    match doc.kind.as_str() {
        "actuated" | "passive" => {
            if doc.k.is_some() || doc.theta0.is_some() {
                return Err(bad(
                    context,
                    format!("{} joint takes only value, not k/theta0", doc.kind),
                ));
            }
            let value = doc.value.unwrap_or(0.0);
            Ok(if doc.kind == "actuated" {
                JointKind::ActuatedLocked { axis, value }
            } else {
                JointKind::PassivePerfect {
                    axis,
                    reference: value,
                }
            })
        }
        "preloaded" => {
            if doc.value.is_some() {
                return Err(bad(context, "preloaded joint takes k and theta0, not value"));
            }
            let stiffness = doc
                .k
                .ok_or_else(|| bad(context, "preloaded joint needs a spring rate k"))?;
            Ok(JointKind::PassivePreloaded {
                axis,
                stiffness,
                rest: doc.theta0.unwrap_or(0.0),
            })
        }
        other => Err(bad(
            context,
            format!("unknown joint kind '{other}' (expected actuated|passive|preloaded)"),
        )),
    }
}

fn parse_spring(doc: &SpringDoc, context: &str) -> Result<JointKind, CliError> {
    let dof = doc.dof;
    if !(1..=6).contains(&dof) {
        return Err(bad(context, format!("spring dof must be 1..=6, got {dof}")));
    }
    let axes = match &doc.axes {
        Some(names) => {
            if names.len() != dof {
                return Err(bad(
                    context,
                    format!("spring lists {} axes for dof {dof}", names.len()),
                ));
            }
            let mut axes = Vec::with_capacity(dof);
            for name in names {
                let axis = parse_axis(name).ok_or_else(|| {
                    bad(context, format!("unknown axis '{name}' (expected tx|ty|tz|rx|ry|rz)"))
                })?;
                if axes.contains(&axis) {
                    return Err(bad(context, format!("spring repeats axis '{name}'")));
                }
                axes.push(axis);
            }
            axes
        }
        None => AXIS_NAMES.iter().take(dof).map(|&(_, a)| a).collect(),
    };
    let stiffness = spring_stiffness(doc, context)?;
    let rest = match &doc.theta0 {
        Some(values) => {
            if values.len() != dof {
                return Err(bad(
                    context,
                    format!("spring theta0 lists {} values for dof {dof}", values.len()),
                ));
            }
            DVector::from_row_slice(values)
        }
        None => DVector::zeros(dof),
    };
    let block = SpringBlock::new(stiffness, rest).map_err(|e| bad(context, e))?;
    Ok(JointKind::VirtualSpring { axes, block })
}

/// Resolves the spring stiffness matrix: an explicit `K`, an inverted
/// explicit `compliance`, or a beam expansion, in that precedence.
fn spring_stiffness(doc: &SpringDoc, context: &str) -> Result<DMatrix<f64>, CliError> {
    let dof = doc.dof;
    if doc.k.is_some() && doc.compliance.is_some() {
        return Err(bad(context, "spring carries both K and compliance; give one"));
    }
    if let Some(values) = &doc.k {
        return square_matrix(values, dof, context, "K");
    }
    if let Some(values) = &doc.compliance {
        let c = square_matrix(values, dof, context, "compliance")?;
        let inverted = nalgebra::linalg::Cholesky::new(c)
            .ok_or_else(|| bad(context, "compliance block not positive definite"))?
            .inverse();
        return Ok(inverted);
    }
    if let Some(beam) = &doc.beam {
        let section = stiffbuck_core::elasticity::BeamSection {
            length: beam.length,
            a: beam.a,
            b: beam.b,
            youngs: beam.youngs,
            shear: beam.shear,
        };
        let block = match dof {
            3 => SpringBlock::beam_planar(&section),
            6 => SpringBlock::beam_spatial(&section),
            other => {
                return Err(bad(
                    context,
                    format!("beam springs are 3-dof (planar) or 6-dof (spatial), got dof {other}"),
                ))
            }
        };
        return Ok(block.map_err(|e| bad(context, e))?.stiffness().clone());
    }
    Err(bad(context, "spring needs one of K, compliance, beam"))
}

fn square_matrix(
    values: &[f64],
    dof: usize,
    context: &str,
    label: &str,
) -> Result<DMatrix<f64>, CliError> {
    if values.len() != dof * dof {
        return Err(bad(
            context,
            format!("{label} needs {}x{} = {} numbers, got {}", dof, dof, dof * dof, values.len()),
        ));
    }
    let m = DMatrix::from_row_slice(dof, dof, values);
    let scale = 1.0 + m.abs().max();
    let asymmetry = (&m - m.transpose()).abs().max();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(bad(
            context,
            format!("spring block not symmetric (|{label} - {label}^T| up to {asymmetry:.3e})"),
        ));
    }
    Ok(m)
}

/// Serializes a model back into the document format, with full
/// round-trip precision on every number.
pub fn export(built: &Built) -> String {
    let doc = match built {
        Built::Chain(chain) => ConfigDoc {
            chain: Some(chain_doc(chain)),
            assembly: None,
        },
        Built::Assembly(assembly) => ConfigDoc {
            chain: None,
            assembly: Some(AssemblyDoc {
                chains: assembly.chains().iter().map(chain_doc).collect(),
                tool_frames: None,
            }),
        },
    };
    toml::to_string_pretty(&doc).expect("document serialization cannot fail")
}

fn chain_doc(chain: &ChainModel) -> ChainDoc {
    let task = chain.task();
    let task_name = if task == TaskSpace::full() {
        None
    } else if task == TaskSpace::planar_xy() {
        Some("planar-xy".to_string())
    } else {
        Some("point-xy".to_string())
    };
    ChainDoc {
        task: task_name,
        elements: chain.elements().iter().map(element_doc).collect(),
    }
}

fn element_doc(element: &Element) -> ElementDoc {
    match element {
        Element::Fixed(pose) => {
            let r = pose.rotation_matrix();
            let mut numbers = Vec::with_capacity(12);
            for row in 0..3 {
                for col in 0..3 {
                    numbers.push(r[(row, col)]);
                }
            }
            numbers.extend_from_slice(pose.position.as_slice());
            ElementDoc {
                transform: Some(numbers),
                ..ElementDoc::default()
            }
        }
        Element::Joint(JointKind::ActuatedLocked { axis, value }) => ElementDoc {
            joint: Some(JointDoc {
                kind: "actuated".into(),
                axis: axis_name(*axis).into(),
                value: Some(*value),
                k: None,
                theta0: None,
            }),
            ..ElementDoc::default()
        },
        Element::Joint(JointKind::PassivePerfect { axis, reference }) => ElementDoc {
            joint: Some(JointDoc {
                kind: "passive".into(),
                axis: axis_name(*axis).into(),
                value: Some(*reference),
                k: None,
                theta0: None,
            }),
            ..ElementDoc::default()
        },
        Element::Joint(JointKind::PassivePreloaded {
            axis,
            stiffness,
            rest,
        }) => ElementDoc {
            joint: Some(JointDoc {
                kind: "preloaded".into(),
                axis: axis_name(*axis).into(),
                value: None,
                k: Some(*stiffness),
                theta0: Some(*rest),
            }),
            ..ElementDoc::default()
        },
        Element::Joint(JointKind::VirtualSpring { axes, block }) => {
            let dof = block.dim();
            let k = block.stiffness();
            let mut values = Vec::with_capacity(dof * dof);
            for row in 0..dof {
                for col in 0..dof {
                    values.push(k[(row, col)]);
                }
            }
            let rest = block.rest();
            ElementDoc {
                spring: Some(SpringDoc {
                    dof,
                    axes: Some(axes.iter().map(|&a| axis_name(a).into()).collect()),
                    k: Some(values),
                    compliance: None,
                    beam: None,
                    theta0: if rest.iter().all(|&v| v == 0.0) {
                        None
                    } else {
                        Some(rest.iter().copied().collect())
                    },
                }),
                ..ElementDoc::default()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stiffbuck_core::scenarios::by_name;

    fn chain_of(built: Built) -> ChainModel {
        match built {
            Built::Chain(c) => c,
            Built::Assembly(_) => panic!("expected a chain"),
        }
    }

    #[test]
    fn builtin_scenario_round_trips_exactly() {
        let scenario = by_name("modelA-S").unwrap().unwrap();
        let text = export(&scenario.built);
        let parsed = chain_of(parse_document(&text).unwrap());
        let original = match &scenario.built {
            Built::Chain(c) => c,
            Built::Assembly(_) => unreachable!(),
        };
        assert_eq!(parsed.task(), original.task());
        assert_eq!(parsed.elements(), original.elements());
    }

    #[test]
    fn assembly_round_trips_exactly() {
        let scenario = by_name("orthoglide-Q0").unwrap().unwrap();
        let text = export(&scenario.built);
        let parsed = match parse_document(&text).unwrap() {
            Built::Assembly(a) => a,
            Built::Chain(_) => panic!("expected an assembly"),
        };
        let original = match &scenario.built {
            Built::Assembly(a) => a,
            Built::Chain(_) => unreachable!(),
        };
        assert_eq!(parsed.chains().len(), original.chains().len());
        for (p, o) in parsed.chains().iter().zip(original.chains()) {
            assert_eq!(p.elements(), o.elements());
        }
    }

    #[test]
    fn asymmetric_stiffness_is_rejected_by_name() {
        let text = r#"
[chain]
[[chain.elements]]
joint = { kind = "actuated", axis = "rz", value = 0.0 }
[[chain.elements]]
spring = { dof = 2, axes = ["rz", "ry"], K = [1.0, 0.001, 0.0, 1.0] }
[[chain.elements]]
transform = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
"#;
        let err = parse_document(text).unwrap_err().to_string();
        assert!(err.contains("spring block not symmetric"), "{err}");
        assert!(err.contains("element 1"), "{err}");
    }

    #[test]
    fn explicit_compliance_overrides_beam_parameters() {
        let text = r#"
[chain]
[[chain.elements]]
joint = { kind = "actuated", axis = "tx", value = 0.0 }
[[chain.elements]]
spring = { dof = 6, beam = { L = 1.0, a = 0.02, b = 0.05, E = 4.8e6, G = 2.0e6 }, compliance = [
  0.5, 0.0, 0.0, 0.0, 0.0, 0.0,
  0.0, 0.5, 0.0, 0.0, 0.0, 0.0,
  0.0, 0.0, 0.5, 0.0, 0.0, 0.0,
  0.0, 0.0, 0.0, 0.5, 0.0, 0.0,
  0.0, 0.0, 0.0, 0.0, 0.5, 0.0,
  0.0, 0.0, 0.0, 0.0, 0.0, 0.5,
] }
[[chain.elements]]
transform = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
"#;
        let chain = chain_of(parse_document(text).unwrap());
        let spring = chain
            .elements()
            .iter()
            .find_map(|e| match e {
                Element::Joint(JointKind::VirtualSpring { block, .. }) => Some(block.clone()),
                _ => None,
            })
            .unwrap();
        // Inverting the diagonal 0.5 compliance gives rate 2 everywhere.
        for i in 0..6 {
            assert!((spring.stiffness()[(i, i)] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_rotation_transform_is_rejected_with_element_index() {
        let text = r#"
[chain]
[[chain.elements]]
transform = [1.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
[[chain.elements]]
joint = { kind = "passive", axis = "ry" }
"#;
        let err = parse_document(text).unwrap_err().to_string();
        assert!(err.contains("bad rigid transform"), "{err}");
        assert!(err.contains("element 0"), "{err}");
    }

    #[test]
    fn schema_violations_carry_locations() {
        let err = parse_document("[chain]\nelements = 3\n").unwrap_err().to_string();
        assert!(err.contains("config parse error"), "{err}");
        // The underlying decoder reports the offending line.
        assert!(err.contains("line"), "{err}");
    }
}
