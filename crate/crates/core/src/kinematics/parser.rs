//! Minimal line-based serial chain description.
//!
//! ```text
//! # comment
//! mount xyz=0,0,0 rpy=0,0,0
//! link base
//! link arm
//! joint j1 revolute parent=base child=arm axis=0,0,1 xyz=0,0,0.1 rpy=0,0,0 limits=-3.14,3.14
//! ee arm xyz=0.3,0,0
//! ```
//!
//! Angles in radians, lengths in meters, `rpy` in fixed-axis roll-pitch-yaw.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

use super::{JointKind, JointSpec, KinematicChain};
use crate::error::{Error, Result};

struct RawJoint {
    line: usize,
    spec: JointSpec,
    parent: String,
    child: String,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn numbers<const N: usize>(line: usize, key: &str, value: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != N {
        return Err(err(line, format!("{key} needs {N} comma-separated numbers")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse::<f64>().map_err(|_| err(line, format!("{key}: bad number {p:?}")))?;
        if !o.is_finite() {
            return Err(err(line, format!("{key}: non-finite value")));
        }
    }
    Ok(out)
}

fn key_values<'a>(line: usize, tokens: &[&'a str]) -> Result<HashMap<&'a str, &'a str>> {
    let mut map = HashMap::new();
    for t in tokens {
        let (k, v) = t.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got {t:?}")))?;
        if map.insert(k, v).is_some() {
            return Err(err(line, format!("duplicate key {k}")));
        }
    }
    Ok(map)
}

fn origin(line: usize, kv: &HashMap<&str, &str>) -> Result<Isometry3<f64>> {
    let xyz = kv.get("xyz").map(|v| numbers::<3>(line, "xyz", v)).transpose()?.unwrap_or([0.0; 3]);
    let rpy = kv.get("rpy").map(|v| numbers::<3>(line, "rpy", v)).transpose()?.unwrap_or([0.0; 3]);
    Ok(Isometry3::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    ))
}

fn reject_unknown(line: usize, kv: &HashMap<&str, &str>, allowed: &[&str]) -> Result<()> {
    match kv.keys().find(|k| !allowed.contains(k)) {
        Some(k) => Err(err(line, format!("unknown key {k}"))),
        None => Ok(()),
    }
}

/// Parses a chain description.
pub fn parse_chain(text: &str) -> Result<KinematicChain> {
    let mut links: HashMap<String, usize> = HashMap::new();
    let mut joints: Vec<RawJoint> = Vec::new();
    let mut mount: Option<Isometry3<f64>> = None;
    let mut ee: Option<(usize, String, Vector3<f64>)> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "link" => {
                if tokens.len() != 2 {
                    return Err(err(line, "expected: link <name>"));
                }
                if links.insert(tokens[1].to_string(), line).is_some() {
                    return Err(err(line, format!("duplicate link {}", tokens[1])));
                }
            }
            "mount" => {
                if mount.is_some() {
                    return Err(err(line, "duplicate mount"));
                }
                let kv = key_values(line, &tokens[1..])?;
                reject_unknown(line, &kv, &["xyz", "rpy"])?;
                mount = Some(origin(line, &kv)?);
            }
            "ee" => {
                if ee.is_some() {
                    return Err(err(line, "duplicate ee"));
                }
                if tokens.len() < 2 {
                    return Err(err(line, "expected: ee <link> xyz=..."));
                }
                let kv = key_values(line, &tokens[2..])?;
                reject_unknown(line, &kv, &["xyz"])?;
                let xyz = kv.get("xyz").map(|v| numbers::<3>(line, "xyz", v)).transpose()?.unwrap_or([0.0; 3]);
                ee = Some((line, tokens[1].to_string(), Vector3::from(xyz)));
            }
            "joint" => {
                if tokens.len() < 3 {
                    return Err(err(line, "expected: joint <name> <revolute|prismatic> key=value..."));
                }
                let name = tokens[1];
                let kind = match tokens[2] {
                    "revolute" => JointKind::Revolute,
                    "prismatic" => JointKind::Prismatic,
                    other => return Err(err(line, format!("unknown joint kind {other:?}"))),
                };
                let kv = key_values(line, &tokens[3..])?;
                reject_unknown(line, &kv, &["parent", "child", "axis", "xyz", "rpy", "limits"])?;
                let get = |k: &str| kv.get(k).copied().ok_or_else(|| err(line, format!("joint {name}: missing {k}")));
                let axis = Vector3::from(numbers::<3>(line, "axis", get("axis")?)?);
                if axis.norm() < 1e-12 {
                    return Err(err(line, "axis must be non-zero"));
                }
                let [lo, hi] = numbers::<2>(line, "limits", get("limits")?)?;
                let spec = JointSpec::new(name, kind, axis.normalize(), (lo, hi), origin(line, &kv)?)
                    .map_err(|e| err(line, e.to_string()))?;
                if joints.iter().any(|j| j.spec.name == name) {
                    return Err(err(line, format!("duplicate joint {name}")));
                }
                joints.push(RawJoint { line, spec, parent: get("parent")?.to_string(), child: get("child")?.to_string() });
            }
            other => return Err(err(line, format!("unknown directive {other:?}"))),
        }
    }

    let mut by_parent: HashMap<&str, usize> = HashMap::new();
    let mut has_parent: HashMap<&str, usize> = HashMap::new();
    for (k, j) in joints.iter().enumerate() {
        for l in [&j.parent, &j.child] {
            if !links.contains_key(l.as_str()) {
                return Err(err(j.line, format!("undeclared link {l}")));
            }
        }
        if by_parent.insert(&j.parent, k).is_some() {
            return Err(err(j.line, "branching unsupported"));
        }
        if has_parent.insert(&j.child, k).is_some() {
            return Err(err(j.line, format!("link {} has two parents", j.child)));
        }
    }
    if joints.is_empty() {
        return Err(err(text.lines().count().max(1), "chain has no joints"));
    }
    let roots: Vec<&str> = joints.iter().map(|j| j.parent.as_str()).filter(|p| !has_parent.contains_key(p)).collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(err(joints[0].line, "chain has a cycle")),
        _ => return Err(err(joints[0].line, "chain is not connected")),
    };

    let mut ordered = Vec::with_capacity(joints.len());
    let mut link = root;
    while let Some(&k) = by_parent.get(link) {
        ordered.push(joints[k].spec.clone());
        link = &joints[k].child;
    }
    if ordered.len() != joints.len() {
        return Err(err(joints[0].line, "chain is not connected"));
    }
    let ee_offset = match ee {
        Some((line, l, _)) if l != link => return Err(err(line, format!("ee must attach to the tip link {link}, got {l}"))),
        Some((_, _, offset)) => offset,
        None => Vector3::zeros(),
    };
    KinematicChain::new(ordered, mount.unwrap_or_else(Isometry3::identity), ee_offset)
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<KinematicChain> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chain(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::BaseConfig;

    const PLANAR: &str = "
link a
link b
link c
joint j1 revolute parent=a child=b axis=0,0,1 xyz=0.1,0.2,0 limits=-1,1
joint j2 revolute parent=b child=c axis=0,0,1 xyz=0.3,0,0.05 limits=-1,1
ee c xyz=0.25,0,0
";

    #[test]
    fn planar_zero_configuration() {
        let chain = parse_chain(PLANAR).unwrap();
        let p = chain.forward(&[0.0, 0.0], &BaseConfig::default()).unwrap();
        assert!((p - Vector3::new(0.65, 0.2, 0.05)).amax() < 1e-15);
    }

    #[test]
    fn joints_may_be_listed_out_of_order() {
        let reordered = "link a\nlink b\nlink c\n\
            joint j2 revolute parent=b child=c axis=0,0,1 xyz=0.3,0,0 limits=-1,1\n\
            joint j1 revolute parent=a child=b axis=0,0,1 xyz=0.1,0,0 limits=-1,1\n";
        let chain = parse_chain(reordered).unwrap();
        assert_eq!(chain.joints()[0].name, "j1");
    }

    #[test]
    fn branching_rejected() {
        let text = format!("{PLANAR}link d\njoint j3 revolute parent=b child=d axis=0,0,1 limits=-1,1\n");
        match parse_chain(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(message, "branching unsupported");
                assert_eq!(line, 9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_location() {
        let cases = [
            ("link a\nlink b\njoint j revolute parent=a child=b axis=0,0 limits=-1,1\n", 3),
            ("link a\nwidget\n", 2),
            ("link a\nlink b\njoint j revolute parent=a child=z axis=0,0,1 limits=-1,1\n", 3),
            ("link a\nlink b\njoint j revolute parent=a child=b axis=0,0,1 limits=1,-1\n", 3),
            ("link a\nlink b\njoint j twisty parent=a child=b axis=0,0,1 limits=-1,1\n", 3),
        ];
        for (text, want) in cases {
            match parse_chain(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("unexpected {other:?} for {text}"),
            }
        }
    }

    #[test]
    fn ee_must_be_on_tip() {
        let text = PLANAR.replace("ee c", "ee b");
        assert!(matches!(parse_chain(&text), Err(Error::Parse { line: 7, .. })));
    }

    #[test]
    fn bundled_arm_parses() {
        let chain = parse_chain(crate::kinematics::BUNDLED_ARM).unwrap();
        assert_eq!(chain.dof(), 6);
        assert_eq!(chain.joints()[0].axis, Vector3::z());
    }
}
