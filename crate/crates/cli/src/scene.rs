//! Resolving scene and chain arguments.

use std::path::{Path, PathBuf};

use sdi_core::datasets::{generate_scene, scene_from_toml, scene_to_toml, SceneKind, SceneSpec};
use sdi_core::kinematics::{load_chain, KinematicChain, BUNDLED_ARM};
use sdi_core::sim::{read_model, EnergyModel};
use sdi_core::{DepthGrid, EnergyFunction};

use crate::exit::{CliError, CliResult, ExitCode};
use crate::manifest::RunManifest;

pub const ROI_MODEL_FILE: &str = "roi.sim";
pub const CONSTRAINT_MODEL_FILE: &str = "constraint.sim";

/// A scene file path, or the name of a builtin scene when no such file exists.
pub fn load_scene(arg: &str, scene_seed: u64, manifest: &mut RunManifest) -> CliResult<SceneSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        return read_scene_file(path, manifest);
    }
    let kind: SceneKind = arg.parse().map_err(|_| {
        if path.extension().is_some() || arg.contains(std::path::MAIN_SEPARATOR) {
            CliError::new(ExitCode::Io, format!("{arg}: scene file not found"))
        } else {
            CliError::new(ExitCode::InvalidScene, format!("{arg:?} is neither a scene file nor a builtin scene"))
        }
    })?;
    let scene = generate_scene(kind, scene_seed)?;
    let toml = scene_to_toml(&scene, &format!("{kind}.depth"))?;
    manifest.input_bytes(&format!("builtin:{kind}.toml"), toml.as_bytes());
    manifest.input_bytes(&format!("builtin:{kind}.depth"), &scene.depth.to_bytes());
    manifest.seed("scene", scene_seed);
    Ok(scene)
}

fn read_scene_file(path: &Path, manifest: &mut RunManifest) -> CliResult<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut depth_path = PathBuf::new();
    let scene = scene_from_toml(&text, |name| {
        depth_path = dir.join(name);
        DepthGrid::read(&depth_path)
    })?;
    manifest.input_file(path)?;
    manifest.input_file(&depth_path)?;
    Ok(scene)
}

pub fn load_chain_arg(path: Option<&Path>, manifest: &mut RunManifest) -> CliResult<KinematicChain> {
    match path {
        Some(p) => {
            let chain = load_chain(p)?;
            manifest.input_file(p)?;
            Ok(chain)
        }
        None => {
            manifest.input_bytes("builtin:arm6.chain", BUNDLED_ARM.as_bytes());
            Ok(KinematicChain::bundled_arm())
        }
    }
}

/// Reads `roi.sim` and, if present, `constraint.sim` from a fit output directory.
pub fn load_models(dir: &Path, manifest: &mut RunManifest) -> CliResult<(EnergyModel, Option<EnergyModel>)> {
    let roi_path = dir.join(ROI_MODEL_FILE);
    let roi = read_model(&roi_path)?;
    manifest.input_file(&roi_path)?;
    let con_path = dir.join(CONSTRAINT_MODEL_FILE);
    let constraint = if con_path.is_file() {
        let m = read_model(&con_path)?;
        manifest.input_file(&con_path)?;
        Some(m)
    } else {
        None
    };
    if roi.input_dim() != 3 {
        return Err(CliError::new(ExitCode::InvalidInput, format!("{}: ROI model must take 3D input", roi_path.display())));
    }
    if constraint.as_ref().is_some_and(|c| c.input_dim() != 2) {
        return Err(CliError::new(
            ExitCode::InvalidInput,
            format!("{}: constraint model must take 2D input", con_path.display()),
        ));
    }
    Ok((roi, constraint))
}
