//! Batch subcommands: each writes its artifacts plus `manifest.json`.

use std::io::Write;
use std::time::Instant;

use serde_json::json;
use sdi_core::datasets::{write_scene, SceneKind, ShapeKind};
use sdi_core::eval::{
    compare_density, fit_scene_models, placement_region, run_benchmark_with_models, BenchConfig, DensityConfig,
    IkBaselineConfig, SceneModels,
};
use sdi_core::format::sig6;
use sdi_core::sim::SamplingBox;
use sdi_core::solver::{solve_multistart, SolverConfig};
use sdi_core::{EnergyFunction, TrainConfig};

use crate::args::{BenchArgs, DensityArgs, ExportArgs, FitArgs, SolveArgs};
use crate::exit::{CliError, CliResult, ExitCode};
use crate::grid::Grid;
use crate::image::depth_png;
use crate::manifest::{OutputDir, RunManifest};
use crate::scene::{load_chain_arg, load_models, load_scene, CONSTRAINT_MODEL_FILE, ROI_MODEL_FILE};

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::new(ExitCode::Io, format!("stdout: {e}"))
}

pub fn train_json(t: &TrainConfig) -> serde_json::Value {
    json!({
        "learning_rate": t.learning_rate,
        "weight_decay": t.weight_decay,
        "batch_size": t.batch_size,
        "epochs": t.epochs,
        "padding": t.padding,
        "negative_ratio": t.negative_ratio,
        "hidden": t.hidden,
        "seed": t.seed,
    })
}

pub fn solver_json(s: &SolverConfig, restarts: usize) -> serde_json::Value {
    let mut v = serde_json::to_value(s).unwrap_or_default();
    v["restarts"] = json!(restarts);
    v
}

pub fn scene_export(args: &ExportArgs, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let kind: SceneKind =
        args.name.parse().map_err(|_| CliError::new(ExitCode::InvalidScene, format!("unknown builtin scene {:?}", args.name)))?;
    let mut manifest = RunManifest::new("scene export", argv);
    manifest.seed("scene", args.scene_seed);
    manifest.config = json!({ "scene": kind.as_str() });
    let scene = sdi_core::datasets::generate_scene(kind, args.scene_seed)?;
    let mut dir = OutputDir::create(&args.out, manifest)?;
    let toml_name = format!("{kind}.toml");
    write_scene(&scene, dir.path(&toml_name))?;
    dir.adopt(&toml_name)?;
    dir.adopt(&format!("{kind}.depth"))?;
    dir.write(&format!("{kind}.png"), &depth_png(&scene.depth)?)?;
    dir.finish()?;
    writeln!(out, "{}", dir_display(&args.out, &toml_name)).map_err(stdout_err)
}

fn dir_display(root: &std::path::Path, name: &str) -> String {
    root.join(name).display().to_string()
}

pub fn fit(args: &FitArgs, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let mut manifest = RunManifest::new("fit", argv);
    let scene = load_scene(&args.scene, args.scene_seed, &mut manifest)?;
    let chain = load_chain_arg(args.chain.as_deref(), &mut manifest)?;
    let train = args.train.apply(TrainConfig::default(), args.seed);
    manifest.seed("train", args.seed);
    manifest.config = json!({ "train": train_json(&train), "constraint_padding": args.constraint_padding });

    let start = Instant::now();
    let models = fit_scene_models(&scene, &chain, &train, args.constraint_padding)?;
    manifest.timing("fit", start.elapsed().as_secs_f64());

    let mut dir = OutputDir::create(&args.out, manifest)?;
    dir.write(ROI_MODEL_FILE, &models.roi.to_bytes())?;
    let mut summary = String::from("model\tinput_dim\tparameters\n");
    summary.push_str(&format!("roi\t3\t{}\n", models.roi.network().parameter_count()));
    if let Some(c) = &models.constraint {
        dir.write(CONSTRAINT_MODEL_FILE, &c.to_bytes())?;
        summary.push_str(&format!("constraint\t2\t{}\n", c.network().parameter_count()));
    }
    dir.finish()?;
    out.write_all(summary.as_bytes()).map_err(stdout_err)
}

pub fn solve(args: &SolveArgs, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let mut manifest = RunManifest::new("solve", argv);
    let scene = load_scene(&args.scene, args.scene_seed, &mut manifest)?;
    let chain = load_chain_arg(args.chain.as_deref(), &mut manifest)?;
    let (roi, constraint) = load_models(&args.models, &mut manifest)?;
    let solver = args.solver.config(scene.z_limits, scene.omega_limits, args.seed);
    manifest.seed("solver", args.seed);
    manifest.config = json!({ "solver": solver_json(&solver, args.solver.restarts) });
    let region = placement_region(&scene, &chain)?;

    let start = Instant::now();
    let constraint_fn = constraint.as_ref().map(|c| c as &dyn EnergyFunction);
    let result = solve_multistart(&roi, constraint_fn, &chain, &solver, args.solver.restarts, &region)?;
    manifest.timing("solve", start.elapsed().as_secs_f64());

    let b = result.best;
    let table = format!(
        "x\ty\tz\tomega\texpected_energy\n{}\t{}\t{}\t{}\t{}\n",
        sig6(b.x),
        sig6(b.y),
        sig6(b.z),
        sig6(b.omega),
        sig6(result.scores[result.best_index])
    );
    let mut restarts = String::from("restart\tx0\ty0\tz0\tomega0\tx\ty\tz\tomega\texpected_energy\tbest\n");
    for (r, ((i, f), s)) in result.initials.iter().zip(&result.finals).zip(&result.scores).enumerate() {
        let row: Vec<String> =
            i.as_array().iter().chain(f.as_array().iter()).chain(std::iter::once(s)).map(|v| sig6(*v)).collect();
        restarts.push_str(&format!("{r}\t{}\t{}\n", row.join("\t"), u8::from(r == result.best_index)));
    }

    let mut dir = OutputDir::create(&args.out, manifest)?;
    dir.write("result.tsv", table.as_bytes())?;
    dir.write("trace.tsv", result.traces[result.best_index].to_tsv().as_bytes())?;
    dir.write("restarts.tsv", restarts.as_bytes())?;
    dir.finish()?;
    out.write_all(table.as_bytes()).map_err(stdout_err)
}

/// Probability grids of the ROI map at the ROI's mean height and of the
/// constraint map over its training box.
pub fn model_grids(scene_roi_z: f64, models: &SceneModels, region: &SamplingBox, cells: usize) -> CliResult<Vec<(String, Grid)>> {
    let cells = cells.max(2);
    let roi_region = SamplingBox::new(vec![models.roi.domain().lo[0], models.roi.domain().lo[1]], vec![
        models.roi.domain().hi[0],
        models.roi.domain().hi[1],
    ])?;
    let mut grids = vec![("roi.grid".to_string(), Grid::sample("roi-probability", &models.roi, &roi_region, Some(scene_roi_z), cells, cells)?)];
    if let Some(c) = &models.constraint {
        grids.push(("constraint.grid".to_string(), Grid::sample("constraint-probability", c, region, None, cells, cells)?));
    }
    Ok(grids)
}

pub fn bench(args: &BenchArgs, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let mut manifest = RunManifest::new("bench", argv);
    let scene = load_scene(&args.scene, args.scene_seed, &mut manifest)?;
    let chain = load_chain_arg(args.chain.as_deref(), &mut manifest)?;
    let train = args.train.apply(TrainConfig::default(), args.seed);
    let config = BenchConfig {
        train: train.clone(),
        solver: args.solver.config(scene.z_limits, scene.omega_limits, args.seed),
        restarts: args.solver.restarts,
        ik: IkBaselineConfig { points: args.ik_points, candidates: args.ik_candidates, iterations: args.ik_iterations },
        random_draws: args.random_draws,
        fk_samples: args.fk_samples,
        tolerance: args.tolerance,
        test_points: args.test_points,
        constraint_padding: args.constraint_padding,
        seed: args.seed,
    };
    manifest.seed("bench", args.seed);
    manifest.config = json!({
        "train": train_json(&train),
        "constraint_padding": config.constraint_padding,
        "solver": solver_json(&config.solver, config.restarts),
        "ik": { "points": config.ik.points, "candidates": config.ik.candidates, "iterations": config.ik.iterations },
        "random_draws": config.random_draws,
        "fk_samples": config.fk_samples,
        "tolerance": config.tolerance,
        "test_points": config.test_points,
        "coverage_rule": "ROI test point reachable if an FK sample lies within tolerance",
    });

    let models = match &args.models {
        Some(dir) => {
            let (roi, constraint) = load_models(dir, &mut manifest)?;
            SceneModels { roi, constraint }
        }
        None => {
            let start = Instant::now();
            let m = fit_scene_models(&scene, &chain, &train, config.constraint_padding)?;
            manifest.timing("fit", start.elapsed().as_secs_f64());
            m
        }
    };
    let start = Instant::now();
    let report = run_benchmark_with_models(&scene, &models, &chain, &config)?;
    manifest.timing("benchmark", start.elapsed().as_secs_f64());
    for m in &report.methods {
        manifest.timing(&format!("method.{}", m.method), m.runtime_s);
    }

    let roi_z = scene.roi_points()?.centroid().z;
    let region = placement_region(&scene, &chain)?;
    let grids = model_grids(roi_z, &models, &region, args.grid_cells)?;

    let mut dir = OutputDir::create(&args.out, manifest)?;
    let coverage = report.coverage_tsv(true);
    dir.write("coverage.tsv", coverage.as_bytes())?;
    dir.write_timing("runtime.tsv", report.runtime_tsv(true).as_bytes())?;
    for (name, grid) in &grids {
        dir.write(name, grid.to_text().as_bytes())?;
    }
    dir.finish()?;
    out.write_all(coverage.as_bytes()).map_err(stdout_err)
}

pub fn compare_density_cmd(args: &DensityArgs, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let kind: ShapeKind =
        args.shape.parse().map_err(|_| CliError::new(ExitCode::InvalidInput, format!("unknown shape {:?}", args.shape)))?;
    let defaults = DensityConfig::default();
    let config = DensityConfig {
        train: args.train.apply(defaults.train, args.seed),
        gmm_components: args.gmm.clone(),
        train_count: args.train_count,
        test_count: args.test_count,
        partition_samples: args.partition_samples,
        seed: args.seed,
    };
    let mut manifest = RunManifest::new("compare-density", argv);
    manifest.seed("density", args.seed);
    manifest.config = json!({
        "shape": kind.as_str(),
        "train": train_json(&config.train),
        "gmm_components": config.gmm_components,
        "train_count": config.train_count,
        "test_count": config.test_count,
        "partition_samples": config.partition_samples,
    });
    let start = Instant::now();
    let report = compare_density(kind, &config)?;
    manifest.timing("compare", start.elapsed().as_secs_f64());

    let table = report.to_tsv(true);
    let details = format!(
        "shape\tkde_bandwidth\tlog_partition\tlog_partition_std_err\n{}\t{}\t{}\t{}\n",
        kind,
        sig6(report.kde_bandwidth),
        sig6(report.log_partition),
        sig6(report.log_partition_std_err)
    );
    let mut dir = OutputDir::create(&args.out, manifest)?;
    dir.write("density.tsv", table.as_bytes())?;
    dir.write("estimates.tsv", details.as_bytes())?;
    dir.write_timing("runtime.tsv", report.runtimes_tsv().as_bytes())?;
    dir.finish()?;
    out.write_all(table.as_bytes()).map_err(stdout_err)
}
