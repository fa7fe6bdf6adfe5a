//! Command implementations. Each writes its artifacts under the configured
//! output directory and returns a summary for the caller to print.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;

use diffsar::autodiff::Graph;
use diffsar::geometry::{read_obj_file, write_obj_file, TriangleMesh};
use diffsar::gradcheck::{run_suite, SuiteReport};
use diffsar::metrics::{compare_meshes, l2_star, MetricReport, VoxelOptions};
use diffsar::optimize::{
    reconstruct, render_image, shader_l1, train_shader, LabelView, LossTerms, ShaderSample,
    ShaderTrainConfig,
};
use diffsar::sarcam::AspectPose;
use diffsar::shade::{augment, render_features, LearnedShader, SarImage, Shader};
use diffsar::{Error, Result};

use crate::config::{subset_indices, RunConfig, ShaderChoice};
use crate::manifest::{DatasetManifest, LoadedManifest, ManifestRecord};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("creating {}: {e}", dir.display()),
        ))
    })
}

/// Learned weights are stored with an absolute path so the manifest can
/// be read from anywhere.
fn portable_shader(choice: &ShaderChoice) -> Result<ShaderChoice> {
    Ok(match choice {
        ShaderChoice::Learned { weights } => ShaderChoice::Learned {
            weights: fs::canonicalize(weights)?,
        },
        other => other.clone(),
    })
}

struct Job {
    index: usize,
    pose: AspectPose,
    sigma: f64,
}

/// Renders every pose at every configured blend radius, applies noise and
/// the display remap and writes PNG + SARF pairs plus `manifest.json`.
/// Poses are rendered in parallel; the output does not depend on the
/// thread count because every image draws noise from its own stream.
pub fn dataset_gen(
    cfg: &RunConfig,
    mesh_path: &Path,
    object: Option<&str>,
) -> Result<(PathBuf, DatasetManifest)> {
    let mesh = read_obj_file(mesh_path)?;
    mesh.require_closed_manifold()?;
    let object = match object {
        Some(o) => o.to_string(),
        None => mesh_path
            .file_stem()
            .map_or("object".into(), |s| s.to_string_lossy().into_owned()),
    };
    let shader_choice = portable_shader(&cfg.shader)?;
    let shader = shader_choice.load(Path::new("."))?;
    let images = cfg.out.join("images");
    create_dir(&images)?;
    write_obj_file(&mesh, &cfg.out.join("mesh.obj"))?;

    let mut jobs = Vec::new();
    for pose in cfg.poses()? {
        for &sigma in &cfg.sigmas {
            jobs.push(Job {
                index: jobs.len(),
                pose,
                sigma,
            });
        }
    }
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs.len())
        .max(1);
    let chunk = jobs.len().div_ceil(workers);
    let mut records: Vec<ManifestRecord> = thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                let (mesh, shader, images, object) = (&mesh, &shader, &images, &object);
                s.spawn(move || {
                    part.iter()
                        .map(|j| render_record(cfg, mesh, shader, images, object, j))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("render worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by_key(|r| r.index);

    let manifest = DatasetManifest {
        object,
        mesh: "mesh.obj".into(),
        height: cfg.height,
        width: cfg.width,
        spacing: cfg.spacing,
        shader: shader_choice,
        noise: cfg.noise,
        pedf: cfg.pedf,
        seed: cfg.seed,
        records,
    };
    let path = manifest.save(&cfg.out)?;
    Ok((path, manifest))
}

fn render_record(
    cfg: &RunConfig,
    mesh: &TriangleMesh,
    shader: &Shader,
    images: &Path,
    object: &str,
    job: &Job,
) -> Result<ManifestRecord> {
    let setup = cfg.render_setup(job.sigma)?;
    let clean = render_image(mesh, &job.pose, shader, &setup)?;
    let (noisy, branch) = augment(&clean, &cfg.noise, cfg.seed, job.index as u64)?;
    let threshold = cfg.pedf.threshold(noisy.data());
    let name = format!("{:04}", job.index);
    let (png, sarf) = (
        PathBuf::from("images").join(format!("{name}.png")),
        PathBuf::from("images").join(format!("{name}.sarf")),
    );
    noisy
        .remap_with(&cfg.pedf, threshold)?
        .write_png(&images.join(format!("{name}.png")))?;
    noisy.write_sarf_file(&images.join(format!("{name}.sarf")))?;
    Ok(ManifestRecord {
        index: job.index,
        object: object.to_string(),
        png,
        sarf,
        azimuth: job.pose.azimuth_deg,
        elevation: job.pose.elevation_deg,
        standoff: job.pose.standoff,
        sigma: job.sigma,
        branch,
        seed: cfg.seed,
        threshold,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconOutcome {
    pub mesh: PathBuf,
    pub losses: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub final_terms: LossTerms,
    pub metrics: Option<MetricReport>,
    pub views: usize,
}

/// Fits a mesh to the manifest's images with the configured schedule.
/// The shader is the one the manifest was rendered with.
pub fn reconstruct_cmd(
    cfg: &RunConfig,
    manifest: &Path,
    truth: Option<&Path>,
) -> Result<ReconOutcome> {
    let loaded = LoadedManifest::load(manifest)?;
    let m = &loaded.manifest;
    let rows: Vec<usize> = match cfg.views {
        Some(k) if k != m.records.len() => subset_indices(m.records.len(), k)?,
        _ => (0..m.records.len()).collect(),
    };
    let labels: Vec<LabelView> = rows
        .iter()
        .map(|&i| {
            let r = &m.records[i];
            Ok(LabelView {
                pose: r.pose()?,
                image: loaded.label(r)?,
            })
        })
        .collect::<Result<_>>()?;
    let shader = m.shader.load(&loaded.base)?;
    let setup = RunConfig {
        height: m.height,
        width: m.width,
        spacing: m.spacing,
        pedf: m.pedf,
        ..cfg.clone()
    }
    .render_setup(cfg.schedule.levels[0].sigma)?;
    let truth_mesh = truth.map(read_obj_file).transpose()?;

    create_dir(&cfg.out)?;
    let ckpt_dir = cfg.out.join("checkpoints");
    if cfg.checkpoint_every > 0 {
        create_dir(&ckpt_dir)?;
    }
    let mut csv = String::from(LossTerms::CSV_HEADER);
    csv.push('\n');
    let mut checkpoints = Vec::new();
    let result = reconstruct(&labels, &cfg.schedule, &shader, &setup, cfg.seed, |rec| {
        writeln!(csv, "{}", rec.terms.csv_row(rec.iter)).expect("writing to a string");
        if cfg.checkpoint_every > 0 && rec.iter % cfg.checkpoint_every == 0 {
            let p = ckpt_dir.join(format!("iter_{:05}.obj", rec.iter));
            write_obj_file(rec.mesh, &p)?;
            checkpoints.push(p);
        }
        Ok(())
    })?;
    let mesh_path = cfg.out.join("mesh.obj");
    write_obj_file(&result.mesh, &mesh_path)?;
    let losses = cfg.out.join("loss.csv");
    fs::write(&losses, csv)?;
    let metrics = match &truth_mesh {
        Some(t) => {
            let r = compare_meshes(&result.mesh, t, &cfg.voxel)?;
            fs::write(cfg.out.join("metrics.json"), r.to_json()? + "\n")?;
            Some(r)
        }
        None => None,
    };
    Ok(ReconOutcome {
        mesh: mesh_path,
        losses,
        checkpoints,
        final_terms: result.history.last().copied().unwrap_or_default(),
        metrics,
        views: labels.len(),
    })
}

/// Voxel metrics between two meshes and, when both images are given, L2*
/// between a label and a prediction (linear SARF files).
pub fn eval(
    pred: &Path,
    truth: &Path,
    opts: &VoxelOptions,
    images: Option<(&Path, &Path)>,
    spacing: f64,
) -> Result<MetricReport> {
    let mut r = compare_meshes(&read_obj_file(pred)?, &read_obj_file(truth)?, opts)?;
    if let Some((label, prediction)) = images {
        let y = SarImage::read_sarf_file(label, spacing)?;
        let p = SarImage::read_sarf_file(prediction, spacing)?;
        r.l2_star = Some(l2_star(&y, &p)?);
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct RenderOutcome {
    pub png: PathBuf,
    pub sarf: PathBuf,
    pub threshold: f64,
    /// fraction of pixels above the clutter level
    pub coverage: f64,
}

/// Renders one noiseless image at the first configured blend radius.
pub fn render(
    cfg: &RunConfig,
    mesh: &Path,
    pose: &AspectPose,
    name: &str,
) -> Result<RenderOutcome> {
    let mesh = read_obj_file(mesh)?;
    let shader = cfg.shader.load(Path::new("."))?;
    let img = render_image(&mesh, pose, &shader, &cfg.render_setup(cfg.sigmas[0])?)?;
    create_dir(&cfg.out)?;
    let (png, sarf) = (
        cfg.out.join(format!("{name}.png")),
        cfg.out.join(format!("{name}.sarf")),
    );
    let threshold = cfg.pedf.threshold(img.data());
    img.remap_with(&cfg.pedf, threshold)?.write_png(&png)?;
    img.write_sarf_file(&sarf)?;
    let floor = match cfg.shader {
        ShaderChoice::Analytic { params } => params.b,
        ShaderChoice::Learned { .. } => 0.0,
    };
    let coverage =
        img.data().iter().filter(|&&x| x > floor + 1e-9).count() as f64 / img.data().len() as f64;
    Ok(RenderOutcome {
        png,
        sarf,
        threshold,
        coverage,
    })
}

/// Runs the finite-difference suite. Any case above tolerance, or a full
/// run that leaves a primitive unexercised, is a numeric error.
pub fn gradcheck(filter: Option<&str>, configs: usize, seed: u64) -> Result<(SuiteReport, String)> {
    let report = run_suite(filter, configs, seed)?;
    let mut text = String::new();
    for c in &report.cases {
        let verdict = if c.passed { "ok" } else { "FAIL" };
        writeln!(
            text,
            "{:<26} max rel error {:.3e} (tol {:.0e}, {} configs) {verdict}",
            c.name, c.max_rel_error, c.tolerance, c.configs
        )
        .expect("writing to a string");
    }
    if filter.is_none() {
        writeln!(
            text,
            "primitives covered: {}/{}",
            diffsar::gradcheck::PRIMITIVES.len() - report.uncovered.len(),
            diffsar::gradcheck::PRIMITIVES.len()
        )
        .expect("writing to a string");
    }
    Ok((report, text))
}

pub fn gradcheck_verdict(report: &SuiteReport, full: bool) -> Result<()> {
    let failed: Vec<&str> = report
        .cases
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(Error::Numeric(format!(
            "gradient check failed for {}",
            failed.join(", ")
        )));
    }
    if full && !report.uncovered.is_empty() {
        return Err(Error::Numeric(format!(
            "primitives without a check: {}",
            report.uncovered.join(", ")
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainOutcome {
    pub weights: PathBuf,
    pub curve: PathBuf,
    pub train_samples: usize,
    pub val_samples: usize,
    pub best_epoch: usize,
    pub best_val_l1: f64,
    pub epochs_run: usize,
}

/// Options specific to shader training.
#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    pub epochs: usize,
    pub hidden: usize,
    /// every `holdout`-th pose goes to validation
    pub holdout: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 50,
            hidden: 8,
            holdout: 4,
        }
    }
}

/// Trains the learned shader on a manifest: features are re-rendered from
/// the manifest mesh at each record's pose and blend radius, labels are the
/// linear SARF images. Records sharing a pose stay on one side of the
/// train/validation split.
pub fn train_shader_cmd(
    cfg: &RunConfig,
    manifest: &Path,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    if opts.holdout < 2 {
        return Err(Error::Validation("holdout must be at least 2".into()));
    }
    let loaded = LoadedManifest::load(manifest)?;
    let m = &loaded.manifest;
    let mesh = loaded.mesh()?;
    let geometry = RunConfig {
        height: m.height,
        width: m.width,
        spacing: m.spacing,
        ..cfg.clone()
    };
    let mut poses: Vec<(f64, f64)> = Vec::new();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for r in &m.records {
        let key = (r.azimuth, r.elevation);
        let slot = poses.iter().position(|p| *p == key).unwrap_or_else(|| {
            poses.push(key);
            poses.len() - 1
        });
        let setup = geometry.render_setup(r.sigma)?;
        let g = Graph::new();
        let f = render_features(
            g.constant(mesh.vertex_tensor()),
            mesh.faces(),
            &r.pose()?,
            &setup.extent,
            &setup.raster,
        )?;
        let label = loaded.label(r)?;
        let sample = ShaderSample::new(
            f.to_tensor()?,
            diffsar::autodiff::Tensor::vector(label.into_data()),
        )?;
        if slot % opts.holdout == opts.holdout - 1 {
            val.push(sample);
        } else {
            train.push(sample);
        }
    }
    let init = LearnedShader::random(opts.hidden, cfg.seed)?;
    let tcfg = ShaderTrainConfig {
        epochs: opts.epochs,
        seed: cfg.seed,
        ..ShaderTrainConfig::default()
    };
    let report = train_shader(&train, &val, init, &tcfg)?;
    create_dir(&cfg.out)?;
    let weights = cfg.out.join("shader.json");
    report.shader.save(&weights)?;
    let mut curve = String::from("epoch,train_l1,val_l1\n");
    for (e, (t, v)) in report.train_l1.iter().zip(&report.val_l1).enumerate() {
        writeln!(curve, "{e},{t},{v}").expect("writing to a string");
    }
    let curve_path = cfg.out.join("training.csv");
    fs::write(&curve_path, curve)?;
    let held = if val.is_empty() { &train } else { &val };
    Ok(TrainOutcome {
        weights,
        curve: curve_path,
        train_samples: train.len(),
        val_samples: val.len(),
        best_epoch: report.best_epoch,
        best_val_l1: shader_l1(&report.shader, held)?,
        epochs_run: report.val_l1.len(),
    })
}
