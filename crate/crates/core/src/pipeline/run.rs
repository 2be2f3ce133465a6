//! The annotation run: sampling on the calling thread, rendering on a worker
//! pool, and a coordinator that owns the progress log and the manifest.
//!
//! Progress is appended to `manifest.partial.jsonl` in the output directory:
//! a header line `{"config_hash": ...}` followed by one view record per line.
//! A later `--resume` run keeps every logged record whose files still exist
//! and renders the rest. Every view draws its randomness from a seed derived
//! from `(seed, point_id, view_id)`, so scheduling never changes the output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::encode::{write_cue_image, write_float_dump};
use super::manifest::{CueFile, Manifest, ViewRecord, MANIFEST_FILE, TOOL_VERSION};
use super::{PipelineConfig, PipelineError};
use crate::accel::Bvh;
use crate::mesh::{compute_curvatures, validate_mesh, Mesh, Texture};
use crate::render::{plan_dag, render_view, CueKind, CuePlan, RefocusParams, RenderError, RenderOptions};
use crate::sampling::{
    build_trajectory, enumerate_wide_baseline_views, filter_covisibility, sample_camera_locations,
    sample_points_of_interest, SamplingError, ViewSpec,
};

pub const PARTIAL_LOG: &str = "manifest.partial.jsonl";

#[derive(Serialize, Deserialize)]
struct LogHeader {
    config_hash: String,
}

/// Stable per-view seed: the first 8 bytes of
/// `sha256(seed_le || point_id_le || view_id_le)`.
pub fn view_seed(seed: u64, point_id: u32, view_id: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(point_id.to_le_bytes());
    h.update(view_id.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Path of a cue image relative to the output directory.
pub fn cue_path(kind: CueKind, point_id: u32, view_id: u32) -> String {
    format!("{kind}/point_{point_id}_view_{view_id}_{kind}.png")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Task {
    spec: ViewSpec,
    point: [f64; 3],
}

struct Context<'a> {
    mesh: &'a Mesh,
    bvh: &'a Bvh,
    plan: &'a CuePlan,
    config: &'a PipelineConfig,
    out: &'a Path,
}

fn pick<R: Rng>(range: [f64; 2], rng: &mut R) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

fn refocus_params(config: &PipelineConfig, seed: u64) -> RefocusParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let focus_distance = pick(config.refocus.focus_distance, &mut rng);
    let aperture = pick(config.refocus.aperture, &mut rng);
    RefocusParams {
        focus_distance,
        aperture,
        coc_scale: config.refocus.coc_scale,
        max_coc_px: config.refocus.max_coc_px,
    }
}

fn render_task(ctx: &Context, task: &Task) -> Result<ViewRecord, PipelineError> {
    let (p, v) = (task.spec.point_id, task.spec.view_id);
    let options = RenderOptions {
        occlusion_threshold: ctx.config.render.occlusion_threshold,
        rgb_supersample: ctx.config.render.rgb_supersample,
        refocus: refocus_params(ctx.config, view_seed(ctx.config.seed, p, v)),
    };
    let images = render_view(ctx.mesh, ctx.bvh, &task.spec.pose, ctx.plan, &options)?;
    let mut cues = BTreeMap::new();
    for (kind, img) in &images {
        let rel = cue_path(*kind, p, v);
        let encoding = write_cue_image(img, &ctx.out.join(&rel))?;
        let float_path = if ctx.config.render.float_dump {
            let f = rel.replace(".png", ".f32");
            write_float_dump(img, &ctx.out.join(&f))?;
            Some(f)
        } else {
            None
        };
        cues.insert(
            kind.name().to_string(),
            CueFile {
                path: rel,
                encoding,
                float_path,
            },
        );
    }
    Ok(ViewRecord::new(&task.spec, task.point, cues))
}

/// Fails early when a requested cue has no data to draw from.
fn check_sources(mesh: &Mesh, plan: &CuePlan) -> Result<(), RenderError> {
    if plan.order.contains(&CueKind::Rgb) {
        let textured = mesh.texture.is_some() && mesh.uvs.is_some();
        if !textured && mesh.vertex_colors.is_none() {
            return Err(RenderError::NoColorSource);
        }
    }
    if plan.order.contains(&CueKind::SegmentationSemantic) && mesh.semantic_labels.is_none() {
        return Err(RenderError::MissingLabels(CueKind::SegmentationSemantic));
    }
    if plan.order.contains(&CueKind::SegmentationInstance) && mesh.instance_labels.is_none() {
        return Err(RenderError::MissingLabels(CueKind::SegmentationInstance));
    }
    Ok(())
}

fn prepare_mesh(mut mesh: Mesh, config: &PipelineConfig, plan: &CuePlan) -> Result<Mesh, PipelineError> {
    if let Some(path) = &config.texture {
        if mesh.uvs.is_none() {
            log::warn!("texture given but the mesh has no texture coordinates; it will be ignored");
        }
        mesh.texture = Some(Texture::load(path)?);
    }
    let report = validate_mesh(&mesh);
    log::info!(
        "mesh: {} vertices, {} faces ({} degenerate, {} dropped), watertight estimate {}",
        report.vertex_count,
        report.face_count,
        report.degenerate_face_count,
        report.dropped_face_count,
        report.watertight_estimate
    );
    let fixed = mesh.compute_vertex_normals(false);
    if fixed > 0 {
        log::info!("computed normals for {fixed} vertices");
    }
    if plan.order.contains(&CueKind::Curvature) && mesh.curvature.is_none() {
        mesh = compute_curvatures(&mesh)?;
    }
    check_sources(&mesh, plan)?;
    Ok(mesh)
}

/// Wide-baseline views, then trajectory frames when enabled, keyed and
/// sorted by `(point_id, view_id)`.
fn sample_views(mesh: &Mesh, bvh: &Bvh, space_id: &str, config: &PipelineConfig) -> Result<Vec<Task>, PipelineError> {
    let sc = &config.sampling;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cameras = sample_camera_locations(mesh, bvh, sc, &mut rng)?;
    let points = sample_points_of_interest(mesh, sc.n_points, sc.point_strategy, &mut rng)?;
    log::info!("sampled {} camera locations and {} points", cameras.len(), points.len());
    let cov = filter_covisibility(&cameras, &points, bvh, mesh, sc)?;
    log::info!(
        "covisibility kept {} cameras, {} points, {} pairs",
        cov.cameras.len(),
        cov.points.len(),
        cov.pair_count()
    );
    let mut specs = enumerate_wide_baseline_views(&cov, &cameras, space_id, sc, &mut rng);
    if config.trajectory.enabled {
        let mut dropped = 0;
        for point in &cov.points {
            let seers = &cov.seen_by[&point.id];
            if seers.len() < 2 {
                continue;
            }
            let controls: Vec<_> = seers.iter().map(|&c| (c, cameras[c as usize])).collect();
            let traj = build_trajectory(
                &controls,
                point,
                config.trajectory.frames_per_segment,
                seers.len() as u32,
                space_id,
                mesh,
                bvh,
                sc,
                &mut rng,
            )?;
            dropped += traj.dropped;
            specs.extend(traj.frames);
        }
        log::info!("trajectory frames dropped for lost line of sight: {dropped}");
    }
    if specs.is_empty() {
        return Err(SamplingError::Config("sampling produced zero views".into()).into());
    }
    let positions: BTreeMap<u32, [f64; 3]> = cov.points.iter().map(|p| (p.id, p.position.coords.into())).collect();
    let mut tasks: Vec<Task> = specs
        .into_iter()
        .map(|spec| Task {
            point: positions[&spec.point_id],
            spec,
        })
        .collect();
    tasks.sort_by_key(|t| (t.spec.point_id, t.spec.view_id));
    Ok(tasks)
}

/// Records from a previous run of the same config.
/// Records left in `out` by an earlier run together with that run's config
/// hash: the manifest if it exists, else the progress log.
fn read_previous(out: &Path) -> Result<Option<(String, Vec<ViewRecord>)>, PipelineError> {
    let manifest = out.join(MANIFEST_FILE);
    if manifest.is_file() {
        let m = Manifest::read(&manifest)?;
        return Ok(Some((m.config_hash, m.views)));
    }
    let log_path = out.join(PARTIAL_LOG);
    if !log_path.is_file() {
        return Ok(None);
    }
    let reader = BufReader::new(File::open(&log_path).map_err(io_err(&log_path))?);
    let mut lines = reader.lines();
    let header: LogHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line.map_err(io_err(&log_path))?)
            .map_err(|e| PipelineError::Manifest(format!("{PARTIAL_LOG} header: {e}")))?,
        None => return Ok(None),
    };
    let mut records = Vec::new();
    for line in lines {
        let Ok(line) = line else { break };
        // A crash can leave the last line truncated.
        match serde_json::from_str(&line) {
            Ok(r) => records.push(r),
            Err(_) => break,
        }
    }
    Ok(Some((header.config_hash, records)))
}

fn previous_records(out: &Path, hash: &str) -> Result<Vec<ViewRecord>, PipelineError> {
    match read_previous(out)? {
        None => {
            log::info!("nothing to resume in {}; starting fresh", out.display());
            Ok(Vec::new())
        }
        Some((found, _)) if found != hash => Err(PipelineError::HashMismatch {
            expected: hash.to_string(),
            found,
        }),
        Some((_, records)) => Ok(records),
    }
}

/// A fresh run over an old output directory first removes the old manifest
/// and every file it or the progress log references, so the new manifest
/// accounts for everything on disk.
fn clear_previous(out: &Path) -> Result<(), PipelineError> {
    let records = match read_previous(out) {
        Ok(Some((_, records))) => records,
        Ok(None) => return Ok(()),
        Err(e) => {
            log::warn!("ignoring unreadable earlier run in {}: {e}", out.display());
            Vec::new()
        }
    };
    log::info!(
        "replacing {} views from an earlier run in {}",
        records.len(),
        out.display()
    );
    let stale = records
        .iter()
        .flat_map(|r| r.files().map(|f| out.join(f)).collect::<Vec<_>>())
        .chain([out.join(MANIFEST_FILE)]);
    for path in stale {
        match std::fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(io_err(&path)(e)),
            _ => {}
        }
    }
    Ok(())
}

fn append_record(log: &mut File, path: &Path, record: &ViewRecord) -> Result<(), PipelineError> {
    let mut line = serde_json::to_string(record).expect("record serializes");
    line.push('\n');
    log.write_all(line.as_bytes()).map_err(io_err(path))
}

/// Runs the whole pipeline for `config`, reading the mesh from `config.mesh`.
pub fn run_annotation(config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    let path = config
        .mesh
        .as_ref()
        .ok_or_else(|| PipelineError::Config("no mesh given".into()))?;
    let mesh = Mesh::load(path)?;
    let space_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
    annotate_mesh(mesh, &space_id, config)
}

/// [`run_annotation`] with resuming forced on.
pub fn resume(config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    let mut c = config.clone();
    c.resume = true;
    run_annotation(&c)
}

/// Runs the pipeline on an in-memory mesh. `config.mesh` only feeds the
/// config hash.
pub fn annotate_mesh(mesh: Mesh, space_id: &str, config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    config.check_values()?;
    let out: PathBuf = config
        .output_dir
        .clone()
        .ok_or_else(|| PipelineError::Config("no output directory given".into()))?;
    let plan = plan_dag(&config.cues)?;
    let hash = config.hash();
    let mesh = prepare_mesh(mesh, config, &plan)?;
    let bvh = Bvh::build(&mesh)?;
    let tasks = sample_views(&mesh, &bvh, space_id, config)?;
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;

    let wanted: BTreeSet<(u32, u32)> = tasks.iter().map(|t| (t.spec.point_id, t.spec.view_id)).collect();
    let mut done: BTreeMap<(u32, u32), ViewRecord> = BTreeMap::new();
    if config.resume {
        for r in previous_records(&out, &hash)? {
            if wanted.contains(&r.key()) && r.files_exist(&out) {
                done.insert(r.key(), r);
            }
        }
        log::info!("resuming: {} of {} views already complete", done.len(), tasks.len());
    } else {
        clear_previous(&out)?;
    }

    let log_path = out.join(PARTIAL_LOG);
    let mut log_file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&log_path)
        .map_err(io_err(&log_path))?;
    let header = serde_json::to_string(&LogHeader {
        config_hash: hash.clone(),
    })
    .expect("header serializes");
    log_file
        .write_all(format!("{header}\n").as_bytes())
        .map_err(io_err(&log_path))?;
    for r in done.values() {
        append_record(&mut log_file, &log_path, r)?;
    }

    let pending: Vec<&Task> = tasks
        .iter()
        .filter(|t| !done.contains_key(&(t.spec.point_id, t.spec.view_id)))
        .collect();
    let ctx = Context {
        mesh: &mesh,
        bvh: &bvh,
        plan: &plan,
        config,
        out: &out,
    };
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut failure: Option<PipelineError> = None;
    let workers = config.jobs.min(pending.len()).max(1);
    thread::scope(|s| {
        let (tx, rx) = mpsc::sync_channel::<Result<ViewRecord, PipelineError>>(workers * 2);
        for _ in 0..workers {
            let tx = tx.clone();
            let (ctx, pending, next, abort) = (&ctx, &pending, &next, &abort);
            s.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = pending.get(i) else { break };
                if tx.send(render_task(ctx, task)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for result in rx {
            let step = result.and_then(|r| {
                append_record(&mut log_file, &log_path, &r)?;
                done.insert(r.key(), r);
                Ok(())
            });
            if let Err(e) = step {
                abort.store(true, Ordering::Relaxed);
                failure.get_or_insert(e);
            }
        }
    });
    log_file.flush().map_err(io_err(&log_path))?;
    drop(log_file);
    if let Some(e) = failure {
        log::error!("run aborted; progress kept in {}", log_path.display());
        return Err(e);
    }

    let manifest = Manifest {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: hash,
        space_id: space_id.to_string(),
        cues: plan.emitted.iter().map(|k| k.name().to_string()).collect(),
        views: done.into_values().collect(),
    };
    manifest.validate(&out)?;
    manifest.write_atomic(&out.join(MANIFEST_FILE))?;
    std::fs::remove_file(&log_path).map_err(io_err(&log_path))?;
    log::info!("wrote {} views to {}", manifest.views.len(), out.display());
    Ok(manifest)
}
