//! Release checks. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{Point3, Vector3};
use omniforge::accel::{intersect_bruteforce, visible, Bvh};
use omniforge::mesh::{compute_curvatures, Mesh};
use omniforge::pipeline::{annotate_mesh, PipelineConfig};
use omniforge::procedural::{cube, icosphere, occluder_scene, room};
use omniforge::render::{
    plan_dag, raycast_gbuffer, refocus, render_view, CueImage, CueKind, PinholeCamera, RefocusParams, RenderOptions,
};
use omniforge::sampling::{
    build_trajectory, enumerate_wide_baseline_views, filter_covisibility, fixate, sample_camera_locations,
    sample_intrinsics, sample_points_of_interest, CameraPose, Covisibility, SamplingConfig, ViewSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn room_sampling() -> SamplingConfig {
    SamplingConfig {
        camera_height_range: Some([0.3, 2.2]),
        poisson_radius: 0.8,
        n_points: 200,
        min_views_per_point: 3,
        resolution: 64,
        ..Default::default()
    }
}

struct Sampled {
    mesh: Mesh,
    bvh: Bvh,
    cameras: Vec<Point3<f64>>,
    cov: Covisibility,
    views: Vec<ViewSpec>,
}

fn sample_room(cfg: &SamplingConfig, seed: u64) -> Result<Sampled, String> {
    let mesh = room();
    let bvh = Bvh::build(&mesh).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cameras = sample_camera_locations(&mesh, &bvh, cfg, &mut rng).map_err(|e| e.to_string())?;
    let points =
        sample_points_of_interest(&mesh, cfg.n_points, cfg.point_strategy, &mut rng).map_err(|e| e.to_string())?;
    let cov = filter_covisibility(&cameras, &points, &bvh, &mesh, cfg).map_err(|e| e.to_string())?;
    let views = enumerate_wide_baseline_views(&cov, &cameras, "room", cfg, &mut rng);
    Ok(Sampled {
        mesh,
        bvh,
        cameras,
        cov,
        views,
    })
}

fn covisibility() -> Outcome {
    let cfg = room_sampling();
    let start = Instant::now();
    let s = sample_room(&cfg, 2024)?;
    let elapsed = start.elapsed();
    ensure(!s.cov.points.is_empty(), || "no point survived".into())?;
    let mut per_camera: BTreeMap<u32, usize> = s.cov.cameras.iter().map(|&c| (c, 0)).collect();
    for p in &s.cov.points {
        let mut n = 0;
        for &c in &s.cov.cameras {
            let eye = s.cameras[c as usize];
            let d = (p.position - eye).norm();
            if d >= cfg.min_view_distance && d <= cfg.max_view_distance && visible(&s.bvh, &s.mesh, eye, p.position) {
                n += 1;
                *per_camera.get_mut(&c).unwrap() += 1;
            }
        }
        ensure(n >= 3, || format!("point {} has {n} cameras", p.id))?;
    }
    if let Some((c, _)) = per_camera.iter().find(|(_, n)| **n == 0) {
        return Err(format!("camera {c} sees no point"));
    }
    let position: BTreeMap<u32, Point3<f64>> = s.cov.points.iter().map(|p| (p.id, p.position)).collect();
    let blocked = s
        .views
        .iter()
        .filter(|v| !visible(&s.bvh, &s.mesh, v.pose.position, position[&v.point_id]))
        .count();
    ensure(blocked == 0, || {
        format!("{blocked} of {} views fail line of sight", s.views.len())
    })?;
    within(elapsed, 10.0)?;
    Ok(format!(
        "{} points, {} cameras, {} views, {:.2} s",
        s.cov.points.len(),
        s.cov.cameras.len(),
        s.views.len(),
        elapsed.as_secs_f64()
    ))
}

fn intrinsics() -> Outcome {
    let cfg = SamplingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let start = Instant::now();
    let samples: Vec<_> = (0..n).map(|_| sample_intrinsics(&cfg, &mut rng)).collect();
    let elapsed = start.elapsed();
    let fov_ok = samples.iter().all(|s| (30.0..=125.0).contains(&s.fov_deg));
    let roll_ok = samples.iter().all(|s| (-10.0..=10.0).contains(&s.roll_deg));
    let fov_mean = samples.iter().map(|s| s.fov_deg).sum::<f64>() / n as f64;
    let roll_mean = samples.iter().map(|s| s.roll_deg).sum::<f64>() / n as f64;
    ensure(fov_ok, || "fov outside [30, 125]".into())?;
    ensure(roll_ok, || "roll outside [-10, 10]".into())?;
    ensure((fov_mean - 77.5).abs() <= 1.0, || format!("fov mean {fov_mean:.3}"))?;
    ensure(roll_mean.abs() <= 0.2, || format!("roll mean {roll_mean:.3}"))?;
    within(elapsed, 5.0)?;
    Ok(format!("fov mean {fov_mean:.3}, roll mean {roll_mean:.3}"))
}

fn oracle_scenes() -> Vec<(&'static str, Mesh, CameraPose)> {
    vec![
        (
            "room",
            room(),
            fixate(Point3::new(-2.0, -1.5, 1.6), Point3::new(1.0, 1.0, 0.5), 4.0, 90.0, 64).unwrap(),
        ),
        (
            "sphere",
            icosphere(1.0, 4),
            fixate(Point3::new(0.4, -3.0, 0.8), Point3::origin(), -3.0, 50.0, 64).unwrap(),
        ),
        (
            "occluder",
            occluder_scene(),
            fixate(Point3::new(0.1, 0.05, 0.0), Point3::new(0.0, 0.0, -6.0), 0.0, 70.0, 64).unwrap(),
        ),
    ]
}

fn renderer_vs_oracle() -> Outcome {
    let start = Instant::now();
    let mut pixels = 0;
    for (name, mesh, pose) in oracle_scenes() {
        let bvh = Bvh::build(&mesh).map_err(|e| e.to_string())?;
        let g = raycast_gbuffer(&mesh, &bvh, &pose);
        let mut mismatches = 0;
        for j in 0..g.height {
            for i in 0..g.width {
                let (ray, _) = g.camera.pixel_ray(i, j);
                let oracle = intersect_bruteforce(&mesh, &ray).map(|h| (h.face_id, h.t.to_bits()));
                if g.at(i, j).map(|s| (s.face_id, s.t.to_bits())) != oracle {
                    mismatches += 1;
                }
            }
        }
        ensure(mismatches == 0, || format!("{name}: {mismatches} mismatching pixels"))?;
        pixels += g.width * g.height;
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!("{pixels} pixels, 0 mismatches"))
}

/// Ray parameter of the first crossing of the unit sphere at the origin.
fn unit_sphere_t(o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
    let b = o.coords.dot(d);
    let c = o.coords.norm_squared() - 1.0;
    let disc = b * b - c;
    (disc >= 0.0).then(|| -b - disc.sqrt())
}

fn analytic_sphere() -> Outcome {
    let mut mesh = icosphere(1.0, 4);
    mesh.compute_vertex_normals(true);
    let mesh = compute_curvatures(&mesh).map_err(|e| e.to_string())?;
    let bvh = Bvh::build(&mesh).map_err(|e| e.to_string())?;
    // Far enough that grazing rays near the silhouette stay within tolerance.
    let pose = fixate(Point3::new(1.5, -6.0, 2.0), Point3::origin(), 0.0, 22.0, 256).unwrap();
    ensure(pose.position.coords.norm() >= 6.0, || "camera too close".into())?;
    let cues = [
        CueKind::DepthEuclidean,
        CueKind::Normals,
        CueKind::Curvature,
        CueKind::MaskValid,
    ];
    let out = render_view(&mesh, &bvh, &pose, &plan_dag(&cues).unwrap(), &RenderOptions::default())
        .map_err(|e| e.to_string())?;
    let cam = PinholeCamera::from_pose(&pose);
    let (mut worst_depth, mut normal_err, mut kh, mut kg) = (0.0f64, Vec::new(), Vec::new(), Vec::new());
    for j in 0..256 {
        for i in 0..256 {
            let idx = (j * 256 + i) as usize;
            if out[&CueKind::MaskValid].data[idx] < 0.5 {
                continue;
            }
            let (ray, _) = cam.pixel_ray(i, j);
            let t = unit_sphere_t(&ray.origin, &ray.direction).ok_or("mesh hit outside the sphere")?;
            let depth = out[&CueKind::DepthEuclidean].data[idx] as f64;
            worst_depth = worst_depth.max((depth - t).abs() / t);
            let expected = pose.rotation.transform_vector(&ray.at(t).coords.normalize());
            let n = out[&CueKind::Normals].pixel(idx);
            let got = Vector3::new(n[0] as f64, n[1] as f64, n[2] as f64) * 2.0 - Vector3::repeat(1.0);
            normal_err.push(got.angle(&expected).to_degrees());
            let c = out[&CueKind::Curvature].pixel(idx);
            kh.push((c[0] as f64 - 1.0).abs());
            kg.push((c[1] as f64 - 1.0).abs());
        }
    }
    let hits = normal_err.len();
    let (normal, kh, kg) = (median(normal_err), median(kh), median(kg));
    ensure(hits > 5000, || format!("only {hits} hit pixels"))?;
    ensure(worst_depth < 0.01, || format!("depth relative error {worst_depth:.5}"))?;
    ensure(normal < 2.0, || format!("median normal error {normal:.3} deg"))?;
    ensure(kh < 0.1, || format!("median |kH - 1| {kh:.4}"))?;
    ensure(kg < 0.1, || format!("median |kG - 1| {kg:.4}"))?;
    Ok(format!(
        "{hits} px, max depth err {worst_depth:.5}, normal {normal:.3} deg, |kH-1| {kh:.4}, |kG-1| {kg:.4}"
    ))
}

fn pinhole_identity() -> Outcome {
    let s = sample_room(&room_sampling(), 7)?;
    let mut poses: Vec<CameraPose> = s.views.iter().map(|v| v.pose).collect();
    poses.extend(
        oracle_scenes()
            .into_iter()
            .filter(|(n, ..)| *n == "room")
            .map(|(.., p)| p),
    );
    let plan = plan_dag(&[CueKind::DepthEuclidean, CueKind::DepthZbuffer, CueKind::MaskValid]).unwrap();
    let mut checked = 0;
    for pose in &poses {
        let out = render_view(&s.mesh, &s.bvh, pose, &plan, &RenderOptions::default()).map_err(|e| e.to_string())?;
        let (e, z, m) = (
            &out[&CueKind::DepthEuclidean],
            &out[&CueKind::DepthZbuffer],
            &out[&CueKind::MaskValid],
        );
        for i in 0..e.pixel_count() {
            if m.data[i] > 0.5 && e.data[i] < z.data[i] {
                return Err(format!("euclidean {} < zbuffer {} at pixel {i}", e.data[i], z.data[i]));
            }
        }
        let (px, py) = PinholeCamera::from_pose(pose).principal_pixel();
        let i = (py * pose.resolution + px) as usize;
        if m.data[i] > 0.5 {
            let rel = ((e.data[i] - z.data[i]) / z.data[i]).abs();
            ensure(rel <= 1e-6, || format!("principal pixel relative gap {rel}"))?;
        }
        checked += 1;
    }
    Ok(format!("{checked} views"))
}

fn throughput() -> Outcome {
    let mut mesh = room();
    mesh.compute_vertex_normals(false);
    let mesh = compute_curvatures(&mesh).map_err(|e| e.to_string())?;
    let bvh = Bvh::build(&mesh).map_err(|e| e.to_string())?;
    let pose = fixate(Point3::new(-2.0, -1.5, 1.6), Point3::new(1.0, 1.0, 0.5), 4.0, 90.0, 512).unwrap();
    let options = RenderOptions {
        refocus: RefocusParams {
            focus_distance: 2.5,
            aperture: 0.01,
            max_coc_px: Some(16.0),
            ..Default::default()
        },
        ..Default::default()
    };
    let mut slowest = (CueKind::Rgb, 0.0);
    for kind in CueKind::ALL {
        let start = Instant::now();
        render_view(&mesh, &bvh, &pose, &plan_dag(&[kind]).unwrap(), &options).map_err(|e| e.to_string())?;
        let s = start.elapsed().as_secs_f64();
        ensure(s <= 4.0, || format!("{} took {s:.2} s", kind.name()))?;
        if s > slowest.1 {
            slowest = (kind, s);
        }
    }
    Ok(format!("slowest {} at {:.2} s", slowest.0.name(), slowest.1))
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let name = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((name, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut base = PipelineConfig {
        cues: CueKind::ALL.to_vec(),
        seed: 3,
        ..Default::default()
    };
    base.sampling.n_points = 40;
    base.sampling.min_views_per_point = 1;
    base.sampling.max_views_per_point = Some(2);
    base.sampling.camera_height_range = Some([0.3, 2.2]);
    base.sampling.resolution = 48;
    base.trajectory.enabled = true;
    base.trajectory.frames_per_segment = 3;
    base.refocus.aperture = [0.005, 0.01];
    let mut snaps = Vec::new();
    for (dir, jobs) in dirs.iter().zip([1, 1, 8]) {
        let mut c = base.clone();
        c.output_dir = Some(dir.path().to_path_buf());
        c.jobs = jobs;
        annotate_mesh(room(), "room", &c).map_err(|e| e.to_string())?;
        snaps.push(snapshot(dir.path()));
    }
    ensure(snaps[0] == snaps[1], || "two jobs=1 runs differ".into())?;
    ensure(snaps[0] == snaps[2], || "jobs=1 and jobs=8 differ".into())?;
    Ok(format!("{} files identical across 3 runs", snaps[0].len()))
}

fn trajectories() -> Outcome {
    let cfg = room_sampling();
    let s = sample_room(&cfg, 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut built, mut frames) = (0, 0);
    for point in &s.cov.points {
        let controls: Vec<_> = s.cov.seen_by[&point.id]
            .iter()
            .map(|&c| (c, s.cameras[c as usize]))
            .collect();
        if controls.len() < 2 {
            continue;
        }
        let t = build_trajectory(&controls, point, 5, 0, "room", &s.mesh, &s.bvh, &cfg, &mut rng)
            .map_err(|e| e.to_string())?;
        for (id, c) in &controls {
            let gap = t.positions.iter().map(|p| (p - c).norm()).fold(f64::INFINITY, f64::min);
            ensure(gap <= 1e-6, || {
                format!("point {}: control {id} missed by {gap:e}", point.id)
            })?;
        }
        for f in &t.frames {
            let err = f.pose.fixation_error(&point.position);
            ensure(err <= 1e-4, || format!("fixation error {err:e} rad"))?;
            ensure(visible(&s.bvh, &s.mesh, f.pose.position, point.position), || {
                "frame without LOS".into()
            })?;
        }
        built += 1;
        frames += t.frames.len();
    }
    ensure(built > 0, || "no point had two cameras".into())?;

    let point = &s.cov.points[0];
    let (a, b) = (Point3::new(-1.2, -1.8, 1.3), Point3::new(2.0, -0.9, 1.9));
    let t = build_trajectory(&[(0, a), (1, b)], point, 9, 0, "room", &s.mesh, &s.bvh, &cfg, &mut rng)
        .map_err(|e| e.to_string())?;
    let dir = (b - a).normalize();
    let off = t
        .positions
        .iter()
        .map(|p| ((p - a) - dir * (p - a).dot(&dir)).norm())
        .fold(0.0, f64::max);
    ensure(off <= 1e-6, || {
        format!("two-control path leaves the segment by {off:e}")
    })?;
    Ok(format!(
        "{built} trajectories, {frames} frames, 2-control deviation {off:.1e}"
    ))
}

fn random_rgb(w: u32, h: u32, rng: &mut ChaCha8Rng) -> CueImage {
    let mut img = CueImage::zeros(CueKind::Rgb, w, h);
    img.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    img
}

fn refocus_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let tol = 1.0f32 / 255.0;

    let (w, h) = (32, 32);
    let rgb = random_rgb(w, h, &mut rng);
    let mut depth = CueImage::zeros(CueKind::DepthEuclidean, w, h);
    let focus = 2.0f32;
    for v in depth.data.iter_mut() {
        *v = if rng.random_bool(0.4) {
            focus
        } else {
            rng.random_range(0.5..8.0)
        };
    }
    let params = RefocusParams {
        focus_distance: focus as f64,
        aperture: 0.02,
        coc_scale: 1000.0,
        max_coc_px: Some(16.0),
    };
    let zero = RefocusParams {
        aperture: 0.0,
        ..params
    };
    ensure(refocus(&rgb, &depth, &zero).data == rgb.data, || {
        "aperture 0 changed the image".into()
    })?;
    let out = refocus(&rgb, &depth, &params);
    for i in 0..rgb.pixel_count() {
        if depth.data[i] == focus {
            for k in 0..3 {
                let d = (out.pixel(i)[k] - rgb.pixel(i)[k]).abs();
                ensure(d <= tol, || format!("focal pixel {i} moved by {d}"))?;
            }
        }
    }

    // Constant depth: every pixel gets the same 3 px disc average.
    let (w, h) = (24i64, 20i64);
    let rgb = random_rgb(w as u32, h as u32, &mut rng);
    let mut depth = CueImage::zeros(CueKind::DepthEuclidean, w as u32, h as u32);
    depth.data.fill(0.5);
    let params = RefocusParams {
        focus_distance: 1.0,
        aperture: 1.0,
        coc_scale: 3.0,
        max_coc_px: None,
    };
    let out = refocus(&rgb, &depth, &params);
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut n) = ([0.0f64; 3], 0.0);
            for qy in (y - 3).max(0)..=(y + 3).min(h - 1) {
                for qx in (x - 3).max(0)..=(x + 3).min(w - 1) {
                    if (qx - x).pow(2) + (qy - y).pow(2) <= 9 {
                        let c = rgb.pixel((qy * w + qx) as usize);
                        (0..3).for_each(|k| acc[k] += c[k] as f64);
                        n += 1.0;
                    }
                }
            }
            let got = out.pixel((y * w + x) as usize);
            for k in 0..3 {
                worst = worst.max((got[k] as f64 - acc[k] / n).abs());
            }
        }
    }
    ensure(worst <= tol as f64, || format!("disc oracle off by {worst}"))?;
    Ok(format!("disc oracle max deviation {worst:.2e}"))
}

fn gauss_bonnet() -> Outcome {
    let mut report = Vec::new();
    for (name, mesh) in [("cube", cube(1.0, 6)), ("icosphere", icosphere(1.0, 4))] {
        let c = compute_curvatures(&mesh).map_err(|e| e.to_string())?.curvature.unwrap();
        let total = c.total_gaussian();
        let rel = (total - 4.0 * PI).abs() / (4.0 * PI);
        ensure(rel <= 0.01, || format!("{name}: total {total:.6}"))?;
        report.push(format!("{name} {rel:.1e}"));
    }
    Ok(format!("relative error {}", report.join(", ")))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 10] = [
        ("covisibility", covisibility),
        ("intrinsics", intrinsics),
        ("renderer_vs_oracle", renderer_vs_oracle),
        ("analytic_sphere", analytic_sphere),
        ("pinhole_identity", pinhole_identity),
        ("throughput", throughput),
        ("determinism", determinism),
        ("trajectory", trajectories),
        ("refocus", refocus_checks),
        ("gauss_bonnet", gauss_bonnet),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
