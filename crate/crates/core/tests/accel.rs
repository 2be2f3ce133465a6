use nalgebra::{Point3, Vector3};
use omniforge::accel::{intersect, intersect_bruteforce, visible, Bvh, Ray, TraversalStats};
use omniforge::mesh::Mesh;
use omniforge::procedural::{grid, icosphere, merge, occluder_scene, room};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_ray<R: Rng>(mesh: &Mesh, rng: &mut R) -> Ray {
    let (lo, hi) = mesh.bounds();
    let pad = (hi - lo) * 0.25;
    let o = Point3::new(
        rng.random_range(lo.x - pad.x..=hi.x + pad.x),
        rng.random_range(lo.y - pad.y..=hi.y + pad.y),
        rng.random_range(lo.z - pad.z..=hi.z + pad.z),
    );
    Ray::unbounded(o, unit_vector(rng))
}

fn key(h: Option<omniforge::accel::Hit>) -> Option<(u32, u64)> {
    h.map(|h| (h.face_id, h.t.to_bits()))
}

#[test]
fn ten_thousand_random_rays_match_linear_scan() {
    for (name, mesh) in [
        ("room", room()),
        ("sphere", icosphere(1.0, 4)),
        ("occluder", occluder_scene()),
    ] {
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut hits = 0;
        for _ in 0..10_000 {
            let ray = random_ray(&mesh, &mut rng);
            let (a, b) = (intersect(&bvh, &mesh, &ray), intersect_bruteforce(&mesh, &ray));
            hits += a.is_some() as usize;
            assert_eq!(key(a), key(b), "{name}: {ray:?}");
        }
        assert!(hits > 1000, "{name}: only {hits} hits");
    }
}

#[test]
fn traversal_touches_under_five_percent_of_faces() {
    // ~10k faces: a flat 49x49 grid plus a level-4 sphere hovering above it.
    let mut ball = icosphere(1.0, 4);
    ball.vertices.iter_mut().for_each(|v| v.z += 2.0);
    let mesh = merge(&[grid(10.0, 49), ball]);
    assert!((9_000..=11_000).contains(&mesh.faces.len()), "{}", mesh.faces.len());
    let bvh = Bvh::build(&mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut stats = TraversalStats::default();
    let n = 5_000;
    for _ in 0..n {
        let ray = random_ray(&mesh, &mut rng);
        bvh.closest_hit(&mesh, &ray, &mut stats);
    }
    let fraction = stats.faces_tested as f64 / n as f64 / mesh.faces.len() as f64;
    assert!(fraction < 0.05, "average fraction of faces tested {fraction}");
}

#[test]
fn axis_ray_hits_the_sphere_at_four() {
    let mesh = icosphere(1.0, 4);
    let bvh = Bvh::build(&mesh).unwrap();
    let ray = Ray::unbounded(Point3::new(0.0, 0.0, 5.0), Vector3::new(0.0, 0.0, -1.0));
    let t = intersect(&bvh, &mesh, &ray).unwrap().t;
    assert!((3.99..=4.001).contains(&t), "{t}");
}

#[test]
fn segment_ending_on_a_face_is_visible() {
    let mesh = room();
    let bvh = Bvh::build(&mesh).unwrap();
    let a = Point3::new(0.0, 0.0, 1.5);
    let on_floor = Point3::new(-2.0, 1.5, 0.0);
    assert!(visible(&bvh, &mesh, a, on_floor));
    let behind_wall = Point3::new(3.5, 0.0, 1.0);
    assert!(!visible(&bvh, &mesh, a, behind_wall));
}

fn soup(coords: &[f64]) -> Mesh {
    let vertices: Vec<Point3<f64>> = coords.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
    let faces = (0..vertices.len() as u32 / 3)
        .map(|f| [3 * f, 3 * f + 1, 3 * f + 2])
        .collect();
    Mesh::new(vertices, faces).unwrap()
}

/// Triangle soups on a coarse lattice so shared edges, coplanar overlaps and
/// equal-t ties are common.
fn lattice_soup() -> impl Strategy<Value = Mesh> {
    (1usize..60)
        .prop_flat_map(|n| prop::collection::vec(-4i32..=4, n * 9))
        .prop_map(|c| soup(&c.iter().map(|v| *v as f64 * 0.5).collect::<Vec<_>>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bvh_agrees_with_linear_scan(mesh in lattice_soup(), seed in any::<u64>()) {
        let bvh = Bvh::build(&mesh).unwrap();
        prop_assert!(bvh.check_containment(&mesh));
        let mut order = bvh.face_order().to_vec();
        order.sort();
        prop_assert_eq!(order, (0..mesh.faces.len() as u32).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            // Half the rays start on lattice points to provoke ties.
            let ray = if rng.random_bool(0.5) {
                let o = Point3::new(
                    rng.random_range(-4..=4) as f64 * 0.5,
                    rng.random_range(-4..=4) as f64 * 0.5,
                    6.0,
                );
                Ray::unbounded(o, Vector3::new(0.0, 0.0, -1.0))
            } else {
                random_ray(&mesh, &mut rng)
            };
            prop_assert_eq!(key(intersect(&bvh, &mesh, &ray)), key(intersect_bruteforce(&mesh, &ray)));
        }
    }

    #[test]
    fn hits_respect_bounds_and_barycentrics(mesh in lattice_soup(), seed in any::<u64>()) {
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..30 {
            let mut ray = random_ray(&mesh, &mut rng);
            ray.t_min = rng.random_range(0.0..1.0);
            ray.t_max = ray.t_min + rng.random_range(0.1..10.0);
            if let Some(h) = intersect(&bvh, &mesh, &ray) {
                prop_assert!(h.t >= ray.t_min && h.t <= ray.t_max);
                prop_assert!((h.barycentric.iter().sum::<f64>() - 1.0).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn shrinking_t_max_never_moves_the_hit_farther(seed in any::<u64>(), shrink in 0.05f64..1.0) {
        let mesh = room();
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ray = random_ray(&mesh, &mut rng);
        if let Some(full) = intersect(&bvh, &mesh, &ray) {
            let mut short = ray;
            short.t_max = full.t * shrink + ray.t_min;
            if let Some(h) = intersect(&bvh, &mesh, &short) {
                prop_assert!(h.t <= full.t);
            }
        }
    }

    #[test]
    fn line_of_sight_is_symmetric(seed in any::<u64>()) {
        let mesh = room();
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..40 {
            let a = Point3::new(rng.random_range(-3.5..3.5), rng.random_range(-3.0..3.0), rng.random_range(-0.5..3.0));
            let b = Point3::new(rng.random_range(-3.5..3.5), rng.random_range(-3.0..3.0), rng.random_range(-0.5..3.0));
            prop_assert_eq!(visible(&bvh, &mesh, a, b), visible(&bvh, &mesh, b, a));
        }
    }
}
