use rand::Rng;

use super::{PointOfInterest, PointStrategy, SamplingError};
use crate::mesh::Mesh;

/// Uniform point on a triangle via the square-root barycentric transform.
fn uniform_barycentric<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    let s = r1.sqrt();
    [1.0 - s, s * (1.0 - r2), s * r2]
}

pub fn sample_points_of_interest<R: Rng + ?Sized>(
    mesh: &Mesh,
    n: usize,
    strategy: PointStrategy,
    rng: &mut R,
) -> Result<Vec<PointOfInterest>, SamplingError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let faces: Vec<u32> = (0..mesh.faces.len())
        .filter(|&f| !mesh.is_degenerate(f))
        .map(|f| f as u32)
        .collect();
    if faces.is_empty() {
        return Err(SamplingError::NoFaces);
    }
    let cumulative: Vec<f64> = match strategy {
        PointStrategy::UniformFace => Vec::new(),
        PointStrategy::AreaWeighted => faces
            .iter()
            .scan(0.0, |acc, &f| {
                *acc += mesh.face_area(f as usize);
                Some(*acc)
            })
            .collect(),
    };

    let mut out = Vec::with_capacity(n);
    for id in 0..n {
        let face = match strategy {
            PointStrategy::UniformFace => faces[rng.random_range(0..faces.len())],
            PointStrategy::AreaWeighted => {
                let total = *cumulative.last().unwrap();
                let x = rng.random::<f64>() * total;
                let i = cumulative.partition_point(|&c| c <= x).min(faces.len() - 1);
                faces[i]
            }
        };
        let barycentric = uniform_barycentric(rng);
        out.push(PointOfInterest {
            id: id as u32,
            face_id: face,
            barycentric,
            position: mesh.interpolate_position(face as usize, barycentric),
        });
    }
    Ok(out)
}
