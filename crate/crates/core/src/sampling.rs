//! Seeded samplers for the builtin spaces and manifolds.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::geometry::PointSet;

/// Major and minor radius of the builtin torus.
pub const TORUS_RADII: (f64, f64) = (0.6, 0.25);

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= norm);
    v
}

/// Uniform sample of S^q ⊂ ℝ^{q+1} (normalized Gaussian vectors).
pub fn uniform_sphere<R: Rng + ?Sized>(q: usize, n: usize, rng: &mut R) -> PointSet {
    let d = q + 1;
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            if v.iter().map(|c| c * c).sum::<f64>() > 1e-24 {
                coords.extend(normalized(v));
                break;
            }
        }
    }
    PointSet::from_flat(d, coords).expect("nonempty sample")
}

/// Uniform sample of [−1, 1]^q.
pub fn uniform_cube<R: Rng + ?Sized>(q: usize, n: usize, rng: &mut R) -> PointSet {
    let coords = (0..n * q).map(|_| rng.random_range(-1.0..=1.0)).collect();
    PointSet::from_flat(q, coords).expect("nonempty sample")
}

/// Uniform sample of the equatorial great circle of S² ⊂ ℝ³.
pub fn great_circle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PointSet {
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let t: f64 = rng.random_range(0.0..2.0 * PI);
        coords.extend([t.cos(), t.sin(), 0.0]);
    }
    PointSet::from_flat(3, coords).expect("nonempty sample")
}

/// Area-uniform sample of the standard torus with radii [`TORUS_RADII`] in [−1, 1]³.
pub fn torus<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PointSet {
    let (big, small) = TORUS_RADII;
    let mut coords = Vec::with_capacity(3 * n);
    while coords.len() < 3 * n {
        let u: f64 = rng.random_range(0.0..2.0 * PI);
        let v: f64 = rng.random_range(0.0..2.0 * PI);
        // Surface element is proportional to big + small·cos v.
        let accept: f64 = rng.random_range(0.0..big + small);
        if accept > big + small * v.cos() {
            continue;
        }
        let ring = big + small * v.cos();
        coords.extend([ring * u.cos(), ring * u.sin(), small * v.sin()]);
    }
    PointSet::from_flat(3, coords).expect("nonempty sample")
}

/// Uniform point of the Euclidean ball of radius `r` around the origin in ℝ^d.
pub fn ball_offset<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    let dir = normalized((0..d).map(|_| StandardNormal.sample(rng)).collect());
    let radius = r * rng.random::<f64>().powf(1.0 / d as f64);
    dir.into_iter().map(|c| c * radius).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_lie_on_their_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in uniform_sphere(2, 500, &mut rng).iter() {
            assert!((p.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() < 1e-14);
        }
        for p in uniform_cube(4, 500, &mut rng).iter() {
            assert!(p.iter().all(|c| c.abs() <= 1.0));
        }
        let (big, small) = TORUS_RADII;
        for p in torus(500, &mut rng).iter() {
            let ring = (p[0] * p[0] + p[1] * p[1]).sqrt() - big;
            assert!((ring * ring + p[2] * p[2]).sqrt() - small < 1e-12);
        }
        for _ in 0..100 {
            let v = ball_offset(3, 0.1, &mut rng);
            assert!(v.iter().map(|c| c * c).sum::<f64>().sqrt() <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn seeded_samples_repeat() {
        let a = uniform_sphere(2, 50, &mut ChaCha8Rng::seed_from_u64(9));
        let b = uniform_sphere(2, 50, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
