//! Deterministic sample sets for hypothesis checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The box `[-half_0, half_0] × … × [-half_{d-1}, half_{d-1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub half: Vec<f64>,
}

impl SampleBox {
    pub fn cube(d: usize, half: f64) -> Self {
        SampleBox { half: vec![half; d] }
    }
    pub fn dim(&self) -> usize {
        self.half.len()
    }
    /// `max_i |x_i| / half_i`: 1 on the boundary of the box.
    pub fn relative_radius(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.half).map(|(v, h)| v.abs() / h).fold(0.0, f64::max)
    }
}

/// Points and times at which pointwise inequalities are tested.
///
/// Layout: the origin, the corners, points along the coordinate axes and the
/// main diagonals at relative radii 1/4, 1/2, 3/4, 0.9, 1, then `n` uniform
/// random points from a seeded ChaCha stream. The random part is
/// prefix-stable: the first `n` points do not change when `n` grows.
#[derive(Clone, Debug)]
pub struct Samples {
    pub bx: SampleBox,
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// Indices into `points` along each ray, ordered by increasing radius.
    pub rays: Vec<Vec<usize>>,
}

/// Relative radius from which a point counts as part of the outer shell.
pub const OUTER_SHELL: f64 = 0.9;

impl Samples {
    pub fn new(bx: &SampleBox, times: &[f64], n: usize, seed: u64) -> Result<Self> {
        if n == 0 || times.is_empty() || bx.half.is_empty() {
            return Err(Error::Invalid("empty sample set".into()));
        }
        if bx.half.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Invalid("sample box half-widths must be positive".into()));
        }
        let d = bx.dim();
        let mut points = vec![vec![0.0; d]];
        for mask in 0..(1usize << d) {
            points.push((0..d).map(|i| if mask >> i & 1 == 1 { bx.half[i] } else { -bx.half[i] }).collect());
        }
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                dirs.push(e);
            }
        }
        if d > 1 {
            for mask in 0..(1usize << d) {
                dirs.push((0..d).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect());
            }
        }
        let mut rays = Vec::new();
        for dir in &dirs {
            let mut ray = vec![0];
            for frac in [0.25, 0.5, 0.75, OUTER_SHELL, 1.0] {
                ray.push(points.len());
                points.push(dir.iter().zip(&bx.half).map(|(u, h)| u * h * frac).collect());
            }
            rays.push(ray);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            points.push(bx.half.iter().map(|h| rng.random_range(-*h..=*h)).collect());
        }
        Ok(Samples { bx: bx.clone(), points, times: times.to_vec(), rays })
    }

    pub fn is_outer(&self, x: &[f64]) -> bool {
        self.bx.relative_radius(x) >= OUTER_SHELL - 1e-12
    }

    /// Points with relative radius at most 1/2.
    pub fn is_inner_half(&self, x: &[f64]) -> bool {
        self.bx.relative_radius(x) <= 0.5 + 1e-12
    }

    /// Iterator over all (t, x) pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().flat_map(move |&t| self.points.iter().map(move |x| (t, x.as_slice())))
    }

    /// `count` equispaced times on `[a, b]`.
    pub fn times_on(a: f64, b: f64, count: usize) -> Vec<f64> {
        if count <= 1 || b <= a {
            return vec![a];
        }
        (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_stable_and_inside_the_box() {
        let bx = SampleBox::cube(2, 3.0);
        let a = Samples::new(&bx, &[0.0], 50, 7).unwrap();
        let b = Samples::new(&bx, &[0.0], 100, 7).unwrap();
        assert_eq!(a.points[..], b.points[..a.points.len()]);
        assert!(b.points.iter().all(|x| bx.relative_radius(x) <= 1.0 + 1e-15));
        assert!(b.points.iter().any(|x| b.is_outer(x)));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let bx = SampleBox::cube(1, 1.0);
        assert!(Samples::new(&bx, &[0.0], 0, 1).is_err());
        assert!(Samples::new(&bx, &[], 5, 1).is_err());
    }
}
