//! Greedy farthest-point sampling over a mesh surface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, TriMesh, Vec3};

/// Candidate surface points: every vertex followed by every triangle centroid.
pub fn sample_candidates(mesh: &TriMesh) -> Vec<Vec3> {
    let mut c = mesh.vertices().to_vec();
    c.extend((0..mesh.triangle_count()).map(|t| mesh.centroid(t)));
    c
}

/// Index of the first sample for a given seed.
pub fn seed_candidate(seed: u64, candidate_count: usize) -> usize {
    ChaCha8Rng::seed_from_u64(seed).random_range(0..candidate_count)
}

/// Picks `n` candidate indices: the seed-chosen start, then repeatedly the
/// candidate farthest (Euclidean) from everything chosen so far. Ties go to
/// the lowest candidate index.
pub fn farthest_point_indices(
    candidates: &[Vec3],
    n: usize,
    seed: u64,
) -> Result<Vec<usize>, GeometryError> {
    if n == 0 || n > candidates.len() {
        return Err(GeometryError::TooManySamples {
            requested: n,
            available: candidates.len(),
        });
    }
    let first = seed_candidate(seed, candidates.len());
    let mut chosen = Vec::with_capacity(n);
    chosen.push(first);
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|c| c.distance_squared(candidates[first]))
        .collect();
    while chosen.len() < n {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in nearest.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        chosen.push(best);
        let p = candidates[best];
        for (d, c) in nearest.iter_mut().zip(candidates) {
            *d = d.min(c.distance_squared(p));
        }
    }
    Ok(chosen)
}

/// `n` roughly uniformly spread surface points, deterministic in `seed`.
pub fn farthest_point_sample(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Vec3>, GeometryError> {
    let candidates = sample_candidates(mesh);
    let idx = farthest_point_indices(&candidates, n, seed)?;
    Ok(idx.into_iter().map(|i| candidates[i]).collect())
}
