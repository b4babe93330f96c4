//! Deterministic k-means: k-means++ seeding and Lloyd iterations with
//! dead-code reseeding.

use rand::Rng;
use rayon::prelude::*;

/// Squared Euclidean distance, summed term by term so that exact ties stay exact.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest index.
pub fn nearest(centroids: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding over row-major `data`.
///
/// Each new centre is drawn with probability proportional to the squared
/// distance from the closest centre chosen so far.
pub fn kmeans_plus_plus<R: Rng>(data: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = data.len() / dim;
    assert!(n > 0 && k > 0, "k-means++ needs data and k >= 1");
    let first = data[rng.gen_range(0..n) * dim..][..dim].to_vec();
    extend_plus_plus(data, dim, k, first, rng)
}

/// Completes `initial` (whole centroids, at least one) to `k` centroids by
/// k-means++ sampling.
pub fn extend_plus_plus<R: Rng>(
    data: &[f64],
    dim: usize,
    k: usize,
    initial: Vec<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let n = data.len() / dim;
    assert!(!initial.is_empty() && initial.len().is_multiple_of(dim) && initial.len() / dim <= k);
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut closest: Vec<f64> = (0..n).map(|i| nearest(&initial, dim, row(i)).1).collect();
    let mut centroids = initial;
    centroids.reserve(k * dim - centroids.len());
    while centroids.len() < k * dim {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        let newest = &centroids[start..start + dim];
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(squared_distance(row(i), newest));
        }
    }
    centroids
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub usage_counts: Vec<u64>,
    /// Mean over frames of the squared distance to the assigned centroid.
    pub mse: f64,
    pub iterations: usize,
    pub reseeded: usize,
}

fn assign(data: &[f64], dim: usize, centroids: &[f64]) -> Vec<(usize, f64)> {
    data.par_chunks_exact(dim)
        .map(|x| nearest(centroids, dim, x))
        .collect()
}

/// Lloyd's algorithm from `init`, stopping when assignments no longer change
/// or after `max_iters` centroid updates.
///
/// A centroid left without frames after an update is moved onto the frame
/// with the largest error under the updated centroids. Accumulation runs in
/// frame order, so the result does not depend on the thread count.
pub fn lloyd(data: &[f64], dim: usize, init: Vec<f64>, max_iters: usize) -> KMeansFit {
    lloyd_pinned(data, dim, init, max_iters, 0)
}

/// [`lloyd`] with the first `pinned` centroids held in place: they are
/// neither updated nor reseeded.
pub fn lloyd_pinned(
    data: &[f64],
    dim: usize,
    init: Vec<f64>,
    max_iters: usize,
    pinned: usize,
) -> KMeansFit {
    let n = data.len() / dim;
    let k = init.len() / dim;
    let mut centroids = init;
    let mut nearest_now = assign(data, dim, &centroids);
    let mut iterations = 0;
    let mut reseeded = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0u64; k];
        for (x, &(j, _)) in data.chunks_exact(dim).zip(&nearest_now) {
            counts[j] += 1;
            sums[j * dim..(j + 1) * dim]
                .iter_mut()
                .zip(x)
                .for_each(|(s, v)| *s += v);
        }
        for j in pinned..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for (c, s) in centroids[j * dim..(j + 1) * dim]
                    .iter_mut()
                    .zip(&sums[j * dim..(j + 1) * dim])
                {
                    *c = s * inv;
                }
            }
        }
        let dead: Vec<usize> = (pinned..k).filter(|&j| counts[j] == 0).collect();
        if !dead.is_empty() {
            let mut errors: Vec<(usize, f64)> = data
                .chunks_exact(dim)
                .zip(&nearest_now)
                .enumerate()
                .map(|(i, (x, &(j, _)))| {
                    (i, squared_distance(x, &centroids[j * dim..(j + 1) * dim]))
                })
                .collect();
            errors.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (&j, &(i, _)) in dead.iter().zip(&errors) {
                centroids[j * dim..(j + 1) * dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
                reseeded += 1;
            }
        }
        let next = assign(data, dim, &centroids);
        let unchanged = next.iter().zip(&nearest_now).all(|(a, b)| a.0 == b.0);
        nearest_now = next;
        if unchanged && dead.is_empty() {
            break;
        }
    }
    let mut usage_counts = vec![0u64; k];
    for &(j, _) in &nearest_now {
        usage_counts[j] += 1;
    }
    let mse = if n == 0 {
        0.0
    } else {
        nearest_now.iter().map(|&(_, d)| d).sum::<f64>() / n as f64
    };
    KMeansFit {
        centroids,
        assignments: nearest_now.into_iter().map(|(j, _)| j).collect(),
        usage_counts,
        mse,
        iterations,
        reseeded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Textbook Lloyd iteration written without any shared helpers.
    fn oracle_lloyd(points: &[[f64; 2]], init: &[[f64; 2]], max_iters: usize) -> Vec<usize> {
        let assign = |cs: &[[f64; 2]]| -> Vec<usize> {
            points
                .iter()
                .map(|p| {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (j, c) in cs.iter().enumerate() {
                        let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                        if d < best_d {
                            best_d = d;
                            best = j;
                        }
                    }
                    best
                })
                .collect()
        };
        let mut cs = init.to_vec();
        let mut labels = assign(&cs);
        for _ in 0..max_iters {
            for (j, c) in cs.iter_mut().enumerate() {
                let members: Vec<&[f64; 2]> = points
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == j)
                    .map(|(p, _)| p)
                    .collect();
                assert!(
                    !members.is_empty(),
                    "oracle fixture must not produce empty clusters"
                );
                let m = members.len() as f64;
                *c = [
                    members.iter().map(|p| p[0]).sum::<f64>() / m,
                    members.iter().map(|p| p[1]).sum::<f64>() / m,
                ];
            }
            let next = assign(&cs);
            if next == labels {
                break;
            }
            labels = next;
        }
        labels
    }

    #[test]
    fn matches_brute_force_lloyd_from_same_init() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centres = [[0.0, 0.0], [5.0, 5.0], [-4.0, 6.0], [6.0, -3.0]];
            let points: Vec<[f64; 2]> = (0..64)
                .map(|i| {
                    let c = centres[i % 4];
                    [
                        c[0] + rng.gen_range(-2.5..2.5),
                        c[1] + rng.gen_range(-2.5..2.5),
                    ]
                })
                .collect();
            let flat: Vec<f64> = points.iter().flatten().copied().collect();
            let init = kmeans_plus_plus(&flat, 2, 4, &mut rng);
            let init_pts: Vec<[f64; 2]> = init.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            let fit = lloyd(&flat, 2, init, 50);
            assert_eq!(fit.reseeded, 0);
            assert_eq!(
                fit.assignments,
                oracle_lloyd(&points, &init_pts, 50),
                "seed {seed}"
            );
            assert_eq!(fit.usage_counts.iter().sum::<u64>(), 64);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let centroids = vec![
            9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 1.0, 0.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, -1.0, 0.0,
        ];
        assert_eq!(nearest(&centroids, 2, &[0.0, 0.0]), (3, 1.0));
    }

    #[test]
    fn dead_codes_are_reseeded() {
        // two identical initial centroids: the second starts empty
        let data = vec![0.0, 0.1, 10.0, 10.1, 20.0];
        let fit = lloyd(&data, 1, vec![0.0, 0.0], 10);
        assert!(fit.reseeded >= 1);
        assert!(fit.usage_counts.iter().all(|&c| c > 0));
        assert_eq!(fit.usage_counts.iter().sum::<u64>(), 5);
    }

    #[test]
    fn pinned_centroids_stay_put() {
        let data = vec![-1.0, -0.5, 4.0, 5.0, 6.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init = extend_plus_plus(&data, 1, 3, vec![0.0], &mut rng);
        assert_eq!(init[0], 0.0);
        let fit = lloyd_pinned(&data, 1, init, 20, 1);
        assert_eq!(fit.centroids[0], 0.0);
        assert_eq!(fit.usage_counts.iter().sum::<u64>(), 5);
    }

    #[test]
    fn plus_plus_picks_distinct_points_when_available() {
        let data: Vec<f64> = (0..8).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = kmeans_plus_plus(&data, 1, 8, &mut rng);
        c.sort_by(f64::total_cmp);
        assert_eq!(c, data);
    }
}
