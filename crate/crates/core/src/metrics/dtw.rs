//! Dynamic time warping with steps (1,0), (0,1) and (1,1).

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Index pairs from `(0, 0)` to `(n − 1, m − 1)`.
    pub path: Vec<(usize, usize)>,
    /// Sum of the frame distances along the path.
    pub cost: f64,
}

impl Alignment {
    pub fn mean_cost(&self) -> f64 {
        self.cost / self.path.len() as f64
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimal-cost alignment of `x` and `y` under `distance`.
pub fn dtw_align<F>(x: &FeatureMatrix, y: &FeatureMatrix, distance: F) -> Result<Alignment>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    dtw_by(x.n_frames(), y.n_frames(), |i, j| {
        distance(x.row(i), y.row(j))
    })
}

/// [`dtw_align`] over index pairs, with `distance(i, j)` the cost of pairing
/// frame `i` of the first sequence with frame `j` of the second.
///
/// Among paths of equal cost the shorter one wins; remaining ties prefer the
/// diagonal step, then the (1,0) step. Because the mean cost of a path is its
/// cost over its length, the mean is unchanged when the arguments are swapped.
pub fn dtw_by<F>(n: usize, m: usize, distance: F) -> Result<Alignment>
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 || m == 0 {
        return Err(Error::Empty("sequence for alignment".into()));
    }
    const DIAG: u8 = 0;
    const UP: u8 = 1;
    const LEFT: u8 = 2;
    let mut cost = vec![0.0; n * m];
    let mut len = vec![0usize; n * m];
    let mut step = vec![DIAG; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = distance(i, j);
            if !d.is_finite() || d < 0.0 {
                return Err(Error::invalid(format!(
                    "frame distance at ({i}, {j}) is {d}"
                )));
            }
            let at = i * m + j;
            if i == 0 && j == 0 {
                cost[at] = d;
                len[at] = 1;
                continue;
            }
            let mut candidates = Vec::with_capacity(3);
            if i > 0 && j > 0 {
                candidates.push((DIAG, (i - 1) * m + j - 1));
            }
            if i > 0 {
                candidates.push((UP, (i - 1) * m + j));
            }
            if j > 0 {
                candidates.push((LEFT, i * m + j - 1));
            }
            let mut best: Option<(f64, usize, u8)> = None;
            for (dir, from) in candidates {
                let (c, l) = (cost[from], len[from]);
                let better = match best {
                    None => true,
                    Some((bc, bl, _)) => c < bc || (c == bc && l < bl),
                };
                if better {
                    best = Some((c, l, dir));
                }
            }
            let (c, l, dir) = best.expect("cell has a predecessor");
            cost[at] = c + d;
            len[at] = l + 1;
            step[at] = dir;
        }
    }
    let mut path = Vec::with_capacity(len[n * m - 1]);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        path.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        match step[i * m + j] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            UP => i -= 1,
            _ => j -= 1,
        }
    }
    path.reverse();
    Ok(Alignment {
        path,
        cost: cost[n * m - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FeatureKind;
    use crate::rate::Rate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows, rows[0].len(), Rate::hz(50), FeatureKind::MelCepstrum)
            .unwrap()
    }

    /// Minimum over every monotone path, enumerated recursively.
    fn brute_force(d: &[Vec<f64>]) -> f64 {
        fn walk(d: &[Vec<f64>], i: usize, j: usize) -> f64 {
            let (n, m) = (d.len(), d[0].len());
            let here = d[i][j];
            if i == n - 1 && j == m - 1 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < n {
                best = best.min(walk(d, i + 1, j));
            }
            if j + 1 < m {
                best = best.min(walk(d, i, j + 1));
            }
            if i + 1 < n && j + 1 < m {
                best = best.min(walk(d, i + 1, j + 1));
            }
            here + best
        }
        walk(d, 0, 0)
    }

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn identical_inputs_align_diagonally() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = matrix(&random_rows(&mut rng, 7, 3));
        let a = dtw_align(&x, &x, euclidean).unwrap();
        assert_eq!(a.cost, 0.0);
        assert_eq!(a.path, (0..7).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn four_by_three_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = random_rows(&mut rng, 4, 2);
            let y = random_rows(&mut rng, 3, 2);
            let d: Vec<Vec<f64>> = x
                .iter()
                .map(|a| y.iter().map(|b| euclidean(a, b)).collect())
                .collect();
            let got = dtw_align(&matrix(&x), &matrix(&y), euclidean).unwrap().cost;
            assert!((got - brute_force(&d)).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_final_frame_is_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = random_rows(&mut rng, 5, 4);
        let y = random_rows(&mut rng, 6, 4);
        // the appended pair (x_last, y_last) only costs nothing when the ends agree
        x[4] = y[5].clone();
        let mut y2 = y.clone();
        y2.push(y.last().unwrap().clone());
        let a = dtw_align(&matrix(&x), &matrix(&y), euclidean).unwrap().cost;
        let b = dtw_align(&matrix(&x), &matrix(&y2), euclidean)
            .unwrap()
            .cost;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn path_is_monotone_with_unit_steps() {
        let a = dtw_by(5, 8, |i, j| ((i * 3 + j * 7) % 5) as f64).unwrap();
        assert_eq!(a.path[0], (0, 0));
        assert_eq!(*a.path.last().unwrap(), (4, 7));
        for w in a.path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
        let sum: f64 = a
            .path
            .iter()
            .map(|&(i, j)| ((i * 3 + j * 7) % 5) as f64)
            .sum();
        assert_eq!(sum, a.cost);
    }

    #[test]
    fn ties_prefer_diagonal() {
        let a = dtw_by(3, 3, |_, _| 0.0).unwrap();
        assert_eq!(a.path, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(dtw_by(0, 3, |_, _| 0.0).is_err());
        let x = matrix(&[vec![0.0, 1.0]]);
        let y = matrix(&[vec![0.0]]);
        assert!(dtw_align(&x, &y, euclidean).is_err());
    }

    proptest! {
        #[test]
        fn matches_enumeration_up_to_six(n in 1usize..=6, m in 1usize..=6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
            let got = dtw_by(n, m, |i, j| d[i][j]).unwrap().cost;
            prop_assert!((got - brute_force(&d)).abs() < 1e-12);
        }

        #[test]
        fn mean_cost_symmetric(n in 1usize..=7, m in 1usize..=7, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // quantized distances make exact ties common
            let d: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0..3) as f64).collect()).collect();
            let ab = dtw_by(n, m, |i, j| d[i][j]).unwrap();
            let ba = dtw_by(m, n, |j, i| d[i][j]).unwrap();
            prop_assert_eq!(ab.cost, ba.cost);
            prop_assert_eq!(ab.mean_cost(), ba.mean_cost());
        }
    }
}
