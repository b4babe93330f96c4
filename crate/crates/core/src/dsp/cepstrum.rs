use std::f64::consts::PI;

use super::types::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};

/// Orthonormal DCT-II basis, `n_out × n` row-major.
fn dct_basis(n: usize, n_out: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(n * n_out);
    for k in 0..n_out {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        basis.extend((0..n).map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()));
    }
    basis
}

/// Per-frame orthonormal DCT-II of log-mel vectors, truncated to `n_coeffs`.
///
/// Coefficient 0 is `sqrt(n_mels)` times the frame's mean log energy.
pub fn mel_cepstrum(mel: &FeatureMatrix, n_coeffs: usize) -> Result<FeatureMatrix> {
    if mel.kind() == FeatureKind::MelCepstrum {
        return Err(Error::invalid("input is already a mel cepstrum"));
    }
    let n = mel.dim();
    if n_coeffs == 0 || n_coeffs > n {
        return Err(Error::invalid(format!(
            "n_coeffs must be in 1..={n}, got {n_coeffs}"
        )));
    }
    let basis = dct_basis(n, n_coeffs);
    let mut data = Vec::with_capacity(mel.n_frames() * n_coeffs);
    for frame in mel.rows() {
        data.extend(
            basis
                .chunks_exact(n)
                .map(|b| b.iter().zip(frame).map(|(c, x)| c * x).sum::<f64>()),
        );
    }
    FeatureMatrix::new(
        data,
        mel.n_frames(),
        n_coeffs,
        mel.frame_rate(),
        FeatureKind::MelCepstrum,
    )
}

/// Inverse of [`mel_cepstrum`]: missing high coefficients are taken as zero.
pub fn inverse_mel_cepstrum(cepstrum: &FeatureMatrix, n_mels: usize) -> Result<FeatureMatrix> {
    let n_coeffs = cepstrum.dim();
    if n_coeffs > n_mels {
        return Err(Error::invalid(format!(
            "{n_coeffs} coefficients cannot come from {n_mels} mel bands"
        )));
    }
    let basis = dct_basis(n_mels, n_coeffs);
    let mut data = Vec::with_capacity(cepstrum.n_frames() * n_mels);
    for coeffs in cepstrum.rows() {
        data.extend((0..n_mels).map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * basis[k * n_mels + i])
                .sum::<f64>()
        }));
    }
    FeatureMatrix::new(
        data,
        cepstrum.n_frames(),
        n_mels,
        cepstrum.frame_rate(),
        FeatureKind::MelSpectrogram,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::Rate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mel_matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let dim = rows[0].len();
        FeatureMatrix::from_rows(&rows, dim, Rate::hz(50), FeatureKind::MelSpectrogram).unwrap()
    }

    #[test]
    fn constant_vector_has_only_energy() {
        let c = -3.25;
        let m = mel_matrix(vec![vec![c; 80]]);
        let ceps = mel_cepstrum(&m, 80).unwrap();
        let row = ceps.row(0);
        assert!((row[0] - c * 80f64.sqrt()).abs() < 1e-12);
        assert!(row[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frame: Vec<f64> = (0..80).map(|_| rng.gen_range(-20.0..5.0)).collect();
        let ceps = mel_cepstrum(&mel_matrix(vec![frame.clone()]), 80).unwrap();
        let n = 80.0;
        for k in 0..80 {
            let mut sum = 0.0;
            for (i, x) in frame.iter().enumerate() {
                sum += x * (std::f64::consts::PI / n * (i as f64 + 0.5) * k as f64).cos();
            }
            let expected = sum
                * if k == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
            assert!((ceps.row(0)[k] - expected).abs() < 1e-9, "coeff {k}");
        }
    }

    #[test]
    fn untruncated_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..80).map(|_| rng.gen_range(-20.0..5.0)).collect())
            .collect();
        let m = mel_matrix(rows);
        let back = inverse_mel_cepstrum(&mel_cepstrum(&m, 80).unwrap(), 80).unwrap();
        for (a, b) in m.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_coefficients_rejected() {
        let m = mel_matrix(vec![vec![0.0; 10]]);
        assert!(mel_cepstrum(&m, 11).is_err());
        assert!(mel_cepstrum(&m, 0).is_err());
    }
}
