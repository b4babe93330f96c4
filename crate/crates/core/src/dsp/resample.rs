//! Band-limited sample-rate conversion with a polyphase windowed-sinc filter.

use std::f64::consts::PI;

use super::types::{check_finite, Waveform};
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel kept on each side of the centre tap.
const ZERO_CROSSINGS: f64 = 24.0;
/// Passband edge as a fraction of the narrower Nyquist frequency.
const ROLLOFF: f64 = 0.945;
const KAISER_BETA: f64 = 8.6;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

struct PolyphaseFilter {
    /// One row of taps per output phase; tap `j` multiplies input `base - half + j`.
    phases: Vec<Vec<f64>>,
    half: i64,
}

impl PolyphaseFilter {
    fn design(up: u64, down: u64) -> Self {
        let cutoff = ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half_width = ZERO_CROSSINGS / cutoff;
        let half = half_width.ceil() as i64;
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (-half..=half + 1)
                    .map(|j| {
                        let x = j as f64 - frac;
                        let r = x / half_width;
                        if r.abs() > 1.0 {
                            0.0
                        } else {
                            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
                            cutoff * sinc(cutoff * x) * window
                        }
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Self { phases, half }
    }
}

/// Converts `w` to `target_rate`.
///
/// The output holds `ceil(len * target / source)` samples. Equal rates return
/// the input unchanged.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    check_finite(w.samples())?;
    let source_rate = w.sample_rate();
    if source_rate == target_rate {
        return Ok(w.clone());
    }
    let g = gcd(u64::from(source_rate), u64::from(target_rate));
    let up = u64::from(target_rate) / g;
    let down = u64::from(source_rate) / g;
    let input = w.samples();
    let n_in = input.len() as u64;
    let n_out = (n_in * up).div_ceil(down) as usize;

    let filter = PolyphaseFilter::design(up, down);
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let taps = &filter.phases[(pos % up) as usize];
        let start = base - filter.half;
        let mut acc = 0.0;
        for (j, &tap) in taps.iter().enumerate() {
            let i = start + j as i64;
            if i >= 0 && (i as u64) < n_in {
                acc += tap * input[i as usize];
            }
        }
        out.push(acc);
    }
    Waveform::new(out, target_rate)
}
