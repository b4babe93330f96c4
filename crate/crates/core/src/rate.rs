use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exact rational rate in Hz, kept in lowest terms.
///
/// Frame rates such as 16000/480 = 100/3 Hz are not representable as
/// floats, so they travel as reduced fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid(format!(
                "rate must be positive, got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn hz(rate: u32) -> Self {
        Self::new(u64::from(rate.max(1)), 1).expect("non-zero")
    }

    /// Frame rate obtained by hopping `hop` samples at `sample_rate`.
    pub fn from_hop(sample_rate: u32, hop: usize) -> Result<Self> {
        Self::new(u64::from(sample_rate), hop as u64)
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{} Hz", self.num)
        } else {
            write!(f, "{}/{} Hz", self.num, self.den)
        }
    }
}
