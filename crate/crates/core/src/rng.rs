//! Keyed random streams.
//!
//! Every random quantity in the engine is drawn from a ChaCha8 stream whose
//! 256-bit key is the concatenation of four little-endian `u64` words:
//! the scenario seed, a [`Domain`] tag, and two indices (for example the
//! sweep point and the trial). Any trial can therefore be regenerated on
//! its own, in any order and on any thread.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for. Distinct domains never share keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Channels = 1,
    PilotNoise = 2,
    DataNoise = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: Domain,
    pub major: u64,
    pub minor: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: Domain, major: u64, minor: u64) -> Self {
        Self {
            seed,
            domain,
            major,
            minor,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [self.seed, self.domain as u64, self.major, self.minor];
        for (chunk, word) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// One draw from CN(0, `variance`).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// `len` i.i.d. draws from CN(0, `variance`).
pub fn complex_gaussian_vector<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    variance: f64,
) -> DVector<Complex64> {
    DVector::from_iterator(len, (0..len).map(|_| complex_gaussian(rng, variance)))
}
