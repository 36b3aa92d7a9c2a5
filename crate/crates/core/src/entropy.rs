//! Random sources.
//!
//! Every operation that needs randomness takes the source explicitly.
//! Byte-oriented sources are any [`RngCore`]; operations that need bounded
//! integers (the shuffle) go through [`UniformSource`], which tests can stub
//! with scripted draws.

use rand_core::RngCore;

/// The random source failed to produce output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("random source failed")]
pub struct EntropyError;

/// Fill `buf` from `rng`, mapping failures to [`EntropyError`].
pub fn fill<R: RngCore + ?Sized>(rng: &mut R, buf: &mut [u8]) -> Result<(), EntropyError> {
    rng.try_fill_bytes(buf).map_err(|_| EntropyError)
}

/// A source of uniform integers in a requested inclusive range.
pub trait UniformSource {
    /// Draw `j` uniformly from `0..=upper`.
    fn uniform_inclusive(&mut self, upper: usize) -> Result<usize, EntropyError>;
}

impl<R: RngCore + ?Sized> UniformSource for R {
    fn uniform_inclusive(&mut self, upper: usize) -> Result<usize, EntropyError> {
        if upper == 0 {
            return Ok(0);
        }
        let span = upper as u64 + 1;
        // Rejection zone keeps the draw unbiased.
        let zone = u64::MAX - (u64::MAX % span);
        loop {
            let mut b = [0u8; 8];
            fill(self, &mut b)?;
            let v = u64::from_le_bytes(b);
            if v < zone {
                return Ok((v % span) as usize);
            }
        }
    }
}
