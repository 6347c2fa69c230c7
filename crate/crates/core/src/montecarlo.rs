//! Reproducible Monte-Carlo averaging.
//!
//! Samples are split into a fixed number of batches; batch `b` of stream `s`
//! draws from its own ChaCha8 generator keyed by `(seed, s)` with stream id
//! `b`. Batches are reduced in index order, so results depend only on
//! `(seed, samples, batches)` and not on the thread count.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Result};

pub const DEFAULT_SAMPLES: usize = 200_000;
pub const DEFAULT_BATCHES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig {
            samples,
            batches: DEFAULT_BATCHES,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return input("Monte-Carlo sample count must be positive");
        }
        if self.batches == 0 {
            return input("Monte-Carlo batch count must be positive");
        }
        Ok(())
    }

    fn batch_sizes(&self) -> Vec<usize> {
        let b = self.batches.min(self.samples);
        let base = self.samples / b;
        let extra = self.samples % b;
        (0..b).map(|i| base + usize::from(i < extra)).collect()
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLES, 42)
    }
}

/// Generator for batch `batch` of stream `stream`.
pub fn stream_rng(seed: u64, stream: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream)));
    rng.set_stream(batch);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: Complex64,
    /// Standard error of `mean` from the spread of batch means.
    pub std_err: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: Complex64) -> Self {
        Estimate {
            mean: value,
            std_err: 0.0,
            samples: 0,
        }
    }
}

/// Mean of `draw` over `cfg.samples` draws.
pub fn estimate<F>(cfg: &McConfig, stream: u64, draw: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha8Rng) -> Complex64 + Sync,
{
    let vector = estimate_many(cfg, stream, 1, |rng, out| out[0] = draw(rng))?;
    Ok(vector[0])
}

/// Means of a vector-valued draw; `draw` writes `width` values per sample.
/// Useful when several estimators share the same random samples.
pub fn estimate_many<F>(cfg: &McConfig, stream: u64, width: usize, draw: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut ChaCha8Rng, &mut [Complex64]) + Sync,
{
    cfg.validate()?;
    let sizes = cfg.batch_sizes();
    let sums: Vec<Vec<Complex64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| {
            let mut rng = stream_rng(cfg.seed, stream, b as u64);
            let mut acc = vec![Complex64::new(0.0, 0.0); width];
            let mut buf = vec![Complex64::new(0.0, 0.0); width];
            for _ in 0..size {
                draw(&mut rng, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, v)| *a += v);
            }
            acc
        })
        .collect();

    let total = cfg.samples as f64;
    let nb = sizes.len() as f64;
    Ok((0..width)
        .map(|w| {
            let mean = sums.iter().map(|s| s[w]).sum::<Complex64>() / total;
            let std_err = if sizes.len() > 1 {
                let var = sums
                    .iter()
                    .zip(&sizes)
                    .map(|(s, &size)| (s[w] / size as f64 - mean).norm_sqr())
                    .sum::<f64>()
                    / (nb - 1.0);
                (var / nb).sqrt()
            } else {
                f64::NAN
            };
            Estimate {
                mean,
                std_err,
                samples: cfg.samples,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn uniform_mean_and_error() {
        let cfg = McConfig::new(100_000, 7);
        let e = estimate(&cfg, 0, |rng| Complex64::new(rng.random::<f64>(), 0.0)).unwrap();
        let sigma = (1.0f64 / 12.0 / 100_000.0).sqrt();
        assert!((e.mean.re - 0.5).abs() < 4.0 * sigma);
        assert!((e.std_err / sigma - 1.0).abs() < 0.3);
    }

    #[test]
    fn determinism_and_stream_separation() {
        let cfg = McConfig::new(1000, 3);
        let f = |rng: &mut ChaCha8Rng| Complex64::new(rng.random::<f64>(), rng.random::<f64>());
        let a = estimate(&cfg, 1, f).unwrap();
        let b = estimate(&cfg, 1, f).unwrap();
        let c = estimate(&cfg, 2, f).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mean, c.mean);
        assert!(estimate(&McConfig::new(0, 1), 0, f).is_err());
    }

    #[test]
    fn fewer_samples_than_batches() {
        let cfg = McConfig::new(5, 1);
        let e = estimate(&cfg, 0, |_| Complex64::new(2.0, 0.0)).unwrap();
        assert_eq!(e.mean.re, 2.0);
        assert_eq!(e.std_err, 0.0);
    }
}
