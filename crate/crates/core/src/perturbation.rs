//! Moving block bootstrap around a queried window.
//!
//! The window is split into a centered moving average `M` and residual `R`.
//! Each sample swaps `s` pairs of non-overlapping length-`l` residual blocks
//! and adds `M` back, so local temporal structure is kept while the residual
//! multiset is preserved exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub block_length: usize,
    pub block_swap: usize,
    pub sample_count: usize,
    pub ma_window: usize,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            block_length: 5,
            block_swap: 2,
            sample_count: 1000,
            ma_window: 3,
            seed: 42,
        }
    }
}

impl PerturbationConfig {
    /// Checks the config against a window of length `q`.
    pub fn validate(&self, q: usize) -> Result<()> {
        if self.block_length == 0 {
            return Err(Error::Config("block length must be positive".into()));
        }
        if self.sample_count == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        if self.ma_window == 0 || self.ma_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "moving-average window must be a positive odd count, got {}",
                self.ma_window
            )));
        }
        if self.block_length > q {
            return Err(Error::Config(format!(
                "block length {} exceeds window length {q}",
                self.block_length
            )));
        }
        if self.block_swap > 0 && 2 * self.block_length > q {
            return Err(Error::Config(format!(
                "no non-overlapping block pair exists for block length {} in a window of {q}",
                self.block_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub moving_average: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Centered moving average of nominal width `m`, truncated at the edges, and
/// the residual `window - M`.
pub fn decompose(window: &[f64], m: usize) -> Result<Decomposition> {
    if window.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: 1,
            available: 0,
        });
    }
    if m == 0 || m.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "moving-average window must be a positive odd count, got {m}"
        )));
    }
    let q = window.len();
    let half = m / 2;
    let moving_average: Vec<f64> = (0..q)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(q - 1);
            let span = &window[lo..=hi];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect();
    let residual = window
        .iter()
        .zip(&moving_average)
        .map(|(o, m)| o - m)
        .collect();
    Ok(Decomposition {
        moving_average,
        residual,
    })
}

/// 1-based start indices of every contiguous block of length `l` in a
/// residual vector of length `q`: `1..=q-l+1`.
pub fn enumerate_blocks(q: usize, l: usize) -> Vec<usize> {
    if l == 0 || l > q {
        return Vec::new();
    }
    (1..=q - l + 1).collect()
}

/// Generator for draw `draw_index`; each draw owns an independent ChaCha stream.
fn draw_rng(seed: u64, draw_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw_index);
    rng
}

/// Swaps `swaps` random non-overlapping block pairs in place.
fn swap_blocks(residual: &mut [f64], l: usize, swaps: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    if swaps == 0 {
        return Ok(());
    }
    let q = residual.len();
    if l == 0 || 2 * l > q {
        return Err(Error::Config(format!(
            "no non-overlapping block pair exists for block length {l} in a window of {q}"
        )));
    }
    let n_blocks = q - l + 1;
    for _ in 0..swaps {
        let (i, j) = loop {
            let i = rng.gen_range(0..n_blocks);
            let j = rng.gen_range(0..n_blocks);
            if i.abs_diff(j) >= l {
                break (i.min(j), i.max(j));
            }
        };
        let (head, tail) = residual.split_at_mut(j);
        head[i..i + l].swap_with_slice(&mut tail[..l]);
    }
    Ok(())
}

fn sample_from(decomp: &Decomposition, cfg: &PerturbationConfig, draw_index: u64) -> Result<Vec<f64>> {
    let mut residual = decomp.residual.clone();
    let mut rng = draw_rng(cfg.seed, draw_index);
    swap_blocks(&mut residual, cfg.block_length, cfg.block_swap, &mut rng)?;
    Ok(decomp
        .moving_average
        .iter()
        .zip(&residual)
        .map(|(m, r)| m + r)
        .collect())
}

/// One bootstrap sample; a pure function of `(window, cfg, draw_index)`.
pub fn mbb_sample(window: &[f64], cfg: &PerturbationConfig, draw_index: u64) -> Result<Vec<f64>> {
    cfg.validate(window.len())?;
    if cfg.block_swap == 0 {
        return Ok(window.to_vec());
    }
    let decomp = decompose(window, cfg.ma_window)?;
    sample_from(&decomp, cfg, draw_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Vec<f64>>,
    pub config: PerturbationConfig,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// FNV-1a over the bit patterns of every value; equal iff bitwise-identical samples
    /// (up to hash collisions).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in &self.samples {
            for v in s {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    /// One sample per line, comma-separated, shortest round-trip decimal form.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            let line: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `p` samples; sample `i` is `mbb_sample(window, cfg, i)`.
pub fn generate_samples(window: &[f64], cfg: &PerturbationConfig) -> Result<SampleSet> {
    cfg.validate(window.len())?;
    let samples = if cfg.block_swap == 0 {
        vec![window.to_vec(); cfg.sample_count]
    } else {
        let decomp = decompose(window, cfg.ma_window)?;
        (0..cfg.sample_count as u64)
            .into_par_iter()
            .map(|i| sample_from(&decomp, cfg, i))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SampleSet {
        samples,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    fn window12() -> Vec<f64> {
        (0..12)
            .map(|i| {
                let t = i as f64;
                0.5 + 0.03 * t + 0.2 * (t * 0.9).sin() + 0.05 * (t * 2.7).cos()
            })
            .collect()
    }

    fn cfg(l: usize, s: usize, p: usize, seed: u64) -> PerturbationConfig {
        PerturbationConfig {
            block_length: l,
            block_swap: s,
            sample_count: p,
            ma_window: 3,
            seed,
        }
    }

    #[test]
    fn decompose_constant() {
        let d = decompose(&[7.0; 4], 3).unwrap();
        assert_eq!(d.moving_average, vec![7.0; 4]);
        assert_eq!(d.residual, vec![0.0; 4]);
    }

    #[test]
    fn decompose_three_points() {
        // Independent recomputation: edge windows are truncated to the
        // available neighbours, interior uses the full width.
        let w = [10.0, 20.0, 30.0];
        let expect_m = [(10.0 + 20.0) / 2.0, (10.0 + 20.0 + 30.0) / 3.0, (20.0 + 30.0) / 2.0];
        assert_eq!(expect_m, [15.0, 20.0, 25.0]);
        let d = decompose(&w, 3).unwrap();
        assert_eq!(d.moving_average, expect_m.to_vec());
        assert_eq!(d.residual, vec![-5.0, 0.0, 5.0]);
    }

    #[test]
    fn decompose_identity_width() {
        let w = window12();
        let d = decompose(&w, 1).unwrap();
        assert_eq!(d.moving_average, w);
        assert!(d.residual.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn decompose_rejects_even_width() {
        assert!(decompose(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn block_counts() {
        assert_eq!(enumerate_blocks(12, 5).len(), 8);
        assert_eq!(enumerate_blocks(6, 6), vec![1]);
        assert_eq!(enumerate_blocks(6, 1), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn zero_swaps_is_identity() {
        let w = window12();
        assert_eq!(mbb_sample(&w, &cfg(5, 0, 1, 1), 0).unwrap(), w);
        let set = generate_samples(&w, &cfg(5, 0, 3, 1)).unwrap();
        assert!(set.samples.iter().all(|s| *s == w));
    }

    #[test]
    fn swap_preserves_residual_multiset() {
        let w = window12();
        let c = cfg(5, 2, 1, 42);
        let d = decompose(&w, 3).unwrap();
        for draw in 0..50 {
            let s = mbb_sample(&w, &c, draw).unwrap();
            let r: Vec<f64> = s.iter().zip(&d.moving_average).map(|(a, m)| a - m).collect();
            for (a, b) in sorted(r).iter().zip(sorted(d.residual.clone())) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn same_draw_same_sample() {
        let w = window12();
        let c = cfg(5, 2, 1, 42);
        assert_eq!(mbb_sample(&w, &c, 7).unwrap(), mbb_sample(&w, &c, 7).unwrap());
    }

    #[test]
    fn generate_matches_individual_draws() {
        let w = window12();
        let c = cfg(4, 3, 20, 9);
        let set = generate_samples(&w, &c).unwrap();
        for (i, s) in set.samples.iter().enumerate() {
            assert_eq!(*s, mbb_sample(&w, &c, i as u64).unwrap());
        }
    }

    #[test]
    fn config_rejects_overlapping_only() {
        let w = window12();
        assert!(matches!(mbb_sample(&w, &cfg(7, 1, 1, 0), 0), Err(Error::Config(_))));
        assert!(mbb_sample(&w, &cfg(6, 1, 1, 0), 0).is_ok());
        // no swaps: any l <= q is fine
        assert!(mbb_sample(&w, &cfg(12, 0, 1, 0), 0).is_ok());
        assert!(mbb_sample(&w, &cfg(13, 0, 1, 0), 0).is_err());
    }

    #[test]
    fn csv_export_one_line_per_sample() {
        let set = generate_samples(&window12(), &cfg(5, 2, 4, 3)).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let parsed: Vec<f64> = lines[0].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(parsed, set.samples[0]);
    }

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    #[test]
    fn locality_grows_with_swaps() {
        let w = window12();
        let mut medians = Vec::new();
        for s in 0..=4 {
            let per_seed: Vec<f64> = (0..5)
                .map(|seed| {
                    let set = generate_samples(&w, &cfg(3, s, 200, seed)).unwrap();
                    set.samples.iter().map(|x| euclid(x, &w)).sum::<f64>() / set.len() as f64
                })
                .collect();
            medians.push(median(per_seed));
        }
        for pair in medians.windows(2) {
            assert!(pair[0] <= pair[1], "{medians:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn samples_keep_length_and_multiset(
            w in proptest::collection::vec(-10f64..10.0, 6..24),
            l in 1usize..4,
            s in 0usize..5,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let c = cfg(l, s, 8, seed);
            let set = generate_samples(&w, &c).unwrap();
            let d = decompose(&w, 3).unwrap();
            let want = sorted(d.residual.clone());
            for sample in &set.samples {
                proptest::prop_assert_eq!(sample.len(), w.len());
                let r: Vec<f64> = sample.iter().zip(&d.moving_average).map(|(a, m)| a - m).collect();
                for (a, b) in sorted(r).iter().zip(&want) {
                    proptest::prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
