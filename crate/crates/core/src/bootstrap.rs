//! Non-overlapping block bootstrap for the distance-covariance test.
//!
//! The observed series are cut into `N = ⌊n/d⌋` blocks of length `d`.
//! Each replicate redraws `N` X-blocks and, independently, `N` Y-blocks
//! with replacement and re-pairs them, destroying cross-series dependence
//! while preserving the within-series block structure. The test rejects
//! independence when the observed scaled statistic exceeds the upper
//! empirical quantile of the replicate statistics.
//!
//! Determinism contract: replicate `b` draws from `substream(base_seed, b)`
//! and nothing else, so results are independent of execution order and
//! worker count. Within a replicate, all `N` X-block indices are drawn
//! first, then all `N` Y-block indices.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcov::{DcovEngine, DcovError};
use crate::rng::substream;
use crate::sample::{partition_blocks, vectorize, BlockPartition, PairedSample, SampleError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("gamma must lie strictly between 0 and 0.5, got {gamma}")]
    GammaOutOfRange { gamma: f64 },
    #[error("block length rule needs n >= 2, got n={n}")]
    SampleTooSmall { n: usize },
    #[error("alpha must lie strictly between 0 and 1, got {alpha}")]
    AlphaOutOfRange { alpha: f64 },
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("vectorize stride must be at least 1")]
    ZeroStride,
    #[error("bootstrap degenerate: single block (n={n}, d={d})")]
    Degenerate { n: usize, d: usize },
    #[error("empty replicate statistics")]
    EmptyStats,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Dcov(#[from] DcovError),
}

/// How the block length `d` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLengthRule {
    /// `d = max(1, ⌊(ln n)^γ⌋)` with `0 < γ < 1/2`.
    Gamma(f64),
    /// Caller-fixed block length.
    Explicit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub block_len: BlockLengthRule,
    /// Number of bootstrap replicates B.
    pub replicates: usize,
    /// Test level; the critical value is the upper alpha-quantile.
    pub alpha: f64,
    pub base_seed: u64,
    /// Group this many consecutive observations into one before testing
    /// (catches cross-lag dependence); 1 leaves the sample unchanged.
    pub vectorize_stride: usize,
}

impl BootstrapConfig {
    pub fn from_gamma(gamma: f64, replicates: usize, alpha: f64, base_seed: u64) -> Self {
        Self {
            block_len: BlockLengthRule::Gamma(gamma),
            replicates,
            alpha,
            base_seed,
            vectorize_stride: 1,
        }
    }

    pub fn with_block_len(d: usize, replicates: usize, alpha: f64, base_seed: u64) -> Self {
        Self {
            block_len: BlockLengthRule::Explicit(d),
            replicates,
            alpha,
            base_seed,
            vectorize_stride: 1,
        }
    }

    pub fn stride(mut self, j: usize) -> Self {
        self.vectorize_stride = j;
        self
    }

    fn validate(&self) -> Result<(), BootstrapError> {
        if let BlockLengthRule::Gamma(g) = self.block_len {
            if !(g > 0.0 && g < 0.5) {
                return Err(BootstrapError::GammaOutOfRange { gamma: g });
            }
        }
        if self.replicates == 0 {
            return Err(BootstrapError::NoReplicates);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BootstrapError::AlphaOutOfRange { alpha: self.alpha });
        }
        if self.vectorize_stride == 0 {
            return Err(BootstrapError::ZeroStride);
        }
        Ok(())
    }

    fn derive_block_len(&self, n: usize) -> Result<usize, BootstrapError> {
        match self.block_len {
            BlockLengthRule::Gamma(g) => block_length(n, g),
            BlockLengthRule::Explicit(d) => Ok(d),
        }
    }
}

/// Result of one independence test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome<T> {
    /// Observed scaled statistic `m·dcov` on the retained `m = N·d` rows.
    pub statistic: T,
    /// The B replicate statistics, in replicate order.
    pub replicate_stats: Vec<T>,
    /// Upper alpha-quantile of the replicate statistics (critical value).
    pub quantile: T,
    /// `(1 + #{replicates ≥ statistic}) / (B + 1)`.
    pub p_value: f64,
    /// True iff statistic exceeds the quantile strictly.
    pub reject: bool,
    /// Block length actually used.
    pub d_used: usize,
    /// Number of blocks N actually used.
    pub n_used: usize,
}

/// Block length `d = max(1, ⌊(ln n)^γ⌋)`.
pub fn block_length(n: usize, gamma: f64) -> Result<usize, BootstrapError> {
    if n < 2 {
        return Err(BootstrapError::SampleTooSmall { n });
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(BootstrapError::GammaOutOfRange { gamma });
    }
    let d = (n as f64).ln().powf(gamma).floor() as usize;
    Ok(d.max(1))
}

/// Draws the replicate's block indices: `nblocks` X-block indices first,
/// then `nblocks` Y-block indices, each uniform with replacement.
///
/// This is the single definition of the per-replicate draw order; every
/// resampling path goes through it.
pub fn draw_block_indices(nblocks: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let kx: Vec<usize> = (0..nblocks).map(|_| rng.random_range(0..nblocks)).collect();
    let ky: Vec<usize> = (0..nblocks).map(|_| rng.random_range(0..nblocks)).collect();
    (kx, ky)
}

/// Materializes one bootstrap resample: output row `m·d + i` pairs
/// coordinate `i` of the m-th drawn X-block with coordinate `i` of the
/// m-th drawn Y-block.
pub fn resample_blocks<T: Scalar>(p: &BlockPartition<T>, rng: &mut impl Rng) -> PairedSample<T> {
    let nblocks = p.block_count();
    let (kx, ky) = draw_block_indices(nblocks, rng);
    let mut xs = Vec::with_capacity(nblocks * p.block_len() * p.x_dim());
    let mut ys = Vec::with_capacity(nblocks * p.block_len() * p.y_dim());
    for m in 0..nblocks {
        xs.extend_from_slice(p.x_block(kx[m]));
        ys.extend_from_slice(p.y_block(ky[m]));
    }
    PairedSample::new(p.x_dim(), p.y_dim(), xs, ys).expect("blocks are finite and well-shaped")
}

/// Row-index form of one resample against the retained prefix, for the
/// gather-based fast path. Identical pairing to [`resample_blocks`].
fn resample_row_indices(nblocks: usize, d: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let (kx, ky) = draw_block_indices(nblocks, rng);
    let mut ix = Vec::with_capacity(nblocks * d);
    let mut iy = Vec::with_capacity(nblocks * d);
    for m in 0..nblocks {
        for i in 0..d {
            ix.push(kx[m] * d + i);
            iy.push(ky[m] * d + i);
        }
    }
    (ix, iy)
}

struct BootstrapRun<T> {
    statistic: T,
    replicate_stats: Vec<T>,
    d: usize,
    nblocks: usize,
}

fn run_bootstrap<T: Scalar>(
    working: &PairedSample<T>,
    cfg: &BootstrapConfig,
) -> Result<BootstrapRun<T>, BootstrapError> {
    cfg.validate()?;
    let n = working.len();
    let d = cfg.derive_block_len(n)?;
    let partition = partition_blocks(working, d)?;
    let nblocks = partition.block_count();
    if nblocks < 2 {
        return Err(BootstrapError::Degenerate { n, d });
    }
    let retained = partition.flatten();
    let m = retained.len();
    let engine = DcovEngine::new(&retained)?;
    let scale = T::from_count(m);
    let statistic = scale * engine.value()?.value();
    let replicate_stats: Vec<T> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| -> Result<T, BootstrapError> {
            let mut rng = substream(cfg.base_seed, b as u64);
            let (ix, iy) = resample_row_indices(nblocks, d, &mut rng);
            Ok(scale * engine.value_indexed(&ix, &iy)?.value())
        })
        .collect::<Result<_, _>>()?;
    Ok(BootstrapRun { statistic, replicate_stats, d, nblocks })
}

/// The B replicate statistics `m·dcov(resample)` for the sample as given
/// (no vectorization is applied here; see [`independence_test`]), where
/// `m = N·d` is the retained length.
pub fn bootstrap_distribution<T: Scalar>(
    s: &PairedSample<T>,
    cfg: &BootstrapConfig,
) -> Result<Vec<T>, BootstrapError> {
    Ok(run_bootstrap(s, cfg)?.replicate_stats)
}

/// Upper alpha-quantile: sort ascending, take the 1-based order statistic
/// at index `⌈B(1−α)⌉` (clamped into `1..=B`).
pub fn upper_quantile<T: Scalar>(stats: &[T], alpha: f64) -> Result<T, BootstrapError> {
    if stats.is_empty() {
        return Err(BootstrapError::EmptyStats);
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    let b = stats.len();
    let idx = ((b as f64) * (1.0 - alpha)).ceil() as usize;
    Ok(sorted[idx.clamp(1, b) - 1])
}

/// Runs the full bootstrap independence test.
///
/// With `vectorize_stride > 1` the sample is vectorized first; the block
/// length rule then applies to the vectorized length. Rejects when the
/// observed statistic strictly exceeds the replicate quantile.
pub fn independence_test<T: Scalar>(
    s: &PairedSample<T>,
    cfg: &BootstrapConfig,
) -> Result<BootstrapOutcome<T>, BootstrapError> {
    cfg.validate()?;
    let run = if cfg.vectorize_stride > 1 {
        let v = vectorize(s, cfg.vectorize_stride)?;
        run_bootstrap(v.inner(), cfg)?
    } else {
        run_bootstrap(s, cfg)?
    };
    let quantile = upper_quantile(&run.replicate_stats, cfg.alpha)?;
    let b = run.replicate_stats.len();
    let exceed = run.replicate_stats.iter().filter(|&&v| v >= run.statistic).count();
    Ok(BootstrapOutcome {
        statistic: run.statistic,
        quantile,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        reject: run.statistic > quantile,
        d_used: run.d,
        n_used: run.nblocks,
        replicate_stats: run.replicate_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_pair(seed: u64, n: usize) -> PairedSample<f64> {
        let mut rng = substream(seed, 0);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        PairedSample::from_univariate(xs, ys).unwrap()
    }

    #[test]
    fn block_length_small_samples_floor_to_one() {
        assert_eq!(block_length(3, 0.3).unwrap(), 1);
        assert_eq!(block_length(2, 0.45).unwrap(), 1);
    }

    #[test]
    fn block_length_at_512_with_gamma_045_is_two() {
        assert_eq!(block_length(512, 0.45).unwrap(), 2);
    }

    #[test]
    fn block_length_rejects_bad_gamma() {
        assert!(matches!(block_length(10, 0.0), Err(BootstrapError::GammaOutOfRange { .. })));
        assert!(matches!(block_length(10, 0.5), Err(BootstrapError::GammaOutOfRange { .. })));
        assert!(matches!(block_length(10, -0.1), Err(BootstrapError::GammaOutOfRange { .. })));
        assert!(matches!(block_length(1, 0.3), Err(BootstrapError::SampleTooSmall { n: 1 })));
    }

    #[test]
    fn single_block_resample_is_the_original_prefix() {
        let s = random_pair(31, 7);
        let p = partition_blocks(&s, 7).unwrap();
        for seed in [0u64, 1, 99] {
            let mut rng = substream(seed, 0);
            let r = resample_blocks(&p, &mut rng);
            assert_eq!(r, s);
        }
    }

    #[test]
    fn resample_is_deterministic_per_seed() {
        let s = random_pair(32, 12);
        let p = partition_blocks(&s, 3).unwrap();
        let a = resample_blocks(&p, &mut substream(5, 0));
        let b = resample_blocks(&p, &mut substream(5, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn upper_quantile_order_statistic() {
        let stats: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(&stats, 0.05).unwrap(), 95.0);
        assert_eq!(upper_quantile(&[3.0, 3.0, 3.0], 0.5).unwrap(), 3.0);
        assert_eq!(upper_quantile(&[7.5], 0.01).unwrap(), 7.5);
        assert_eq!(upper_quantile(&stats, 0.999).unwrap(), 1.0);
        assert!(matches!(upper_quantile::<f64>(&[], 0.1), Err(BootstrapError::EmptyStats)));
    }

    #[test]
    fn bootstrap_distribution_is_deterministic() {
        let s = random_pair(33, 24);
        let cfg = BootstrapConfig::with_block_len(3, 5, 0.1, 42);
        let a = bootstrap_distribution(&s, &cfg).unwrap();
        let b = bootstrap_distribution(&s, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn constant_series_give_zero_replicates() {
        let s = PairedSample::from_univariate(vec![2.0; 12], vec![-1.0; 12]).unwrap();
        let cfg = BootstrapConfig::with_block_len(3, 8, 0.1, 7);
        let stats = bootstrap_distribution(&s, &cfg).unwrap();
        assert!(stats.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_block_bootstrap_is_rejected_as_degenerate() {
        let s = random_pair(34, 5);
        let cfg = BootstrapConfig::with_block_len(3, 10, 0.1, 0);
        assert!(matches!(
            bootstrap_distribution(&s, &cfg),
            Err(BootstrapError::Degenerate { n: 5, d: 3 })
        ));
    }

    #[test]
    fn gather_path_matches_materialized_resample_bitwise() {
        let s = random_pair(35, 21);
        let cfg = BootstrapConfig::with_block_len(4, 6, 0.1, 1234);
        let stats = bootstrap_distribution(&s, &cfg).unwrap();
        let p = partition_blocks(&s, 4).unwrap();
        let m = p.block_count() * 4;
        for (b, &stat) in stats.iter().enumerate() {
            let mut rng = substream(cfg.base_seed, b as u64);
            let resample = resample_blocks(&p, &mut rng);
            let direct = m as f64 * crate::dcov::dcov_fast(&resample).unwrap().value();
            assert_eq!(stat, direct, "replicate {b} differs between execution paths");
        }
    }

    #[test]
    fn constant_x_accepts_with_p_value_one() {
        let ys: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let s = PairedSample::from_univariate(vec![3.0; 16], ys).unwrap();
        let cfg = BootstrapConfig::with_block_len(2, 20, 0.1, 9);
        let out = independence_test(&s, &cfg).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert!(!out.reject);
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.quantile, 0.0);
    }

    #[test]
    fn outcome_is_bit_identical_across_runs() {
        let s = random_pair(36, 30);
        let cfg = BootstrapConfig::from_gamma(0.3, 15, 0.2, 77);
        let a = independence_test(&s, &cfg).unwrap();
        let b = independence_test(&s, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.replicate_stats.contains(&a.quantile));
        assert!(a.p_value >= 1.0 / 16.0 && a.p_value <= 1.0);
    }

    #[test]
    fn outcome_is_bit_identical_under_integer_shift() {
        // Integer data and shifts are exactly representable, so every
        // pairwise distance is bit-identical after the shift.
        let mut rng = substream(37, 0);
        let xs: Vec<f64> = (0..24).map(|_| rng.random_range(-20..20) as f64).collect();
        let ys: Vec<f64> = (0..24).map(|_| rng.random_range(-20..20) as f64).collect();
        let s = PairedSample::from_univariate(xs.clone(), ys.clone()).unwrap();
        let shifted = PairedSample::from_univariate(
            xs.iter().map(|v| v + 37.0).collect(),
            ys.iter().map(|v| v - 12.0).collect(),
        )
        .unwrap();
        let cfg = BootstrapConfig::with_block_len(4, 12, 0.1, 55);
        let a = independence_test(&s, &cfg).unwrap();
        let b = independence_test(&shifted, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vectorized_test_reports_vectorized_block_counts() {
        let s = random_pair(38, 40);
        let cfg = BootstrapConfig::with_block_len(2, 10, 0.1, 3).stride(2);
        let out = independence_test(&s, &cfg).unwrap();
        // 40 rows vectorize to 20, split into 10 blocks of 2.
        assert_eq!(out.d_used, 2);
        assert_eq!(out.n_used, 10);
    }

    #[test]
    fn config_validation_rejects_out_of_range_fields() {
        let s = random_pair(39, 10);
        let bad_alpha = BootstrapConfig::with_block_len(2, 5, 1.0, 0);
        assert!(matches!(
            independence_test(&s, &bad_alpha),
            Err(BootstrapError::AlphaOutOfRange { .. })
        ));
        let no_reps = BootstrapConfig::with_block_len(2, 0, 0.1, 0);
        assert!(matches!(independence_test(&s, &no_reps), Err(BootstrapError::NoReplicates)));
        let bad_gamma = BootstrapConfig::from_gamma(0.9, 5, 0.1, 0);
        assert!(matches!(
            independence_test(&s, &bad_gamma),
            Err(BootstrapError::GammaOutOfRange { .. })
        ));
    }
}
