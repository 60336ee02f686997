//! Distance-covariance kernels and estimators.
//!
//! The estimator family is built around the six-point kernel
//! `h'(z_1,…,z_6) = f(x_1,x_2,x_3,x_4)·f(y_1,y_2,y_5,y_6)` with
//! `f(x_1,x_2,x_3,x_4) = ‖x_1−x_2‖ − ‖x_1−x_3‖ − ‖x_2−x_4‖ + ‖x_3−x_4‖`.
//! The full V-statistic sum over all index 6-tuples is invariant under
//! symmetrizing `h'`, so every production path evaluates `h'`; the
//! symmetrized kernel exists for cross-checks only.
//!
//! The fast path computes the same quantity as `n⁻² Σ_{ij} A_{ij}B_{ij}`
//! from double-centered distance matrices in O(n²). Rows are brought into
//! a canonical order before any floating-point accumulation, which makes
//! the result exactly invariant under permutations of the input rows and
//! lets the resampling engine reproduce materialized computations bit for
//! bit.

use std::cmp::Ordering;

use thiserror::Error;

use crate::sample::{BlockPartition, PairedSample};
use crate::scalar::Scalar;

/// Default cap on the sample size for the O(n²)-memory fast path.
pub const DEFAULT_MAX_N: usize = 20_000;

/// Largest sample size accepted by the brute-force V-statistic oracle.
pub const MAX_ORACLE_N: usize = 12;

#[derive(Debug, Error)]
pub enum DcovError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample size {n} exceeds oracle limit {max} (cost grows as n^6)")]
    OracleTooLarge { n: usize, max: usize },
    #[error("sample size {n} exceeds configured limit {max} for O(n^2) distance matrices")]
    SampleTooLarge { n: usize, max: usize },
    #[error(
        "distance covariance {value} is negative beyond tolerance {tolerance}; \
         inputs are inconsistent with a positive semidefinite kernel"
    )]
    NegativeValue { value: f64, tolerance: f64 },
    #[error("Monte Carlo size {m} is below the minimum of 100")]
    MonteCarloTooSmall { m: usize },
    #[error("empty pool: both coordinate pools must contain at least one row")]
    EmptyPool,
}

/// Double-centered distance matrix `A_{ij} = d_{ij} − a_i − a_j + D` of one
/// series, where `a_i` is the row mean and `D` the grand mean of the
/// Euclidean distance matrix.
///
/// Every row sums to zero up to floating-point error; `scale()` provides the
/// magnitude reference for that tolerance.
#[derive(Debug, Clone)]
pub struct CenteredDistanceMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> CenteredDistanceMatrix<T> {
    /// Builds the matrix from `n` row-major points of the given dimension.
    pub fn from_points(coords: &[T], dim: usize) -> Result<Self, DcovError> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(DcovError::DimensionMismatch {
                expected: dim.max(1),
                found: coords.len() % dim.max(1),
            });
        }
        let n = coords.len() / dim;
        let raw = distance_matrix(coords, dim, n);
        let (row_means, grand_mean) = centering_stats(&raw, n);
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = center_entry(raw[i * n + j], row_means[i], row_means[j], grand_mean);
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn row_sum(&self, i: usize) -> T {
        let mut s = T::zero();
        for j in 0..self.n {
            s += self.entries[i * self.n + j];
        }
        s
    }

    /// Magnitude reference for tolerances: one plus the mean absolute entry.
    pub fn scale(&self) -> T {
        let mut abs = T::zero();
        for e in &self.entries {
            abs += e.abs();
        }
        T::one() + abs / T::from_count(self.n * self.n)
    }
}

/// An empirical distance covariance together with the sample size it used.
///
/// The underlying quantity is nonnegative; tiny negative floating-point
/// results are clamped to zero, anything worse is rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcovValue<T> {
    value: T,
    n: usize,
}

impl<T: Scalar> DcovValue<T> {
    /// Clamp tolerance, relative to the scale of the summed products.
    const CLAMP_TOL: f64 = 1e-9;

    pub(crate) fn finalize(raw: T, n: usize, scale: T) -> Result<Self, DcovError> {
        let tol = T::from_real(Self::CLAMP_TOL) * scale;
        if raw < -tol {
            return Err(DcovError::NegativeValue {
                value: raw.to_f64().unwrap_or(f64::NAN),
                tolerance: tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        let value = if raw < T::zero() { T::zero() } else { raw };
        Ok(Self { value, n })
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Euclidean distance; the one-dimensional case uses `|a−b|` directly.
fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    let mut s = T::zero();
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

fn check_dims<T>(points: &[&[T]]) -> Result<usize, DcovError> {
    let expected = points[0].len();
    for p in points {
        if p.len() != expected {
            return Err(DcovError::DimensionMismatch { expected, found: p.len() });
        }
    }
    Ok(expected)
}

/// Four-point kernel `‖x1−x2‖ − ‖x1−x3‖ − ‖x2−x4‖ + ‖x3−x4‖`.
pub fn kernel_f<T: Scalar>(x1: &[T], x2: &[T], x3: &[T], x4: &[T]) -> Result<T, DcovError> {
    check_dims(&[x1, x2, x3, x4])?;
    Ok(f4(x1, x2, x3, x4))
}

fn f4<T: Scalar>(x1: &[T], x2: &[T], x3: &[T], x4: &[T]) -> T {
    ((dist(x1, x2) - dist(x1, x3)) - dist(x2, x4)) + dist(x3, x4)
}

/// Six-point product kernel `f(x1,x2,x3,x4)·f(y1,y2,y5,y6)` on paired points.
pub fn kernel_h_prime<T: Scalar>(z: &[(&[T], &[T]); 6]) -> Result<T, DcovError> {
    check_dims(&[z[0].0, z[1].0, z[2].0, z[3].0, z[4].0, z[5].0])?;
    check_dims(&[z[0].1, z[1].1, z[2].1, z[3].1, z[4].1, z[5].1])?;
    Ok(h_prime(z))
}

fn h_prime<T: Scalar>(z: &[(&[T], &[T]); 6]) -> T {
    f4(z[0].0, z[1].0, z[2].0, z[3].0) * f4(z[0].1, z[1].1, z[4].1, z[5].1)
}

/// Symmetrization of the six-point kernel: the mean of `h'` over all 720
/// orderings of the arguments.
///
/// The arguments are brought into a canonical order before the permutations
/// are enumerated, so the result is exactly invariant under permuting the
/// inputs. Used for cross-checks; production paths sum `h'` directly.
pub fn kernel_h_sym<T: Scalar>(z: &[(&[T], &[T]); 6]) -> Result<T, DcovError> {
    check_dims(&[z[0].0, z[1].0, z[2].0, z[3].0, z[4].0, z[5].0])?;
    check_dims(&[z[0].1, z[1].1, z[2].1, z[3].1, z[4].1, z[5].1])?;
    let mut pts: Vec<(&[T], &[T])> = z.to_vec();
    pts.sort_by(|a, b| cmp_slices(a.0, b.0).then_with(|| cmp_slices(a.1, b.1)));

    // Heap's algorithm over the canonical arrangement: the term order is a
    // function of the sorted points alone.
    let mut idx = [0usize, 1, 2, 3, 4, 5];
    let mut counters = [0usize; 6];
    let mut sum = eval_perm(&pts, &idx);
    let mut i = 1;
    while i < 6 {
        if counters[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(counters[i], i);
            }
            sum += eval_perm(&pts, &idx);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(sum / T::from_count(720))
}

fn eval_perm<T: Scalar>(pts: &[(&[T], &[T])], idx: &[usize; 6]) -> T {
    h_prime(&[pts[idx[0]], pts[idx[1]], pts[idx[2]], pts[idx[3]], pts[idx[4]], pts[idx[5]]])
}

fn cmp_slices<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for k in 0..a.len().min(b.len()) {
        match a[k].partial_cmp(&b[k]).expect("coordinates are finite") {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Brute-force V-statistic: `n⁻⁶ Σ` of `h'` over all index 6-tuples.
///
/// Cost grows as n⁶, so the sample size is capped at [`MAX_ORACLE_N`]. This
/// is the reference implementation the fast path is checked against; it
/// shares no intermediate computations with it.
pub fn dcov_v_oracle<T: Scalar>(s: &PairedSample<T>) -> Result<DcovValue<T>, DcovError> {
    let n = s.len();
    if n > MAX_ORACLE_N {
        return Err(DcovError::OracleTooLarge { n, max: MAX_ORACLE_N });
    }
    let mut sum = T::zero();
    let mut abs = T::zero();
    for i1 in 0..n {
        for i2 in 0..n {
            for i3 in 0..n {
                for i4 in 0..n {
                    for i5 in 0..n {
                        for i6 in 0..n {
                            let v = h_prime(&[
                                (s.x_row(i1), s.y_row(i1)),
                                (s.x_row(i2), s.y_row(i2)),
                                (s.x_row(i3), s.y_row(i3)),
                                (s.x_row(i4), s.y_row(i4)),
                                (s.x_row(i5), s.y_row(i5)),
                                (s.x_row(i6), s.y_row(i6)),
                            ]);
                            sum += v;
                            abs += v.abs();
                        }
                    }
                }
            }
        }
    }
    let count = T::from_count(n).powi(6);
    DcovValue::finalize(sum / count, n, T::one() + abs / count)
}

/// Empirical distance covariance via double-centered distance matrices,
/// O(n²) time and memory, with the default sample-size cap.
pub fn dcov_fast<T: Scalar>(s: &PairedSample<T>) -> Result<DcovValue<T>, DcovError> {
    dcov_fast_capped(s, DEFAULT_MAX_N)
}

/// As [`dcov_fast`], with a caller-chosen cap on the sample size.
pub fn dcov_fast_capped<T: Scalar>(
    s: &PairedSample<T>,
    max_n: usize,
) -> Result<DcovValue<T>, DcovError> {
    let n = s.len();
    if n > max_n {
        return Err(DcovError::SampleTooLarge { n, max: max_n });
    }
    let order = canonical_order(s);
    let mut xs = Vec::with_capacity(n * s.x_dim());
    let mut ys = Vec::with_capacity(n * s.y_dim());
    for &p in &order {
        xs.extend_from_slice(s.x_row(p));
        ys.extend_from_slice(s.y_row(p));
    }
    let dx = distance_matrix(&xs, s.x_dim(), n);
    let dy = distance_matrix(&ys, s.y_dim(), n);
    centered_product_value(&dx, &dy, n)
}

/// Canonical row order: stable lexicographic sort by the concatenated
/// `(x‖y)` coordinates. Accumulating in this order makes the value a
/// function of the row multiset, hence exactly permutation invariant.
fn canonical_order<T: Scalar>(s: &PairedSample<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&p, &q| {
        cmp_slices(s.x_row(p), s.x_row(q)).then_with(|| cmp_slices(s.y_row(p), s.y_row(q)))
    });
    order
}

/// Full Euclidean distance matrix; the lower triangle mirrors the upper
/// (bit-exact: IEEE subtraction negates exactly, squares and absolute
/// values erase the sign).
fn distance_matrix<T: Scalar>(coords: &[T], dim: usize, n: usize) -> Vec<T> {
    let mut d = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dist(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Row means and grand mean of a distance matrix, in fixed accumulation
/// order (rows ascending, then the row means themselves).
fn centering_stats<T: Scalar>(d: &[T], n: usize) -> (Vec<T>, T) {
    let nn = T::from_count(n);
    let mut row_means = vec![T::zero(); n];
    for i in 0..n {
        let mut s = T::zero();
        for j in 0..n {
            s += d[i * n + j];
        }
        row_means[i] = s / nn;
    }
    let mut total = T::zero();
    for m in &row_means {
        total += *m;
    }
    (row_means, total / nn)
}

#[inline]
fn center_entry<T: Scalar>(d: T, ai: T, aj: T, grand: T) -> T {
    ((d - ai) - aj) + grand
}

/// Shared final pass of the fast path: `n⁻² Σ A∘B` with the clamp scale
/// `1 + n⁻² Σ |A∘B|`, both accumulated row-major.
fn centered_product_value<T: Scalar>(
    dx: &[T],
    dy: &[T],
    n: usize,
) -> Result<DcovValue<T>, DcovError> {
    let (ax, gx) = centering_stats(dx, n);
    let (ay, gy) = centering_stats(dy, n);
    let mut sum = T::zero();
    let mut abs = T::zero();
    for i in 0..n {
        for j in 0..n {
            let a = center_entry(dx[i * n + j], ax[i], ax[j], gx);
            let b = center_entry(dy[i * n + j], ay[i], ay[j], gy);
            let p = a * b;
            sum += p;
            abs += p.abs();
        }
    }
    let nn = T::from_count(n * n);
    DcovValue::finalize(sum / nn, n, T::one() + abs / nn)
}

/// Reusable fast-path state for repeated resampled evaluations over one
/// base sample: the raw distance matrices are computed once, and each
/// resample only gathers and re-centers.
///
/// [`DcovEngine::value_indexed`] is bit-identical to materializing the
/// resampled rows and calling [`dcov_fast`], because both sort by the same
/// row-content key and accumulate in the same order over the same distance
/// bits.
#[derive(Debug)]
pub struct DcovEngine<T> {
    n: usize,
    x_dim: usize,
    y_dim: usize,
    xs: Vec<T>,
    ys: Vec<T>,
    dx: Vec<T>,
    dy: Vec<T>,
}

impl<T: Scalar> DcovEngine<T> {
    pub fn new(s: &PairedSample<T>) -> Result<Self, DcovError> {
        Self::with_cap(s, DEFAULT_MAX_N)
    }

    pub fn with_cap(s: &PairedSample<T>, max_n: usize) -> Result<Self, DcovError> {
        let n = s.len();
        if n > max_n {
            return Err(DcovError::SampleTooLarge { n, max: max_n });
        }
        Ok(Self {
            n,
            x_dim: s.x_dim(),
            y_dim: s.y_dim(),
            xs: s.xs().to_vec(),
            ys: s.ys().to_vec(),
            dx: distance_matrix(s.xs(), s.x_dim(), n),
            dy: distance_matrix(s.ys(), s.y_dim(), n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Distance covariance of the base sample itself.
    pub fn value(&self) -> Result<DcovValue<T>, DcovError> {
        let identity: Vec<usize> = (0..self.n).collect();
        self.value_indexed(&identity, &identity)
    }

    /// Distance covariance of the resample whose row `p` pairs base X-row
    /// `ix[p]` with base Y-row `iy[p]`.
    pub fn value_indexed(&self, ix: &[usize], iy: &[usize]) -> Result<DcovValue<T>, DcovError> {
        assert_eq!(ix.len(), iy.len(), "index vectors must have equal length");
        let m = ix.len();
        assert!(m >= 1, "resample must be nonempty");
        for &i in ix.iter().chain(iy.iter()) {
            assert!(i < self.n, "row index {i} out of range for base sample of size {}", self.n);
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&p, &q| {
            cmp_slices(self.x_slice(ix[p]), self.x_slice(ix[q]))
                .then_with(|| cmp_slices(self.y_slice(iy[p]), self.y_slice(iy[q])))
        });
        let mut mdx = vec![T::zero(); m * m];
        let mut mdy = vec![T::zero(); m * m];
        for p in 0..m {
            let bi_x = ix[order[p]] * self.n;
            let bi_y = iy[order[p]] * self.n;
            for q in 0..m {
                mdx[p * m + q] = self.dx[bi_x + ix[order[q]]];
                mdy[p * m + q] = self.dy[bi_y + iy[order[q]]];
            }
        }
        centered_product_value(&mdx, &mdy, m)
    }

    fn x_slice(&self, i: usize) -> &[T] {
        &self.xs[i * self.x_dim..(i + 1) * self.x_dim]
    }

    fn y_slice(&self, i: usize) -> &[T] {
        &self.ys[i * self.y_dim..(i + 1) * self.y_dim]
    }
}

/// Block-level kernel `H(B_{k1},…,B_{k6}) = d⁻⁶ Σ` of `h'` over all
/// within-block coordinate choices, where block `k` contributes the paired
/// points of partition block `k`.
pub fn block_kernel_h<T: Scalar>(p: &BlockPartition<T>, ks: [usize; 6]) -> T {
    let d = p.block_len();
    let (xd, yd) = (p.x_dim(), p.y_dim());
    let point = |k: usize, c: usize| -> (&[T], &[T]) {
        (&p.x_block(k)[c * xd..(c + 1) * xd], &p.y_block(k)[c * yd..(c + 1) * yd])
    };
    let mut sum = T::zero();
    for c1 in 0..d {
        for c2 in 0..d {
            for c3 in 0..d {
                for c4 in 0..d {
                    for c5 in 0..d {
                        for c6 in 0..d {
                            sum += h_prime(&[
                                point(ks[0], c1),
                                point(ks[1], c2),
                                point(ks[2], c3),
                                point(ks[3], c4),
                                point(ks[4], c5),
                                point(ks[5], c6),
                            ]);
                        }
                    }
                }
            }
        }
    }
    sum / T::from_count(d).powi(6)
}

/// Distance covariance of the retained `N·d`-row prefix of a partition.
///
/// Identical to the block V-statistic `N⁻⁶ Σ H` (checked in tests); the
/// execution path is the fast form on the flattened prefix.
pub fn dcov_blocks<T: Scalar>(p: &BlockPartition<T>) -> Result<DcovValue<T>, DcovError> {
    dcov_fast(&p.flatten())
}

/// Monte Carlo check of first-order Hoeffding degeneracy: estimates
/// `E[h'(z, Z₂,…,Z₆)]` with `Z_i` drawn from the empirical product measure
/// (independent uniform picks from the two pools), returning the estimate
/// and its standard error.
///
/// For each slot 2..6 in order, an X-pool row index is drawn, then a Y-pool
/// row index, from one substream of the given seed.
pub fn hoeffding_h1_estimate<T: Scalar>(
    zx: &[T],
    zy: &[T],
    x_pool: &[T],
    x_dim: usize,
    y_pool: &[T],
    y_dim: usize,
    m: usize,
    seed: u64,
) -> Result<(T, T), DcovError> {
    use rand::Rng;

    if m < 100 {
        return Err(DcovError::MonteCarloTooSmall { m });
    }
    if x_dim == 0 || x_pool.len() % x_dim != 0 || y_dim == 0 || y_pool.len() % y_dim != 0 {
        return Err(DcovError::DimensionMismatch {
            expected: x_dim.max(1),
            found: x_pool.len() % x_dim.max(1),
        });
    }
    let nx = x_pool.len() / x_dim;
    let ny = y_pool.len() / y_dim;
    if nx == 0 || ny == 0 {
        return Err(DcovError::EmptyPool);
    }
    if zx.len() != x_dim {
        return Err(DcovError::DimensionMismatch { expected: x_dim, found: zx.len() });
    }
    if zy.len() != y_dim {
        return Err(DcovError::DimensionMismatch { expected: y_dim, found: zy.len() });
    }

    let mut rng = crate::rng::substream(seed, 0);
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    for _ in 0..m {
        let mut draws: [(usize, usize); 5] = [(0, 0); 5];
        for slot in &mut draws {
            let ux = rng.random_range(0..nx);
            let uy = rng.random_range(0..ny);
            *slot = (ux, uy);
        }
        let pick = |(ux, uy): (usize, usize)| -> (&[T], &[T]) {
            (&x_pool[ux * x_dim..(ux + 1) * x_dim], &y_pool[uy * y_dim..(uy + 1) * y_dim])
        };
        let v = h_prime(&[
            (zx, zy),
            pick(draws[0]),
            pick(draws[1]),
            pick(draws[2]),
            pick(draws[3]),
            pick(draws[4]),
        ]);
        sum += v;
        sum_sq += v * v;
    }
    let mm = T::from_count(m);
    let mean = sum / mm;
    let var = (sum_sq - mm * mean * mean) / (mm - T::one());
    let var = if var < T::zero() { T::zero() } else { var };
    Ok((mean, (var / mm).sqrt()))
}
