//! Paired time-series samples: ingestion, block partitioning, vectorization.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("empty sample: no data rows")]
    EmptySample,
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount { row: usize, expected: usize, found: usize },
    #[error("row {row}: field {field} is not numeric: {text:?}")]
    NonNumericField { row: usize, field: usize, text: String },
    #[error("row {row}: non-finite value in field {field}")]
    NonFinite { row: usize, field: usize },
    #[error("dimensions must be positive (x_dim={x_dim}, y_dim={y_dim})")]
    ZeroDimension { x_dim: usize, y_dim: usize },
    #[error("coordinate storage has wrong length for {rows} rows of dimension {dim}")]
    StorageMismatch { rows: usize, dim: usize },
    #[error("block length {d} must be positive and at most n={n}")]
    BadBlockLength { d: usize, n: usize },
    #[error("stride {stride} must be positive and at most n={n}")]
    BadStride { stride: usize, n: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A jointly observed pair of series: row `k` is `(x_k, y_k)` with
/// `x_k` in `R^{x_dim}` and `y_k` in `R^{y_dim}`.
///
/// Coordinates are stored flat and row-major; all values are finite by
/// construction. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample<T> {
    x_dim: usize,
    y_dim: usize,
    len: usize,
    xs: Vec<T>,
    ys: Vec<T>,
}

impl<T: Scalar> PairedSample<T> {
    /// Builds a sample from flat row-major coordinate storage.
    pub fn new(x_dim: usize, y_dim: usize, xs: Vec<T>, ys: Vec<T>) -> Result<Self, SampleError> {
        if x_dim == 0 || y_dim == 0 {
            return Err(SampleError::ZeroDimension { x_dim, y_dim });
        }
        if xs.len() % x_dim != 0 {
            return Err(SampleError::StorageMismatch { rows: xs.len() / x_dim, dim: x_dim });
        }
        let len = xs.len() / x_dim;
        if ys.len() != len * y_dim {
            return Err(SampleError::StorageMismatch { rows: len, dim: y_dim });
        }
        if len == 0 {
            return Err(SampleError::EmptySample);
        }
        for (pos, v) in xs.iter().enumerate() {
            if !v.is_finite() {
                return Err(SampleError::NonFinite { row: pos / x_dim + 1, field: pos % x_dim + 1 });
            }
        }
        for (pos, v) in ys.iter().enumerate() {
            if !v.is_finite() {
                return Err(SampleError::NonFinite {
                    row: pos / y_dim + 1,
                    field: x_dim + pos % y_dim + 1,
                })
            }
        }
        Ok(Self { x_dim, y_dim, len, xs, ys })
    }

    /// Convenience constructor for two univariate series of equal length.
    pub fn from_univariate(x: Vec<T>, y: Vec<T>) -> Result<Self, SampleError> {
        if x.len() != y.len() {
            return Err(SampleError::StorageMismatch { rows: x.len(), dim: 1 });
        }
        Self::new(1, 1, x, y)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn x_row(&self, k: usize) -> &[T] {
        &self.xs[k * self.x_dim..(k + 1) * self.x_dim]
    }

    pub fn y_row(&self, k: usize) -> &[T] {
        &self.ys[k * self.y_dim..(k + 1) * self.y_dim]
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    /// Copy of the first `m` rows.
    pub fn prefix(&self, m: usize) -> Self {
        assert!(m >= 1 && m <= self.len, "prefix length out of range");
        Self {
            x_dim: self.x_dim,
            y_dim: self.y_dim,
            len: m,
            xs: self.xs[..m * self.x_dim].to_vec(),
            ys: self.ys[..m * self.y_dim].to_vec(),
        }
    }
}

/// Non-overlapping blocks `B_{X,k}`, `B_{Y,k}` of length `d`; the trailing
/// `n mod d` observations are excluded and recorded in `discarded_tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition<T> {
    block_len: usize,
    block_count: usize,
    x_dim: usize,
    y_dim: usize,
    x_blocks: Vec<Vec<T>>,
    y_blocks: Vec<Vec<T>>,
    discarded_tail: usize,
}

impl<T: Scalar> BlockPartition<T> {
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn discarded_tail(&self) -> usize {
        self.discarded_tail
    }

    /// Flat coordinates of block `k` of the X series (`d · x_dim` values).
    pub fn x_block(&self, k: usize) -> &[T] {
        &self.x_blocks[k]
    }

    pub fn y_block(&self, k: usize) -> &[T] {
        &self.y_blocks[k]
    }

    /// Reassembles the retained `N·d`-row prefix as a sample.
    pub fn flatten(&self) -> PairedSample<T> {
        let mut xs = Vec::with_capacity(self.block_count * self.block_len * self.x_dim);
        let mut ys = Vec::with_capacity(self.block_count * self.block_len * self.y_dim);
        for k in 0..self.block_count {
            xs.extend_from_slice(&self.x_blocks[k]);
            ys.extend_from_slice(&self.y_blocks[k]);
        }
        PairedSample::new(self.x_dim, self.y_dim, xs, ys)
            .expect("blocks came from a valid sample")
    }
}

/// Sample of `J` consecutive observations grouped into one, so lagged
/// dependence between the series becomes same-index dependence.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedSample<T> {
    stride: usize,
    inner: PairedSample<T>,
}

impl<T: Scalar> VectorizedSample<T> {
    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn inner(&self) -> &PairedSample<T> {
        &self.inner
    }

    pub fn into_inner(self) -> PairedSample<T> {
        self.inner
    }
}

/// Loads a paired sample from a CSV file with `x_dim + y_dim` numeric columns.
///
/// An optional single header row `x1..x{x_dim},y1..y{y_dim}` is accepted and
/// skipped; all other rows must be numeric and finite. Row numbers in errors
/// are 1-based file line numbers.
pub fn load_csv(path: &Path, x_dim: usize, y_dim: usize) -> Result<PairedSample<f64>, SampleError> {
    if x_dim == 0 || y_dim == 0 {
        return Err(SampleError::ZeroDimension { x_dim, y_dim });
    }
    let text = fs::read_to_string(path).map_err(|source| SampleError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let width = x_dim + y_dim;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut saw_header = false;
    let mut rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if row == 1 && !saw_header && is_canonical_header(&fields, x_dim, y_dim) {
            saw_header = true;
            continue;
        }
        if fields.len() != width {
            return Err(SampleError::FieldCount { row, expected: width, found: fields.len() });
        }
        for (f, text) in fields.iter().enumerate() {
            let v: f64 = text.parse().map_err(|_| SampleError::NonNumericField {
                row,
                field: f + 1,
                text: (*text).to_string(),
            })?;
            if !v.is_finite() {
                return Err(SampleError::NonFinite { row, field: f + 1 });
            }
            if f < x_dim {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(SampleError::EmptySample);
    }
    PairedSample::new(x_dim, y_dim, xs, ys)
}

fn is_canonical_header(fields: &[&str], x_dim: usize, y_dim: usize) -> bool {
    if fields.len() != x_dim + y_dim {
        return false;
    }
    fields.iter().enumerate().all(|(i, f)| {
        let expect = if i < x_dim {
            format!("x{}", i + 1)
        } else {
            format!("y{}", i - x_dim + 1)
        };
        f.eq_ignore_ascii_case(&expect)
    })
}

/// Splits `s` into `N = ⌊n/d⌋` non-overlapping blocks of length `d`.
pub fn partition_blocks<T: Scalar>(
    s: &PairedSample<T>,
    d: usize,
) -> Result<BlockPartition<T>, SampleError> {
    let n = s.len();
    if d == 0 || d > n {
        return Err(SampleError::BadBlockLength { d, n });
    }
    let block_count = n / d;
    let mut x_blocks = Vec::with_capacity(block_count);
    let mut y_blocks = Vec::with_capacity(block_count);
    for k in 0..block_count {
        let xr = k * d * s.x_dim()..(k + 1) * d * s.x_dim();
        let yr = k * d * s.y_dim()..(k + 1) * d * s.y_dim();
        x_blocks.push(s.xs()[xr].to_vec());
        y_blocks.push(s.ys()[yr].to_vec());
    }
    Ok(BlockPartition {
        block_len: d,
        block_count,
        x_dim: s.x_dim(),
        y_dim: s.y_dim(),
        x_blocks,
        y_blocks,
        discarded_tail: n - block_count * d,
    })
}

/// Groups `J` consecutive observations into one `(J·x_dim, J·y_dim)`-dimensional
/// row; the trailing `n mod J` observations are dropped.
pub fn vectorize<T: Scalar>(
    s: &PairedSample<T>,
    stride: usize,
) -> Result<VectorizedSample<T>, SampleError> {
    let n = s.len();
    if stride == 0 || stride > n {
        return Err(SampleError::BadStride { stride, n });
    }
    let rows = n / stride;
    let xs = s.xs()[..rows * stride * s.x_dim()].to_vec();
    let ys = s.ys()[..rows * stride * s.y_dim()].to_vec();
    let inner = PairedSample::new(stride * s.x_dim(), stride * s.y_dim(), xs, ys)?;
    Ok(VectorizedSample { stride, inner })
}
