//! Wasserstein distances between finite discrete measures, and explicit
//! upper bounds on the expected distance between a mixing process's
//! empirical measure and its stationary law.
//!
//! The exact solvers ([`w_exact_1d`], [`w_exact_discrete`]) are the oracles
//! every inequality in this module family is tested against, so they are
//! exact optimal-transport computations, never regularized approximations.
//! This layer is deliberately `f64`-only: solver and bound tolerances are
//! calibrated to double precision.

mod bounds;
mod dyadic;
mod flow;

pub use bounds::{
    bound_alpha_mixing, bound_phi_mixing, bound_stationary_segments, BoundParams,
};
pub use dyadic::{dyadic_bound, DyadicPartitionParams};

use rayon::prelude::*;
use thiserror::Error;

use crate::rng::derive_seed;

/// Default cap on the combined atom count for the exact discrete solver.
pub const DEFAULT_MAX_ATOMS: usize = 512;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WassersteinError {
    #[error("empty measure: at least one atom required")]
    EmptyMeasure,
    #[error("atom storage length is not a multiple of dimension {dim}")]
    AtomShape { dim: usize },
    #[error("atom {index} has a non-finite coordinate")]
    NonFiniteAtom { index: usize },
    #[error("weight {index} is negative or non-finite")]
    BadWeight { index: usize },
    #[error("weights sum to {sum}, must equal 1 within 1e-12")]
    WeightSum { sum: f64 },
    #[error("dimension mismatch between measures: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("measures have {a} and {b} atoms; equal sizes required")]
    UnequalSizes { a: usize, b: usize },
    #[error("uniform weights required")]
    NotUniform,
    #[error("one-dimensional measures required, got dimension {dim}")]
    NotOneDimensional { dim: usize },
    #[error("{atoms} total atoms exceed the exact-solver guard of {max}")]
    SizeGuard { atoms: usize, max: usize },
    #[error("parameter violation: {0}")]
    Constraint(String),
    #[error("atom {index} lies outside the declared cube [0, {side}]^m")]
    SupportViolation { index: usize, side: f64 },
    #[error("lemma precondition violated: {0}")]
    Precondition(String),
    #[error("cell probability estimate {xi_hat} is below the threshold t0 = {t0}")]
    CellBelowThreshold { xi_hat: f64, t0: f64 },
    #[error("transport solver internal inconsistency: {0}")]
    SolverInconsistency(String),
}

/// A finitely supported probability measure: weighted atoms in ℝ^m.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Uniform weights `1/n` on the given row-major points.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self, WassersteinError> {
        let n = Self::check_atoms(dim, &atoms)?;
        Ok(Self { dim, atoms, weights: vec![1.0 / n as f64; n] })
    }

    /// Caller-supplied nonnegative weights summing to 1 within 1e−12.
    pub fn weighted(
        dim: usize,
        atoms: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, WassersteinError> {
        let n = Self::check_atoms(dim, &atoms)?;
        if weights.len() != n {
            return Err(WassersteinError::UnequalSizes { a: n, b: weights.len() });
        }
        for (i, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(WassersteinError::BadWeight { index: i });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(WassersteinError::WeightSum { sum });
        }
        Ok(Self { dim, atoms, weights })
    }

    fn check_atoms(dim: usize, atoms: &[f64]) -> Result<usize, WassersteinError> {
        if dim == 0 || atoms.len() % dim != 0 {
            return Err(WassersteinError::AtomShape { dim: dim.max(1) });
        }
        let n = atoms.len() / dim;
        if n == 0 {
            return Err(WassersteinError::EmptyMeasure);
        }
        for (pos, v) in atoms.iter().enumerate() {
            if !v.is_finite() {
                return Err(WassersteinError::NonFiniteAtom { index: pos / dim });
            }
        }
        Ok(n)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= WEIGHT_TOL)
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), WassersteinError> {
    if cond {
        Ok(())
    } else {
        Err(WassersteinError::Constraint(msg()))
    }
}

/// p-Wasserstein distance between two same-size uniform one-dimensional
/// measures via the sorted (order-statistic) coupling, which is optimal on
/// the line.
pub fn w_exact_1d(
    p: f64,
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
) -> Result<f64, WassersteinError> {
    require(p >= 1.0, || format!("requires p >= 1, got p={p}"))?;
    if a.dim() != 1 {
        return Err(WassersteinError::NotOneDimensional { dim: a.dim() });
    }
    if b.dim() != 1 {
        return Err(WassersteinError::NotOneDimensional { dim: b.dim() });
    }
    if a.len() != b.len() {
        return Err(WassersteinError::UnequalSizes { a: a.len(), b: b.len() });
    }
    if !a.is_uniform() || !b.is_uniform() {
        return Err(WassersteinError::NotUniform);
    }
    let mut va = a.atoms().to_vec();
    let mut vb = b.atoms().to_vec();
    va.sort_unstable_by(|x, y| x.partial_cmp(y).expect("atoms are finite"));
    vb.sort_unstable_by(|x, y| x.partial_cmp(y).expect("atoms are finite"));
    let n = va.len() as f64;
    let mut cost = 0.0;
    for (x, y) in va.iter().zip(&vb) {
        cost += (x - y).abs().powf(p);
    }
    Ok((cost / n).powf(1.0 / p))
}

/// Optimal transport cost `d_p^p` between two discrete measures, computed
/// exactly by successive shortest paths and certified by feasibility plus
/// complementary slackness.
fn exact_cost(
    p: f64,
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    max_atoms: usize,
) -> Result<f64, WassersteinError> {
    require(p >= 1.0, || format!("requires p >= 1, got p={p}"))?;
    if a.dim() != b.dim() {
        return Err(WassersteinError::DimensionMismatch { a: a.dim(), b: b.dim() });
    }
    let total = a.len() + b.len();
    if total > max_atoms {
        return Err(WassersteinError::SizeGuard { atoms: total, max: max_atoms });
    }
    let (ns, nt) = (a.len(), b.len());
    let mut cost = vec![0.0f64; ns * nt];
    for i in 0..ns {
        for j in 0..nt {
            cost[i * nt + j] = euclid(a.atom(i), b.atom(j)).powf(p);
        }
    }
    let plan = flow::min_cost_transport(&cost, ns, nt, a.weights(), b.weights())?;
    Ok(plan.cost)
}

/// p-Wasserstein distance between two discrete measures of arbitrary
/// weights and sizes, with the default combined-atom guard.
pub fn w_exact_discrete(
    p: f64,
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
) -> Result<f64, WassersteinError> {
    w_exact_discrete_capped(p, a, b, DEFAULT_MAX_ATOMS)
}

/// As [`w_exact_discrete`] with a caller-chosen atom guard.
pub fn w_exact_discrete_capped(
    p: f64,
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    max_atoms: usize,
) -> Result<f64, WassersteinError> {
    Ok(exact_cost(p, a, b, max_atoms)?.powf(1.0 / p))
}

/// Product measure: atoms are concatenations, weights multiply.
pub fn product_measure(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
) -> Result<EmpiricalMeasure, WassersteinError> {
    let dim = a.dim() + b.dim();
    let mut atoms = Vec::with_capacity(a.len() * b.len() * dim);
    let mut weights = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            atoms.extend_from_slice(a.atom(i));
            atoms.extend_from_slice(b.atom(j));
            weights.push(a.weight(i) * b.weight(j));
        }
    }
    // Renormalize the O(n·eps) rounding drift of the product weights.
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    EmpiricalMeasure::weighted(dim, atoms, weights)
}

/// Verifies `d_p^p(η₁⊗η₂, ξ₁⊗ξ₂) ≤ max{1, 2^{p/2−1}}·(d_p^p(η₁,ξ₁) + d_p^p(η₂,ξ₂))`
/// with the exact solver on both sides.
pub fn product_subadditivity_check(
    p: f64,
    eta1: &EmpiricalMeasure,
    xi1: &EmpiricalMeasure,
    eta2: &EmpiricalMeasure,
    xi2: &EmpiricalMeasure,
) -> Result<bool, WassersteinError> {
    const MAX_FACTOR_ATOMS: usize = 12;
    for m in [eta1, xi1, eta2, xi2] {
        if m.len() > MAX_FACTOR_ATOMS {
            return Err(WassersteinError::SizeGuard { atoms: m.len(), max: MAX_FACTOR_ATOMS });
        }
    }
    let lhs = exact_cost(
        p,
        &product_measure(eta1, eta2)?,
        &product_measure(xi1, xi2)?,
        DEFAULT_MAX_ATOMS,
    )?;
    let rhs = 1.0f64.max(2.0f64.powf(p / 2.0 - 1.0))
        * (exact_cost(p, eta1, xi1, DEFAULT_MAX_ATOMS)?
            + exact_cost(p, eta2, xi2, DEFAULT_MAX_ATOMS)?);
    Ok(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()))
}

/// `ζ(t) = min(√t, t)`.
pub fn zeta_fn(t: f64) -> Result<f64, WassersteinError> {
    require(t >= 0.0, || format!("requires t >= 0, got t={t}"))?;
    Ok(t.sqrt().min(t))
}

/// Piecewise majorant of `E|n·ξ_n(C) − n·ξ(C)|` for a cell of stationary
/// probability `xi_c` under an α-mixing process with constant `c0`.
pub fn zeta_nr(xi_c: f64, n: usize, r: f64, c0: f64) -> Result<f64, WassersteinError> {
    require((0.0..=1.0).contains(&xi_c), || {
        format!("requires 0 <= xi_c <= 1, got xi_c={xi_c}")
    })?;
    require(n >= 1, || format!("requires n >= 1, got n={n}"))?;
    require(r > 1.0, || format!("requires r > 1, got r={r}"))?;
    require(c0 > 0.0, || format!("requires c0 > 0, got c0={c0}"))?;
    let nf = n as f64;
    let t = nf * xi_c;
    let value = if xi_c <= 1.0 / nf {
        c0 * zeta_fn(t)?
    } else if xi_c <= nf.powf(-0.5) {
        c0 * nf.powf(0.5 - 1.0 / (2.0 * r)) * t.powf(1.0 / r)
    } else {
        c0 * nf.powf(0.25) * zeta_fn(t)?
    };
    Ok(value)
}

/// Deepest dyadic level at which cells can still hold enough mass under a
/// density bound `M`: `log₂(2·M^{1/d}·n^{r/d})`. Inputs are assumed
/// positive.
pub fn entropy_level_cap(n: usize, r: f64, d: usize, m: f64) -> f64 {
    (2.0 * m.powf(1.0 / d as f64) * (n as f64).powf(r / d as f64)).log2()
}

/// [`entropy_level_cap`] for a cube of side `K` instead of the unit cube two
/// extra halvings per doubling of the side: adds `log₂(K)`.
pub fn entropy_level_cap_with_side(n: usize, r: f64, d: usize, m: f64, k: f64) -> f64 {
    entropy_level_cap(n, r, d, m) + k.log2()
}

/// Riemann zeta on `(1, ∞)` by direct summation with an Euler–Maclaurin
/// tail correction.
pub fn riemann_zeta(r: f64) -> Result<f64, WassersteinError> {
    require(r > 1.0, || format!("requires r > 1, got r={r}"))?;
    const N: u32 = 64;
    let mut sum = 0.0;
    for k in 1..N {
        sum += (k as f64).powf(-r);
    }
    let nf = N as f64;
    sum += nf.powf(1.0 - r) / (r - 1.0);
    sum += nf.powf(-r) / 2.0;
    sum += r * nf.powf(-r - 1.0) / 12.0;
    sum -= r * (r + 1.0) * (r + 2.0) * nf.powf(-r - 3.0) / 720.0;
    Ok(sum)
}

/// Polynomial mixing-rate majorant `f(k) = c·k^{−r0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingRate {
    pub c: f64,
    pub r0: f64,
}

/// The variance-lemma constant `c0 = 1 + 64·c·ζ(r0)`, floored at `2 + 1e−9`
/// because the lemma requires `c0 > 2`.
pub fn variance_c0(rate: &MixingRate) -> Result<f64, WassersteinError> {
    require(rate.c >= 0.0, || format!("requires c >= 0, got c={}", rate.c))?;
    Ok((1.0 + 64.0 * rate.c * riemann_zeta(rate.r0)?).max(2.0 + 1e-9))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCheck {
    pub empirical_var: f64,
    pub bound: f64,
    pub pass: bool,
    /// Presample estimate of the cell probability ξ(F).
    pub xi_hat: f64,
    pub c0: f64,
}

/// Monte Carlo check of the occupation-count variance bound
/// `Var(Σᵢ 1_F(Uᵢ)) ≤ c0·n·t0⁻¹·ξ(F)` for cells with `ξ(F) ≥ t0`.
///
/// `sampler(seed, len)` must return one path of the process; ξ(F) is
/// estimated from a 200 000-step presample on substream 0, repetition `r`
/// uses substream `1 + r`.
pub fn variance_bound_check<S, F>(
    sampler: S,
    rate: &MixingRate,
    indicator: F,
    n: usize,
    t0: f64,
    reps: usize,
    seed: u64,
) -> Result<VarianceCheck, WassersteinError>
where
    S: Fn(u64, usize) -> Vec<f64> + Sync,
    F: Fn(f64) -> bool + Sync,
{
    const PRESAMPLE: usize = 200_000;
    require(n >= 1, || format!("requires n >= 1, got n={n}"))?;
    require(reps >= 2, || format!("requires reps >= 2, got reps={reps}"))?;
    require(t0 > 0.0 && t0 <= 1.0, || format!("requires 0 < t0 <= 1, got t0={t0}"))?;
    let presample = sampler(derive_seed(seed, 0), PRESAMPLE);
    let hits = presample.iter().filter(|&&v| indicator(v)).count();
    let xi_hat = hits as f64 / presample.len() as f64;
    if xi_hat < t0 {
        return Err(WassersteinError::CellBelowThreshold { xi_hat, t0 });
    }
    let counts: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let path = sampler(derive_seed(seed, 1 + r as u64), n);
            path.iter().filter(|&&v| indicator(v)).count() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let ss: f64 = counts.iter().map(|c| (c - mean) * (c - mean)).sum();
    let empirical_var = ss / (reps - 1) as f64;
    let c0 = variance_c0(rate)?;
    let bound = c0 * n as f64 * xi_hat / t0;
    Ok(VarianceCheck { empirical_var, bound, pass: empirical_var <= bound, xi_hat, c0 })
}
