//! Closed-form upper bounds on the expected p-Wasserstein transport cost
//! between the empirical measure of a dependent sequence and its stationary
//! law.
//!
//! Three variants are provided: a truncation-plus-discretization bound for
//! α-mixing sequences on an unbounded state space, a version for the
//! stationary segment construction with the truncation radius tuned
//! internally, and a sharper bound for φ-mixing (uniformly mixing)
//! sequences on a bounded cube. Every parameter restriction is enforced
//! with an error naming the violated inequality, because these functions
//! exist to be audited against Monte Carlo estimates.

use serde::{Deserialize, Serialize};

use super::{require, WassersteinError};

/// Inputs shared by the α-mixing and stationary-segment bounds.
///
/// `c0`/`r0` come from the occupation-variance constant (see
/// [`variance_c0`](super::variance_c0)); `m_q` is the q-th absolute moment
/// `E‖U‖^q`. The primed fields describe the per-segment marginal used by
/// the segment variant: its dimension `d_prime` and moment `m_q_prime`,
/// with `c_prime` the segment-coupling constant. `tail_prob` optionally
/// replaces the Markov estimate `min(1, m_q·K^{−q})` with a sharper known
/// value of `P(‖U‖ > K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub p: f64,
    pub q: f64,
    pub d: usize,
    pub n: usize,
    pub k: f64,
    pub m: f64,
    pub c0: f64,
    pub r0: f64,
    pub m_q: f64,
    pub d_prime: usize,
    pub m_q_prime: f64,
    pub c_prime: f64,
    #[serde(default)]
    pub tail_prob: Option<f64>,
}

fn require_subcritical(p: f64, d: usize) -> Result<(), WassersteinError> {
    let half = d as f64 / 2.0;
    if p > half {
        Err(WassersteinError::Constraint(format!(
            "requires p < d/2 (geometric factor diverges for p > d/2); got p={p}, d={d}"
        )))
    } else if p == half {
        Err(WassersteinError::Constraint(format!(
            "requires p < d/2 (denominator 1 - 2^(p - d/2) vanishes at p = d/2); got p={p}, d={d}"
        )))
    } else {
        Ok(())
    }
}

fn validate_common(bp: &BoundParams) -> Result<(), WassersteinError> {
    require(bp.p >= 1.0, || format!("requires p >= 1, got p={}", bp.p))?;
    require(bp.q > bp.p, || format!("requires q > p, got q={}, p={}", bp.q, bp.p))?;
    require(bp.d >= 1, || format!("requires d >= 1, got d={}", bp.d))?;
    require(bp.n >= 1, || format!("requires n >= 1, got n={}", bp.n))?;
    require(bp.m.is_finite() && bp.m > 0.0, || format!("requires M > 0, got M={}", bp.m))?;
    require(bp.c0 > 2.0, || format!("requires c0 > 2, got c0={}", bp.c0))?;
    require(bp.m_q.is_finite() && bp.m_q >= 0.0, || {
        format!("requires m_q >= 0, got m_q={}", bp.m_q)
    })?;
    require_subcritical(bp.p, bp.d)
}

/// The dyadic geometric series constant for a density bound `M` on the
/// unit cube in dimension `d`, finite exactly when `p < d/2`.
fn geometric_factor(p: f64, d: usize, m: f64) -> f64 {
    let df = d as f64;
    (1.0 + m.powf((df / 2.0 - p) / df)) / (1.0 - 2.0f64.powf(p - df / 2.0))
        + 1.0 / (1.0 - 2.0f64.powf(-p))
        + 4.0 * m.powf(1.0 / df)
}

/// Expected transport cost on the cube `[-K, K]^d` after rescaling: the
/// discretization half of the α-mixing bound before the `K^{d/2}` volume
/// factor.
fn unit_cube_rate(p: f64, d: usize, n: usize, m: f64, c0: f64) -> f64 {
    let df = d as f64;
    let diam_p = df.sqrt().powf(p);
    c0 * (n as f64).powf(-(p - 2.0) / (2.0 * df))
        * 2.0f64.powf(1.5 * df - p)
        * diam_p
        * geometric_factor(p, d, m)
}

fn alpha_terms(bp: &BoundParams, tail: f64) -> (f64, f64) {
    let truncation = 2.0f64.powf(bp.p)
        * (tail.powf((bp.q - bp.p) / bp.q) * bp.m_q.powf(bp.p / bp.q) + tail * bp.k.powf(bp.p));
    let discretization =
        bp.k.powf(bp.d as f64 / 2.0) * unit_cube_rate(bp.p, bp.d, bp.n, bp.m, bp.c0);
    (truncation, discretization)
}

/// Upper bound on `E d_p^p(empirical, stationary)` for an α-mixing sequence
/// in ℝ^d: truncate to the cube `[-K, K]^d` (paying a moment tail) and
/// bound the cube part through the dyadic estimate.
pub fn bound_alpha_mixing(bp: &BoundParams) -> Result<f64, WassersteinError> {
    validate_common(bp)?;
    require(bp.k.is_finite() && bp.k > 0.0, || format!("requires K > 0, got K={}", bp.k))?;
    let tail = match bp.tail_prob {
        Some(t) => {
            require((0.0..=1.0).contains(&t), || {
                format!("requires 0 <= tail_prob <= 1, got tail_prob={t}")
            })?;
            t
        }
        None => (bp.m_q / bp.k.powf(bp.q)).min(1.0),
    };
    let (truncation, discretization) = alpha_terms(bp, tail);
    Ok(3.0f64.powf(bp.p - 1.0) * (truncation + discretization))
}

fn stationary_terms(bp: &BoundParams) -> (f64, f64) {
    let df = bp.d as f64;
    let nf = bp.n as f64;
    let six_p = 6.0f64.powf(bp.p);
    let main = six_p
        * bp.c0
        * 2.0f64.powf(1.5 * df - bp.p)
        * df.sqrt().powf(bp.p)
        * nf.powf(-(bp.p - 2.0) / (4.0 * df))
        * geometric_factor(bp.p, bp.d, bp.m);
    let segment = six_p
        * 2.0
        * bp.c_prime
        * df.powf(1.0 + bp.q / 2.0)
        * nf.powf((bp.p - 2.0) * (bp.p - bp.q) / (2.0 * df * df));
    (main, segment)
}

/// Segment variant of the α-mixing bound: blocks of consecutive
/// observations are compared to independent copies of the stationary
/// segment law, with the truncation radius already balanced against `n`,
/// so no `K` enters.
pub fn bound_stationary_segments(bp: &BoundParams) -> Result<f64, WassersteinError> {
    validate_common(bp)?;
    require(bp.d_prime >= 1 && bp.d_prime <= bp.d, || {
        format!("requires 1 <= d_prime <= d, got d_prime={}, d={}", bp.d_prime, bp.d)
    })?;
    require(bp.m_q_prime.is_finite() && bp.m_q_prime >= 0.0, || {
        format!("requires m_q_prime >= 0, got m_q_prime={}", bp.m_q_prime)
    })?;
    require(bp.c_prime.is_finite() && bp.c_prime > 0.0, || {
        format!("requires c_prime > 0, got c_prime={}", bp.c_prime)
    })?;
    let (main, segment) = stationary_terms(bp);
    Ok(main + segment)
}

/// Upper bound on `E d_p^p` for a φ-mixing sequence supported on a cube of
/// diameter `diam`: uniform mixing removes the moment truncation and the
/// `n^{1/4}`-regime entirely.
pub fn bound_phi_mixing(
    p: f64,
    d: usize,
    n: usize,
    c0: f64,
    diam: f64,
) -> Result<f64, WassersteinError> {
    require(p >= 1.0, || format!("requires p >= 1, got p={p}"))?;
    require(d >= 1, || format!("requires d >= 1, got d={d}"))?;
    require(n >= 1, || format!("requires n >= 1, got n={n}"))?;
    require(c0 > 0.0, || format!("requires c0 > 0, got c0={c0}"))?;
    require(diam.is_finite() && diam > 0.0, || format!("requires diam > 0, got diam={diam}"))?;
    require_subcritical(p, d)?;
    let df = d as f64;
    let series = 1.0 / (1.0 - 2.0f64.powf(p - df / 2.0)) + 1.0 / (1.0 - 2.0f64.powf(-p));
    Ok((n as f64).powf(-p / df) * c0 * 2.0f64.powf(df + 1.0) * diam.powf(p) * series)
}
