//! Stationary test-process generation and desk-scale experiments.
//!
//! ARMA(p, q) paths drive every scenario: `U_k = Σφ_i U_{k−i} + Σψ_j ε_{k−j} + ε_k`
//! with innovations that have a Lebesgue density (gaussian or uniform), which
//! keeps the simulated processes absolutely regular with geometric rates.
//! Everything here is `f64`; the generic estimator layer sits below it.
//!
//! Seeding: a function taking a `seed` argument derives all of its randomness
//! from substreams of that seed, so repeated calls are bit-identical and
//! parallel repetitions never share generator state.

use nalgebra::{Complex, DMatrix};
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{independence_test, BootstrapConfig, BootstrapError};
use crate::rng::{derive_seed, substream};
use crate::sample::{PairedSample, SampleError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid ARMA specification: {}", issues.join("; "))]
    InvalidArma { issues: Vec<String> },
    #[error("cross-lag scenario requires an iid x process (empty ar and ma)")]
    CrossLagNeedsIid,
    #[error("experiment needs at least one repetition")]
    NoReps,
    #[error("segment length {d} must be positive and at most n={n}")]
    BadSegment { d: usize, n: usize },
    #[error("empty sequence passed to distribution comparison")]
    EmptySequence,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
}

/// Innovation distribution; both choices have Lebesgue densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "dist")]
pub enum Innovation {
    Gaussian { sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Innovation {
    fn check(&self, issues: &mut Vec<String>) {
        match *self {
            Innovation::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    issues.push(format!("gaussian sigma must be positive and finite, got {sigma}"));
                }
            }
            Innovation::Uniform { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    issues.push(format!("uniform bounds must satisfy lo < hi, got [{lo}, {hi}]"));
                }
            }
        }
    }
}

/// An ARMA(p, q) process specification.
///
/// Validity requires every root of `φ(u) = 1 − Σφ_i u^i` to lie strictly
/// outside the closed unit disk and `φ`, `ψ(u) = 1 + Σψ_j u^j` to share no
/// root, both checked numerically to tolerance 1e−8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub innovation: Innovation,
    /// Presample steps discarded before recording; the recursion starts
    /// from zeros and the transient decays geometrically.
    pub burn_in: usize,
}

impl ArmaSpec {
    pub fn new(ar: Vec<f64>, ma: Vec<f64>, innovation: Innovation) -> Self {
        let burn_in = Self::default_burn_in(ar.len(), ma.len());
        Self { ar, ma, innovation, burn_in }
    }

    /// White noise: ARMA(0, 0).
    pub fn iid(innovation: Innovation) -> Self {
        Self::new(Vec::new(), Vec::new(), innovation)
    }

    pub fn default_burn_in(p: usize, q: usize) -> usize {
        10 * (p + q + 1) + 100
    }

    pub fn is_iid(&self) -> bool {
        self.ar.iter().all(|&c| c == 0.0) && self.ma.iter().all(|&c| c == 0.0)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut issues = Vec::new();
        self.innovation.check(&mut issues);
        for c in self.ar.iter().chain(self.ma.iter()) {
            if !c.is_finite() {
                issues.push(format!("non-finite coefficient {c}"));
            }
        }
        if issues.is_empty() {
            // φ(u) = 1 − Σφ_i u^i, ψ(u) = 1 + Σψ_j u^j, constant-first coefficients.
            let phi: Vec<f64> =
                std::iter::once(1.0).chain(self.ar.iter().map(|&c| -c)).collect();
            let psi: Vec<f64> = std::iter::once(1.0).chain(self.ma.iter().copied()).collect();
            let phi_roots = polynomial_roots(&phi);
            let psi_roots = polynomial_roots(&psi);
            for r in &phi_roots {
                if r.norm() <= 1.0 + 1e-8 {
                    issues.push(format!(
                        "autoregressive root at modulus {:.6} lies inside or on the unit circle",
                        r.norm()
                    ));
                }
            }
            for r in &phi_roots {
                for s in &psi_roots {
                    if (r - s).norm() < 1e-8 {
                        issues.push(format!(
                            "ar and ma polynomials share a root near ({:.6}, {:.6})",
                            r.re, r.im
                        ));
                    }
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidArma { issues })
        }
    }
}

/// Checks stationarity/causality and root separation of an ARMA spec,
/// reporting every violation found.
pub fn validate_arma(spec: &ArmaSpec) -> Result<(), SimError> {
    spec.validate()
}

/// All complex roots of a polynomial given constant-first coefficients,
/// via eigenvalues of the companion matrix. Trailing zero coefficients are
/// dropped; constants have no roots.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let companion = DMatrix::<f64>::from_fn(deg, deg, |i, j| {
        if j == deg - 1 {
            -c[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Simulates `n` observations of a validated ARMA process, one innovation
/// draw per step, burn-in discarded. Bit-identical per (spec, n, seed).
pub fn simulate_arma(spec: &ArmaSpec, n: usize, seed: u64) -> Result<Vec<f64>, SimError> {
    spec.validate()?;
    let total = spec.burn_in + n;
    let mut rng = substream(seed, 0);
    let mut draw: Box<dyn FnMut(&mut rand_chacha::ChaCha8Rng) -> f64> = match spec.innovation {
        Innovation::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            Box::new(move |r| normal.sample(r))
        }
        Innovation::Uniform { lo, hi } => {
            let uniform = Uniform::new(lo, hi).expect("validated bounds");
            Box::new(move |r| uniform.sample(r))
        }
    };
    let mut eps = vec![0.0f64; total];
    let mut u = vec![0.0f64; total];
    for k in 0..total {
        let e = draw(&mut rng);
        eps[k] = e;
        let mut v = e;
        for (i, &phi) in spec.ar.iter().enumerate() {
            if k > i {
                v += phi * u[k - i - 1];
            }
        }
        for (j, &psi) in spec.ma.iter().enumerate() {
            if k > j {
                v += psi * eps[k - j - 1];
            }
        }
        u[k] = v;
    }
    u.drain(..spec.burn_in);
    Ok(u)
}

/// Dependence structures for size and power experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScenarioKind {
    /// X and Y simulated from disjoint substreams; the null hypothesis.
    IndependentPair,
    /// `Y_k = κ·X_k + noise_k`.
    LinearDependent { kappa: f64 },
    /// `Y_k = X_{k−1}` with X iid: the marginal pairs `(X_k, Y_k)` are
    /// independent for every k, yet the processes are not.
    CrossLag,
    /// A shared factor path added to both series with weight κ.
    CommonFactor { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub x_process: ArmaSpec,
    /// Second component: the Y process (independent_pair, common_factor),
    /// the noise process (linear_dependent); ignored for cross_lag.
    pub y_process: ArmaSpec,
    /// Factor path for common_factor; standard gaussian white noise when
    /// absent. Ignored by the other kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_process: Option<ArmaSpec>,
}

impl Scenario {
    pub fn independent_pair(x: ArmaSpec, y: ArmaSpec) -> Self {
        Self { kind: ScenarioKind::IndependentPair, x_process: x, y_process: y, factor_process: None }
    }

    pub fn linear_dependent(kappa: f64, x: ArmaSpec, noise: ArmaSpec) -> Self {
        Self {
            kind: ScenarioKind::LinearDependent { kappa },
            x_process: x,
            y_process: noise,
            factor_process: None,
        }
    }

    pub fn cross_lag(x: ArmaSpec) -> Self {
        Self { kind: ScenarioKind::CrossLag, y_process: x.clone(), x_process: x, factor_process: None }
    }

    pub fn common_factor(kappa: f64, x: ArmaSpec, y: ArmaSpec) -> Self {
        Self {
            kind: ScenarioKind::CommonFactor { kappa },
            x_process: x,
            y_process: y,
            factor_process: None,
        }
    }

    pub fn with_factor(mut self, factor: ArmaSpec) -> Self {
        self.factor_process = Some(factor);
        self
    }
}

/// Generates one paired sample of length `n` for a scenario.
///
/// Component paths use substreams 0 (X), 1 (Y or noise), and 2 (factor) of
/// the seed; cross_lag draws `n+1` X values so the first Y comes from a
/// genuine presample observation.
pub fn make_scenario_sample(
    sc: &Scenario,
    n: usize,
    seed: u64,
) -> Result<PairedSample<f64>, SimError> {
    match sc.kind {
        ScenarioKind::IndependentPair => {
            let xs = simulate_arma(&sc.x_process, n, derive_seed(seed, 0))?;
            let ys = simulate_arma(&sc.y_process, n, derive_seed(seed, 1))?;
            Ok(PairedSample::from_univariate(xs, ys)?)
        }
        ScenarioKind::LinearDependent { kappa } => {
            let xs = simulate_arma(&sc.x_process, n, derive_seed(seed, 0))?;
            let noise = simulate_arma(&sc.y_process, n, derive_seed(seed, 1))?;
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| kappa * x + e).collect();
            Ok(PairedSample::from_univariate(xs, ys)?)
        }
        ScenarioKind::CrossLag => {
            if !sc.x_process.is_iid() {
                return Err(SimError::CrossLagNeedsIid);
            }
            let path = simulate_arma(&sc.x_process, n + 1, derive_seed(seed, 0))?;
            let xs = path[1..].to_vec();
            let ys = path[..n].to_vec();
            Ok(PairedSample::from_univariate(xs, ys)?)
        }
        ScenarioKind::CommonFactor { kappa } => {
            let mut xs = simulate_arma(&sc.x_process, n, derive_seed(seed, 0))?;
            let mut ys = simulate_arma(&sc.y_process, n, derive_seed(seed, 1))?;
            let default_factor = ArmaSpec::iid(Innovation::Gaussian { sigma: 1.0 });
            let factor_spec = sc.factor_process.as_ref().unwrap_or(&default_factor);
            let factor = simulate_arma(factor_spec, n, derive_seed(seed, 2))?;
            for k in 0..n {
                xs[k] += kappa * factor[k];
                ys[k] += kappa * factor[k];
            }
            Ok(PairedSample::from_univariate(xs, ys)?)
        }
    }
}

/// Per-repetition outcome of an experiment, in repetition order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub rep: usize,
    pub statistic: f64,
    pub quantile: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub n: usize,
    pub reps: usize,
    pub rejection_rate: f64,
    /// Mean of the observed scaled statistics over repetitions.
    pub mean_stat: f64,
    pub config: BootstrapConfig,
    pub wall_time_s: f64,
    pub rep_summaries: Vec<RepSummary>,
}

/// Runs `reps` independent scenario samples through the bootstrap test and
/// reports the rejection fraction.
///
/// Repetition `r` derives its sample seed from salt `2r` and its bootstrap
/// base seed from salt `2r+1`, so results do not depend on execution order
/// or worker count.
pub fn size_power_experiment(
    sc: &Scenario,
    n: usize,
    reps: usize,
    cfg: &BootstrapConfig,
    seed: u64,
) -> Result<ExperimentReport, SimError> {
    if reps == 0 {
        return Err(SimError::NoReps);
    }
    let start = std::time::Instant::now();
    let rep_summaries: Vec<RepSummary> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<RepSummary, SimError> {
            let sample = make_scenario_sample(sc, n, derive_seed(seed, 2 * r as u64))?;
            let mut rep_cfg = cfg.clone();
            rep_cfg.base_seed = derive_seed(seed, 2 * r as u64 + 1);
            let out = independence_test(&sample, &rep_cfg)?;
            Ok(RepSummary {
                rep: r,
                statistic: out.statistic,
                quantile: out.quantile,
                p_value: out.p_value,
                reject: out.reject,
            })
        })
        .collect::<Result<_, _>>()?;
    let rejections = rep_summaries.iter().filter(|s| s.reject).count();
    let mean_stat = rep_summaries.iter().map(|s| s.statistic).sum::<f64>() / reps as f64;
    Ok(ExperimentReport {
        scenario: sc.clone(),
        n,
        reps,
        rejection_rate: rejections as f64 / reps as f64,
        mean_stat,
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        rep_summaries,
    })
}

/// Triangular-array sample under the null: `N = ⌊n/d⌋` mutually independent
/// length-`d` stationary segments per series, concatenated (total length
/// `N·d`). Segment `k` of X uses substream salt `2k`, of Y salt `2k+1`, so
/// any segment can be regenerated alone.
pub fn block_array_sample(
    x_spec: &ArmaSpec,
    y_spec: &ArmaSpec,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<PairedSample<f64>, SimError> {
    if d == 0 || d > n {
        return Err(SimError::BadSegment { d, n });
    }
    x_spec.validate()?;
    y_spec.validate()?;
    let nblocks = n / d;
    let mut xs = Vec::with_capacity(nblocks * d);
    let mut ys = Vec::with_capacity(nblocks * d);
    for k in 0..nblocks {
        xs.extend(simulate_arma(x_spec, d, derive_seed(seed, 2 * k as u64))?);
        ys.extend(simulate_arma(y_spec, d, derive_seed(seed, 2 * k as u64 + 1))?);
    }
    Ok(PairedSample::from_univariate(xs, ys)?)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_t |F_a(t) − F_b(t)|`.
pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<f64, SimError> {
    if a.is_empty() || b.is_empty() {
        return Err(SimError::EmptySequence);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(|x, y| x.partial_cmp(y).expect("values must be finite"));
    sb.sort_unstable_by(|x, y| x.partial_cmp(y).expect("values must be finite"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut ks = 0.0f64;
    while i < sa.len() || j < sb.len() {
        let t = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        let diff = (i as f64 / na - j as f64 / nb).abs();
        if diff > ks {
            ks = diff;
        }
    }
    Ok(ks)
}
