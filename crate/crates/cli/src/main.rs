//! `depcov` — command-line front end for the distance-covariance
//! independence test, the simulation lab, and the Wasserstein bound
//! calculators.
//!
//! Verbs: `test` (CSV in, decision out), `simulate` (scenario experiments),
//! `wbound` (closed-form bound evaluation), `selftest` (fast invariant
//! suite). Every run prints one single-line JSON report on stdout
//! (diagnostics go to stderr) following `schema/report-v1.json`.
//!
//! Exit codes: 0 success/accept, 1 usage or parameter error, 2 data error,
//! 3 independence rejected. All commands are deterministic for fixed flags
//! and seed; `--threads` (or `DEPCOV_THREADS`; the flag wins) only changes
//! scheduling, never reported numbers.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use depcov::bootstrap::{independence_test, BootstrapConfig, BootstrapError};
use depcov::dcov::{dcov_fast, dcov_v_oracle, hoeffding_h1_estimate};
use depcov::rng::{derive_seed, substream};
use depcov::sample::{load_csv, PairedSample, SampleError};
use depcov::sim::{size_power_experiment, ArmaSpec, Innovation, Scenario};
use depcov::wasserstein::{
    bound_alpha_mixing, bound_phi_mixing, bound_stationary_segments, dyadic_bound,
    product_subadditivity_check, riemann_zeta, w_exact_1d, w_exact_discrete, zeta_nr, BoundParams,
    DyadicPartitionParams, EmpiricalMeasure,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_REJECT: u8 = 3;

/// Default block-length exponent when neither `--gamma` nor `--block-len`
/// is given.
const DEFAULT_GAMMA: f64 = 0.45;

#[derive(Parser)]
#[command(
    name = "depcov",
    version,
    about = "Distance-covariance independence tests for dependent time series"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores; the env
    /// var DEPCOV_THREADS is honored when the flag is absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test two CSV columns groups for independence with the block
    /// bootstrap; exit 0 accepts, exit 3 rejects.
    Test(TestArgs),
    /// Run a size/power experiment on a synthetic scenario.
    Simulate(SimulateArgs),
    /// Evaluate a closed-form Wasserstein bound for empirical measures.
    Wbound(WboundArgs),
    /// Run the fast invariant suite; exit 0 iff every check passes.
    Selftest(SelftestArgs),
}

#[derive(Args, Serialize)]
struct TestArgs {
    /// CSV input: one row per time step, x columns then y columns; an
    /// x1..,y1.. header row is accepted.
    #[arg(long)]
    input: PathBuf,
    /// Number of leading x columns.
    #[arg(long, default_value_t = 1)]
    xdim: usize,
    /// Number of trailing y columns.
    #[arg(long, default_value_t = 1)]
    ydim: usize,
    /// Block-length exponent: d = max(1, floor((ln n)^gamma)).
    #[arg(long, conflicts_with = "block_len")]
    gamma: Option<f64>,
    /// Fixed block length instead of the gamma rule.
    #[arg(long)]
    block_len: Option<usize>,
    /// Bootstrap replicates B.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Test level.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Base seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Group this many consecutive observations into one row first.
    #[arg(long)]
    vectorize: Option<usize>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Scenario: independent | linear:<kappa> | cross-lag | common:<kappa>.
    #[arg(long)]
    scenario: String,
    /// AR(1) coefficient of the base processes (0 for iid); cross-lag
    /// always uses an iid base.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// Observations per repetition.
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Outer repetitions.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Block-length exponent for the inner test.
    #[arg(long, conflicts_with = "block_len")]
    gamma: Option<f64>,
    /// Fixed inner block length.
    #[arg(long)]
    block_len: Option<usize>,
    /// Bootstrap replicates B per repetition.
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    /// Inner test level.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Base seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vectorization stride of the inner test.
    #[arg(long, conflicts_with = "compare_vectorize")]
    vectorize: Option<usize>,
    /// Write per-repetition statistics as CSV (stride-1 run when
    /// comparing).
    #[arg(long)]
    emit_stats: Option<PathBuf>,
    /// Run strides 1 and 2 on the same data and report both.
    #[arg(long)]
    compare_vectorize: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Variant {
    /// Moment bound under a polynomial strong-mixing rate.
    Alpha,
    /// Stationary-segment bound with a second moment order.
    Stationary,
    /// Bounded-support bound under summable phi-mixing.
    Phi,
}

impl Variant {
    fn name(self) -> &'static str {
        match self {
            Variant::Alpha => "alpha",
            Variant::Stationary => "stationary",
            Variant::Phi => "phi",
        }
    }
}

#[derive(Args, Serialize)]
struct WboundArgs {
    #[arg(long, value_enum)]
    variant: Variant,
    /// Transport cost exponent p >= 1.
    #[arg(long)]
    p: f64,
    /// State-space dimension.
    #[arg(long)]
    d: usize,
    /// Sample size.
    #[arg(long)]
    n: usize,
    /// Occupation variance constant c0.
    #[arg(long)]
    c0: f64,
    /// Moment order q > p (alpha, stationary).
    #[arg(long)]
    q: Option<f64>,
    /// Truncation radius K (alpha).
    #[arg(long)]
    k: Option<f64>,
    /// Cube-count constant M (alpha, stationary).
    #[arg(long)]
    m: Option<f64>,
    /// Mixing-rate exponent r0 (alpha, stationary).
    #[arg(long)]
    r0: Option<f64>,
    /// q-th absolute moment (alpha, stationary).
    #[arg(long)]
    m_q: Option<f64>,
    /// Segment dimension d' (stationary).
    #[arg(long)]
    d_prime: Option<usize>,
    /// Segment q-th moment (stationary).
    #[arg(long)]
    m_q_prime: Option<f64>,
    /// Segment mixing constant c' (stationary).
    #[arg(long)]
    c_prime: Option<f64>,
    /// Known tail probability replacing the Markov default (alpha).
    #[arg(long)]
    tail_prob: Option<f64>,
    /// Support diameter (phi).
    #[arg(long)]
    diam: Option<f64>,
}

#[derive(Args, Serialize)]
struct SelftestArgs {
    /// Perturb one internal check to validate failure reporting.
    #[arg(long)]
    inject_failure: bool,
}

/// Command failure carrying its process exit code.
struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn usage(message: impl Into<String>) -> Self {
        CmdError { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        CmdError { code: EXIT_DATA, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = Instant::now();
    let run = resolve_threads(cli.threads).and_then(|threads| {
        if let Some(t) = threads {
            // Ignore the error from a pool that is already initialized
            // (only possible in-process, e.g. under a test harness).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        match &cli.command {
            Command::Test(args) => cmd_test(args, started),
            Command::Simulate(args) => cmd_simulate(args, started),
            Command::Wbound(args) => cmd_wbound(args, started),
            Command::Selftest(args) => cmd_selftest(args, started),
        }
    });
    match run {
        Ok(code) => ExitCode::from(code),
        Err(CmdError { code, message }) => {
            eprintln!("depcov: {message}");
            ExitCode::from(code)
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CmdError> {
    let requested = match flag {
        Some(t) => Some(t),
        None => match std::env::var("DEPCOV_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                CmdError::usage(format!("DEPCOV_THREADS must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if requested == Some(0) {
        return Err(CmdError::usage("--threads must be at least 1"));
    }
    Ok(requested)
}

/// Prints the single-line JSON run report on stdout.
fn emit_report(config: Value, seed: u64, results: Value, started: Instant) {
    #[derive(Serialize)]
    struct RunReport {
        schema_version: &'static str,
        command: String,
        config: Value,
        seed: u64,
        results: Value,
        versions: Value,
        wall_time_s: f64,
    }
    let report = RunReport {
        schema_version: "1",
        command: std::env::args().skip(1).collect::<Vec<_>>().join(" "),
        config,
        seed,
        results,
        versions: json!({
            "depcov": env!("CARGO_PKG_VERSION"),
            "depcov-cli": env!("CARGO_PKG_VERSION"),
        }),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
}

fn build_config(
    gamma: Option<f64>,
    block_len: Option<usize>,
    replicates: usize,
    alpha: f64,
    seed: u64,
    vectorize: Option<usize>,
) -> BootstrapConfig {
    let cfg = match block_len {
        Some(d) => BootstrapConfig::with_block_len(d, replicates, alpha, seed),
        None => BootstrapConfig::from_gamma(gamma.unwrap_or(DEFAULT_GAMMA), replicates, alpha, seed),
    };
    match vectorize {
        Some(j) => cfg.stride(j),
        None => cfg,
    }
}

fn bootstrap_error(e: BootstrapError) -> CmdError {
    match e {
        BootstrapError::GammaOutOfRange { .. }
        | BootstrapError::AlphaOutOfRange { .. }
        | BootstrapError::NoReplicates
        | BootstrapError::ZeroStride => CmdError::usage(e.to_string()),
        other => CmdError::data(other.to_string()),
    }
}

fn sample_error(e: SampleError) -> CmdError {
    match e {
        SampleError::ZeroDimension { .. } => CmdError::usage(e.to_string()),
        other => CmdError::data(other.to_string()),
    }
}

fn cmd_test(args: &TestArgs, started: Instant) -> Result<u8, CmdError> {
    let cfg = build_config(args.gamma, args.block_len, args.reps, args.alpha, args.seed, args.vectorize);
    let sample = load_csv(&args.input, args.xdim, args.ydim).map_err(sample_error)?;
    let outcome = independence_test(&sample, &cfg).map_err(bootstrap_error)?;
    let reject = outcome.reject;
    let config = serde_json::to_value(args).expect("flags serialize");
    emit_report(config, args.seed, serde_json::to_value(&outcome).unwrap(), started);
    Ok(if reject { EXIT_REJECT } else { EXIT_OK })
}

fn parse_scenario(text: &str, phi: f64) -> Result<Scenario, CmdError> {
    let base = |phi: f64| {
        if phi == 0.0 {
            ArmaSpec::iid(Innovation::Gaussian { sigma: 1.0 })
        } else {
            ArmaSpec::new(vec![phi], Vec::new(), Innovation::Gaussian { sigma: 1.0 })
        }
    };
    let kappa_of = |rest: &str, what: &str| {
        rest.parse::<f64>().map_err(|_| {
            CmdError::usage(format!("{what} needs a numeric strength, got {rest:?}"))
        })
    };
    if text == "independent" {
        Ok(Scenario::independent_pair(base(phi), base(phi)))
    } else if text == "cross-lag" {
        Ok(Scenario::cross_lag(ArmaSpec::iid(Innovation::Gaussian { sigma: 1.0 })))
    } else if let Some(rest) = text.strip_prefix("linear:") {
        Ok(Scenario::linear_dependent(kappa_of(rest, "linear:<kappa>")?, base(phi), base(phi)))
    } else if let Some(rest) = text.strip_prefix("common:") {
        Ok(Scenario::common_factor(kappa_of(rest, "common:<kappa>")?, base(phi), base(phi)))
    } else {
        Err(CmdError::usage(format!(
            "unknown scenario {text:?}; expected independent | linear:<kappa> | cross-lag | common:<kappa>"
        )))
    }
}

fn cmd_simulate(args: &SimulateArgs, started: Instant) -> Result<u8, CmdError> {
    let scenario = parse_scenario(&args.scenario, args.phi)?;
    let run = |stride: Option<usize>, salt: u64| {
        let cfg = build_config(args.gamma, args.block_len, args.replicates, args.alpha, args.seed, stride);
        size_power_experiment(&scenario, args.n, args.reps, &cfg, derive_seed(args.seed, salt))
            .map_err(|e| CmdError::usage(e.to_string()))
    };
    let primary = run(args.vectorize, 0)?;
    if let Some(path) = &args.emit_stats {
        let mut csv = String::from("rep,statistic,quantile,p_value,reject\n");
        for r in &primary.rep_summaries {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.rep, r.statistic, r.quantile, r.p_value, r.reject
            ));
        }
        std::fs::write(path, csv).map_err(|e| {
            CmdError::data(format!("cannot write {}: {e}", path.display()))
        })?;
    }
    let results = if args.compare_vectorize {
        // Same experiment seed: both strides see identical simulated data.
        let vectorized = run(Some(2), 0)?;
        json!({ "plain": primary, "vectorized": vectorized })
    } else {
        serde_json::to_value(&primary).unwrap()
    };
    let config = serde_json::to_value(args).expect("flags serialize");
    emit_report(config, args.seed, results, started);
    Ok(EXIT_OK)
}

fn cmd_wbound(args: &WboundArgs, started: Instant) -> Result<u8, CmdError> {
    fn req<T: Copy>(v: Option<T>, flag: &str, variant: &str) -> Result<T, CmdError> {
        v.ok_or_else(|| CmdError::usage(format!("--{flag} is required for --variant {variant}")))
    }
    let v = args.variant.name();
    let bound = match args.variant {
        Variant::Phi => {
            bound_phi_mixing(args.p, args.d, args.n, args.c0, req(args.diam, "diam", v)?)
        }
        Variant::Alpha | Variant::Stationary => {
            let params = BoundParams {
                p: args.p,
                q: req(args.q, "q", v)?,
                d: args.d,
                n: args.n,
                // K enters the alpha bound only; the stationary variant
                // keeps the field at a valid placeholder.
                k: if args.variant == Variant::Alpha { req(args.k, "k", v)? } else { args.k.unwrap_or(1.0) },
                m: req(args.m, "m", v)?,
                c0: args.c0,
                r0: req(args.r0, "r0", v)?,
                m_q: req(args.m_q, "m-q", v)?,
                d_prime: if args.variant == Variant::Stationary { req(args.d_prime, "d-prime", v)? } else { args.d_prime.unwrap_or(1) },
                m_q_prime: if args.variant == Variant::Stationary { req(args.m_q_prime, "m-q-prime", v)? } else { args.m_q_prime.unwrap_or(0.0) },
                c_prime: if args.variant == Variant::Stationary { req(args.c_prime, "c-prime", v)? } else { args.c_prime.unwrap_or(1.0) },
                tail_prob: args.tail_prob,
            };
            match args.variant {
                Variant::Alpha => bound_alpha_mixing(&params),
                _ => bound_stationary_segments(&params),
            }
        }
    }
    .map_err(|e| CmdError::usage(e.to_string()))?;
    let config = serde_json::to_value(args).expect("flags serialize");
    emit_report(config, 0, json!({ "variant": v, "bound": bound }), started);
    Ok(EXIT_OK)
}

/// One named selftest check; `Err` carries the failure detail.
type Check = (&'static str, Result<(), String>);

fn selftest_checks(inject_failure: bool) -> Vec<Check> {
    vec![
        ("oracle-equivalence", check_oracle(inject_failure)),
        ("block-kernel-identity", check_block_kernel()),
        ("projection-degeneracy", check_degeneracy()),
        ("transport-metric", check_transport_metric()),
        ("dyadic-dominance", check_dyadic()),
        ("product-subadditivity", check_subadditivity()),
        ("zeta-functions", check_zeta()),
        ("phi-bound-example", check_phi_example()),
    ]
}

fn random_sample(seed: u64, n: usize, x_dim: usize, y_dim: usize) -> PairedSample<f64> {
    let mut rng = substream(seed, 0);
    let xs: Vec<f64> = (0..n * x_dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    let ys: Vec<f64> = (0..n * y_dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    PairedSample::new(x_dim, y_dim, xs, ys).expect("valid sample")
}

fn check_oracle(inject_failure: bool) -> Result<(), String> {
    for case in 0..25u64 {
        let mut rng = substream(derive_seed(0x5E1F, case), 0);
        let n = rng.random_range(2usize..=8);
        let x_dim = rng.random_range(1usize..=2);
        let y_dim = rng.random_range(1usize..=2);
        let s = random_sample(derive_seed(0x5E1F, 100 + case), n, x_dim, y_dim);
        let mut fast = dcov_fast(&s).map_err(|e| e.to_string())?.value();
        if inject_failure && case == 0 {
            fast += 1e-3;
        }
        let oracle = dcov_v_oracle(&s).map_err(|e| e.to_string())?.value();
        if (fast - oracle).abs() > 1e-10 * (1.0 + oracle.abs()) {
            return Err(format!("case {case}: fast {fast} vs oracle {oracle}"));
        }
    }
    Ok(())
}

fn check_block_kernel() -> Result<(), String> {
    for (n, d) in [(4usize, 2usize), (6, 3), (8, 4)] {
        let s = random_sample(derive_seed(0x5E2F, (n * 16 + d) as u64), n, 1, 2);
        let part = depcov::sample::partition_blocks(&s, d).map_err(|e| e.to_string())?;
        let nb = part.block_count();
        let mut sum = 0.0f64;
        let mut ks = [0usize; 6];
        loop {
            sum += depcov::dcov::block_kernel_h(&part, ks);
            let mut pos = 5;
            loop {
                ks[pos] += 1;
                if ks[pos] < nb {
                    break;
                }
                ks[pos] = 0;
                if pos == 0 {
                    break;
                }
                pos -= 1;
            }
            if ks.iter().all(|&k| k == 0) {
                break;
            }
        }
        let mean = sum / (nb as f64).powi(6);
        let direct = dcov_fast(&part.flatten()).map_err(|e| e.to_string())?.value();
        if (mean - direct).abs() > 1e-10 * (1.0 + direct.abs()) {
            return Err(format!("(n={n}, d={d}): kernel mean {mean} vs direct {direct}"));
        }
    }
    Ok(())
}

fn check_degeneracy() -> Result<(), String> {
    for case in 0..3u64 {
        let mut rng = substream(derive_seed(0x5E3F, case), 0);
        let nx = rng.random_range(40usize..=80);
        let ny = rng.random_range(40usize..=80);
        let x_pool: Vec<f64> = (0..nx).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y_pool: Vec<f64> = (0..ny).map(|_| rng.random_range(-3.0..3.0)).collect();
        let zx = [rng.random_range(-3.0..3.0)];
        let zy = [rng.random_range(-3.0..3.0)];
        let (est, se) = hoeffding_h1_estimate(
            &zx,
            &zy,
            &x_pool,
            1,
            &y_pool,
            1,
            2000,
            derive_seed(0x5E3F, 100 + case),
        )
        .map_err(|e| e.to_string())?;
        if est.abs() > 4.0 * se {
            return Err(format!("case {case}: estimate {est} exceeds 4 x SE {se}"));
        }
    }
    Ok(())
}

fn measure(seed: u64, dim: usize, k: usize) -> EmpiricalMeasure {
    let mut rng = substream(seed, 0);
    let atoms: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    EmpiricalMeasure::uniform(dim, atoms).expect("valid measure")
}

fn check_transport_metric() -> Result<(), String> {
    let a = measure(0x5E4F, 2, 5);
    let b = measure(0x5E50, 2, 7);
    let c = measure(0x5E51, 2, 4);
    for p in [1.0, 2.0] {
        let daa = w_exact_discrete(p, &a, &a).map_err(|e| e.to_string())?;
        if daa != 0.0 {
            return Err(format!("p={p}: self-distance {daa} not exactly zero"));
        }
        let dab = w_exact_discrete(p, &a, &b).map_err(|e| e.to_string())?;
        let dba = w_exact_discrete(p, &b, &a).map_err(|e| e.to_string())?;
        if (dab - dba).abs() > 1e-10 * (1.0 + dab) {
            return Err(format!("p={p}: asymmetry {dab} vs {dba}"));
        }
        let dac = w_exact_discrete(p, &a, &c).map_err(|e| e.to_string())?;
        let dcb = w_exact_discrete(p, &c, &b).map_err(|e| e.to_string())?;
        if dab > dac + dcb + 1e-9 {
            return Err(format!("p={p}: triangle violated: {dab} > {dac} + {dcb}"));
        }
    }
    // The sorted coupling and the general solver agree in one dimension.
    let u = measure(0x5E52, 1, 6);
    let v = measure(0x5E53, 1, 6);
    let direct = w_exact_1d(2.0, &u, &v).map_err(|e| e.to_string())?;
    let general = w_exact_discrete(2.0, &u, &v).map_err(|e| e.to_string())?;
    if (direct - general).abs() > 1e-9 * (1.0 + direct) {
        return Err(format!("1d coupling {direct} vs solver {general}"));
    }
    Ok(())
}

fn check_dyadic() -> Result<(), String> {
    for inst in 0..5u64 {
        let mut rng = substream(derive_seed(0x5E5F, inst), 0);
        let k = rng.random_range(4usize..=12);
        let atoms: Vec<f64> = (0..2 * k).map(|_| rng.random_range(0.0..1.0)).collect();
        let reference = EmpiricalMeasure::uniform(2, atoms.clone()).expect("valid measure");
        let mut counts = vec![0usize; k];
        for _ in 0..32 {
            counts[rng.random_range(0..k)] += 1;
        }
        let mut oa = Vec::new();
        let mut ow = Vec::new();
        for (i, &cnt) in counts.iter().enumerate() {
            if cnt > 0 {
                oa.extend_from_slice(&atoms[2 * i..2 * i + 2]);
                ow.push(cnt as f64 / 32.0);
            }
        }
        let observed = EmpiricalMeasure::weighted(2, oa, ow).expect("valid measure");
        let exact = w_exact_discrete(1.0, &reference, &observed).map_err(|e| e.to_string())?;
        let params = DyadicPartitionParams { max_level: 5, side: 1.0 };
        let bound = dyadic_bound(1.0, &reference, &observed, &params).map_err(|e| e.to_string())?;
        if bound < exact - 1e-9 * (1.0 + exact) {
            return Err(format!("instance {inst}: bound {bound} below exact {exact}"));
        }
    }
    Ok(())
}

fn check_subadditivity() -> Result<(), String> {
    for inst in 0..6u64 {
        let p = [1.0, 2.0, 3.0][(inst % 3) as usize];
        let eta1 = measure(derive_seed(0x5E6F, 4 * inst), 1, 4);
        let xi1 = measure(derive_seed(0x5E6F, 4 * inst + 1), 1, 3);
        let eta2 = measure(derive_seed(0x5E6F, 4 * inst + 2), 2, 4);
        let xi2 = measure(derive_seed(0x5E6F, 4 * inst + 3), 2, 5);
        let ok = product_subadditivity_check(p, &eta1, &xi1, &eta2, &xi2)
            .map_err(|e| e.to_string())?;
        if !ok {
            return Err(format!("instance {inst} (p={p}) violated"));
        }
    }
    Ok(())
}

fn check_zeta() -> Result<(), String> {
    let z2 = riemann_zeta(2.0).map_err(|e| e.to_string())?;
    let target = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    if (z2 - target).abs() > 1e-12 {
        return Err(format!("zeta(2) = {z2}, expected {target}"));
    }
    // The piecewise rate is continuous at the n^{-1/2} breakpoint and
    // monotone on a grid spanning all three branches.
    let (n, r, c0) = (400usize, 2.0, 3.0);
    let at = |xi: f64| zeta_nr(xi, n, r, c0).map_err(|e| e.to_string());
    let breakpoint = (n as f64).powf(-0.5);
    let (lo, hi) = (at(breakpoint * (1.0 - 1e-9))?, at(breakpoint * (1.0 + 1e-9))?);
    if (lo - hi).abs() > 1e-6 * hi {
        return Err(format!("discontinuity at n^-1/2: {lo} vs {hi}"));
    }
    let mut prev = 0.0;
    for i in 1..=100 {
        let cur = at(i as f64 / 100.0)?;
        if cur < prev {
            return Err(format!("not monotone at xi={}", i as f64 / 100.0));
        }
        prev = cur;
    }
    Ok(())
}

fn check_phi_example() -> Result<(), String> {
    let bound = bound_phi_mixing(1.0, 4, 16, 2.5, 2.0).map_err(|e| e.to_string())?;
    if (bound - 320.0).abs() > 1e-9 * 320.0 {
        return Err(format!("worked example gave {bound}, expected 320"));
    }
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs, started: Instant) -> Result<u8, CmdError> {
    let checks = selftest_checks(args.inject_failure);
    let total = checks.len();
    let mut failures = Vec::new();
    for (name, outcome) in checks {
        if let Err(detail) = outcome {
            eprintln!("depcov: selftest check {name} failed: {detail}");
            failures.push(name);
        }
    }
    let config = serde_json::to_value(args).expect("flags serialize");
    let passed = total - failures.len();
    emit_report(
        config,
        0,
        json!({ "checks": total, "passed": passed, "failures": failures }),
        started,
    );
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_USAGE })
}
