//! Command-line front end: simulation, transform checks, independence tests
//! and the closed-form event checks, all writing reproducible CSV or JSON.

mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use marked_renewal::analytics::{
    discrete_renewal_mass, remark3_incompatibility, remark3_monte_carlo, remark_rows_csv, summed_tail_residual,
};
use marked_renewal::characterization::theorem1_report;
use marked_renewal::sim::{batch_sample_epoch_pairs, read_pairs_csv, write_pairs_csv, DEFAULT_ARRIVAL_CAP};
use marked_renewal::stats::{
    chi2_independence_test, hpp_decision, permutation_dcov_test, HppOptions, TestReport, DEFAULT_ALPHA,
    DEFAULT_BINS, DEFAULT_PERMUTATIONS,
};
use marked_renewal::transforms::{grid_scan, Equation, GridSpec};
use marked_renewal::{
    classify_pair, make_case_laws, predict_independence, CaseDescriptor, EpochPair, EpochStatus, ExtendedLaw,
    RandomStream, SimConfig,
};

use output::{opt, real, sink, write_config_comment, write_json, Format};

/// Simulate Bernoulli-marked renewal processes and check independence of
/// the first epochs of the two marked sub-processes.
#[derive(Debug, Parser)]
#[command(name = "marked-renewal", version)]
struct Cli {
    /// Seed for every random draw (simulation, permutations).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Output format (default depends on the command).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate first-epoch pairs (R0, R1).
    Simulate(SimulateArgs),
    /// Evaluate a functional-equation residual on a grid.
    VerifyEq(VerifyArgs),
    /// Test independence of R0 and R1 from a pairs CSV.
    TestIndependence(TestArgs),
    /// Decide whether a sample is consistent with a Poisson process.
    HppTest(HppArgs),
    /// Closed-form burst-event probabilities against Monte Carlo.
    RemarkChecks(RemarkArgs),
    /// Stationarity of the discrete renewal measure for the lattice family.
    Stationarity(StationarityArgs),
    /// Match a law pair against the independence cases.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseKind {
    A,
    B,
    C,
    D,
    E,
}

/// Law pair given either as expressions or through a case constructor.
#[derive(Debug, Args)]
struct LawArgs {
    /// Law of the first waiting time, e.g. "exp(rate=1, shift=0.5)".
    #[arg(long)]
    t1: Option<String>,
    /// Law of the later waiting times.
    #[arg(long)]
    t2: Option<String>,
    /// Build the pair from an independence case instead.
    #[arg(long, value_enum, conflicts_with_all = ["t1", "t2"])]
    case: Option<CaseKind>,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.5)]
    q0: f64,
    /// Lattice scale (case e).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

struct Laws {
    t1: ExtendedLaw,
    t2: ExtendedLaw,
    case: Option<CaseDescriptor>,
}

impl Laws {
    fn config(&self) -> Value {
        json!({
            "t1": self.t1.to_string(),
            "t2": self.t2.to_string(),
            "case": self.case,
        })
    }
}

impl LawArgs {
    fn descriptor(&self) -> Option<CaseDescriptor> {
        let (kappa, theta, q0, alpha) = (self.kappa, self.theta, self.q0, self.alpha);
        self.case.map(|k| match k {
            CaseKind::A => CaseDescriptor::A,
            CaseKind::B => CaseDescriptor::B { kappa },
            CaseKind::C => CaseDescriptor::C { kappa, q0 },
            CaseKind::D => CaseDescriptor::D { kappa, theta },
            CaseKind::E => CaseDescriptor::E { kappa, q0, alpha },
        })
    }

    fn resolve_optional(&self) -> Result<Option<Laws>> {
        if let Some(case) = self.descriptor() {
            let (t1, t2) = make_case_laws(&case)?;
            return Ok(Some(Laws {
                t1,
                t2,
                case: Some(case),
            }));
        }
        match (&self.t1, &self.t2) {
            (None, None) => Ok(None),
            (Some(a), Some(b)) => Ok(Some(Laws {
                t1: ExtendedLaw::parse(a).with_context(|| format!("--t1 '{a}'"))?,
                t2: ExtendedLaw::parse(b).with_context(|| format!("--t2 '{b}'"))?,
                case: None,
            })),
            _ => bail!("give both --t1 and --t2, or --case"),
        }
    }

    fn resolve(&self) -> Result<Laws> {
        self.resolve_optional()?
            .ok_or_else(|| anyhow!("laws required: give --t1 and --t2, or --case"))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    laws: LawArgs,
    /// Probability of mark 1.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Number of replications.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_ARRIVAL_CAP)]
    arrival_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EquationKind {
    Eq1,
    Eq2,
    Eq3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Zero,
    Nonzero,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    laws: LawArgs,
    #[arg(long, value_enum, default_value_t = EquationKind::Eq2)]
    equation: EquationKind,
    /// Mark probability (eq1 only).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 5.0)]
    hi: f64,
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Extra points on the diagonal λ = μ (0 disables).
    #[arg(long, default_value_t = 101)]
    diagonal_points: usize,
    /// Expected outcome; a violated expectation exits with status 1.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    /// Bound on max |residual| for `--expect zero`.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Lower bound on max |residual| for `--expect nonzero`.
    #[arg(long, default_value_t = 0.01)]
    margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Chi2,
    PermDcov,
    Both,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Pairs CSV as written by `simulate`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    /// Exit with status 1 when independence is rejected.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct HppArgs {
    /// Pairs CSV; when absent, pairs are simulated from the declared laws.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Declared laws (optional with --input).
    #[command(flatten)]
    laws: LawArgs,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BurstCase {
    C,
    E,
}

#[derive(Debug, Args)]
struct RemarkArgs {
    #[arg(long, default_value_t = 0.5)]
    q0: f64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, value_enum, default_value_t = BurstCase::E)]
    case: BurstCase,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct StationarityArgs {
    #[arg(long, default_value_t = 0.5)]
    q0: f64,
    #[arg(long, default_value_t = 500)]
    n_max: usize,
    /// Terms checked in the tail identity.
    #[arg(long, default_value_t = 500)]
    k_max: usize,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    laws: LawArgs,
}

/// Outcome of a command that may signal a failed expectation.
enum Status {
    Ok,
    Violated,
}

struct Ctx {
    seed: u64,
    output: Option<PathBuf>,
    format: Option<Format>,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        sink(self.output.as_deref())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violated) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let ctx = Ctx {
        seed: cli.seed,
        output: cli.output,
        format: cli.format,
    };
    let command = cli.command;
    with_threads(cli.threads, move || dispatch(&ctx, command))
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot build thread pool")?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    if threads.is_some_and(|n| n > 1) {
        eprintln!("note: built without the parallel feature; running on one thread");
    }
    f()
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<Status> {
    match command {
        Command::Simulate(a) => simulate(ctx, &a),
        Command::VerifyEq(a) => verify_eq(ctx, &a),
        Command::TestIndependence(a) => test_independence(ctx, &a),
        Command::HppTest(a) => hpp_test(ctx, &a),
        Command::RemarkChecks(a) => remark_checks(ctx, &a),
        Command::Stationarity(a) => stationarity(ctx, &a),
        Command::Classify(a) => classify(ctx, &a),
    }
}

#[derive(Debug, Serialize)]
struct MarginSummary {
    observed: f64,
    infinite_exact: f64,
    horizon_censored: f64,
    mean_observed: Option<f64>,
}

fn margin_summary(values: impl Iterator<Item = (f64, EpochStatus)>) -> MarginSummary {
    let (mut n, mut obs, mut inf, mut cens, mut sum) = (0usize, 0usize, 0usize, 0usize, 0.0);
    for (v, s) in values {
        n += 1;
        match s {
            EpochStatus::Observed => {
                obs += 1;
                sum += v;
            }
            EpochStatus::InfiniteExact => inf += 1,
            EpochStatus::HorizonCensored => cens += 1,
        }
    }
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    MarginSummary {
        observed: frac(obs),
        infinite_exact: frac(inf),
        horizon_censored: frac(cens),
        mean_observed: (obs > 0).then(|| sum / obs as f64),
    }
}

fn summarize(pairs: &[EpochPair]) -> Value {
    json!({
        "n": pairs.len(),
        "r0": margin_summary(pairs.iter().map(|p| (p.r0, p.r0_status))),
        "r1": margin_summary(pairs.iter().map(|p| (p.r1, p.r1_status))),
    })
}

fn sim_config(laws: &Laws, p: f64, horizon: f64, cap: usize, seed: u64) -> Result<SimConfig> {
    Ok(SimConfig::new(laws.t1.clone(), laws.t2.clone(), p, horizon, RandomStream::new(seed, 0))?
        .with_arrival_cap(cap)?)
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Status> {
    if a.n == 0 {
        bail!("--n must be at least 1");
    }
    let laws = a.laws.resolve()?;
    let cfg = sim_config(&laws, a.p, a.horizon, a.arrival_cap, ctx.seed)?;
    let pairs = batch_sample_epoch_pairs(&cfg, a.n);
    let config = json!({
        "command": "simulate",
        "laws": laws.config(),
        "p": a.p,
        "n": a.n,
        "horizon": a.horizon,
        "arrival_cap": a.arrival_cap,
        "seed": ctx.seed,
    });
    let summary = summarize(&pairs);
    let mut out = ctx.sink()?;
    match ctx.format(Format::Csv) {
        Format::Csv => {
            write_config_comment(&mut *out, &config)?;
            write_pairs_csv(&mut *out, &pairs)?;
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
        Format::Json => write_json(
            &mut *out,
            &json!({ "config": config, "summary": summary, "pairs": pairs }),
        )?,
    }
    out.flush()?;
    Ok(Status::Ok)
}

fn verify_eq(ctx: &Ctx, a: &VerifyArgs) -> Result<Status> {
    let laws = a.laws.resolve()?;
    let equation = match a.equation {
        EquationKind::Eq1 => Equation::Eq1 { p: a.p },
        EquationKind::Eq2 => Equation::Eq2,
        EquationKind::Eq3 => Equation::Eq3,
    };
    let spec = GridSpec {
        lo: a.lo,
        hi: a.hi,
        points: a.points,
        diagonal_points: (a.diagonal_points > 0).then_some(a.diagonal_points),
    };
    let scan = grid_scan(&laws.t1, &laws.t2, spec, equation)?;
    let (passed, threshold) = match a.expect {
        Some(Expect::Zero) => (Some(scan.max_abs <= a.tol), Some(a.tol)),
        Some(Expect::Nonzero) => (Some(scan.max_abs >= a.margin), Some(a.margin)),
        None => (None, None),
    };
    let config = json!({
        "command": "verify-eq",
        "laws": laws.config(),
        "equation": equation,
        "grid": spec,
        "expect": a.expect.map(|e| match e { Expect::Zero => "zero", Expect::Nonzero => "nonzero" }),
        "threshold": threshold,
    });
    let summary = json!({
        "max_abs": scan.max_abs,
        "argmax": scan.argmax,
        "passed": passed,
    });
    let mut out = ctx.sink()?;
    match ctx.format(Format::Json) {
        Format::Csv => {
            write_config_comment(&mut *out, &config)?;
            writeln!(out, "lambda,mu,residual")?;
            for (l, m, r) in scan.rows() {
                writeln!(out, "{l},{m},{r}")?;
            }
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
        Format::Json => write_json(
            &mut *out,
            &json!({ "config": config, "summary": summary, "grid": scan.grid, "diagonal": scan.diagonal }),
        )?,
    }
    out.flush()?;
    Ok(if passed == Some(false) {
        Status::Violated
    } else {
        Status::Ok
    })
}

fn read_pairs(path: &Path) -> Result<Vec<EpochPair>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_pairs_csv(&text).with_context(|| format!("malformed pairs CSV {}", path.display()))
}

fn write_reports(out: &mut dyn Write, reports: &[&TestReport]) -> Result<()> {
    writeln!(
        out,
        "method,statistic,p_value,alpha,decision,n,seed,df,permutations,untestable"
    )?;
    for r in reports {
        let method = serde_json::to_value(r.method)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            method.as_str().unwrap_or_default(),
            real(r.statistic),
            real(r.p_value),
            r.alpha,
            r.decision,
            r.n,
            opt(r.seed),
            opt(r.df),
            opt(r.permutations),
            r.untestable.as_deref().unwrap_or_default().replace(',', ";"),
        )?;
    }
    Ok(())
}

fn test_independence(ctx: &Ctx, a: &TestArgs) -> Result<Status> {
    let pairs = read_pairs(&a.input)?;
    let mut reports = Vec::new();
    if matches!(a.method, Method::Chi2 | Method::Both) {
        reports.push(chi2_independence_test(&pairs, a.bins, a.level)?);
    }
    if matches!(a.method, Method::PermDcov | Method::Both) {
        reports.push(permutation_dcov_test(&pairs, a.permutations, a.level, ctx.seed)?);
    }
    let config = json!({
        "command": "test-independence",
        "input": a.input.display().to_string(),
        "method": a.method.to_possible_value().map(|v| v.get_name().to_owned()),
        "alpha": a.level,
        "bins": a.bins,
        "permutations": a.permutations,
        "seed": ctx.seed,
        "strict": a.strict,
    });
    let rejected = reports.iter().any(TestReport::rejects);
    let mut out = ctx.sink()?;
    match ctx.format(Format::Json) {
        Format::Csv => {
            write_config_comment(&mut *out, &config)?;
            write_reports(&mut *out, &reports.iter().collect::<Vec<_>>())?;
        }
        Format::Json => write_json(
            &mut *out,
            &json!({ "config": config, "reports": reports, "rejected": rejected }),
        )?,
    }
    out.flush()?;
    Ok(if a.strict && rejected {
        Status::Violated
    } else {
        Status::Ok
    })
}

fn hpp_test(ctx: &Ctx, a: &HppArgs) -> Result<Status> {
    let laws = a.laws.resolve_optional()?;
    let (pairs, source) = match (&a.input, &laws) {
        (Some(path), _) => (read_pairs(path)?, json!({ "input": path.display().to_string() })),
        (None, Some(l)) => {
            let cfg = sim_config(l, a.p, a.horizon, DEFAULT_ARRIVAL_CAP, ctx.seed)?;
            (
                batch_sample_epoch_pairs(&cfg, a.n),
                json!({ "simulated": { "p": a.p, "n": a.n, "horizon": a.horizon } }),
            )
        }
        (None, None) => bail!("give --input, or declared laws to simulate from"),
    };
    let opts = HppOptions {
        alpha: a.level,
        bins: a.bins,
        permutations: a.permutations,
        seed: ctx.seed,
    };
    let report = hpp_decision(laws.as_ref().map(|l| (&l.t1, &l.t2)), &pairs, &opts)?;
    let config = json!({
        "command": "hpp-test",
        "laws": laws.as_ref().map(Laws::config),
        "source": source,
        "options": opts,
        "seed": ctx.seed,
    });
    let mut out = ctx.sink()?;
    match ctx.format(Format::Json) {
        Format::Csv => {
            write_config_comment(&mut *out, &config)?;
            writeln!(out, "# verdict: {}", report.label)?;
            write_reports(&mut *out, &[&report.chi2, &report.perm_dcov])?;
        }
        Format::Json => write_json(&mut *out, &json!({ "config": config, "report": report }))?,
    }
    out.flush()?;
    Ok(Status::Ok)
}

fn remark_checks(ctx: &Ctx, a: &RemarkArgs) -> Result<Status> {
    let case = match a.case {
        BurstCase::C => CaseDescriptor::C {
            kappa: a.kappa,
            q0: a.q0,
        },
        BurstCase::E => CaseDescriptor::E {
            kappa: a.kappa,
            q0: a.q0,
            alpha: a.alpha,
        },
    };
    let check = remark3_monte_carlo(&case, a.p, a.n, ctx.seed)?;
    let (c1, c2) = remark3_incompatibility(a.q0, a.p)?;
    let config = json!({
        "command": "remark-checks",
        "case": case,
        "p": a.p,
        "n": a.n,
        "seed": ctx.seed,
    });
    let mut out = ctx.sink()?;
    match ctx.format(Format::Json) {
        Format::Csv => {
            write_config_comment(&mut *out, &config)?;
            out.write_all(remark_rows_csv(&check.rows).as_bytes())?;
        }
        Format::Json => write_json(
            &mut *out,
            &json!({
                "config": config,
                "closed_form": check.closed_form,
                "rows": check.rows,
                "independence_gap": check.independence_gap,
                "product_of_marginals": check.closed_form.p_b0 * check.closed_form.p_b1,
                "incompatibility": { "c1": c1, "c2": c2 },
            }),
        )?,
    }
    out.flush()?;
    Ok(Status::Ok)
}

fn stationarity(ctx: &Ctx, a: &StationarityArgs) -> Result<Status> {
    let v = discrete_renewal_mass(a.q0, a.n_max)?;
    let target = (1.0 - a.q0 * a.q0) / a.q0;
    let max_dev = v.iter().map(|x| (x - target).abs()).fold(0.0, f64::max);
    let tail = summed_tail_residual(a.q0, a.k_max)?;
    let config = json!({
        "command": "stationarity",
        "q0": a.q0,
        "n_max": a.n_max,
        "k_max": a.k_max,
    });
    let mut out = ctx.sink()?;
    match ctx.format(Format::Json) {
        Format::Csv => {
            write_config_comment(&mut *out, &config)?;
            writeln!(out, "n,v_n,deviation")?;
            for (n, x) in v.iter().enumerate() {
                writeln!(out, "{n},{x},{}", x - target)?;
            }
        }
        Format::Json => write_json(
            &mut *out,
            &json!({
                "config": config,
                "target": target,
                "max_deviation": max_dev,
                "summed_tail_residual": tail,
                "v": v,
            }),
        )?,
    }
    out.flush()?;
    Ok(Status::Ok)
}

fn classify(ctx: &Ctx, a: &ClassifyArgs) -> Result<Status> {
    let laws = a.laws.resolve()?;
    let case = classify_pair(&laws.t1, &laws.t2);
    let theorem1 = theorem1_report(&laws.t1, &laws.t2);
    let mut body = serde_json::to_value(case)?;
    let obj = body.as_object_mut().context("case serializes to an object")?;
    obj.entry("params").or_insert(Value::Null);
    obj.insert("independent".into(), json!(predict_independence(&laws.t1, &laws.t2)));
    obj.insert("theorem1".into(), serde_json::to_value(&theorem1)?);
    obj.insert(
        "config".into(),
        json!({ "command": "classify", "laws": laws.config() }),
    );
    let mut out = ctx.sink()?;
    match ctx.format(Format::Json) {
        Format::Csv => {
            writeln!(out, "case,independent,theorem_applies")?;
            writeln!(
                out,
                "{},{},{}",
                case.label(),
                predict_independence(&laws.t1, &laws.t2),
                theorem1.theorem_applies
            )?;
        }
        Format::Json => write_json(&mut *out, &body)?,
    }
    out.flush()?;
    Ok(Status::Ok)
}
