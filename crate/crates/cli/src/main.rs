//! `mrs`: simulate Poisson SEM data, learn graphs from count CSVs, run
//! benchmark specs and compare graphs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use poisson_mrs::baselines::{oracle_learn, pmrf_neighborhoods, CombineRule};
use poisson_mrs::bench::{self, ExperimentSpec};
use poisson_mrs::graph::{
    cpdag_metrics, cpdag_of, edge_metrics, random_dag, skeleton_metrics, Cpdag, Dag, GraphJson, StructureMetrics,
};
use poisson_mrs::mrs::{mrs_learn, DegeneratePolicy, Folds, MrsConfig, MrsResult};
use poisson_mrs::par;
use poisson_mrs::simulate::{simulate, CountMatrix, Link, ParamRanges, SampleOptions};

#[derive(Parser)]
#[command(name = "mrs", version, about = "Moments ratio scoring for Poisson structural equation models")]
struct Cli {
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, global = true, env = "MRS_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Print progress and diagnostics to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random DAG and parameters, then sample count data.
    Simulate(SimulateArgs),
    /// Learn a graph from a count CSV.
    Fit(FitArgs),
    /// Run an experiment spec.
    Bench(BenchArgs),
    /// Compare an estimated graph JSON with a reference graph JSON.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Log,
    Identity,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    p: usize,
    /// Maximum indegree.
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Family::Log)]
    family: Family,
    /// Intercept range as `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    intercept: Option<(f64, f64)>,
    /// Weight magnitude range as `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    weight: Option<(f64, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LearnerArg {
    Mrs,
    Oracle,
    Pmrf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CombineArg {
    And,
    Or,
}

#[derive(Args)]
struct FitArgs {
    /// Count CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = LearnerArg::Mrs)]
    learner: LearnerArg,
    /// True DAG JSON (required by the oracle).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Learner settings file (TOML, or JSON by extension); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cross-validation folds: a count or `loo`.
    #[arg(long)]
    folds: Option<Folds>,
    /// Skip cross-validation and use this penalty.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fail on degenerate columns instead of quarantining them.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value_t = CombineArg::And)]
    combine: CombineArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec (TOML, or JSON by extension).
    spec: PathBuf,
    /// Output directory; overrides the spec.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Validate and print the plan without running or writing anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct EvalArgs {
    estimated: PathBuf,
    truth: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

/// Distinguishes bad input (exit 2) from failures while working (exit 1).
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Usage<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Usage<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = par::init_thread_pool(cli.jobs) {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&cli, a),
        Command::Fit(a) => cmd_fit(&cli, a),
        Command::Bench(a) => cmd_bench(&cli, a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write(path: &Path, body: &str) -> anyhow::Result<()> {
    fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), Failure> {
    if a.p == 0 || a.n == 0 {
        return Err(anyhow!("p and n must be positive")).usage();
    }
    if a.d >= a.p {
        return Err(anyhow!("indegree d = {} must be smaller than p = {}", a.d, a.p)).usage();
    }
    let link = match a.family {
        Family::Log => Link::Log,
        Family::Identity => Link::Identity,
    };
    let mut ranges = match link {
        Link::Log => ParamRanges::log_link_default(a.d),
        Link::Identity => ParamRanges::identity_link_default(),
    };
    if let Some(r) = a.intercept {
        ranges.intercept = r;
    }
    if let Some(r) = a.weight {
        ranges.weight_magnitude = r;
    }
    ranges.validate().usage()?;
    ensure_dir(&a.out).usage()?;

    let dag = random_dag(a.p, a.d, a.seed).map_err(anyhow::Error::from)?;
    let sim = simulate(&dag, link, &ranges, a.n, a.seed.wrapping_add(1), &SampleOptions::default())
        .map_err(anyhow::Error::from)?;
    if cli.verbose {
        eprintln!("{} parameter regenerations", sim.regenerations);
    }
    let mut csv = Vec::new();
    sim.data.write_csv(&mut csv).map_err(anyhow::Error::from)?;
    write(&a.out.join("data.csv"), std::str::from_utf8(&csv).expect("CSV is UTF-8"))?;
    write(&a.out.join("truth.json"), &dag.to_json().to_string_pretty())?;
    let params = serde_json::to_string_pretty(&sim.sem.to_json()).map_err(anyhow::Error::from)?;
    write(&a.out.join("params.json"), &params)?;
    Ok(())
}

fn read_config(path: &Path) -> anyhow::Result<MrsConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let config: MrsConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
    };
    Ok(config)
}

fn read_graph(path: &Path) -> anyhow::Result<GraphJson> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    GraphJson::parse(&text).with_context(|| format!("invalid graph {}", path.display()))
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<(), Failure> {
    if !a.input.is_file() {
        return Err(anyhow!("input {} does not exist", a.input.display())).usage();
    }
    let truth = match (&a.truth, a.learner) {
        (None, LearnerArg::Oracle) => return Err(anyhow!("--learner oracle needs --truth")).usage(),
        (Some(path), _) => Some(Dag::from_json(&read_graph(path).usage()?).usage()?),
        (None, _) => None,
    };
    let mut config = match &a.config {
        Some(path) => read_config(path).usage()?,
        None => MrsConfig {
            degenerate: DegeneratePolicy::Quarantine,
            ..MrsConfig::default()
        },
    };
    if let Some(f) = a.folds {
        config.folds = f;
    }
    if a.lambda.is_some() {
        config.fixed_lambda = a.lambda;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if a.strict {
        config.degenerate = DegeneratePolicy::Error;
    }
    config.jobs = cli.jobs;
    config.validate().usage()?;
    ensure_dir(&a.out).usage()?;

    let file = fs::File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?;
    let data = CountMatrix::read_csv(file).with_context(|| format!("cannot ingest {}", a.input.display()))?;
    if let Some(t) = &truth {
        if t.p() != data.p() {
            return Err(anyhow!("truth has {} nodes but the data have {} columns", t.p(), data.p())).usage();
        }
    }
    if cli.verbose {
        eprintln!("read {} rows x {} columns", data.n(), data.p());
    }
    let labels = data.labels().to_vec();
    let warn_quarantined = |q: &[usize]| {
        for &j in q {
            eprintln!("warning: column {} ({}) is degenerate and was quarantined", j + 1, labels[j]);
        }
    };

    match a.learner {
        LearnerArg::Mrs | LearnerArg::Oracle => {
            let result: MrsResult = match &truth {
                Some(t) if a.learner == LearnerArg::Oracle => oracle_learn(&data, t, &config),
                _ => mrs_learn(&data, &config),
            }
            .map_err(anyhow::Error::from)?;
            warn_quarantined(&result.quarantined);
            if result.unconverged_fits > 0 {
                eprintln!("warning: {} regressions stopped before the KKT tolerance", result.unconverged_fits);
            }
            let mut json = result.to_json();
            json.graph.labels = Some(labels.clone());
            write(&a.out.join("result.json"), &serde_json::to_string_pretty(&json).map_err(anyhow::Error::from)?)?;
            let mut edges = String::from("parent,child\n");
            for (j, k) in result.dag.edges() {
                edges.push_str(&format!("{},{}\n", labels[j], labels[k]));
            }
            write(&a.out.join("edges.csv"), &edges)?;
            if let Some(t) = &truth {
                print_metrics(&result.dag.to_json(), &t.to_json()).map_err(Failure::Runtime)?;
            }
        }
        LearnerArg::Pmrf => {
            let nb = pmrf_neighborhoods(&data, &config).map_err(anyhow::Error::from)?;
            warn_quarantined(&nb.quarantined);
            let rule = match a.combine {
                CombineArg::And => CombineRule::And,
                CombineArg::Or => CombineRule::Or,
            };
            let graph = nb.combine(rule);
            let mut gj = graph.to_json();
            gj.labels = Some(labels.clone());
            let body = serde_json::json!({
                "graph": gj,
                "combine": rule,
                "neighborhoods": nb.selected.iter().map(|s| s.iter().map(|v| v + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "lambdas": nb.lambdas,
                "sign_violations": nb.sign_violations,
                "quarantined": nb.quarantined.iter().map(|v| v + 1).collect::<Vec<_>>(),
                "unconverged_fits": nb.unconverged_fits,
            });
            write(&a.out.join("result.json"), &serde_json::to_string_pretty(&body).map_err(anyhow::Error::from)?)?;
            let mut edges = String::from("node_a,node_b\n");
            for &(j, k) in graph.edges() {
                edges.push_str(&format!("{},{}\n", labels[j], labels[k]));
            }
            write(&a.out.join("edges.csv"), &edges)?;
            if let Some(t) = &truth {
                print_metrics(&graph.to_json(), &t.to_json()).map_err(Failure::Runtime)?;
            }
        }
    }
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<(), Failure> {
    if !a.spec.is_file() {
        return Err(anyhow!("spec {} does not exist", a.spec.display())).usage();
    }
    let mut spec = ExperimentSpec::from_path(&a.spec).usage()?;
    if let Some(out) = &a.out {
        spec.output_dir = Some(out.clone());
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.jobs = cli.jobs;
    spec.mrs.jobs = cli.jobs;
    spec.validate().usage()?;
    if a.dry_run {
        println!(
            "{} trials x {} sample sizes x {} learners = {} runs (p = {}, d = {}, n = {:?})",
            spec.trials,
            spec.n.len(),
            spec.learners.len(),
            spec.planned_rows(),
            spec.p,
            spec.d,
            spec.n
        );
        match &spec.output_dir {
            Some(d) => println!("would write to {}", d.display()),
            None => println!("no output directory set"),
        }
        return Ok(());
    }
    if spec.output_dir.is_none() {
        return Err(anyhow!("no output directory: set output_dir in the spec or pass --out")).usage();
    }
    let report = bench::run_experiment(&spec).map_err(anyhow::Error::from)?;
    match bench::summarize(&report) {
        Ok(summary) => print!("{}", bench::summary_table(&summary)),
        Err(_) => println!("no successful runs"),
    }
    if !report.failures.is_empty() {
        eprintln!("{} failures recorded in failures.csv", report.failures.len());
    }
    Ok(())
}

/// DAG-level metrics when both graphs are fully directed, CPDAG-level metrics
/// (DAGs converted to their class first) and skeleton metrics.
fn print_metrics(est: &GraphJson, truth: &GraphJson) -> anyhow::Result<()> {
    if est.p != truth.p {
        bail!("graphs have {} and {} nodes", est.p, truth.p);
    }
    let as_dag = |g: &GraphJson| if g.undirected.is_empty() { Dag::from_json(g).ok() } else { None };
    let as_cpdag = |g: &GraphJson| -> anyhow::Result<Cpdag> {
        Ok(match as_dag(g) {
            Some(d) => cpdag_of(&d),
            None => Cpdag::from_json(g)?,
        })
    };
    let mut out = serde_json::Map::new();
    let mut put = |k: &str, m: StructureMetrics| {
        out.insert(k.into(), serde_json::to_value(m).expect("metrics serialize"));
    };
    if let (Some(e), Some(t)) = (as_dag(est), as_dag(truth)) {
        put("dag", edge_metrics(&e, &t)?);
    }
    put("cpdag", cpdag_metrics(&as_cpdag(est)?, &as_cpdag(truth)?)?);
    put("skeleton", skeleton_metrics(&skeleton_of(est), &skeleton_of(truth)));
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn skeleton_of(g: &GraphJson) -> std::collections::BTreeSet<(usize, usize)> {
    g.edges
        .iter()
        .chain(&g.undirected)
        .map(|&[a, b]| (a.min(b) - 1, a.max(b) - 1))
        .collect()
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    for p in [&a.estimated, &a.truth] {
        if !p.is_file() {
            return Err(anyhow!("{} does not exist", p.display())).usage();
        }
    }
    let est = read_graph(&a.estimated).usage()?;
    let truth = read_graph(&a.truth).usage()?;
    if est.p != truth.p {
        return Err(anyhow!("graphs have {} and {} nodes", est.p, truth.p)).usage();
    }
    for g in [&est, &truth] {
        if g.edges.iter().chain(&g.undirected).any(|&[a, b]| a == 0 || b == 0 || a > g.p || b > g.p) {
            return Err(anyhow!("graph indices must lie in 1..={}", g.p)).usage();
        }
    }
    print_metrics(&est, &truth).map_err(Failure::Runtime)
}
