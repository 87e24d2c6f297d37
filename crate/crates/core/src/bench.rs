//! Simulation experiments: repeated trials of random DAG, random parameters,
//! sampled data and every requested learner, scored against the truth.
//!
//! Each trial draws one data set at the largest sample size of the grid and
//! evaluates smaller sizes on its leading rows, so the sample-size curves of
//! a trial are nested.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{oracle_learn, pmrf_neighborhoods, CombineRule};
use crate::graph::{cpdag_metrics, cpdag_of, edge_metrics, random_dag, skeleton_metrics, Dag, GraphJson, StructureMetrics};
use crate::mrs::{self, mrs_learn, DegeneratePolicy, MrsConfig};
use crate::par;
use crate::simulate::{self, simulate, CountMatrix, Link, ParamRanges, SampleOptions};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse experiment file: {0}")]
    Parse(String),
    #[error("empty report")]
    EmptyReport,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Mrs,
    Oracle,
    Pmrf,
}

impl Learner {
    pub fn name(self) -> &'static str {
        match self {
            Learner::Mrs => "mrs",
            Learner::Oracle => "oracle",
            Learner::Pmrf => "pmrf",
        }
    }

    /// Whether the learner returns oriented edges.
    pub fn is_directed(self) -> bool {
        self != Learner::Pmrf
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Learner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mrs" => Ok(Learner::Mrs),
            "oracle" => Ok(Learner::Oracle),
            "pmrf" => Ok(Learner::Pmrf),
            other => Err(format!("unknown learner `{other}` (expected mrs, oracle or pmrf)")),
        }
    }
}

fn default_family() -> Link {
    Link::Log
}

fn default_learners() -> Vec<Learner> {
    vec![Learner::Mrs]
}

/// Library defaults except that degenerate columns are quarantined, so a
/// single empty column does not void a whole trial.
pub fn default_bench_mrs() -> MrsConfig {
    MrsConfig {
        degenerate: DegeneratePolicy::Quarantine,
        ..MrsConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_family")]
    pub family: Link,
    pub p: usize,
    /// Maximum indegree.
    pub d: usize,
    /// Sample sizes.
    pub n: Vec<usize>,
    pub trials: usize,
    /// Defaults to the standard ranges of the family.
    #[serde(default)]
    pub ranges: Option<ParamRanges>,
    #[serde(default = "default_learners")]
    pub learners: Vec<Learner>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Settings shared by every learner. A `[mrs]` table starts from the
    /// library defaults, so set `degenerate = "quarantine"` there if wanted.
    #[serde(default = "default_bench_mrs")]
    pub mrs: MrsConfig,
    #[serde(default)]
    pub combine: CombineRule,
    #[serde(default)]
    pub sample: SampleOptions,
    /// Trials run concurrently unless this is 1.
    #[serde(default)]
    pub jobs: usize,
}

impl ExperimentSpec {
    /// A spec with the default family, ranges, learners and settings.
    pub fn new(p: usize, d: usize, n: Vec<usize>, trials: usize) -> Self {
        ExperimentSpec {
            family: Link::Log,
            p,
            d,
            n,
            trials,
            ranges: None,
            learners: default_learners(),
            seed: 0,
            output_dir: None,
            mrs: default_bench_mrs(),
            combine: CombineRule::And,
            sample: SampleOptions::default(),
            jobs: 0,
        }
    }

    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| BenchError::Parse(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| BenchError::Parse(e.to_string()))
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Invalid(m));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.d >= self.p {
            return bad(format!("indegree d = {} must be below p = {}", self.d, self.p));
        }
        if self.n.is_empty() {
            return bad("sample-size grid is empty".into());
        }
        if self.n.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.learners.is_empty() {
            return bad("learner list is empty".into());
        }
        let mut seen = self.learners.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.learners.len() {
            return bad("learner list has duplicates".into());
        }
        if self.learners.contains(&Learner::Pmrf) && self.p < 2 {
            return bad("pmrf needs p >= 2".into());
        }
        self.ranges().validate().map_err(|e| BenchError::Invalid(e.to_string()))?;
        self.mrs.validate().map_err(|e| BenchError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn ranges(&self) -> ParamRanges {
        self.ranges.unwrap_or(match self.family {
            Link::Log => ParamRanges::log_link_default(self.d),
            Link::Identity => ParamRanges::identity_link_default(),
        })
    }

    /// Number of (learner, n, trial) rows a failure-free run produces.
    pub fn planned_rows(&self) -> usize {
        self.learners.len() * self.n.len() * self.trials
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        mrs::mix_seed(self.seed, trial as u64)
    }
}

/// One learner on one sample size of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub learner: Learner,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    /// Directed-edge metrics (directed learners only).
    pub dag: Option<StructureMetrics>,
    /// Equivalence-class metrics (directed learners only).
    pub cpdag: Option<StructureMetrics>,
    pub skeleton: StructureMetrics,
    pub quarantined: usize,
    pub unconverged_fits: usize,
    /// Wall-clock of the learner call alone.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trial: usize,
    pub seed: u64,
    /// None when data generation failed, which voids every learner of the trial.
    pub learner: Option<Learner>,
    pub n: Option<usize>,
    pub message: String,
}

/// Truth and estimates of one trial, in 1-based graph JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialArtifacts {
    pub trial: usize,
    pub seed: u64,
    pub regenerations: usize,
    pub truth: GraphJson,
    pub estimates: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub learner: Learner,
    pub n: usize,
    pub graph: GraphJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<TrialRow>,
    pub failures: Vec<Failure>,
    pub artifacts: Vec<TrialArtifacts>,
}

struct TrialOutcome {
    rows: Vec<TrialRow>,
    failures: Vec<Failure>,
    artifacts: Option<TrialArtifacts>,
}

fn run_trial(spec: &ExperimentSpec, trial: usize) -> TrialOutcome {
    let seed = spec.trial_seed(trial);
    let n_max = *spec.n.iter().max().expect("validated grid");
    let generated = random_dag(spec.p, spec.d, mrs::mix_seed(seed, 0))
        .map_err(|e| e.to_string())
        .and_then(|dag| {
            simulate(&dag, spec.family, &spec.ranges(), n_max, mrs::mix_seed(seed, 1), &spec.sample)
                .map(|s| (dag, s))
                .map_err(|e| e.to_string())
        });
    let (truth, simulated) = match generated {
        Ok(g) => g,
        Err(message) => {
            return TrialOutcome {
                rows: Vec::new(),
                failures: vec![Failure {
                    trial,
                    seed,
                    learner: None,
                    n: None,
                    message,
                }],
                artifacts: None,
            }
        }
    };

    let truth_cpdag = cpdag_of(&truth);
    let truth_skeleton = truth.skeleton();
    let config = MrsConfig {
        seed: mrs::mix_seed(seed, 2),
        ..spec.mrs.clone()
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut estimates = Vec::new();
    for &n in &spec.n {
        let data = simulated.data.head(n);
        for &learner in &spec.learners {
            let fail = |message: String| Failure {
                trial,
                seed,
                learner: Some(learner),
                n: Some(n),
                message,
            };
            let (outcome, seconds) = timed(|| run_learner(learner, &data, &truth, &config, spec.combine));
            match outcome {
                Ok(Fitted::Directed {
                    dag,
                    quarantined,
                    unconverged_fits,
                }) => {
                    let metrics = edge_metrics(&dag, &truth).and_then(|m| {
                        cpdag_metrics(&cpdag_of(&dag), &truth_cpdag).map(|c| (m, c))
                    });
                    match metrics {
                        Ok((m, c)) => {
                            rows.push(TrialRow {
                                learner,
                                n,
                                trial,
                                seed,
                                dag: Some(m),
                                cpdag: Some(c),
                                skeleton: skeleton_metrics(&dag.skeleton(), &truth_skeleton),
                                quarantined,
                                unconverged_fits,
                                seconds,
                            });
                            estimates.push(Estimate {
                                learner,
                                n,
                                graph: dag.to_json(),
                            });
                        }
                        Err(e) => failures.push(fail(e.to_string())),
                    }
                }
                Ok(Fitted::Undirected {
                    graph,
                    quarantined,
                    unconverged_fits,
                }) => {
                    rows.push(TrialRow {
                        learner,
                        n,
                        trial,
                        seed,
                        dag: None,
                        cpdag: None,
                        skeleton: skeleton_metrics(graph.edges(), &truth_skeleton),
                        quarantined,
                        unconverged_fits,
                        seconds,
                    });
                    estimates.push(Estimate {
                        learner,
                        n,
                        graph: graph.to_json(),
                    });
                }
                Err(message) => failures.push(fail(message)),
            }
        }
    }
    TrialOutcome {
        rows,
        failures,
        artifacts: Some(TrialArtifacts {
            trial,
            seed,
            regenerations: simulated.regenerations,
            truth: truth.to_json(),
            estimates,
        }),
    }
}

enum Fitted {
    Directed {
        dag: Dag,
        quarantined: usize,
        unconverged_fits: usize,
    },
    Undirected {
        graph: crate::graph::UndirectedGraph,
        quarantined: usize,
        unconverged_fits: usize,
    },
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn run_learner(
    learner: Learner,
    data: &CountMatrix,
    truth: &Dag,
    config: &MrsConfig,
    combine: CombineRule,
) -> Result<Fitted, String> {
    let directed = |r: mrs::MrsResult| Fitted::Directed {
        quarantined: r.quarantined.len(),
        unconverged_fits: r.unconverged_fits,
        dag: r.dag,
    };
    match learner {
        Learner::Mrs => mrs_learn(data, config).map(directed).map_err(|e| e.to_string()),
        Learner::Oracle => oracle_learn(data, truth, config).map(directed).map_err(|e| e.to_string()),
        Learner::Pmrf => {
            let nb = pmrf_neighborhoods(data, config).map_err(|e| e.to_string())?;
            Ok(Fitted::Undirected {
                graph: nb.combine(combine),
                quarantined: nb.quarantined.len(),
                unconverged_fits: nb.unconverged_fits,
            })
        }
    }
}

/// Runs every trial and, when the spec names an output directory, writes the
/// report there. Learner and generation failures are recorded, not raised.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    if let Some(dir) = &spec.output_dir {
        prepare_dir(dir)?;
    }
    let outcomes = par::map_indexed(spec.trials, spec.jobs, |t| run_trial(spec, t));
    let mut report = BenchReport {
        spec: spec.clone(),
        rows: Vec::new(),
        failures: Vec::new(),
        artifacts: Vec::new(),
    };
    for o in outcomes {
        report.rows.extend(o.rows);
        report.failures.extend(o.failures);
        report.artifacts.extend(o.artifacts);
    }
    if let Some(dir) = &spec.output_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn prepare_dir(dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir.join("artifacts")).map_err(io_err(dir))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))
}

/// Mean and standard error of one metric over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// None for a single trial.
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let k = values.len();
        if k == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let se = (k > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (k - 1) as f64).sqrt() / (k as f64).sqrt()
        });
        Some(Stat { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub learner: Learner,
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub dag_precision: Option<Stat>,
    pub dag_recall: Option<Stat>,
    pub cpdag_precision: Option<Stat>,
    pub cpdag_recall: Option<Stat>,
    pub skeleton_precision: Option<Stat>,
    pub skeleton_recall: Option<Stat>,
}

/// Means and standard errors per (learner, n), in spec order.
pub fn summarize(report: &BenchReport) -> Result<Vec<SummaryRow>, BenchError> {
    if report.rows.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let mut out = Vec::new();
    for &learner in &report.spec.learners {
        for &n in &report.spec.n {
            let rows: Vec<&TrialRow> = report.rows.iter().filter(|r| r.learner == learner && r.n == n).collect();
            let failures = report
                .failures
                .iter()
                .filter(|f| f.learner.is_none() || (f.learner == Some(learner) && f.n == Some(n)))
                .count();
            let stat = |get: &dyn Fn(&TrialRow) -> Option<f64>| {
                let v: Option<Vec<f64>> = rows.iter().map(|r| get(r)).collect();
                v.and_then(|v| Stat::of(&v))
            };
            out.push(SummaryRow {
                learner,
                n,
                trials: rows.len(),
                failures,
                dag_precision: stat(&|r| r.dag.map(|m| m.precision)),
                dag_recall: stat(&|r| r.dag.map(|m| m.recall)),
                cpdag_precision: stat(&|r| r.cpdag.map(|m| m.precision)),
                cpdag_recall: stat(&|r| r.cpdag.map(|m| m.recall)),
                skeleton_precision: stat(&|r| Some(r.skeleton.precision)),
                skeleton_recall: stat(&|r| Some(r.skeleton.recall)),
            });
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchReport {
    /// One row per (learner, n, trial). Timing is the last column and is left
    /// out when `timing` is false, which makes the output reproducible byte for byte.
    pub fn rows_csv(&self, timing: bool) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "learner",
            "n",
            "trial",
            "seed",
            "dag_precision",
            "dag_recall",
            "cpdag_precision",
            "cpdag_recall",
            "skeleton_precision",
            "skeleton_recall",
            "estimated_edges",
            "true_edges",
            "quarantined",
            "unconverged_fits",
        ];
        if timing {
            header.push("seconds");
        }
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.learner.to_string(),
                r.n.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                opt(r.dag.map(|m| m.precision)),
                opt(r.dag.map(|m| m.recall)),
                opt(r.cpdag.map(|m| m.precision)),
                opt(r.cpdag.map(|m| m.recall)),
                r.skeleton.precision.to_string(),
                r.skeleton.recall.to_string(),
                r.dag.map_or(r.skeleton.estimated, |m| m.estimated).to_string(),
                r.skeleton.truth.to_string(),
                r.quarantined.to_string(),
                r.unconverged_fits.to_string(),
            ];
            if timing {
                rec.push(r.seconds.to_string());
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn failures_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "seed", "learner", "n", "message"]).expect("in-memory write");
        for f in &self.failures {
            w.write_record([
                f.trial.to_string(),
                f.seed.to_string(),
                f.learner.map(|l| l.to_string()).unwrap_or_else(|| "generation".into()),
                f.n.map(|n| n.to_string()).unwrap_or_default(),
                f.message.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let metrics = [
        "dag_precision",
        "dag_recall",
        "cpdag_precision",
        "cpdag_recall",
        "skeleton_precision",
        "skeleton_recall",
    ];
    let mut header = vec!["learner".to_string(), "n".into(), "trials".into(), "failures".into()];
    for m in metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_se"));
    }
    w.write_record(&header).expect("in-memory write");
    for s in summary {
        let mut rec = vec![s.learner.to_string(), s.n.to_string(), s.trials.to_string(), s.failures.to_string()];
        for st in [
            s.dag_precision,
            s.dag_recall,
            s.cpdag_precision,
            s.cpdag_recall,
            s.skeleton_precision,
            s.skeleton_recall,
        ] {
            rec.push(opt(st.map(|x| x.mean)));
            rec.push(opt(st.and_then(|x| x.se)));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Human-readable summary table.
pub fn summary_table(summary: &[SummaryRow]) -> String {
    let cell = |s: Option<Stat>| match s {
        Some(Stat { mean, se: Some(se) }) => format!("{mean:.3} ({se:.3})"),
        Some(Stat { mean, se: None }) => format!("{mean:.3}"),
        None => "-".into(),
    };
    let mut out = format!(
        "{:<8} {:>6} {:>6} {:>15} {:>15} {:>15} {:>15}\n",
        "learner", "n", "trials", "dag prec", "dag recall", "mec recall", "skel recall"
    );
    for s in summary {
        out.push_str(&format!(
            "{:<8} {:>6} {:>6} {:>15} {:>15} {:>15} {:>15}\n",
            s.learner.name(),
            s.n,
            s.trials,
            cell(s.dag_precision),
            cell(s.dag_recall),
            cell(s.cpdag_recall),
            cell(s.skeleton_recall)
        ));
    }
    out
}

#[derive(Serialize)]
struct Metadata<'a> {
    rng: &'a str,
    dag_generator: &'a str,
    parallel_enabled: bool,
    crate_version: &'a str,
    planned_rows: usize,
    rows: usize,
    failures: usize,
    spec: &'a ExperimentSpec,
}

/// Writes report.csv, summary.csv, failures.csv, metadata.json and one
/// artifacts/trial_XXX.json per successfully generated trial.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<(), BenchError> {
    prepare_dir(dir)?;
    let put = |name: &str, body: &str| -> Result<(), BenchError> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(body.as_bytes()).map_err(io_err(&path))
    };
    put("report.csv", &report.rows_csv(true))?;
    put("failures.csv", &report.failures_csv())?;
    if let Ok(summary) = summarize(report) {
        put("summary.csv", &summary_csv(&summary))?;
    }
    let meta = Metadata {
        rng: simulate::RNG_NAME,
        dag_generator: "uniform random ordering; parent count uniform on 0..=min(d, position), parents uniform among predecessors",
        parallel_enabled: par::parallel_enabled(),
        crate_version: env!("CARGO_PKG_VERSION"),
        planned_rows: report.spec.planned_rows(),
        rows: report.rows.len(),
        failures: report.failures.len(),
        spec: &report.spec,
    };
    put("metadata.json", &serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    for a in &report.artifacts {
        put(
            &format!("artifacts/trial_{:03}.json", a.trial),
            &serde_json::to_string_pretty(a).expect("artifact serializes"),
        )?;
    }
    Ok(())
}

/// Wall-clock of MRS as the number of nodes grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    /// Ascending node counts.
    pub p: Vec<usize>,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub family: Link,
    pub ranges: ParamRanges,
    pub mrs: MrsConfig,
    pub sample: SampleOptions,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub p: usize,
    /// Median over successful trials.
    pub seconds: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of log(seconds) on log(p); None with fewer than two points.
    pub slope: Option<f64>,
}

/// Times `mrs_learn` alone (trials run one after another so they do not
/// compete for cores).
pub fn runtime_scaling(spec: &ScalingSpec) -> Result<ScalingTable, BenchError> {
    if spec.p.is_empty() || spec.trials == 0 || spec.n == 0 {
        return Err(BenchError::Invalid("scaling needs a nonempty p grid, n >= 1 and trials >= 1".into()));
    }
    if spec.p.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Invalid("p grid must be strictly ascending".into()));
    }
    if spec.d >= spec.p[0] {
        return Err(BenchError::Invalid("indegree must be below every p".into()));
    }
    spec.ranges.validate().map_err(|e| BenchError::Invalid(e.to_string()))?;
    spec.mrs.validate().map_err(|e| BenchError::Invalid(e.to_string()))?;

    let mut points = Vec::new();
    for &p in &spec.p {
        let mut times = Vec::new();
        let mut failures = 0;
        for t in 0..spec.trials {
            let seed = mrs::mix_seed(mrs::mix_seed(spec.seed, p as u64), t as u64);
            let data = random_dag(p, spec.d, mrs::mix_seed(seed, 0))
                .map_err(|e| e.to_string())
                .and_then(|dag| {
                    simulate(&dag, spec.family, &spec.ranges, spec.n, mrs::mix_seed(seed, 1), &spec.sample)
                        .map_err(|e| e.to_string())
                });
            let Ok(sim) = data else {
                failures += 1;
                continue;
            };
            let config = MrsConfig {
                seed: mrs::mix_seed(seed, 2),
                ..spec.mrs.clone()
            };
            let (res, secs) = timed(|| mrs_learn(&sim.data, &config));
            match res {
                Ok(_) => times.push(secs),
                Err(_) => failures += 1,
            }
        }
        if times.is_empty() {
            return Err(BenchError::Invalid(format!("every trial failed at p = {p}")));
        }
        points.push(ScalingPoint {
            p,
            seconds: median(&mut times),
            trials: times.len(),
            failures,
        });
    }
    let slope = log_log_slope(&points.iter().map(|pt| (pt.p as f64, pt.seconds)).collect::<Vec<_>>());
    Ok(ScalingTable { points, slope })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ordinary least-squares slope of log y on log x.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
