//! Moments ratio scoring: learns a Poisson SEM's ordering one node at a time
//! and its parents by ℓ1-penalized Poisson regression.
//!
//! At step `m`, with prefix `S = π̂_1..π̂_{m−1}`, every remaining node `j` gets
//!
//! ```text
//! Ŝ(m, j) = Ê(X_j²) / Ê( Ê(X_j | X_S) + Ê(X_j | X_S)² )
//! ```
//!
//! where the conditional mean is the fitted `exp(θ̂₀ + ⟨θ̂, x_S⟩)`. A node whose
//! parents all lie in `S` has population score 1; any other node scores above
//! 1. The minimizer joins the ordering and its parents are the nonzero
//! coefficients of its regression on `S`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{Dag, GraphError, GraphJson, Ordering};
use crate::lasso::{cv_select, fit_poisson_lasso, CvLoss, CvOptions, LassoError, LassoFit, LassoOptions, LassoProblem};
use crate::par;
use crate::simulate::CountMatrix;

#[derive(Debug, Error)]
pub enum MrsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need at least {required} samples, got {n}")]
    TooFewSamples { n: usize, required: usize },
    #[error("node {node} is degenerate (constant or too few nonzero counts) at step {step}")]
    DegenerateColumn { node: usize, step: usize },
    #[error("score of node {node} is undefined at step {step}")]
    ScoreUndefined { node: usize, step: usize },
    #[error("regression of node {node} at step {step} failed: {source}")]
    Solver {
        node: usize,
        step: usize,
        #[source]
        source: LassoError,
    },
    #[error("node {node} does not exist (p = {p})")]
    NoSuchNode { node: usize, p: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which penalty of a cross-validation table to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Grid minimizer of the CV loss.
    Min,
    /// Smallest penalty within the band around the minimum.
    BandMin,
    /// Largest penalty within the band around the minimum.
    BandMax,
}

/// What to do with constant (or nearly all-zero) columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    Error,
    /// Put them first in the ordering, without parents, and never use them as covariates.
    Quarantine,
}

/// Number of cross-validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Folds {
    K(usize),
    LeaveOneOut,
}

impl Folds {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Folds::K(k) => k,
            Folds::LeaveOneOut => n,
        }
    }
}

impl fmt::Display for Folds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Folds::K(k) => write!(f, "{k}"),
            Folds::LeaveOneOut => f.write_str("loo"),
        }
    }
}

impl std::str::FromStr for Folds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("loo") {
            return Ok(Folds::LeaveOneOut);
        }
        s.parse::<usize>()
            .map(Folds::K)
            .map_err(|_| format!("folds must be an integer or \"loo\", got {s:?}"))
    }
}

impl Serialize for Folds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Folds::K(k) => s.serialize_u64(*k as u64),
            Folds::LeaveOneOut => s.serialize_str("loo"),
        }
    }
}

impl<'de> Deserialize<'de> for Folds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            K(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::K(k) => Ok(Folds::K(k)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MrsConfig {
    pub folds: Folds,
    pub grid_size: usize,
    pub ratio: f64,
    pub se_multiplier: f64,
    pub cv_loss: CvLoss,
    /// Penalty rule for the regressions that feed the scores.
    pub score_rule: LambdaRule,
    /// Penalty rule for parent selection.
    pub parent_rule: LambdaRule,
    /// Skip cross-validation and use this penalty for both purposes.
    pub fixed_lambda: Option<f64>,
    /// Coefficients at or below this magnitude count as zero.
    pub threshold: f64,
    /// Penalize coefficients by their column's standard deviation.
    pub standardize: bool,
    /// Parallel width; 1 runs sequentially.
    pub jobs: usize,
    pub seed: u64,
    pub degenerate: DegeneratePolicy,
    /// Columns with fewer nonzero counts than this (or constant) are degenerate.
    pub min_nonzero: usize,
    /// Minimum sample size; defaults to twice the fold count.
    pub min_samples: Option<usize>,
    pub lasso: LassoOptions,
}

impl Default for MrsConfig {
    fn default() -> Self {
        MrsConfig {
            folds: Folds::K(5),
            grid_size: 50,
            ratio: 1e-3,
            se_multiplier: 2.0,
            cv_loss: CvLoss::Deviance,
            score_rule: LambdaRule::BandMin,
            parent_rule: LambdaRule::BandMax,
            fixed_lambda: None,
            threshold: 1e-8,
            standardize: true,
            jobs: 0,
            seed: 0,
            degenerate: DegeneratePolicy::Error,
            min_nonzero: 2,
            min_samples: None,
            lasso: LassoOptions {
                kkt_tol: 1e-6,
                ..LassoOptions::default()
            },
        }
    }
}

impl MrsConfig {
    pub fn validate(&self) -> Result<(), MrsError> {
        let bad = |m: &str| Err(MrsError::Config(m.to_string()));
        if let Folds::K(k) = self.folds {
            if k < 2 {
                return bad("folds must be at least 2");
            }
        }
        if self.grid_size == 0 {
            return bad("grid_size must be positive");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad("ratio must lie in (0, 1)");
        }
        if !(self.se_multiplier >= 0.0 && self.se_multiplier.is_finite()) {
            return bad("se_multiplier must be nonnegative");
        }
        if !(self.threshold >= 0.0) {
            return bad("threshold must be nonnegative");
        }
        if let Some(l) = self.fixed_lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return bad("fixed_lambda must be finite and nonnegative");
            }
        }
        Ok(())
    }

    fn required_samples(&self, n: usize) -> usize {
        self.min_samples.unwrap_or(match self.folds {
            Folds::K(k) => 2 * k,
            Folds::LeaveOneOut => 3,
        })
        .max(if self.fixed_lambda.is_some() { 1 } else { self.folds.resolve(n).min(n) })
    }
}

/// Score of one candidate at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub node: usize,
    pub score: f64,
    /// Ê(X_j²)
    pub numerator: f64,
    /// Ê(m̂ + m̂²) with m̂ the fitted conditional mean
    pub denominator: f64,
    pub score_lambda: Option<f64>,
    pub parent_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScores {
    /// 1-based step number, counting quarantined nodes.
    pub step: usize,
    pub candidates: Vec<CandidateScore>,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTable {
    pub steps: Vec<StepScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrsResult {
    pub ordering: Ordering,
    pub dag: Dag,
    pub scores: ScoreTable,
    /// Penalty used to select each node's parents (None for roots of the ordering).
    pub parent_lambdas: Vec<Option<f64>>,
    pub quarantined: Vec<usize>,
    /// Regressions (including cross-validation fits) that stopped short of the
    /// KKT tolerance and were used as best-effort iterates.
    pub unconverged_fits: usize,
}

/// `Ê(X²) / (Ê(X) + Ê(X)²)` with plain sample moments.
pub fn score_first(data: &CountMatrix, j: usize) -> Result<f64, MrsError> {
    check_node(data, j)?;
    first_moments(&data.column_f64(j))
        .map(|(s, _, _)| s)
        .ok_or(MrsError::ScoreUndefined { node: j, step: 1 })
}

fn first_moments(x: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return None;
    }
    let second = x.iter().map(|v| v * v).sum::<f64>() / n;
    let den = mean + mean * mean;
    Some((second / den, second, den))
}

/// Score of `j` given `prefix`, from a fit of `X_j` on the prefix columns (in
/// `prefix` order): `Ê(X_j²) / (1/n) Σ_i [exp(η̂_i) + exp(2η̂_i)]`.
pub fn score_step(data: &CountMatrix, j: usize, prefix: &[usize], fit: &LassoFit) -> Result<f64, MrsError> {
    check_node(data, j)?;
    for &k in prefix {
        check_node(data, k)?;
    }
    if fit.coefficients.len() != prefix.len() {
        return Err(MrsError::Config(format!(
            "fit has {} coefficients for a prefix of {}",
            fit.coefficients.len(),
            prefix.len()
        )));
    }
    let cols: Vec<Vec<f64>> = prefix.iter().map(|&k| data.column_f64(k)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    step_moments(&data.column_f64(j), &refs, fit)
        .map(|(s, _, _)| s)
        .ok_or(MrsError::ScoreUndefined {
            node: j,
            step: prefix.len() + 1,
        })
}

fn step_moments(y: &[f64], design: &[&[f64]], fit: &LassoFit) -> Option<(f64, f64, f64)> {
    let n = y.len();
    let mut eta = vec![fit.intercept; n];
    for (c, &b) in design.iter().zip(&fit.coefficients) {
        if b != 0.0 {
            for (e, x) in eta.iter_mut().zip(c.iter()) {
                *e += b * x;
            }
        }
    }
    let nf = n as f64;
    let num = y.iter().map(|v| v * v).sum::<f64>() / nf;
    let den = eta.iter().map(|&e| e.exp() + (2.0 * e).exp()).sum::<f64>() / nf;
    let score = num / den;
    (score.is_finite() && den > 0.0).then_some((score, num, den))
}

/// Indices of coefficients whose magnitude exceeds `threshold`.
pub fn select_parents(fit: &LassoFit, threshold: f64) -> Vec<usize> {
    fit.support(threshold)
}

fn check_node(data: &CountMatrix, j: usize) -> Result<(), MrsError> {
    if j >= data.p() {
        return Err(MrsError::NoSuchNode { node: j, p: data.p() });
    }
    Ok(())
}

pub(crate) fn is_degenerate(col: &[u64], min_nonzero: usize) -> bool {
    let first = col[0];
    col.iter().all(|&v| v == first) || col.iter().filter(|&&v| v > 0).count() < min_nonzero
}

pub(crate) fn mix_seed(seed: u64, step: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How parents are chosen once a node joins the ordering.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ParentSource<'a> {
    Lasso,
    /// True parents restricted to the estimated prefix.
    Truth(&'a Dag),
}

struct Evaluated {
    score: CandidateScore,
    parents: Vec<usize>,
    unconverged: usize,
}

/// Learns the ordering and the DAG.
pub fn mrs_learn(data: &CountMatrix, config: &MrsConfig) -> Result<MrsResult, MrsError> {
    learn(data, config, ParentSource::Lasso)
}

/// Validates `config` and the sample size, then applies the degenerate-column
/// policy; returns the quarantined nodes.
pub(crate) fn preflight(data: &CountMatrix, config: &MrsConfig) -> Result<Vec<usize>, MrsError> {
    config.validate()?;
    let n = data.n();
    if data.p() == 0 {
        return Err(GraphError::Empty.into());
    }
    let required = config.required_samples(n);
    if n < required {
        return Err(MrsError::TooFewSamples { n, required });
    }
    let mut quarantined = Vec::new();
    for j in 0..data.p() {
        if is_degenerate(data.column(j), config.min_nonzero) {
            match config.degenerate {
                DegeneratePolicy::Error => return Err(MrsError::DegenerateColumn { node: j, step: 1 }),
                DegeneratePolicy::Quarantine => quarantined.push(j),
            }
        }
    }
    Ok(quarantined)
}

pub(crate) fn learn(data: &CountMatrix, config: &MrsConfig, parents_from: ParentSource) -> Result<MrsResult, MrsError> {
    let quarantined = preflight(data, config)?;
    let n = data.n();
    let p = data.p();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| data.column_f64(j)).collect();

    let mut order: Vec<usize> = quarantined.clone();
    let mut prefix: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..p).filter(|j| !quarantined.contains(j)).collect();
    let mut edges = Vec::new();
    let mut parent_lambdas = vec![None; p];
    let mut table = ScoreTable::default();
    let mut unconverged_fits = 0;

    while !remaining.is_empty() {
        let step = order.len() + 1;
        let design: Vec<&[f64]> = prefix.iter().map(|&k| columns[k].as_slice()).collect();
        let cv_options = cv_options(config, n, mix_seed(config.seed, step as u64));
        let need_parent_fit = matches!(parents_from, ParentSource::Lasso);
        let evaluated: Vec<Result<Evaluated, MrsError>> = par::map_indexed(remaining.len(), config.jobs, |idx| {
            let j = remaining[idx];
            evaluate(j, step, &columns[j], &design, &prefix, config, &cv_options, need_parent_fit)
        });
        let evaluated: Vec<Evaluated> = evaluated.into_iter().collect::<Result<_, _>>()?;

        // argmin, lowest node index on ties (remaining is sorted)
        let best = (0..evaluated.len()).fold(0, |b, i| {
            if evaluated[i].score.score < evaluated[b].score.score {
                i
            } else {
                b
            }
        });
        unconverged_fits += evaluated.iter().map(|e| e.unconverged).sum::<usize>();
        let winner = remaining[best];
        let chosen = &evaluated[best];
        let parents: Vec<usize> = match parents_from {
            ParentSource::Lasso => chosen.parents.clone(),
            ParentSource::Truth(truth) => truth
                .parents(winner)
                .iter()
                .copied()
                .filter(|k| prefix.contains(k))
                .collect(),
        };
        edges.extend(parents.iter().map(|&k| (k, winner)));
        parent_lambdas[winner] = chosen.score.parent_lambda;
        table.steps.push(StepScores {
            step,
            candidates: evaluated.into_iter().map(|e| e.score).collect(),
            winner,
        });
        order.push(winner);
        prefix.push(winner);
        remaining.remove(best);
    }

    let dag = Dag::new(p, edges)?;
    let dag = dag.with_labels(data.labels().to_vec())?;
    let ordering = Ordering::new(order)?;
    debug_assert!(ordering.respects(&dag));
    Ok(MrsResult {
        ordering,
        dag,
        scores: table,
        parent_lambdas,
        quarantined,
        unconverged_fits,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    j: usize,
    step: usize,
    y: &[f64],
    design: &[&[f64]],
    prefix: &[usize],
    config: &MrsConfig,
    cv_options: &CvOptions,
    need_parent_fit: bool,
) -> Result<Evaluated, MrsError> {
    if design.is_empty() {
        let (score, numerator, denominator) = first_moments(y).ok_or(MrsError::ScoreUndefined { node: j, step })?;
        return Ok(Evaluated {
            score: CandidateScore {
                node: j,
                score,
                numerator,
                denominator,
                score_lambda: None,
                parent_lambda: None,
            },
            parents: Vec::new(),
            unconverged: 0,
        });
    }
    let fits = penalized_fits(j, step, y, design, config, cv_options)?;
    let (score_fit, parent_fit) = (fits.score, fits.parent);
    let (score, numerator, denominator) =
        step_moments(y, design, &score_fit).ok_or(MrsError::ScoreUndefined { node: j, step })?;
    let parents = if need_parent_fit {
        select_parents(&parent_fit, config.threshold)
            .into_iter()
            .map(|k| prefix[k])
            .collect()
    } else {
        Vec::new()
    };
    Ok(Evaluated {
        score: CandidateScore {
            node: j,
            score,
            numerator,
            denominator,
            score_lambda: Some(score_fit.lambda),
            parent_lambda: Some(parent_fit.lambda),
        },
        parents,
        unconverged: fits.unconverged,
    })
}

pub(crate) struct PenalizedFits {
    pub score: LassoFit,
    pub parent: LassoFit,
    pub unconverged: usize,
}

/// Regresses `y` on `design` and returns the fits at the score and parent
/// penalties (the same fit twice in fixed-penalty mode).
pub(crate) fn penalized_fits(
    j: usize,
    step: usize,
    y: &[f64],
    design: &[&[f64]],
    config: &MrsConfig,
    cv_options: &CvOptions,
) -> Result<PenalizedFits, MrsError> {
    let solver = |source| MrsError::Solver { node: j, step, source };
    let mut problem = LassoProblem::new(design.to_vec(), y).map_err(solver)?;
    if config.standardize {
        problem = problem.standardized();
    }
    match config.fixed_lambda {
        Some(lambda) => {
            let (fit, unconverged) = match fit_poisson_lasso(&problem, lambda, &config.lasso, None) {
                Ok(fit) => (fit, 0),
                Err(LassoError::NonConvergence { last, .. }) => (*last, 1),
                Err(e) => return Err(solver(e)),
            };
            Ok(PenalizedFits {
                score: fit.clone(),
                parent: fit,
                unconverged,
            })
        }
        None => {
            let cv = cv_select(&problem, cv_options, &config.lasso).map_err(solver)?;
            let pick = |rule| match rule {
                LambdaRule::Min => cv.index_min,
                LambdaRule::BandMin => cv.index_band_lo,
                LambdaRule::BandMax => cv.index_band_hi,
            };
            Ok(PenalizedFits {
                score: cv.fits[pick(config.score_rule)].clone(),
                parent: cv.fits[pick(config.parent_rule)].clone(),
                unconverged: cv.unconverged,
            })
        }
    }
}

pub(crate) fn cv_options(config: &MrsConfig, n: usize, seed: u64) -> CvOptions {
    CvOptions {
        folds: config.folds.resolve(n),
        grid_size: config.grid_size,
        ratio: config.ratio,
        se_multiplier: config.se_multiplier,
        loss: config.cv_loss,
        seed,
        jobs: config.jobs,
    }
}

/// 1-based JSON form of an [`MrsResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrsResultJson {
    pub ordering: Vec<usize>,
    pub graph: GraphJson,
    pub quarantined: Vec<usize>,
    pub parent_lambdas: Vec<Option<f64>>,
    pub unconverged_fits: usize,
    pub steps: Vec<StepScores>,
}

impl MrsResult {
    pub fn to_json(&self) -> MrsResultJson {
        let steps = self
            .scores
            .steps
            .iter()
            .map(|s| StepScores {
                step: s.step,
                winner: s.winner + 1,
                candidates: s
                    .candidates
                    .iter()
                    .map(|c| CandidateScore { node: c.node + 1, ..c.clone() })
                    .collect(),
            })
            .collect();
        MrsResultJson {
            ordering: self.ordering.as_slice().iter().map(|v| v + 1).collect(),
            graph: self.dag.to_json(),
            quarantined: self.quarantined.iter().map(|v| v + 1).collect(),
            parent_lambdas: self.parent_lambdas.clone(),
            unconverged_fits: self.unconverged_fits,
            steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{sample_sem, Link, PoissonSem, SampleOptions};

    fn fit_with(coefficients: Vec<f64>) -> LassoFit {
        LassoFit {
            intercept: 0.0,
            coefficients,
            lambda: 0.1,
            iterations: 1,
            kkt_residual: 0.0,
            objective: 0.0,
            converged: true,
            objective_trace: vec![],
        }
    }

    #[test]
    fn select_parents_examples() {
        assert!(select_parents(&fit_with(vec![0.0, 0.0]), 1e-8).is_empty());
        assert_eq!(select_parents(&fit_with(vec![0.5, 0.0, -0.3]), 1e-8), vec![0, 2]);
    }

    #[test]
    fn root_score_near_one() {
        let sem = PoissonSem::new(Link::Log, Dag::empty(1).unwrap(), vec![5f64.ln()], []).unwrap();
        let data = sample_sem(&sem, 100_000, 5, &SampleOptions::default()).unwrap();
        let s = score_first(&data, 0).unwrap();
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn zero_column_score_is_an_error() {
        let data = CountMatrix::from_columns(vec![vec![0; 10], vec![1; 10]], None).unwrap();
        assert!(matches!(score_first(&data, 0), Err(MrsError::ScoreUndefined { node: 0, .. })));
        assert!(matches!(score_first(&data, 5), Err(MrsError::NoSuchNode { .. })));
    }

    #[test]
    fn empty_prefix_step_equals_first_score() {
        let sem = PoissonSem::new(Link::Log, Dag::empty(1).unwrap(), vec![1.3], []).unwrap();
        let data = sample_sem(&sem, 5000, 2, &SampleOptions::default()).unwrap();
        let y = data.column_f64(0);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let fit = LassoFit {
            intercept: mean.ln(),
            ..fit_with(vec![])
        };
        let a = score_first(&data, 0).unwrap();
        let b = score_step(&data, 0, &[], &fit).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn single_node_is_trivial() {
        let data = CountMatrix::from_columns(vec![vec![1, 2, 3, 0, 4, 2, 1, 0, 5, 3]], None).unwrap();
        let r = mrs_learn(&data, &MrsConfig::default()).unwrap();
        assert_eq!(r.ordering.as_slice(), &[0]);
        assert_eq!(r.dag.edge_count(), 0);
    }

    #[test]
    fn degenerate_columns() {
        let data = CountMatrix::from_columns(
            vec![vec![1, 2, 3, 0, 4, 2, 1, 0, 5, 3], vec![0; 10], vec![2, 0, 1, 1, 3, 0, 2, 4, 1, 1]],
            None,
        )
        .unwrap();
        assert!(matches!(
            mrs_learn(&data, &MrsConfig::default()),
            Err(MrsError::DegenerateColumn { node: 1, step: 1 })
        ));
        let cfg = MrsConfig {
            degenerate: DegeneratePolicy::Quarantine,
            ..Default::default()
        };
        let r = mrs_learn(&data, &cfg).unwrap();
        assert_eq!(r.quarantined, vec![1]);
        assert_eq!(r.ordering.as_slice()[0], 1);
        assert!(r.dag.parents(1).is_empty());
        assert!(r.dag.edges().all(|(j, _)| j != 1));
    }

    #[test]
    fn too_few_samples() {
        let data = CountMatrix::from_columns(vec![vec![1, 2, 3], vec![2, 1, 0]], None).unwrap();
        assert!(matches!(mrs_learn(&data, &MrsConfig::default()), Err(MrsError::TooFewSamples { .. })));
    }

    #[test]
    fn config_validation_and_folds_parsing() {
        let bad = MrsConfig {
            folds: Folds::K(1),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("loo".parse::<Folds>().unwrap(), Folds::LeaveOneOut);
        assert_eq!("7".parse::<Folds>().unwrap(), Folds::K(7));
        let cfg: MrsConfig = toml::from_str("folds = \"loo\"\nseed = 3").unwrap();
        assert_eq!((cfg.folds, cfg.seed), (Folds::LeaveOneOut, 3));
        assert!(toml::from_str::<MrsConfig>("bogus = 1").is_err());
    }
}
