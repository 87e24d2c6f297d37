//! Poisson SEM parameters, ancestral sampling and count matrices.

use std::io::{Read, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::graph::{topological_order, Dag, GraphError, GraphJson, Ordering};

/// Generator used for every random draw in the crate; recorded in run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64, one stream per node)";

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("Poisson rate {0} is not finite and nonnegative")]
    InvalidRate(f64),
    #[error("invalid parameter range [{lo}, {hi}] for {what}")]
    InvalidRange { what: &'static str, lo: f64, hi: f64 },
    #[error("edge {parent} -> {child} has zero or non-finite weight {weight}")]
    InvalidWeight { parent: usize, child: usize, weight: f64 },
    #[error("intercept of node {node} is not finite")]
    InvalidIntercept { node: usize },
    #[error("expected {expected} {what}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("no weight given for edge {parent} -> {child}")]
    MissingWeight { parent: usize, child: usize },
    #[error("weight given for {parent} -> {child}, which is not an edge")]
    UnexpectedWeight { parent: usize, child: usize },
    #[error("node {node} rate {rate:e} exceeds the count cap")]
    Overflow { node: usize, rate: f64 },
    #[error("node {node} has non-positive identity-link rate {rate}")]
    NegativeRate { node: usize, rate: f64 },
    #[error("parameter regeneration failed {attempts} times; last failure at node {node}: {last}")]
    RegenerationExhausted {
        attempts: usize,
        node: usize,
        last: Box<SimulateError>,
    },
    #[error("sample size must be at least 1")]
    NoSamples,
    #[error("sampling requires the {expected:?} link, model uses {got:?}")]
    WrongLink { expected: Link, got: Link },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("malformed SEM JSON: {0}")]
    Json(String),
}

/// Exact Poisson draw.
///
/// Sequential-search inversion below rate 10, Hörmann's transformed rejection
/// with squeeze (PTRS) above. A zero rate returns 0 without consuming randomness.
pub fn poisson_variate<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64, SimulateError> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(SimulateError::InvalidRate(rate));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    if rate < 10.0 {
        Ok(inversion(rate, rng))
    } else {
        Ok(ptrs(rate, rng))
    }
}

fn inversion<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut prob = (-rate).exp();
    let mut cdf = prob;
    // Rounding can leave the cdf a hair below 1; the tail mass there is < 1e-15.
    while u > cdf && k < 1000 {
        k += 1;
        prob *= rate / k as f64;
        cdf += prob;
    }
    k
}

fn ptrs<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    let log_rate = rate.ln();
    let b = 0.931 + 2.53 * rate.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * log_rate - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// rate = exp(θ_j + Σ θ_jk x_k)
    Log,
    /// rate = θ_j + Σ θ_jk x_k, must stay positive
    Identity,
}

/// Node-wise Poisson model on a DAG. With `Link::Log` this is a Poisson SEM;
/// with `Link::Identity` it is the identity-link Poisson DAG model.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSem {
    link: Link,
    dag: Dag,
    intercepts: Vec<f64>,
    // aligned with dag.parents(k)
    weights: Vec<Vec<f64>>,
}

impl PoissonSem {
    /// `weights` holds `(parent, child, weight)` triples, one per DAG edge.
    pub fn new(
        link: Link,
        dag: Dag,
        intercepts: Vec<f64>,
        weights: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, SimulateError> {
        let p = dag.p();
        if intercepts.len() != p {
            return Err(SimulateError::Length {
                what: "intercepts",
                expected: p,
                got: intercepts.len(),
            });
        }
        if let Some(node) = intercepts.iter().position(|t| !t.is_finite()) {
            return Err(SimulateError::InvalidIntercept { node });
        }
        let mut aligned: Vec<Vec<Option<f64>>> = (0..p).map(|k| vec![None; dag.parents(k).len()]).collect();
        for (parent, child, weight) in weights {
            if child >= p || parent >= p {
                return Err(SimulateError::UnexpectedWeight { parent, child });
            }
            let slot = dag
                .parents(child)
                .binary_search(&parent)
                .map_err(|_| SimulateError::UnexpectedWeight { parent, child })?;
            if weight == 0.0 || !weight.is_finite() {
                return Err(SimulateError::InvalidWeight { parent, child, weight });
            }
            aligned[child][slot] = Some(weight);
        }
        let mut weights = Vec::with_capacity(p);
        for (child, row) in aligned.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (slot, w) in row.into_iter().enumerate() {
                match w {
                    Some(w) => out.push(w),
                    None => {
                        return Err(SimulateError::MissingWeight {
                            parent: dag.parents(child)[slot],
                            child,
                        })
                    }
                }
            }
            weights.push(out);
        }
        Ok(PoissonSem {
            link,
            dag,
            intercepts,
            weights,
        })
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Weights of `child`'s incoming edges, aligned with `dag().parents(child)`.
    pub fn weights_of(&self, child: usize) -> &[f64] {
        &self.weights[child]
    }

    pub fn weight_triples(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dag.p())
            .flat_map(|k| {
                self.dag
                    .parents(k)
                    .iter()
                    .zip(&self.weights[k])
                    .map(move |(&j, &w)| (j, k, w))
            })
            .collect()
    }

    /// Linear predictor of node `k` given a full row of values.
    pub fn linear_predictor(&self, k: usize, row: &[u64]) -> f64 {
        self.intercepts[k]
            + self
                .dag
                .parents(k)
                .iter()
                .zip(&self.weights[k])
                .map(|(&j, &w)| w * row[j] as f64)
                .sum::<f64>()
    }

    pub fn rate(&self, k: usize, row: &[u64]) -> f64 {
        let eta = self.linear_predictor(k, row);
        match self.link {
            Link::Log => eta.exp(),
            Link::Identity => eta,
        }
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<PoissonSem, SimulateError> {
        let dag = self.dag.permuted(perm)?;
        let mut intercepts = vec![0.0; self.dag.p()];
        for (v, &t) in self.intercepts.iter().enumerate() {
            intercepts[perm[v]] = t;
        }
        let weights = self
            .weight_triples()
            .into_iter()
            .map(|(j, k, w)| (perm[j], perm[k], w));
        PoissonSem::new(self.link, dag, intercepts, weights)
    }

    pub fn to_json(&self) -> SemJson {
        SemJson {
            link: self.link,
            dag: self.dag.to_json(),
            theta: self.intercepts.clone(),
            weights: self
                .weight_triples()
                .into_iter()
                .map(|(j, k, w)| (j + 1, k + 1, w))
                .collect(),
        }
    }

    pub fn from_json(json: &SemJson) -> Result<PoissonSem, SimulateError> {
        let dag = Dag::from_json(&json.dag)?;
        let p = dag.p();
        let mut weights = Vec::with_capacity(json.weights.len());
        for &(j, k, w) in &json.weights {
            if j == 0 || k == 0 || j > p || k > p {
                return Err(SimulateError::Json(format!("weight index ({j}, {k}) out of range")));
            }
            weights.push((j - 1, k - 1, w));
        }
        PoissonSem::new(json.link, dag, json.theta.clone(), weights)
    }
}

/// `{"dag": …, "theta": […], "weights": [[parent, child, w], …]}`, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemJson {
    #[serde(default = "default_link")]
    pub link: Link,
    pub dag: GraphJson,
    pub theta: Vec<f64>,
    pub weights: Vec<(usize, usize, f64)>,
}

fn default_link() -> Link {
    Link::Log
}

/// Uniform parameter ranges; weights get a random sign on top of their magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub intercept: (f64, f64),
    pub weight_magnitude: (f64, f64),
}

impl ParamRanges {
    /// θ_j ∈ [1, 3]; |θ_jk| ∈ [0.5, 1.5] for d ≤ 1, [0.1, 1] otherwise.
    pub fn log_link_default(d: usize) -> Self {
        ParamRanges {
            intercept: (1.0, 3.0),
            weight_magnitude: if d <= 1 { (0.5, 1.5) } else { (0.1, 1.0) },
        }
    }

    /// θ_j ∈ [1, 10], |θ_jk| ∈ [0.5, 1.5].
    pub fn identity_link_default() -> Self {
        ParamRanges {
            intercept: (1.0, 10.0),
            weight_magnitude: (0.5, 1.5),
        }
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let (lo, hi) = self.intercept;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SimulateError::InvalidRange {
                what: "intercepts",
                lo,
                hi,
            });
        }
        let (lo, hi) = self.weight_magnitude;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(SimulateError::InvalidRange {
                what: "weight magnitudes",
                lo,
                hi,
            });
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Random parameters on a fixed DAG; deterministic per seed.
pub fn random_sem_params(dag: &Dag, link: Link, ranges: &ParamRanges, seed: u64) -> Result<PoissonSem, SimulateError> {
    random_sem_params_with(dag, link, ranges, &mut seeded_rng(seed))
}

pub fn random_sem_params_with<R: Rng + ?Sized>(
    dag: &Dag,
    link: Link,
    ranges: &ParamRanges,
    rng: &mut R,
) -> Result<PoissonSem, SimulateError> {
    ranges.validate()?;
    let intercepts: Vec<f64> = (0..dag.p()).map(|_| uniform(rng, ranges.intercept)).collect();
    let edges: Vec<(usize, usize)> = dag.edges().collect();
    let weights: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(j, k)| {
            let magnitude = uniform(rng, ranges.weight_magnitude);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (j, k, sign * magnitude)
        })
        .collect();
    PoissonSem::new(link, dag.clone(), intercepts, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleOptions {
    /// Largest admissible count.
    pub count_cap: u64,
    /// Rates above this flag the parameter set as explosive.
    pub rate_cap: f64,
    /// Parameter regenerations allowed before giving up.
    pub retry_budget: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            count_cap: 1_000_000_000,
            rate_cap: 1e8,
            retry_budget: 100,
        }
    }
}

/// Dense n×p matrix of counts, stored column-major, with column labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n: usize,
    columns: Vec<Vec<u64>>,
    labels: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("CSV has no header row")]
    MissingHeader,
    #[error("CSV has no columns")]
    NoColumns,
    #[error("CSV has no data rows")]
    NoRows,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column} ({label}): {value:?} is not a nonnegative integer count")]
    BadCell {
        row: usize,
        column: usize,
        label: String,
        value: String,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CountMatrix {
    pub fn from_columns(columns: Vec<Vec<u64>>, labels: Option<Vec<String>>) -> Result<Self, SimulateError> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(SimulateError::Length {
                what: "rows in every column",
                expected: n,
                got: bad.len(),
            });
        }
        let labels = match labels {
            Some(l) if l.len() != p => {
                return Err(SimulateError::Length {
                    what: "column labels",
                    expected: p,
                    got: l.len(),
                })
            }
            Some(l) => l,
            None => default_labels(p),
        };
        Ok(CountMatrix { n, columns, labels })
    }

    pub fn from_rows(rows: &[Vec<u64>], labels: Option<Vec<String>>) -> Result<Self, SimulateError> {
        let p = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for row in rows {
            if row.len() != p {
                return Err(SimulateError::Length {
                    what: "fields per row",
                    expected: p,
                    got: row.len(),
                });
            }
            for (c, &v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
        }
        CountMatrix::from_columns(columns, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> &[u64] {
        &self.columns[j]
    }

    pub fn column_f64(&self, j: usize) -> Vec<f64> {
        self.columns[j].iter().map(|&v| v as f64).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<u64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> CountMatrix {
        let n = n.min(self.n);
        CountMatrix {
            n,
            columns: self.columns.iter().map(|c| c[..n].to_vec()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Column `v` of `self` becomes column `perm[v]` of the result.
    pub fn permute_columns(&self, perm: &[usize]) -> CountMatrix {
        let p = self.p();
        let mut columns = vec![Vec::new(); p];
        let mut labels = vec![String::new(); p];
        for v in 0..p {
            columns[perm[v]] = self.columns[v].clone();
            labels[perm[v]] = self.labels[v].clone();
        }
        CountMatrix {
            n: self.n,
            columns,
            labels,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.labels)?;
        let mut buf = Vec::with_capacity(self.p());
        for i in 0..self.n {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("CSV is UTF-8")
    }

    /// Reads a header row of labels followed by integer count rows.
    /// Row numbers in errors count data rows from 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<CountMatrix, IngestError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.is_empty() {
            return Err(IngestError::MissingHeader);
        }
        let labels: Vec<String> = headers.iter().map(|s| s.trim().to_string()).collect();
        let p = labels.len();
        if p == 0 || (p == 1 && labels[0].is_empty()) {
            return Err(IngestError::NoColumns);
        }
        let mut columns = vec![Vec::new(); p];
        for (idx, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = idx + 1;
            if rec.len() != p {
                return Err(IngestError::Ragged {
                    row,
                    expected: p,
                    found: rec.len(),
                });
            }
            for (j, field) in rec.iter().enumerate() {
                let value = field.trim();
                let parsed = value.parse::<u64>().map_err(|_| IngestError::BadCell {
                    row,
                    column: j + 1,
                    label: labels[j].clone(),
                    value: value.to_string(),
                })?;
                columns[j].push(parsed);
            }
        }
        if columns[0].is_empty() {
            return Err(IngestError::NoRows);
        }
        let n = columns[0].len();
        Ok(CountMatrix { n, columns, labels })
    }
}

pub fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

/// Ancestral sampling of a log-link SEM in topological order.
pub fn sample_sem(sem: &PoissonSem, n: usize, seed: u64, options: &SampleOptions) -> Result<CountMatrix, SimulateError> {
    if sem.link != Link::Log {
        return Err(SimulateError::WrongLink {
            expected: Link::Log,
            got: sem.link,
        });
    }
    sample_in_order(sem, &topological_order(sem.dag()), n, seed, options)
}

/// Ancestral sampling of an identity-link model; a non-positive rate flags the parameters.
pub fn sample_identity_link(
    model: &PoissonSem,
    n: usize,
    seed: u64,
    options: &SampleOptions,
) -> Result<CountMatrix, SimulateError> {
    if model.link != Link::Identity {
        return Err(SimulateError::WrongLink {
            expected: Link::Identity,
            got: model.link,
        });
    }
    sample_in_order(model, &topological_order(model.dag()), n, seed, options)
}

/// Samples nodes in the given topological `order`. The node at rank `r` draws
/// from its own stream `r`, so relabeling nodes together with the order
/// reproduces the same values under the new labels.
pub fn sample_in_order(
    sem: &PoissonSem,
    order: &Ordering,
    n: usize,
    seed: u64,
    options: &SampleOptions,
) -> Result<CountMatrix, SimulateError> {
    if n == 0 {
        return Err(SimulateError::NoSamples);
    }
    let p = sem.dag.p();
    if !order.respects(&sem.dag) {
        return Err(SimulateError::Json("sampling order does not respect the DAG".into()));
    }
    let mut columns: Vec<Vec<u64>> = vec![Vec::new(); p];
    for (rank, &k) in order.as_slice().iter().enumerate() {
        let mut rng = stream_rng(seed, rank as u64);
        let parents = sem.dag.parents(k);
        let weights = &sem.weights[k];
        let mut col = Vec::with_capacity(n);
        for i in 0..n {
            let eta = sem.intercepts[k]
                + parents
                    .iter()
                    .zip(weights)
                    .map(|(&j, &w)| w * columns[j][i] as f64)
                    .sum::<f64>();
            let rate = match sem.link {
                Link::Log => eta.exp(),
                Link::Identity => {
                    if eta <= 0.0 {
                        return Err(SimulateError::NegativeRate { node: k, rate: eta });
                    }
                    eta
                }
            };
            if !rate.is_finite() || rate > options.rate_cap {
                return Err(SimulateError::Overflow { node: k, rate });
            }
            let x = poisson_variate(rate, &mut rng)?;
            if x > options.count_cap {
                return Err(SimulateError::Overflow { node: k, rate });
            }
            col.push(x);
        }
        columns[k] = col;
    }
    let labels = sem.dag.labels().map(<[String]>::to_vec);
    CountMatrix::from_columns(columns, labels)
}

/// Parameters and data that passed the overflow / positivity checks.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub sem: PoissonSem,
    pub data: CountMatrix,
    /// Parameter sets discarded before this one.
    pub regenerations: usize,
}

/// Draws parameters on `dag` and samples `n` rows, regenerating the
/// parameters whenever sampling flags them, up to `options.retry_budget` times.
pub fn simulate(
    dag: &Dag,
    link: Link,
    ranges: &ParamRanges,
    n: usize,
    seed: u64,
    options: &SampleOptions,
) -> Result<Simulated, SimulateError> {
    ranges.validate()?;
    let mut master = seeded_rng(seed);
    let mut last = None;
    for attempt in 0..=options.retry_budget {
        let sem = random_sem_params_with(dag, link, ranges, &mut master)?;
        let data_seed = master.next_u64();
        let order = topological_order(dag);
        match sample_in_order(&sem, &order, n, data_seed, options) {
            Ok(data) => {
                return Ok(Simulated {
                    sem,
                    data,
                    regenerations: attempt,
                })
            }
            Err(e @ (SimulateError::Overflow { .. } | SimulateError::NegativeRate { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    let last = last.expect("at least one attempt");
    let node = match last {
        SimulateError::Overflow { node, .. } | SimulateError::NegativeRate { node, .. } => node,
        _ => unreachable!(),
    };
    Err(SimulateError::RegenerationExhausted {
        attempts: options.retry_budget + 1,
        node,
        last: Box::new(last),
    })
}
