//! Reference learners: the oracle (true parents, estimated ordering) and
//! Poisson MRF neighborhood selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::{Dag, GraphError, UndirectedGraph};
use crate::mrs::{self, MrsConfig, MrsError, MrsResult, ParentSource};
use crate::par;
use crate::simulate::CountMatrix;

/// Estimates the ordering exactly as [`mrs::mrs_learn`] does, then gives each
/// node its true parents that precede it in the estimated ordering. Ordering
/// mistakes therefore show up as missing edges.
pub fn oracle_learn(data: &CountMatrix, truth: &Dag, config: &MrsConfig) -> Result<MrsResult, MrsError> {
    if truth.p() != data.p() {
        return Err(GraphError::DimensionMismatch(truth.p(), data.p()).into());
    }
    mrs::learn(data, config, ParentSource::Truth(truth))
}

/// How two node-wise neighborhoods are merged into one undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// Edge when each endpoint selects the other.
    #[default]
    And,
    /// Edge when either endpoint selects the other.
    Or,
}

/// Node-wise regressions before symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    pub p: usize,
    /// Selected neighbors of every node, ascending.
    pub selected: Vec<Vec<usize>>,
    /// Penalty used for every node (None for quarantined nodes).
    pub lambdas: Vec<Option<f64>>,
    /// Selected coefficients that are positive. A Poisson MRF is only
    /// normalizable with nonpositive interactions; the fits are unconstrained.
    pub sign_violations: usize,
    pub quarantined: Vec<usize>,
    pub unconverged_fits: usize,
}

impl Neighborhoods {
    pub fn combine(&self, rule: CombineRule) -> UndirectedGraph {
        let mut edges = BTreeSet::new();
        for (j, nbrs) in self.selected.iter().enumerate() {
            for &k in nbrs {
                let mutual = self.selected[k].binary_search(&j).is_ok();
                if rule == CombineRule::Or || mutual {
                    edges.insert((j.min(k), j.max(k)));
                }
            }
        }
        let graph = UndirectedGraph::new(self.p, edges).expect("neighbors are valid distinct nodes");
        debug_assert!(graph.edges().iter().all(|&(a, b)| a < b));
        graph
    }
}

/// Fits an ℓ1 Poisson regression of every node on all others at the parent penalty.
pub fn pmrf_neighborhoods(data: &CountMatrix, config: &MrsConfig) -> Result<Neighborhoods, MrsError> {
    let quarantined = mrs::preflight(data, config)?;
    let p = data.p();
    if p < 2 {
        return Err(MrsError::Config("neighborhood selection needs at least two nodes".into()));
    }
    let n = data.n();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| data.column_f64(j)).collect();
    let usable: Vec<usize> = (0..p).filter(|j| !quarantined.contains(j)).collect();

    type Node = (Vec<usize>, Option<f64>, usize, usize);
    let per_node: Vec<Result<Node, MrsError>> = par::map_indexed(usable.len(), config.jobs, |idx| {
        let j = usable[idx];
        let others: Vec<usize> = usable.iter().copied().filter(|&k| k != j).collect();
        if others.is_empty() {
            return Ok((Vec::new(), None, 0, 0));
        }
        let design: Vec<&[f64]> = others.iter().map(|&k| columns[k].as_slice()).collect();
        let cv = mrs::cv_options(config, n, mrs::mix_seed(config.seed, j as u64 + 1));
        let fits = mrs::penalized_fits(j, 1, &columns[j], &design, config, &cv)?;
        let support = mrs::select_parents(&fits.parent, config.threshold);
        let positive = support.iter().filter(|&&k| fits.parent.coefficients[k] > 0.0).count();
        let mut selected: Vec<usize> = support.into_iter().map(|k| others[k]).collect();
        selected.sort_unstable();
        Ok((selected, Some(fits.parent.lambda), positive, fits.unconverged))
    });

    let mut selected = vec![Vec::new(); p];
    let mut lambdas = vec![None; p];
    let mut sign_violations = 0;
    let mut unconverged_fits = 0;
    for (idx, r) in per_node.into_iter().enumerate() {
        let (s, l, pos, unc) = r?;
        let j = usable[idx];
        selected[j] = s;
        lambdas[j] = l;
        sign_violations += pos;
        unconverged_fits += unc;
    }
    Ok(Neighborhoods {
        p,
        selected,
        lambdas,
        sign_violations,
        quarantined,
        unconverged_fits,
    })
}

/// Neighborhood selection followed by symmetrization.
pub fn pmrf_learn(data: &CountMatrix, config: &MrsConfig, rule: CombineRule) -> Result<UndirectedGraph, MrsError> {
    Ok(pmrf_neighborhoods(data, config)?.combine(rule))
}
