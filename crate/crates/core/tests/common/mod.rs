//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;

use poisson_mrs::graph::Dag;
use poisson_mrs::simulate::{Link, PoissonSem};

/// Every DAG on `p` labelled nodes (each pair absent, forward or backward,
/// filtered for acyclicity).
pub fn all_dags(p: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut edges = Vec::new();
        for &(a, b) in &pairs {
            match c % 3 {
                1 => edges.push((a, b)),
                2 => edges.push((b, a)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(d) = Dag::new(p, edges) {
            out.push(d);
        }
    }
    out
}

/// Unshielded colliders `(a, k, c)` with `a < c`.
pub fn v_structures(dag: &Dag) -> BTreeSet<(usize, usize, usize)> {
    let mut v = BTreeSet::new();
    for k in 0..dag.p() {
        let ps = dag.parents(k);
        for &a in ps {
            for &c in ps {
                if a < c && !dag.adjacent(a, c) {
                    v.insert((a, k, c));
                }
            }
        }
    }
    v
}

/// Equivalence class by the skeleton + v-structure characterization, and the
/// class's CPDAG read off directly: an edge is directed iff every member
/// orients it the same way.
pub fn brute_force_cpdag(
    dag: &Dag,
    universe: &[Dag],
) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
    let skel = dag.skeleton();
    let vs = v_structures(dag);
    let class: Vec<&Dag> = universe
        .iter()
        .filter(|g| g.skeleton() == skel && v_structures(g) == vs)
        .collect();
    assert!(class.iter().any(|g| g.edge_set() == dag.edge_set()));
    let mut directed = BTreeSet::new();
    let mut undirected = BTreeSet::new();
    for &(a, b) in &skel {
        let forward = class.iter().filter(|g| g.has_edge(a, b)).count();
        if forward == class.len() {
            directed.insert((a, b));
        } else if forward == 0 {
            directed.insert((b, a));
        } else {
            undirected.insert((a, b));
        }
    }
    (directed, undirected)
}

/// Unpenalized Poisson regression by plain Newton-Raphson with step halving,
/// dense Gaussian elimination. Returns `[intercept, coefficients...]`.
pub fn newton_mle(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let d = cols.len() + 1;
    let x = |i: usize, k: usize| if k == 0 { 1.0 } else { cols[k - 1][i] };
    let nll = |t: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let eta: f64 = (0..d).map(|k| t[k] * x(i, k)).sum();
                eta.exp() - y[i] * eta
            })
            .sum::<f64>()
            / n as f64
    };
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut theta = vec![0.0; d];
    theta[0] = ybar.ln();
    for _ in 0..500 {
        let mut g = vec![0.0; d];
        let mut h = vec![vec![0.0; d]; d];
        for i in 0..n {
            let eta: f64 = (0..d).map(|k| theta[k] * x(i, k)).sum();
            let mu = eta.exp();
            for a in 0..d {
                g[a] += (mu - y[i]) * x(i, a) / n as f64;
                for b in 0..d {
                    h[a][b] += mu * x(i, a) * x(i, b) / n as f64;
                }
            }
        }
        let step = solve(h, g);
        let f0 = nll(&theta);
        let mut t = 1.0;
        let mut next: Vec<f64>;
        loop {
            next = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            if nll(&next) <= f0 + 1e-15 * f0.abs() || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let moved = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        theta = next;
        if moved < 1e-12 {
            break;
        }
    }
    theta
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..d {
            let f = a[r][c] / a[c][c];
            for k in c..d {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// X1 ~ Poisson(e^θ1), X2 | X1 ~ Poisson(exp(θ2 + w·X1)).
pub fn bivariate(theta1: f64, theta2: f64, w: f64) -> PoissonSem {
    let dag = Dag::new(2, [(0, 1)]).unwrap();
    PoissonSem::new(Link::Log, dag, vec![theta1, theta2], vec![(0, 1, w)]).unwrap()
}

/// Hub 0 with `leaves` children sharing one weight; every leaf has intercept 0
/// so its marginal follows the closed form of the hub rate `lambda` and `theta`.
pub fn star(leaves: usize, lambda: f64, theta: f64) -> PoissonSem {
    let p = leaves + 1;
    let dag = Dag::new(p, (1..p).map(|k| (0, k))).unwrap();
    let mut intercepts = vec![0.0; p];
    intercepts[0] = lambda.ln();
    PoissonSem::new(Link::Log, dag, intercepts, (1..p).map(|k| (0, k, theta)).collect::<Vec<_>>()).unwrap()
}

/// 0 → 1 → 2 with a common weight.
pub fn chain3(theta0: f64, w: f64) -> PoissonSem {
    let dag = Dag::new(3, [(0, 1), (1, 2)]).unwrap();
    PoissonSem::new(Link::Log, dag, vec![theta0, theta0, theta0], vec![(0, 1, w), (1, 2, w)]).unwrap()
}

/// Closed-form moments of a star leaf X = Poisson(exp(θ·H)), H ~ Poisson(λ):
/// E X = exp(λ(e^θ − 1)), E X² = E X + exp(λ(e^{2θ} − 1)).
pub fn star_leaf_moments(lambda: f64, theta: f64) -> (f64, f64) {
    let m1 = (lambda * (theta.exp() - 1.0)).exp();
    let m2 = m1 + (lambda * ((2.0 * theta).exp() - 1.0)).exp();
    (m1, m2)
}

pub fn star_leaf_score(lambda: f64, theta: f64) -> f64 {
    let (m1, m2) = star_leaf_moments(lambda, theta);
    m2 / (m1 + m1 * m1)
}
