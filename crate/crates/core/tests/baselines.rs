mod common;

use poisson_mrs::baselines::{oracle_learn, pmrf_learn, pmrf_neighborhoods, CombineRule};
use poisson_mrs::graph::{edge_metrics, random_dag, Dag};
use poisson_mrs::mrs::{mrs_learn, DegeneratePolicy, MrsConfig};
use poisson_mrs::simulate::{sample_sem, simulate, Link, ParamRanges, PoissonSem, SampleOptions};

fn quarantine() -> MrsConfig {
    MrsConfig {
        degenerate: DegeneratePolicy::Quarantine,
        ..MrsConfig::default()
    }
}

#[test]
fn pmrf_null_gives_empty_graph() {
    let dag = Dag::empty(5).unwrap();
    let sem = PoissonSem::new(Link::Log, dag, vec![1.0, 1.3, 1.6, 1.9, 2.2], vec![]).unwrap();
    let empty = (0..30)
        .filter(|&s| {
            let data = sample_sem(&sem, 5000, 500 + s, &SampleOptions::default()).unwrap();
            let g = pmrf_learn(&data, &MrsConfig { seed: s, ..MrsConfig::default() }, CombineRule::And).unwrap();
            g.edges().is_empty()
        })
        .count();
    assert!(empty >= 24, "{empty}/30");
}

#[test]
fn pmrf_finds_negative_dependence() {
    let sem = common::bivariate(2f64.ln(), 1.0, -0.5);
    let hits = (0..50)
        .filter(|&s| {
            let data = sample_sem(&sem, 2000, 700 + s, &SampleOptions::default()).unwrap();
            let nb = pmrf_neighborhoods(&data, &MrsConfig { seed: s, ..MrsConfig::default() }).unwrap();
            let g = nb.combine(CombineRule::And);
            g.has_edge(0, 1) && nb.sign_violations == 0
        })
        .count();
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn and_rule_is_contained_in_or_rule() {
    let dag = random_dag(8, 2, 3).unwrap();
    let ranges = ParamRanges {
        intercept: (0.5, 1.5),
        weight_magnitude: (0.1, 0.4),
    };
    let sim = simulate(&dag, Link::Log, &ranges, 300, 4, &SampleOptions::default()).unwrap();
    let nb = pmrf_neighborhoods(&sim.data, &quarantine()).unwrap();
    let and = nb.combine(CombineRule::And);
    let or = nb.combine(CombineRule::Or);
    assert!(and.edges().is_subset(or.edges()));
    assert!(and.edges().iter().chain(or.edges()).all(|&(a, b)| a < b));
}

#[test]
fn oracle_drops_edges_against_the_estimated_ordering() {
    // data from 1 -> 0, truth claimed as 0 -> 1: the estimated ordering puts 1
    // first, so the claimed parent never precedes its child
    let dag = Dag::new(2, [(1, 0)]).unwrap();
    let sem = PoissonSem::new(Link::Log, dag, vec![1.0, 2f64.ln()], vec![(1, 0, 0.5)]).unwrap();
    let data = sample_sem(&sem, 3000, 1, &SampleOptions::default()).unwrap();
    let claimed = Dag::new(2, [(0, 1)]).unwrap();
    let r = oracle_learn(&data, &claimed, &MrsConfig::default()).unwrap();
    assert_eq!(r.ordering.as_slice(), &[1, 0]);
    assert_eq!(r.dag.edge_count(), 0);
    let right = oracle_learn(&data, sem.dag(), &MrsConfig::default()).unwrap();
    assert_eq!(right.dag.edge_set(), sem.dag().edge_set());
}

#[test]
fn oracle_precision_dominates_mrs() {
    let ranges = ParamRanges::log_link_default(1);
    let (mut oracle, mut mrs) = (0.0, 0.0);
    let mut trials = 0;
    for seed in 0..4u64 {
        let dag = random_dag(12, 1, seed).unwrap();
        let Ok(sim) = simulate(&dag, Link::Log, &ranges, 250, 100 + seed, &SampleOptions::default()) else {
            continue;
        };
        let config = MrsConfig { seed, ..quarantine() };
        let o = oracle_learn(&sim.data, &dag, &config).unwrap();
        let m = mrs_learn(&sim.data, &config).unwrap();
        assert!(o.dag.edge_set().is_subset(&dag.edge_set()));
        assert_eq!(o.ordering, m.ordering);
        oracle += edge_metrics(&o.dag, &dag).unwrap().precision;
        mrs += edge_metrics(&m.dag, &dag).unwrap().precision;
        trials += 1;
    }
    assert!(trials >= 3);
    assert!(oracle >= mrs, "oracle {oracle} vs mrs {mrs}");
}
