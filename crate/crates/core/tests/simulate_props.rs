mod common;

use poisson_mrs::graph::{random_dag, topological_order, Ordering};
use poisson_mrs::simulate::{
    poisson_variate, sample_in_order, sample_sem, seeded_rng, simulate, CountMatrix, Link, ParamRanges, SampleOptions,
};
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

fn mean(v: &[u64]) -> f64 {
    v.iter().sum::<u64>() as f64 / v.len() as f64
}

#[test]
fn star_leaf_mean_matches_closed_form() {
    let sem = common::star(4, 1.0, 2f64.ln());
    let data = sample_sem(&sem, 200_000, 11, &SampleOptions::default()).unwrap();
    let (m1, _) = common::star_leaf_moments(1.0, 2f64.ln());
    assert!((m1 - std::f64::consts::E).abs() < 1e-12);
    for leaf in 1..5 {
        let got = mean(data.column(leaf));
        assert!((got - m1).abs() < 0.05, "leaf {leaf}: {got}");
    }
    assert!((mean(data.column(0)) - 1.0).abs() < 0.01);
}

#[test]
fn conditional_means_follow_the_log_link() {
    let sem = common::bivariate(2f64.ln(), 0.5, 0.3);
    let data = sample_sem(&sem, 200_000, 5, &SampleOptions::default()).unwrap();
    for x1 in 0..=4u64 {
        let ys: Vec<u64> = (0..data.n()).filter(|&i| data.get(i, 0) == x1).map(|i| data.get(i, 1)).collect();
        let rate = (0.5 + 0.3 * x1 as f64).exp();
        let se = (rate / ys.len() as f64).sqrt();
        let got = mean(&ys);
        assert!((got - rate).abs() < 4.0 * se, "x1 = {x1}: {got} vs {rate}");
    }
}

#[test]
fn identity_link_conditional_means() {
    let dag = poisson_mrs::graph::Dag::new(2, [(0, 1)]).unwrap();
    let sem = poisson_mrs::simulate::PoissonSem::new(Link::Identity, dag, vec![3.0, 2.0], vec![(0, 1, 0.5)]).unwrap();
    let data = poisson_mrs::simulate::sample_identity_link(&sem, 100_000, 2, &SampleOptions::default()).unwrap();
    for x1 in 1..=5u64 {
        let ys: Vec<u64> = (0..data.n()).filter(|&i| data.get(i, 0) == x1).map(|i| data.get(i, 1)).collect();
        let rate = 2.0 + 0.5 * x1 as f64;
        let se = (rate / ys.len() as f64).sqrt();
        assert!((mean(&ys) - rate).abs() < 4.0 * se, "x1 = {x1}");
    }
}

/// Pearson chi-square against the exact Poisson(rate) pmf, on bins with
/// expected count at least 5.
fn chi_square_pvalue(rate: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let values: Vec<u64> = (0..draws).map(|_| poisson_variate(rate, &mut rng).unwrap()).collect();
    let dist = Poisson::new(rate).unwrap();
    let n = draws as f64;
    // bin edges chosen so every bin has expected count >= 5
    let mut edges = Vec::new();
    let mut last_cdf = 0.0;
    let mut k = 0u64;
    let hi = (rate + 10.0 * rate.sqrt()) as u64 + 10;
    while k < hi {
        let c = dist.cdf(k);
        if (c - last_cdf) * n >= 5.0 && (1.0 - c) * n >= 5.0 {
            edges.push(k);
            last_cdf = c;
        }
        k += 1;
    }
    let bins = edges.len() + 1;
    let mut observed = vec![0f64; bins];
    for &v in &values {
        observed[edges.partition_point(|&e| e < v)] += 1.0;
    }
    let mut stat = 0.0;
    let mut prev = 0.0;
    for b in 0..bins {
        let c = if b < edges.len() { dist.cdf(edges[b]) } else { 1.0 };
        let expected = (c - prev) * n;
        stat += (observed[b] - expected).powi(2) / expected;
        prev = c;
    }
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn large_rate_goodness_of_fit() {
    let p = chi_square_pvalue(500.0, 50_000, 3);
    assert!(p > 0.001, "p-value {p}");
}

#[test]
fn small_rate_goodness_of_fit() {
    for (rate, seed) in [(0.7, 1), (4.5, 2), (9.9, 3), (10.1, 4), (37.0, 5)] {
        let p = chi_square_pvalue(rate, 30_000, seed);
        assert!(p > 0.001, "rate {rate}: p-value {p}");
    }
}

#[test]
fn identical_seeds_identical_data() {
    let dag = random_dag(12, 2, 4).unwrap();
    let ranges = ParamRanges {
        intercept: (0.5, 1.5),
        weight_magnitude: (0.05, 0.3),
    };
    let a = simulate(&dag, Link::Log, &ranges, 300, 77, &SampleOptions::default()).unwrap();
    let b = simulate(&dag, Link::Log, &ranges, 300, 77, &SampleOptions::default()).unwrap();
    assert_eq!(a.data, b.data);
    assert_eq!(a.sem, b.sem);
    let c = simulate(&dag, Link::Log, &ranges, 300, 78, &SampleOptions::default()).unwrap();
    assert_ne!(a.data, c.data);
}

#[test]
fn relabeled_model_yields_relabeled_data() {
    let dag = random_dag(8, 2, 9).unwrap();
    let ranges = ParamRanges {
        intercept: (0.5, 1.5),
        weight_magnitude: (0.05, 0.3),
    };
    let sim = simulate(&dag, Link::Log, &ranges, 200, 1, &SampleOptions::default()).unwrap();
    let perm = vec![3, 7, 0, 5, 1, 6, 2, 4];
    let order = topological_order(&dag);
    let sem2 = sim.sem.permuted(&perm).unwrap();
    let order2 = Ordering::new(order.as_slice().iter().map(|&v| perm[v]).collect()).unwrap();
    let a = sample_in_order(&sim.sem, &order, 200, 42, &SampleOptions::default()).unwrap();
    let b = sample_in_order(&sem2, &order2, 200, 42, &SampleOptions::default()).unwrap();
    let a_perm = a.permute_columns(&perm);
    for j in 0..8 {
        assert_eq!(a_perm.column(j), b.column(j));
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let dag = random_dag(6, 1, 2).unwrap();
    let sim = simulate(&dag, Link::Log, &ParamRanges::log_link_default(1), 100, 5, &SampleOptions::default()).unwrap();
    let text = sim.data.to_csv_string();
    let back = CountMatrix::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, sim.data);
}

#[test]
fn head_is_a_prefix() {
    let dag = random_dag(5, 1, 3).unwrap();
    let sim = simulate(&dag, Link::Log, &ParamRanges::log_link_default(1), 100, 8, &SampleOptions::default()).unwrap();
    let h = sim.data.head(30);
    for j in 0..5 {
        assert_eq!(h.column(j), &sim.data.column(j)[..30]);
    }
}
