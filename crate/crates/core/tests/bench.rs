use poisson_mrs::bench::{run_experiment, runtime_scaling, summarize, BenchError, ExperimentSpec, Learner, ScalingSpec};
use poisson_mrs::graph::{cpdag_metrics, cpdag_of, edge_metrics, Dag};
use poisson_mrs::mrs::{DegeneratePolicy, MrsConfig};
use poisson_mrs::simulate::{Link, ParamRanges, SampleOptions};

fn small(learners: Vec<Learner>) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(6, 1, vec![40, 200], 3);
    s.learners = learners;
    s.seed = 17;
    s
}

#[test]
fn single_trial_single_row() {
    let mut s = ExperimentSpec::new(3, 1, vec![5000], 1);
    s.seed = 1;
    let r = run_experiment(&s).unwrap();
    assert_eq!(r.rows.len() + r.failures.len(), 1);
    assert_eq!(r.artifacts.len(), 1);
}

#[test]
fn rows_account_for_every_planned_run() {
    let s = small(vec![Learner::Mrs, Learner::Oracle, Learner::Pmrf]);
    let r = run_experiment(&s).unwrap();
    let voided = r.failures.iter().filter(|f| f.learner.is_none()).count() * s.learners.len() * s.n.len();
    let single = r.failures.iter().filter(|f| f.learner.is_some()).count();
    assert_eq!(r.rows.len() + voided + single, s.planned_rows());
    for row in &r.rows {
        assert_eq!(row.dag.is_some(), row.learner != Learner::Pmrf);
    }
    let summary = summarize(&r).unwrap();
    assert_eq!(summary.len(), 6);
    assert!(summary.iter().filter(|x| x.learner == Learner::Pmrf).all(|x| x.dag_recall.is_none()));
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let s = small(vec![Learner::Mrs, Learner::Pmrf]);
    let a = run_experiment(&s).unwrap();
    let b = run_experiment(&ExperimentSpec { jobs: 1, ..s.clone() }).unwrap();
    assert_eq!(a.rows_csv(false), b.rows_csv(false));
    assert_eq!(a.artifacts, b.artifacts);
    let different = run_experiment(&ExperimentSpec { seed: 18, ..s }).unwrap();
    assert_ne!(a.artifacts, different.artifacts);
}

#[test]
fn metrics_are_recomputable_from_artifacts() {
    let s = small(vec![Learner::Mrs]);
    let r = run_experiment(&s).unwrap();
    for row in &r.rows {
        let art = r.artifacts.iter().find(|a| a.trial == row.trial).unwrap();
        let truth = Dag::from_json(&art.truth).unwrap();
        let est = art.estimates.iter().find(|e| e.learner == row.learner && e.n == row.n).unwrap();
        let est = Dag::from_json(&est.graph).unwrap();
        assert_eq!(Some(edge_metrics(&est, &truth).unwrap()), row.dag);
        assert_eq!(Some(cpdag_metrics(&cpdag_of(&est), &cpdag_of(&truth)).unwrap()), row.cpdag);
    }
}

#[test]
fn larger_samples_raise_recall() {
    let mut s = ExperimentSpec::new(10, 1, vec![25, 250], 8);
    s.seed = 3;
    let r = run_experiment(&s).unwrap();
    let summary = summarize(&r).unwrap();
    let small = summary[0].dag_recall.unwrap().mean;
    let large = summary[1].dag_recall.unwrap().mean;
    assert!(large > small, "{small} -> {large}");
}

#[test]
fn generation_failures_are_recorded_not_raised() {
    let mut s = ExperimentSpec::new(5, 2, vec![50], 2);
    s.ranges = Some(ParamRanges {
        intercept: (6.0, 6.0),
        weight_magnitude: (3.0, 3.0),
    });
    s.sample = SampleOptions {
        retry_budget: 0,
        ..SampleOptions::default()
    };
    let r = run_experiment(&s).unwrap();
    assert!(r.failures.iter().all(|f| f.learner.is_none()));
    assert_eq!(r.rows.len() + r.failures.len() * s.learners.len(), s.planned_rows());
    if r.rows.is_empty() {
        assert!(matches!(summarize(&r), Err(BenchError::EmptyReport)));
    }
}

#[test]
fn learner_failures_are_recorded_not_raised() {
    // the library default errors on degenerate columns; 20 rows of sparse counts
    // make some trials fail that way
    let mut s = ExperimentSpec::new(8, 1, vec![20], 4);
    s.mrs = MrsConfig {
        degenerate: DegeneratePolicy::Error,
        min_nonzero: 10,
        ..MrsConfig::default()
    };
    let r = run_experiment(&s).unwrap();
    assert!(!r.failures.is_empty());
    assert!(r.failures.iter().all(|f| f.learner == Some(Learner::Mrs)));
}

#[test]
fn empty_learner_list_is_invalid() {
    let s = small(vec![]);
    assert!(matches!(run_experiment(&s), Err(BenchError::Invalid(_))));
}

#[test]
fn writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = small(vec![Learner::Mrs, Learner::Pmrf]);
    s.output_dir = Some(dir.path().join("out"));
    let r = run_experiment(&s).unwrap();
    let out = dir.path().join("out");
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().next().unwrap().ends_with(",seconds"));
    assert_eq!(report.lines().count(), r.rows.len() + 1);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(!summary.contains("seconds"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["rng"].as_str().unwrap().contains("ChaCha8"));
    assert!(meta["parallel_enabled"].is_boolean());
    assert_eq!(std::fs::read_dir(out.join("artifacts")).unwrap().count(), r.artifacts.len());
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, b"x").unwrap();
    let mut s = small(vec![Learner::Mrs]);
    s.output_dir = Some(file.join("sub"));
    assert!(matches!(run_experiment(&s), Err(BenchError::Io { .. })));
}

#[test]
fn scaling_table_shape() {
    let spec = ScalingSpec {
        p: vec![4],
        n: 100,
        d: 1,
        trials: 2,
        family: Link::Log,
        ranges: ParamRanges {
            intercept: (0.5, 1.5),
            weight_magnitude: (0.05, 0.2),
        },
        mrs: MrsConfig {
            fixed_lambda: Some(0.05),
            degenerate: DegeneratePolicy::Quarantine,
            ..MrsConfig::default()
        },
        sample: SampleOptions::default(),
        seed: 0,
    };
    let t = runtime_scaling(&spec).unwrap();
    assert_eq!(t.points.len(), 1);
    assert_eq!(t.slope, None);
    let t = runtime_scaling(&ScalingSpec { p: vec![4, 8], ..spec.clone() }).unwrap();
    assert!(t.slope.is_some());
    assert!(runtime_scaling(&ScalingSpec { p: vec![8, 4], ..spec }).is_err());
}
