pub mod baselines;
pub mod bench;
pub mod graph;
pub mod lasso;
pub mod mrs;
pub mod par;
pub mod simulate;
