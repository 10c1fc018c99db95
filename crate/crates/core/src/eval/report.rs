use serde::{Deserialize, Serialize};

/// Machine-readable result of one evaluation command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub seed: u64,
    /// Real-vs-real noise floor, where the metric has one.
    pub baseline: Option<f64>,
    pub embedder_id: String,
    pub config_hash: String,
}
