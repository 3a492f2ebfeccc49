use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A mutual-information (or entropy) estimate in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub sigma: f64,
    pub method: String,
    pub diagnostics: BTreeMap<String, f64>,
}

impl MiEstimate {
    pub fn new(method: &str, value: f64, sigma: f64) -> Self {
        Self { value, sigma, method: method.to_string(), diagnostics: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Mean and standard error of the mean.
pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
