//! Machine-readable query results. The JSON schema is documented in the
//! README; every field is present only when the mode produces it.

use serde::{Deserialize, Serialize};

/// Wall-clock timings: `search_secs` covers resolution and trie insertion,
/// `bdd_secs` covers BDD translation and evaluation. Omitted from output by
/// default so that seeded runs serialize identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub search_secs: f64,
    pub bdd_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub mode: String,
    pub query: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probability: Option<f64>,
    /// `[low, high]` for bounds mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    /// Proofs as lists of pretty-printed fact terms.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub proofs: Option<Vec<Vec<String>>>,
    /// Answer substitution of the first proof (explain mode).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub proof_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trie_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bdd_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

impl QueryReport {
    pub fn new(mode: &str, query: &str) -> Self {
        QueryReport {
            mode: mode.to_string(),
            query: query.to_string(),
            probability: None,
            interval: None,
            converged: None,
            iterations: None,
            proofs: None,
            answer: None,
            proof_count: None,
            trie_nodes: None,
            bdd_nodes: None,
            samples: None,
            half_width: None,
            timings: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
