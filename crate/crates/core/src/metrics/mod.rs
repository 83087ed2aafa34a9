//! Conformer, distribution and sample-quality metrics.

mod histogram;
mod rmsd;
mod stats;
mod suite;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use histogram::{js_divergence, Histogram};
pub use rmsd::{cov_amr, kabsch_rmsd, kabsch_rotation, ConformerSet, CovAmr, DEFAULT_COVERAGE_THRESHOLD};
pub use stats::{contains_fragments, sample_stats, SampleStats, CONTAINMENT_TOLERANCE};
pub use suite::{structure_js_suite, Binning, SuiteConfig, RING_SIZES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("coordinate sets have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("conformer sets describe different graphs")]
    GraphMismatch,
    #[error("histograms use different binning")]
    BinningMismatch,
    #[error("histogram has no counts")]
    EmptyHistogram,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("metric {0} is not finite")]
    NonFinite(String),
}

/// Named scalar metrics plus string notes describing how they were made.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub values: BTreeMap<String, f64>,
    pub provenance: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn insert(&mut self, key: String, value: f64) {
        self.values.insert(key, value);
    }

    pub fn note(&mut self, key: &str, value: String) {
        self.provenance.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn merge(&mut self, prefix: &str, other: MetricReport) {
        for (k, v) in other.values {
            self.values.insert(format!("{prefix}{k}"), v);
        }
        for (k, v) in other.provenance {
            self.provenance.insert(format!("{prefix}{k}"), v);
        }
    }

    pub fn check_finite(&self) -> Result<(), MetricsError> {
        match self.values.iter().find(|(_, v)| !v.is_finite()) {
            Some((k, _)) => Err(MetricsError::NonFinite(k.clone())),
            None => Ok(()),
        }
    }

    /// `key<TAB>value` lines, values first, then `#`-prefixed notes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}\t{v}");
        }
        for (k, v) in &self.provenance {
            let _ = writeln!(out, "# {k}\t{v}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
