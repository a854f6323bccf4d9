use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: String,
    pub mae_mev: f64,
    pub lr: f64,
}

/// Per-epoch metrics, optionally mirrored to a CSV file.
#[derive(Default)]
pub struct MetricsLog {
    pub rows: Vec<EpochMetrics>,
    writer: Option<csv::Writer<File>>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_file(path: &Path) -> Result<Self, TrainError> {
        let writer = csv::Writer::from_path(path).map_err(|e| TrainError::File { path: path.to_path_buf(), msg: e.to_string() })?;
        Ok(MetricsLog { rows: Vec::new(), writer: Some(writer) })
    }

    pub fn push(&mut self, row: EpochMetrics) {
        if let Some(w) = &mut self.writer {
            // metrics are diagnostics; a failed write must not abort training
            let _ = w.serialize(&row).and_then(|_| w.flush().map_err(Into::into));
        }
        self.rows.push(row);
    }

    pub fn series(&self, split: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.split == split).map(|r| r.mae_mev).collect()
    }
}
