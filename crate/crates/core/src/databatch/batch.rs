use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specmat::RealMatrix;

/// Where a batch came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BatchSource {
    File { path: String },
    Synthetic { kind: String, seed: u64 },
}

impl fmt::Display for BatchSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSource::File { path } => write!(f, "{path}"),
            BatchSource::Synthetic { kind, seed } => write!(f, "{kind}:{seed}"),
        }
    }
}

/// Samples stored as the columns of a `features x samples` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub data: RealMatrix,
    pub labels: Vec<usize>,
    pub source: BatchSource,
}

impl Batch {
    pub fn new(data: RealMatrix, labels: Vec<usize>, source: BatchSource) -> Result<Self> {
        if data.cols() != labels.len() {
            return Err(Error::Shape(format!("{} samples but {} labels", data.cols(), labels.len())));
        }
        Ok(Self { data, labels, source })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.data.rows()
    }

    /// Sub-batch of the given sample indices, in order.
    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            data: self.data.select_columns(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            source: self.source.clone(),
        }
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Batch {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// One more than the largest label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Short tag for reports: the file stem or the synthetic kind.
    pub fn tag(&self) -> String {
        match &self.source {
            BatchSource::File { path } => std::path::Path::new(path)
                .file_name()
                .map_or_else(|| path.clone(), |s| s.to_string_lossy().into_owned()),
            BatchSource::Synthetic { kind, .. } => kind.clone(),
        }
    }
}
