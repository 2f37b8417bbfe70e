use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::batch::{Batch, BatchSource};
use crate::error::{Error, Result};
use crate::specmat::RealMatrix;

/// Loads a headerless CSV whose lines are `label,feature,feature,...`.
pub fn load_csv_batch(path: &Path) -> Result<Batch> {
    let batch = read_csv_batch(std::fs::File::open(path)?)?;
    Ok(Batch { source: BatchSource::File { path: path.display().to_string() }, ..batch })
}

pub fn read_csv_batch<R: Read>(r: R) -> Result<Batch> {
    let mut labels = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let label_cell = cells.next().unwrap_or("");
        let label = label_cell.parse::<usize>().map_err(|e| Error::Parse {
            line: i + 1,
            column: 1,
            message: format!("label {label_cell:?}: {e}"),
        })?;
        let features = cells
            .enumerate()
            .map(|(j, c)| {
                c.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    column: j + 2,
                    message: format!("{c:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = samples.first().map(Vec::len) {
            if features.len() != first {
                return Err(Error::Parse {
                    line: i + 1,
                    column: features.len() + 1,
                    message: format!("expected {first} features, found {}", features.len()),
                });
            }
        }
        labels.push(label);
        samples.push(features);
    }
    let features = samples.first().map_or(0, Vec::len);
    let data = RealMatrix::from_fn(features, samples.len(), |i, j| samples[j][i]);
    Batch::new(data, labels, BatchSource::File { path: String::new() })
}
