use serde::{Deserialize, Serialize};

use super::batch::{Batch, BatchSource};
use crate::error::{Error, Result};
use crate::specmat::{sample_gaussian_rect, sample_orthonormal_rows, RngHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    /// I.i.d. `N(0, 1)` entries.
    Gaussian,
    /// Orthonormal columns from a Haar matrix; needs `n <= d`.
    OrthogonalCols,
    /// Gaussian batch in which each of the first `samples` columns appears
    /// `copies` times in total. The repeats occupy the last columns.
    Duplicated { samples: usize, copies: usize },
}

impl SynthKind {
    pub fn name(&self) -> String {
        match self {
            SynthKind::Gaussian => "gaussian".into(),
            SynthKind::OrthogonalCols => "orthogonal_cols".into(),
            SynthKind::Duplicated { samples, copies } => format!("duplicated_{samples}x{copies}"),
        }
    }
}

/// `d x n` synthetic batch with labels drawn uniformly from `0..classes`.
pub fn synth_batch(kind: SynthKind, d: usize, n: usize, classes: usize, rng: &mut RngHandle) -> Result<Batch> {
    if classes == 0 {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    let seed = rng.seed();
    let mut data = match kind {
        SynthKind::Gaussian | SynthKind::Duplicated { .. } => sample_gaussian_rect(d, n, 1.0, rng)?,
        SynthKind::OrthogonalCols => {
            if n > d {
                return Err(Error::InvalidArgument(format!("{n} orthogonal columns do not fit in dimension {d}")));
            }
            sample_orthonormal_rows(n, d, rng)?.transpose()
        }
    };
    let mut labels: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
    if let SynthKind::Duplicated { samples, copies } = kind {
        let repeats = samples * copies.saturating_sub(1);
        if copies < 2 || samples == 0 || samples + repeats > n {
            return Err(Error::InvalidArgument(format!(
                "cannot place {samples} samples x {copies} copies in {n} columns"
            )));
        }
        let start = n - repeats;
        for r in 0..repeats {
            let src = r % samples;
            for i in 0..d {
                data[(i, start + r)] = data[(i, src)];
            }
            labels[start + r] = labels[src];
        }
    }
    Batch::new(data, labels, BatchSource::Synthetic { kind: kind.name(), seed })
}
