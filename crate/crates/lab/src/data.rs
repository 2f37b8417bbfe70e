//! Dataset lookup for the commands that read real data.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use bnlab_core::databatch::{load_csv_batch, load_idx, Batch};

pub const IDX_IMAGES: &str = "train-images-idx3-ubyte";
pub const IDX_LABELS: &str = "train-labels-idx1-ubyte";

/// Environment variable naming an MNIST directory.
pub const MNIST_ENV: &str = "BNLAB_MNIST_DIR";

/// Loads an IDX directory (the two MNIST training files) or a CSV file.
pub fn load_dataset(path: &Path) -> Result<Batch> {
    if path.is_dir() {
        let (images, labels) = (path.join(IDX_IMAGES), path.join(IDX_LABELS));
        if !images.is_file() || !labels.is_file() {
            bail!("{} does not contain {IDX_IMAGES} and {IDX_LABELS}", path.display());
        }
        load_idx(&images, &labels).with_context(|| format!("loading IDX files from {}", path.display()))
    } else if path.is_file() {
        load_csv_batch(path).with_context(|| format!("loading {}", path.display()))
    } else {
        bail!("dataset {} not found", path.display())
    }
}

/// MNIST directory from the environment, else `<root>/data/mnist`, if it
/// holds both IDX files.
pub fn find_mnist(root: &Path) -> Option<PathBuf> {
    let candidates =
        std::env::var_os(MNIST_ENV).map(PathBuf::from).into_iter().chain([root.join("data").join("mnist")]);
    candidates.into_iter().find(|d| d.join(IDX_IMAGES).is_file() && d.join(IDX_LABELS).is_file())
}

/// The dataset named by a spec, falling back to [`find_mnist`] from the
/// current directory.
pub fn resolve_dataset(dataset: Option<&Path>) -> Result<Batch> {
    match dataset {
        Some(p) => load_dataset(p),
        None => {
            let cwd = std::env::current_dir()?;
            let dir = find_mnist(&cwd).with_context(|| {
                format!("no dataset given; set `dataset` in the config, {MNIST_ENV}, or place MNIST in ./data/mnist")
            })?;
            load_dataset(&dir)
        }
    }
}
