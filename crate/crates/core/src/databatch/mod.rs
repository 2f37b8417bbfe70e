//! Datasets and synthetic batches, with rank and cosine-similarity audits.

mod audit;
mod batch;
mod csv;
mod idx;
mod synth;

pub use audit::{audits_to_csv, mean_pairwise_cosine, rank_audit, rank_audit_with_tolerance, RankAudit};
pub use batch::{Batch, BatchSource};
pub use csv::{load_csv_batch, read_csv_batch};
pub use idx::{idx_from_bytes, idx_to_bytes, load_idx, parse_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synth::{synth_batch, SynthKind};
