//! Dense matrices, log-domain spectra, the isometry gap and seeded samplers.

pub mod io;
mod matrix;
mod rng;
mod sample;
mod spectral;

pub use matrix::RealMatrix;
pub use rng::{split_seed, RngHandle};
pub use sample::{sample_gaussian, sample_gaussian_rect, sample_haar_orthogonal, sample_orthonormal_rows};
pub use spectral::{
    gram_eigenvalues, isometry, isometry_gap, isometry_gap_from_eigenvalues, numerical_rank, rank_from_singular_values,
    rank_with_tolerance, singular_values, spectral_summary, trace_normalize, SpectralSummary, RANK_TOL,
};
