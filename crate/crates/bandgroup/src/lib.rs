//! Diverse hyperspectral band selection.
//!
//! Hyperspectral cubes carry dozens of strongly correlated bands; most of
//! them restate their neighbors. This crate selects `k` representative bands
//! by sampling an exact k-DPP over the inter-band correlation kernel, a
//! distribution that weights a subset by the determinant of its kernel
//! submatrix so that near-duplicate bands suppress each other. It then
//! partitions all bands around the representatives, resolving ambiguous
//! (multiply-correlated) bands by the smallest spectral angle.
//!
//! ```
//! use bandgroup::{assign_groups, correlation_matrix, sample_kdpp, SyntheticSpec};
//!
//! # fn main() -> Result<(), bandgroup::Error> {
//! let cube = SyntheticSpec {
//!     width: 16,
//!     height: 16,
//!     cluster_sizes: vec![3, 3],
//!     intra_cluster_corr: 0.95,
//!     noise_sigma: 0.01,
//!     seed: 7,
//! }
//! .generate()?;
//!
//! let correlation = correlation_matrix(&cube);
//! let kernel = correlation.to_kernel();
//! let representatives = sample_kdpp(&kernel, 2, 7)?;
//! let grouping = assign_groups(&cube, &correlation, &representatives, 0.9)?;
//! assert_eq!(grouping.groups().len(), 2);
//! # Ok(())
//! # }
//! ```
//!
//! The [`guide`] module holds the full book; the `bandgroup` binary exposes
//! the same machinery as subcommands (`gen`, `correlate`, `sample`, `sam`,
//! `group`, `pmf`).

pub mod cli;
pub mod correlation;
pub mod cube;
pub mod error;
pub mod guide;
mod io_util;
pub mod kdpp;
pub mod pipeline;
pub mod sam;

pub use correlation::{
    correlation_matrix, factorize, reconstruct, CoefficientMatrix, CorrelationMatrix, DppKernel,
    SpectralBasis,
};
pub use cube::{BandVector, DownsampleOperator, HsiCube, SyntheticSpec};
pub use error::{Error, Result};
pub use kdpp::{
    eigendecompose, exact_kdpp_pmf, sample_kdpp, BandSubset, EigenDecomposition, SubsetPmf,
    SymmetricPolyTable,
};
pub use pipeline::{run_group_pipeline, GroupingReport, PipelineConfig};
pub use sam::{assign_groups, detect_overlaps, sam, sam_matrix, GroupAssignment, SamMatrix};
