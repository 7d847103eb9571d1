//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by cube I/O, kernel construction, sampling, and grouping.
#[derive(Debug, Error)]
pub enum Error {
    /// An underlying I/O failure, with the path that was being touched.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file does not start with the `HSIC` magic.
    #[error("{path}: bad magic {found:?}; expected \"HSIC\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    /// The payload ends before the header-declared extent.
    #[error(
        "{path}: truncated cube file: expected {expected} bytes but found {actual} \
         (payload ends at byte offset {offset})"
    )]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
        offset: u64,
    },

    /// The file is longer than the header-declared extent.
    #[error("{path}: {actual} bytes of trailing data after the declared payload of {expected} bytes")]
    TrailingData {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    /// A stored sample is NaN or infinite.
    #[error("{path}: non-finite payload value {value} in band {band} at byte offset {offset}")]
    NonFinitePayload {
        path: PathBuf,
        value: f32,
        band: usize,
        offset: u64,
    },

    /// Cube dimensions violate W >= 1, H >= 1, N >= 2 (or exceed the format's u32 header fields).
    #[error("invalid cube dimensions {width}x{height}x{bands}: require W >= 1, H >= 1, N >= 2")]
    InvalidDimensions {
        width: usize,
        height: usize,
        bands: usize,
    },

    /// The data buffer does not hold exactly W*H*N samples.
    #[error("cube data holds {actual} samples, expected {expected}")]
    DataLength { expected: usize, actual: usize },

    /// An in-memory sample is NaN or infinite.
    #[error("non-finite sample in band {band} at flat index {index}")]
    NonFiniteSample { band: usize, index: usize },

    /// A band index is outside [0, N).
    #[error("band index {index} out of range for {bands} bands")]
    BandIndexOutOfRange { index: usize, bands: usize },

    /// A band subset contains the same index twice.
    #[error("duplicate band index {index} in subset")]
    DuplicateBandIndex { index: usize },

    /// Downsampling factor must be at least 1.
    #[error("downsample factor must be >= 1, got {factor}")]
    InvalidDownsampleFactor { factor: usize },

    /// Downsampling factor does not divide the spatial dimensions.
    #[error("downsample factor {factor} must divide width {width} and height {height}")]
    NonDivisibleDimensions {
        width: usize,
        height: usize,
        factor: usize,
    },

    /// A synthetic-cube spec violates its invariants.
    #[error("invalid synthetic spec: {reason}")]
    InvalidSyntheticSpec { reason: String },

    /// Requested factorization rank outside [1, N].
    #[error("rank {rank} out of range for {bands} bands")]
    RankOutOfRange { rank: usize, bands: usize },

    /// Two objects that must agree in shape do not.
    #[error("{context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// A basis matrix whose columns are not orthonormal.
    #[error("basis columns not orthonormal: max |V^T V - I| entry = {max_deviation:e}")]
    NotOrthonormal { max_deviation: f64 },

    /// A kernel that is not symmetric within tolerance.
    #[error("kernel asymmetric: max |L[i,j] - L[j,i]| = {max_deviation:e} exceeds 1e-10")]
    AsymmetricKernel { max_deviation: f64 },

    /// A kernel with an eigenvalue below -1e-8 reached the sampler.
    #[error("kernel not positive semidefinite: min eigenvalue {min_eigenvalue:e} < -1e-8")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    /// Elementary symmetric polynomial order above the eigenvalue count.
    #[error("symmetric polynomial order {order} exceeds eigenvalue count {count}")]
    OrderOutOfRange { order: usize, count: usize },

    /// Subset size outside [1, N].
    #[error("subset size {k} out of range for {n} items")]
    InvalidSubsetSize { k: usize, n: usize },

    /// e_k of the kernel spectrum is zero: no k-subset has positive probability.
    #[error("kernel rank below {k}: no subset of size {k} has positive probability")]
    KernelRankBelowSize { k: usize },

    /// An eigenvector index outside the decomposition.
    #[error("eigenvector index {index} out of range for {count} eigenvectors")]
    EigenvectorIndexOutOfRange { index: usize, count: usize },

    /// Item sampling hit residual probabilities that are all numerically zero.
    #[error("item sampling degenerate: all selection probabilities below 1e-12 (eigenvector conditioning failure)")]
    DegenerateSampling,

    /// Exact PMF enumeration guard.
    #[error("exact PMF enumeration limited to {limit} bands, got {bands}")]
    EnumerationTooLarge { bands: usize, limit: usize },

    /// A SAM argument with zero norm.
    #[error("zero-norm vector: {argument} argument has no direction")]
    ZeroNormVector { argument: &'static str },

    /// A zero-norm band encountered while building SAM values.
    #[error("zero-norm band {band}: spectral angle undefined")]
    ZeroNormBand { band: usize },

    /// Overlap threshold outside [0, 1].
    #[error("overlap threshold tau = {tau} outside [0, 1]")]
    InvalidThreshold { tau: f64 },

    /// Group assignment requires at least one representative.
    #[error("no representatives: cannot assign groups")]
    EmptyRepresentatives,

    /// JSON (de)serialization failure tied to a file.
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
