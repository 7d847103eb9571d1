//! Hyperspectral cube data model, HSIC file I/O, spatial downsampling, and a
//! synthetic generator that plants correlated band clusters.
//!
//! A cube is stored band-sequential: one `width * height` plane per band,
//! row-major within each plane. On disk the payload is 32-bit little-endian
//! floating point; in memory everything is `f64`.

use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io_util::write_atomic;

/// Magic bytes opening every HSIC cube file.
pub const HSIC_MAGIC: [u8; 4] = *b"HSIC";

/// Header length in bytes: 4-byte magic plus three little-endian u32 dims.
pub const HSIC_HEADER_LEN: usize = 16;

/// A `width x height x bands` radiance cube.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HsiCube {
    /// Build a cube from band-sequential samples, validating dimensions,
    /// length, and finiteness.
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands < 2 || width > u32::MAX as usize
            || height > u32::MAX as usize || bands > u32::MAX as usize
        {
            return Err(Error::InvalidDimensions {
                width,
                height,
                bands,
            });
        }
        let expected = width * height * bands;
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                band: index / (width * height),
                index,
            });
        }
        Ok(HsiCube {
            width,
            height,
            bands,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Pixels per band.
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    /// All samples, band-sequential.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The raw plane of band `i`. Callers validate the index.
    pub(crate) fn plane(&self, i: usize) -> &[f64] {
        let px = self.plane_len();
        &self.data[i * px..(i + 1) * px]
    }

    /// The `i`-th band flattened in row-major pixel order.
    pub fn band_vector(&self, i: usize) -> Result<BandVector> {
        if i >= self.bands {
            return Err(Error::BandIndexOutOfRange {
                index: i,
                bands: self.bands,
            });
        }
        Ok(BandVector {
            band_index: i,
            values: self.plane(i).to_vec(),
        })
    }

    /// Read a cube from an HSIC file.
    ///
    /// Rejects wrong magic, header/payload size mismatches, and non-finite
    /// samples, reporting the byte offset of the offending value.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < HSIC_HEADER_LEN {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: HSIC_HEADER_LEN as u64,
                actual: bytes.len() as u64,
                offset: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != HSIC_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
            });
        }
        let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (width, height, bands) = (dim(4), dim(8), dim(12));
        let samples = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(bands))
            .filter(|_| width > 0 && height > 0 && bands >= 2)
            .ok_or(Error::InvalidDimensions {
                width,
                height,
                bands,
            })?;
        let expected = (HSIC_HEADER_LEN as u64).saturating_add((samples as u64).saturating_mul(4));
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected,
                actual,
                offset: actual,
            });
        }
        if actual > expected {
            return Err(Error::TrailingData {
                path: path.to_path_buf(),
                expected,
                actual,
            });
        }
        let mut data = Vec::with_capacity(samples);
        for i in 0..samples {
            let at = HSIC_HEADER_LEN + 4 * i;
            let value = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            if !value.is_finite() {
                return Err(Error::NonFinitePayload {
                    path: path.to_path_buf(),
                    value,
                    band: i / (width * height),
                    offset: at as u64,
                });
            }
            data.push(f64::from(value));
        }
        Ok(HsiCube {
            width,
            height,
            bands,
            data,
        })
    }

    /// Write the cube as an HSIC file. The write is atomic: on failure no
    /// partial file is left behind.
    ///
    /// The payload is stored as `f32`; values already representable in `f32`
    /// (everything produced by [`HsiCube::load`] or
    /// [`SyntheticSpec::generate`]) round-trip bit-exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = Vec::with_capacity(HSIC_HEADER_LEN + 4 * self.data.len());
        bytes.extend_from_slice(&HSIC_MAGIC);
        bytes.extend_from_slice(&(self.width as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.height as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.bands as u32).to_le_bytes());
        for &v in &self.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        write_atomic(path.as_ref(), &bytes)
    }

    /// Reduce spatial resolution by non-overlapping `f x f` box averaging,
    /// per band. Output dimensions are `(W/f, H/f, N)`.
    pub fn downsample(&self, op: &DownsampleOperator) -> Result<HsiCube> {
        let f = op.factor;
        if !self.width.is_multiple_of(f) || !self.height.is_multiple_of(f) {
            return Err(Error::NonDivisibleDimensions {
                width: self.width,
                height: self.height,
                factor: f,
            });
        }
        let (ow, oh) = (self.width / f, self.height / f);
        let block = (f * f) as f64;
        let mut data = Vec::with_capacity(ow * oh * self.bands);
        for b in 0..self.bands {
            let plane = self.plane(b);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut sum = 0.0;
                    for dy in 0..f {
                        let row = (oy * f + dy) * self.width + ox * f;
                        for dx in 0..f {
                            sum += plane[row + dx];
                        }
                    }
                    data.push(sum / block);
                }
            }
        }
        Ok(HsiCube {
            width: ow,
            height: oh,
            bands: self.bands,
            data,
        })
    }
}

/// One band's samples, flattened in row-major pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandVector {
    band_index: usize,
    values: Vec<f64>,
}

impl BandVector {
    pub fn new(band_index: usize, values: Vec<f64>) -> Self {
        BandVector { band_index, values }
    }

    pub fn band_index(&self) -> usize {
        self.band_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Non-overlapping `f x f` box-average downsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DownsampleOperator {
    factor: usize,
}

impl DownsampleOperator {
    pub fn new(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidDownsampleFactor { factor });
        }
        Ok(DownsampleOperator { factor })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }
}

/// Recipe for a synthetic cube with planted correlation clusters.
///
/// Bands inside one cluster share a latent plane: each band is
/// `rho * shared + sqrt(1 - rho^2) * independent + noise_sigma * noise`,
/// all latents i.i.d. standard normal per pixel. Bands of different clusters
/// share nothing, so cross-cluster correlation is zero in expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Band count per planted cluster, in band order; sums to N.
    pub cluster_sizes: Vec<usize>,
    /// Shared-latent weight rho in (0, 1].
    pub intra_cluster_corr: f64,
    /// Additive white-noise scale, >= 0.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::InvalidSyntheticSpec {
            reason: reason.to_string(),
        };
        if self.width == 0 || self.height == 0 {
            return Err(fail("width and height must be >= 1"));
        }
        if self.cluster_sizes.is_empty() {
            return Err(fail("cluster_sizes is empty"));
        }
        if self.cluster_sizes.contains(&0) {
            return Err(fail("every cluster size must be >= 1"));
        }
        if self.cluster_sizes.iter().sum::<usize>() < 2 {
            return Err(fail("cluster sizes must sum to at least 2 bands"));
        }
        if !(self.intra_cluster_corr > 0.0 && self.intra_cluster_corr <= 1.0) {
            return Err(fail("intra_cluster_corr must lie in (0, 1]"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(fail("noise_sigma must be finite and >= 0"));
        }
        Ok(())
    }

    /// Total band count.
    pub fn bands(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    /// Band-index ranges of the planted clusters, in band order.
    pub fn cluster_members(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.cluster_sizes.len());
        let mut start = 0;
        for &size in &self.cluster_sizes {
            out.push(start..start + size);
            start += size;
        }
        out
    }

    /// Generate the cube. Pure function of the spec: the same spec (seed
    /// included) always yields the same cube.
    ///
    /// Samples are quantized through `f32` so generated cubes serialize to
    /// HSIC losslessly.
    pub fn generate(&self) -> Result<HsiCube> {
        self.validate()?;
        let px = self.width * self.height;
        let bands = self.bands();
        let rho = self.intra_cluster_corr;
        let indep = (1.0 - rho * rho).sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        let normal = StandardNormal;
        let mut data = Vec::with_capacity(px * bands);
        let mut shared = vec![0.0f64; px];
        for &size in &self.cluster_sizes {
            for s in shared.iter_mut() {
                *s = normal.sample(&mut rng);
            }
            for _ in 0..size {
                for &s in shared.iter() {
                    let own: f64 = normal.sample(&mut rng);
                    let noise: f64 = normal.sample(&mut rng);
                    let v = rho * s + indep * own + self.noise_sigma * noise;
                    data.push(v as f32 as f64);
                }
            }
        }
        HsiCube::new(self.width, self.height, bands, data)
    }
}
