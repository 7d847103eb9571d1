//! Inter-band correlation analysis: the Pearson correlation matrix, the PSD
//! kernel fed to the sampler, and the low-rank spectral factorization.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::io_util::{fmt_g17, write_atomic};

/// Symmetric N x N matrix of pairwise band correlations.
///
/// The upper triangle is stored once and mirrored on access, so the matrix is
/// symmetric by construction. Zero-variance bands are recorded as degenerate:
/// their off-diagonal entries are 0 and their diagonal is 1, which keeps NaN
/// out of the kernel while marking the band as carrying no information.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    upper: Vec<f64>,
    degenerate: BTreeSet<usize>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl CorrelationMatrix {
    fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + b
    }

    /// Band count N.
    pub fn size(&self) -> usize {
        self.n
    }

    /// Correlation of bands `i` and `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "band index out of range");
        self.upper[self.index(i, j)]
    }

    /// Bands with zero variance.
    pub fn degenerate_bands(&self) -> &BTreeSet<usize> {
        &self.degenerate
    }

    /// Per-band mean, as used for centering.
    pub fn band_mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    /// Per-band population standard deviation.
    pub fn band_std(&self, i: usize) -> f64 {
        self.stds[i]
    }

    /// Dense symmetric copy.
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Smallest and largest off-diagonal entries.
    pub fn off_diagonal_range(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = self.get(i, j);
                min = min.min(v);
                max = max.max(v);
            }
        }
        (min, max)
    }

    /// Smallest eigenvalue of the correlation matrix (before any clamping).
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.to_dense());
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The DPP kernel: this matrix with negative eigenvalues clamped to zero.
    ///
    /// Data-derived correlation matrices are already PSD up to rounding; the
    /// kernel differs from the correlation matrix only when negative
    /// eigenvalues are present, in which case the matrix is eigendecomposed,
    /// clamped, reconstructed, and re-symmetrized.
    pub fn to_kernel(&self) -> DppKernel {
        let dense = self.to_dense();
        let eig = SymmetricEigen::new(dense.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= 0.0 {
            return DppKernel { entries: dense };
        }
        let clamped = eig.eigenvalues.map(|v| v.max(0.0));
        let rebuilt =
            &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        let symmetric = (&rebuilt + rebuilt.transpose()) * 0.5;
        DppKernel { entries: symmetric }
    }

    /// Row-major CSV, one row per band, full `%.17g` precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.write_all(b",")?;
                }
                out.write_all(fmt_g17(self.get(i, j)).as_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        buf
    }

    /// 8-bit grayscale PGM, N x N pixels, entry r mapped to round(255*(r+1)/2).
    pub fn heatmap_bytes(&self) -> Vec<u8> {
        let mut buf = format!("P5\n{} {}\n255\n", self.n, self.n).into_bytes();
        for i in 0..self.n {
            for j in 0..self.n {
                let v = (255.0 * (self.get(i, j) + 1.0) / 2.0).round();
                buf.push(v.clamp(0.0, 255.0) as u8);
            }
        }
        buf
    }

    /// Write the PGM heatmap to `path`.
    pub fn write_heatmap(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.heatmap_bytes())
    }

    /// Write the CSV export to `path`.
    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.csv_bytes())
    }
}

/// Pairwise Pearson correlation of all bands of a cube.
///
/// Each band is mean-centered; a band whose samples are all equal has zero
/// variance and is flagged degenerate rather than producing NaN.
pub fn correlation_matrix(cube: &HsiCube) -> CorrelationMatrix {
    let n = cube.bands();
    let px = cube.plane_len();
    let inv = 1.0 / px as f64;

    let mut degenerate = BTreeSet::new();
    let mut means = Vec::with_capacity(n);
    let mut stds = Vec::with_capacity(n);
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for b in 0..n {
        let plane = cube.band_vector(b).expect("band in range");
        let plane = plane.values();
        let mean = plane.iter().sum::<f64>() * inv;
        means.push(mean);
        let constant = plane
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if constant.0 == constant.1 {
            degenerate.insert(b);
            stds.push(0.0);
            centered.push(vec![0.0; px]);
            norms.push(0.0);
            continue;
        }
        let c: Vec<f64> = plane.iter().map(|&v| v - mean).collect();
        let sq = c.iter().map(|&v| v * v).sum::<f64>();
        norms.push(sq.sqrt());
        stds.push((sq * inv).sqrt());
        centered.push(c);
    }

    let mut upper = vec![0.0; n * (n + 1) / 2];
    let mut at = 0;
    for i in 0..n {
        for j in i..n {
            upper[at] = if i == j {
                1.0
            } else if degenerate.contains(&i) || degenerate.contains(&j) {
                0.0
            } else {
                let dot = centered[i]
                    .iter()
                    .zip(&centered[j])
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>();
                dot / (norms[i] * norms[j])
            };
            at += 1;
        }
    }

    CorrelationMatrix {
        n,
        upper,
        degenerate,
        means,
        stds,
    }
}

/// Symmetric positive semidefinite kernel over bands.
#[derive(Debug, Clone, PartialEq)]
pub struct DppKernel {
    entries: DMatrix<f64>,
}

impl DppKernel {
    /// Wrap a square matrix as a kernel. The matrix must be symmetric within
    /// 1e-10; it is then symmetrized exactly. Positive semidefiniteness is
    /// enforced later, at decomposition time.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::ShapeMismatch {
                context: "kernel",
                expected: "square matrix".to_string(),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let mut max_dev: f64 = 0.0;
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                max_dev = max_dev.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if max_dev > 1e-10 {
            return Err(Error::AsymmetricKernel {
                max_deviation: max_dev,
            });
        }
        let symmetric = (&entries + entries.transpose()) * 0.5;
        Ok(DppKernel { entries: symmetric })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// The principal submatrix L_Y for an index set Y.
    pub fn principal_submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
            self.entries[(indices[r], indices[c])]
        })
    }

    /// SHA-256 of the kernel contents, for provenance in sampling records.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update((self.size() as u32).to_le_bytes());
        for i in 0..self.size() {
            for j in 0..self.size() {
                hasher.update(self.entries[(i, j)].to_le_bytes());
            }
        }
        format!("sha256:{:x}", hasher.finalize())
    }
}

/// Orthonormal spectral basis B (N x n), the left factor of the cube unfolding.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    basis: DMatrix<f64>,
}

impl SpectralBasis {
    /// Validate that the columns are orthonormal within 1e-10.
    pub fn from_matrix(basis: DMatrix<f64>) -> Result<Self> {
        let gram = basis.transpose() * &basis;
        let mut max_dev: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((gram[(i, j)] - target).abs());
            }
        }
        if max_dev > 1e-10 {
            return Err(Error::NotOrthonormal {
                max_deviation: max_dev,
            });
        }
        Ok(SpectralBasis { basis })
    }

    pub fn bands(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Coefficient matrix M (n x W*H) paired with the spatial dims it unfolds to.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    coeffs: DMatrix<f64>,
    width: usize,
    height: usize,
}

impl CoefficientMatrix {
    pub fn new(coeffs: DMatrix<f64>, width: usize, height: usize) -> Result<Self> {
        if coeffs.ncols() != width * height {
            return Err(Error::ShapeMismatch {
                context: "coefficient matrix",
                expected: format!("{} columns for {width}x{height} pixels", width * height),
                found: format!("{} columns", coeffs.ncols()),
            });
        }
        Ok(CoefficientMatrix {
            coeffs,
            width,
            height,
        })
    }

    pub fn rank(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.coeffs
    }
}

/// Band-major unfolding of the cube: row b holds band b's pixels.
fn unfold(cube: &HsiCube) -> DMatrix<f64> {
    let px = cube.plane_len();
    DMatrix::from_fn(cube.bands(), px, |b, t| cube.data()[b * px + t])
}

/// Rank-n factorization of the cube unfolding, Z ~= B * M.
///
/// B holds the top-n left singular vectors (computed via the symmetric
/// eigendecomposition of the band-space Gram matrix) and M = B^T * Z, which
/// makes the reconstruction error Frobenius-optimal for the given rank.
pub fn factorize(cube: &HsiCube, rank: usize) -> Result<(SpectralBasis, CoefficientMatrix)> {
    let n = cube.bands();
    if rank == 0 || rank > n {
        return Err(Error::RankOutOfRange { rank, bands: n });
    }
    let unfolding = unfold(cube);
    let gram = &unfolding * unfolding.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let basis = DMatrix::from_fn(n, rank, |i, c| eig.eigenvectors[(i, order[c])]);
    let coeffs = basis.transpose() * &unfolding;
    Ok((
        SpectralBasis { basis },
        CoefficientMatrix {
            coeffs,
            width: cube.width(),
            height: cube.height(),
        },
    ))
}

/// Rebuild a cube from its factorization: the unfolding of the result is B * M.
pub fn reconstruct(basis: &SpectralBasis, coeffs: &CoefficientMatrix) -> Result<HsiCube> {
    if basis.rank() != coeffs.rank() {
        return Err(Error::ShapeMismatch {
            context: "reconstruct",
            expected: format!("basis rank {}", basis.rank()),
            found: format!("coefficient rank {}", coeffs.rank()),
        });
    }
    let z = basis.matrix() * coeffs.matrix();
    let px = coeffs.width() * coeffs.height();
    let mut data = Vec::with_capacity(basis.bands() * px);
    for b in 0..basis.bands() {
        for t in 0..px {
            data.push(z[(b, t)]);
        }
    }
    HsiCube::new(coeffs.width(), coeffs.height(), basis.bands(), data)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Correlation matrix with prescribed upper-triangle entries, for rule
    /// tests that need exact values no cube would produce.
    pub(crate) fn from_upper(n: usize, upper: Vec<f64>) -> CorrelationMatrix {
        assert_eq!(upper.len(), n * (n + 1) / 2);
        CorrelationMatrix {
            n,
            upper,
            degenerate: BTreeSet::new(),
            means: vec![0.0; n],
            stds: vec![1.0; n],
        }
    }
}
