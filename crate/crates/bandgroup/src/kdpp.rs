//! Exact k-DPP sampling over a band kernel.
//!
//! A k-DPP assigns each size-k band subset Y the probability
//! `det(L_Y) / e_k(lambda)`, where L_Y is the principal submatrix of the
//! kernel and `e_k` is the k-th elementary symmetric polynomial of its
//! eigenvalues. Sampling runs in two phases: pick a set of k eigenvectors
//! using the elementary symmetric polynomial table, then draw k band indices
//! from the elementary DPP spanned by the chosen eigenvectors.
//!
//! `exact_kdpp_pmf` enumerates the full distribution for small kernels and is
//! the independent oracle the sampler is validated against.

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::DppKernel;
use crate::error::{Error, Result};

/// Identifier of the seeded generator used for sampling, recorded in outputs
/// so runs can be replicated elsewhere.
pub const RNG_ALGORITHM: &str = "chacha20";

/// The reproducible generator behind [`sample_kdpp`].
pub type SampleRng = ChaCha20Rng;

/// Build the sampling generator for a 64-bit seed.
pub fn sample_rng(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

/// Eigendecomposition of a PSD kernel: eigenvalues ascending, eigenvalues
/// below zero clamped (rejected outright beneath -1e-8), and the orthonormal
/// eigenvector columns aligned with them.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in ascending order, all >= 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` pairs with `eigenvalues()[i]`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }
}

/// Decompose a kernel, enforcing symmetry and positive semidefiniteness.
///
/// Eigenvalues in [-1e-8, 0) are rounding debris and clamp to zero; anything
/// below -1e-8 means a non-PSD kernel reached the sampler and is an error.
pub fn eigendecompose(kernel: &DppKernel) -> Result<EigenDecomposition> {
    let m = kernel.entries();
    let n = m.nrows();
    let mut max_dev: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_dev = max_dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_dev > 1e-10 {
        return Err(Error::AsymmetricKernel {
            max_deviation: max_dev,
        });
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Table of elementary symmetric polynomials `E[k][n] = e_k(lambda_1..lambda_n)`.
///
/// Built by the recursion `e_k^n = e_k^{n-1} + lambda_n * e_{k-1}^{n-1}` with
/// `e_0^n = 1` and `e_k^0 = 0`; these are the normalizing constants of the
/// k-DPP and drive the eigenvector-selection phase.
#[derive(Debug, Clone)]
pub struct SymmetricPolyTable {
    max_order: usize,
    count: usize,
    values: Vec<f64>,
}

impl SymmetricPolyTable {
    /// e_k of the first n eigenvalues, for k <= max order and n <= count.
    pub fn get(&self, k: usize, n: usize) -> f64 {
        assert!(k <= self.max_order && n <= self.count, "table index out of range");
        self.values[k * (self.count + 1) + n]
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// e_k over the full eigenvalue list.
    pub fn full(&self, k: usize) -> f64 {
        self.get(k, self.count)
    }
}

/// Build the elementary symmetric polynomial table up to order `max_order`.
pub fn elementary_symmetric(eigenvalues: &[f64], max_order: usize) -> Result<SymmetricPolyTable> {
    let count = eigenvalues.len();
    if max_order > count {
        return Err(Error::OrderOutOfRange {
            order: max_order,
            count,
        });
    }
    let cols = count + 1;
    let mut values = vec![0.0; (max_order + 1) * cols];
    values[..cols].fill(1.0);
    for k in 1..=max_order {
        for n in 1..=count {
            values[k * cols + n] =
                values[k * cols + n - 1] + eigenvalues[n - 1] * values[(k - 1) * cols + n - 1];
        }
    }
    Ok(SymmetricPolyTable {
        max_order,
        count,
        values,
    })
}

/// A sorted set of k distinct band indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandSubset {
    indices: Vec<usize>,
}

impl BandSubset {
    /// Sorts the indices and rejects duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        for pair in indices.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateBandIndex { index: pair[0] });
            }
        }
        Ok(BandSubset { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Phase one of the k-DPP draw: choose k eigenvector indices.
///
/// Walking n = N..1 with r selections still owed, index n-1 is taken with
/// probability `lambda_n * e_{r-1}^{n-1} / e_r^n`; whenever r equals n the
/// probability is exactly 1, so the walk always terminates with r = 0.
pub fn sample_eigenvector_set<R: Rng + ?Sized>(
    eig: &EigenDecomposition,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = eig.size();
    if k > n {
        return Err(Error::InvalidSubsetSize { k, n });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let table = elementary_symmetric(eig.eigenvalues(), k)?;
    if table.full(k) <= 0.0 {
        return Err(Error::KernelRankBelowSize { k });
    }
    let lambda = eig.eigenvalues();
    let mut remaining = k;
    let mut chosen = Vec::with_capacity(k);
    for m in (1..=n).rev() {
        if remaining == 0 {
            break;
        }
        let denom = table.get(remaining, m);
        let numer = lambda[m - 1] * table.get(remaining - 1, m - 1);
        let p = if denom > 0.0 {
            (numer / denom).min(1.0)
        } else if numer > 0.0 {
            1.0
        } else {
            // No r-subset of the leading eigenvalues has positive mass.
            return Err(Error::KernelRankBelowSize { k });
        };
        if rng.gen::<f64>() < p {
            chosen.push(m - 1);
            remaining -= 1;
        }
    }
    debug_assert_eq!(remaining, 0, "selection walk must exhaust its budget");
    chosen.reverse();
    Ok(chosen)
}

/// Phase two of the k-DPP draw: sample one band per chosen eigenvector.
///
/// Each round picks band i with probability proportional to the squared i-th
/// row of the current orthonormal spanning set, then projects the set
/// orthogonal to the i-th coordinate axis and drops one dimension landing on
/// an elementary DPP with one fewer vector.
pub fn sample_items<R: Rng + ?Sized>(
    eig: &EigenDecomposition,
    chosen: &[usize],
    rng: &mut R,
) -> Result<BandSubset> {
    let n = eig.size();
    if chosen.is_empty() {
        return Err(Error::InvalidSubsetSize { k: 0, n });
    }
    for &c in chosen {
        if c >= n {
            return Err(Error::EigenvectorIndexOutOfRange { index: c, count: n });
        }
    }
    let mut v = DMatrix::from_fn(n, chosen.len(), |r, c| eig.eigenvectors()[(r, chosen[c])]);
    let mut items = Vec::with_capacity(chosen.len());
    while v.ncols() > 0 {
        let cols = v.ncols();
        let row_mass: Vec<f64> = (0..n)
            .map(|i| (0..cols).map(|j| v[(i, j)] * v[(i, j)]).sum())
            .collect();
        let total: f64 = row_mass.iter().sum();
        if total <= 0.0 || row_mass.iter().all(|&m| m / (cols as f64) < 1e-12) {
            return Err(Error::DegenerateSampling);
        }
        let mut u = rng.gen::<f64>() * total;
        let mut item = None;
        for (i, &m) in row_mass.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            if u < m {
                item = Some(i);
                break;
            }
            u -= m;
            item = Some(i); // fallback: last positive-mass row absorbs rounding
        }
        let item = item.ok_or(Error::DegenerateSampling)?;
        items.push(item);

        // Pivot on the column with the largest component along the item axis.
        let pivot = (0..cols)
            .max_by(|&a, &b| {
                v[(item, a)]
                    .abs()
                    .partial_cmp(&v[(item, b)].abs())
                    .expect("finite entries")
            })
            .expect("at least one column");
        let pv = v[(item, pivot)];
        if pv.abs() < 1e-12 {
            return Err(Error::DegenerateSampling);
        }
        let pivot_col = v.column(pivot).clone_owned();
        let mut reduced = DMatrix::zeros(n, cols - 1);
        let mut out = 0;
        for j in 0..cols {
            if j == pivot {
                continue;
            }
            let scale = v[(item, j)] / pv;
            for r in 0..n {
                reduced[(r, out)] = v[(r, j)] - scale * pivot_col[r];
            }
            out += 1;
        }
        // Modified Gram-Schmidt keeps the spanning set orthonormal.
        for j in 0..reduced.ncols() {
            for l in 0..j {
                let proj = reduced.column(j).dot(&reduced.column(l));
                let prior = reduced.column(l).clone_owned();
                let mut col = reduced.column_mut(j);
                col.axpy(-proj, &prior, 1.0);
            }
            let norm = reduced.column(j).norm();
            if norm < 1e-12 {
                return Err(Error::DegenerateSampling);
            }
            reduced.column_mut(j).scale_mut(1.0 / norm);
        }
        v = reduced;
    }
    BandSubset::new(items)
}

/// Draw one k-subset of bands from the kernel's k-DPP.
///
/// The draw is a pure function of `(kernel, k, seed)`: eigendecompose, build
/// the symmetric polynomial table, select eigenvectors, then sample items,
/// consuming one seeded generator throughout.
pub fn sample_kdpp(kernel: &DppKernel, k: usize, seed: u64) -> Result<BandSubset> {
    let n = kernel.size();
    if k == 0 || k > n {
        return Err(Error::InvalidSubsetSize { k, n });
    }
    let eig = eigendecompose(kernel)?;
    let mut rng = sample_rng(seed);
    let chosen = sample_eigenvector_set(&eig, k, &mut rng)?;
    sample_items(&eig, &chosen, &mut rng)
}

/// Enumeration guard for [`exact_kdpp_pmf`].
pub const PMF_ENUMERATION_LIMIT: usize = 20;

/// The exact k-DPP distribution over all size-k subsets.
///
/// `P(Y) = det(L_Y) / sum over |Y'|=k of det(L_Y')`; the normalizer equals
/// `e_k(lambda)`, which callers can cross-check via [`SubsetPmf::normalizer`].
#[derive(Debug, Clone)]
pub struct SubsetPmf {
    n: usize,
    k: usize,
    normalizer: f64,
    probabilities: BTreeMap<Vec<usize>, f64>,
}

impl SubsetPmf {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The denominator sum of principal minors.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Probability of a subset (zero for subsets of the wrong size).
    pub fn probability(&self, subset: &[usize]) -> f64 {
        let mut key = subset.to_vec();
        key.sort_unstable();
        self.probabilities.get(&key).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.probabilities.iter().map(|(s, &p)| (s.as_slice(), p))
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Per-band inclusion marginals implied by the exact distribution.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (subset, p) in self.iter() {
            for &i in subset {
                out[i] += p;
            }
        }
        out
    }

    /// Total-variation distance to an empirical distribution given as draw
    /// counts keyed by sorted subsets.
    pub fn total_variation(&self, counts: &BTreeMap<Vec<usize>, u64>) -> f64 {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return 1.0;
        }
        let mut tv = 0.0;
        for (subset, p) in &self.probabilities {
            let emp = counts.get(subset).copied().unwrap_or(0) as f64 / total as f64;
            tv += (p - emp).abs();
        }
        for (subset, &c) in counts {
            if !self.probabilities.contains_key(subset) {
                tv += c as f64 / total as f64;
            }
        }
        tv / 2.0
    }
}

/// Enumerate the exact k-DPP PMF of a kernel with at most
/// [`PMF_ENUMERATION_LIMIT`] bands.
///
/// For an unconstrained DPP the normalizer over all subsets is
/// `det(L + I)`; conditioning on `|Y| = k` restricts the sum to size-k
/// subsets, whose total `sum det(L_Y) = e_k(lambda)` is the normalizer used
/// here (and exposed via [`SubsetPmf::normalizer`] for cross-checks).
pub fn exact_kdpp_pmf(kernel: &DppKernel, k: usize) -> Result<SubsetPmf> {
    let n = kernel.size();
    if n > PMF_ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            bands: n,
            limit: PMF_ENUMERATION_LIMIT,
        });
    }
    if k > n {
        return Err(Error::InvalidSubsetSize { k, n });
    }
    if k == 0 {
        // e_0 = 1: the empty subset carries all the mass.
        return Ok(SubsetPmf {
            n,
            k,
            normalizer: 1.0,
            probabilities: BTreeMap::from([(Vec::new(), 1.0)]),
        });
    }
    let mut weights: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut normalizer = 0.0;
    for subset in (0..n).combinations(k) {
        // Principal minors of a PSD matrix are nonnegative; clip rounding noise.
        let det = kernel.principal_submatrix(&subset).determinant().max(0.0);
        normalizer += det;
        weights.insert(subset, det);
    }
    if normalizer <= 0.0 {
        return Err(Error::KernelRankBelowSize { k });
    }
    let probabilities = weights
        .into_iter()
        .map(|(s, w)| (s, w / normalizer))
        .collect();
    Ok(SubsetPmf {
        n,
        k,
        normalizer,
        probabilities,
    })
}

/// Eigenvalue-level inclusion marginals of the k-DPP:
/// `P(n in S) = lambda_n * e_{k-1}(lambda without n) / e_k(lambda)`.
pub fn eigenvalue_marginals(eigenvalues: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = eigenvalues.len();
    if k > n {
        return Err(Error::OrderOutOfRange { order: k, count: n });
    }
    if k == 0 {
        return Ok(vec![0.0; n]);
    }
    let ek = elementary_symmetric(eigenvalues, k)?.full(k);
    if ek <= 0.0 {
        return Err(Error::KernelRankBelowSize { k });
    }
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let rest: Vec<f64> = eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != m)
            .map(|(_, &v)| v)
            .collect();
        let e_rest = elementary_symmetric(&rest, k - 1)?.full(k - 1);
        out.push(eigenvalues[m] * e_rest / ek);
    }
    Ok(out)
}

/// Per-band inclusion marginals `P(i in Y)` of the k-DPP, the diagonal of its
/// marginal kernel. They sum to k.
pub fn inclusion_marginals(eig: &EigenDecomposition, k: usize) -> Result<Vec<f64>> {
    let weights = eigenvalue_marginals(eig.eigenvalues(), k)?;
    let n = eig.size();
    let v = eig.eigenvectors();
    Ok((0..n)
        .map(|i| (0..n).map(|m| weights[m] * v[(i, m)] * v[(i, m)]).sum())
        .collect())
}

/// A completed draw with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetRecord {
    /// Sorted 0-based band indices.
    pub indices: Vec<usize>,
    pub seed: u64,
    /// Hash of the kernel the draw was taken from.
    pub kernel_hash: String,
    /// Generator identifier, currently always [`RNG_ALGORITHM`].
    pub rng: String,
}

impl SubsetRecord {
    pub fn new(subset: &BandSubset, seed: u64, kernel: &DppKernel) -> Self {
        SubsetRecord {
            indices: subset.indices().to_vec(),
            seed,
            kernel_hash: kernel.content_hash(),
            rng: RNG_ALGORITHM.to_string(),
        }
    }
}
