//! Shared fixtures and independent oracles for the integration suites.
//!
//! Oracles here deliberately avoid the library's computation paths: Pearson
//! is a naive two-pass loop, elementary symmetric polynomials come from
//! explicit subset enumeration, and singular values come from nalgebra's SVD
//! (the library factorizes through the Gram eigendecomposition instead).

// Each test binary uses a different subset of this module.
#![allow(dead_code)]

use bandgroup::{DppKernel, HsiCube};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random PSD kernel A*A^T / n.
pub fn random_psd_kernel(n: usize, seed: u64) -> DppKernel {
    let mut rng = rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let g = &a * a.transpose() / n as f64;
    DppKernel::from_matrix((&g + g.transpose()) * 0.5).unwrap()
}

/// Random cube with f32-representable samples.
pub fn random_cube(width: usize, height: usize, bands: usize, seed: u64) -> HsiCube {
    let mut rng = rng(seed);
    let data = (0..width * height * bands)
        .map(|_| f64::from(rng.gen::<f32>() * 4.0 - 2.0))
        .collect();
    HsiCube::new(width, height, bands, data).unwrap()
}

/// Textbook two-pass Pearson correlation.
pub fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / n;
    let va = a.iter().map(|&x| (x - ma) * (x - ma)).sum::<f64>() / n;
    let vb = b.iter().map(|&y| (y - mb) * (y - mb)).sum::<f64>() / n;
    cov / (va.sqrt() * vb.sqrt())
}

/// e_k by explicit enumeration of all k-subsets.
pub fn enum_elementary(values: &[f64], k: usize) -> f64 {
    use itertools::Itertools;
    if k == 0 {
        return 1.0;
    }
    (0..values.len())
        .combinations(k)
        .map(|c| c.iter().map(|&i| values[i]).product::<f64>())
        .sum()
}

/// Singular values of the band-major unfolding, descending, via full SVD.
pub fn singular_values_oracle(cube: &HsiCube) -> Vec<f64> {
    let px = cube.plane_len();
    let unfolding = DMatrix::from_fn(cube.bands(), px, |b, t| cube.data()[b * px + t]);
    let svd = unfolding.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Frobenius norm of the elementwise difference of two cubes.
pub fn frobenius_gap(a: &HsiCube, b: &HsiCube) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
