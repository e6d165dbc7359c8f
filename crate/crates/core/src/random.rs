//! Seeded random operators for tests and sampled checks.

use crate::qmat::{LabeledOperator, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Row-major `rows x cols` matrix of standard complex Gaussians.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<C64> {
    (0..rows * cols).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect()
}

/// Full-rank random density operator (Hilbert-Schmidt measure).
pub fn density<R: Rng>(rng: &mut R, dims: &[usize]) -> LabeledOperator {
    let n: usize = dims.iter().product();
    let g = ginibre(rng, n, n);
    let mut rho = LabeledOperator::from_fn(dims, |i, j| {
        (0..n).map(|k| g[i * n + k] * g[j * n + k].conj()).sum()
    });
    let tr = rho.trace().re;
    rho = rho.scale(1.0 / tr).hermitian_part();
    rho
}

/// Random real symmetric density operator.
pub fn real_density<R: Rng>(rng: &mut R, dims: &[usize]) -> LabeledOperator {
    let n: usize = dims.iter().product();
    let g: Vec<f64> = (0..n * n).map(|_| gaussian(rng)).collect();
    let rho = LabeledOperator::from_fn(dims, |i, j| {
        C64::new((0..n).map(|k| g[i * n + k] * g[j * n + k]).sum(), 0.0)
    });
    let tr = rho.trace().re;
    rho.scale(1.0 / tr)
}

/// Random pure state vector.
pub fn pure_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    let v = ginibre(rng, n, 1);
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// Kraus operators (each `dout x din`, row-major) of a random channel with
/// `count` Kraus operators, from a random isometry.
pub fn kraus<R: Rng>(rng: &mut R, din: usize, dout: usize, count: usize) -> Vec<Vec<C64>> {
    let rows = dout * count;
    let gin = ginibre(rng, rows, din);
    // V = G (G^dagger G)^{-1/2}
    let gram = LabeledOperator::from_fn(&[din], |a, b| {
        (0..rows).map(|r| gin[r * din + a].conj() * gin[r * din + b]).sum()
    });
    let inv_sqrt = gram.spectral_map(|v| 1.0 / v.max(1e-300).sqrt()).expect("gram eigen");
    let mut v = vec![C64::new(0.0, 0.0); rows * din];
    for r in 0..rows {
        for b in 0..din {
            v[r * din + b] = (0..din).map(|a| gin[r * din + a] * inv_sqrt.get(a, b)).sum();
        }
    }
    (0..count).map(|k| v[k * dout * din..(k + 1) * dout * din].to_vec()).collect()
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
