//! Dense complex operators on tensor-product spaces.
//!
//! Storage is row-major and subsystem 0 is the most significant digit of a
//! basis index, so `|i>|j>` sits at `i * d_j + j`.

use crate::error::{BqtError, Result};
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    data: Vec<C64>,
    dims: Vec<usize>,
}

/// Sorted, duplicate-free positions into an operator's subsystem list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemSet {
    indices: Vec<usize>,
}

impl SubsystemSet {
    pub fn new(indices: &[usize], count: usize) -> Result<Self> {
        let mut v = indices.to_vec();
        v.sort_unstable();
        v.dedup();
        if let Some(&bad) = v.iter().find(|&&i| i >= count) {
            return Err(BqtError::InvalidSubsystem { index: bad, count });
        }
        Ok(SubsystemSet { indices: v })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For each basis index, the part contributed by the digits in `set`.
fn digit_part(dims: &[usize], set: &[bool]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let st = strides(dims);
    (0..total)
        .map(|i| {
            let mut acc = 0;
            for k in 0..dims.len() {
                if set[k] {
                    acc += ((i / st[k]) % dims[k]) * st[k];
                }
            }
            acc
        })
        .collect()
}

/// Index of each basis vector after moving factor `perm[k]` into slot `k`.
pub(crate) fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let old_st = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_st = strides(&new_dims);
    (0..total)
        .map(|i| {
            let mut j = 0;
            for (k, &p) in perm.iter().enumerate() {
                j += ((i / old_st[p]) % dims[p]) * new_st[k];
            }
            j
        })
        .collect()
}

/// Splits each basis index into (kept index, traced index) for a partial trace.
pub(crate) fn trace_split(dims: &[usize], traced: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let kept_dims: Vec<usize> = dims
        .iter()
        .zip(traced)
        .filter(|(_, &t)| !t)
        .map(|(&d, _)| d)
        .collect();
    let tr_dims: Vec<usize> = dims
        .iter()
        .zip(traced)
        .filter(|(_, &t)| t)
        .map(|(&d, _)| d)
        .collect();
    let st = strides(dims);
    let kst = strides(&kept_dims);
    let tst = strides(&tr_dims);
    let total: usize = dims.iter().product();
    let mut kept = Vec::with_capacity(total);
    let mut tr = Vec::with_capacity(total);
    for i in 0..total {
        let (mut a, mut b, mut ka, mut kb) = (0, 0, 0, 0);
        for k in 0..dims.len() {
            let digit = (i / st[k]) % dims[k];
            if traced[k] {
                b += digit * tst[kb];
                kb += 1;
            } else {
                a += digit * kst[ka];
                ka += 1;
            }
        }
        kept.push(a);
        tr.push(b);
    }
    (kept, tr)
}

impl LabeledOperator {
    pub fn new(data: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(BqtError::DimMismatch("zero subsystem dimension".into()));
        }
        let n: usize = dims.iter().product();
        if data.len() != n * n {
            return Err(BqtError::DimMismatch(format!(
                "{} entries for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(LabeledOperator { data, dims })
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        LabeledOperator { data, dims: dims.to_vec() }
    }

    pub fn from_real(dims: &[usize], rows: &[Vec<f64>]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(BqtError::DimMismatch("row data does not match dims".into()));
        }
        Ok(Self::from_fn(dims, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::from_fn(dims, |_, _| ZERO)
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self::from_fn(dims, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn scalar(v: f64) -> Self {
        LabeledOperator { data: vec![C64::new(v, 0.0)], dims: vec![1] }
    }

    /// `|k><k|` on a single system of dimension `d`.
    pub fn basis_projector(d: usize, k: usize) -> Self {
        Self::from_fn(&[d], |i, j| if i == k && j == k { ONE } else { ZERO })
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn projector(dims: &[usize], psi: &[C64]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if psi.len() != n {
            return Err(BqtError::DimMismatch("vector length".into()));
        }
        Ok(Self::from_fn(dims, |i, j| psi[i] * psi[j].conj()))
    }

    pub fn diag(dims: &[usize], d: &[f64]) -> Self {
        Self::from_fn(dims, |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let n = self.dim();
        self.data[i * n + j] = v;
    }

    /// Same entries, new factorization of the same total dimension.
    pub fn with_dims(&self, dims: &[usize]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.dim() {
            return Err(BqtError::DimMismatch(format!(
                "cannot regroup {:?} as {:?}",
                self.dims, dims
            )));
        }
        Ok(LabeledOperator { data: self.data.clone(), dims: dims.to_vec() })
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(BqtError::DimMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(LabeledOperator { data, dims: self.dims.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(LabeledOperator { data, dims: self.dims.clone() })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_c(C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        LabeledOperator { data: self.data.iter().map(|a| a * s).collect(), dims: self.dims.clone() }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let n = self.dim();
        if n > 48 {
            let c = &self.to_faer() * &other.to_faer();
            return Ok(Self::from_faer(&c, &self.dims));
        }
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(LabeledOperator { data: out, dims: self.dims.clone() })
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        Self::from_fn(&self.dims, |i, j| self.data[j * n + i].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim();
        Self::from_fn(&self.dims, |i, j| self.data[j * n + i])
    }

    pub fn conj(&self) -> Self {
        LabeledOperator { data: self.data.iter().map(|a| a.conj()).collect(), dims: self.dims.clone() }
    }

    pub fn trace(&self) -> C64 {
        let n = self.dim();
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    /// Tr[A^dagger B].
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                m = m.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn hermitian_part(&self) -> Self {
        let n = self.dim();
        Self::from_fn(&self.dims, |i, j| (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (na, nb) = (self.dim(), other.dim());
        let n = na * nb;
        let mut data = vec![ZERO; n * n];
        for i1 in 0..na {
            for j1 in 0..na {
                let a = self.data[i1 * na + j1];
                if a == ZERO {
                    continue;
                }
                for i2 in 0..nb {
                    let row = (i1 * nb + i2) * n + j1 * nb;
                    for j2 in 0..nb {
                        data[row + j2] = a * other.data[i2 * nb + j2];
                    }
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        LabeledOperator { data, dims }
    }

    pub fn kron_all(ops: &[&LabeledOperator]) -> Self {
        let mut acc = LabeledOperator { data: vec![ONE], dims: vec![] };
        for op in ops {
            acc = acc.kron(op);
        }
        acc
    }

    fn flags(&self, set: &SubsystemSet) -> Result<Vec<bool>> {
        let count = self.dims.len();
        if let Some(&bad) = set.indices.iter().find(|&&i| i >= count) {
            return Err(BqtError::InvalidSubsystem { index: bad, count });
        }
        Ok((0..count).map(|k| set.contains(k)).collect())
    }

    pub fn partial_trace(&self, over: &SubsystemSet) -> Result<Self> {
        let flags = self.flags(over)?;
        let (kept, tr) = trace_split(&self.dims, &flags);
        let kept_dims: Vec<usize> = self
            .dims
            .iter()
            .zip(&flags)
            .filter(|(_, &t)| !t)
            .map(|(&d, _)| d)
            .collect();
        let m: usize = kept_dims.iter().product();
        let n = self.dim();
        let mut out = vec![ZERO; m * m];
        for i in 0..n {
            for j in 0..n {
                if tr[i] == tr[j] {
                    out[kept[i] * m + kept[j]] += self.data[i * n + j];
                }
            }
        }
        Ok(LabeledOperator { data: out, dims: kept_dims })
    }

    /// Partial trace over the listed positions (convenience wrapper).
    pub fn ptrace(&self, over: &[usize]) -> Result<Self> {
        self.partial_trace(&SubsystemSet::new(over, self.dims.len())?)
    }

    pub fn partial_transpose(&self, on: &SubsystemSet) -> Result<Self> {
        let flags = self.flags(on)?;
        let part = digit_part(&self.dims, &flags);
        let n = self.dim();
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                let ii = i - part[i] + part[j];
                let jj = j - part[j] + part[i];
                out[ii * n + jj] = self.data[i * n + j];
            }
        }
        Ok(LabeledOperator { data: out, dims: self.dims.clone() })
    }

    pub fn ptranspose(&self, on: &[usize]) -> Result<Self> {
        self.partial_transpose(&SubsystemSet::new(on, self.dims.len())?)
    }

    /// Reorders tensor factors: factor `perm[k]` of `self` becomes factor `k`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let count = self.dims.len();
        let mut seen = vec![false; count];
        if perm.len() != count {
            return Err(BqtError::DimMismatch(format!("permutation of length {} for {} factors", perm.len(), count)));
        }
        for &p in perm {
            if p >= count || seen[p] {
                return Err(BqtError::InvalidSubsystem { index: p, count });
            }
            seen[p] = true;
        }
        let map = permutation_map(&self.dims, perm);
        let n = self.dim();
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                out[map[i] * n + map[j]] = self.data[i * n + j];
            }
        }
        let dims = perm.iter().map(|&p| self.dims[p]).collect();
        Ok(LabeledOperator { data: out, dims })
    }

    pub fn to_faer(&self) -> Mat<C64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.data[i * n + j])
    }

    pub fn from_faer(m: &Mat<C64>, dims: &[usize]) -> Self {
        Self::from_fn(dims, |i, j| m[(i, j)])
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of the Hermitian part.
    pub fn eigh(&self) -> Result<(Vec<f64>, Mat<C64>)> {
        let (vals, u) = self.hermitian_evd(true)?;
        Ok((vals, u.expect("vectors requested")))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.hermitian_evd(false)?.0)
    }

    // faer's complex solver can fail to converge on exactly structured inputs
    // (the Choi operator of swap ⊗ id on qubits is one). Real inputs go to the
    // real solver, and a failed complex solve is retried on a rescaled copy.
    fn hermitian_evd(&self, vectors: bool) -> Result<(Vec<f64>, Option<Mat<C64>>)> {
        let h = self.hermitian_part();
        let n = h.dim();
        if h.data.iter().all(|v| v.im == 0.0) {
            let r = Mat::<f64>::from_fn(n, n, |i, j| h.data[i * n + j].re);
            if vectors {
                let evd = r
                    .self_adjoint_eigen(Side::Lower)
                    .map_err(|e| BqtError::Numerical(format!("eigendecomposition: {e:?}")))?;
                let vals = evd.S().column_vector().iter().copied().collect();
                let u = evd.U();
                return Ok((vals, Some(Mat::from_fn(n, n, |i, j| C64::new(u[(i, j)], 0.0)))));
            }
            let vals = r
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| BqtError::Numerical(format!("eigenvalues: {e:?}")))?;
            return Ok((vals, None));
        }
        let mut last = String::new();
        for scale in [1.0, 1.0 - 1.0 / 1024.0, 1.0 + 1.0 / 512.0] {
            let m = Mat::from_fn(n, n, |i, j| h.data[i * n + j] * scale);
            if vectors {
                match m.self_adjoint_eigen(Side::Lower) {
                    Ok(evd) => {
                        let vals = evd.S().column_vector().iter().map(|v| v.re / scale).collect();
                        return Ok((vals, Some(evd.U().to_owned())));
                    }
                    Err(e) => last = format!("eigendecomposition: {e:?}"),
                }
            } else {
                match m.self_adjoint_eigenvalues(Side::Lower) {
                    Ok(v) => return Ok((v.into_iter().map(|x| x / scale).collect(), None)),
                    Err(e) => last = format!("eigenvalues: {e:?}"),
                }
            }
        }
        Err(BqtError::Numerical(last))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.is_hermitian(HERMITIAN_TOL.max(tol)) && self.min_eigenvalue()? >= -tol)
    }

    /// Applies `f` to the spectrum of the Hermitian part.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (vals, u) = self.eigh()?;
        let n = self.dim();
        let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
        let mut out = vec![ZERO; n * n];
        for k in 0..n {
            if fv[k] == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = u[(i, k)] * fv[k];
                for j in 0..n {
                    out[i * n + j] += a * u[(j, k)].conj();
                }
            }
        }
        Ok(LabeledOperator { data: out, dims: self.dims.clone() })
    }

    /// Square root with negative eigenvalues clamped to zero.
    pub fn sqrt_psd(&self) -> Result<Self> {
        self.spectral_map(|v| v.max(0.0).sqrt())
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let sv = self
            .to_faer()
            .singular_values()
            .map_err(|e| BqtError::Numerical(format!("svd: {e:?}")))?;
        Ok(sv)
    }

    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.iter().sum())
    }

    pub fn check_state(&self, tol: f64) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL.max(tol) {
            return Err(BqtError::NotHermitian(dev));
        }
        let min = self.min_eigenvalue()?;
        if min < -tol {
            return Err(BqtError::NotPsd(min));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol.max(1e-10) || tr.im.abs() > tol.max(1e-10) {
            return Err(BqtError::InvalidParam(format!("trace {tr} is not 1")));
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(OperatorJson::from(self)).expect("operator serializes")
    }
}

/// Row-major JSON form: `{"dims": [...], "re": [[...]], "im": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl From<&LabeledOperator> for OperatorJson {
    fn from(op: &LabeledOperator) -> Self {
        let n = op.dim();
        let re = (0..n).map(|i| (0..n).map(|j| op.get(i, j).re).collect()).collect();
        let im = (0..n).map(|i| (0..n).map(|j| op.get(i, j).im).collect()).collect();
        OperatorJson { dims: op.dims.clone(), re, im: Some(im) }
    }
}

impl TryFrom<OperatorJson> for LabeledOperator {
    type Error = BqtError;

    fn try_from(j: OperatorJson) -> Result<Self> {
        let n: usize = j.dims.iter().product();
        let bad = |what: &str| BqtError::Parse(format!("{what} must be {n}x{n}"));
        if j.re.len() != n || j.re.iter().any(|r| r.len() != n) {
            return Err(bad("re"));
        }
        if let Some(im) = &j.im {
            if im.len() != n || im.iter().any(|r| r.len() != n) {
                return Err(bad("im"));
            }
        }
        let data = (0..n)
            .flat_map(|i| {
                let re = &j.re;
                let im = &j.im;
                (0..n).map(move |k| C64::new(re[i][k], im.as_ref().map_or(0.0, |m| m[i][k])))
            })
            .collect();
        LabeledOperator::new(data, j.dims)
    }
}

/// `‖√ρ √σ‖₁²` for density operators.
pub fn state_fidelity(rho: &LabeledOperator, sigma: &LabeledOperator) -> Result<f64> {
    if rho.dims != sigma.dims {
        return Err(BqtError::DimMismatch(format!("{:?} vs {:?}", rho.dims, sigma.dims)));
    }
    rho.check_state(PSD_TOL)?;
    sigma.check_state(PSD_TOL)?;
    // Eigenvalues at rounding level would otherwise add O(√ε) each.
    let cut = 16.0 * f64::EPSILON * rho.dim() as f64;
    let s = rho.spectral_map(|v| if v > cut { v.sqrt() } else { 0.0 })?;
    let inner = s.matmul(sigma)?.matmul(&s)?;
    let root: f64 = inner.eigenvalues()?.iter().map(|&v| if v > cut { v.sqrt() } else { 0.0 }).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    // rank-one projector onto the unnormalized maximally entangled vector of
    // three qubits, with and without complex phases
    fn structured(phased: bool) -> LabeledOperator {
        let n = 64;
        let phase = |k: usize| if phased { C64::from_polar(1.0, 0.3 * k as f64) } else { C64::new(1.0, 0.0) };
        LabeledOperator::from_fn(&[2, 2, 2, 2, 2, 2], |i, j| {
            let (a, b) = (i / 8, i % 8);
            let (c, d) = (j / 8, j % 8);
            if a == b && c == d {
                phase(a) * phase(c).conj()
            } else {
                ZERO
            }
        })
        .with_dims(&[n])
        .unwrap()
    }

    #[test]
    fn structured_spectra_converge() {
        for phased in [false, true] {
            let op = structured(phased);
            let ev = op.eigenvalues().unwrap();
            assert!((ev[63] - 8.0).abs() < 1e-12 && ev[..63].iter().all(|v| v.abs() < 1e-12), "{phased}");
            let (vals, u) = op.eigh().unwrap();
            let back = LabeledOperator::from_fn(&[64], |i, j| (0..64).map(|k| u[(i, k)] * vals[k] * u[(j, k)].conj()).sum());
            assert!(back.max_abs_diff(&op) < 1e-12);
        }
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ket_phi(d: usize) -> Vec<C64> {
        let mut v = vec![ZERO; d * d];
        for i in 0..d {
            v[i * d + i] = c(1.0 / (d as f64).sqrt());
        }
        v
    }

    #[test]
    fn kron_identity() {
        let i2 = LabeledOperator::identity(&[2]);
        let k = i2.kron(&i2);
        assert_eq!(k.dims(), &[2, 2]);
        assert_eq!(k, LabeledOperator::identity(&[2, 2]));
    }

    #[test]
    fn kron_basis_order() {
        let k = LabeledOperator::basis_projector(2, 0).kron(&LabeledOperator::basis_projector(2, 1));
        assert_eq!(k, LabeledOperator::diag(&[2, 2], &[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn zz_fixes_phi() {
        let z = LabeledOperator::diag(&[2], &[1.0, -1.0]);
        let zz = z.kron(&z);
        let phi = LabeledOperator::projector(&[2, 2], &ket_phi(2)).unwrap();
        let out = zz.matmul(&phi).unwrap().matmul(&zz.adjoint()).unwrap();
        assert!(out.max_abs_diff(&phi) < 1e-15);
    }

    #[test]
    fn marginal_of_phi() {
        let phi = LabeledOperator::projector(&[2, 2], &ket_phi(2)).unwrap();
        let m = phi.ptrace(&[1]).unwrap();
        assert!(m.max_abs_diff(&LabeledOperator::identity(&[2]).scale(0.5)) < 1e-15);
    }

    #[test]
    fn trace_of_unnormalized_gamma() {
        let gamma = LabeledOperator::projector(&[3, 3], &ket_phi(3)).unwrap().scale(3.0);
        let m = gamma.ptrace(&[0]).unwrap();
        assert!(m.max_abs_diff(&LabeledOperator::identity(&[3])) < 1e-14);
    }

    #[test]
    fn partial_transpose_of_phi() {
        let phi = LabeledOperator::projector(&[2, 2], &ket_phi(2)).unwrap();
        let t = phi.ptranspose(&[1]).unwrap();
        let mut ev = t.eigenvalues().unwrap();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(t.ptranspose(&[1]).unwrap(), phi);
    }

    #[test]
    fn full_partial_transpose_is_transpose() {
        let x = LabeledOperator::from_fn(&[2, 3], |i, j| C64::new(i as f64, j as f64 * 0.5));
        assert_eq!(x.ptranspose(&[0, 1]).unwrap(), x.transpose());
    }

    #[test]
    fn permute_swaps_factors() {
        let a = LabeledOperator::diag(&[2], &[1.0, 2.0]);
        let b = LabeledOperator::diag(&[3], &[3.0, 4.0, 5.0]);
        let ab = a.kron(&b);
        assert_eq!(ab.permute(&[1, 0]).unwrap(), b.kron(&a));
    }

    #[test]
    fn trace_norm_examples() {
        let x = LabeledOperator::diag(&[2], &[3.0, -4.0]);
        assert!((x.trace_norm().unwrap() - 7.0).abs() < 1e-12);
        let rho = LabeledOperator::diag(&[3], &[0.2, 0.3, 0.5]);
        assert!((rho.trace_norm().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let zero = LabeledOperator::basis_projector(2, 0);
        let pi = LabeledOperator::identity(&[2]).scale(0.5);
        assert!((state_fidelity(&zero, &pi).unwrap() - 0.5).abs() < 1e-12);
        let rho = LabeledOperator::diag(&[3], &[0.2, 0.3, 0.5]);
        assert!((state_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_bad_input() {
        let bad = LabeledOperator::diag(&[2], &[1.5, -0.5]);
        let pi = LabeledOperator::identity(&[2]).scale(0.5);
        assert!(matches!(state_fidelity(&bad, &pi), Err(BqtError::NotPsd(_))));
        let three = LabeledOperator::identity(&[3]).scale(1.0 / 3.0);
        assert!(matches!(state_fidelity(&three, &pi), Err(BqtError::DimMismatch(_))));
    }

    #[test]
    fn invalid_subsystem() {
        let x = LabeledOperator::identity(&[2, 2]);
        assert!(matches!(x.ptrace(&[2]), Err(BqtError::InvalidSubsystem { .. })));
        assert!(matches!(x.ptranspose(&[5]), Err(BqtError::InvalidSubsystem { .. })));
    }

    #[test]
    fn json_round_trip() {
        let x = LabeledOperator::from_fn(&[2, 2], |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let s = serde_json::to_string(&OperatorJson::from(&x)).unwrap();
        let back: OperatorJson = serde_json::from_str(&s).unwrap();
        assert_eq!(LabeledOperator::try_from(back).unwrap(), x);
    }
}
