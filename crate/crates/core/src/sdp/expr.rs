//! Affine matrix expressions over real decision variables.
//!
//! Every variable block is expanded into real degrees of freedom ("dofs").
//! A Hermitian n x n block has n diagonal dofs and, for each i < j, one dof
//! for the real part and one for the imaginary part of entry (i, j). A
//! general complex block has a real and an imaginary dof per entry.

use crate::error::{BqtError, Result};
use crate::qmat::{permutation_map, strides, trace_split, LabeledOperator, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Whether a dof scales a real or an imaginary basis matrix. Under complex
/// conjugation of every block, `Imag` dofs flip sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Real,
    Imag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub dof: u32,
    pub r: u32,
    pub c: u32,
    pub v: C64,
}

/// Square affine matrix expression `constant + Σ_dof y_dof * M_dof`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    dims: Vec<usize>,
    constant: Vec<C64>,
    pub(crate) terms: Vec<Term>,
}

/// Real-linear functional `constant + Σ coef * y_dof`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinForm {
    pub coefs: Vec<(u32, f64)>,
    pub constant: f64,
}

impl LinForm {
    pub fn constant(c: f64) -> Self {
        LinForm { coefs: vec![], constant: c }
    }

    pub fn add(&self, other: &LinForm) -> LinForm {
        let mut coefs = self.coefs.clone();
        coefs.extend_from_slice(&other.coefs);
        LinForm { coefs, constant: self.constant + other.constant }.compressed()
    }

    pub fn scale(&self, s: f64) -> LinForm {
        LinForm {
            coefs: self.coefs.iter().map(|&(d, v)| (d, v * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub(crate) fn compressed(mut self) -> LinForm {
        self.coefs.sort_by_key(|t| t.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(self.coefs.len());
        for (d, v) in self.coefs {
            match out.last_mut() {
                Some(last) if last.0 == d => last.1 += v,
                _ => out.push((d, v)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        LinForm { coefs: out, constant: self.constant }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.coefs.iter().map(|&(d, v)| v * y[d as usize]).sum::<f64>()
    }
}

fn prod(d: &[usize]) -> usize {
    d.iter().product()
}

impl MatExpr {
    pub fn constant(op: &LabeledOperator) -> MatExpr {
        MatExpr { dims: op.dims().to_vec(), constant: op.data().to_vec(), terms: vec![] }
    }

    pub fn zeros(dims: &[usize]) -> MatExpr {
        let n = prod(dims);
        MatExpr { dims: dims.to_vec(), constant: vec![ZERO; n * n], terms: vec![] }
    }

    pub(crate) fn from_terms(dims: &[usize], terms: Vec<Term>) -> MatExpr {
        let mut e = MatExpr::zeros(dims);
        e.terms = terms;
        e
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        prod(&self.dims)
    }

    pub fn constant_part(&self) -> LabeledOperator {
        LabeledOperator::new(self.constant.clone(), self.dims.clone()).expect("shape")
    }

    pub(crate) fn constant_data(&self) -> &[C64] {
        &self.constant
    }

    /// Merges duplicate (dof, row, col) terms and drops zeros.
    pub(crate) fn compress(mut self) -> MatExpr {
        self.terms.sort_by_key(|t| (t.dof, t.r, t.c));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            match out.last_mut() {
                Some(last) if last.dof == t.dof && last.r == t.r && last.c == t.c => last.v += t.v,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.v.norm() > 1e-15);
        self.terms = out;
        self
    }

    fn check_same(&self, other: &MatExpr) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(BqtError::DimMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn with_dims(&self, dims: &[usize]) -> Result<MatExpr> {
        if prod(dims) != self.dim() {
            return Err(BqtError::DimMismatch(format!("cannot regroup {:?} as {:?}", self.dims, dims)));
        }
        Ok(MatExpr { dims: dims.to_vec(), ..self.clone() })
    }

    pub fn add(&self, other: &MatExpr) -> Result<MatExpr> {
        self.check_same(other)?;
        let constant = self.constant.iter().zip(&other.constant).map(|(a, b)| a + b).collect();
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(MatExpr { dims: self.dims.clone(), constant, terms }.compress())
    }

    pub fn sub(&self, other: &MatExpr) -> Result<MatExpr> {
        self.add(&other.scale(-1.0))
    }

    pub fn add_const(&self, op: &LabeledOperator) -> Result<MatExpr> {
        self.add(&MatExpr::constant(op))
    }

    pub fn scale(&self, s: f64) -> MatExpr {
        self.scale_c(C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> MatExpr {
        MatExpr {
            dims: self.dims.clone(),
            constant: self.constant.iter().map(|a| a * s).collect(),
            terms: self.terms.iter().map(|t| Term { v: t.v * s, ..*t }).collect(),
        }
    }

    pub fn adjoint(&self) -> MatExpr {
        let n = self.dim();
        let mut constant = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                constant[j * n + i] = self.constant[i * n + j].conj();
            }
        }
        let terms = self.terms.iter().map(|t| Term { dof: t.dof, r: t.c, c: t.r, v: t.v.conj() }).collect();
        MatExpr { dims: self.dims.clone(), constant, terms }.compress()
    }

    /// (X + X†)/2.
    pub fn herm_part(&self) -> MatExpr {
        let a = self.adjoint();
        let n = self.dim();
        let constant = (0..n * n).map(|k| (self.constant[k] + a.constant[k]) * 0.5).collect();
        let mut terms: Vec<Term> = self.terms.iter().map(|t| Term { v: t.v * 0.5, ..*t }).collect();
        terms.extend(a.terms.iter().map(|t| Term { v: t.v * 0.5, ..*t }));
        MatExpr { dims: self.dims.clone(), constant, terms }.compress()
    }

    /// Applies an entrywise index map `(r, c) -> (r', c')` to a square
    /// expression with new dims.
    fn remap(&self, new_dims: &[usize], map: impl Fn(usize, usize) -> Option<(usize, usize, C64)>) -> MatExpr {
        let n = self.dim();
        let m = prod(new_dims);
        let mut constant = vec![ZERO; m * m];
        for i in 0..n {
            for j in 0..n {
                let v = self.constant[i * n + j];
                if v == ZERO {
                    continue;
                }
                if let Some((a, b, s)) = map(i, j) {
                    constant[a * m + b] += v * s;
                }
            }
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if let Some((a, b, s)) = map(t.r as usize, t.c as usize) {
                terms.push(Term { dof: t.dof, r: a as u32, c: b as u32, v: t.v * s });
            }
        }
        MatExpr { dims: new_dims.to_vec(), constant, terms }.compress()
    }

    fn flags(&self, set: &[usize]) -> Result<Vec<bool>> {
        let count = self.dims.len();
        if let Some(&bad) = set.iter().find(|&&i| i >= count) {
            return Err(BqtError::InvalidSubsystem { index: bad, count });
        }
        Ok((0..count).map(|k| set.contains(&k)).collect())
    }

    pub fn partial_trace(&self, over: &[usize]) -> Result<MatExpr> {
        let flags = self.flags(over)?;
        let (kept, tr) = trace_split(&self.dims, &flags);
        let kept_dims: Vec<usize> =
            self.dims.iter().zip(&flags).filter(|(_, &t)| !t).map(|(&d, _)| d).collect();
        let one = C64::new(1.0, 0.0);
        Ok(self.remap(&kept_dims, |i, j| if tr[i] == tr[j] { Some((kept[i], kept[j], one)) } else { None }))
    }

    pub fn partial_transpose(&self, on: &[usize]) -> Result<MatExpr> {
        let flags = self.flags(on)?;
        let st = strides(&self.dims);
        let n = self.dim();
        let part: Vec<usize> = (0..n)
            .map(|i| {
                (0..self.dims.len())
                    .filter(|&k| flags[k])
                    .map(|k| ((i / st[k]) % self.dims[k]) * st[k])
                    .sum()
            })
            .collect();
        let one = C64::new(1.0, 0.0);
        let dims = self.dims.clone();
        Ok(self.remap(&dims, |i, j| Some((i - part[i] + part[j], j - part[j] + part[i], one))))
    }

    /// Factor `perm[k]` of `self` becomes factor `k`.
    pub fn permute(&self, perm: &[usize]) -> Result<MatExpr> {
        if perm.len() != self.dims.len() {
            return Err(BqtError::DimMismatch("permutation length".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(BqtError::InvalidSubsystem { index: p, count: perm.len() });
            }
            seen[p] = true;
        }
        let map = permutation_map(&self.dims, perm);
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let one = C64::new(1.0, 0.0);
        Ok(self.remap(&new_dims, |i, j| Some((map[i], map[j], one))))
    }

    /// X ⊗ K for a constant K.
    pub fn kron_const(&self, k: &LabeledOperator) -> MatExpr {
        let nk = k.dim();
        let n = self.dim();
        let m = n * nk;
        let mut dims = self.dims.clone();
        dims.extend_from_slice(k.dims());
        let nz: Vec<(usize, usize, C64)> = (0..nk)
            .flat_map(|p| (0..nk).map(move |q| (p, q)))
            .map(|(p, q)| (p, q, k.get(p, q)))
            .filter(|t| t.2 != ZERO)
            .collect();
        let mut constant = vec![ZERO; m * m];
        for i in 0..n {
            for j in 0..n {
                let v = self.constant[i * n + j];
                if v == ZERO {
                    continue;
                }
                for &(p, q, kv) in &nz {
                    constant[(i * nk + p) * m + j * nk + q] = v * kv;
                }
            }
        }
        let mut terms = Vec::with_capacity(self.terms.len() * nz.len());
        for t in &self.terms {
            for &(p, q, kv) in &nz {
                terms.push(Term {
                    dof: t.dof,
                    r: (t.r as usize * nk + p) as u32,
                    c: (t.c as usize * nk + q) as u32,
                    v: t.v * kv,
                });
            }
        }
        MatExpr { dims, constant, terms }.compress()
    }

    /// K ⊗ X for a constant K.
    pub fn const_kron(&self, k: &LabeledOperator) -> MatExpr {
        let nx = self.dims.len();
        let nk = k.num_subsystems();
        let e = self.kron_const(k);
        let perm: Vec<usize> = (nx..nx + nk).chain(0..nx).collect();
        e.permute(&perm).expect("valid permutation")
    }

    /// Tr_S[(K_S ⊗ I) X], with K given on the factors listed in `on`
    /// (in increasing order).
    pub fn contract(&self, k: &LabeledOperator, on: &[usize]) -> Result<MatExpr> {
        let flags = self.flags(on)?;
        let sdims: Vec<usize> = self.dims.iter().zip(&flags).filter(|(_, &t)| t).map(|(&d, _)| d).collect();
        if prod(&sdims) != k.dim() {
            return Err(BqtError::DimMismatch(format!("contraction operator for {:?}", sdims)));
        }
        let (rest, s) = trace_split(&self.dims, &flags);
        let rest_dims: Vec<usize> =
            self.dims.iter().zip(&flags).filter(|(_, &t)| !t).map(|(&d, _)| d).collect();
        // entry ((t, x), (s, y)) contributes K[s, t] X to (x, y)
        Ok(self.remap(&rest_dims, |i, j| {
            let kv = k.get(s[j], s[i]);
            if kv == ZERO {
                None
            } else {
                Some((rest[i], rest[j], kv))
            }
        }))
    }

    /// Tr[X] as a 1 x 1 expression.
    pub fn trace(&self) -> MatExpr {
        let one = C64::new(1.0, 0.0);
        self.remap(&[1], |i, j| if i == j { Some((0, 0, one)) } else { None })
    }

    /// s * I on `dims` for a 1 x 1 expression `s`.
    pub fn times_identity(&self, dims: &[usize]) -> Result<MatExpr> {
        if self.dim() != 1 {
            return Err(BqtError::DimMismatch("times_identity needs a scalar expression".into()));
        }
        let n = prod(dims);
        let c = self.constant[0];
        let mut constant = vec![ZERO; n * n];
        for i in 0..n {
            constant[i * n + i] = c;
        }
        let mut terms = Vec::with_capacity(self.terms.len() * n);
        for t in &self.terms {
            for i in 0..n {
                terms.push(Term { dof: t.dof, r: i as u32, c: i as u32, v: t.v });
            }
        }
        Ok(MatExpr { dims: dims.to_vec(), constant, terms })
    }

    /// X K for a constant K.
    pub fn mul_right(&self, k: &LabeledOperator) -> Result<MatExpr> {
        let n = self.dim();
        if k.dim() != n {
            return Err(BqtError::DimMismatch(format!("{:?} times {:?}", self.dims, k.dims())));
        }
        let constant = self.constant_part().matmul(&k.with_dims(&self.dims)?)?.data().to_vec();
        let mut terms = Vec::with_capacity(self.terms.len() * n);
        for t in &self.terms {
            for j in 0..n {
                let v = k.get(t.c as usize, j);
                if v != ZERO {
                    terms.push(Term { dof: t.dof, r: t.r, c: j as u32, v: t.v * v });
                }
            }
        }
        Ok(MatExpr { dims: self.dims.clone(), constant, terms }.compress())
    }

    /// Principal submatrix on the listed indices, as a single subsystem.
    pub fn principal(&self, keep: &[usize]) -> Result<MatExpr> {
        let n = self.dim();
        let mut pos = vec![u32::MAX; n];
        for (a, &i) in keep.iter().enumerate() {
            if i >= n || pos[i] != u32::MAX {
                return Err(BqtError::InvalidParam(format!("bad principal index {i}")));
            }
            pos[i] = a as u32;
        }
        let k = keep.len();
        let constant = (0..k * k).map(|x| self.constant[keep[x / k] * n + keep[x % k]]).collect();
        let terms = self
            .terms
            .iter()
            .filter(|t| pos[t.r as usize] != u32::MAX && pos[t.c as usize] != u32::MAX)
            .map(|t| Term { dof: t.dof, r: pos[t.r as usize], c: pos[t.c as usize], v: t.v })
            .collect();
        Ok(MatExpr { dims: vec![k], constant, terms })
    }

    /// [[a, b], [c, d]] with the block index as the most significant factor.
    pub fn block2x2(a: &MatExpr, b: &MatExpr, c: &MatExpr, d: &MatExpr) -> Result<MatExpr> {
        let n = a.dim();
        for e in [b, c, d] {
            a.check_same(e)?;
        }
        let m = 2 * n;
        let mut constant = vec![ZERO; m * m];
        let mut terms = Vec::new();
        for (blk, e) in [(0usize, a), (1, b), (2, c), (3, d)] {
            let (ro, co) = ((blk / 2) * n, (blk % 2) * n);
            for i in 0..n {
                for j in 0..n {
                    constant[(ro + i) * m + co + j] = e.constant[i * n + j];
                }
            }
            terms.extend(e.terms.iter().map(|t| Term {
                dof: t.dof,
                r: t.r + ro as u32,
                c: t.c + co as u32,
                v: t.v,
            }));
        }
        let mut dims = vec![2];
        dims.extend_from_slice(&a.dims);
        Ok(MatExpr { dims, constant, terms }.compress())
    }

    /// Re Tr[K X] as a linear form.
    pub fn re_inner(&self, k: &LabeledOperator) -> Result<LinForm> {
        if k.dim() != self.dim() {
            return Err(BqtError::DimMismatch("inner product shape".into()));
        }
        let n = self.dim();
        let mut constant = 0.0;
        for i in 0..n {
            for j in 0..n {
                constant += (k.get(j, i) * self.constant[i * n + j]).re;
            }
        }
        let coefs = self
            .terms
            .iter()
            .map(|t| (t.dof, (k.get(t.c as usize, t.r as usize) * t.v).re))
            .collect();
        Ok(LinForm { coefs, constant }.compressed())
    }

    /// Re Tr[X].
    pub fn re_trace(&self) -> LinForm {
        self.re_inner(&LabeledOperator::identity(&self.dims)).expect("same shape")
    }

    /// Value at a dof assignment.
    pub fn eval(&self, y: &[f64]) -> LabeledOperator {
        let mut data = self.constant.clone();
        let n = self.dim();
        for t in &self.terms {
            data[t.r as usize * n + t.c as usize] += t.v * y[t.dof as usize];
        }
        LabeledOperator::new(data, self.dims.clone()).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(dims: &[usize], first: u32) -> MatExpr {
        // generic complex matrix: Re and Im dof per entry
        let n = prod(dims);
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let d = first + 2 * (i * n + j) as u32;
                terms.push(Term { dof: d, r: i as u32, c: j as u32, v: C64::new(1.0, 0.0) });
                terms.push(Term { dof: d + 1, r: i as u32, c: j as u32, v: C64::new(0.0, 1.0) });
            }
        }
        MatExpr::from_terms(dims, terms)
    }

    fn values(n: usize) -> Vec<f64> {
        (0..2 * n * n).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect()
    }

    #[test]
    fn ops_commute_with_evaluation() {
        let dims = [2, 3, 2];
        let x = var(&dims, 0);
        let y = values(12);
        let xv = x.eval(&y);
        let k = LabeledOperator::from_fn(&[2], |i, j| C64::new((i + 1) as f64, j as f64 - 0.5));
        let k2 = LabeledOperator::from_fn(&[3, 2], |i, j| C64::new((i * j) as f64 * 0.1, (i as f64) - 1.0));
        let cases: Vec<(MatExpr, LabeledOperator)> = vec![
            (x.partial_trace(&[1]).unwrap(), xv.ptrace(&[1]).unwrap()),
            (x.partial_transpose(&[0, 2]).unwrap(), xv.ptranspose(&[0, 2]).unwrap()),
            (x.permute(&[2, 0, 1]).unwrap(), xv.permute(&[2, 0, 1]).unwrap()),
            (x.kron_const(&k), xv.kron(&k)),
            (x.const_kron(&k), k.kron(&xv)),
            (x.adjoint(), xv.adjoint()),
            (x.herm_part(), xv.hermitian_part()),
            (x.trace(), LabeledOperator::new(vec![xv.trace()], vec![1]).unwrap()),
            (x.mul_right(&k2.kron(&k)).unwrap(), xv.matmul(&k2.kron(&k).with_dims(&dims).unwrap()).unwrap()),
        ];
        for (e, want) in cases {
            assert!(e.eval(&y).max_abs_diff(&want) < 1e-12);
        }
        // contraction against the literal Tr_S[(K ⊗ I) X] with S = {1, 2}
        let c = x.contract(&k2, &[1, 2]).unwrap();
        let lit = LabeledOperator::identity(&[2]).kron(&k2).matmul(&xv).unwrap().ptrace(&[1, 2]).unwrap();
        assert!(c.eval(&y).max_abs_diff(&lit) < 1e-12);
        let f = x.re_inner(&k2.kron(&k).permute(&[2, 0, 1]).unwrap()).unwrap();
        let want = k2.kron(&k).permute(&[2, 0, 1]).unwrap().matmul(&xv).unwrap().trace().re;
        assert!((f.eval(&y) - want).abs() < 1e-12);
    }

    #[test]
    fn block_and_scalar_identity() {
        let x = var(&[2], 0);
        let s = var(&[1], 8);
        let y: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let si = s.times_identity(&[2]).unwrap();
        let b = MatExpr::block2x2(&x, &si, &si, &x.adjoint()).unwrap();
        let v = b.eval(&y);
        assert_eq!(v.dims(), &[2, 2]);
        assert_eq!(v.get(0, 2), s.eval(&y).get(0, 0));
        assert_eq!(v.get(3, 2), x.eval(&y).adjoint().get(1, 0));

        let p = b.principal(&[3, 0]).unwrap();
        let pv = p.eval(&y);
        assert_eq!(pv.dims(), &[2]);
        assert_eq!(pv.get(0, 1), v.get(3, 0));
        assert_eq!(pv.get(1, 1), v.get(0, 0));
        assert!(b.principal(&[0, 0]).is_err());
    }
}
