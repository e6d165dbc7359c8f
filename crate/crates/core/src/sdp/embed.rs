//! Real symmetric embedding of Hermitian programs.

use super::expr::{DofKind, MatExpr};
use super::ipm::{Lmi, LmiBlock};
use super::model::{ConicProblem, Sense};
use crate::error::{BqtError, Result};
use crate::qmat::{LabeledOperator, C64};
use faer::Mat;

/// `[[Re H, -Im H], [Im H, Re H]]` as a real operator of dimension 2n.
pub fn embed_hermitian(h: &LabeledOperator) -> LabeledOperator {
    let n = h.dim();
    LabeledOperator::from_fn(&[2 * n], |i, j| {
        let v = h.get(i % n, j % n);
        let x = match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        };
        C64::new(x, 0.0)
    })
}

/// Inverse of [`embed_hermitian`], averaging the duplicated entries.
pub fn extract_hermitian(e: &LabeledOperator, dims: &[usize]) -> Result<LabeledOperator> {
    let n: usize = dims.iter().product();
    if e.dim() != 2 * n {
        return Err(BqtError::DimMismatch(format!("embedding of size {} for dimension {n}", e.dim())));
    }
    Ok(LabeledOperator::from_fn(dims, |i, j| {
        let re = 0.5 * (e.get(i, j).re + e.get(i + n, j + n).re);
        let im = 0.5 * (e.get(i + n, j).re - e.get(i, j + n).re);
        C64::new(re, im)
    }))
}

pub(crate) struct Embedded {
    pub lmi: Lmi,
    /// LMI variable index of each model dof.
    kept: Vec<Option<usize>>,
    complex: bool,
    /// Size of each PSD constraint.
    block_dims: Vec<Vec<usize>>,
    pub rhs_scale: f64,
}

fn build_block(e: &MatExpr, complex: bool, kept: &[Option<usize>]) -> LmiBlock {
    let n = e.dim();
    let size = if complex { 2 * n } else { n };
    let cst = e.constant_data();
    let c = Mat::<f64>::from_fn(size, size, |i, j| {
        let v = cst[(i % n) * n + j % n];
        match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    // S = C - Σ y A, so the coefficients enter negated.
    let mut ents: Vec<(usize, u32, u32, f64)> = Vec::with_capacity(e.terms.len() * if complex { 4 } else { 1 });
    for t in &e.terms {
        let Some(k) = kept[t.dof as usize] else { continue };
        let (r, c) = (t.r, t.c);
        if t.v.re != 0.0 {
            ents.push((k, r, c, -t.v.re));
            if complex {
                ents.push((k, r + n as u32, c + n as u32, -t.v.re));
            }
        }
        if complex && t.v.im != 0.0 {
            ents.push((k, r, c + n as u32, t.v.im));
            ents.push((k, r + n as u32, c, -t.v.im));
        }
    }
    ents.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let mut merged: Vec<(usize, u32, u32, f64)> = Vec::with_capacity(ents.len());
    for e in ents {
        match merged.last_mut() {
            Some(l) if (l.0, l.1, l.2) == (e.0, e.1, e.2) => l.3 += e.3,
            _ => merged.push(e),
        }
    }
    merged.retain(|e| e.3 != 0.0);
    let mut dofs = Vec::new();
    let mut start = vec![0];
    let mut out = Vec::with_capacity(merged.len());
    for e in merged {
        if dofs.last() != Some(&e.0) {
            if !dofs.is_empty() {
                start.push(out.len());
            }
            dofs.push(e.0);
        }
        out.push((e.1, e.2, e.3));
    }
    start.push(out.len());
    if dofs.is_empty() {
        start = vec![0];
    }
    let cplx = complex.then(|| complex_entries(e, kept, &dofs));
    LmiBlock { n: size, c, dofs, start, ents: out, cplx }
}

/// Negated complex coefficients grouped like `dofs`.
fn complex_entries(e: &MatExpr, kept: &[Option<usize>], dofs: &[usize]) -> (Vec<usize>, Vec<(u32, u32, C64)>) {
    let mut ents: Vec<(usize, u32, u32, C64)> =
        e.terms.iter().filter_map(|t| kept[t.dof as usize].map(|k| (k, t.r, t.c, -t.v))).collect();
    ents.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let mut merged: Vec<(usize, u32, u32, C64)> = Vec::with_capacity(ents.len());
    for e in ents {
        match merged.last_mut() {
            Some(l) if (l.0, l.1, l.2) == (e.0, e.1, e.2) => l.3 += e.3,
            _ => merged.push(e),
        }
    }
    let mut start = vec![0];
    let mut out = Vec::with_capacity(merged.len());
    let mut it = merged.into_iter().filter(|e| e.3 != C64::new(0.0, 0.0)).peekable();
    for &d in dofs {
        while let Some(e) = it.next_if(|e| e.0 <= d) {
            if e.0 == d {
                out.push((e.1, e.2, e.3));
            }
        }
        start.push(out.len());
    }
    (start, out)
}

/// Indices of a maximal linearly independent subset of `rows`.
pub(crate) fn independent_rows(rows: &[Vec<(usize, f64)>], m: usize) -> Vec<usize> {
    if rows.is_empty() {
        return vec![];
    }
    let et = Mat::<f64>::from_fn(m, rows.len(), |_, _| 0.0);
    let mut et = et;
    for (k, r) in rows.iter().enumerate() {
        for &(i, a) in r {
            et[(i, k)] += a;
        }
    }
    let qr = et.col_piv_qr();
    let r = qr.R();
    let size = r.nrows().min(r.ncols());
    let maxd = (0..size).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..size).take_while(|&i| r[(i, i)].abs() > 1e-10 * maxd.max(1e-300)).count();
    let (fwd, _) = qr.P().arrays();
    let mut keep: Vec<usize> = fwd[..rank].to_vec();
    keep.sort_unstable();
    keep
}

impl Embedded {
    pub fn build(p: &ConicProblem) -> Result<Embedded> {
        let complex = !p.is_conjugation_invariant();
        let mut kept = Vec::with_capacity(p.num_dofs());
        let mut m = 0;
        for k in &p.dof_kinds {
            if complex || *k == DofKind::Real {
                kept.push(Some(m));
                m += 1;
            } else {
                kept.push(None);
            }
        }
        let mut b = vec![0.0; m];
        let sign = if p.sense == Sense::Max { 1.0 } else { -1.0 };
        for &(d, v) in &p.objective.coefs {
            if let Some(k) = kept[d as usize] {
                b[k] += sign * v;
            }
        }
        let blocks: Vec<LmiBlock> = p.psd.iter().map(|(_, e)| build_block(e, complex, &kept)).collect();
        let mut rows = Vec::new();
        let mut f = Vec::new();
        let mut rhs_scale: f64 = 0.0;
        for (row, rhs) in p.equality_rows() {
            let r: Vec<(usize, f64)> =
                row.iter().filter_map(|&(d, a)| kept[d as usize].map(|k| (k, a))).filter(|e| e.1 != 0.0).collect();
            if r.is_empty() {
                if rhs.abs() > 1e-12 {
                    return Err(BqtError::InvalidParam("constant equality constraint is violated".into()));
                }
                continue;
            }
            rhs_scale = rhs_scale.max(rhs.abs());
            rows.push(r);
            f.push(rhs);
        }
        let keep = independent_rows(&rows, m);
        let e_rows = keep.iter().map(|&k| rows[k].clone()).collect();
        let f = keep.iter().map(|&k| f[k]).collect();
        Ok(Embedded {
            lmi: Lmi { m, b, blocks, e_rows, f },
            kept,
            complex,
            block_dims: p.psd.iter().map(|(_, e)| e.dims().to_vec()).collect(),
            rhs_scale,
        })
    }

    pub fn model_dofs(&self, y: &[f64], n: usize) -> Vec<f64> {
        (0..n).map(|d| self.kept[d].map_or(0.0, |k| y[k])).collect()
    }

    /// Hermitian multipliers Y with Re Tr[H Y] = <embed(H), X>.
    pub fn duals(&self, p: &ConicProblem, xs: &[Mat<f64>]) -> Vec<(String, LabeledOperator)> {
        p.psd
            .iter()
            .zip(xs)
            .zip(&self.block_dims)
            .map(|(((name, _), x), dims)| {
                let n: usize = dims.iter().product();
                let op = if self.complex {
                    LabeledOperator::from_fn(dims, |i, j| {
                        C64::new(x[(i, j)] + x[(i + n, j + n)], x[(i + n, j)] - x[(i, j + n)])
                    })
                } else {
                    LabeledOperator::from_fn(dims, |i, j| C64::new(x[(i, j)], 0.0))
                };
                (name.clone(), op)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dependent_rows_are_dropped() {
        let rows = vec![
            vec![],
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 2.0), (1, 2.0)],
            vec![(2, 1.0)],
        ];
        let keep = independent_rows(&rows, 3);
        assert_eq!(keep.len(), 2);
        assert!(keep.contains(&3));
        assert!(keep.contains(&1) || keep.contains(&2));
    }

    #[test]
    fn embedding_is_real_symmetric() {
        let mut rng = crate::random::rng(3);
        let h = crate::random::density(&mut rng, &[3]);
        let e = embed_hermitian(&h);
        assert!(e.is_hermitian(0.0));
        assert!(e.data().iter().all(|v| v.im == 0.0));
        // spectrum doubles
        let a = h.eigenvalues().unwrap();
        let b = e.eigenvalues().unwrap();
        for (i, v) in a.iter().enumerate() {
            assert!((b[2 * i] - v).abs() < 1e-12 && (b[2 * i + 1] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_schur_matches_embedded() {
        use crate::sdp::model::ConicProblem;
        let mut rng = crate::random::rng(11);
        let mut p = ConicProblem::new();
        let x = p.hermitian("X", &[3], false).unwrap();
        let z = p.complex("Z", &[3]).unwrap();
        let k = crate::random::density(&mut rng, &[3]);
        let e = x.mul_right(&k).unwrap().add(&z).unwrap().herm_part();
        let kept: Vec<Option<usize>> = (0..p.num_dofs()).map(Some).collect();
        let blk = build_block(&e, true, &kept);
        let w = embed_hermitian(&crate::random::density(&mut rng, &[3]).add(&k).unwrap());
        let w = Mat::<f64>::from_fn(6, 6, |i, j| w.get(i, j).re);
        let m = p.num_dofs();
        let mut a = Mat::<f64>::zeros(m, m);
        let mut b = Mat::<f64>::zeros(m, m);
        blk.add_schur_dense(&w, &mut a);
        blk.add_schur_complex(&w, &mut b);
        let diff = (&a - &b).norm_max();
        assert!(diff < 1e-12 * a.norm_max().max(1.0), "{diff}");
        assert!(a.norm_max() > 0.1);
    }

    proptest! {
        #[test]
        fn embedding_round_trip(seed in 0u64..1000, n in 1usize..6) {
            let mut rng = crate::random::rng(seed);
            let g = LabeledOperator::new(crate::random::ginibre(&mut rng, n, n), vec![n]).unwrap();
            let h = g.add(&g.adjoint()).unwrap();
            let back = extract_hermitian(&embed_hermitian(&h), &[n]).unwrap();
            prop_assert!(back.max_abs_diff(&h) <= 1e-12);
        }
    }
}
