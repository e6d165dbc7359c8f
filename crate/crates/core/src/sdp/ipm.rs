//! Primal-dual interior-point method for real linear matrix inequalities.
//!
//! Solves
//!   (D)  max b'y  s.t.  S_k = C_k - Σ_i y_i A_ik ⪰ 0,  E y = f
//!   (P)  min Σ_k <C_k, X_k> + f'w  s.t.  Σ_k <A_ik, X_k> + (E'w)_i = b_i,  X_k ⪰ 0
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector step. The
//! Schur complement is dense and factored by Cholesky.

use crate::error::{BqtError, Result};
use crate::qmat::C64;
use faer::{Mat, Side};

/// One symmetric block with its constant and the sparse coefficient
/// matrices of the variables that touch it.
#[derive(Debug, Clone)]
pub(crate) struct LmiBlock {
    pub n: usize,
    pub c: Mat<f64>,
    /// Variables touching this block, ascending.
    pub dofs: Vec<usize>,
    /// CSR offsets into `ents` for each entry of `dofs`.
    pub start: Vec<usize>,
    /// Full (both triangles) entries `(p, q, a)`.
    pub ents: Vec<(u32, u32, f64)>,
    /// For a block embedding an n/2 x n/2 Hermitian one: offsets and complex
    /// entries of the same coefficient matrices before embedding.
    pub cplx: Option<(Vec<usize>, Vec<(u32, u32, C64)>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Lmi {
    pub m: usize,
    pub b: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    pub e_rows: Vec<Vec<(usize, f64)>>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Inaccurate,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub y: Vec<f64>,
    pub x: Vec<Mat<f64>>,
    pub w: Vec<f64>,
    /// <C, X> + f'w
    pub pobj: f64,
    pub iters: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iters: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub verbose: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn fro(m: &Mat<f64>) -> f64 {
    m.norm_l2()
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl LmiBlock {
    fn entries(&self, k: usize) -> &[(u32, u32, f64)] {
        &self.ents[self.start[k]..self.start[k + 1]]
    }

    /// Σ_i y_i A_i.
    fn apply_adj(&self, y: &[f64]) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.n, self.n);
        for (k, &i) in self.dofs.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for &(p, q, a) in self.entries(k) {
                out[(p as usize, q as usize)] += yi * a;
            }
        }
        out
    }

    /// Accumulates <A_i, X> into `out`.
    fn apply(&self, x: &Mat<f64>, out: &mut [f64]) {
        for (k, &i) in self.dofs.iter().enumerate() {
            let mut s = 0.0;
            for &(p, q, a) in self.entries(k) {
                s += a * x[(p as usize, q as usize)];
            }
            out[i] += s;
        }
    }

    fn max_a_norm(&self) -> f64 {
        (0..self.dofs.len())
            .map(|k| self.entries(k).iter().map(|e| e.2 * e.2).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Adds tr(A_i W A_j W) into the lower triangle of `m`.
    fn add_schur(&self, w: &Mat<f64>, m: &mut Mat<f64>) {
        let k = self.dofs.len();
        if k == 0 {
            return;
        }
        let n = self.n;
        let nnz = self.ents.len() as f64 / k as f64;
        // The dense path streams through contiguous columns; the pairwise one
        // gathers from W at random, so it is weighted up.
        let pair_cost = 8.0 * 0.5 * (k as f64) * nnz * nnz;
        let dense_cost = nnz * (n * n) as f64 + (k as f64) * nnz;
        if pair_cost > dense_cost && self.cplx.is_some() {
            self.add_schur_complex(w, m);
        } else if pair_cost <= dense_cost {
            for jj in 0..k {
                let ej = self.entries(jj);
                let j = self.dofs[jj];
                for ii in jj..k {
                    let ei = self.entries(ii);
                    let mut s = 0.0;
                    for &(p, q, a) in ei {
                        for &(r, t, b) in ej {
                            s += a * b * w[(q as usize, r as usize)] * w[(t as usize, p as usize)];
                        }
                    }
                    m[(self.dofs[ii], j)] += s;
                }
            }
        } else {
            self.add_schur_dense(w, m);
        }
    }

    pub(crate) fn add_schur_dense(&self, w: &Mat<f64>, m: &mut Mat<f64>) {
        let (k, n) = (self.dofs.len(), self.n);
        let mut g = Mat::<f64>::zeros(n, n);
        for jj in 0..k {
            let j = self.dofs[jj];
            g.fill(0.0);
            // G = W A_j W
            for &(r, t, b) in self.entries(jj) {
                let (r, t) = (r as usize, t as usize);
                let wr = w.col_as_slice(r);
                for col in 0..n {
                    let f = b * w[(t, col)];
                    if f == 0.0 {
                        continue;
                    }
                    for (gv, wv) in g.col_as_slice_mut(col).iter_mut().zip(wr) {
                        *gv += wv * f;
                    }
                }
            }
            for ii in jj..k {
                let mut s = 0.0;
                for &(p, q, a) in self.entries(ii) {
                    s += a * g[(q as usize, p as usize)];
                }
                m[(self.dofs[ii], j)] += s;
            }
        }
    }

    /// Dense path on the complex form: tr(A_i W A_j W) = 2 Re tr(H_i V H_j V)
    /// where W embeds V.
    pub(crate) fn add_schur_complex(&self, w: &Mat<f64>, m: &mut Mat<f64>) {
        let Some((cstart, cents)) = &self.cplx else {
            return self.add_schur_dense(w, m);
        };
        let h = self.n / 2;
        let vr = Mat::<f64>::from_fn(h, h, |i, j| 0.5 * (w[(i, j)] + w[(i + h, j + h)]));
        let vi = Mat::<f64>::from_fn(h, h, |i, j| 0.5 * (w[(i + h, j)] - w[(i, j + h)]));
        let mut gr = Mat::<f64>::zeros(h, h);
        let mut gi = Mat::<f64>::zeros(h, h);
        let k = self.dofs.len();
        for jj in 0..k {
            let j = self.dofs[jj];
            gr.fill(0.0);
            gi.fill(0.0);
            // G = V H_j V, one rank-one term per entry
            for &(r, c, v) in &cents[cstart[jj]..cstart[jj + 1]] {
                let (r, c) = (r as usize, c as usize);
                let (ar, ai) = (vr.col_as_slice(r), vi.col_as_slice(r));
                for col in 0..h {
                    let f = v * C64::new(vr[(c, col)], vi[(c, col)]);
                    for ((g, a), b) in gr.col_as_slice_mut(col).iter_mut().zip(ar).zip(ai) {
                        *g += a * f.re - b * f.im;
                    }
                    for ((g, a), b) in gi.col_as_slice_mut(col).iter_mut().zip(ar).zip(ai) {
                        *g += a * f.im + b * f.re;
                    }
                }
            }
            for ii in jj..k {
                let mut s = 0.0;
                for &(p, q, a) in &cents[cstart[ii]..cstart[ii + 1]] {
                    s += a.re * gr[(q as usize, p as usize)] - a.im * gi[(q as usize, p as usize)];
                }
                m[(self.dofs[ii], j)] += 2.0 * s;
            }
        }
    }
}

/// Scaling data for one block.
struct Nt {
    /// Cholesky factor of X.
    lx: Mat<f64>,
    /// Cholesky factor of S.
    ls: Mat<f64>,
    g: Mat<f64>,
    ginv: Mat<f64>,
    w: Mat<f64>,
    v: Vec<f64>,
}

fn chol_lower(a: &Mat<f64>) -> Option<Mat<f64>> {
    let l = a.llt(Side::Lower).ok()?;
    Some(l.L().to_owned())
}

fn lower_inverse(l: &Mat<f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut id = Mat::<f64>::identity(n, n);
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), id.as_mut(), faer::Par::Seq);
    id
}

fn stepped(x: &Mat<f64>, d: &Mat<f64>, a: f64) -> Mat<f64> {
    let mut r = x + d * faer::Scale(a);
    symmetrize(&mut r);
    r
}

fn nt_scaling(x: &Mat<f64>, s: &Mat<f64>) -> Option<Nt> {
    let lx = chol_lower(x)?;
    let ls = chol_lower(s)?;
    let mut t = lx.transpose() * s * &lx;
    symmetrize(&mut t);
    let evd = t.self_adjoint_eigen(Side::Lower).ok()?;
    let lam: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    if lam.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let d: Vec<f64> = lam.iter().map(|l| l.sqrt()).collect();
    let q = evd.U().to_owned();
    let n = x.nrows();
    let mut qd = q.clone();
    let mut qdi = q.clone();
    for j in 0..n {
        let a = 1.0 / d[j].sqrt();
        let b = d[j].sqrt();
        for i in 0..n {
            qd[(i, j)] *= a;
            qdi[(i, j)] *= b;
        }
    }
    let g = &lx * &qd;
    // G^{-1} = D^{1/2} Q' L^{-1}
    let linv = lower_inverse(&lx);
    let ginv = qdi.transpose() * &linv;
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Nt { lx, ls, g, ginv, w, v: d })
}

/// Largest step in [0, inf) keeping L (I + a L^{-1} D L^{-T}) L' ⪰ 0.
fn max_step(l: &Mat<f64>, d: &Mat<f64>) -> f64 {
    let linv = lower_inverse(l);
    let mut t = &linv * d * linv.transpose();
    symmetrize(&mut t);
    let ev = match t.self_adjoint_eigenvalues(Side::Lower) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

struct Schur {
    /// Lower triangle of the unregularized matrix.
    m: Mat<f64>,
    e_t: Mat<f64>,
    lm: Mat<f64>,
    u: Mat<f64>,
    lk: Option<Mat<f64>>,
}

impl Schur {
    fn factor(mut m: Mat<f64>, e_t: &Mat<f64>) -> Result<Schur> {
        let n = m.nrows();
        let maxd = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut shift = 0.0;
        let lm = loop {
            if let Some(l) = chol_lower(&m) {
                break l;
            }
            let add = if shift == 0.0 { 1e-13 * maxd } else { shift * 9.0 };
            for i in 0..n {
                m[(i, i)] += add;
            }
            shift += add;
            if shift > 1e-3 * maxd {
                return Err(BqtError::Numerical("Schur complement is not positive definite".into()));
            }
        };
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let mut u = e_t.clone();
        let lk = if u.ncols() > 0 {
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(lm.as_ref(), u.as_mut(), faer::Par::Seq);
            let mut k = u.transpose() * &u;
            symmetrize(&mut k);
            let p = k.nrows();
            let kd = (0..p).map(|i| k[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
            let mut add = 0.0;
            loop {
                if let Some(l) = chol_lower(&k) {
                    break Some(l);
                }
                let a = if add == 0.0 { 1e-14 * kd } else { add * 9.0 };
                for i in 0..p {
                    k[(i, i)] += a;
                }
                add += a;
                if add > 1e-4 * kd {
                    return Err(BqtError::Numerical("equality system is singular".into()));
                }
            }
        } else {
            None
        };
        Ok(Schur { m, e_t: e_t.clone(), lm, u, lk })
    }

    /// Solves M dy + E' dw = h, E dy = re, refining against the unshifted M.
    fn solve(&self, h: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dy, mut dw) = self.solve_factored(h, re);
        let scale = norm(h).max(norm(re)).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..3 {
            let y = Mat::<f64>::from_fn(dy.len(), 1, |i, _| dy[i]);
            let my = &self.m * &y + self.m.transpose() * &y;
            let w = Mat::<f64>::from_fn(dw.len(), 1, |i, _| dw[i]);
            let ew = if dw.is_empty() { Mat::<f64>::zeros(dy.len(), 1) } else { &self.e_t * &w };
            let rh: Vec<f64> = (0..dy.len()).map(|i| h[i] - (my[(i, 0)] - self.m[(i, i)] * dy[i]) - ew[(i, 0)]).collect();
            let ey = self.e_t.transpose() * &y;
            let rr: Vec<f64> = (0..re.len()).map(|i| re[i] - ey[(i, 0)]).collect();
            let res = norm(&rh).max(norm(&rr));
            if res <= 1e-15 * scale || res >= 0.5 * last {
                break;
            }
            last = res;
            let (cy, cw) = self.solve_factored(&rh, &rr);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
            dw.iter_mut().zip(&cw).for_each(|(a, b)| *a += b);
        }
        (dy, dw)
    }

    fn solve_factored(&self, h: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = h.len();
        let mut r1 = Mat::<f64>::from_fn(m, 1, |i, _| h[i]);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(self.lm.as_ref(), r1.as_mut(), faer::Par::Seq);
        let mut dw = vec![];
        if let Some(lk) = &self.lk {
            let mut rhs = self.u.transpose() * &r1;
            for (i, v) in re.iter().enumerate() {
                rhs[(i, 0)] -= v;
            }
            let llt_solve = |mut x: Mat<f64>| {
                faer::linalg::triangular_solve::solve_lower_triangular_in_place(lk.as_ref(), x.as_mut(), faer::Par::Seq);
                faer::linalg::triangular_solve::solve_upper_triangular_in_place(lk.transpose(), x.as_mut(), faer::Par::Seq);
                x
            };
            let sol = llt_solve(rhs);
            r1 -= &self.u * &sol;
            dw = (0..sol.nrows()).map(|i| sol[(i, 0)]).collect();
        }
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(self.lm.transpose(), r1.as_mut(), faer::Par::Seq);
        ((0..m).map(|i| r1[(i, 0)]).collect(), dw)
    }
}

/// Merit, y, X, w and primal objective of the best iterate so far.
type Best = (f64, Vec<f64>, Vec<Mat<f64>>, Vec<f64>, f64);

struct Direction {
    dx: Vec<Mat<f64>>,
    ds: Vec<Mat<f64>>,
    dy: Vec<f64>,
    dw: Vec<f64>,
}

impl Lmi {
    fn a_of(&self, xs: &[Mat<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (blk, x) in self.blocks.iter().zip(xs) {
            blk.apply(x, &mut out);
        }
        out
    }

    fn e_of(&self, y: &[f64]) -> Vec<f64> {
        self.e_rows.iter().map(|r| r.iter().map(|&(i, a)| a * y[i]).sum()).collect()
    }

    fn et_of(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (r, &wk) in self.e_rows.iter().zip(w) {
            for &(i, a) in r {
                out[i] += a * wk;
            }
        }
        out
    }

    fn e_transpose_mat(&self) -> Mat<f64> {
        let mut e = Mat::<f64>::zeros(self.m, self.e_rows.len());
        for (k, r) in self.e_rows.iter().enumerate() {
            for &(i, a) in r {
                e[(i, k)] += a;
            }
        }
        e
    }

    fn direction(
        &self,
        schur: &Schur,
        nts: &[Nt],
        rp: &[f64],
        rd: &[Mat<f64>],
        re: &[f64],
        rc: &[Mat<f64>],
    ) -> Direction {
        let tmp: Vec<Mat<f64>> = nts
            .iter()
            .zip(rc)
            .zip(rd)
            .map(|((nt, rc), rd)| rc - &nt.w * rd * &nt.w)
            .collect();
        let at = self.a_of(&tmp);
        let h: Vec<f64> = rp.iter().zip(&at).map(|(a, b)| a - b).collect();
        let (dy, dw) = schur.solve(&h, re);
        let mut ds = Vec::with_capacity(self.blocks.len());
        let mut dx = Vec::with_capacity(self.blocks.len());
        for (k, blk) in self.blocks.iter().enumerate() {
            let mut s = &rd[k] - blk.apply_adj(&dy);
            symmetrize(&mut s);
            let mut x = &rc[k] - &nts[k].w * &s * &nts[k].w;
            symmetrize(&mut x);
            ds.push(s);
            dx.push(x);
        }
        Direction { dx, ds, dy, dw }
    }

    pub fn solve(&self, set: &IpmSettings) -> Result<IpmResult> {
        let nb = self.blocks.len();
        let nbar: usize = self.blocks.iter().map(|b| b.n).sum();
        let nbar = nbar.max(1) as f64;
        let b_norm = norm(&self.b);
        let c_norm = self.blocks.iter().map(|b| fro(&b.c).powi(2)).sum::<f64>().sqrt();
        let f_norm = norm(&self.f);

        // starting point
        let mut xs = Vec::with_capacity(nb);
        let mut ss = Vec::with_capacity(nb);
        for blk in &self.blocks {
            let n = blk.n as f64;
            let mut ratio: f64 = 0.0;
            for k in 0..blk.dofs.len() {
                let an = blk.entries(k).iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                ratio = ratio.max((1.0 + self.b[blk.dofs[k]].abs()) / (1.0 + an));
            }
            let xi = 10f64.max(n.sqrt()).max(n * ratio);
            let eta = 10f64.max(n.sqrt()).max(fro(&blk.c)).max(blk.max_a_norm());
            xs.push(Mat::<f64>::identity(blk.n, blk.n) * faer::Scale(xi));
            ss.push(Mat::<f64>::identity(blk.n, blk.n) * faer::Scale(eta));
        }
        let mut y = vec![0.0; self.m];
        let mut w = vec![0.0; self.e_rows.len()];
        let e_t = self.e_transpose_mat();

        let mut status = IpmStatus::Inaccurate;
        let mut iters = 0;
        let mut pobj = 0.0;
        let mut best: Option<Best> = None;
        let mut small_steps = 0;

        for it in 0..set.max_iters {
            iters = it;
            // residuals
            let ax = self.a_of(&xs);
            let etw = self.et_of(&w);
            let rp: Vec<f64> = (0..self.m).map(|i| self.b[i] - ax[i] - etw[i]).collect();
            let rd: Vec<Mat<f64>> = self
                .blocks
                .iter()
                .enumerate()
                .map(|(k, blk)| {
                    let mut r = &blk.c - &ss[k] - blk.apply_adj(&y);
                    symmetrize(&mut r);
                    r
                })
                .collect();
            let ey = self.e_of(&y);
            let re: Vec<f64> = self.f.iter().zip(&ey).map(|(a, b)| a - b).collect();
            let gap_xs: f64 = xs.iter().zip(&ss).map(|(x, s)| inner(x, s)).sum();
            let mu = gap_xs / nbar;
            pobj = self.blocks.iter().zip(&xs).map(|(b, x)| inner(&b.c, x)).sum::<f64>() + dot(&self.f, &w);
            let dobj = dot(&self.b, &y);
            let rel_p = norm(&rp) / (1.0 + b_norm);
            let rd_norm = (rd.iter().map(|r| fro(r).powi(2)).sum::<f64>() + dot(&re, &re)).sqrt();
            let rel_d = rd_norm / (1.0 + c_norm + f_norm);
            let gap = pobj - dobj;
            let scale = 1f64.max(pobj.abs().min(dobj.abs()));
            if set.verbose {
                eprintln!(
                    "it {it:3} pobj {pobj:+.10e} dobj {dobj:+.10e} gap {gap:.2e} xs {gap_xs:.2e} pinf {rel_p:.2e} dinf {rel_d:.2e}"
                );
            }
            let merit = rel_p.max(rel_d).max(gap.abs() / scale);
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, y.clone(), xs.clone(), w.clone(), pobj));
            }
            if rel_p <= set.feas_tol
                && rel_d <= set.feas_tol
                && gap.abs() <= set.gap_tol * scale
                && gap_xs <= set.gap_tol * scale
            {
                status = IpmStatus::Optimal;
                break;
            }
            // infeasibility certificates
            let ynorm = norm(&y);
            if rel_d <= set.feas_tol && dobj > 1e8 * (1.0 + c_norm) && ynorm > 0.0 {
                status = IpmStatus::DualInfeasible;
                break;
            }
            let xnorm: f64 = xs.iter().map(|x| fro(x)).sum();
            if rel_p <= set.feas_tol && pobj < -1e8 * (1.0 + b_norm) && xnorm > 0.0 {
                status = IpmStatus::PrimalInfeasible;
                break;
            }

            let mut nts = Vec::with_capacity(nb);
            for k in 0..nb {
                match nt_scaling(&xs[k], &ss[k]) {
                    Some(nt) => nts.push(nt),
                    None => {
                        return self.finish(best, IpmStatus::Inaccurate, iters);
                    }
                }
            }
            let mut mmat = Mat::<f64>::zeros(self.m, self.m);
            for (blk, nt) in self.blocks.iter().zip(&nts) {
                blk.add_schur(&nt.w, &mut mmat);
            }
            let schur = match Schur::factor(mmat, &e_t) {
                Ok(s) => s,
                Err(_) => return self.finish(best, IpmStatus::Inaccurate, iters),
            };

            // predictor
            let rc_aff: Vec<Mat<f64>> = xs.iter().map(|x| -x).collect();
            let aff = self.direction(&schur, &nts, &rp, &rd, &re, &rc_aff);
            let mut ap: f64 = 1.0;
            let mut ad: f64 = 1.0;
            for k in 0..nb {
                ap = ap.min(max_step(&nts[k].lx, &aff.dx[k]));
                ad = ad.min(max_step(&nts[k].ls, &aff.ds[k]));
            }
            let gap_aff: f64 = (0..nb)
                .map(|k| inner(&(&xs[k] + &aff.dx[k] * faer::Scale(ap)), &(&ss[k] + &aff.ds[k] * faer::Scale(ad))))
                .sum();
            let sigma = (gap_aff / gap_xs).clamp(0.0, 1.0).powi(3);

            // corrector
            let mut rc = Vec::with_capacity(nb);
            for k in 0..nb {
                let nt = &nts[k];
                let dxt = &nt.ginv * &aff.dx[k] * nt.ginv.transpose();
                let dst = nt.g.transpose() * &aff.ds[k] * &nt.g;
                let prod = &dxt * &dst;
                let n = nt.v.len();
                let mut yk = Mat::<f64>::zeros(n, n);
                for j in 0..n {
                    for i in 0..n {
                        let mut r = -0.5 * (prod[(i, j)] + prod[(j, i)]);
                        if i == j {
                            r += sigma * mu - nt.v[i] * nt.v[i];
                        }
                        yk[(i, j)] = 2.0 * r / (nt.v[i] + nt.v[j]);
                    }
                }
                let mut r = &nt.g * &yk * nt.g.transpose();
                symmetrize(&mut r);
                rc.push(r);
            }
            let dir = self.direction(&schur, &nts, &rp, &rd, &re, &rc);
            let mut ap: f64 = f64::INFINITY;
            let mut ad: f64 = f64::INFINITY;
            for k in 0..nb {
                ap = ap.min(max_step(&nts[k].lx, &dir.dx[k]));
                ad = ad.min(max_step(&nts[k].ls, &dir.ds[k]));
            }
            let tau = 0.98;
            let mut ap = (tau * ap).min(1.0);
            let mut ad = (tau * ad).min(1.0);
            // Rounding can leave the stepped iterate just outside the cone.
            let mut nx: Vec<Mat<f64>> = Vec::new();
            let mut ns: Vec<Mat<f64>> = Vec::new();
            for _ in 0..30 {
                nx = (0..nb).map(|k| stepped(&xs[k], &dir.dx[k], ap)).collect();
                if nx.iter().all(|x| chol_lower(x).is_some()) {
                    break;
                }
                ap *= 0.8;
            }
            for _ in 0..30 {
                ns = (0..nb).map(|k| stepped(&ss[k], &dir.ds[k], ad)).collect();
                if ns.iter().all(|s| chol_lower(s).is_some()) {
                    break;
                }
                ad *= 0.8;
            }
            if ap < 1e-9 && ad < 1e-9 {
                small_steps += 1;
                if small_steps > 3 {
                    break;
                }
            } else {
                small_steps = 0;
            }
            xs = nx;
            ss = ns;
            for (a, d) in w.iter_mut().zip(&dir.dw) {
                *a += ap * d;
            }
            for (a, d) in y.iter_mut().zip(&dir.dy) {
                *a += ad * d;
            }
        }
        if status == IpmStatus::Optimal || status == IpmStatus::DualInfeasible || status == IpmStatus::PrimalInfeasible {
            return Ok(IpmResult { status, y, x: xs, w, pobj, iters });
        }
        self.finish(best, IpmStatus::Inaccurate, iters)
    }

    fn finish(&self, best: Option<Best>, status: IpmStatus, iters: usize) -> Result<IpmResult> {
        let (_, y, x, w, pobj) =
            best.ok_or_else(|| BqtError::Numerical("solver failed before the first iterate".into()))?;
        Ok(IpmResult { status, y, x, w, pobj, iters })
    }
}
