//! Conic problem description: variable blocks, equalities, PSD constraints
//! and a linear objective.

use super::expr::{DofKind, LinForm, MatExpr, Term};
use crate::error::{BqtError, Result};
use crate::qmat::{LabeledOperator, C64};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Hermitian matrix.
    Hermitian,
    /// General complex square matrix.
    Complex,
    /// Real scalar.
    Real,
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
    pub dims: Vec<usize>,
    pub first_dof: usize,
    pub ndof: usize,
    /// Leading columns carrying dofs; the rest are fixed at zero.
    pub cols: usize,
}

/// Linear objective over PSD-constrained Hermitian blocks with affine
/// equality constraints.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub(crate) dof_kinds: Vec<DofKind>,
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) objective: LinForm,
    pub(crate) sense: Sense,
    pub(crate) eqs: Vec<(String, MatExpr, bool)>,
    pub(crate) psd: Vec<(String, MatExpr)>,
}

/// Variable values keyed by name.
pub type Assignment = BTreeMap<String, LabeledOperator>;

fn term(dof: usize, r: usize, c: usize, v: C64) -> Term {
    Term { dof: dof as u32, r: r as u32, c: c as u32, v }
}

impl Default for ConicProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProblem {
    pub fn new() -> Self {
        ConicProblem {
            dof_kinds: vec![],
            vars: vec![],
            objective: LinForm::default(),
            sense: Sense::Min,
            eqs: vec![],
            psd: vec![],
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_kinds.len()
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    fn push_var(&mut self, name: &str, kind: VarKind, dims: &[usize], kinds: Vec<DofKind>) -> Result<usize> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(BqtError::InvalidParam(format!("variable {name} declared twice")));
        }
        let first = self.dof_kinds.len();
        let ndof = kinds.len();
        self.dof_kinds.extend(kinds);
        let cols = dims.iter().product();
        self.vars.push(VarInfo { name: name.to_string(), kind, dims: dims.to_vec(), first_dof: first, ndof, cols });
        Ok(first)
    }

    /// Hermitian block; `psd` also adds the constraint X ⪰ 0.
    pub fn hermitian(&mut self, name: &str, dims: &[usize], psd: bool) -> Result<MatExpr> {
        let n: usize = dims.iter().product();
        let mut kinds = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in i..n {
                kinds.push(DofKind::Real);
                if j > i {
                    kinds.push(DofKind::Imag);
                }
            }
        }
        let first = self.push_var(name, VarKind::Hermitian, dims, kinds)?;
        let one = C64::new(1.0, 0.0);
        let im = C64::new(0.0, 1.0);
        let mut terms = Vec::with_capacity(2 * n * n);
        let mut d = first;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    terms.push(term(d, i, i, one));
                    d += 1;
                } else {
                    terms.push(term(d, i, j, one));
                    terms.push(term(d, j, i, one));
                    terms.push(term(d + 1, i, j, im));
                    terms.push(term(d + 1, j, i, -im));
                    d += 2;
                }
            }
        }
        let e = MatExpr::from_terms(dims, terms).compress();
        if psd {
            self.psd.push((name.to_string(), e.clone()));
        }
        Ok(e)
    }

    /// General complex square block.
    pub fn complex(&mut self, name: &str, dims: &[usize]) -> Result<MatExpr> {
        self.complex_cols(name, dims, dims.iter().product())
    }

    /// Complex square block whose columns from `cols` on are zero.
    pub fn complex_cols(&mut self, name: &str, dims: &[usize], cols: usize) -> Result<MatExpr> {
        let n: usize = dims.iter().product();
        if cols > n {
            return Err(BqtError::DimMismatch(format!("{cols} columns in a block of size {n}")));
        }
        let kinds = (0..n * cols).flat_map(|_| [DofKind::Real, DofKind::Imag]).collect();
        let first = self.push_var(name, VarKind::Complex, dims, kinds)?;
        self.vars.last_mut().expect("just pushed").cols = cols;
        let mut terms = Vec::with_capacity(2 * n * cols);
        for i in 0..n {
            for j in 0..cols {
                let d = first + 2 * (i * cols + j);
                terms.push(term(d, i, j, C64::new(1.0, 0.0)));
                terms.push(term(d + 1, i, j, C64::new(0.0, 1.0)));
            }
        }
        Ok(MatExpr::from_terms(dims, terms))
    }

    /// Real scalar as a 1 x 1 expression; `nonneg` adds s ≥ 0.
    pub fn scalar(&mut self, name: &str, nonneg: bool) -> Result<MatExpr> {
        let first = self.push_var(name, VarKind::Real, &[1], vec![DofKind::Real])?;
        let e = MatExpr::from_terms(&[1], vec![term(first, 0, 0, C64::new(1.0, 0.0))]);
        if nonneg {
            self.psd.push((name.to_string(), e.clone()));
        }
        Ok(e)
    }

    /// Requires the Hermitian part of `expr` to be PSD.
    pub fn add_psd(&mut self, name: &str, expr: MatExpr) {
        self.psd.push((name.to_string(), expr.herm_part()));
    }

    /// `expr = 0` for an expression that is Hermitian (its Hermitian part is used).
    pub fn add_eq(&mut self, name: &str, expr: MatExpr) {
        self.eqs.push((name.to_string(), expr.herm_part(), true));
    }

    /// `expr = 0` entrywise for a general complex expression.
    pub fn add_eq_general(&mut self, name: &str, expr: MatExpr) {
        self.eqs.push((name.to_string(), expr, false));
    }

    pub fn set_objective(&mut self, sense: Sense, objective: LinForm) {
        self.sense = sense;
        self.objective = objective;
    }

    pub fn objective(&self) -> &LinForm {
        &self.objective
    }

    /// Largest real parameter count of a single Hermitian variable block.
    pub fn max_block_params(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Hermitian)
            .map(|v| {
                let n: usize = v.dims.iter().product();
                n * n
            })
            .max()
            .unwrap_or(0)
    }

    /// Rows `a . y = rhs` of the equality constraints.
    pub(crate) fn equality_rows(&self) -> Vec<(Vec<(u32, f64)>, f64)> {
        let mut rows = Vec::new();
        for (_, e, herm) in &self.eqs {
            let n = e.dim();
            let mut re: BTreeMap<(u32, u32), Vec<(u32, f64)>> = BTreeMap::new();
            let mut imm: BTreeMap<(u32, u32), Vec<(u32, f64)>> = BTreeMap::new();
            for t in &e.terms {
                if *herm && t.r > t.c {
                    continue;
                }
                re.entry((t.r, t.c)).or_default().push((t.dof, t.v.re));
                imm.entry((t.r, t.c)).or_default().push((t.dof, t.v.im));
            }
            let cst = e.constant_data();
            for i in 0..n {
                let j0 = if *herm { i } else { 0 };
                for j in j0..n {
                    let key = (i as u32, j as u32);
                    let c = cst[i * n + j];
                    let row = re.remove(&key).unwrap_or_default();
                    rows.push((row, -c.re));
                    if !*herm || j > i {
                        let row = imm.remove(&key).unwrap_or_default();
                        rows.push((row, -c.im));
                    }
                }
            }
        }
        rows.into_iter()
            .map(|(r, b)| {
                let f = LinForm { coefs: r, constant: 0.0 }.compressed();
                (f.coefs, b)
            })
            .filter(|(r, b)| !(r.is_empty() && b.abs() == 0.0))
            .collect()
    }

    /// Dof vector from named variable values.
    pub fn dofs_from(&self, point: &Assignment) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.num_dofs()];
        for v in &self.vars {
            let val = point
                .get(&v.name)
                .ok_or_else(|| BqtError::InvalidParam(format!("missing variable {}", v.name)))?;
            let n: usize = v.dims.iter().product();
            if val.dim() != n {
                return Err(BqtError::DimMismatch(format!("value for {}", v.name)));
            }
            let mut d = v.first_dof;
            match v.kind {
                VarKind::Real => y[d] = val.get(0, 0).re,
                VarKind::Complex => {
                    for i in 0..n {
                        for j in 0..v.cols {
                            y[d] = val.get(i, j).re;
                            y[d + 1] = val.get(i, j).im;
                            d += 2;
                        }
                    }
                }
                VarKind::Hermitian => {
                    for i in 0..n {
                        for j in i..n {
                            let x = (val.get(i, j) + val.get(j, i).conj()) * 0.5;
                            if i == j {
                                y[d] = x.re;
                                d += 1;
                            } else {
                                y[d] = x.re;
                                y[d + 1] = x.im;
                                d += 2;
                            }
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    /// Named variable values from a dof vector.
    pub fn values_from(&self, y: &[f64]) -> Assignment {
        let mut out = Assignment::new();
        for v in &self.vars {
            let n: usize = v.dims.iter().product();
            let mut m = LabeledOperator::zeros(&v.dims);
            let mut d = v.first_dof;
            match v.kind {
                VarKind::Real => m.set(0, 0, C64::new(y[d], 0.0)),
                VarKind::Complex => {
                    for i in 0..n {
                        for j in 0..v.cols {
                            m.set(i, j, C64::new(y[d], y[d + 1]));
                            d += 2;
                        }
                    }
                }
                VarKind::Hermitian => {
                    for i in 0..n {
                        for j in i..n {
                            if i == j {
                                m.set(i, i, C64::new(y[d], 0.0));
                                d += 1;
                            } else {
                                m.set(i, j, C64::new(y[d], y[d + 1]));
                                m.set(j, i, C64::new(y[d], -y[d + 1]));
                                d += 2;
                            }
                        }
                    }
                }
            }
            out.insert(v.name.clone(), m);
        }
        out
    }

    /// Largest equality violation and smallest eigenvalue over the PSD
    /// constraints at a dof vector.
    pub fn residuals(&self, y: &[f64]) -> Result<(f64, f64)> {
        let mut eq: f64 = 0.0;
        for (_, e, _) in &self.eqs {
            let v = e.eval(y);
            eq = eq.max(v.data().iter().map(|a| a.norm()).fold(0.0, f64::max));
        }
        let mut min_eig = f64::INFINITY;
        for (_, e) in &self.psd {
            min_eig = min_eig.min(e.eval(y).min_eigenvalue()?);
        }
        Ok((eq, min_eig))
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.eval(y)
    }

    /// True if every block is invariant under complex conjugation, so that a
    /// real optimal point exists.
    pub(crate) fn is_conjugation_invariant(&self) -> bool {
        let tol = 0.0;
        let term_ok = |t: &Term| match self.dof_kinds[t.dof as usize] {
            DofKind::Real => t.v.im.abs() <= tol,
            DofKind::Imag => t.v.re.abs() <= tol,
        };
        let expr_ok = |e: &MatExpr| {
            e.constant_data().iter().all(|c| c.im.abs() <= tol) && e.terms.iter().all(term_ok)
        };
        self.eqs.iter().all(|(_, e, _)| expr_ok(e))
            && self.psd.iter().all(|(_, e)| expr_ok(e))
            && self
                .objective
                .coefs
                .iter()
                .all(|&(d, v)| self.dof_kinds[d as usize] == DofKind::Real || v == 0.0)
    }
}
