//! Linear programs `opt c'x  s.t.  A x ≤ b`, with optional sign
//! constraints on the variables.
//!
//! For a maximization the dual is `min b'y  s.t.  y ≥ 0, (A'y)_j ≥ c_j` on
//! nonnegative variables and `= c_j` on free ones.

use super::embed::independent_rows;
use super::ipm::{Lmi, LmiBlock};
use super::model::Sense;
use super::{map_status, settings, ConicSolution, Residuals, SolverOptions, Status};
use crate::error::{BqtError, Result};
use faer::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub sense: Sense,
    pub nonneg: Vec<bool>,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>, sense: Sense, nonneg: Vec<bool>) -> Result<Self> {
        let p = LpProblem { c, a, b, sense, nonneg };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.nonneg.len() != n || self.a.len() != self.b.len() || self.a.iter().any(|r| r.len() != n) {
            return Err(BqtError::DimMismatch("LP data has inconsistent sizes".into()));
        }
        Ok(())
    }

    fn sign(&self) -> f64 {
        match self.sense {
            Sense::Max => 1.0,
            Sense::Min => -1.0,
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Value of the dual objective at `y`.
    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        self.sign() * self.b.iter().zip(y).map(|(b, y)| b * y).sum::<f64>()
    }

    /// Largest violation of `Ax ≤ b` and of the sign constraints.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (row, b) in self.a.iter().zip(&self.b) {
            let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
            v = v.max(ax - b);
        }
        for (x, nn) in x.iter().zip(&self.nonneg) {
            if *nn {
                v = v.max(-x);
            }
        }
        v
    }

    pub fn dual_violation(&self, y: &[f64]) -> f64 {
        let s = self.sign();
        let mut v: f64 = y.iter().fold(0.0, |m, &y| m.max(-y));
        for j in 0..self.c.len() {
            let aty: f64 = self.a.iter().zip(y).map(|(r, y)| r[j] * y).sum();
            let slack = aty - s * self.c[j];
            v = v.max(if self.nonneg[j] { -slack } else { slack.abs() });
        }
        v
    }
}

pub fn check_lp_feasible(p: &LpProblem, x: &[f64], tol: f64) -> Result<bool> {
    p.validate()?;
    if x.len() != p.num_vars() {
        return Err(BqtError::DimMismatch(format!("point has {} entries for {} variables", x.len(), p.num_vars())));
    }
    Ok(p.primal_violation(x) <= tol)
}

pub fn check_lp_dual_feasible(p: &LpProblem, y: &[f64], tol: f64) -> Result<bool> {
    p.validate()?;
    if y.len() != p.a.len() {
        return Err(BqtError::DimMismatch(format!("dual point has {} entries for {} rows", y.len(), p.a.len())));
    }
    Ok(p.dual_violation(y) <= tol)
}

/// Pairs of rows `(a, b)` and `(-a, -b)`, which together form an equality.
fn opposite_pairs(p: &LpProblem) -> Vec<Option<usize>> {
    let mut partner = vec![None; p.a.len()];
    for i in 0..p.a.len() {
        if partner[i].is_some() {
            continue;
        }
        for k in i + 1..p.a.len() {
            if partner[k].is_none()
                && p.b[k] == -p.b[i]
                && p.a[k].iter().zip(&p.a[i]).all(|(x, y)| *x == -*y)
                && p.a[i].iter().any(|v| *v != 0.0)
            {
                partner[i] = Some(k);
                partner[k] = Some(i);
                break;
            }
        }
    }
    partner
}

fn scalar_block(cst: f64, coefs: Vec<(usize, f64)>) -> LmiBlock {
    let dofs: Vec<usize> = coefs.iter().map(|e| e.0).collect();
    let start = (0..=coefs.len()).collect();
    let ents = coefs.iter().map(|e| (0, 0, e.1)).collect();
    LmiBlock { n: 1, c: Mat::from_fn(1, 1, |_, _| cst), dofs, start, ents, cplx: None }
}

/// Solves the LP together with its dual and checks weak duality.
pub fn solve_lp(p: &LpProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    p.validate()?;
    opts.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let n = p.num_vars();
    let s = p.sign();
    let partner = opposite_pairs(p);

    let mut blocks = Vec::new();
    let mut block_row = Vec::new();
    let mut eq_rows = Vec::new();
    let mut eq_src = Vec::new();
    let mut f = Vec::new();
    for (i, row) in p.a.iter().enumerate() {
        let coefs: Vec<(usize, f64)> = row.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &a)| (j, a)).collect();
        match partner[i] {
            Some(k) if k > i => {
                eq_rows.push(coefs);
                eq_src.push(i);
                f.push(p.b[i]);
            }
            Some(_) => {}
            None => {
                if coefs.is_empty() {
                    if p.b[i] < 0.0 {
                        return Ok(trivial(p, Status::Infeasible, vec![0.0; n]));
                    }
                    continue;
                }
                blocks.push(scalar_block(p.b[i], coefs));
                block_row.push(i);
            }
        }
    }
    for j in 0..n {
        if p.nonneg[j] {
            blocks.push(scalar_block(0.0, vec![(j, -1.0)]));
        }
    }
    if n == 0 {
        return Ok(trivial(p, Status::Optimal, vec![]));
    }
    if blocks.is_empty() && eq_rows.is_empty() {
        let status = if p.c.iter().all(|c| *c == 0.0) { Status::Optimal } else { Status::Unbounded };
        return Ok(trivial(p, status, vec![0.0; n]));
    }
    let keep = independent_rows(&eq_rows, n);
    let lmi = Lmi {
        m: n,
        b: p.c.iter().map(|c| s * c).collect(),
        blocks,
        e_rows: keep.iter().map(|&k| eq_rows[k].clone()).collect(),
        f: keep.iter().map(|&k| f[k]).collect(),
    };
    let res = lmi.solve(&settings(opts))?;
    let x = res.y.clone();
    let mut y = vec![0.0; p.a.len()];
    for (k, &i) in block_row.iter().enumerate() {
        y[i] = res.x[k][(0, 0)];
    }
    for (pos, &k) in keep.iter().enumerate() {
        let i = eq_src[k];
        let w = res.w[pos];
        let j = partner[i].expect("paired row");
        y[i] = w.max(0.0);
        y[j] = (-w).max(0.0);
    }
    let primal_value = p.objective(&x);
    let dual_value = p.dual_objective(&y);
    let pv = p.primal_violation(&x);
    let dv = p.dual_violation(&y);
    let mut status = map_status(res.status);
    let scale = 1f64.max(primal_value.abs());
    let tol = 10.0 * opts.feas_tol * (1.0 + p.b.iter().fold(0.0f64, |m, b| m.max(b.abs())));
    // weak duality: the dual bounds the primal from the optimizing side
    let weak = s * (dual_value - primal_value) >= -opts.gap_tol * scale;
    if status == Status::Optimal
        && (pv > tol || dv > tol * (1.0 + p.c.iter().fold(0.0f64, |m, c| m.max(c.abs()))) || !weak
            || (dual_value - primal_value).abs() > opts.gap_tol * scale)
    {
        status = Status::Inaccurate;
    }
    Ok(ConicSolution {
        status,
        primal_value,
        dual_value,
        blocks: Default::default(),
        duals: vec![],
        residuals: Residuals { max_eq: pv.max(0.0), min_eig: -pv.max(0.0) },
        iterations: res.iters,
        x,
        y,
    })
}

fn trivial(p: &LpProblem, status: Status, x: Vec<f64>) -> ConicSolution {
    let v = p.objective(&x);
    ConicSolution {
        status,
        primal_value: v,
        dual_value: v,
        blocks: Default::default(),
        duals: vec![],
        residuals: Residuals { max_eq: 0.0, min_eig: 0.0 },
        iterations: 0,
        x,
        y: vec![0.0; p.a.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_max_problem() {
        // max x + y  s.t.  x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  ->  x = 8/5, y = 6/5
        let p = LpProblem::new(
            vec![1.0, 1.0],
            vec![vec![1.0, 2.0], vec![3.0, 1.0]],
            vec![4.0, 6.0],
            Sense::Max,
            vec![true, true],
        )
        .unwrap();
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.primal_value - 2.8).abs() < 1e-7);
        assert!((s.x[0] - 1.6).abs() < 1e-6 && (s.x[1] - 1.2).abs() < 1e-6);
        assert!((s.y[0] - 0.4).abs() < 1e-6 && (s.y[1] - 0.2).abs() < 1e-6);
        assert!(check_lp_dual_feasible(&p, &s.y, 1e-7).unwrap());
    }

    #[test]
    fn equality_pairs_and_min_sense() {
        // min x - y  s.t.  x + y = 1, x, y ≥ 0  ->  -1
        let p = LpProblem::new(
            vec![1.0, -1.0],
            vec![vec![1.0, 1.0], vec![-1.0, -1.0]],
            vec![1.0, -1.0],
            Sense::Min,
            vec![true, true],
        )
        .unwrap();
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.primal_value + 1.0).abs() < 1e-7);
        assert!((s.dual_value + 1.0).abs() < 1e-7);
        assert!(check_lp_dual_feasible(&p, &s.y, 1e-7).unwrap());
    }

    #[test]
    fn empty_constraint_matrix() {
        let p = LpProblem::new(vec![0.0, 0.0], vec![], vec![], Sense::Max, vec![true, true]).unwrap();
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.primal_value, 0.0);
        let p = LpProblem::new(vec![], vec![], vec![], Sense::Max, vec![]).unwrap();
        assert_eq!(solve_lp(&p, &SolverOptions::default()).unwrap().primal_value, 0.0);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = LpProblem::new(vec![1.0], vec![vec![1.0]], vec![-1.0], Sense::Max, vec![true]).unwrap();
        assert_eq!(solve_lp(&p, &SolverOptions::default()).unwrap().status, Status::Infeasible);
        let p = LpProblem::new(vec![1.0], vec![vec![-1.0]], vec![0.0], Sense::Max, vec![true]).unwrap();
        assert_eq!(solve_lp(&p, &SolverOptions::default()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(LpProblem::new(vec![1.0], vec![vec![1.0, 2.0]], vec![1.0], Sense::Max, vec![true]).is_err());
        let p = LpProblem::new(vec![1.0], vec![vec![1.0]], vec![1.0], Sense::Max, vec![true]).unwrap();
        assert!(check_lp_feasible(&p, &[1.0, 2.0], 1e-9).is_err());
    }
}
