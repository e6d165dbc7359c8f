//! Conic optimization layer: Hermitian-PSD programs and linear programs,
//! solved by a primal-dual interior-point method on a real symmetric
//! embedding.

mod embed;
mod expr;
mod ipm;
mod lp;
mod model;

pub use embed::{embed_hermitian, extract_hermitian};
pub use expr::{DofKind, LinForm, MatExpr};
pub use lp::{check_lp_feasible, check_lp_dual_feasible, solve_lp, LpProblem};
pub use model::{Assignment, ConicProblem, Sense, VarInfo, VarKind};

use crate::error::{BqtError, Result};
use crate::qmat::LabeledOperator;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub verbosity: u8,
    /// Largest accepted real parameter count of one Hermitian variable.
    pub ambient_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iters: 100, feas_tol: 1e-8, gap_tol: 1e-7, verbosity: 0, ambient_cap: 4096 }
    }
}

impl SolverOptions {
    /// Reads options from a JSON file; missing keys keep their defaults.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BqtError::Parse(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BqtError::Parse(format!("{}: {e}", path.display())))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.feas_tol > 0.0) || !(self.gap_tol > 0.0) {
            return Err(BqtError::InvalidParam("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    Inaccurate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest equality violation.
    pub max_eq: f64,
    /// Smallest eigenvalue over the PSD constraints.
    pub min_eig: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: Status,
    /// Objective at the returned point.
    pub primal_value: f64,
    /// Bound from the dual certificate.
    pub dual_value: f64,
    /// Variable values by name.
    pub blocks: Assignment,
    /// Dual multiplier of each PSD constraint, by constraint name.
    pub duals: Vec<(String, LabeledOperator)>,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Primal point of an LP (empty for SDPs).
    pub x: Vec<f64>,
    /// Dual point of an LP (empty for SDPs).
    pub y: Vec<f64>,
}

impl ConicSolution {
    pub fn gap(&self) -> f64 {
        (self.primal_value - self.dual_value).abs()
    }

    pub fn block(&self, name: &str) -> Result<&LabeledOperator> {
        self.blocks.get(name).ok_or_else(|| BqtError::InvalidParam(format!("no block named {name}")))
    }

    pub fn dual(&self, name: &str) -> Result<&LabeledOperator> {
        self.duals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| BqtError::InvalidParam(format!("no constraint named {name}")))
    }
}

pub(crate) fn map_status(s: ipm::IpmStatus) -> Status {
    match s {
        ipm::IpmStatus::Optimal => Status::Optimal,
        ipm::IpmStatus::PrimalInfeasible => Status::Infeasible,
        ipm::IpmStatus::DualInfeasible => Status::Unbounded,
        ipm::IpmStatus::Inaccurate => Status::Inaccurate,
    }
}

pub(crate) fn settings(opts: &SolverOptions) -> ipm::IpmSettings {
    ipm::IpmSettings {
        max_iters: opts.max_iters,
        feas_tol: opts.feas_tol,
        gap_tol: opts.gap_tol,
        verbose: opts.verbosity > 0,
    }
}

/// Solves a Hermitian conic program.
pub fn solve_sdp(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    opts.validate()?;
    let biggest = p.max_block_params();
    if biggest > opts.ambient_cap {
        return Err(BqtError::TooLarge(format!(
            "variable block with {biggest} real parameters exceeds the cap of {}",
            opts.ambient_cap
        )));
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let emb = embed::Embedded::build(p)?;
    let res = emb.lmi.solve(&settings(opts))?;
    let y = emb.model_dofs(&res.y, p.num_dofs());
    let (max_eq, min_eig) = p.residuals(&y)?;
    let primal_value = p.objective_value(&y);
    let constant = p.objective().constant;
    let dual_value = match p.sense() {
        Sense::Max => res.pobj + constant,
        Sense::Min => -res.pobj + constant,
    };
    let mut status = map_status(res.status);
    if status == Status::Optimal
        && ((primal_value - dual_value).abs() > opts.gap_tol * primal_value.abs().max(1.0)
            || max_eq > 10.0 * opts.feas_tol * (1.0 + emb.rhs_scale)
            || min_eig < -10.0 * opts.feas_tol * (1.0 + emb.rhs_scale))
    {
        status = Status::Inaccurate;
    }
    Ok(ConicSolution {
        status,
        primal_value,
        dual_value,
        blocks: p.values_from(&y),
        duals: emb.duals(p, &res.x),
        residuals: Residuals { max_eq, min_eig },
        iterations: res.iters,
        x: vec![],
        y: vec![],
    })
}

/// True if `point` satisfies every constraint of `p` within `tol`.
pub fn check_feasible(p: &ConicProblem, point: &Assignment, tol: f64) -> Result<bool> {
    let y = p.dofs_from(point)?;
    let (eq, eig) = p.residuals(&y)?;
    Ok(eq <= tol && eig >= -tol)
}

/// Objective value of `p` at `point`.
pub fn objective_at(p: &ConicProblem, point: &Assignment) -> Result<f64> {
    Ok(p.objective_value(&p.dofs_from(point)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::C64;
    use proptest::prelude::*;

    fn max_eig_problem(diag: &[f64], scale: f64) -> ConicProblem {
        let n = diag.len();
        let mut p = ConicProblem::new();
        let t = p.scalar("t", false).unwrap();
        let d = LabeledOperator::diag(&[n], diag);
        let lhs = t.times_identity(&[n]).unwrap().sub(&MatExpr::constant(&d)).unwrap();
        p.add_psd("gap", lhs);
        p.set_objective(Sense::Min, t.re_trace().scale(scale));
        p
    }

    #[test]
    fn max_eigenvalue() {
        let p = max_eig_problem(&[1.0, 2.0], 1.0);
        let s = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.primal_value - 2.0).abs() < 1e-7, "{}", s.primal_value);
        assert!(s.gap() < 1e-6);
        // the multiplier is the top eigenprojector
        let z = s.dual("gap").unwrap();
        assert!((z.get(1, 1).re - 1.0).abs() < 1e-6);
        assert!(z.get(0, 0).re.abs() < 1e-6);
    }

    #[test]
    fn complex_hermitian_max_eigenvalue() {
        // [[1, i],[-i, 1]] has eigenvalues 0 and 2
        let mut h = LabeledOperator::identity(&[2]);
        h.set(0, 1, C64::new(0.0, 1.0));
        h.set(1, 0, C64::new(0.0, -1.0));
        let mut p = ConicProblem::new();
        let t = p.scalar("t", false).unwrap();
        p.add_psd("gap", t.times_identity(&[2]).unwrap().sub(&MatExpr::constant(&h)).unwrap());
        p.set_objective(Sense::Min, t.re_trace());
        let s = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.primal_value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn equal_states_have_unit_overlap() {
        // max Re Tr[rho X] over density matrices X: top eigenvalue of rho
        let mut rng = crate::random::rng(7);
        let rho = crate::random::density(&mut rng, &[3]);
        let mut p = ConicProblem::new();
        let x = p.hermitian("x", &[3], true).unwrap();
        p.add_eq("trace", x.trace().add_const(&LabeledOperator::scalar(-1.0)).unwrap());
        p.set_objective(Sense::Max, x.re_inner(&rho).unwrap());
        let s = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        let top = *rho.eigenvalues().unwrap().last().unwrap();
        assert!((s.primal_value - top).abs() < 1e-7);
        assert!(s.gap() < 1e-6);
    }

    #[test]
    fn infeasible_program_is_reported() {
        let mut p = ConicProblem::new();
        let x = p.hermitian("x", &[2], true).unwrap();
        // Tr X = -1 with X ⪰ 0
        p.add_eq("trace", x.trace().add_const(&LabeledOperator::scalar(1.0)).unwrap());
        p.set_objective(Sense::Min, x.re_trace());
        let s = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn unbounded_program_is_reported() {
        let mut p = ConicProblem::new();
        let x = p.hermitian("x", &[2], true).unwrap();
        p.set_objective(Sense::Max, x.re_trace());
        let s = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Unbounded);
    }

    #[test]
    fn cap_is_enforced() {
        let mut p = ConicProblem::new();
        let x = p.hermitian("x", &[8], true).unwrap();
        p.set_objective(Sense::Min, x.re_trace());
        let opts = SolverOptions { ambient_cap: 63, ..Default::default() };
        assert!(matches!(solve_sdp(&p, &opts), Err(BqtError::TooLarge(_))));
    }

    #[test]
    fn feasibility_check() {
        let mut p = ConicProblem::new();
        let x = p.hermitian("x", &[2], true).unwrap();
        p.add_eq("trace", x.trace().add_const(&LabeledOperator::scalar(-1.0)).unwrap());
        let mut pt = Assignment::new();
        pt.insert("x".into(), LabeledOperator::zeros(&[2]));
        assert!(!check_feasible(&p, &pt, 1e-9).unwrap());
        pt.insert("x".into(), LabeledOperator::identity(&[2]).scale(0.5));
        assert!(check_feasible(&p, &pt, 1e-9).unwrap());
        assert!(check_feasible(&p, &Assignment::new(), 1e-9).is_err());
    }

    #[test]
    fn options_from_json_fill_defaults() {
        let o: SolverOptions = serde_json::from_str(r#"{"max_iters": 7}"#).unwrap();
        assert_eq!(o.max_iters, 7);
        assert_eq!(o.feas_tol, 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn objective_scaling(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.1f64..20.0) {
            let base = solve_sdp(&max_eig_problem(&[a, b], 1.0), &SolverOptions::default()).unwrap();
            let scaled = solve_sdp(&max_eig_problem(&[a, b], c), &SolverOptions::default()).unwrap();
            prop_assert_eq!(base.status, Status::Optimal);
            prop_assert_eq!(scaled.status, Status::Optimal);
            prop_assert!((scaled.primal_value - c * base.primal_value).abs() < 1e-6 * c.max(1.0));
            let t0 = base.block("t").unwrap().get(0, 0).re;
            let t1 = scaled.block("t").unwrap().get(0, 0).re;
            prop_assert!((t0 - t1).abs() < 1e-6);
        }
    }
}
