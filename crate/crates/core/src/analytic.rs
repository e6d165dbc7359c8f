//! Closed-form swap-simulation errors for isotropic, Werner and GADC resources,
//! and the linear programs that certify them.
//!
//! All LPs here have the form sup cᵀx over x ≥ 0 with Ax ≤ b; the simulation
//! error is one minus the optimum.

use crate::error::{BqtError, Result};
use crate::sdp::{solve_lp, LpProblem, Sense, SolverOptions};
use crate::simerr::{ErrorReport, Method};
use crate::states::{gadc_fidelity, ResourceDescriptor};
use serde::Serialize;

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(BqtError::InvalidParam(format!("d = {d}, need d >= 2")));
    }
    Ok(())
}

fn check_da(da: usize) -> Result<()> {
    if da < 2 {
        return Err(BqtError::InvalidParam(format!("dA = {da}, need dA >= 2")));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(BqtError::InvalidParam(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

pub fn no_resource_error(d: usize) -> Result<f64> {
    check_d(d)?;
    let d2 = (d * d) as f64;
    Ok(1.0 - 1.0 / d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// F ≤ 1/dA: the resource is separable.
    IsotropicSeparable,
    /// F > 1/dA and dA ≤ d².
    IsotropicSmall,
    /// F > 1/dA and dA > d².
    IsotropicLarge,
    /// p ≤ 1/2: the resource is separable.
    WernerSeparable,
    WernerEntangled,
}

impl Regime {
    /// Whether an LOCC scheme is known to reach the PPT value in this regime.
    pub fn locc_achievable(self) -> bool {
        !matches!(self, Regime::IsotropicLarge | Regime::WernerEntangled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiecewiseParams {
    /// F for isotropic resources, p for Werner resources.
    pub param: f64,
    pub da: usize,
    pub d: usize,
    pub regime: Regime,
}

impl PiecewiseParams {
    pub fn isotropic(f: f64, da: usize, d: usize) -> Result<Self> {
        check_unit("F", f)?;
        check_da(da)?;
        check_d(d)?;
        let regime = if f <= 1.0 / da as f64 {
            Regime::IsotropicSeparable
        } else if da <= d * d {
            Regime::IsotropicSmall
        } else {
            Regime::IsotropicLarge
        };
        Ok(PiecewiseParams { param: f, da, d, regime })
    }

    pub fn werner(p: f64, da: usize, d: usize) -> Result<Self> {
        check_unit("p", p)?;
        check_da(da)?;
        check_d(d)?;
        let regime = if p <= 0.5 { Regime::WernerSeparable } else { Regime::WernerEntangled };
        Ok(PiecewiseParams { param: p, da, d, regime })
    }

    pub fn error(&self) -> f64 {
        self.branch(self.regime)
    }

    /// Evaluates the formula of `regime` regardless of which one is active,
    /// for continuity checks at the boundaries.
    pub fn branch(&self, regime: Regime) -> f64 {
        let (x, a, d2) = (self.param, self.da as f64, (self.d * self.d) as f64);
        match regime {
            Regime::IsotropicSeparable | Regime::WernerSeparable => 1.0 - 1.0 / d2,
            Regime::IsotropicSmall => 1.0 - x * a / d2,
            Regime::IsotropicLarge => (1.0 - 1.0 / d2) * (1.0 - x) / (1.0 - 1.0 / a),
            Regime::WernerEntangled => 1.0 - (4.0 * x - 2.0 + a) / (d2 * a),
        }
    }
}

pub fn isotropic_error(f: f64, da: usize, d: usize) -> Result<f64> {
    Ok(PiecewiseParams::isotropic(f, da, d)?.error())
}

pub fn werner_error(p: f64, da: usize, d: usize) -> Result<f64> {
    Ok(PiecewiseParams::werner(p, da, d)?.error())
}

/// 1 − max{F(γ,N), 1/16}, the error of twirling the two-pair GADC resource
/// into an isotropic state and teleporting.
pub fn gadc_error(gamma: f64, n: f64) -> Result<f64> {
    check_unit("gamma", gamma)?;
    check_unit("N", n)?;
    Ok(1.0 - gadc_fidelity(gamma, n).max(1.0 / 16.0))
}

/// The isotropic formula applied to the twirled GADC resource (dA = 4, d = 2).
/// Below F = 1/4 the twirled state is separable and the error saturates at
/// 3/4, so this differs from [`gadc_error`] there.
pub fn gadc_twirled_error(gamma: f64, n: f64) -> Result<f64> {
    check_unit("gamma", gamma)?;
    check_unit("N", n)?;
    isotropic_error(gadc_fidelity(gamma, n), 4, 2)
}

pub fn build_no_resource_lp(d: usize) -> Result<LpProblem> {
    check_d(d)?;
    let d = d as f64;
    let (p, m) = (1.0 / (d + 1.0), 1.0 / (d - 1.0));
    let a = vec![
        vec![1.0, -m, p, -1.0 / (d * d - 1.0)],
        vec![1.0, p, -m, -1.0 / (d * d - 1.0)],
        vec![-1.0, m, m, -m * m],
        vec![1.0; 4],
        vec![-1.0; 4],
    ];
    LpProblem::new(vec![1.0, 0.0, 0.0, 0.0], a, vec![0.0, 0.0, 0.0, 1.0, -1.0], Sense::Max, vec![true; 4])
}

/// The point (1/d², 0, 0, 1 − 1/d²) and the dual point y₁ = y₂ = (1 − 1/d²)/2,
/// y₄ = 1/d².
pub fn no_resource_points(d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_d(d)?;
    let k = 1.0 / (d * d) as f64;
    let h = (1.0 - k) / 2.0;
    Ok((vec![k, 0.0, 0.0, 1.0 - k], vec![h, h, 0.0, k, 0.0]))
}

fn lp_b() -> Vec<f64> {
    let mut b = vec![0.0; 11];
    b[..4].copy_from_slice(&[1.0, -1.0, 1.0, -1.0]);
    b
}

fn sum_rows() -> [Vec<f64>; 4] {
    [
        vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        vec![-1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
        vec![0.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0, -1.0],
    ]
}

/// Variables (k₁, l₁, m₁, n₁, k₂, l₂, m₂, n₂).
pub fn build_isotropic_lp(f: f64, da: usize, d: usize) -> Result<LpProblem> {
    PiecewiseParams::isotropic(f, da, d)?;
    let (a, d) = (da as f64, d as f64);
    let (p, m, q, r) = (1.0 / (d + 1.0), 1.0 / (d - 1.0), 1.0 / (d * d - 1.0), 1.0 / ((d + 1.0) * (d + 1.0)));
    let mm = m * m;
    let (u, v) = (a + 1.0, a - 1.0);
    let mut rows: Vec<Vec<f64>> = sum_rows().to_vec();
    rows.extend([
        vec![1.0, p, p, r, -u, -u * p, -u * p, -u * r],
        vec![1.0, -m, p, -q, v, -v * m, v * p, -v * q],
        vec![-1.0, m, -p, q, u, -u * m, u * p, -u * q],
        vec![1.0, p, -m, -q, v, v * p, -v * m, -v * q],
        vec![-1.0, -p, m, q, u, u * p, -u * m, -u * q],
        vec![-1.0, m, m, -mm, -v, v * m, v * m, -v * mm],
        vec![1.0, -m, -m, mm, -u, u * m, u * m, -u * mm],
    ]);
    let c = vec![f, 0.0, 0.0, 0.0, 1.0 - f, 0.0, 0.0, 0.0];
    LpProblem::new(c, rows, lp_b(), Sense::Max, vec![true; 8])
}

/// Variables (k₁, l₁, m₁, n₁, k₂, l₂, m₂, n₂).
pub fn build_werner_lp(p: f64, da: usize, d: usize) -> Result<LpProblem> {
    PiecewiseParams::werner(p, da, d)?;
    let (a, d) = (da as f64, d as f64);
    let (s, m, q, r) = (1.0 / (d + 1.0), 1.0 / (d - 1.0), 1.0 / (d * d - 1.0), 1.0 / ((d + 1.0) * (d + 1.0)));
    let mm = m * m;
    let (u, v) = (a + 1.0, a - 1.0);
    let mut rows: Vec<Vec<f64>> = sum_rows().to_vec();
    rows.extend([
        vec![-u, -u * s, -u * s, -u * r, v, v * s, v * s, v * r],
        // last entry is (dA − 1)/(d² − 1); see the test against the closed form
        vec![u, -u * m, u * s, -u * q, -v, v * m, -v * s, v * q],
        vec![1.0, -m, s, -q, 1.0, -m, s, -q],
        vec![u, u * s, -u * m, -u * q, -v, -v * s, v * m, v * q],
        vec![1.0, s, -m, -q, 1.0, s, -m, -q],
        vec![-u, u * m, u * m, -u * mm, v, -v * m, -v * m, v * mm],
        vec![-1.0, m, m, -mm, -1.0, m, m, -mm],
    ]);
    let c = vec![1.0 - p, 0.0, 0.0, 0.0, p, 0.0, 0.0, 0.0];
    LpProblem::new(c, rows, lp_b(), Sense::Max, vec![true; 8])
}

fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    lo + (hi - lo) * t.clamp(0.0, 1.0)
}

fn regime_error(want: &str) -> BqtError {
    BqtError::InvalidParam(format!("no quoted point outside the {want} regime"))
}

/// Quoted primal point for the isotropic LP. In the dA > d² regime l₂ ranges
/// over an interval and `t` ∈ [0, 1] selects within it.
pub fn isotropic_primal_point(f: f64, da: usize, d: usize, t: f64) -> Result<Vec<f64>> {
    let pp = PiecewiseParams::isotropic(f, da, d)?;
    let (a, d) = (da as f64, d as f64);
    let d2 = d * d;
    match pp.regime {
        Regime::IsotropicSmall => {
            let k1 = a / d2;
            let l2 = a / (d2 * (a + 1.0));
            Ok(vec![k1, 0.0, 0.0, 1.0 - k1, 0.0, l2, l2, 1.0 - 2.0 * l2])
        }
        Regime::IsotropicLarge => {
            let k2 = (a - d2) / (d2 * (a - 1.0));
            let denom = d2 * (a * a - 1.0);
            let hi = (d - 1.0) * a * (a + 1.0 - d2 + d) / denom;
            let lo = if a + 1.0 < d + d2 { (1.0 + d) * (d2 + d - (a + 1.0)) * a / denom } else { 0.0 };
            let l2 = lerp(lo, hi, t);
            Ok(vec![1.0, 0.0, 0.0, 0.0, k2, l2, l2, 1.0 - k2 - 2.0 * l2])
        }
        _ => Err(regime_error("F > 1/dA")),
    }
}

/// Quoted dual point for the isotropic LP (11 multipliers). In the dA ≤ d²
/// regime y₁ ranges over [1/(dA d²), F/d²], selected by `t`.
pub fn isotropic_dual_point(f: f64, da: usize, d: usize, t: f64) -> Result<Vec<f64>> {
    let pp = PiecewiseParams::isotropic(f, da, d)?;
    let (a, d) = (da as f64, d as f64);
    let d2 = d * d;
    let mut y = vec![0.0; 11];
    match pp.regime {
        Regime::IsotropicSmall => {
            let y1 = lerp(1.0 / (a * d2), f / d2, t);
            y[0] = y1;
            y[2] = f * a / d2 - y1;
            y[4] = (d + 1.0).powi(2) * (f - d2 * y1) / (4.0 * d2);
            y[5] = (d2 - 1.0) * (f + d2 * y1) / (4.0 * d2);
            y[7] = y[5];
            y[10] = (d - 1.0).powi(2) * (f - d2 * y1) / (4.0 * d2);
        }
        Regime::IsotropicLarge => {
            let y1 = (1.0 - f + d2 * (a * f - 1.0)) / (d2 * (a - 1.0));
            y[0] = y1;
            y[2] = (a - 1.0) * (f - y1) / (d2 - 1.0);
            y[5] = (f - y1) / 2.0;
            y[7] = y[5];
        }
        _ => return Err(regime_error("F > 1/dA")),
    }
    Ok(y)
}

/// Quoted primal point for the Werner LP; l₁ ranges over an interval selected
/// by `t`. The point does not depend on p.
pub fn werner_primal_point(da: usize, d: usize, t: f64) -> Result<Vec<f64>> {
    check_da(da)?;
    check_d(d)?;
    let (a, d) = (da as f64, d as f64);
    let d2 = d * d;
    let k1 = (a - 2.0) / (d2 * a);
    let k2 = (a + 2.0) / (d2 * a);
    let l1 = lerp(2.0 / (d2 * (a + 1.0)), (2.0 + d * (a - 1.0) - a) / (d2 * a), t);
    let l2 = (d2 * (a + 1.0) * l1 - 2.0) / (d2 * (a - 1.0));
    Ok(vec![k1, l1, l1, 1.0 - k1 - 2.0 * l1, k2, l2, l2, 1.0 - k2 - 2.0 * l2])
}

/// Quoted dual point for the Werner LP, valid for p > 1/2.
pub fn werner_dual_point(p: f64, da: usize, d: usize) -> Result<Vec<f64>> {
    let pp = PiecewiseParams::werner(p, da, d)?;
    if pp.regime != Regime::WernerEntangled {
        return Err(regime_error("p > 1/2"));
    }
    let (a, d) = (da as f64, d as f64);
    let d2 = d * d;
    let mut y = vec![0.0; 11];
    y[0] = ((a + 2.0) * p - 1.0) / (d2 * a);
    y[2] = (a * (1.0 - p) + 2.0 * p - 1.0) / (d2 * a);
    y[4] = (d + 1.0).powi(2) * (2.0 * p - 1.0) / (4.0 * d2 * a);
    y[6] = (d2 - 1.0) * (2.0 * p - 1.0 + a) / (4.0 * d2 * a);
    y[8] = y[6];
    y[9] = (d - 1.0).powi(2) * (2.0 * p - 1.0) / (4.0 * d2 * a);
    Ok(y)
}

/// Solves one of the LPs above and reports 1 − optimum.
pub fn lp_error(lp: &LpProblem, resource: Option<ResourceDescriptor>, d: usize, opts: &SolverOptions) -> Result<ErrorReport> {
    let sol = solve_lp(lp, opts)?;
    let value = 1.0 - sol.primal_value;
    let bound = 1.0 - sol.dual_value;
    Ok(ErrorReport {
        value,
        method: Method::Lp,
        status: sol.status,
        bound,
        gap: (value - bound).abs(),
        certificate: vec![],
        residuals: Some(sol.residuals),
        resource,
        target: format!("swap d={d}"),
    })
}
