//! The two single-ebit KPF16 protocols and the twirl-then-teleport scheme that
//! is optimal with one e-dit.
//!
//! KPF16 acts on qubits Q_A, Q_B and outputs C_A (Alice) and C_B (Bob). Its
//! Choi operator is written on (Q_A, C_A, C_B, Q_B); the [`ChoiOperator`]
//! form uses the usual [Q_A, Q_B, C_A, C_B] layout so it compares directly
//! with the swap channel.

use crate::analytic::isotropic_error;
use crate::channels::{swap_channel_choi, ChoiOperator};
use crate::error::{BqtError, Result};
use crate::qmat::{LabeledOperator, PSD_TOL};
use crate::sdp::SolverOptions;
use crate::simerr::{channel_fidelity, diamond_distance, ErrorReport};
use crate::states::{gamma, isotropic_twirl, phi};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kpf16Params {
    /// sin²(θ₁/2), the chance that Alice's trigger fires.
    pub p1: f64,
    pub p2: f64,
}

impl Kpf16Params {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, v) in [("p1", p1), ("p2", p2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(BqtError::InvalidParam(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Kpf16Params { p1, p2 })
    }

    pub fn from_angles(theta1: f64, theta2: f64) -> Self {
        Kpf16Params { p1: (theta1 / 2.0).sin().powi(2), p2: (theta2 / 2.0).sin().powi(2) }
    }
}

fn pi2() -> LabeledOperator {
    LabeledOperator::identity(&[2]).scale(0.5)
}

/// Unnormalized Choi operator on (Q_A, C_A, C_B, Q_B).
pub fn kpf16_choi_circuit_order(p: Kpf16Params) -> Result<LabeledOperator> {
    let (p1, p2) = (p.p1, p.p2);
    let id = LabeledOperator::identity(&[2]);
    let pi = pi2();
    let g = gamma(2);
    // (Q_A, C_A, C_B, Q_B)
    let t00 = LabeledOperator::kron_all(&[&id, &phi(2), &id]);
    // built on (Q_A, C_A, Q_B, C_B)
    let t01 = LabeledOperator::kron_all(&[&id, &g, &pi]).permute(&[0, 1, 3, 2])?;
    // built on (Q_A, C_B, C_A, Q_B)
    let t10 = LabeledOperator::kron_all(&[&g, &pi, &id]).permute(&[0, 2, 1, 3])?;
    let t11 = LabeledOperator::kron_all(&[&id, &pi, &pi, &id]);
    t00.scale((1.0 - p1) * (1.0 - p2))
        .add(&t01.scale((1.0 - p1) * p2))?
        .add(&t10.scale(p1 * (1.0 - p2)))?
        .add(&t11.scale(p1 * p2))
}

pub fn kpf16_choi(p: Kpf16Params) -> Result<ChoiOperator> {
    let op = kpf16_choi_circuit_order(p)?.permute(&[0, 3, 1, 2])?;
    ChoiOperator::new(op, &[2, 2], &[2, 2])
}

/// Tr[(Φ_{Q_A C_B} ⊗ Φ_{C_A Q_B}) K/4], computed from the operator.
pub fn kpf16_overlap(p: Kpf16Params) -> Result<f64> {
    let ideal = phi(2).kron(&phi(2)).permute(&[0, 2, 1, 3])?;
    let state = kpf16_choi_circuit_order(p)?.scale(0.25);
    Ok(ideal.inner(&state)?.re)
}

/// (1 + 3(p₁ + p₂) − 6p₁p₂)/16, checked against [`kpf16_overlap`].
pub fn kpf16_fidelity(p: Kpf16Params) -> Result<f64> {
    let f = (1.0 + 3.0 * (p.p1 + p.p2) - 6.0 * p.p1 * p.p2) / 16.0;
    let numeric = kpf16_overlap(p)?;
    if (f - numeric).abs() > 1e-12 {
        return Err(BqtError::Numerical(format!("fidelity formula {f} disagrees with overlap {numeric}")));
    }
    Ok(f)
}

/// ½‖K − S‖⋄ against the qubit swap.
pub fn kpf16_error(p: Kpf16Params, opts: &SolverOptions) -> Result<ErrorReport> {
    let mut r = diamond_distance(&kpf16_choi(p)?, &swap_channel_choi(2)?, opts)?;
    r.target = format!("KPF16 p1={} p2={}", p.p1, p.p2);
    Ok(r)
}

/// Alice teleports with probability 1 − p, Bob with probability p.
pub fn kpf16_second_choi(p: f64) -> Result<ChoiOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BqtError::InvalidParam(format!("p = {p} is outside [0, 1]")));
    }
    let a = kpf16_choi(Kpf16Params { p1: 0.0, p2: 1.0 })?;
    let b = kpf16_choi(Kpf16Params { p1: 1.0, p2: 0.0 })?;
    a.scale(p).add(&b.scale(1.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondProtocolErrors {
    pub fidelity: f64,
    pub diamond: f64,
}

pub fn kpf16_second_error(p: f64, opts: &SolverOptions) -> Result<SecondProtocolErrors> {
    let k = kpf16_second_choi(p)?;
    let s = swap_channel_choi(2)?;
    let f = channel_fidelity(&k, &s, opts)?;
    let dd = diamond_distance(&k, &s, opts)?;
    Ok(SecondProtocolErrors { fidelity: f.fidelity, diamond: dd.value })
}

/// Twirls one e-dit embedded in d² dimensions into an isotropic state and
/// returns ½‖Φ_{d²} − ω‖₁, which bounds the error of teleporting both ways
/// with it. Equals 1 − 1/d.
pub fn single_ebit_scheme_error(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(BqtError::InvalidParam("d must be at least 2".into()));
    }
    if d > 3 {
        return Err(BqtError::TooLarge(format!("d = {d} needs a {0}x{0} state; only d <= 3 is supported", d.pow(4))));
    }
    let dd = d * d;
    let v = 1.0 / (d as f64);
    let embedded = LabeledOperator::from_fn(&[dd, dd], |r, c| {
        let (a, b) = (r / dd, r % dd);
        let (x, y) = (c / dd, c % dd);
        if a == b && x == y && a < d && x < d {
            v.into()
        } else {
            0.0.into()
        }
    });
    embedded.check_state(PSD_TOL)?;
    let omega = isotropic_twirl(&embedded)?;
    let err = 0.5 * phi(dd).sub(&omega)?.trace_norm()?;
    let closed = isotropic_error(1.0, d, d)?;
    if (err - closed).abs() > 1e-10 {
        return Err(BqtError::Numerical(format!("scheme error {err} disagrees with {closed}")));
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::state_fidelity;

    #[test]
    fn corner_channels() {
        let k = kpf16_choi(Kpf16Params::new(0.0, 0.0).unwrap()).unwrap();
        let constant = ChoiOperator::replacer(&[2, 2], &phi(2)).unwrap();
        assert!(k.op().max_abs_diff(constant.op()) < 1e-15);

        let k = kpf16_choi(Kpf16Params::new(1.0, 0.0).unwrap()).unwrap();
        // C_A gets π, C_B gets Q_A
        let s = swap_channel_choi(2).unwrap();
        let rep = ChoiOperator::replacer(&[2], &pi2()).unwrap();
        let id = ChoiOperator::identity(&[2]);
        let mixed = ChoiOperator::compose(&s, &ChoiOperator::tensor(&rep, &id).unwrap()).unwrap();
        assert!(k.op().max_abs_diff(mixed.op()) < 1e-15);
    }

    #[test]
    fn choi_is_a_channel() {
        for (p1, p2) in [(0.0, 0.0), (0.3, 0.8), (1.0, 1.0)] {
            let k = kpf16_choi(Kpf16Params::new(p1, p2).unwrap()).unwrap();
            assert!(k.is_cp(PSD_TOL).unwrap());
            assert!(k.is_tp(1e-12));
            assert!((k.op().trace().re / 4.0 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fidelity_values() {
        let f = |a, b| kpf16_fidelity(Kpf16Params::new(a, b).unwrap()).unwrap();
        assert!((f(0.0, 0.0) - 1.0 / 16.0).abs() < 1e-15);
        assert!((f(1.0, 0.0) - 0.25).abs() < 1e-15);
        assert!((f(0.5, 0.5) - 0.15625).abs() < 1e-15);
        let st = kpf16_choi_circuit_order(Kpf16Params::new(0.0, 0.0).unwrap()).unwrap().scale(0.25);
        let ideal = phi(2).kron(&phi(2)).permute(&[0, 2, 1, 3]).unwrap();
        let sf = state_fidelity(&ideal, &st).unwrap();
        assert!((sf - 1.0 / 16.0).abs() < 1e-10, "{sf}");
    }

    #[test]
    fn angles_map_to_probabilities() {
        let p = Kpf16Params::from_angles(std::f64::consts::PI, 0.0);
        assert!((p.p1 - 1.0).abs() < 1e-15 && p.p2 == 0.0);
        assert!(Kpf16Params::new(1.5, 0.0).is_err());
    }

    #[test]
    fn corner_diamond_error() {
        let r = kpf16_error(Kpf16Params::new(1.0, 0.0).unwrap(), &SolverOptions::default()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-5, "{}", r.value);
    }

    #[test]
    fn single_ebit() {
        assert!((single_ebit_scheme_error(2).unwrap() - 0.5).abs() < 1e-12);
        assert!((single_ebit_scheme_error(3).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(single_ebit_scheme_error(4), Err(BqtError::TooLarge(_))));
        assert!(single_ebit_scheme_error(1).is_err());
    }
}
