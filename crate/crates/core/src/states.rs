//! Fixed operators, resource states and the two bilateral twirls.

use crate::error::{BqtError, Result};
use crate::qmat::{LabeledOperator, OperatorJson, C64, PSD_TOL};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn check_dim(d: usize) -> Result<()> {
    if d < 1 {
        return Err(BqtError::InvalidParam("dimension must be at least 1".into()));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(BqtError::InvalidParam(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// Γ = Σ |ii><jj| on [d, d], or Φ = Γ/d when `normalized`.
pub fn max_entangled(d: usize, normalized: bool) -> Result<LabeledOperator> {
    check_dim(d)?;
    let v = if normalized { 1.0 / d as f64 } else { 1.0 };
    Ok(LabeledOperator::from_fn(&[d, d], |r, c| {
        if r % (d + 1) == 0 && c % (d + 1) == 0 {
            C64::new(v, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

pub(crate) fn gamma(d: usize) -> LabeledOperator {
    max_entangled(d, false).expect("d >= 1")
}

pub(crate) fn phi(d: usize) -> LabeledOperator {
    max_entangled(d, true).expect("d >= 1")
}

/// F = Σ |ij><ji|.
pub fn swap_operator(d: usize) -> Result<LabeledOperator> {
    check_dim(d)?;
    Ok(LabeledOperator::from_fn(&[d, d], |r, c| {
        let (i, j) = (r / d, r % d);
        if c == j * d + i {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// (Π^S, Π^A) = ((I + F)/2, (I - F)/2).
pub fn sym_antisym_projectors(d: usize) -> Result<(LabeledOperator, LabeledOperator)> {
    let f = swap_operator(d)?;
    let id = LabeledOperator::identity(&[d, d]);
    Ok((id.add(&f)?.scale(0.5), id.sub(&f)?.scale(0.5)))
}

/// W^{z,x} = Z(z) X(x).
pub fn weyl_operator(z: usize, x: usize, d: usize) -> Result<LabeledOperator> {
    check_dim(d)?;
    if z >= d || x >= d {
        return Err(BqtError::InvalidParam(format!("({z}, {x}) out of range for d = {d}")));
    }
    Ok(LabeledOperator::from_fn(&[d], |r, c| {
        if r == (c + x) % d {
            C64::from_polar(1.0, 2.0 * PI * (z * r) as f64 / d as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

fn bipartite_equal(x: &LabeledOperator) -> Result<usize> {
    match x.dims() {
        [a, b] if a == b => Ok(*a),
        dims => Err(BqtError::DimMismatch(format!("expected [d, d], got {dims:?}"))),
    }
}

/// Φ Tr[ΦX] + (I - Φ)/(d² - 1) Tr[(I - Φ)X].
pub fn isotropic_twirl(x: &LabeledOperator) -> Result<LabeledOperator> {
    let d = bipartite_equal(x)?;
    let p = phi(d);
    let comp = LabeledOperator::identity(&[d, d]).sub(&p)?;
    let a = p.matmul(x)?.trace();
    let b = comp.matmul(x)?.trace();
    let mut out = p.scale_c(a);
    if d > 1 {
        out = out.add(&comp.scale_c(b / (d * d - 1) as f64))?;
    }
    Ok(out)
}

/// Tr[Π^S X] 2Π^S/(d(d+1)) + Tr[Π^A X] 2Π^A/(d(d-1)).
pub fn werner_twirl(x: &LabeledOperator) -> Result<LabeledOperator> {
    let d = bipartite_equal(x)?;
    let (ps, pa) = sym_antisym_projectors(d)?;
    let df = d as f64;
    let s = ps.matmul(x)?.trace();
    let mut out = ps.scale_c(s * (2.0 / (df * (df + 1.0))));
    if d > 1 {
        let a = pa.matmul(x)?.trace();
        out = out.add(&pa.scale_c(a * (2.0 / (df * (df - 1.0)))))?;
    }
    Ok(out)
}

/// F Φ + (1 - F)(I - Φ)/(d² - 1).
pub fn isotropic_state(f: f64, d: usize) -> Result<LabeledOperator> {
    check_unit("F", f)?;
    if d < 2 {
        return Err(BqtError::InvalidParam("isotropic state needs dA >= 2".into()));
    }
    let p = phi(d);
    let comp = LabeledOperator::identity(&[d, d]).sub(&p)?;
    p.scale(f).add(&comp.scale((1.0 - f) / (d * d - 1) as f64))
}

/// (1 - p) 2Π^S/(d(d+1)) + p 2Π^A/(d(d-1)).
pub fn werner_state(p: f64, d: usize) -> Result<LabeledOperator> {
    check_unit("p", p)?;
    if d < 2 {
        return Err(BqtError::InvalidParam("Werner state needs dA >= 2".into()));
    }
    let (ps, pa) = sym_antisym_projectors(d)?;
    let df = d as f64;
    ps.scale((1.0 - p) * 2.0 / (df * (df + 1.0)))
        .add(&pa.scale(p * 2.0 / (df * (df - 1.0))))
}

/// The four Kraus operators of the generalized amplitude damping channel.
pub fn gadc_kraus(gamma: f64, n: f64) -> Result<[LabeledOperator; 4]> {
    check_unit("gamma", gamma)?;
    check_unit("N", n)?;
    let m = |a: f64, b: f64, c: f64, d: f64| {
        LabeledOperator::from_real(&[2], &[vec![a, b], vec![c, d]]).expect("2x2")
    };
    let s = (1.0 - gamma).sqrt();
    Ok([
        m((1.0 - n).sqrt(), 0.0, 0.0, (1.0 - n).sqrt() * s),
        m(0.0, (gamma * (1.0 - n)).sqrt(), 0.0, 0.0),
        m(n.sqrt() * s, 0.0, 0.0, n.sqrt()),
        m(0.0, 0.0, (gamma * n).sqrt(), 0.0),
    ])
}

pub fn gadc_apply(gamma: f64, n: f64, rho: &LabeledOperator) -> Result<LabeledOperator> {
    if rho.dim() != 2 {
        return Err(BqtError::DimMismatch("GADC acts on a qubit".into()));
    }
    let rho = rho.with_dims(&[2])?;
    let mut out = LabeledOperator::zeros(&[2]);
    for k in gadc_kraus(gamma, n)? {
        out = out.add(&k.matmul(&rho)?.matmul(&k.adjoint())?)?;
    }
    Ok(out)
}

/// Tr[Φ^{⊗2} A^{⊗4}(Φ^{⊗2})] in closed form.
pub fn gadc_fidelity(gamma: f64, n: f64) -> f64 {
    let inner = 1.0 + (gamma / 2.0) * (gamma - 2.0 * (1.0 + gamma * n * (1.0 - n)));
    inner * inner
}

/// A^{⊗4}(Φ_{A1B1} ⊗ Φ_{A2B2}) regrouped as A1A2 | B1B2 with dims [4, 4].
pub fn gadc_state_operator(gamma: f64, n: f64) -> Result<LabeledOperator> {
    let kraus = gadc_kraus(gamma, n)?;
    let phi2 = phi(2);
    let input = phi2.kron(&phi2);
    let mut out = LabeledOperator::zeros(&[2, 2, 2, 2]);
    for a in &kraus {
        for b in &kraus {
            for c in &kraus {
                for d in &kraus {
                    let k = LabeledOperator::kron_all(&[a, b, c, d]);
                    out = out.add(&k.matmul(&input)?.matmul(&k.adjoint())?)?;
                }
            }
        }
    }
    // A1 B1 A2 B2 -> A1 A2 B1 B2
    out.permute(&[0, 2, 1, 3])?.with_dims(&[4, 4])
}

pub fn gadc_resource_state(gamma: f64, n: f64) -> Result<ResourceState> {
    Ok(ResourceState::Custom(gadc_state_operator(gamma, n)?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResourceState {
    None,
    Isotropic { f: f64, da: usize },
    Werner { p: f64, da: usize },
    GadcBell { gamma: f64, n: f64 },
    Custom(LabeledOperator),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResourceDescriptor {
    None,
    Isotropic { #[serde(rename = "F")] f: f64, #[serde(rename = "dA")] da: usize },
    Werner { p: f64, #[serde(rename = "dA")] da: usize },
    Gadc { gamma: f64, #[serde(rename = "N")] n: f64 },
    Custom { dims: Vec<usize> },
}

impl ResourceState {
    pub fn isotropic(f: f64, da: usize) -> Result<Self> {
        let r = ResourceState::Isotropic { f, da };
        r.validate()?;
        Ok(r)
    }

    pub fn werner(p: f64, da: usize) -> Result<Self> {
        let r = ResourceState::Werner { p, da };
        r.validate()?;
        Ok(r)
    }

    pub fn gadc(gamma: f64, n: f64) -> Result<Self> {
        let r = ResourceState::GadcBell { gamma, n };
        r.validate()?;
        Ok(r)
    }

    /// Wraps an explicit bipartite state after checking it is a density operator.
    pub fn custom(op: LabeledOperator) -> Result<Self> {
        let r = ResourceState::Custom(op);
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_nan() {
                Err(BqtError::InvalidParam(format!("{name} is NaN")))
            } else {
                check_unit(name, v)
            }
        };
        match self {
            ResourceState::None => Ok(()),
            ResourceState::Isotropic { f, da } => {
                finite("F", *f)?;
                if *da < 2 {
                    return Err(BqtError::InvalidParam("dA must be at least 2".into()));
                }
                Ok(())
            }
            ResourceState::Werner { p, da } => {
                finite("p", *p)?;
                if *da < 2 {
                    return Err(BqtError::InvalidParam("dA must be at least 2".into()));
                }
                Ok(())
            }
            ResourceState::GadcBell { gamma, n } => {
                finite("gamma", *gamma)?;
                finite("N", *n)
            }
            ResourceState::Custom(op) => {
                if op.num_subsystems() != 2 {
                    return Err(BqtError::DimMismatch(format!(
                        "custom resource must be bipartite, got dims {:?}",
                        op.dims()
                    )));
                }
                op.check_state(PSD_TOL)
            }
        }
    }

    /// Bipartite operator on [dÂ, dB̂]; `None` is the scalar 1 on [1, 1].
    pub fn materialize(&self) -> Result<LabeledOperator> {
        self.validate()?;
        match self {
            ResourceState::None => LabeledOperator::scalar(1.0).with_dims(&[1, 1]),
            ResourceState::Isotropic { f, da } => isotropic_state(*f, *da),
            ResourceState::Werner { p, da } => werner_state(*p, *da),
            ResourceState::GadcBell { gamma, n } => gadc_state_operator(*gamma, *n),
            ResourceState::Custom(op) => Ok(op.clone()),
        }
    }

    pub fn descriptor(&self) -> ResourceDescriptor {
        match self {
            ResourceState::None => ResourceDescriptor::None,
            ResourceState::Isotropic { f, da } => ResourceDescriptor::Isotropic { f: *f, da: *da },
            ResourceState::Werner { p, da } => ResourceDescriptor::Werner { p: *p, da: *da },
            ResourceState::GadcBell { gamma, n } => ResourceDescriptor::Gadc { gamma: *gamma, n: *n },
            ResourceState::Custom(op) => ResourceDescriptor::Custom { dims: op.dims().to_vec() },
        }
    }

    /// Loads `{"dims": [dA, dB], "re": [[...]], "im": [[...]]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let j: OperatorJson = serde_json::from_str(text).map_err(|e| BqtError::Parse(e.to_string()))?;
        ResourceState::custom(LabeledOperator::try_from(j)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &LabeledOperator, b: &LabeledOperator, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn max_entangled_basics() {
        assert_eq!(max_entangled(1, true).unwrap().data(), &[C64::new(1.0, 0.0)]);
        let p = phi(2);
        assert!((p.matmul(&p).unwrap().trace().re - 1.0).abs() < 1e-15);
        assert!((gamma(3).trace().re - 3.0).abs() < 1e-15);
        let m = phi(3).ptrace(&[0]).unwrap();
        assert!(close(&m, &LabeledOperator::identity(&[3]).scale(1.0 / 3.0), 1e-15));
    }

    #[test]
    fn swap_basics() {
        let f = swap_operator(2).unwrap();
        // F|01> = |10>
        assert_eq!(f.get(2, 1), C64::new(1.0, 0.0));
        assert_eq!(f.get(1, 1), C64::new(0.0, 0.0));
        assert!(close(&f.matmul(&f).unwrap(), &LabeledOperator::identity(&[2, 2]), 0.0));
        for d in 2..5 {
            let f = swap_operator(d).unwrap();
            assert!((f.trace().re - d as f64).abs() < 1e-15);
            let t = f.ptranspose(&[1]).unwrap().scale(1.0 / d as f64);
            assert!(close(&t, &phi(d), 1e-15));
        }
    }

    #[test]
    fn projectors() {
        let (s, a) = sym_antisym_projectors(2).unwrap();
        assert!((s.trace().re - 3.0).abs() < 1e-15);
        assert!((a.trace().re - 1.0).abs() < 1e-15);
        assert!(close(&s.matmul(&s).unwrap(), &s, 1e-15));
        assert!(close(&a.matmul(&a).unwrap(), &a, 1e-15));
        assert!(close(&s.matmul(&a).unwrap(), &LabeledOperator::zeros(&[2, 2]), 1e-15));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = [C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, 0.0)];
        let proj = LabeledOperator::projector(&[2, 2], &singlet).unwrap();
        assert!(close(&a, &proj, 1e-15));
    }

    #[test]
    fn weyl_basics() {
        let z = weyl_operator(1, 0, 2).unwrap();
        let x = weyl_operator(0, 1, 2).unwrap();
        assert!(close(&z, &LabeledOperator::diag(&[2], &[1.0, -1.0]), 1e-15));
        assert!(close(&x, &LabeledOperator::from_real(&[2], &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), 0.0));
        let w = weyl_operator(1, 2, 3).unwrap();
        assert!((w.adjoint().matmul(&w).unwrap().trace().re - 3.0).abs() < 1e-13);
        for (z1, x1, z2, x2) in [(0, 1, 1, 1), (2, 0, 1, 0), (1, 2, 2, 1)] {
            let a = weyl_operator(z1, x1, 3).unwrap();
            let b = weyl_operator(z2, x2, 3).unwrap();
            assert!(a.inner(&b).unwrap().norm() < 1e-13);
        }
        assert!(weyl_operator(3, 0, 3).is_err());
    }

    #[test]
    fn weyl_full_twirl_is_depolarizing() {
        let sigma = LabeledOperator::from_fn(&[3], |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let mut acc = LabeledOperator::zeros(&[3]);
        for z in 0..3 {
            for x in 0..3 {
                let w = weyl_operator(z, x, 3).unwrap();
                acc = acc.add(&w.matmul(&sigma).unwrap().matmul(&w.adjoint()).unwrap()).unwrap();
            }
        }
        let want = LabeledOperator::identity(&[3]).scale_c(sigma.trace() / 3.0);
        assert!(close(&acc.scale(1.0 / 9.0), &want, 1e-13));
    }

    #[test]
    fn twirl_examples() {
        assert!(close(&isotropic_twirl(&phi(3)).unwrap(), &phi(3), 1e-15));
        let zz = LabeledOperator::basis_projector(4, 0).with_dims(&[2, 2]).unwrap();
        let t = isotropic_twirl(&zz).unwrap();
        assert!((phi(2).matmul(&t).unwrap().trace().re - 0.5).abs() < 1e-15);
        // each party holding two qubits
        let zz4 = LabeledOperator::basis_projector(16, 0).with_dims(&[4, 4]).unwrap();
        let t4 = isotropic_twirl(&zz4).unwrap();
        assert!((phi(4).matmul(&t4).unwrap().trace().re - 0.25).abs() < 1e-15);

        // |0><0| on d² x d² twirled, d = 2
        let d = 2usize;
        let dd = d * d;
        let zero = LabeledOperator::basis_projector(dd * dd, 0).with_dims(&[dd, dd]).unwrap();
        let omega = isotropic_twirl(&zero).unwrap();
        let p = phi(dd);
        let comp = LabeledOperator::identity(&[dd, dd]).sub(&p).unwrap();
        let want = p
            .scale(1.0 / (dd as f64))
            .add(&comp.scale((1.0 - 1.0 / dd as f64) / ((dd * dd) as f64 - 1.0)))
            .unwrap();
        assert!(close(&omega, &want, 1e-15));

        let w = werner_state(0.3, 3).unwrap();
        assert!(close(&werner_twirl(&w).unwrap(), &w, 1e-15));
        // Φ₂ is symmetric, so it has no antisymmetric weight
        let (_, pa) = sym_antisym_projectors(2).unwrap();
        let p = pa.matmul(&phi(2)).unwrap().trace().re;
        assert!(p.abs() < 1e-15);
        let tw = werner_twirl(&phi(2)).unwrap();
        assert!(close(&tw, &werner_state(0.0, 2).unwrap(), 1e-15));
    }

    #[test]
    fn trace_norm_of_prop6_difference() {
        // ½‖Φ_{d²} - ω‖₁ = 1 - 1/d² for ω the twirled product state
        for d in [2usize, 3] {
            let dd = d * d;
            let zero = LabeledOperator::basis_projector(dd * dd, 0).with_dims(&[dd, dd]).unwrap();
            let omega = isotropic_twirl(&zero).unwrap();
            let diff = phi(dd).sub(&omega).unwrap();
            let v = 0.5 * diff.trace_norm().unwrap();
            assert!((v - (1.0 - 1.0 / (dd as f64))).abs() < 1e-12);
        }
    }

    #[test]
    fn gadc_channel_examples() {
        let rho = LabeledOperator::from_fn(&[2], |i, j| C64::new(0.3 + 0.2 * (i + j) as f64, 0.1 * (i as f64 - j as f64)));
        assert!(close(&gadc_apply(0.0, 0.4, &rho).unwrap(), &rho, 1e-15));
        let one = LabeledOperator::basis_projector(2, 1);
        let zero = LabeledOperator::basis_projector(2, 0);
        assert!(close(&gadc_apply(1.0, 0.0, &one).unwrap(), &zero, 1e-15));
        assert!(close(&gadc_apply(1.0, 1.0, &zero).unwrap(), &one, 1e-15));
        assert!(gadc_apply(0.5, 0.5, &LabeledOperator::identity(&[3])).is_err());
    }

    #[test]
    fn gadc_state_examples() {
        let s0 = gadc_state_operator(0.0, 0.3).unwrap();
        assert!(close(&s0, &phi(4), 1e-15));
        for (g, n) in [(0.5, 0.25), (1.0, 0.5), (0.3, 0.9), (1.0, 0.0)] {
            let s = gadc_state_operator(g, n).unwrap();
            s.check_state(1e-12).unwrap();
            let f = phi(4).matmul(&s).unwrap().trace().re;
            assert!((f - gadc_fidelity(g, n)).abs() < 1e-14, "{g} {n}");
        }
        assert!((gadc_fidelity(1.0, 0.5) - 1.0 / 16.0).abs() < 1e-15);
        assert!((gadc_fidelity(1.0, 0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn materialize_shapes() {
        let n = ResourceState::None.materialize().unwrap();
        assert_eq!(n.dims(), &[1, 1]);
        assert_eq!(ResourceState::isotropic(0.5, 3).unwrap().materialize().unwrap().dims(), &[3, 3]);
        assert!(ResourceState::isotropic(f64::NAN, 2).is_err());
        assert!(ResourceState::werner(1.2, 2).is_err());
        assert!(ResourceState::isotropic(0.5, 1).is_err());
    }

    #[test]
    fn custom_from_json() {
        let text = r#"{"dims":[2,1],"re":[[0.5,0.0],[0.0,0.5]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        let r = ResourceState::from_json(text).unwrap();
        assert_eq!(r.materialize().unwrap().dims(), &[2, 1]);
        let bad = r#"{"dims":[2,1],"re":[[1.5,0.0],[0.0,-0.5]]}"#;
        assert!(ResourceState::from_json(bad).is_err());
    }
}
