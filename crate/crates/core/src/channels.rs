//! Choi-operator calculus.
//!
//! A channel N: R -> D is stored as Γ^N = Σ_ij |i><j| ⊗ N(|i><j|) with factor
//! layout [inputs..., outputs...].

use crate::error::{BqtError, Result};
use crate::qmat::{LabeledOperator, OperatorJson, SubsystemSet, C64, HERMITIAN_TOL, PSD_TOL};
use crate::states::{gamma, phi, weyl_operator};
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    op: LabeledOperator,
    input_dims: Vec<usize>,
    output_dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutReport {
    pub cut: Vec<usize>,
    pub min_eigenvalue: f64,
    pub ppt: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub cp: bool,
    pub tp: bool,
    pub min_eigenvalue: f64,
    pub tp_deviation: f64,
    pub cuts: Vec<CutReport>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.cp && self.tp && self.cuts.iter().all(|c| c.ppt)
    }
}

fn prod(d: &[usize]) -> usize {
    d.iter().product()
}

impl ChoiOperator {
    pub fn new(op: LabeledOperator, input_dims: &[usize], output_dims: &[usize]) -> Result<Self> {
        let n = prod(input_dims) * prod(output_dims);
        if op.dim() != n {
            return Err(BqtError::DimMismatch(format!(
                "Choi of dimension {} for inputs {:?} and outputs {:?}",
                op.dim(),
                input_dims,
                output_dims
            )));
        }
        let mut dims = input_dims.to_vec();
        dims.extend_from_slice(output_dims);
        let op = if dims.is_empty() { op.with_dims(&[1])? } else { op.with_dims(&dims)? };
        Ok(ChoiOperator { op, input_dims: input_dims.to_vec(), output_dims: output_dims.to_vec() })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    pub fn output_dims(&self) -> &[usize] {
        &self.output_dims
    }

    pub fn din(&self) -> usize {
        prod(&self.input_dims)
    }

    pub fn dout(&self) -> usize {
        prod(&self.output_dims)
    }

    /// Same operator with the factors grouped as one input and one output.
    fn flat(&self) -> LabeledOperator {
        self.op.with_dims(&[self.din(), self.dout()]).expect("consistent dims")
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = prod(dims);
        ChoiOperator::new(gamma(d), dims, dims).expect("identity dims")
    }

    /// Channel with Kraus operators given as row-major `dout x din` matrices.
    pub fn from_kraus(input_dims: &[usize], output_dims: &[usize], kraus: &[Vec<C64>]) -> Result<Self> {
        let (din, dout) = (prod(input_dims), prod(output_dims));
        let n = din * dout;
        let mut data = vec![ZERO; n * n];
        for k in kraus {
            if k.len() != din * dout {
                return Err(BqtError::DimMismatch("Kraus operator shape".into()));
            }
            // column vector of (I ⊗ K)|Γ>: entry (i, b) = K[b, i]
            for i in 0..din {
                for b in 0..dout {
                    let v = k[b * din + i];
                    if v == ZERO {
                        continue;
                    }
                    let row = (i * dout + b) * n;
                    for j in 0..din {
                        for c in 0..dout {
                            data[row + j * dout + c] += v * k[c * din + j].conj();
                        }
                    }
                }
            }
        }
        let mut dims = input_dims.to_vec();
        dims.extend_from_slice(output_dims);
        if dims.is_empty() {
            dims.push(1);
        }
        ChoiOperator::new(LabeledOperator::new(data, dims)?, input_dims, output_dims)
    }

    pub fn from_unitary(u: &LabeledOperator) -> Result<Self> {
        ChoiOperator::from_kraus(u.dims(), u.dims(), &[u.data().to_vec()])
    }

    /// Trace-and-replace channel ρ -> Tr[ρ] σ.
    pub fn replacer(input_dims: &[usize], sigma: &LabeledOperator) -> Result<Self> {
        let op = LabeledOperator::identity(&[prod(input_dims)]).kron(sigma);
        ChoiOperator::new(op, input_dims, sigma.dims())
    }

    /// Channel that discards its input and prepares `sigma` alongside the
    /// identity on `input_dims`: ρ -> ρ ⊗ σ.
    pub fn append_state(input_dims: &[usize], sigma: &LabeledOperator) -> Result<Self> {
        let id = ChoiOperator::identity(input_dims);
        let op = id.op.kron(sigma);
        let mut out = input_dims.to_vec();
        out.extend_from_slice(sigma.dims());
        ChoiOperator::new(op, input_dims, &out)
    }

    /// Tr over the listed input factors, identity on the rest.
    pub fn partial_trace_channel(input_dims: &[usize], traced: &[usize]) -> Result<Self> {
        let flags: Vec<bool> = (0..input_dims.len()).map(|k| traced.contains(&k)).collect();
        let kept: Vec<usize> = input_dims.iter().zip(&flags).filter(|(_, &t)| !t).map(|(&d, _)| d).collect();
        let (kept_idx, tr_idx) = crate::qmat::trace_split(input_dims, &flags);
        let din = prod(input_dims);
        let dout = prod(&kept);
        let ntr = din / dout;
        let kraus: Vec<Vec<C64>> = (0..ntr)
            .map(|t| {
                let mut k = vec![ZERO; dout * din];
                for i in 0..din {
                    if tr_idx[i] == t {
                        k[kept_idx[i] * din + i] = C64::new(1.0, 0.0);
                    }
                }
                k
            })
            .collect();
        ChoiOperator::from_kraus(input_dims, &kept, &kraus)
    }

    /// N(ρ) for ρ on [spectators..., inputs...]; the result is on
    /// [spectators..., outputs...].
    pub fn apply(&self, state: &LabeledOperator) -> Result<LabeledOperator> {
        let din = self.din();
        let sd = state.dims();
        let k = self.input_dims.len();
        let spect: Vec<usize> = if sd == self.input_dims.as_slice() || (k == 0 && state.dim() == 1) {
            vec![]
        } else if sd.len() >= k && sd[sd.len() - k..] == self.input_dims[..] {
            sd[..sd.len() - k].to_vec()
        } else if state.dim() == din {
            vec![]
        } else {
            return Err(BqtError::DimMismatch(format!(
                "state dims {:?} do not end with channel inputs {:?}",
                sd, self.input_dims
            )));
        };
        let s = prod(&spect);
        let dout = self.dout();
        let g = self.flat();
        let n_out = s * dout;
        let mut out = vec![ZERO; n_out * n_out];
        let gd = g.data();
        let gn = din * dout;
        for a in 0..s {
            for b in 0..s {
                for i in 0..din {
                    for j in 0..din {
                        let r = state.get(a * din + i, b * din + j);
                        if r == ZERO {
                            continue;
                        }
                        for x in 0..dout {
                            let grow = (i * dout + x) * gn + j * dout;
                            let orow = (a * dout + x) * n_out + b * dout;
                            for y in 0..dout {
                                out[orow + y] += r * gd[grow + y];
                            }
                        }
                    }
                }
            }
        }
        let mut dims = spect;
        dims.extend_from_slice(&self.output_dims);
        if dims.is_empty() {
            dims.push(1);
        }
        LabeledOperator::new(out, dims)
    }

    /// Applies the channel to the factors at `positions` of `state`; the
    /// outputs replace them at the end of the factor list.
    pub fn apply_on(&self, state: &LabeledOperator, positions: &[usize]) -> Result<LabeledOperator> {
        let count = state.num_subsystems();
        SubsystemSet::new(positions, count)?;
        let mut perm: Vec<usize> = (0..count).filter(|k| !positions.contains(k)).collect();
        perm.extend_from_slice(positions);
        self.apply(&state.permute(&perm)?)
    }

    /// Serial composition `second ∘ first`.
    pub fn compose(first: &ChoiOperator, second: &ChoiOperator) -> Result<ChoiOperator> {
        if first.dout() != second.din() {
            return Err(BqtError::DimMismatch(format!(
                "outputs {:?} do not feed inputs {:?}",
                first.output_dims, second.input_dims
            )));
        }
        let (r, d, e) = (first.din(), first.dout(), second.dout());
        let n1 = first.flat();
        let m1 = second.flat();
        let (nd, md) = (n1.data(), m1.data());
        let (nn, mn, on) = (r * d, d * e, r * e);
        let mut out = vec![ZERO; on * on];
        for a in 0..r {
            for b in 0..r {
                for x in 0..d {
                    for y in 0..d {
                        let v = nd[(a * d + x) * nn + b * d + y];
                        if v == ZERO {
                            continue;
                        }
                        for p in 0..e {
                            let mrow = (x * e + p) * mn + y * e;
                            let orow = (a * e + p) * on + b * e;
                            for q in 0..e {
                                out[orow + q] += v * md[mrow + q];
                            }
                        }
                    }
                }
            }
        }
        let mut dims = first.input_dims.clone();
        dims.extend_from_slice(&second.output_dims);
        if dims.is_empty() {
            dims.push(1);
        }
        ChoiOperator::new(LabeledOperator::new(out, dims)?, &first.input_dims, &second.output_dims)
    }

    /// Parallel composition with layout [in_a, in_b, out_a, out_b].
    pub fn tensor(a: &ChoiOperator, b: &ChoiOperator) -> Result<ChoiOperator> {
        let ka = [a.din(), a.dout()];
        let kb = [b.din(), b.dout()];
        let big = a.flat().kron(&b.flat());
        let big = big.with_dims(&[ka[0], ka[1], kb[0], kb[1]])?.permute(&[0, 2, 1, 3])?;
        let mut ins = a.input_dims.clone();
        ins.extend_from_slice(&b.input_dims);
        let mut outs = a.output_dims.clone();
        outs.extend_from_slice(&b.output_dims);
        ChoiOperator::new(big, &ins, &outs)
    }

    pub fn scale(&self, s: f64) -> ChoiOperator {
        ChoiOperator { op: self.op.scale(s), ..self.clone() }
    }

    pub fn add(&self, other: &ChoiOperator) -> Result<ChoiOperator> {
        if self.input_dims != other.input_dims || self.output_dims != other.output_dims {
            return Err(BqtError::DimMismatch("channel shapes differ".into()));
        }
        Ok(ChoiOperator { op: self.op.add(&other.op)?, ..self.clone() })
    }

    /// Deviation of Tr_out[Γ] from I_in.
    pub fn tp_deviation(&self) -> f64 {
        let marg = self.flat().ptrace(&[1]).expect("two factors");
        marg.max_abs_diff(&LabeledOperator::identity(&[self.din()]))
    }

    pub fn is_cp(&self, tol: f64) -> Result<bool> {
        self.op.is_psd(tol)
    }

    pub fn is_tp(&self, tol: f64) -> bool {
        self.tp_deviation() <= tol
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ChoiJson::from(self)).expect("Choi serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ChoiJson = serde_json::from_str(text).map_err(|e| BqtError::Parse(e.to_string()))?;
        ChoiOperator::try_from(j)
    }
}

/// Operator JSON plus the input and output factor lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiJson {
    #[serde(flatten)]
    pub op: OperatorJson,
    pub input_dims: Vec<usize>,
    pub output_dims: Vec<usize>,
}

impl From<&ChoiOperator> for ChoiJson {
    fn from(c: &ChoiOperator) -> Self {
        ChoiJson {
            op: OperatorJson::from(&c.op),
            input_dims: c.input_dims.clone(),
            output_dims: c.output_dims.clone(),
        }
    }
}

impl TryFrom<ChoiJson> for ChoiOperator {
    type Error = BqtError;

    fn try_from(j: ChoiJson) -> Result<Self> {
        let op = LabeledOperator::try_from(j.op)?;
        ChoiOperator::new(op, &j.input_dims, &j.output_dims)
    }
}

/// CP, TP and, for each cut of Choi factor positions, whether T_cut(Γ) ⪰ 0.
pub fn validate(choi: &ChoiOperator, ppt_cuts: &[SubsystemSet]) -> Result<ValidationReport> {
    let count = choi.op.num_subsystems();
    for cut in ppt_cuts {
        SubsystemSet::new(cut.indices(), count)?;
    }
    let min = choi.op.min_eigenvalue()?;
    let herm = choi.op.is_hermitian(HERMITIAN_TOL);
    let tp_dev = choi.tp_deviation();
    let mut cuts = Vec::new();
    for cut in ppt_cuts {
        let t = choi.op.partial_transpose(cut)?;
        let m = t.min_eigenvalue()?;
        cuts.push(CutReport { cut: cut.indices().to_vec(), min_eigenvalue: m, ppt: m >= -PSD_TOL });
    }
    Ok(ValidationReport {
        cp: herm && min >= -PSD_TOL,
        tp: tp_dev <= HERMITIAN_TOL,
        min_eigenvalue: min,
        tp_deviation: tp_dev,
        cuts,
    })
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(BqtError::InvalidParam("d must be at least 2".into()));
    }
    Ok(())
}

/// Unitary swap of two d-dimensional systems, layout [A, B, A', B'].
pub fn swap_channel_choi(d: usize) -> Result<ChoiOperator> {
    check_d(d)?;
    let f = crate::states::swap_operator(d)?;
    ChoiOperator::from_unitary(&f)
}

/// ρ -> (1/(d²-1)) Σ_{(z,x) ≠ (0,0)} W ρ W†.
pub fn gen_pauli_channel_choi(d: usize) -> Result<ChoiOperator> {
    check_d(d)?;
    let s = 1.0 / ((d * d - 1) as f64).sqrt();
    let mut kraus = Vec::new();
    for z in 0..d {
        for x in 0..d {
            if z == 0 && x == 0 {
                continue;
            }
            kraus.push(weyl_operator(z, x, d)?.scale(s).data().to_vec());
        }
    }
    ChoiOperator::from_kraus(&[d], &[d], &kraus)
}

/// Unitaries W^{z,x} indexed by the classical outcome `z * d + x`.
fn weyls(d: usize) -> Result<Vec<LabeledOperator>> {
    let mut out = Vec::with_capacity(d * d);
    for z in 0..d {
        for x in 0..d {
            out.push(weyl_operator(z, x, d)?);
        }
    }
    Ok(out)
}

/// Bell instrument on AÂ with a classical register: ω -> Σ Φ^{zx} ω Φ^{zx} ⊗ |zx><zx|.
fn bell_instrument(d: usize) -> Result<ChoiOperator> {
    let dd = d * d;
    let mut kraus = Vec::with_capacity(dd);
    let p = phi(d);
    for (k, w) in weyls(d)?.iter().enumerate() {
        let wi = w.kron(&LabeledOperator::identity(&[d]));
        let proj = wi.matmul(&p)?.matmul(&wi.adjoint())?;
        // K = Φ^{zx} ⊗ |k>, mapping AÂ -> AÂ C
        let mut m = vec![ZERO; dd * dd * dd];
        for r in 0..dd {
            for c in 0..dd {
                m[(r * dd + k) * dd + c] = proj.get(r, c);
            }
        }
        kraus.push(m);
    }
    ChoiOperator::from_kraus(&[d, d], &[d, d, dd], &kraus)
}

/// Measure-and-prepare copy of the classical register.
fn classical_channel(dim: usize) -> Result<ChoiOperator> {
    let kraus: Vec<Vec<C64>> = (0..dim)
        .map(|k| LabeledOperator::basis_projector(dim, k).data().to_vec())
        .collect();
    ChoiOperator::from_kraus(&[dim], &[dim], &kraus)
}

/// Bob's correction: C_B B -> B, ω -> Σ W^{zx} <zx|ω|zx> W^{zx}†.
fn correction(d: usize) -> Result<ChoiOperator> {
    let dd = d * d;
    let mut kraus = Vec::with_capacity(dd);
    for (k, w) in weyls(d)?.iter().enumerate() {
        let mut m = vec![ZERO; d * dd * d];
        for r in 0..d {
            for b in 0..d {
                m[r * (dd * d) + k * d + b] = w.get(r, b);
            }
        }
        kraus.push(m);
    }
    ChoiOperator::from_kraus(&[dd, d], &[d], &kraus)
}

/// Alice's side up to the classical register: append Φ_{ÂB}, measure AÂ,
/// discard AÂ. Result maps A -> C_A B.
fn teleport_front(d: usize) -> Result<ChoiOperator> {
    let dd = d * d;
    let prep = ChoiOperator::append_state(&[d], &phi(d))?; // A -> A Â B
    let measure = ChoiOperator::compose(
        &bell_instrument(d)?,
        &ChoiOperator::partial_trace_channel(&[d, d, dd], &[0, 1])?,
    )?; // AÂ -> C_A
    let alice = ChoiOperator::tensor(&measure, &ChoiOperator::identity(&[d]))?; // AÂB -> C_A B
    let sent = ChoiOperator::tensor(&classical_channel(dd)?, &ChoiOperator::identity(&[d]))?;
    ChoiOperator::compose(&ChoiOperator::compose(&prep, &alice)?, &sent)
}

/// Composition of preparation, Bell instrument, classical transfer and
/// correction; equals the identity channel on one qudit.
pub fn teleportation_choi(d: usize) -> Result<ChoiOperator> {
    check_d(d)?;
    if d > 3 {
        return Err(BqtError::TooLarge(format!("teleportation Choi for d = {d} exceeds desk scale")));
    }
    ChoiOperator::compose(&teleport_front(d)?, &correction(d)?)
}

/// The same pipeline with Bob ignoring the classical message.
pub fn teleportation_without_correction(d: usize) -> Result<ChoiOperator> {
    check_d(d)?;
    if d > 3 {
        return Err(BqtError::TooLarge(format!("teleportation Choi for d = {d} exceeds desk scale")));
    }
    let drop = ChoiOperator::partial_trace_channel(&[d * d, d], &[0])?;
    ChoiOperator::compose(&teleport_front(d)?, &drop)
}
