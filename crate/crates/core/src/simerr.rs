//! Simulation errors as semidefinite programs: diamond distance, channel
//! fidelity, and the PPT relaxations for bipartite, swap, multipartite and
//! controlled teleportation.
//!
//! Choi operators use the layout [inputs..., outputs...]. A PPT simulating
//! channel P acts on the inputs, the resource systems (hats) and produces the
//! outputs, with layout [inputs..., hats..., outputs...].

use crate::channels::{swap_channel_choi, ChoiOperator};
use crate::error::{BqtError, Result};
use crate::qmat::{LabeledOperator, OperatorJson, C64, PSD_TOL};
use crate::sdp::{solve_sdp, ConicProblem, ConicSolution, MatExpr, Residuals, Sense, SolverOptions, Status};
use crate::states::{ResourceDescriptor, ResourceState};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Lp,
    SdpPrimal,
    SdpDual,
}

#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub value: f64,
    pub method: Method,
    pub status: Status,
    /// Value certified from the other side of the duality (equal to `value`
    /// for closed forms).
    pub bound: f64,
    pub gap: f64,
    pub certificate: Vec<(String, LabeledOperator)>,
    /// Constraint residuals of the returned point (None for closed forms).
    pub residuals: Option<Residuals>,
    pub resource: Option<ResourceDescriptor>,
    pub target: String,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    method: Method,
    value: f64,
    gap: f64,
    bound: f64,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    residuals: Option<Residuals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resource: Option<&'a ResourceDescriptor>,
    target: &'a str,
    certificate: serde_json::Map<String, serde_json::Value>,
}

impl ErrorReport {
    pub fn closed_form(value: f64, method: Method, resource: Option<ResourceDescriptor>, target: &str) -> Self {
        ErrorReport {
            value,
            method,
            status: Status::Optimal,
            bound: value,
            gap: 0.0,
            certificate: vec![],
            residuals: None,
            resource,
            target: target.to_string(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn certificate(&self, name: &str) -> Option<&LabeledOperator> {
        self.certificate.iter().find(|(n, _)| n == name).map(|(_, op)| op)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let certificate = self
            .certificate
            .iter()
            .map(|(n, op)| (n.clone(), serde_json::to_value(OperatorJson::from(op)).expect("serializable")))
            .collect();
        serde_json::to_value(ReportJson {
            method: self.method,
            value: self.value,
            gap: self.gap,
            bound: self.bound,
            status: self.status,
            residuals: self.residuals,
            resource: self.resource.as_ref(),
            target: &self.target,
            certificate,
        })
        .expect("serializable")
    }
}

/// How an optimal objective maps to an error value.
#[derive(Clone, Copy)]
enum Scale {
    Identity,
    OneMinus,
    OneMinusSquare,
}

impl Scale {
    fn apply(self, v: f64) -> f64 {
        match self {
            Scale::Identity => v,
            Scale::OneMinus => 1.0 - v,
            Scale::OneMinusSquare => 1.0 - v.max(0.0).powi(2),
        }
    }
}

fn make_report(
    sol: &ConicSolution,
    scale: Scale,
    keep: &[&str],
    resource: Option<ResourceDescriptor>,
    target: &str,
) -> ErrorReport {
    let value = scale.apply(sol.primal_value);
    let bound = scale.apply(sol.dual_value);
    let certificate = keep
        .iter()
        .filter_map(|k| sol.blocks.get(*k).map(|op| (k.to_string(), op.clone())))
        .collect();
    ErrorReport {
        value,
        method: Method::SdpPrimal,
        status: sol.status,
        bound,
        gap: (value - bound).abs(),
        certificate,
        residuals: Some(sol.residuals),
        resource,
        target: target.to_string(),
    }
}

fn check_cap(dim: usize, opts: &SolverOptions) -> Result<()> {
    if dim * dim > opts.ambient_cap {
        return Err(BqtError::TooLarge(format!(
            "a {dim} x {dim} Hermitian variable has {} real parameters, above the cap of {}; \
             raise ambient_cap in the solver options to attempt it",
            dim * dim,
            opts.ambient_cap
        )));
    }
    Ok(())
}

fn check_same_shape(n: &ChoiOperator, m: &ChoiOperator) -> Result<()> {
    if n.input_dims() != m.input_dims() || n.output_dims() != m.output_dims() {
        return Err(BqtError::DimMismatch(format!(
            "channels {:?}->{:?} and {:?}->{:?}",
            n.input_dims(),
            n.output_dims(),
            m.input_dims(),
            m.output_dims()
        )));
    }
    if n.input_dims().is_empty() {
        return Err(BqtError::DimMismatch("channels need at least one input system".into()));
    }
    Ok(())
}

fn output_positions(c: &ChoiOperator) -> Vec<usize> {
    let k = c.input_dims().len();
    (k..k + c.output_dims().len()).collect()
}

fn target_name(c: &ChoiOperator) -> String {
    format!("channel {:?}->{:?}", c.input_dims(), c.output_dims())
}

fn one() -> MatExpr {
    MatExpr::constant(&LabeledOperator::scalar(1.0))
}

/// Unitary whose leading `r` columns span the range of the PSD operator `g`.
/// Real when `g` is real.
fn range_frame(g: &LabeledOperator) -> Result<(LabeledOperator, usize)> {
    let n = g.dim();
    let (vals, vecs): (Vec<f64>, Vec<Vec<C64>>) = if g.data().iter().all(|v| v.im == 0.0) {
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (g.get(i, j).re + g.get(j, i).re));
        let evd = m
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| BqtError::Numerical(format!("eigendecomposition: {e:?}")))?;
        let u = evd.U();
        (
            evd.S().column_vector().iter().copied().collect(),
            (0..n).map(|k| (0..n).map(|i| C64::new(u[(i, k)], 0.0)).collect()).collect(),
        )
    } else {
        let (vals, u) = g.eigh()?;
        (vals, (0..n).map(|k| (0..n).map(|i| u[(i, k)]).collect()).collect())
    };
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let r = order.iter().filter(|&&k| vals[k] > 1e-10 * top).count();
    let u = LabeledOperator::from_fn(g.dims(), |i, j| vecs[order[j]][i]);
    Ok((u, r))
}

/// Adds [[G, Q†], [Q, S]] ⪰ 0 restricted to the range of G, with Q
/// parametrized as Q'U† where only the first rank(G) columns of Q' are free.
/// A rank-deficient G otherwise leaves the block without interior points.
/// Returns Q and U†.
fn add_fidelity_block(prob: &mut ConicProblem, g: &LabeledOperator, s: &MatExpr) -> Result<(MatExpr, LabeledOperator)> {
    let (u, r) = range_frame(g)?;
    let ud = u.adjoint();
    let n = g.dim();
    let gr = ud.matmul(g)?.matmul(&u)?.hermitian_part();
    let qp = prob.complex_cols("Q", g.dims(), r)?;
    let block = MatExpr::block2x2(&MatExpr::constant(&gr), &qp.adjoint(), &qp, s)?;
    let keep: Vec<usize> = (0..r).chain(n..2 * n).collect();
    prob.add_psd("fidelity block", block.principal(&keep)?);
    Ok((qp.mul_right(&ud)?, ud))
}

/// Normalized diamond distance ½‖N − M‖⋄.
pub fn diamond_distance(n: &ChoiOperator, m: &ChoiOperator, opts: &SolverOptions) -> Result<ErrorReport> {
    check_same_shape(n, m)?;
    check_cap(n.op().dim(), opts)?;
    let dims = n.op().dims().to_vec();
    let mut p = ConicProblem::new();
    let mu = p.scalar("mu", true)?;
    let z = p.hermitian("Z", &dims, true)?;
    let diff = n.op().sub(m.op())?;
    p.add_psd("Z - (N - M)", z.sub(&MatExpr::constant(&diff))?);
    p.add_psd("mu I - Tr_out Z", mu.times_identity(n.input_dims())?.sub(&z.partial_trace(&output_positions(n))?)?);
    p.set_objective(Sense::Min, mu.re_trace());
    let sol = solve_sdp(&p, opts)?;
    Ok(make_report(&sol, Scale::Identity, &["Z"], None, &target_name(n)))
}

#[derive(Debug, Clone)]
pub struct FidelityReport {
    /// F(N, M) from the λ program.
    pub fidelity: f64,
    /// F(N, M) from the (ρ, W, Z) program.
    pub primal_fidelity: f64,
    /// Status of the λ program, which supplies `fidelity`.
    pub status: Status,
    /// Status of the cross-check. Its optimal face is unbounded in W and Z
    /// when Γ^N is rank deficient, so it often ends as inaccurate near 1e-5.
    pub primal_status: Status,
    /// Difference of the two root fidelities.
    pub gap: f64,
    pub q: LabeledOperator,
    pub input_state: LabeledOperator,
}

/// Channel fidelity, solved both as sup λ and as the ½ inf Tr[WΓ^N] + Tr[ZΓ^M]
/// program over input states.
pub fn channel_fidelity(n: &ChoiOperator, m: &ChoiOperator, opts: &SolverOptions) -> Result<FidelityReport> {
    check_same_shape(n, m)?;
    check_cap(2 * n.op().dim(), opts)?;
    let dims = n.op().dims().to_vec();
    let ins = n.input_dims().to_vec();

    let mut p = ConicProblem::new();
    let lambda = p.scalar("lambda", true)?;
    let (q, ud) = add_fidelity_block(&mut p, m.op(), &MatExpr::constant(n.op()))?;
    p.add_psd("Re Tr_out Q - lambda I", q.partial_trace(&output_positions(n))?.sub(&lambda.times_identity(&ins)?)?);
    p.set_objective(Sense::Max, lambda.re_trace());
    let dual = solve_sdp(&p, opts)?;

    let mut r = ConicProblem::new();
    let rho = r.hermitian("rho", &ins, true)?;
    r.add_eq("Tr rho = 1", rho.trace().sub(&one())?);
    let w = r.hermitian("W", &dims, false)?;
    let z = r.hermitian("Z", &dims, false)?;
    let off = rho.kron_const(&LabeledOperator::identity(n.output_dims()));
    r.add_psd("block", MatExpr::block2x2(&w, &off, &off, &z)?);
    r.set_objective(Sense::Min, w.re_inner(n.op())?.add(&z.re_inner(m.op())?).scale(0.5));
    let primal = solve_sdp(&r, opts)?;

    let l = dual.primal_value.max(0.0);
    Ok(FidelityReport {
        fidelity: l * l,
        primal_fidelity: primal.primal_value.max(0.0).powi(2),
        status: dual.status,
        primal_status: primal.status,
        gap: (l - primal.primal_value).abs(),
        q: dual.block("Q")?.matmul(&ud)?,
        input_state: primal.block("rho")?.clone(),
    })
}

/// Nonempty party subsets S with |S| ≤ M/2; at |S| = M/2 only the
/// lexicographically smaller of S and its complement is kept.
pub fn ppt_cuts(parties: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1u32 << parties) {
        let s: Vec<usize> = (0..parties).filter(|&i| mask & (1 << i) != 0).collect();
        if 2 * s.len() > parties {
            continue;
        }
        if 2 * s.len() == parties {
            let comp: Vec<usize> = (0..parties).filter(|i| !s.contains(i)).collect();
            if comp < s {
                continue;
            }
        }
        out.push(s);
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Builds the PPT simulation program for a Choi operator over `m` parties,
/// a resource on `m` hat systems and the given party cuts.
/// Also returns U† from [`add_fidelity_block`] for the infidelity form.
fn ppt_program(
    choi: &ChoiOperator,
    rho: &LabeledOperator,
    cuts: &[Vec<usize>],
    infidelity: bool,
) -> Result<(ConicProblem, Option<LabeledOperator>)> {
    let m = choi.input_dims().len();
    if choi.output_dims().len() != m || rho.num_subsystems() != m {
        return Err(BqtError::DimMismatch(format!(
            "{m} input systems need {m} output systems and an {m}-partite resource, got {:?} and {:?}",
            choi.output_dims(),
            rho.dims()
        )));
    }
    let ins = choi.input_dims().to_vec();
    let outs = choi.output_dims().to_vec();
    let hats = rho.dims().to_vec();
    let pdims: Vec<usize> = ins.iter().chain(&hats).chain(&outs).copied().collect();
    let in_hats: Vec<usize> = ins.iter().chain(&hats).copied().collect();

    let mut prob = ConicProblem::new();
    let p = prob.hermitian("P", &pdims, true)?;
    for cut in cuts {
        let idx: Vec<usize> = cut.iter().flat_map(|&s| [s, m + s, 2 * m + s]).collect();
        let mut idx = idx;
        idx.sort_unstable();
        prob.add_psd(&format!("T{cut:?}(P)"), p.partial_transpose(&idx)?);
    }
    let out_pos: Vec<usize> = (2 * m..3 * m).collect();
    prob.add_eq(
        "Tr_out P = I",
        p.partial_trace(&out_pos)?.sub(&MatExpr::constant(&LabeledOperator::identity(&in_hats)))?,
    );
    let hat_pos: Vec<usize> = (m..2 * m).collect();
    let sim = p.contract(&rho.transpose(), &hat_pos)?;
    let gamma = MatExpr::constant(choi.op());
    let choi_outs: Vec<usize> = (m..2 * m).collect();
    if infidelity {
        let lambda = prob.scalar("lambda", true)?;
        let (q, ud) = add_fidelity_block(&mut prob, choi.op(), &sim)?;
        prob.add_psd("Re Tr_out Q - lambda I", q.partial_trace(&choi_outs)?.sub(&lambda.times_identity(&ins)?)?);
        prob.set_objective(Sense::Max, lambda.re_trace());
        return Ok((prob, Some(ud)));
    } else {
        let mu = prob.scalar("mu", true)?;
        let z = prob.hermitian("Z", choi.op().dims(), true)?;
        prob.add_psd("Z - (N - sim)", z.sub(&gamma)?.add(&sim)?);
        prob.add_psd("mu I - Tr_out Z", mu.times_identity(&ins)?.sub(&z.partial_trace(&choi_outs)?)?);
        prob.set_objective(Sense::Min, mu.re_trace());
    }
    Ok((prob, None))
}

/// Report for a [`ppt_program`] solve, with Q mapped back from Q'.
fn ppt_report(
    sol: &ConicSolution,
    ud: Option<LabeledOperator>,
    resource: Option<ResourceDescriptor>,
    target: &str,
) -> Result<ErrorReport> {
    let Some(ud) = ud else {
        return Ok(make_report(sol, Scale::Identity, &["P", "Z"], resource, target));
    };
    let mut rep = make_report(sol, Scale::OneMinusSquare, &["P", "Q"], resource, target);
    for (name, op) in rep.certificate.iter_mut() {
        if name == "Q" {
            *op = op.matmul(&ud)?;
        }
    }
    Ok(rep)
}

fn check_channel(choi: &ChoiOperator) -> Result<()> {
    if !choi.is_cp(PSD_TOL)? || !choi.is_tp(1e-8) {
        return Err(BqtError::InvalidParam("target must be a CPTP Choi operator".into()));
    }
    Ok(())
}

fn check_bipartite(choi: &ChoiOperator) -> Result<()> {
    if choi.input_dims().len() != 2 || choi.output_dims().len() != 2 {
        return Err(BqtError::DimMismatch(format!(
            "bipartite channel expected, got {:?}->{:?}",
            choi.input_dims(),
            choi.output_dims()
        )));
    }
    check_channel(choi)
}

fn p_dim(choi: &ChoiOperator, rho: &LabeledOperator) -> usize {
    choi.din() * choi.dout() * rho.dim()
}

/// PPT simulation error of a bipartite channel AB -> A'B' in diamond distance.
/// With `use_dual`, the explicit dual program is also solved and its optimum
/// reported as `bound`.
pub fn eppt_bipartite(
    choi: &ChoiOperator,
    rho: &ResourceState,
    use_dual: bool,
    opts: &SolverOptions,
) -> Result<ErrorReport> {
    check_bipartite(choi)?;
    let r = rho.materialize()?;
    check_cap(p_dim(choi, &r), opts)?;
    let (prob, ud) = ppt_program(choi, &r, &[vec![1]], false)?;
    let sol = solve_sdp(&prob, opts)?;
    let mut rep = ppt_report(&sol, ud, Some(rho.descriptor()), &target_name(choi))?;
    if use_dual {
        let d = eppt_bipartite_dual(choi, rho, opts)?;
        rep.bound = d.value;
        rep.gap = (rep.value - d.value).abs();
        if d.status != Status::Optimal && rep.status == Status::Optimal {
            rep.status = d.status;
        }
    }
    Ok(rep)
}

/// The dual program: sup Tr[Γ X2] − Tr[W] over X1, X2, X3 ⪰ 0 and Hermitian W.
pub fn eppt_bipartite_dual(choi: &ChoiOperator, rho: &ResourceState, opts: &SolverOptions) -> Result<ErrorReport> {
    check_bipartite(choi)?;
    let r = rho.materialize()?;
    check_cap(p_dim(choi, &r), opts)?;
    let ins = choi.input_dims().to_vec();
    let outs = choi.output_dims().to_vec();
    let hats = r.dims().to_vec();
    let pdims: Vec<usize> = ins.iter().chain(&hats).chain(&outs).copied().collect();
    let in_hats: Vec<usize> = ins.iter().chain(&hats).copied().collect();

    let mut p = ConicProblem::new();
    let x1 = p.hermitian("X1", &ins, true)?;
    let x2 = p.hermitian("X2", choi.op().dims(), true)?;
    let x3 = p.hermitian("X3", &pdims, true)?;
    let w = p.hermitian("W", &in_hats, false)?;
    p.add_psd("1 - Tr X1", one().sub(&x1.trace())?);
    let id_out = LabeledOperator::identity(&outs);
    p.add_psd("X1 (x) I - X2", x1.kron_const(&id_out).sub(&x2)?);
    // X2 ⊗ T(ρ) arrives as [A, B, A', B', Â, B̂]
    let x2r = x2.kron_const(&r.transpose()).permute(&[0, 1, 4, 5, 2, 3])?;
    let lhs = w.kron_const(&id_out).sub(&x2r)?.sub(&x3.partial_transpose(&[1, 3, 5])?)?;
    p.add_psd("W (x) I - X2 (x) T(rho) - T(X3)", lhs);
    p.set_objective(Sense::Max, x2.re_inner(choi.op())?.add(&w.re_trace().scale(-1.0)));
    let sol = solve_sdp(&p, opts)?;
    let mut rep = make_report(&sol, Scale::Identity, &["X1", "X2", "W"], Some(rho.descriptor()), &target_name(choi));
    rep.method = Method::SdpDual;
    Ok(rep)
}

/// PPT simulation error of a bipartite channel in channel infidelity.
pub fn eppt_infid_bipartite(choi: &ChoiOperator, rho: &ResourceState, opts: &SolverOptions) -> Result<ErrorReport> {
    check_bipartite(choi)?;
    let r = rho.materialize()?;
    check_cap(p_dim(choi, &r).max(2 * choi.op().dim()), opts)?;
    let (prob, ud) = ppt_program(choi, &r, &[vec![1]], true)?;
    let sol = solve_sdp(&prob, opts)?;
    ppt_report(&sol, ud, Some(rho.descriptor()), &target_name(choi))
}

/// PPT simulation error of an M-party channel (M ≤ 3), in diamond distance
/// or, with `infidelity`, in channel infidelity.
pub fn eppt_multipartite(
    choi: &ChoiOperator,
    rho: &LabeledOperator,
    infidelity: bool,
    opts: &SolverOptions,
) -> Result<ErrorReport> {
    let m = choi.input_dims().len();
    if !(2..=3).contains(&m) {
        return Err(BqtError::InvalidParam(format!("{m} parties; supported are 2 and 3")));
    }
    check_channel(choi)?;
    rho.check_state(PSD_TOL)?;
    check_cap(p_dim(choi, rho), opts)?;
    let (prob, ud) = ppt_program(choi, rho, &ppt_cuts(m), infidelity)?;
    let sol = solve_sdp(&prob, opts)?;
    let resource = Some(ResourceDescriptor::Custom { dims: rho.dims().to_vec() });
    ppt_report(&sol, ud, resource, &target_name(choi))
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(BqtError::InvalidParam("d must be at least 2".into()));
    }
    Ok(())
}

/// 1 − sup Tr[ρK] over POVMs {K, L, M, N} obeying the swap-simulation
/// inequalities under T_S for each S in `transposed`, plus T_S(X) ⪰ 0 for
/// every POVM element and S in `ppt_each`.
fn povm_program(rho: &LabeledOperator, d: usize, transposed: &[usize], ppt_each: &[usize]) -> Result<ConicProblem> {
    let dims = rho.dims().to_vec();
    let mut p = ConicProblem::new();
    let k = p.hermitian("K", &dims, true)?;
    let l = p.hermitian("L", &dims, true)?;
    let m = p.hermitian("M", &dims, true)?;
    let n = p.hermitian("N", &dims, true)?;
    let df = d as f64;
    let a = 1.0 / (df + 1.0);
    let b = 1.0 / (df - 1.0);
    let c1 = k.add(&l.scale(a))?.add(&m.scale(a))?.add(&n.scale(a * a))?;
    let c2 = l.add(&n.scale(a))?.scale(b).sub(&k.add(&m.scale(a))?)?;
    let c3 = m.add(&n.scale(a))?.scale(b).sub(&k.add(&l.scale(a))?)?;
    let c4 = k.add(&n.scale(b * b))?.sub(&l.add(&m)?.scale(b))?;
    for &s in transposed {
        for (name, c) in [("c1", &c1), ("c2", &c2), ("c3", &c3), ("c4", &c4)] {
            p.add_psd(&format!("T{s} {name}"), c.partial_transpose(&[s])?);
        }
    }
    for &s in ppt_each {
        for (name, x) in [("K", &k), ("L", &l), ("M", &m), ("N", &n)] {
            p.add_psd(&format!("T{s} {name}"), x.partial_transpose(&[s])?);
        }
    }
    let sum = k.add(&l)?.add(&m)?.add(&n)?;
    p.add_eq("K + L + M + N = I", sum.sub(&MatExpr::constant(&LabeledOperator::identity(&dims)))?);
    p.set_objective(Sense::Max, k.re_inner(rho)?);
    Ok(p)
}

/// PPT simulation error of the d-dimensional swap channel with a bipartite
/// resource, through the POVM form.
pub fn eppt_swap(rho: &ResourceState, d: usize, opts: &SolverOptions) -> Result<ErrorReport> {
    check_d(d)?;
    let r = rho.materialize()?;
    check_cap(r.dim(), opts)?;
    let prob = povm_program(&r, d, &[1], &[])?;
    let sol = solve_sdp(&prob, opts)?;
    Ok(make_report(&sol, Scale::OneMinus, &["K", "L", "M", "N"], Some(rho.descriptor()), &format!("swap d={d}")))
}

/// Controlled teleportation: swap simulation with a tripartite resource on
/// [Â, B̂, Ĉ], where Charlie's output is trivial.
pub fn eppt_bcqt(rho: &LabeledOperator, d: usize, opts: &SolverOptions) -> Result<ErrorReport> {
    check_d(d)?;
    if rho.num_subsystems() != 3 {
        return Err(BqtError::DimMismatch(format!("tripartite resource expected, got dims {:?}", rho.dims())));
    }
    rho.check_state(PSD_TOL)?;
    check_cap(rho.dim(), opts)?;
    let prob = povm_program(rho, d, &[0, 1], &[2])?;
    let sol = solve_sdp(&prob, opts)?;
    Ok(make_report(
        &sol,
        Scale::OneMinus,
        &["K", "L", "M", "N"],
        Some(ResourceDescriptor::Custom { dims: rho.dims().to_vec() }),
        &format!("controlled swap d={d}"),
    ))
}

/// Smallest infidelity 1 − F(Θ(N), K) over superchannels Θ with Θ(M) = L.
pub fn channel_box_error(
    n: &ChoiOperator,
    m: &ChoiOperator,
    k: &ChoiOperator,
    l: &ChoiOperator,
    opts: &SolverOptions,
) -> Result<ErrorReport> {
    check_same_shape(n, m)?;
    check_same_shape(k, l)?;
    let (da, db, dc, dd) = (n.din(), n.dout(), k.din(), k.dout());
    check_cap(da * db * dc * dd, opts)?;
    let mut p = ConicProblem::new();
    // layout [C, B, A, D]
    let theta = p.hermitian("Theta", &[dc, db, da, dd], true)?;
    p.add_eq(
        "Theta_CB = I",
        theta.partial_trace(&[2, 3])?.sub(&MatExpr::constant(&LabeledOperator::identity(&[dc, db])))?,
    );
    let ib = LabeledOperator::identity(&[db]).scale(1.0 / db as f64);
    let rhs = theta.partial_trace(&[1, 3])?.kron_const(&ib).permute(&[0, 2, 1])?;
    p.add_eq("Theta_CBA = Theta_CA (x) I/dB", theta.partial_trace(&[3])?.sub(&rhs)?);
    let convert = |c: &ChoiOperator| -> Result<MatExpr> {
        let t = c.op().with_dims(&[da, db])?.transpose().permute(&[1, 0])?;
        theta.contract(&t, &[1, 2])
    };
    let lc = l.op().with_dims(&[dc, dd])?;
    p.add_eq("Theta(M) = L", convert(m)?.sub(&MatExpr::constant(&lc))?);
    let lambda = p.scalar("lambda", true)?;
    let (q, ud) = add_fidelity_block(&mut p, &k.op().with_dims(&[dc, dd])?, &convert(n)?)?;
    p.add_psd("Re Tr_D Q - lambda I", q.partial_trace(&[1])?.sub(&lambda.times_identity(&[dc])?)?);
    p.set_objective(Sense::Max, lambda.re_trace());
    let sol = solve_sdp(&p, opts)?;
    let mut rep = make_report(&sol, Scale::OneMinusSquare, &["Theta", "Q"], None, "channel box");
    for (name, op) in rep.certificate.iter_mut() {
        if name == "Q" {
            *op = op.matmul(&ud)?;
        }
    }
    Ok(rep)
}

/// Convenience: the general bipartite program evaluated on the swap channel.
pub fn eppt_bipartite_swap(rho: &ResourceState, d: usize, use_dual: bool, opts: &SolverOptions) -> Result<ErrorReport> {
    eppt_bipartite(&swap_channel_choi(d)?, rho, use_dual, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::max_entangled;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn depolarizer(d: usize) -> ChoiOperator {
        ChoiOperator::replacer(&[d], &LabeledOperator::identity(&[d]).scale(1.0 / d as f64)).unwrap()
    }

    #[test]
    fn cuts_are_nonredundant() {
        assert_eq!(ppt_cuts(2), vec![vec![0]]);
        assert_eq!(ppt_cuts(3), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(ppt_cuts(4).len(), 4 + 3);
    }

    #[test]
    fn diamond_of_equal_channels_is_zero() {
        let s = swap_channel_choi(2).unwrap();
        let r = diamond_distance(&s, &s, &opts()).unwrap();
        assert!(r.is_optimal());
        assert!(r.value.abs() < 1e-7);
    }

    #[test]
    fn identity_against_depolarizer() {
        let id = ChoiOperator::identity(&[2]);
        let dep = depolarizer(2);
        let r = diamond_distance(&id, &dep, &opts()).unwrap();
        assert!(r.is_optimal());
        assert!((r.value - 0.75).abs() < 1e-6, "{}", r.value);
        let f = channel_fidelity(&id, &dep, &opts()).unwrap();
        assert_eq!(f.status, Status::Optimal);
        assert!((f.fidelity - 0.25).abs() < 1e-6);
        assert!((f.primal_fidelity - 0.25).abs() < 1e-4);
        let same = channel_fidelity(&id, &id, &opts()).unwrap();
        assert!((same.fidelity - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mismatched_channels_are_rejected() {
        let a = ChoiOperator::identity(&[2]);
        let b = ChoiOperator::identity(&[3]);
        assert!(matches!(diamond_distance(&a, &b, &opts()), Err(BqtError::DimMismatch(_))));
    }

    #[test]
    fn swap_without_resource() {
        let r = eppt_swap(&ResourceState::None, 2, &opts()).unwrap();
        assert!(r.is_optimal());
        assert!((r.value - 0.75).abs() < 1e-7);
        let r = eppt_swap(&ResourceState::None, 3, &opts()).unwrap();
        assert!((r.value - 8.0 / 9.0).abs() < 1e-7);
    }

    #[test]
    fn swap_with_werner_and_isotropic() {
        let r = eppt_swap(&ResourceState::werner(0.3, 3).unwrap(), 2, &opts()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-6);
        let r = eppt_swap(&ResourceState::isotropic(0.9, 2).unwrap(), 2, &opts()).unwrap();
        assert!((r.value - 0.55).abs() < 1e-6);
        let sum = ["K", "L", "M", "N"]
            .iter()
            .map(|n| r.certificate(n).unwrap().clone())
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap();
        assert!(sum.max_abs_diff(&LabeledOperator::identity(&[2, 2])) < 1e-7);
    }

    #[test]
    fn general_program_without_resource() {
        let r = eppt_bipartite_swap(&ResourceState::None, 2, true, &opts()).unwrap();
        assert!(r.is_optimal());
        assert!((r.value - 0.75).abs() < 1e-6, "{}", r.value);
        assert!(r.gap < 1e-6);
        let f = eppt_infid_bipartite(&swap_channel_choi(2).unwrap(), &ResourceState::None, &opts()).unwrap();
        assert!((f.value - 0.75).abs() < 1e-6, "{}", f.value);
    }

    #[test]
    fn tripartite_without_resource() {
        let swap = swap_channel_choi(2).unwrap();
        let c = ChoiOperator::identity(&[1]);
        let choi = ChoiOperator::tensor(&swap, &c).unwrap();
        let rho = LabeledOperator::scalar(1.0).with_dims(&[1, 1, 1]).unwrap();
        let r = eppt_multipartite(&choi, &rho, false, &opts()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-6, "{}", r.value);
        let r = eppt_bcqt(&rho, 2, &opts()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-7);
    }

    #[test]
    fn controlled_with_uncorrelated_charlie() {
        let phi = max_entangled(2, true).unwrap();
        let rho = phi.kron(&LabeledOperator::identity(&[2]).scale(0.5));
        let r = eppt_bcqt(&rho, 2, &opts()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn identity_superchannel() {
        let id = ChoiOperator::identity(&[2]);
        let dep = depolarizer(2);
        let r = channel_box_error(&id, &dep, &id, &dep, &opts()).unwrap();
        assert!(r.is_optimal());
        assert!(r.value.abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn oversized_program_is_refused() {
        let o = SolverOptions { ambient_cap: 100, ..Default::default() };
        let e = eppt_bipartite_swap(&ResourceState::None, 2, false, &o);
        assert!(matches!(e, Err(BqtError::TooLarge(_))));
    }

    #[test]
    fn report_json_has_flattened_certificate() {
        let r = eppt_swap(&ResourceState::None, 2, &opts()).unwrap();
        let j = r.to_json();
        assert_eq!(j["method"], "sdp-primal");
        assert!(j["certificate"]["K"]["re"].is_array());
        assert_eq!(j["resource"]["kind"], "none");
    }
}
