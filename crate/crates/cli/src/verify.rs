//! The verification suite. Each check compares independent routes to the same
//! number (closed form, LP, SDP) or tests a structural identity.

use crate::args::VerifyArgs;
use crate::{solver_options, CliError, CliResult};
use bqt_core::analytic::{
    build_isotropic_lp, build_no_resource_lp, build_werner_lp, gadc_error, gadc_twirled_error, isotropic_dual_point,
    isotropic_error, isotropic_primal_point, lp_error, no_resource_error, no_resource_points, werner_dual_point,
    werner_error, werner_primal_point, PiecewiseParams, Regime,
};
use bqt_core::channels::{swap_channel_choi, teleportation_choi, ChoiOperator};
use bqt_core::protocols::{kpf16_error, kpf16_fidelity, kpf16_overlap, kpf16_second_choi, single_ebit_scheme_error, Kpf16Params};
use bqt_core::random::{density, rng, uniform};
use bqt_core::sdp::{check_lp_dual_feasible, check_lp_feasible, LpProblem, SolverOptions};
use bqt_core::simerr::{
    channel_fidelity, diamond_distance, eppt_bcqt, eppt_bipartite, eppt_infid_bipartite, eppt_swap, ErrorReport,
};
use bqt_core::states::{
    isotropic_state, isotropic_twirl, max_entangled, sym_antisym_projectors, werner_state, werner_twirl, ResourceState,
};
use bqt_core::LabeledOperator;
use rand::Rng;
use serde::Serialize;
use std::fmt::Display;
use std::time::Instant;

pub struct CheckDef {
    pub id: &'static str,
    pub title: &'static str,
    /// Wall-clock budget in seconds, part of the pass condition.
    pub limit_secs: Option<f64>,
    run: fn(&mut Ctx) -> bqt_core::Result<()>,
}

pub const CHECKS: &[CheckDef] = &[
    CheckDef { id: "no-resource", title: "no-resource error 1 - 1/d^2 by closed form, LP and SDP", limit_secs: Some(5.0), run: no_resource },
    CheckDef { id: "isotropic-grid", title: "isotropic resources: closed form = LP = SDP", limit_secs: Some(60.0), run: isotropic_grid },
    CheckDef { id: "werner-grid", title: "Werner resources: closed form = LP = SDP", limit_secs: None, run: werner_grid },
    CheckDef { id: "gadc", title: "GADC resources: SDP against the closed form", limit_secs: Some(120.0), run: gadc },
    CheckDef { id: "kpf16", title: "KPF16 protocols: fidelity, diamond error, lower bound", limit_secs: None, run: kpf16 },
    CheckDef { id: "error-measure-equality", title: "swap simulation: diamond = infidelity", limit_secs: None, run: error_measure_equality },
    CheckDef { id: "sdp-consistency", title: "general SDP = POVM SDP; primal = dual", limit_secs: None, run: sdp_consistency },
    CheckDef { id: "lp-feasible-points", title: "quoted LP points are feasible", limit_secs: None, run: lp_feasible_points },
    CheckDef { id: "bcqt", title: "controlled teleportation reductions", limit_secs: None, run: bcqt },
    CheckDef { id: "infrastructure", title: "teleportation Choi, twirls, partial transpose", limit_secs: None, run: infrastructure },
];

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub comparisons: usize,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

struct Ctx<'a> {
    opts: &'a SolverOptions,
    comparisons: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Ctx<'_> {
    fn ok(&mut self, cond: bool, what: impl FnOnce() -> String) -> bool {
        self.comparisons += 1;
        if !cond {
            self.failures.push(what());
        }
        cond
    }

    fn close(&mut self, label: impl Display, got: f64, want: f64, tol: f64) -> bool {
        let diff = (got - want).abs();
        self.ok(diff <= tol, || format!("{label}: got {got:.10}, want {want:.10} (|diff| {diff:.2e} > {tol:.0e})"))
    }

    /// Records a failure with the solver diagnostics unless `r` is optimal.
    fn solved(&mut self, label: impl Display, r: &ErrorReport) -> bool {
        self.ok(r.is_optimal(), || {
            let res = r
                .residuals
                .map_or(String::new(), |x| format!(", max equality residual {:.2e}, min eigenvalue {:.2e}", x.max_eq, x.min_eig));
            let status = format!("{:?}", r.status).to_lowercase();
            format!("{label}: status {status}, value {:.10}, gap {:.2e}{res}", r.value, r.gap)
        })
    }

    fn report(&mut self, label: impl Display + Clone, r: &ErrorReport, want: f64, tol: f64) {
        if self.solved(label.clone(), r) {
            self.close(label, r.value, want, tol);
        }
    }
}

fn linspace(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn no_resource(c: &mut Ctx) -> bqt_core::Result<()> {
    for d in [2, 3] {
        let want = 1.0 - 1.0 / (d * d) as f64;
        c.close(format!("d={d} analytic"), no_resource_error(d)?, want, 1e-6);
        c.report(format!("d={d} lp"), &lp_error(&build_no_resource_lp(d)?, None, d, c.opts)?, want, 1e-6);
        c.report(format!("d={d} sdp"), &eppt_swap(&ResourceState::None, d, c.opts)?, want, 1e-6);
    }
    Ok(())
}

fn isotropic_grid(c: &mut Ctx) -> bqt_core::Result<()> {
    for f in [0.0, 0.25, 0.5, 0.75, 0.9, 1.0] {
        for da in [2, 3, 4] {
            let a = isotropic_error(f, da, 2)?;
            c.report(format!("F={f} dA={da} lp"), &lp_error(&build_isotropic_lp(f, da, 2)?, None, 2, c.opts)?, a, 1e-5);
            let sdp = eppt_swap(&ResourceState::isotropic(f, da)?, 2, c.opts)?;
            c.report(format!("F={f} dA={da} sdp"), &sdp, a, 1e-5);
            if f == 1.0 && da == 2 {
                c.close("single ebit, closed form", a, 0.5, 1e-12);
                c.close("single ebit, sdp", sdp.value, 0.5, 1e-5);
                c.close("single ebit, twirl-and-teleport", single_ebit_scheme_error(2)?, 0.5, 1e-10);
            }
        }
    }
    Ok(())
}

fn werner_grid(c: &mut Ctx) -> bqt_core::Result<()> {
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for da in [2, 3] {
            let a = werner_error(p, da, 2)?;
            c.report(format!("p={p} dA={da} lp"), &lp_error(&build_werner_lp(p, da, 2)?, None, 2, c.opts)?, a, 1e-5);
            c.report(format!("p={p} dA={da} sdp"), &eppt_swap(&ResourceState::werner(p, da)?, 2, c.opts)?, a, 1e-5);
        }
    }
    for da in [2, 3] {
        let pp = PiecewiseParams::werner(0.5, da, 2)?;
        let (lo, hi) = (pp.branch(Regime::WernerSeparable), pp.branch(Regime::WernerEntangled));
        c.close(format!("branches at p=1/2, dA={da}"), hi, lo, 1e-12);
    }
    Ok(())
}

fn gadc(c: &mut Ctx) -> bqt_core::Result<()> {
    let mut twirled_worst: f64 = 0.0;
    for gamma in linspace(5) {
        for n in linspace(5) {
            let r = eppt_swap(&ResourceState::gadc(gamma, n)?, 2, c.opts)?;
            if !c.solved(format!("gamma={gamma} N={n}"), &r) {
                continue;
            }
            c.close(format!("gamma={gamma} N={n}"), r.value, gadc_error(gamma, n)?, 1e-4);
            if gamma == 0.0 {
                c.close(format!("gamma=0 N={n} is noiseless"), r.value, 0.0, 1e-6);
            }
            twirled_worst = twirled_worst.max((r.value - gadc_twirled_error(gamma, n)?).abs());
        }
    }
    c.notes.push(format!("largest deviation from the twirled isotropic bound: {twirled_worst:.2e}"));
    Ok(())
}

fn kpf16(c: &mut Ctx) -> bqt_core::Result<()> {
    let grid = linspace(5);
    let mut min = f64::INFINITY;
    let mut corners = vec![];
    for &p1 in &grid {
        for &p2 in &grid {
            let p = Kpf16Params::new(p1, p2)?;
            let formula = (1.0 + 3.0 * (p1 + p2) - 6.0 * p1 * p2) / 16.0;
            c.close(format!("p1={p1} p2={p2} fidelity"), kpf16_overlap(p)?, formula, 1e-12);
            let f = kpf16_fidelity(p)?;
            let r = kpf16_error(p, c.opts)?;
            if !c.solved(format!("p1={p1} p2={p2} diamond"), &r) {
                continue;
            }
            c.ok(r.value >= 1.0 - f - 1e-5, || {
                format!("p1={p1} p2={p2}: diamond error {:.8} below 1 - fidelity {:.8}", r.value, 1.0 - f)
            });
            min = min.min(r.value);
            if (p1, p2) == (1.0, 0.0) || (p1, p2) == (0.0, 1.0) {
                corners.push(r.value);
            }
        }
    }
    c.close("grid minimum", min, 0.75, 1e-4);
    for v in corners {
        c.close("corner value", v, min, 1e-4);
    }
    let swap = swap_channel_choi(2)?;
    for p in [0.0, 0.5, 1.0] {
        let k = kpf16_second_choi(p)?;
        let fid = channel_fidelity(&k, &swap, c.opts)?;
        c.ok(fid.status == bqt_core::sdp::Status::Optimal, || format!("second protocol p={p} fidelity: status {:?}", fid.status));
        c.close(format!("second protocol p={p} infidelity"), 1.0 - fid.fidelity, 0.75, 1e-5);
        c.report(format!("second protocol p={p} diamond"), &diamond_distance(&k, &swap, c.opts)?, 0.75, 1e-5);
    }
    Ok(())
}

fn random_states(seed: u64, count: usize) -> Vec<LabeledOperator> {
    let mut g = rng(seed);
    (0..count).map(|_| density(&mut g, &[2, 2])).collect()
}

fn error_measure_equality(c: &mut Ctx) -> bqt_core::Result<()> {
    let swap = swap_channel_choi(2)?;
    for (i, rho) in random_states(6, 10).into_iter().enumerate() {
        let r = ResourceState::custom(rho)?;
        let diamond = eppt_swap(&r, 2, c.opts)?;
        let infid = eppt_infid_bipartite(&swap, &r, c.opts)?;
        if c.solved(format!("state {i} diamond"), &diamond) && c.solved(format!("state {i} infidelity"), &infid) {
            c.close(format!("state {i}"), infid.value, diamond.value, 1e-5);
        }
    }
    Ok(())
}

fn sdp_consistency(c: &mut Ctx) -> bqt_core::Result<()> {
    let swap = swap_channel_choi(2)?;
    for (i, rho) in random_states(7, 10).into_iter().enumerate() {
        let r = ResourceState::custom(rho)?;
        let povm = eppt_swap(&r, 2, c.opts)?;
        let with_dual = i < 5;
        let general = eppt_bipartite(&swap, &r, with_dual, c.opts)?;
        if c.solved(format!("state {i} povm"), &povm) && c.solved(format!("state {i} general"), &general) {
            c.close(format!("state {i}"), general.value, povm.value, 1e-4);
            if with_dual {
                c.close(format!("state {i} primal - dual"), general.bound, general.value, 1e-6);
            }
        }
    }
    Ok(())
}

fn lp_points(c: &mut Ctx, label: &str, lp: &LpProblem, x: Option<&[f64]>, y: Option<&[f64]>, want: f64) -> bqt_core::Result<()> {
    if let Some(x) = x {
        let v = lp.primal_violation(x);
        c.ok(check_lp_feasible(lp, x, 1e-9)?, || format!("{label}: primal point violates constraints by {v:.2e}"));
        c.close(format!("{label} primal objective"), lp.objective(x), want, 1e-9);
    }
    if let Some(y) = y {
        c.ok(check_lp_dual_feasible(lp, y, 1e-9)?, || format!("{label}: dual point is infeasible"));
        c.close(format!("{label} dual objective"), lp.dual_objective(y), want, 1e-9);
    }
    Ok(())
}

fn lp_feasible_points(c: &mut Ctx) -> bqt_core::Result<()> {
    let mut g = rng(8);
    for d in 2..12 {
        let (x, y) = no_resource_points(d)?;
        let want = 1.0 / (d * d) as f64;
        lp_points(c, &format!("no resource d={d}"), &build_no_resource_lp(d)?, Some(&x), Some(&y), want)?;
    }
    for large in [false, true] {
        for _ in 0..10 {
            let d: usize = g.random_range(2..=3);
            let d2 = d * d;
            let da = if large { g.random_range(d2 + 1..=d2 + 6) } else { g.random_range(2..=d2) };
            let f = uniform(&mut g, 1.0 / da as f64 + 1e-3, 1.0);
            let t = uniform(&mut g, 0.0, 1.0);
            let want = 1.0 - isotropic_error(f, da, d)?;
            let lp = build_isotropic_lp(f, da, d)?;
            let x = isotropic_primal_point(f, da, d, t)?;
            let y = isotropic_dual_point(f, da, d, t)?;
            let label = format!("isotropic F={f:.4} dA={da} d={d} t={t:.3}");
            lp_points(c, &label, &lp, Some(&x), Some(&y), want)?;
        }
    }
    for _ in 0..10 {
        let d: usize = g.random_range(2..=3);
        let da: usize = g.random_range(2..=6);
        let p = uniform(&mut g, 0.5 + 1e-3, 1.0);
        let t = uniform(&mut g, 0.0, 1.0);
        let want = 1.0 - werner_error(p, da, d)?;
        let lp = build_werner_lp(p, da, d)?;
        let x = werner_primal_point(da, d, t)?;
        let y = werner_dual_point(p, da, d)?;
        lp_points(c, &format!("Werner p={p:.4} dA={da} d={d} t={t:.3}"), &lp, Some(&x), Some(&y), want)?;
    }
    Ok(())
}

fn bcqt(c: &mut Ctx) -> bqt_core::Result<()> {
    for (i, rho) in random_states(9, 5).into_iter().enumerate() {
        let tri = rho.with_dims(&[2, 2, 1])?;
        let b = eppt_bcqt(&tri, 2, c.opts)?;
        let s = eppt_swap(&ResourceState::custom(rho)?, 2, c.opts)?;
        if c.solved(format!("state {i} controlled"), &b) && c.solved(format!("state {i} swap"), &s) {
            c.close(format!("state {i}"), b.value, s.value, 1e-5);
        }
    }
    let none = LabeledOperator::scalar(1.0).with_dims(&[1, 1, 1])?;
    c.report("no resource", &eppt_bcqt(&none, 2, c.opts)?, 0.75, 1e-5);
    let charlie = LabeledOperator::identity(&[2]).scale(0.5);
    let rho = max_entangled(2, true)?.kron(&charlie);
    c.report("ebit with uncorrelated Charlie", &eppt_bcqt(&rho, 2, c.opts)?, 0.5, 1e-5);
    Ok(())
}

fn infrastructure(c: &mut Ctx) -> bqt_core::Result<()> {
    for d in [2, 3] {
        let diff = teleportation_choi(d)?.op().max_abs_diff(ChoiOperator::identity(&[d]).op());
        c.ok(diff <= 1e-10, || format!("teleportation d={d}: differs from identity by {diff:.2e}"));
    }
    let mut g = rng(10);
    for i in 0..50 {
        let d = 2 + i % 2;
        let x = density(&mut g, &[d, d]);
        let phi = max_entangled(d, true)?;
        let (_, anti) = sym_antisym_projectors(d)?;

        let iso = isotropic_twirl(&x)?;
        let diff = isotropic_twirl(&iso)?.max_abs_diff(&iso);
        c.ok(diff <= 1e-10, || format!("state {i}: isotropic twirl not idempotent ({diff:.2e})"));
        let f = phi.inner(&x)?.re.clamp(0.0, 1.0);
        let diff = iso.max_abs_diff(&isotropic_state(f, d)?);
        c.ok(diff <= 1e-10, || format!("state {i}: isotropic twirl differs from isotropic state ({diff:.2e})"));

        let wer = werner_twirl(&x)?;
        let diff = werner_twirl(&wer)?.max_abs_diff(&wer);
        c.ok(diff <= 1e-10, || format!("state {i}: Werner twirl not idempotent ({diff:.2e})"));
        let p = anti.inner(&x)?.re.clamp(0.0, 1.0);
        let diff = wer.max_abs_diff(&werner_state(p, d)?);
        c.ok(diff <= 1e-10, || format!("state {i}: Werner twirl differs from Werner state ({diff:.2e})"));

        let y = density(&mut g, &[2, d, 2]);
        for on in [vec![0], vec![1], vec![0, 2], vec![0, 1, 2]] {
            let back = y.ptranspose(&on)?.ptranspose(&on)?;
            c.ok(back.data() == y.data(), || format!("state {i}: partial transpose on {on:?} is not an involution"));
        }
    }
    Ok(())
}

pub fn run_check(def: &CheckDef, opts: &SolverOptions) -> Outcome {
    let mut c = Ctx { opts, comparisons: 0, failures: vec![], notes: vec![] };
    let start = Instant::now();
    if let Err(e) = (def.run)(&mut c) {
        c.failures.push(format!("error: {e}"));
    }
    let seconds = start.elapsed().as_secs_f64();
    if let Some(limit) = def.limit_secs {
        if seconds > limit {
            c.failures.push(format!("took {seconds:.1} s, limit {limit} s"));
        }
    }
    Outcome {
        id: def.id,
        title: def.title,
        passed: c.failures.is_empty(),
        seconds,
        comparisons: c.comparisons,
        failures: c.failures,
        notes: c.notes,
    }
}

/// Checks named in `only`, in suite order; all of them when `only` is empty.
pub fn select(only: &[String]) -> CliResult<Vec<&'static CheckDef>> {
    if let Some(bad) = only.iter().find(|id| !CHECKS.iter().any(|c| c.id == id.as_str())) {
        let ids: Vec<&str> = CHECKS.iter().map(|c| c.id).collect();
        return Err(CliError::Usage(format!("unknown check {bad:?} (known: {})", ids.join(", "))));
    }
    Ok(CHECKS.iter().filter(|c| only.is_empty() || only.iter().any(|o| o == c.id)).collect())
}

/// One status line, then the failures and notes indented below it.
pub fn format_outcome(o: &Outcome) -> String {
    let mut s = format!(
        "{} {:<24} {:>7.1} s  {} comparisons, {} failed",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.seconds,
        o.comparisons,
        o.failures.len()
    );
    const SHOWN: usize = 12;
    for f in o.failures.iter().take(SHOWN) {
        s.push_str(&format!("\n    {f}"));
    }
    if o.failures.len() > SHOWN {
        s.push_str(&format!("\n    ... {} more", o.failures.len() - SHOWN));
    }
    for n in &o.notes {
        s.push_str(&format!("\n    note: {n}"));
    }
    s
}

pub fn run(a: &VerifyArgs) -> CliResult<()> {
    if a.list {
        for c in CHECKS {
            crate::emit(&format!("{:<24} {}", c.id, c.title));
        }
        return Ok(());
    }
    let opts = solver_options(&a.solver)?;
    let defs = select(&a.only)?;
    let mut outcomes = Vec::with_capacity(defs.len());
    for def in defs {
        let o = run_check(def, &opts);
        if !a.json {
            crate::emit(&format_outcome(&o));
        }
        outcomes.push(o);
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    if a.json {
        let summary = serde_json::json!({ "passed": failed.is_empty(), "checks": outcomes });
        crate::emit(&serde_json::to_string_pretty(&summary).expect("serializable"));
    } else {
        crate::emit(&format!("{} of {} checks passed", outcomes.len() - failed.len(), outcomes.len()));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Checks(failed))
    }
}
