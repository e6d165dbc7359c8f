use crate::args::{ComputeArgs, MethodArg, Resource};
use crate::{solver_options, CliError, CliResult};
use bqt_core::analytic::{
    build_isotropic_lp, build_no_resource_lp, build_werner_lp, gadc_error, isotropic_error, lp_error,
    no_resource_error, werner_error,
};
use bqt_core::protocols::{kpf16_error, kpf16_fidelity, Kpf16Params};
use bqt_core::sdp::SolverOptions;
use bqt_core::simerr::{eppt_swap, ErrorReport, Method};
use bqt_core::states::{ResourceDescriptor, ResourceState};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Analytic,
    Lp,
    Sdp,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Analytic => "analytic",
            Kind::Lp => "lp",
            Kind::Sdp => "sdp",
        }
    }
}

/// One point of parameter space.
#[derive(Debug, Clone)]
pub enum Target {
    None { d: usize },
    Isotropic { f: f64, da: usize, d: usize },
    Werner { p: f64, da: usize, d: usize },
    Gadc { gamma: f64, n: f64 },
    Custom { state: ResourceState, d: usize },
    Kpf16 { p1: f64, p2: f64 },
}

impl Target {
    pub fn resource(&self) -> Resource {
        match self {
            Target::None { .. } => Resource::None,
            Target::Isotropic { .. } => Resource::Isotropic,
            Target::Werner { .. } => Resource::Werner,
            Target::Gadc { .. } => Resource::Gadc,
            Target::Custom { .. } => Resource::Custom,
            Target::Kpf16 { .. } => Resource::Kpf16,
        }
    }

    /// Methods that apply to this kind of target, in output order.
    pub fn methods(&self) -> &'static [Kind] {
        applicable(self.resource())
    }

    pub fn evaluate(&self, kind: Kind, opts: &SolverOptions) -> bqt_core::Result<ErrorReport> {
        let closed = |v: f64, r: Option<ResourceDescriptor>, d: usize| {
            ErrorReport::closed_form(v, Method::Analytic, r, &format!("swap d={d}"))
        };
        match (self, kind) {
            (Target::None { d }, Kind::Analytic) => Ok(closed(no_resource_error(*d)?, Some(ResourceDescriptor::None), *d)),
            (Target::None { d }, Kind::Lp) => {
                lp_error(&build_no_resource_lp(*d)?, Some(ResourceDescriptor::None), *d, opts)
            }
            (Target::None { d }, Kind::Sdp) => eppt_swap(&ResourceState::None, *d, opts),
            (&Target::Isotropic { f, da, d }, Kind::Analytic) => {
                Ok(closed(isotropic_error(f, da, d)?, Some(ResourceDescriptor::Isotropic { f, da }), d))
            }
            (&Target::Isotropic { f, da, d }, Kind::Lp) => {
                lp_error(&build_isotropic_lp(f, da, d)?, Some(ResourceDescriptor::Isotropic { f, da }), d, opts)
            }
            (&Target::Isotropic { f, da, d }, Kind::Sdp) => eppt_swap(&ResourceState::isotropic(f, da)?, d, opts),
            (&Target::Werner { p, da, d }, Kind::Analytic) => {
                Ok(closed(werner_error(p, da, d)?, Some(ResourceDescriptor::Werner { p, da }), d))
            }
            (&Target::Werner { p, da, d }, Kind::Lp) => {
                lp_error(&build_werner_lp(p, da, d)?, Some(ResourceDescriptor::Werner { p, da }), d, opts)
            }
            (&Target::Werner { p, da, d }, Kind::Sdp) => eppt_swap(&ResourceState::werner(p, da)?, d, opts),
            (&Target::Gadc { gamma, n }, Kind::Analytic) => {
                Ok(closed(gadc_error(gamma, n)?, Some(ResourceDescriptor::Gadc { gamma, n }), 2))
            }
            (&Target::Gadc { gamma, n }, Kind::Sdp) => eppt_swap(&ResourceState::gadc(gamma, n)?, 2, opts),
            (Target::Custom { state, d }, Kind::Sdp) => eppt_swap(state, *d, opts),
            (&Target::Kpf16 { p1, p2 }, Kind::Analytic) => {
                let f = kpf16_fidelity(Kpf16Params::new(p1, p2)?)?;
                Ok(ErrorReport::closed_form(1.0 - f, Method::Analytic, None, &format!("KPF16 infidelity p1={p1} p2={p2}")))
            }
            (&Target::Kpf16 { p1, p2 }, Kind::Sdp) => kpf16_error(Kpf16Params::new(p1, p2)?, opts),
            (t, k) => Err(bqt_core::BqtError::InvalidParam(format!(
                "method {} does not apply to resource {}",
                k.name(),
                resource_name(t.resource())
            ))),
        }
    }
}

pub fn resource_name(r: Resource) -> &'static str {
    match r {
        Resource::None => "none",
        Resource::Isotropic => "isotropic",
        Resource::Werner => "werner",
        Resource::Gadc => "gadc",
        Resource::Custom => "custom",
        Resource::Kpf16 => "kpf16",
    }
}

pub fn applicable(r: Resource) -> &'static [Kind] {
    match r {
        Resource::None | Resource::Isotropic | Resource::Werner => &[Kind::Analytic, Kind::Lp, Kind::Sdp],
        Resource::Gadc | Resource::Kpf16 => &[Kind::Analytic, Kind::Sdp],
        Resource::Custom => &[Kind::Sdp],
    }
}

/// Expands `--method` against the methods that apply to `r`.
pub fn select_methods(r: Resource, m: MethodArg) -> CliResult<Vec<Kind>> {
    let ok = applicable(r);
    let want = match m {
        MethodArg::All => return Ok(ok.to_vec()),
        MethodArg::Analytic => Kind::Analytic,
        MethodArg::Lp => Kind::Lp,
        MethodArg::Sdp => Kind::Sdp,
    };
    if !ok.contains(&want) {
        let names: Vec<&str> = ok.iter().map(|k| k.name()).collect();
        return Err(CliError::Usage(format!(
            "method {} is not available for this resource (available: {})",
            want.name(),
            names.join(", ")
        )));
    }
    Ok(vec![want])
}

fn need<T: Copy>(v: Option<T>, flag: &str, r: Resource) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --resource {}", resource_name(r))))
}

fn need_d2(d: usize, r: Resource) -> CliResult<()> {
    if d != 2 {
        return Err(CliError::Usage(format!("resource {} is defined for d = 2 only, got d = {d}", resource_name(r))));
    }
    Ok(())
}

/// Checks parameter domains up front so bad values exit as usage errors.
pub fn validate(t: &Target) -> CliResult<()> {
    let unit = |name: &str, v: f64| {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(CliError::Usage(format!("{name} = {v} is outside [0, 1]")))
        }
    };
    let dims = |da: usize, d: usize| {
        if da < 2 || d < 2 {
            Err(CliError::Usage(format!("need dA >= 2 and d >= 2, got dA = {da}, d = {d}")))
        } else {
            Ok(())
        }
    };
    match t {
        Target::None { d } => dims(2, *d),
        Target::Isotropic { f, da, d } => unit("F", *f).and(dims(*da, *d)),
        Target::Werner { p, da, d } => unit("p", *p).and(dims(*da, *d)),
        Target::Gadc { gamma, n } => unit("gamma", *gamma).and(unit("N", *n)),
        Target::Custom { d, .. } => dims(2, *d),
        Target::Kpf16 { p1, p2 } => unit("p1", *p1).and(unit("p2", *p2)),
    }
}

pub fn target_from_args(a: &ComputeArgs) -> CliResult<Target> {
    let r = a.resource;
    let d = a.d;
    let t = match r {
        Resource::None => Target::None { d },
        Resource::Isotropic => Target::Isotropic { f: need(a.f, "F", r)?, da: need(a.da, "dA", r)?, d },
        Resource::Werner => Target::Werner { p: need(a.p, "p", r)?, da: need(a.da, "dA", r)?, d },
        Resource::Gadc => {
            need_d2(d, r)?;
            Target::Gadc { gamma: need(a.gamma, "gamma", r)?, n: need(a.n, "N", r)? }
        }
        Resource::Kpf16 => {
            need_d2(d, r)?;
            Target::Kpf16 { p1: need(a.p1, "p1", r)?, p2: need(a.p2, "p2", r)? }
        }
        Resource::Custom => {
            let path = a.file.as_ref().ok_or_else(|| CliError::Usage("--file is required for --resource custom".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let state = ResourceState::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Target::Custom { state, d }
        }
    };
    validate(&t)?;
    Ok(t)
}

/// Runs the selected methods. Returns the JSON to print (an object for one
/// report, an array for several) and whether every report is optimal.
pub fn compute(a: &ComputeArgs) -> CliResult<(Value, bool)> {
    let opts = solver_options(&a.solver)?;
    let target = target_from_args(a)?;
    let kinds = select_methods(a.resource, a.method)?;
    let mut reports = Vec::with_capacity(kinds.len());
    for k in kinds {
        reports.push(target.evaluate(k, &opts)?);
    }
    let optimal = reports.iter().all(|r| r.is_optimal());
    let mut values: Vec<Value> = reports.iter().map(|r| r.to_json()).collect();
    let json = if values.len() == 1 { values.remove(0) } else { Value::Array(values) };
    Ok((json, optimal))
}

pub fn run(a: &ComputeArgs) -> CliResult<()> {
    let (json, optimal) = compute(a)?;
    let text = serde_json::to_string_pretty(&json).expect("serializable");
    if let Some(path) = &a.out {
        std::fs::write(path, format!("{text}\n")).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    crate::emit(&text);
    if !optimal {
        return Err(CliError::Solver("solver did not reach an optimal point".into()));
    }
    Ok(())
}
