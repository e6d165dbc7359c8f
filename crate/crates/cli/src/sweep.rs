use crate::args::{Resource, SweepArgs};
use crate::compute::{resource_name, select_methods, validate, Kind, Target};
use crate::{solver_options, CliError, CliResult};
use bqt_core::sdp::SolverOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub integer: bool,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub resource: Resource,
    /// Outermost axis first.
    pub axes: Vec<Axis>,
    pub methods: Vec<Kind>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

/// `v` or `start:stop:steps` with evenly spaced values, endpoints included.
pub fn parse_axis(name: &'static str, text: &str, integer: bool) -> CliResult<Axis> {
    let bad = |why: &str| CliError::Usage(format!("--{name} {text}: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [v] => vec![num(v)?],
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad("steps must be a positive integer"))?;
            if n == 0 {
                return Err(bad("steps must be at least 1"));
            }
            if n == 1 {
                if a != b {
                    return Err(bad("one step needs start = stop"));
                }
                vec![a]
            } else {
                (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
            }
        }
        _ => return Err(bad("expected a value or start:stop:steps")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if integer {
        if values.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
            return Err(bad("values must be integers of at least 2"));
        }
    } else if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(bad("values must lie in [0, 1]"));
    }
    Ok(Axis { name, values, integer })
}

fn axis(name: &'static str, v: &Option<String>, default: Option<&str>, integer: bool) -> CliResult<Axis> {
    match (v.as_deref(), default) {
        (Some(t), _) | (None, Some(t)) => parse_axis(name, t, integer),
        (None, None) => Err(CliError::Usage(format!("--{name} is required for this sweep"))),
    }
}

pub fn spec_from_args(a: &SweepArgs) -> CliResult<SweepSpec> {
    let fixed_d = |a: &SweepArgs| match a.d.as_deref() {
        None | Some("2") => Ok(()),
        Some(d) => Err(CliError::Usage(format!("resource {} is defined for d = 2 only, got --d {d}", resource_name(a.resource)))),
    };
    let axes = match a.resource {
        Resource::None => vec![axis("d", &a.d, Some("2"), true)?],
        Resource::Isotropic => vec![axis("F", &a.f, None, false)?, axis("dA", &a.da, None, true)?, axis("d", &a.d, Some("2"), true)?],
        Resource::Werner => vec![axis("p", &a.p, None, false)?, axis("dA", &a.da, None, true)?, axis("d", &a.d, Some("2"), true)?],
        Resource::Gadc => {
            fixed_d(a)?;
            vec![axis("gamma", &a.gamma, None, false)?, axis("N", &a.n, None, false)?]
        }
        Resource::Kpf16 => {
            fixed_d(a)?;
            vec![axis("p1", &a.p1, None, false)?, axis("p2", &a.p2, None, false)?]
        }
        Resource::Custom => return Err(CliError::Usage("custom resources cannot be swept; use compute".into())),
    };
    let jobs = match a.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(SweepSpec { resource: a.resource, axes, methods: select_methods(a.resource, a.method)?, out: a.out.clone(), jobs })
}

impl SweepSpec {
    /// Grid points in lexicographic order, first axis outermost.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = vec![vec![]];
        for ax in &self.axes {
            pts = pts.into_iter().flat_map(|p| ax.values.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
        }
        pts
    }

    fn target(&self, p: &[f64]) -> Target {
        let u = |v: f64| v as usize;
        match self.resource {
            Resource::None => Target::None { d: u(p[0]) },
            Resource::Isotropic => Target::Isotropic { f: p[0], da: u(p[1]), d: u(p[2]) },
            Resource::Werner => Target::Werner { p: p[0], da: u(p[1]), d: u(p[2]) },
            Resource::Gadc => Target::Gadc { gamma: p[0], n: p[1] },
            Resource::Kpf16 => Target::Kpf16 { p1: p[0], p2: p[1] },
            Resource::Custom => unreachable!("custom sweeps are rejected when parsing"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub params: Vec<f64>,
    pub method: Kind,
    pub value: f64,
    pub gap: f64,
    pub optimal: bool,
}

fn eval_point(spec: &SweepSpec, p: &[f64], opts: &SolverOptions) -> CliResult<Vec<Row>> {
    let t = spec.target(p);
    validate(&t)?;
    spec.methods
        .iter()
        .map(|&k| {
            let r = t.evaluate(k, opts)?;
            Ok(Row { params: p.to_vec(), method: k, value: r.value, gap: r.gap, optimal: r.is_optimal() })
        })
        .collect()
}

/// Evaluates every grid point on `spec.jobs` threads; rows come back in grid
/// order whatever the scheduling.
pub fn evaluate(spec: &SweepSpec, opts: &SolverOptions) -> CliResult<Vec<Row>> {
    let points = spec.points();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<Vec<Row>>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..spec.jobs.min(points.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let r = eval_point(spec, &points[i], opts);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let mut rows = Vec::new();
    for r in results.into_inner().expect("workers finished") {
        rows.extend(r.expect("every point evaluated")?);
    }
    Ok(rows)
}

/// C-style `%.{sig}g`.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

pub fn write_csv<W: Write>(spec: &SweepSpec, rows: &[Row], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = spec.axes.iter().map(|a| a.name).collect();
    header.extend(["method", "value", "gap"]);
    out.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = spec
            .axes
            .iter()
            .zip(&r.params)
            .map(|(a, &v)| if a.integer { format!("{}", v as i64) } else { fmt_sig(v, 12) })
            .collect();
        rec.push(r.method.name().to_string());
        rec.push(fmt_sig(r.value, 12));
        rec.push(fmt_sig(r.gap, 12));
        out.write_record(&rec)?;
    }
    out.flush()
}

pub fn run(a: &SweepArgs) -> CliResult<()> {
    let opts = solver_options(&a.solver)?;
    let spec = spec_from_args(a)?;
    // fail on an unwritable path before spending time on solves
    let file = match &spec.out {
        Some(p) => Some(std::fs::File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let rows = evaluate(&spec, &opts)?;
    let io_err = |e: std::io::Error| CliError::Usage(format!("writing CSV: {e}"));
    match file {
        Some(f) => write_csv(&spec, &rows, std::io::BufWriter::new(f)).map_err(io_err)?,
        None => write_csv(&spec, &rows, std::io::stdout().lock()).map_err(io_err)?,
    }
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.optimal)
        .map(|r| format!("{:?} {}", r.params, r.method.name()))
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Solver(format!("non-optimal points: {}", bad.join("; "))));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting_matches_printf() {
        let cases = [
            (0.75, "0.75"),
            (1.0, "1"),
            (2.0 / 3.0, "0.666666666667"),
            (1e-7, "1e-07"),
            (1.2345e-5, "1.2345e-05"),
            (0.0001, "0.0001"),
            (-0.5, "-0.5"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.99999999999999, "1"),
            (-0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_sig(x, 12), want, "{x}");
        }
    }

    #[test]
    fn axes_parse() {
        let a = parse_axis("F", "0:1:5", false).unwrap();
        assert_eq!(a.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_axis("d", "2:6:5", true).unwrap().values, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(parse_axis("F", "0.3", false).unwrap().values, vec![0.3]);
        assert!(parse_axis("F", "0:1:0", false).is_err());
        assert!(parse_axis("F", "0:1.5:3", false).is_err());
        assert!(parse_axis("d", "2:3:3", true).is_err());
        assert!(parse_axis("d", "1", true).is_err());
        assert!(parse_axis("F", "a:b", false).is_err());
    }

    #[test]
    fn grid_is_lexicographic() {
        let spec = SweepSpec {
            resource: Resource::Gadc,
            axes: vec![
                Axis { name: "gamma", values: vec![0.0, 1.0], integer: false },
                Axis { name: "N", values: vec![0.1, 0.2, 0.3], integer: false },
            ],
            methods: vec![Kind::Analytic],
            out: None,
            jobs: 1,
        };
        let pts = spec.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.0, 0.1]);
        assert_eq!(pts[2], vec![0.0, 0.3]);
        assert_eq!(pts[3], vec![1.0, 0.1]);
    }

    #[test]
    fn threads_do_not_change_order() {
        let mk = |jobs| SweepSpec {
            resource: Resource::Isotropic,
            axes: vec![
                Axis { name: "F", values: vec![0.0, 0.5, 1.0], integer: false },
                Axis { name: "dA", values: vec![2.0, 3.0], integer: true },
                Axis { name: "d", values: vec![2.0], integer: true },
            ],
            methods: vec![Kind::Analytic, Kind::Lp],
            out: None,
            jobs,
        };
        let opts = SolverOptions::default();
        let a = evaluate(&mk(1), &opts).unwrap();
        let b = evaluate(&mk(4), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert_eq!(a[1].method, Kind::Lp);
    }
}
