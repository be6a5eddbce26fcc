//! One function per subcommand.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use ecf_toolkit::depset::{
    check_eta_triple, fdd_lower_bound, fdd_lower_bound_log, support_function, trivariate_bound_from_bivariate,
    trivariate_bound_from_bivariate_log,
};
use ecf_toolkit::ecf::{
    compute_tau, ecf_from_spectral_measure, ecf_from_tau, marginalize_tau, random_valid_ecf, validate_ecf_with_tol,
};
use ecf_toolkit::io::{self, num, Table};
use ecf_toolkit::models::{br_bivariate_theta, BrEstimate, ModelSpec};
use ecf_toolkit::subset::{check_completely_alternating_direct, masks};
use ecf_toolkit::tm::{empirical_ecf_all, simulate_maxlinear, simulate_tm, stable_tail_dependence, tm_from_ecf, tm_neg_log_cdf};
use ecf_toolkit::transforms::{bernstein_transform_ecf, convex_combine, cooley_check, triangle_check};
use ecf_toolkit::{
    BernsteinFunction, DepSetPolytope, DiscreteSpectralMeasure, EcfTable, Error, GroundSet, SetFunction,
    SubsetMask, TauTable, TOL_VALIDATE,
};
use serde_json::{json, Map, Value};

use crate::options::Options;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_SAMPLES: usize = 10_000;
const DEFAULT_MC_DRAWS: usize = 100_000;
const DEFAULT_GRID: usize = 8;
const MAX_GRID_POINTS: usize = 200_000;
/// Largest table the direct complete-alternation check is run on.
const MAX_DIRECT_SITES: usize = 8;
/// Largest table the exhaustive triangle check is run on.
const MAX_TRIANGLE_SITES: usize = 6;
const ROUNDTRIP_TOL: f64 = 1e-12;
const SUPPORT_TOL: f64 = 1e-9;

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn read_text(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| input_error(p, e)),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| input_error(p, e)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit(opts: &Options, v: &Value) -> Result<()> {
    write_text(opts.output.as_deref(), &io::to_json_string(v))
}

/// Writes a report and fails with it when `passed` is false.
fn emit_report(opts: &Options, report: Value, passed: bool) -> Result<()> {
    if passed {
        return emit(opts, &report);
    }
    if opts.output.is_some() {
        emit(opts, &report)?;
    }
    Err(CliError::Failed(report))
}

fn tol(opts: &Options) -> Result<f64> {
    match opts.tol {
        None => Ok(TOL_VALIDATE),
        Some(t) if t >= 0.0 && t.is_finite() => Ok(t),
        Some(t) => Err(CliError::Input(format!("--tol must be a nonnegative number, got {t}"))),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("{what}: {v:?} is not a number")))
        })
        .collect()
}

/// Failure report for a table that is rejected before validation proper.
fn invalid_report(kind: &str, message: String) -> CliError {
    CliError::Failed(json!({
        "passed": false,
        "diagnostics": [{ "kind": kind, "message": message }],
    }))
}

fn lift(e: Error) -> CliError {
    match e {
        Error::InvalidEcf(msg) => invalid_report("invalid_ecf", msg),
        Error::InvalidTau(msg) => invalid_report("invalid_tau", msg),
        e => CliError::from(e),
    }
}

fn require_valid(ecf: &EcfTable, tol: f64) -> Result<()> {
    let v = validate_ecf_with_tol(ecf, tol);
    if v.passed {
        Ok(())
    } else {
        Err(CliError::Failed(io::validation_to_json(&v, ecf.ground())))
    }
}

/// What an input file or model flag describes.
enum Source {
    Ecf(EcfTable, Option<Value>),
    Tau(TauTable),
    Spectral(DiscreteSpectralMeasure),
}

fn model_ground(opts: &Options) -> Result<GroundSet> {
    if let Some(p) = &opts.coords {
        let f = fs::File::open(p).map_err(|e| input_error(p, e))?;
        return io::read_coords_csv(f).map_err(|e| input_error(p, e));
    }
    let m = opts
        .m
        .ok_or_else(|| CliError::Input("this model needs --m or --coords".into()))?;
    Ok(GroundSet::indexed(m)?)
}

fn model_source(opts: &Options, model: &str) -> Result<Source> {
    let spec = if model.trim_start().starts_with('{') {
        serde_json::from_str::<ModelSpec>(model).map_err(|e| CliError::Input(format!("--model: {e}")))?
    } else {
        match model.trim() {
            "independent" => ModelSpec::Independent,
            "identical" => ModelSpec::Identical,
            "sqrt" => ModelSpec::Sqrt,
            "m3box" => ModelSpec::M3Box { lower: None, upper: None },
            "random" => {
                let m = opts.m.ok_or_else(|| CliError::Input("the random model needs --m".into()))?;
                let ecf = random_valid_ecf(m, opts.q.unwrap_or(m), opts.seed.unwrap_or(0))?;
                return Ok(Source::Ecf(ecf, None));
            }
            "br" if opts.gamma.is_some() => {
                if opts.coords.is_some() || opts.m.is_some_and(|m| m != 2) {
                    return Err(CliError::Input("--gamma gives a two-site table; drop --coords and --m".into()));
                }
                let theta = br_bivariate_theta(opts.gamma.unwrap_or_default())?;
                let g = GroundSet::indexed(2)?;
                return Ok(Source::Ecf(EcfTable::from_fn(g, |a| if a.len() == 2 { theta } else { a.len() as f64 }), None));
            }
            "br" => ModelSpec::Br {
                lambda: opts.lambda.ok_or_else(|| CliError::Input("the br model needs --lambda".into()))?,
                alpha: opts.alpha.ok_or_else(|| CliError::Input("the br model needs --alpha".into()))?,
                n: opts.n.unwrap_or(DEFAULT_MC_DRAWS),
                seed: opts.seed.unwrap_or(0),
            },
            other => return Err(CliError::Input(format!("unknown model {other:?}"))),
        }
    };
    let out = spec.build(&model_ground(opts)?)?;
    let extra = out.mc.as_ref().map(|est| mc_json(est, &spec));
    Ok(Source::Ecf(out.ecf, extra))
}

fn mc_json(est: &BrEstimate, spec: &ModelSpec) -> Value {
    let g = est.repaired.ground();
    let map = |f: &SetFunction| -> Map<String, Value> {
        masks(f.m(), true).map(|a| (g.format_subset(a), num(f[a]))).collect()
    };
    let (n, seed) = match spec {
        ModelSpec::Br { n, seed, .. } => (*n, *seed),
        _ => (0, 0),
    };
    json!({ "n": n, "seed": seed, "raw": map(&est.raw), "se": map(&est.se) })
}

fn parse_source(text: &str, path: Option<&Path>) -> Result<Source> {
    let wrap = |e: Error| match path {
        Some(p) => input_error(p, e),
        None => CliError::Input(format!("standard input: {e}")),
    };
    if text.trim_start().starts_with('{') {
        let v = io::parse_json(text).map_err(wrap)?;
        match io::table_from_json(&v).map_err(wrap)? {
            Table::Ecf(e) => Ok(Source::Ecf(e, None)),
            Table::Tau(t) => Ok(Source::Tau(t)),
        }
    } else {
        Ok(Source::Spectral(io::read_spectral_csv(text.as_bytes()).map_err(wrap)?))
    }
}

fn load_source(opts: &Options) -> Result<Source> {
    match &opts.model {
        Some(model) => model_source(opts, model),
        None => parse_source(&read_text(opts.input.as_deref())?, opts.input.as_deref()),
    }
}

fn source_ecf(src: Source) -> Result<EcfTable> {
    match src {
        Source::Ecf(e, _) => Ok(e),
        Source::Tau(t) => ecf_from_tau(&t).map_err(lift),
        Source::Spectral(sm) => Ok(ecf_from_spectral_measure(&sm)),
    }
}

fn load_ecf(opts: &Options) -> Result<EcfTable> {
    source_ecf(load_source(opts)?)
}

fn marginal_mask(opts: &Options, g: &GroundSet) -> Result<Option<SubsetMask>> {
    let Some(spec) = &opts.marginal else {
        return Ok(None);
    };
    let s = spec.trim().trim_start_matches('[').trim_end_matches(']');
    let mask = g.parse_subset(&format!("[{s}]"))?;
    if mask.is_empty() {
        return Err(CliError::Input("--marginal must name at least one site".into()));
    }
    Ok(Some(mask))
}

pub fn validate(opts: &Options) -> Result<()> {
    let ecf = load_ecf(opts)?;
    let v = validate_ecf_with_tol(&ecf, tol(opts)?);
    emit_report(opts, io::validation_to_json(&v, ecf.ground()), v.passed)
}

pub fn tau(opts: &Options) -> Result<()> {
    let tol = tol(opts)?;
    let tau = match load_source(opts)? {
        Source::Tau(t) => {
            t.check_invariants(tol).map_err(lift)?;
            t
        }
        src => {
            let ecf = source_ecf(src)?;
            require_valid(&ecf, tol)?;
            compute_tau(&ecf).map_err(lift)?
        }
    };
    let tau = match marginal_mask(opts, tau.ground())? {
        Some(mask) => marginalize_tau(&tau, mask)?,
        None => tau,
    };
    emit(opts, &io::tau_to_json(&tau))
}

pub fn ecf(opts: &Options) -> Result<()> {
    let (ecf, extra) = match load_source(opts)? {
        Source::Ecf(e, extra) => (e, extra),
        src => (source_ecf(src)?, None),
    };
    let (ecf, extra) = match marginal_mask(opts, ecf.ground())? {
        Some(mask) => (ecf.restrict(mask)?, None),
        None => (ecf, extra),
    };
    let mut out = io::ecf_to_json(&ecf);
    if let (Some(extra), Value::Object(obj)) = (extra, &mut out) {
        obj.insert("mc".into(), extra);
    }
    emit(opts, &out)
}

fn meta_path(opts: &Options) -> Option<PathBuf> {
    opts.meta.clone().or_else(|| {
        opts.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    })
}

pub fn simulate(opts: &Options) -> Result<()> {
    let n = opts.n.unwrap_or(DEFAULT_SAMPLES);
    let seed = opts.seed.unwrap_or(0);
    let batch = match load_source(opts)? {
        Source::Spectral(sm) => simulate_maxlinear(&sm, n, seed)?,
        src => {
            let ecf = source_ecf(src)?;
            require_valid(&ecf, tol(opts)?)?;
            simulate_tm(&tm_from_ecf(&ecf).map_err(lift)?, n, seed)?
        }
    };
    let mut buf = Vec::new();
    io::write_samples_csv(&mut buf, &batch)?;
    write_text(opts.output.as_deref(), &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    if let Some(p) = meta_path(opts) {
        let meta = serde_json::to_value(io::SampleMeta::of(&batch)).expect("metadata is serializable");
        write_text(Some(&p), &io::to_json_string(&meta))?;
    }
    Ok(())
}

pub fn estimate(opts: &Options) -> Result<()> {
    let text = read_text(opts.input.as_deref())?;
    let batch = io::read_samples_csv(text.as_bytes(), opts.seed.unwrap_or(0))?;
    let g = GroundSet::new(batch.labels.clone())?;
    let cap = opts.max_subset_size.unwrap_or(batch.m());
    if cap == 0 {
        return Err(CliError::Input("--max-subset-size must be at least 1".into()));
    }
    let (mut theta, mut se) = (Map::new(), Map::new());
    for (a, e) in empirical_ecf_all(&batch, cap)? {
        theta.insert(g.format_subset(a), num(e.value));
        se.insert(g.format_subset(a), num(e.se));
    }
    emit(
        opts,
        &json!({
            "labels": g.labels(),
            "n": batch.n(),
            "max_subset_size": cap.min(batch.m()),
            "theta": theta,
            "se": se,
        }),
    )
}

fn parse_bernstein(s: &str) -> Result<BernsteinFunction> {
    s.parse().map_err(|e: Error| CliError::Input(format!("--bernstein: {e}")))
}

pub fn transform(opts: &Options) -> Result<()> {
    let tol = tol(opts)?;
    let mut ecf = load_ecf(opts)?;
    require_valid(&ecf, tol)?;
    match (&opts.input2, opts.alpha_combine) {
        (Some(p), Some(alpha)) => {
            let other = source_ecf(parse_source(&read_text(Some(p))?, Some(p))?)?;
            require_valid(&other, tol)?;
            ecf = convex_combine(&ecf, &other, alpha)?;
        }
        (None, None) => {}
        _ => return Err(CliError::Input("convex combination needs both --input2 and --alpha-combine".into())),
    }
    if let Some(g) = &opts.bernstein {
        ecf = bernstein_transform_ecf(&ecf, &parse_bernstein(g)?).map_err(lift)?;
    } else if opts.input2.is_none() {
        return Err(CliError::Input("transform needs --bernstein or --input2 with --alpha-combine".into()));
    }
    emit(opts, &io::ecf_to_json(&ecf))
}

/// Points `k / res` with nonnegative integer `k` summing to `res`.
fn simplex_grid(m: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, res: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == m {
            cur.push(left as f64 / res as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k as f64 / res as f64);
            rec(m, left - k, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, res, res, &mut Vec::with_capacity(m), &mut out);
    out
}

fn grid_size(m: usize, res: usize) -> f64 {
    // C(res + m − 1, m − 1)
    (1..m).fold(1.0, |acc, k| acc * (res + k) as f64 / k as f64)
}

fn grid(opts: &Options, m: usize) -> Result<Vec<Vec<f64>>> {
    let res = opts.grid.unwrap_or(DEFAULT_GRID);
    if res == 0 || grid_size(m, res) > MAX_GRID_POINTS as f64 {
        return Err(CliError::Input(format!("--grid {res} is out of range for {m} sites")));
    }
    Ok(simplex_grid(m, res))
}

pub fn depset(opts: &Options) -> Result<()> {
    let ecf = load_ecf(opts)?;
    require_valid(&ecf, tol(opts)?)?;
    let poly = DepSetPolytope::from_ecf(&ecf).map_err(lift)?;
    let mut support = Vec::new();
    for x in grid(opts, poly.m())? {
        let h = support_function(&poly, &x)?;
        support.push(json!({ "x": x.iter().map(|&v| num(v)).collect::<Vec<_>>(), "value": num(h) }));
    }
    let mut out = io::polytope_to_json(&poly);
    if let Value::Object(obj) = &mut out {
        obj.insert("support".into(), Value::Array(support));
    }
    if let Some(p) = &opts.vertices_csv {
        let f = fs::File::create(p).map_err(|e| input_error(p, e))?;
        io::write_vertices_csv(f, &poly)?;
    }
    emit(opts, &out)
}

pub fn bound(opts: &Options) -> Result<()> {
    let x = parse_list(
        opts.x.as_deref().ok_or_else(|| CliError::Input("bound needs --x".into()))?,
        "--x",
    )?;
    let nums = |v: &[f64]| v.iter().map(|&t| num(t)).collect::<Vec<_>>();
    if let Some(eta) = &opts.eta {
        let eta = parse_list(eta, "--eta")?;
        let (Ok(e), Ok(x3)) = (<[f64; 3]>::try_from(eta.as_slice()), <[f64; 3]>::try_from(x.as_slice())) else {
            return Err(CliError::Input("--eta and --x need three values each".into()));
        };
        let a_rst = check_eta_triple(e[0], e[1], e[2])?;
        let log_bound = trivariate_bound_from_bivariate_log(e[0], e[1], e[2], x3)?;
        let bound = trivariate_bound_from_bivariate(e[0], e[1], e[2], x3)?;
        return emit(
            opts,
            &json!({ "eta": nums(&e), "x": nums(&x), "a_rst": num(a_rst), "log_bound": num(log_bound), "bound": num(bound) }),
        );
    }
    let ecf = load_ecf(opts)?;
    require_valid(&ecf, tol(opts)?)?;
    let log_bound = fdd_lower_bound_log(&ecf, &x)?;
    let bound = fdd_lower_bound(&ecf, &x)?;
    emit(
        opts,
        &json!({ "labels": ecf.ground().labels(), "x": nums(&x), "log_bound": num(log_bound), "bound": num(bound) }),
    )
}

struct Suite {
    checks: Vec<Value>,
    passed: bool,
}

impl Suite {
    fn push(&mut self, name: &str, passed: bool, detail: Value) {
        self.passed &= passed;
        let mut obj = Map::new();
        obj.insert("name".into(), json!(name));
        obj.insert("passed".into(), json!(passed));
        if let Value::Object(d) = detail {
            obj.extend(d);
        }
        self.checks.push(Value::Object(obj));
    }

    fn skip(&mut self, name: &str, reason: &str) {
        self.checks
            .push(json!({ "name": name, "passed": true, "skipped": true, "reason": reason }));
    }
}

const DEFAULT_KINDS: [&str; 3] = ["log1p", "pow:0.5", "negpow:-1"];

pub fn check(opts: &Options) -> Result<()> {
    let tol = tol(opts)?;
    let ecf = load_ecf(opts)?;
    let g = ecf.ground().clone();
    let m = ecf.m();
    let mut suite = Suite { checks: Vec::new(), passed: true };

    let v = validate_ecf_with_tol(&ecf, tol);
    let mut report = io::validation_to_json(&v, &g);
    if let Value::Object(obj) = &mut report {
        obj.remove("passed");
    }
    suite.push("validate", v.passed, report);

    if m <= MAX_DIRECT_SITES {
        let ca = check_completely_alternating_direct(ecf.theta(), m, tol)?;
        let normalized = ecf.check_normalization(tol).is_ok();
        let witness = ca.witness.as_ref().map(|w| {
            json!({
                "generators": w.generators.iter().map(|&k| g.format_subset(k)).collect::<Vec<_>>(),
                "base": g.format_subset(w.base),
                "value": num(w.value),
            })
        });
        suite.push(
            "complete_alternation",
            ca.passed(),
            json!({ "evaluated": ca.evaluated, "witness": witness }),
        );
        suite.push(
            "characterization_agrees",
            v.passed == (ca.passed() && normalized),
            json!({ "validate": v.passed, "direct": ca.passed() && normalized }),
        );
    } else {
        suite.skip("complete_alternation", "too many sites for the direct check");
    }

    const NEED_VALID: [&str; 7] =
        ["tau_roundtrip", "tau_row_sums", "bernstein_closure", "triangle", "cooley", "polytope", "fdd_bound"];
    if !v.passed {
        for name in NEED_VALID {
            suite.skip(name, "table is not valid");
        }
        return emit_report(opts, suite_json(&g, suite.passed, suite.checks), false);
    }

    let tau = compute_tau(&ecf).map_err(lift)?;
    let back = ecf_from_tau(&tau).map_err(lift)?;
    let err = back.theta().max_abs_diff(ecf.theta());
    suite.push("tau_roundtrip", err <= ROUNDTRIP_TOL, json!({ "max_abs_error": num(err), "tol": num(ROUNDTRIP_TOL) }));
    let worst = tau.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let (min_set, min_tau) = tau.min_entry();
    suite.push(
        "tau_row_sums",
        worst <= ROUNDTRIP_TOL && min_tau >= -tol,
        json!({ "max_row_sum_error": num(worst), "min_tau": num(min_tau), "min_tau_subset": g.format_subset(min_set) }),
    );

    let kinds: Vec<BernsteinFunction> = match &opts.bernstein {
        Some(s) => vec![parse_bernstein(s)?],
        None => DEFAULT_KINDS.iter().map(|s| s.parse().expect("built-in Bernstein function")).collect(),
    };
    let mut failures = Vec::new();
    for k in &kinds {
        let t = bernstein_transform_ecf(&ecf, k)?;
        let fixed = t.get(SubsetMask::EMPTY) == 0.0 && (0..m).all(|s| t.get(SubsetMask::singleton(s)) == 1.0);
        if !fixed || !validate_ecf_with_tol(&t, tol).passed {
            failures.push(k.to_string());
        }
    }
    suite.push(
        "bernstein_closure",
        failures.is_empty(),
        json!({ "kinds": kinds.iter().map(ToString::to_string).collect::<Vec<_>>(), "failures": failures }),
    );

    if m <= MAX_TRIANGLE_SITES {
        let (mut cases, mut violations, mut min_slack) = (0usize, 0usize, f64::INFINITY);
        for k in &kinds {
            for a in masks(m, true) {
                for b in masks(m, true) {
                    for c in masks(m, true) {
                        let r = triangle_check(&ecf, k, a, b, c)?;
                        cases += 1;
                        violations += usize::from(!r.passed);
                        min_slack = min_slack.min(r.min_slack);
                    }
                }
            }
        }
        suite.push(
            "triangle",
            violations == 0,
            json!({ "cases": cases, "violations": violations, "min_slack": num(min_slack) }),
        );
    } else {
        suite.skip("triangle", "too many sites for the exhaustive check");
    }

    let (mut cases, mut violations) = (0usize, 0usize);
    for r in 0..m {
        for s in 0..m {
            for t in 0..m {
                if r == s || s == t || r == t {
                    continue;
                }
                for alpha in [0.5, -1.0] {
                    cases += 1;
                    violations += usize::from(!cooley_check(&ecf, r, s, t, alpha)?.passed());
                }
            }
        }
    }
    suite.push("cooley", violations == 0, json!({ "cases": cases, "violations": violations }));

    let tm = tm_from_ecf(&ecf).map_err(lift)?;
    let res = opts.grid.unwrap_or(DEFAULT_GRID);
    let directions = if grid_size(m, res) <= MAX_GRID_POINTS as f64 { simplex_grid(m, res.max(1)) } else { Vec::new() };
    if m <= ecf_toolkit::depset::MAX_VERTEX_SITES {
        let poly = DepSetPolytope::from_ecf(&ecf).map_err(lift)?;
        let mut worst = 0.0f64;
        for x in &directions {
            let ell = stable_tail_dependence(&tm, x)?;
            worst = worst.max((support_function(&poly, x)? - ell).abs() / ell.max(1.0));
        }
        suite.push(
            "polytope",
            worst <= SUPPORT_TOL,
            json!({ "directions": directions.len(), "vertices": poly.vertices.len(), "max_rel_error": num(worst) }),
        );
    } else {
        suite.skip("polytope", "too many sites for vertex enumeration");
    }

    let mut worst = 0.0f64;
    for d in &directions {
        let x: Vec<f64> = d.iter().map(|&t| 1.0 / (t + 0.25)).collect();
        let cdf = (-tm_neg_log_cdf(&tm, &x)?).exp();
        worst = worst.max((cdf - fdd_lower_bound(&ecf, &x)?).abs());
    }
    suite.push("fdd_bound", worst <= ROUNDTRIP_TOL, json!({ "points": directions.len(), "max_abs_error": num(worst) }));

    let passed = suite.passed;
    emit_report(opts, suite_json(&g, passed, suite.checks), passed)
}

fn suite_json(g: &GroundSet, passed: bool, checks: Vec<Value>) -> Value {
    json!({ "passed": passed, "labels": g.labels(), "checks": checks })
}
