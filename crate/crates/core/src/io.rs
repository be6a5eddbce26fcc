//! JSON and CSV exchange formats.
//!
//! Subsets are keyed by their member labels in ground-set order, `"[a,b]"`,
//! with `"[]"` for the empty set. Floating-point numbers are written with
//! `%.17g` in both JSON and CSV, which parses back to the same double.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::depset::DepSetPolytope;
use crate::ecf::{DiscreteSpectralMeasure, EcfTable, TauTable, Validation};
use crate::error::{Error, Result};
use crate::rng::GENERATOR;
use crate::subset::{masks, GroundSet, SetFunction, SubsetMask};
use crate::tm::SampleBatch;

/// C's `%.17g`: 17 significant digits, trailing zeros removed, exponent
/// form below `1e−4` and from `1e17`.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mantissa), exp.abs())
    } else {
        strip(&format!("{v:.*}", (16 - exp) as usize))
    }
}

/// A JSON number, or `null` when not finite.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Format(format!("{what} must be a number, found {v}")))
}

fn object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Format(format!("{what} must be a JSON object")))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Format(format!("missing field {key:?}")))
}

/// Pretty printer that writes floats with [`fmt_g17`].
struct G17Formatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
            self.0.$name(w)
        })*
    };
}

impl Formatter for G17Formatter {
    delegate!(begin_array, end_array, begin_object, end_object, end_array_value, end_object_value);

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(fmt_g17(v).as_bytes())
    }
}

/// Pretty JSON with floats in `%.17g` and a trailing newline.
pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter(PrettyFormatter::new()));
    v.serialize(&mut ser).expect("values are serializable");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn parse_json(text: &str) -> Result<Value> {
    Ok(serde_json::from_str(text)?)
}

/// `{"m": m, "values": {"[]": 0, "[0]": 1, ...}}` with default labels.
pub fn set_function_to_json(f: &SetFunction) -> Result<Value> {
    let g = GroundSet::indexed(f.m())?;
    let values: Map<String, Value> = masks(f.m(), false)
        .map(|a| (g.format_subset(a), num(f[a])))
        .collect();
    Ok(json!({ "m": f.m(), "values": values }))
}

pub fn set_function_from_json(v: &Value) -> Result<SetFunction> {
    let obj = object(v, "set function")?;
    let m = field(obj, "m")?
        .as_u64()
        .ok_or_else(|| Error::Format("\"m\" must be a nonnegative integer".into()))? as usize;
    let g = GroundSet::indexed(m)?;
    let f = read_subset_map(&g, field(obj, "values")?, true)?;
    Ok(f)
}

/// Reads `{"[a,b]": value}`; every nonempty subset must be present, `∅` is
/// required only when `need_empty`.
fn read_subset_map(g: &GroundSet, v: &Value, need_empty: bool) -> Result<SetFunction> {
    let obj = object(v, "subset table")?;
    let mut f = SetFunction::zeros(g.size());
    let mut seen = vec![false; g.subset_count()];
    for (key, val) in obj {
        let a = g.parse_subset(key)?;
        f[a] = as_f64(val, &format!("value of {key}"))?;
        seen[a.index()] = true;
    }
    let first = if need_empty { 0 } else { 1 };
    if let Some(i) = (first..seen.len()).find(|&i| !seen[i]) {
        return Err(Error::Format(format!(
            "table has no entry for {}",
            g.format_subset(SubsetMask(i as u32))
        )));
    }
    Ok(f)
}

fn subset_map(g: &GroundSet, f: &SetFunction) -> Map<String, Value> {
    masks(g.size(), true)
        .map(|a| (g.format_subset(a), num(f[a])))
        .collect()
}

fn ground_json(g: &GroundSet, out: &mut Map<String, Value>) {
    out.insert("labels".into(), json!(g.labels()));
    if let Some(c) = g.coords() {
        let rows: Vec<Value> = c.iter().map(|r| Value::Array(r.iter().map(|&x| num(x)).collect())).collect();
        out.insert("coords".into(), Value::Array(rows));
    }
}

/// Labels (and optional `"coords"`) of a table object.
pub fn ground_from_json(v: &Value) -> Result<GroundSet> {
    let obj = object(v, "table")?;
    let labels: Vec<String> = serde_json::from_value(field(obj, "labels")?.clone())?;
    let g = GroundSet::new(labels)?;
    match obj.get("coords") {
        None | Some(Value::Null) => Ok(g),
        Some(c) => g.with_coords(serde_json::from_value(c.clone())?),
    }
}

/// `{"labels": [...], "theta": {"[a]": 1, ...}}`; `∅` omitted.
pub fn ecf_to_json(ecf: &EcfTable) -> Value {
    let mut out = Map::new();
    ground_json(ecf.ground(), &mut out);
    out.insert("theta".into(), Value::Object(subset_map(ecf.ground(), ecf.theta())));
    Value::Object(out)
}

pub fn ecf_from_json(v: &Value) -> Result<EcfTable> {
    let g = ground_from_json(v)?;
    let theta = read_subset_map(&g, field(object(v, "ECF table")?, "theta")?, false)?;
    EcfTable::new(g, theta)
}

pub fn tau_to_json(tau: &TauTable) -> Value {
    let mut out = Map::new();
    ground_json(tau.ground(), &mut out);
    out.insert("tau".into(), Value::Object(subset_map(tau.ground(), tau.tau())));
    Value::Object(out)
}

/// Reads a τ table without checking its invariants.
pub fn tau_from_json(v: &Value) -> Result<TauTable> {
    let g = ground_from_json(v)?;
    let tau = read_subset_map(&g, field(object(v, "tau table")?, "tau")?, false)?;
    TauTable::new_unchecked(g, tau)
}

/// Either kind of table, told apart by its `"theta"` or `"tau"` key.
#[derive(Clone, Debug)]
pub enum Table {
    Ecf(EcfTable),
    Tau(TauTable),
}

pub fn table_from_json(v: &Value) -> Result<Table> {
    let obj = object(v, "table")?;
    match (obj.contains_key("theta"), obj.contains_key("tau")) {
        (true, false) => Ok(Table::Ecf(ecf_from_json(v)?)),
        (false, true) => Ok(Table::Tau(tau_from_json(v)?)),
        _ => Err(Error::Format("table needs exactly one of \"theta\" and \"tau\"".into())),
    }
}

/// Outcome of `validate_ecf` with readable messages.
pub fn validation_to_json(v: &Validation, g: &GroundSet) -> Value {
    let diagnostics: Vec<Value> = v
        .diagnostics
        .iter()
        .map(|d| {
            json!({
                "kind": d.kind,
                "subset": g.format_subset(d.subset),
                "value": num(d.value),
                "bound": num(d.bound),
                "message": d.message(g),
            })
        })
        .collect();
    json!({
        "passed": v.passed,
        "tol": num(v.tol),
        "min_tau": num(v.min_tau),
        "min_tau_subset": g.format_subset(v.min_tau_subset),
        "diagnostics": diagnostics,
    })
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn parse_cell(s: &str, line: u64) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("line {line}: {s:?} is not a number")))
}

/// Rows of `label,v1,...,vk` under a header; returns labels and values.
fn read_labelled_rows<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv_reader(r);
    let width = rd.headers()?.len();
    if width < 2 {
        return Err(Error::Format("expected a label column and at least one value column".into()));
    }
    let (mut labels, mut rows) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        labels.push(rec[0].to_string());
        rows.push(rec.iter().skip(1).map(|s| parse_cell(s, line)).collect::<Result<Vec<_>>>()?);
    }
    Ok((labels, rows))
}

fn write_labelled_rows<W: Write>(w: W, first: &str, prefix: &str, labels: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let k = rows.first().map_or(0, Vec::len);
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec![first.to_string()];
    header.extend((1..=k).map(|j| format!("{prefix}{j}")));
    wr.write_record(&header)?;
    for (l, row) in labels.iter().zip(rows) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().map(|&v| fmt_g17(v)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// `site,a1,...,aq`, one row per site; rows are normalized on reading.
pub fn read_spectral_csv<R: Read>(r: R) -> Result<DiscreteSpectralMeasure> {
    let (labels, rows) = read_labelled_rows(r)?;
    DiscreteSpectralMeasure::from_unnormalized(GroundSet::new(labels)?, rows)
}

pub fn write_spectral_csv<W: Write>(w: W, sm: &DiscreteSpectralMeasure) -> Result<()> {
    write_labelled_rows(w, "site", "a", sm.ground().labels(), sm.rows())
}

/// `label,x1,...,xd`.
pub fn read_coords_csv<R: Read>(r: R) -> Result<GroundSet> {
    let (labels, rows) = read_labelled_rows(r)?;
    GroundSet::new(labels)?.with_coords(rows)
}

pub fn write_coords_csv<W: Write>(w: W, g: &GroundSet) -> Result<()> {
    let coords = g.coords().ok_or(Error::MissingCoords)?;
    write_labelled_rows(w, "label", "x", g.labels(), coords)
}

/// Sidecar of a sample CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: usize,
    pub seed: u64,
    pub generator: String,
}

impl SampleMeta {
    pub fn of(batch: &SampleBatch) -> Self {
        SampleMeta {
            n: batch.n(),
            seed: batch.seed,
            generator: GENERATOR.into(),
        }
    }
}

/// Header of site labels, then one replicate per row.
pub fn write_samples_csv<W: Write>(w: W, batch: &SampleBatch) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(&batch.labels)?;
    let mut rec: Vec<String> = Vec::with_capacity(batch.m());
    for row in batch.rows() {
        rec.clear();
        rec.extend(row.iter().map(|&v| fmt_g17(v)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(r: R, seed: u64) -> Result<SampleBatch> {
    let mut rd = csv_reader(r);
    let labels: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    GroundSet::new(labels.clone())?;
    let mut values = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != labels.len() {
            return Err(Error::Format(format!("line {line}: expected {} values", labels.len())));
        }
        for s in rec.iter() {
            values.push(parse_cell(s, line)?);
        }
    }
    SampleBatch::new(labels, seed, values)
}

/// `{"labels", "halfspaces": [{"A": [...], "b": θ(A)}], "vertices": [[...]]}`.
pub fn polytope_to_json(p: &DepSetPolytope) -> Value {
    let halfspaces: Vec<Value> = p
        .halfspaces
        .iter()
        .map(|h| {
            let a: Vec<&str> = h.mask.sites().map(|t| p.ground.labels()[t].as_str()).collect();
            json!({ "A": a, "b": num(h.bound) })
        })
        .collect();
    let vertices: Vec<Value> = p
        .vertices
        .iter()
        .map(|v| Value::Array(v.iter().map(|&x| num(x)).collect()))
        .collect();
    json!({
        "labels": p.ground.labels(),
        "halfspaces": halfspaces,
        "vertices": vertices,
    })
}

/// Header of site labels, one vertex per row.
pub fn write_vertices_csv<W: Write>(w: W, p: &DepSetPolytope) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(p.ground.labels())?;
    for v in &p.vertices {
        wr.write_record(v.iter().map(|&x| fmt_g17(x)))?;
    }
    wr.flush()?;
    Ok(())
}
