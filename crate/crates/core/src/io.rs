//! Table ingestion (JSON and CSV) and deterministic report emission.
//!
//! CSV cell syntax, one modal value per cell:
//!
//! | cell               | value                          |
//! |--------------------|--------------------------------|
//! | `2.5`              | point                          |
//! | `0:1`              | interval                       |
//! | `0:1:0.3;1:4:0.7`  | histogram (`lo:hi:weight`)     |
//! | `1@0.5;5@0.5`      | discrete (`value@weight`)      |
//! | `normal(0;1)`      | parametric (`family(p1;p2)`)   |

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::association::AssociationMatrix;
use crate::clustering::{ClusteringResult, CrossTab, Metric, Partition};
use crate::error::{Error, Result};
use crate::modal::{Atom, Bin, ModalValue};
use crate::piecewise::Segment;
use crate::quantile::QuantileFunction;
use crate::table::DistributionalTable;
use crate::univariate::VariableSummary;
use crate::wasserstein::WassersteinDecomposition;

pub const SCHEMA_VERSION: u64 = 1;
pub const TOOL_NAME: &str = "modalstat";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Usage(format!(
                "unknown format `{other}` (expected json or csv)"
            ))),
        }
    }
}

const DECLARED_KINDS: [&str; 6] = [
    "point",
    "interval",
    "histogram",
    "discrete",
    "parametric",
    "mixed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    /// Informational only; cells of any kind are accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndividualRecord {
    pub id: String,
    pub values: Vec<ModalValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDocument {
    pub variables: Vec<VariableSpec>,
    pub individuals: Vec<IndividualRecord>,
}

impl TableDocument {
    /// Checks shape, uniqueness, and every cell's invariants. Returns the
    /// canonical document (sorted bins and atoms).
    pub fn validated(&self) -> Result<TableDocument> {
        if self.variables.is_empty() {
            return Err(Error::Validation("table declares no variables".into()));
        }
        if self.individuals.is_empty() {
            return Err(Error::Validation("table has no individuals".into()));
        }
        let mut names = HashSet::new();
        for v in &self.variables {
            if v.name.is_empty() {
                return Err(Error::Validation("variable name is empty".into()));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::Validation(format!(
                    "variable `{}` is declared twice",
                    v.name
                )));
            }
            if let Some(kind) = &v.kind {
                if !DECLARED_KINDS.contains(&kind.as_str()) {
                    return Err(Error::Validation(format!(
                        "variable `{}` declares unknown kind `{kind}`",
                        v.name
                    )));
                }
            }
        }
        let p = self.variables.len();
        let mut ids = HashSet::new();
        let mut individuals = Vec::with_capacity(self.individuals.len());
        for row in &self.individuals {
            if !ids.insert(row.id.as_str()) {
                return Err(Error::Validation(format!(
                    "row id `{}` is not unique",
                    row.id
                )));
            }
            if row.values.len() != p {
                return Err(Error::Validation(format!(
                    "row `{}` has {} values, expected {p}",
                    row.id,
                    row.values.len()
                )));
            }
            let values = row
                .values
                .iter()
                .zip(&self.variables)
                .map(|(v, var)| {
                    v.validated().map_err(|e| match e {
                        Error::Validation(m) => Error::Validation(format!(
                            "row `{}`, variable `{}`: {m}",
                            row.id, var.name
                        )),
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            individuals.push(IndividualRecord {
                id: row.id.clone(),
                values,
            });
        }
        Ok(TableDocument {
            variables: self.variables.clone(),
            individuals,
        })
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Lowers every cell with the given parametric resolution.
    pub fn to_table(&self, resolution: usize) -> Result<DistributionalTable> {
        let ids = self.individuals.iter().map(|r| r.id.clone()).collect();
        let lowered = self
            .individuals
            .iter()
            .map(|rec| {
                rec.values
                    .iter()
                    .zip(&self.variables)
                    .map(|(v, var)| {
                        v.lower(resolution).map_err(|e| match e {
                            Error::Validation(m) => Error::Validation(format!(
                                "row `{}`, variable `{}`: {m}",
                                rec.id, var.name
                            )),
                            other => other,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DistributionalTable::new(self.variable_names(), ids, lowered)
    }
}

/// Parses and validates a table document.
pub fn parse_table(bytes: &[u8], format: Format) -> Result<TableDocument> {
    let doc = match format {
        Format::Json => parse_json(bytes)?,
        Format::Csv => parse_csv(bytes)?,
    };
    doc.validated()
}

fn parse_json(bytes: &[u8]) -> Result<TableDocument> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        locus: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn parse_csv(bytes: &[u8]) -> Result<TableDocument> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes);
    let csv_err = |e: csv::Error| {
        let locus = e
            .position()
            .map_or_else(|| "header".to_string(), |p| format!("line {}", p.line()));
        Error::Parse {
            locus,
            message: e.to_string(),
        }
    };
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() || &header[0] != "id" {
        return Err(Error::Parse {
            locus: "line 1, field 1".into(),
            message: "first header column must be `id`".into(),
        });
    }
    let variables: Vec<VariableSpec> = header
        .iter()
        .skip(1)
        .map(|name| VariableSpec {
            name: name.to_string(),
            kind: None,
        })
        .collect();
    let mut individuals = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or_default().to_string();
        let values = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, cell)| {
                parse_cell(cell).map_err(|message| Error::Parse {
                    locus: format!(
                        "line {line}, field `{}`",
                        variables.get(j).map_or("?", |v| v.name.as_str())
                    ),
                    message,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        individuals.push(IndividualRecord { id, values });
    }
    Ok(TableDocument {
        variables,
        individuals,
    })
}

fn number(s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("`{}` is not a number", s.trim()))
}

/// Parses one CSV cell into a modal value.
pub fn parse_cell(cell: &str) -> std::result::Result<ModalValue, String> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Err("empty cell".into());
    }
    if let Some(open) = cell.find('(') {
        let family = cell[..open].trim();
        let rest = cell[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| format!("parametric cell `{cell}` lacks a closing parenthesis"))?;
        let params = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split([';', ','])
                .map(number)
                .collect::<std::result::Result<_, _>>()?
        };
        return Ok(ModalValue::Parametric {
            family: family.to_string(),
            params,
        });
    }
    if cell.contains('@') {
        let atoms = cell
            .split(';')
            .map(|item| {
                let (x, w) = item
                    .split_once('@')
                    .ok_or_else(|| format!("discrete atom `{item}` is not `value@weight`"))?;
                Ok(Atom {
                    value: number(x)?,
                    weight: number(w)?,
                })
            })
            .collect::<std::result::Result<_, String>>()?;
        return Ok(ModalValue::Discrete { atoms });
    }
    if cell.contains(':') {
        let items: Vec<&str> = cell.split(';').collect();
        let first: Vec<&str> = items[0].split(':').collect();
        if items.len() == 1 && first.len() == 2 {
            return Ok(ModalValue::interval(number(first[0])?, number(first[1])?));
        }
        let bins = items
            .iter()
            .map(|item| {
                let parts: Vec<&str> = item.split(':').collect();
                if parts.len() != 3 {
                    return Err(format!("histogram bin `{item}` is not `lo:hi:weight`"));
                }
                Ok(Bin {
                    lo: number(parts[0])?,
                    hi: number(parts[1])?,
                    weight: number(parts[2])?,
                })
            })
            .collect::<std::result::Result<_, String>>()?;
        return Ok(ModalValue::Histogram { bins });
    }
    Ok(ModalValue::point(number(cell)?))
}

/// Renders one modal value in CSV cell syntax, shortest round-trip floats.
pub fn format_cell(value: &ModalValue) -> String {
    let join = |parts: Vec<String>| parts.join(";");
    match value {
        ModalValue::Point { value } => value.to_string(),
        ModalValue::Interval { lo, hi } => format!("{lo}:{hi}"),
        ModalValue::Histogram { bins } => join(
            bins.iter()
                .map(|b| format!("{}:{}:{}", b.lo, b.hi, b.weight))
                .collect(),
        ),
        ModalValue::Discrete { atoms } => join(
            atoms
                .iter()
                .map(|a| format!("{}@{}", a.value, a.weight))
                .collect(),
        ),
        ModalValue::Parametric { family, params } => {
            format!(
                "{family}({})",
                join(params.iter().map(f64::to_string).collect())
            )
        }
    }
}

/// Serializes a table document. CSV drops declared kinds.
pub fn emit_table(doc: &TableDocument, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(doc).map_err(|e| Error::Io(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["id".to_string()];
            header.extend(doc.variable_names());
            w.write_record(&header)
                .map_err(|e| Error::Io(e.to_string()))?;
            for row in &doc.individuals {
                let mut rec = vec![row.id.clone()];
                rec.extend(row.values.iter().map(format_cell));
                w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

/// Hex SHA-256 of the raw input bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `%.17g`-style rendering: 17 significant digits, trailing zeros removed.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-4..17).contains(&exp) {
        let trimmed = digits.trim_end_matches('0');
        out.push_str(&trimmed[..1]);
        if trimmed.len() > 1 {
            out.push('.');
            out.push_str(&trimmed[1..]);
        }
        let _ = write!(out, "e{exp}");
        return out;
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(digits.trim_end_matches('0'));
    } else {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        let frac = digits[split..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}

/// An ordered, report-ready value tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    UInt(u64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(Vec<(String, Value)>),
}

impl Value {
    fn map(entries: Vec<(&str, Value)>) -> Value {
        Value::Map(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    fn floats(xs: &[f64]) -> Value {
        Value::List(xs.iter().map(|&x| Value::Float(x)).collect())
    }

    fn strs(xs: &[String]) -> Value {
        Value::List(xs.iter().map(|s| Value::Str(s.clone())).collect())
    }

    fn uints(xs: &[usize]) -> Value {
        Value::List(xs.iter().map(|&x| Value::UInt(x as u64)).collect())
    }

    fn float_matrix(m: &[Vec<f64>]) -> Value {
        Value::List(m.iter().map(|r| Value::floats(r)).collect())
    }

    /// Scalar rendering for CSV cells; null becomes empty.
    fn scalar(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::UInt(u) => u.to_string(),
            Value::Float(x) if x.is_finite() => format_float(*x),
            Value::Float(_) => String::new(),
            Value::Str(s) => s.clone(),
            Value::List(_) | Value::Map(_) => String::new(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Null, Value::Float)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<u64> for Value {
    fn from(u: u64) -> Self {
        Value::UInt(u)
    }
}

impl From<usize> for Value {
    fn from(u: usize) -> Self {
        Value::UInt(u as u64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::UInt(u) => out.push_str(&u.to_string()),
        Value::Float(x) if x.is_finite() => out.push_str(&format_float(*x)),
        Value::Float(_) => out.push_str("null"),
        Value::Str(s) => out.push_str(&serde_json::to_string(s).expect("strings always serialize")),
        Value::List(items) => {
            let flat = items
                .iter()
                .all(|i| !matches!(i, Value::List(_) | Value::Map(_)));
            if items.is_empty() {
                out.push_str("[]");
            } else if flat {
                out.push('[');
                for (n, item) in items.iter().enumerate() {
                    if n > 0 {
                        out.push_str(", ");
                    }
                    write_json(item, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (n, item) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write_json(item, indent + 1, out);
                    out.push_str(if n + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Map(entries) => {
            if entries.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (n, (k, item)) in entries.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("strings always serialize"));
                out.push_str(": ");
                write_json(item, indent + 1, out);
                out.push_str(if n + 1 < entries.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Per-variable row of the `summary` report.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variable: String,
    pub summary: VariableSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub variable: String,
    pub distance_squared: f64,
    pub decomposition: Option<WassersteinDecomposition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub i: String,
    pub j: String,
    pub rows: Vec<DistanceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterReport {
    pub variable: String,
    pub n: usize,
    pub barycenter: QuantileFunction,
    pub histogram: Vec<Bin>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metric: Metric,
    pub partition: Partition,
    pub criterion: f64,
    pub quality: f64,
    pub crosstab: CrossTab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub ids: Vec<String>,
    pub variable_names: Vec<String>,
    pub max_iter: usize,
    pub result: ClusteringResult,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Summary(Vec<SummaryRow>),
    Association(AssociationMatrix),
    Distance(DistanceReport),
    Barycenter(BarycenterReport),
    Cluster(Box<ClusterReport>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub schema_version: u64,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input_digest: String,
    pub parameters: Vec<(String, Value)>,
    pub payload: Payload,
}

impl ReportDocument {
    pub fn new(
        command: &str,
        input: &[u8],
        parameters: Vec<(String, Value)>,
        payload: Payload,
    ) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            input_digest: digest(input),
            parameters,
            payload,
        }
    }
}

/// Step-function histogram of a quantile function on `bins`
/// equal-probability bins.
pub fn equal_probability_histogram(q: &QuantileFunction, bins: usize) -> Result<Vec<Bin>> {
    if bins == 0 {
        return Err(Error::Validation("bin count must be at least 1".into()));
    }
    let w = 1.0 / bins as f64;
    (0..bins)
        .map(|b| {
            let t0 = b as f64 / bins as f64;
            let t1 = (b + 1) as f64 / bins as f64;
            Ok(Bin {
                lo: q.evaluate(t0)?,
                hi: left_limit(q, t1),
                weight: w,
            })
        })
        .collect()
}

/// `Q(t⁻)`, the value approached from the left.
fn left_limit(q: &QuantileFunction, t: f64) -> f64 {
    let segs = q.segments();
    let idx = segs.partition_point(|s| s.t_hi < t).min(segs.len() - 1);
    segs[idx].value_at(t)
}

fn segments_value(segs: &[Segment]) -> Value {
    Value::List(
        segs.iter()
            .map(|s| {
                Value::map(vec![
                    ("t_lo", s.t_lo.into()),
                    ("t_hi", s.t_hi.into()),
                    ("q_lo", s.q_lo.into()),
                    ("q_hi", s.q_hi.into()),
                ])
            })
            .collect(),
    )
}

fn summary_fields(r: &SummaryRow) -> Vec<(&'static str, Value)> {
    let s = &r.summary;
    vec![
        ("variable", r.variable.clone().into()),
        ("n", s.n.into()),
        ("barycenter_mean", s.barycenter_mean.into()),
        ("barycenter_std", s.barycenter_std.into()),
        ("ss", s.ss.into()),
        ("variance", s.variance.into()),
        ("std", s.std.into()),
    ]
}

fn distance_fields(r: &DistanceRow) -> Vec<(&'static str, Value)> {
    let mut f = vec![
        ("variable", r.variable.clone().into()),
        ("distance_squared", r.distance_squared.into()),
        ("distance", r.distance_squared.sqrt().into()),
    ];
    if let Some(d) = &r.decomposition {
        f.push(("location", d.location.into()));
        f.push(("size", d.size.into()));
        f.push(("shape", d.shape.into()));
    }
    f
}

fn distance_total(rep: &DistanceReport) -> DistanceRow {
    let d2 = rep.rows.iter().map(|r| r.distance_squared).sum();
    let decomposition = rep.rows.iter().try_fold(
        WassersteinDecomposition {
            location: 0.0,
            size: 0.0,
            shape: 0.0,
            total: 0.0,
        },
        |acc, r| {
            r.decomposition.as_ref().map(|d| WassersteinDecomposition {
                location: acc.location + d.location,
                size: acc.size + d.size,
                shape: acc.shape + d.shape,
                total: acc.total + d.total,
            })
        },
    );
    DistanceRow {
        variable: "total".into(),
        distance_squared: d2,
        decomposition,
    }
}

fn cluster_scalars(rep: &ClusterReport) -> Vec<(&'static str, Value)> {
    let r = &rep.result;
    let mut f = vec![
        ("k", r.partition.k.into()),
        ("metric", r.metric.to_string().into()),
        ("standardized", r.standardized.into()),
        ("seed", r.seed.into()),
        ("restarts", r.restarts_run.into()),
        ("max_iter", rep.max_iter.into()),
        ("criterion", r.criterion.into()),
        ("total", r.total.into()),
        ("quality", r.quality.into()),
        ("iterations", r.iterations.into()),
        ("quality_denominator", "same_metric".into()),
    ];
    if r.metric == Metric::Mahalanobis {
        f.push(("covariance_scaling", "ss_over_n".into()));
        f.push(("regularized", r.regularized.into()));
    }
    f
}

fn payload_json(payload: &Payload) -> Value {
    match payload {
        Payload::Summary(rows) => Value::map(vec![(
            "variables",
            Value::List(rows.iter().map(|r| Value::map(summary_fields(r))).collect()),
        )]),
        Payload::Association(m) => Value::map(vec![
            ("variables", Value::strs(&m.names)),
            ("n", m.n.into()),
            ("codeviance", Value::float_matrix(&m.ss)),
            ("covariance", Value::float_matrix(&m.cov)),
            (
                "correlation",
                Value::List(
                    m.corr
                        .iter()
                        .map(|r| Value::List(r.iter().map(|&c| c.into()).collect()))
                        .collect(),
                ),
            ),
        ]),
        Payload::Distance(rep) => Value::map(vec![
            ("i", rep.i.clone().into()),
            ("j", rep.j.clone().into()),
            ("metric", "wasserstein".into()),
            (
                "variables",
                Value::List(
                    rep.rows
                        .iter()
                        .map(|r| Value::map(distance_fields(r)))
                        .collect(),
                ),
            ),
            ("total", Value::map(distance_fields(&distance_total(rep)))),
        ]),
        Payload::Barycenter(rep) => Value::map(vec![
            ("variable", rep.variable.clone().into()),
            ("n", rep.n.into()),
            ("mean", rep.barycenter.mean().into()),
            ("std", rep.barycenter.std().into()),
            (
                "quantile_function",
                segments_value(rep.barycenter.segments()),
            ),
            (
                "histogram",
                Value::List(
                    rep.histogram
                        .iter()
                        .map(|b| {
                            Value::map(vec![
                                ("lo", b.lo.into()),
                                ("hi", b.hi.into()),
                                ("weight", b.weight.into()),
                            ])
                        })
                        .collect(),
                ),
            ),
        ]),
        Payload::Cluster(rep) => {
            let r = &rep.result;
            let mut f = cluster_scalars(rep);
            f.push(("sizes", Value::uints(&r.partition.sizes())));
            f.push((
                "assignments",
                Value::List(
                    rep.ids
                        .iter()
                        .zip(&r.partition.assignments)
                        .map(|(id, &c)| {
                            Value::map(vec![("id", id.clone().into()), ("cluster", c.into())])
                        })
                        .collect(),
                ),
            ));
            f.push((
                "prototypes",
                Value::List(
                    r.prototypes
                        .iter()
                        .enumerate()
                        .map(|(h, p)| {
                            Value::map(vec![
                                ("cluster", h.into()),
                                (
                                    "components",
                                    Value::List(
                                        p.components
                                            .iter()
                                            .zip(&rep.variable_names)
                                            .map(|(q, name)| {
                                                Value::map(vec![
                                                    ("variable", name.clone().into()),
                                                    ("mean", q.mean().into()),
                                                    ("std", q.std().into()),
                                                    (
                                                        "quantile_function",
                                                        segments_value(q.segments()),
                                                    ),
                                                ])
                                            })
                                            .collect(),
                                    ),
                                ),
                            ])
                        })
                        .collect(),
                ),
            ));
            f.push(("criterion_history", Value::floats(&r.history)));
            if let Some(c) = &rep.comparison {
                f.push((
                    "comparison",
                    Value::map(vec![
                        ("metric", c.metric.to_string().into()),
                        ("criterion", c.criterion.into()),
                        ("quality", c.quality.into()),
                        ("assignments", Value::uints(&c.partition.assignments)),
                        (
                            "crosstab",
                            Value::List(
                                c.crosstab.counts.iter().map(|r| Value::uints(r)).collect(),
                            ),
                        ),
                        ("row_totals", Value::uints(&c.crosstab.row_totals)),
                        ("col_totals", Value::uints(&c.crosstab.col_totals)),
                        ("agreement", c.crosstab.agreement.into()),
                    ]),
                ));
            }
            Value::map(f)
        }
    }
}

struct CsvOut {
    text: String,
}

impl CsvOut {
    fn meta(&mut self, key: &str, value: &Value) {
        let _ = writeln!(self.text, "# {key}={}", value.scalar());
    }

    fn block(&mut self, name: &str, header: &[String], rows: &[Vec<Value>]) -> Result<()> {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "# block={name}");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)
            .map_err(|e| Error::Io(e.to_string()))?;
        for row in rows {
            w.write_record(row.iter().map(Value::scalar))
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.text
            .push_str(std::str::from_utf8(&bytes).map_err(|e| Error::Io(e.to_string()))?);
        Ok(())
    }

    fn matrix(&mut self, name: &str, names: &[String], rows: Vec<Vec<Value>>) -> Result<()> {
        let mut header = vec!["variable".to_string()];
        header.extend(names.iter().cloned());
        let rows: Vec<Vec<Value>> = names
            .iter()
            .zip(rows)
            .map(|(n, r)| std::iter::once(Value::Str(n.clone())).chain(r).collect())
            .collect();
        self.block(name, &header, &rows)
    }
}

fn fields_block(out: &mut CsvOut, name: &str, rows: Vec<Vec<(&'static str, Value)>>) -> Result<()> {
    let header: Vec<String> = rows
        .first()
        .map(|r| r.iter().map(|(k, _)| k.to_string()).collect())
        .unwrap_or_default();
    let rows: Vec<Vec<Value>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|(_, v)| v).collect())
        .collect();
    out.block(name, &header, &rows)
}

fn payload_csv(payload: &Payload, out: &mut CsvOut) -> Result<()> {
    match payload {
        Payload::Summary(rows) => {
            fields_block(out, "summary", rows.iter().map(summary_fields).collect())
        }
        Payload::Association(m) => {
            let f = |mat: &[Vec<f64>]| -> Vec<Vec<Value>> {
                mat.iter()
                    .map(|r| r.iter().map(|&x| x.into()).collect())
                    .collect()
            };
            out.matrix("codeviance", &m.names, f(&m.ss))?;
            out.matrix("covariance", &m.names, f(&m.cov))?;
            out.matrix(
                "correlation",
                &m.names,
                m.corr
                    .iter()
                    .map(|r| r.iter().map(|&c| c.into()).collect())
                    .collect(),
            )
        }
        Payload::Distance(rep) => {
            out.meta("i", &rep.i.clone().into());
            out.meta("j", &rep.j.clone().into());
            out.meta("metric", &"wasserstein".into());
            let mut rows: Vec<_> = rep.rows.iter().map(distance_fields).collect();
            rows.push(distance_fields(&distance_total(rep)));
            fields_block(out, "distance", rows)
        }
        Payload::Barycenter(rep) => {
            out.meta("variable", &rep.variable.clone().into());
            out.meta("n", &rep.n.into());
            out.meta("mean", &rep.barycenter.mean().into());
            out.meta("std", &rep.barycenter.std().into());
            let header = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
            let segs: Vec<Vec<Value>> = rep
                .barycenter
                .segments()
                .iter()
                .map(|s| vec![s.t_lo.into(), s.t_hi.into(), s.q_lo.into(), s.q_hi.into()])
                .collect();
            out.block(
                "quantile_function",
                &header(&["t_lo", "t_hi", "q_lo", "q_hi"]),
                &segs,
            )?;
            let bins: Vec<Vec<Value>> = rep
                .histogram
                .iter()
                .map(|b| vec![b.lo.into(), b.hi.into(), b.weight.into()])
                .collect();
            out.block("histogram", &header(&["lo", "hi", "weight"]), &bins)
        }
        Payload::Cluster(rep) => {
            let r = &rep.result;
            for (k, v) in cluster_scalars(rep) {
                out.meta(k, &v);
            }
            let assignments: Vec<Vec<Value>> = rep
                .ids
                .iter()
                .zip(&r.partition.assignments)
                .map(|(id, &c)| vec![id.clone().into(), c.into()])
                .collect();
            out.block(
                "assignments",
                &["id".into(), "cluster".into()],
                &assignments,
            )?;
            let mut protos = Vec::new();
            for (h, p) in r.prototypes.iter().enumerate() {
                for (q, name) in p.components.iter().zip(&rep.variable_names) {
                    protos.push(vec![
                        h.into(),
                        name.clone().into(),
                        q.mean().into(),
                        q.std().into(),
                    ]);
                }
            }
            out.block(
                "prototypes",
                &[
                    "cluster".into(),
                    "variable".into(),
                    "mean".into(),
                    "std".into(),
                ],
                &protos,
            )?;
            let history: Vec<Vec<Value>> = r
                .history
                .iter()
                .enumerate()
                .map(|(i, &d)| vec![(i + 1).into(), d.into()])
                .collect();
            out.block(
                "criterion_history",
                &["iteration".into(), "criterion".into()],
                &history,
            )?;
            if let Some(c) = &rep.comparison {
                let mut header = vec![format!("{}\\{}", r.metric, c.metric)];
                header.extend((0..c.crosstab.col_totals.len()).map(|j| j.to_string()));
                let rows: Vec<Vec<Value>> = c
                    .crosstab
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        std::iter::once(i.into())
                            .chain(row.iter().map(|&x| x.into()))
                            .collect()
                    })
                    .collect();
                out.block("crosstab", &header, &rows)?;
                let mut tail = CsvOut {
                    text: String::new(),
                };
                tail.meta("comparison.metric", &c.metric.to_string().into());
                tail.meta("comparison.criterion", &c.criterion.into());
                tail.meta("comparison.quality", &c.quality.into());
                tail.meta("comparison.agreement", &c.crosstab.agreement.into());
                out.text.push('\n');
                out.text.push_str(&tail.text);
            }
            Ok(())
        }
    }
}

/// Deterministic serialization of a report.
pub fn emit_report(report: &ReportDocument, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let doc = Value::map(vec![
                ("schema_version", report.schema_version.into()),
                ("tool", report.tool.clone().into()),
                ("version", report.version.clone().into()),
                ("command", report.command.clone().into()),
                ("input_digest", report.input_digest.clone().into()),
                ("parameters", Value::Map(report.parameters.clone())),
                ("payload", payload_json(&report.payload)),
            ]);
            let mut text = String::new();
            write_json(&doc, 0, &mut text);
            text.push('\n');
            Ok(text.into_bytes())
        }
        Format::Csv => {
            let mut out = CsvOut {
                text: String::new(),
            };
            out.meta("schema_version", &report.schema_version.into());
            out.meta("tool", &report.tool.clone().into());
            out.meta("version", &report.version.clone().into());
            out.meta("command", &report.command.clone().into());
            out.meta("input_digest", &report.input_digest.clone().into());
            for (k, v) in &report.parameters {
                out.meta(&format!("param.{k}"), v);
            }
            payload_csv(&report.payload, &mut out)?;
            Ok(out.text.into_bytes())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::association_matrix;

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(6.25), "6.25");
        assert_eq!(format_float(1.0 / 12.0), "0.083333333333333329");
        assert_eq!(format_float(2.0), "2");
        assert_eq!(format_float(-1234.5), "-1234.5");
        assert_eq!(format_float(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_float(1e20), "1e20");
        assert_eq!(format_float(0.0001), "0.0001");
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            1.7976931348623157e308,
            123456789.123,
        ] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_cells() {
        assert_eq!(parse_cell("2.5").unwrap(), ModalValue::point(2.5));
        assert_eq!(parse_cell("-1:3").unwrap(), ModalValue::interval(-1.0, 3.0));
        assert_eq!(
            parse_cell("0:1:0.3; 1:4:0.7").unwrap(),
            ModalValue::histogram(&[(0.0, 1.0, 0.3), (1.0, 4.0, 0.7)])
        );
        assert_eq!(
            parse_cell("0:1:1").unwrap(),
            ModalValue::histogram(&[(0.0, 1.0, 1.0)])
        );
        assert_eq!(
            parse_cell("1@0.5;5@0.5").unwrap(),
            ModalValue::discrete(&[(1.0, 0.5), (5.0, 0.5)])
        );
        assert_eq!(
            parse_cell("normal(0;1)").unwrap(),
            ModalValue::parametric("normal", &[0.0, 1.0])
        );
        for bad in ["", "abc", "1:2:3:4", "normal(0;1", "1@", "0:1;2:3"] {
            assert!(parse_cell(bad).is_err(), "{bad}");
        }
        for v in [
            ModalValue::point(0.1),
            ModalValue::interval(-1.0, 3.0),
            ModalValue::histogram(&[(0.0, 1.0, 0.3), (1.0, 4.0, 0.7)]),
            ModalValue::discrete(&[(1.0, 0.25), (5.0, 0.75)]),
            ModalValue::parametric("gamma", &[2.0, 0.5]),
        ] {
            assert_eq!(parse_cell(&format_cell(&v)).unwrap(), v);
        }
    }

    #[test]
    fn json_point_table() {
        let doc = parse_table(
            br#"{"variables":[{"name":"x","kind":"point"}],"individuals":[{"id":"a","values":[{"kind":"point","value":2.0}]}]}"#,
            Format::Json,
        )
        .unwrap();
        let t = doc.to_table(200).unwrap();
        assert_eq!(t.cell(0, 0), &QuantileFunction::constant(2.0));
    }

    #[test]
    fn near_unit_weights_accepted() {
        let doc = parse_table(b"id,x\na,0:1:0.5;1:2:0.499999\n", Format::Csv).unwrap();
        let q = doc.to_table(200).unwrap().cell(0, 0).clone();
        assert!((q.segments()[0].t_hi - 0.5 / 0.999999).abs() < 1e-15);
        assert_eq!(q.segments()[1].t_hi, 1.0);
    }

    #[test]
    fn errors_carry_locus() {
        let e = parse_table(b"id,x\na,0:2:0.5;1:3:0.5\n", Format::Csv).unwrap_err();
        match e {
            Error::Validation(m) => {
                assert!(
                    m.contains("row `a`") && m.contains("variable `x`") && m.contains("overlap"),
                    "{m}"
                )
            }
            other => panic!("{other:?}"),
        }
        let e = parse_table(b"id,x\na,1\nb,zz\n", Format::Csv).unwrap_err();
        assert!(
            matches!(&e, Error::Parse { locus, .. } if locus == "line 3, field `x`"),
            "{e:?}"
        );
        let e = parse_table(b"{\"variables\": [\n", Format::Json).unwrap_err();
        assert!(
            matches!(&e, Error::Parse { locus, .. } if locus.starts_with("line 2")),
            "{e:?}"
        );
        assert!(parse_table(b"id,x\na,1\na,2\n", Format::Csv).is_err());
        assert!(parse_table(b"id,x\na,1,2\n", Format::Csv).is_err());
        assert!(parse_table(b"name,x\na,1\n", Format::Csv).is_err());
    }

    #[test]
    fn one_by_one_correlation_csv() {
        let t = DistributionalTable::from_column(
            "X",
            vec![
                QuantileFunction::constant(0.0),
                QuantileFunction::constant(4.0),
            ],
        )
        .unwrap();
        let m = association_matrix(&t).unwrap();
        let mut out = CsvOut {
            text: String::new(),
        };
        payload_csv(&Payload::Association(m), &mut out).unwrap();
        assert!(
            out.text.contains("# block=correlation\nvariable,X\nX,1\n"),
            "{}",
            out.text
        );
    }

    #[test]
    fn histogram_rebinning() {
        let q = crate::modal::lower(&ModalValue::histogram(&[(0.0, 1.0, 0.5), (2.0, 2.0, 0.5)]))
            .unwrap();
        let bins = equal_probability_histogram(&q, 4).unwrap();
        let edges: Vec<(f64, f64)> = bins.iter().map(|b| (b.lo, b.hi)).collect();
        assert_eq!(edges, vec![(0.0, 0.5), (0.5, 1.0), (2.0, 2.0), (2.0, 2.0)]);
        assert!(equal_probability_histogram(&q, 0).is_err());
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
