//! Command-line front end. [`run_command`] does all the work and never
//! touches the process streams, so it can be driven in-process.

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::association::association_matrix;
use crate::clustering::{cluster, cross_tabulate, ClusterConfig, Metric};
use crate::error::{Error, Result};
use crate::io::{
    emit_report, equal_probability_histogram, parse_table, BarycenterReport, ClusterReport,
    Comparison, DistanceReport, DistanceRow, Format, Payload, ReportDocument, SummaryRow, Value,
};
use crate::modal::DEFAULT_RESOLUTION;
use crate::table::DistributionalTable;
use crate::univariate::{barycenter, summarize};
use crate::wasserstein::{decompose, distance_squared};

/// Exit status for usage errors; every other failure exits with 1.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Wasserstein,
    Mahalanobis,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Wasserstein => Metric::Wasserstein,
            MetricArg::Mahalanobis => Metric::Mahalanobis,
        }
    }
}

/// Wasserstein statistics and clustering for distribution-valued tables.
#[derive(Debug, Parser)]
#[command(name = "modalstat", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: FormatArg,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Knots used to lower parametric densities.
    #[arg(long, global = true, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: usize,

    /// Table format; inferred from the file extension when omitted.
    #[arg(long, global = true, value_enum)]
    pub input_format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct TableArg {
    /// Input table (JSON or CSV).
    pub table: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Barycenter moments and Wasserstein dispersion per variable.
    Summary(TableArg),
    /// Codeviance, covariance, and correlation matrices.
    Assoc(TableArg),
    /// Wasserstein distance between two individuals.
    Dist {
        #[command(flatten)]
        input: TableArg,
        /// Id of the first individual.
        #[arg(long = "i")]
        i: String,
        /// Id of the second individual.
        #[arg(long = "j")]
        j: String,
        /// Split each squared distance into location, size, and shape.
        #[arg(long)]
        decompose: bool,
    },
    /// Barycenter of one variable as a quantile function and a histogram.
    Barycenter {
        #[command(flatten)]
        input: TableArg,
        /// Variable name.
        #[arg(long)]
        var: String,
        /// Equal-probability bins of the display histogram.
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Dynamic clustering into k groups.
    Cluster {
        #[command(flatten)]
        input: TableArg,
        /// Number of clusters.
        #[arg(short = 'k')]
        k: usize,
        #[arg(long, value_enum, default_value = "wasserstein")]
        metric: MetricArg,
        /// Standardize every variable before clustering.
        #[arg(long)]
        standardize: bool,
        #[arg(long, default_value_t = crate::clustering::DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = crate::clustering::DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Relative ridge for the Mahalanobis matrix inversion.
        #[arg(long, default_value_t = crate::mahalanobis::DEFAULT_RIDGE)]
        ridge: f64,
        /// Also cluster under this metric and cross-tabulate both partitions.
        #[arg(long, value_enum)]
        compare_metric: Option<MetricArg>,
    },
}

/// Result of one invocation: exit status and the bytes destined for each
/// stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: i32,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_command<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string().into_bytes();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    status: 0,
                    stdout: text,
                    stderr: Vec::new(),
                },
                _ => failure(
                    &Error::Usage(e.kind().to_string()),
                    Some(&e.render().to_string()),
                ),
            };
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| execute(&cli)))
        .unwrap_or_else(|_| Err(Error::Domain("internal error".into())));
    match result {
        Ok(bytes) => match &cli.output {
            Some(path) => match std::fs::write(path, &bytes) {
                Ok(()) => Outcome {
                    status: 0,
                    stdout: Vec::new(),
                    stderr: Vec::new(),
                },
                Err(e) => failure(&Error::Io(format!("{}: {e}", path.display())), None),
            },
            None => Outcome {
                status: 0,
                stdout: bytes,
                stderr: Vec::new(),
            },
        },
        Err(e) => failure(&e, None),
    }
}

/// Structured error document on stderr.
fn failure(e: &Error, detail: Option<&str>) -> Outcome {
    let mut body = serde_json::Map::new();
    body.insert("kind".into(), e.kind().into());
    body.insert("message".into(), e.to_string().into());
    if let Some(d) = detail {
        body.insert("detail".into(), d.trim_end().into());
    }
    let doc = serde_json::json!({ "error": body });
    let mut stderr = doc.to_string().into_bytes();
    stderr.push(b'\n');
    Outcome {
        status: if matches!(e, Error::Usage(_)) {
            EXIT_USAGE
        } else {
            EXIT_FAILURE
        },
        stdout: Vec::new(),
        stderr,
    }
}

fn infer_format(path: &Path, explicit: Option<FormatArg>) -> Result<Format> {
    if let Some(f) = explicit {
        return Ok(f.into());
    }
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        _ => Err(Error::Usage(format!(
            "cannot infer the format of `{}`; pass --input-format json|csv",
            path.display()
        ))),
    }
}

fn load(cli: &Cli, path: &Path) -> Result<(Vec<u8>, DistributionalTable, Vec<(String, Value)>)> {
    let format = infer_format(path, cli.input_format)?;
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let table = parse_table(&bytes, format)?.to_table(cli.resolution)?;
    let params = vec![
        ("input".to_string(), Value::Str(path.display().to_string())),
        (
            "input_format".to_string(),
            Value::Str(match format {
                Format::Json => "json".into(),
                Format::Csv => "csv".into(),
            }),
        ),
        ("resolution".to_string(), Value::UInt(cli.resolution as u64)),
    ];
    Ok((bytes, table, params))
}

fn param(key: &str, v: impl Into<Value>) -> (String, Value) {
    (key.to_string(), v.into())
}

fn execute(cli: &Cli) -> Result<Vec<u8>> {
    let report = match &cli.command {
        Command::Summary(arg) => {
            let (bytes, table, params) = load(cli, &arg.table)?;
            let rows = table
                .columns()
                .iter()
                .zip(table.variable_names())
                .map(|(c, name)| {
                    Ok(SummaryRow {
                        variable: name.clone(),
                        summary: summarize(c)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ReportDocument::new("summary", &bytes, params, Payload::Summary(rows))
        }
        Command::Assoc(arg) => {
            let (bytes, table, params) = load(cli, &arg.table)?;
            let m = association_matrix(&table)?;
            ReportDocument::new("assoc", &bytes, params, Payload::Association(m))
        }
        Command::Dist {
            input,
            i,
            j,
            decompose: split,
        } => {
            let (bytes, table, mut params) = load(cli, &input.table)?;
            let find = |id: &str| {
                table
                    .id_index(id)
                    .ok_or_else(|| Error::Validation(format!("no individual with id `{id}`")))
            };
            let (a, b) = (find(i)?, find(j)?);
            let rows = table
                .variable_names()
                .iter()
                .enumerate()
                .map(|(v, name)| {
                    let (x, y) = (table.cell(a, v), table.cell(b, v));
                    DistanceRow {
                        variable: name.clone(),
                        distance_squared: distance_squared(x, y),
                        decomposition: split.then(|| decompose(x, y)),
                    }
                })
                .collect();
            params.extend([
                param("i", i.as_str()),
                param("j", j.as_str()),
                param("decompose", *split),
            ]);
            let rep = DistanceReport {
                i: i.clone(),
                j: j.clone(),
                rows,
            };
            ReportDocument::new("dist", &bytes, params, Payload::Distance(rep))
        }
        Command::Barycenter { input, var, bins } => {
            let (bytes, table, mut params) = load(cli, &input.table)?;
            let v = table
                .variable_index(var)
                .ok_or_else(|| Error::Validation(format!("no variable named `{var}`")))?;
            let bary = barycenter(table.column(v))?;
            let histogram = equal_probability_histogram(&bary, *bins)?;
            params.extend([param("var", var.as_str()), param("bins", *bins)]);
            let rep = BarycenterReport {
                variable: var.clone(),
                n: table.n(),
                barycenter: bary,
                histogram,
            };
            ReportDocument::new("barycenter", &bytes, params, Payload::Barycenter(rep))
        }
        Command::Cluster {
            input,
            k,
            metric,
            standardize,
            restarts,
            seed,
            max_iter,
            ridge,
            compare_metric,
        } => {
            let (bytes, table, mut params) = load(cli, &input.table)?;
            let config = ClusterConfig {
                k: *k,
                metric: (*metric).into(),
                standardize: *standardize,
                restarts: *restarts,
                max_iter: *max_iter,
                seed: *seed,
                ridge: *ridge,
            };
            let result = cluster(&table, &config)?;
            let comparison = match compare_metric {
                Some(m) => {
                    let other = cluster(
                        &table,
                        &ClusterConfig {
                            metric: (*m).into(),
                            ..config.clone()
                        },
                    )?;
                    Some(Comparison {
                        metric: other.metric,
                        crosstab: cross_tabulate(&result.partition, &other.partition)?,
                        criterion: other.criterion,
                        quality: other.quality,
                        partition: other.partition,
                    })
                }
                None => None,
            };
            params.extend([
                param("k", *k),
                param("metric", Metric::from(*metric).to_string()),
                param("standardize", *standardize),
                param("restarts", *restarts),
                param("seed", *seed),
                param("max_iter", *max_iter),
                param("ridge", *ridge),
                (
                    "compare_metric".to_string(),
                    compare_metric.map_or(Value::Null, |m| Value::Str(Metric::from(m).to_string())),
                ),
            ]);
            let rep = ClusterReport {
                ids: table.ids().to_vec(),
                variable_names: table.variable_names().to_vec(),
                max_iter: *max_iter,
                result,
                comparison,
            };
            ReportDocument::new("cluster", &bytes, params, Payload::Cluster(Box::new(rep)))
        }
    };
    emit_report(&report, cli.format.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        let out = run_command(["modalstat", "frobnicate"]);
        assert_eq!(out.status, EXIT_USAGE);
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "usage");
        assert_eq!(run_command(["modalstat", "summary"]).status, EXIT_USAGE);
        assert_eq!(run_command(["modalstat", "--help"]).status, 0);
    }

    #[test]
    fn missing_file_is_io_error() {
        let out = run_command(["modalstat", "summary", "/nonexistent/table.json"]);
        assert_eq!(out.status, EXIT_FAILURE);
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "io");
    }

    #[test]
    fn unknown_extension_needs_explicit_format() {
        let out = run_command(["modalstat", "summary", "table.txt"]);
        assert_eq!(out.status, EXIT_USAGE);
    }
}
