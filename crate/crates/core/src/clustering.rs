//! Dynamic clustering (k-means family) of individuals described by `p`
//! modal variables.
//!
//! Each restart seeds `k` prototypes with distinct individuals, then
//! alternates nearest-prototype assignment with recomputation of each
//! prototype as the componentwise barycenter of its cluster. Because the
//! barycenter minimizes the within-cluster inertia under both supported
//! metrics, the criterion never increases within a restart.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mahalanobis::{inverse_covariance, mahalanobis_squared, SpdMatrix, DEFAULT_RIDGE};
use crate::quantile::QuantileFunction;
use crate::table::DistributionalTable;
use crate::univariate::{barycenter_of, standardize_named};
use crate::wasserstein::distance_squared;

pub const DEFAULT_RESTARTS: usize = 100;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Restarts stop once the criterion changes by less than this fraction.
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Wasserstein,
    Mahalanobis,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Wasserstein => "wasserstein",
            Metric::Mahalanobis => "mahalanobis",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wasserstein" => Ok(Metric::Wasserstein),
            "mahalanobis" => Ok(Metric::Mahalanobis),
            other => Err(Error::Usage(format!(
                "unknown metric `{other}` (expected wasserstein or mahalanobis)"
            ))),
        }
    }
}

/// The dissimilarity `δ` between an individual and a prototype.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricContext {
    /// `Σ_j d²_W` over variables.
    Wasserstein,
    /// Squared Mahalanobis–Wasserstein distance with a fixed inverse matrix.
    Mahalanobis(SpdMatrix),
}

impl MetricContext {
    pub fn metric(&self) -> Metric {
        match self {
            MetricContext::Wasserstein => Metric::Wasserstein,
            MetricContext::Mahalanobis(_) => Metric::Mahalanobis,
        }
    }

    pub fn delta<A, B>(&self, x: &[A], g: &[B]) -> Result<f64>
    where
        A: AsRef<QuantileFunction>,
        B: AsRef<QuantileFunction>,
    {
        match self {
            MetricContext::Wasserstein => {
                if x.len() != g.len() {
                    return Err(Error::Shape(format!(
                        "individual has {} components, prototype {}",
                        x.len(),
                        g.len()
                    )));
                }
                Ok(x.iter()
                    .zip(g)
                    .map(|(a, b)| distance_squared(a.as_ref(), b.as_ref()))
                    .sum())
            }
            MetricContext::Mahalanobis(m) => mahalanobis_squared(x, g, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self, h: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == h)
            .map(|(i, _)| i)
            .collect()
    }
}

/// One barycenter per variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prototype {
    pub components: Vec<QuantileFunction>,
}

impl AsRef<[QuantileFunction]> for Prototype {
    fn as_ref(&self) -> &[QuantileFunction] {
        &self.components
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    pub metric: Metric,
    pub standardize: bool,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub ridge: f64,
}

impl ClusterConfig {
    pub fn new(k: usize) -> Self {
        ClusterConfig {
            k,
            metric: Metric::Wasserstein,
            standardize: false,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub partition: Partition,
    pub prototypes: Vec<Prototype>,
    /// Within-cluster criterion Δ of the best restart.
    pub criterion: f64,
    /// Σᵢ δ(xᵢ, G_E) about the global prototype.
    pub total: f64,
    pub quality: f64,
    pub iterations: usize,
    pub restarts_run: usize,
    pub seed: u64,
    pub metric: Metric,
    pub standardized: bool,
    /// Whether the Mahalanobis matrix needed ridge regularization.
    pub regularized: bool,
    /// Criterion after every update step of the best restart.
    pub history: Vec<f64>,
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub partition: Partition,
    pub prototypes: Vec<Prototype>,
    pub criterion: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Borrowed row view: `rows[i][j]` is individual `i` on variable `j`.
pub type Rows<'a> = Vec<Vec<&'a QuantileFunction>>;

pub fn rows_of(columns: &[Vec<QuantileFunction>]) -> Rows<'_> {
    let n = columns.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| columns.iter().map(|c| &c[i]).collect())
        .collect()
}

/// Nearest prototype for every individual, ties to the lowest index.
pub fn assign(
    rows: &[Vec<&QuantileFunction>],
    prototypes: &[Prototype],
    ctx: &MetricContext,
) -> Result<Partition> {
    if prototypes.is_empty() {
        return Err(Error::EmptyInput("assignment needs at least one prototype"));
    }
    let assignments = rows
        .par_iter()
        .map(|x| {
            let mut best = (0usize, f64::INFINITY);
            for (h, g) in prototypes.iter().enumerate() {
                let d = ctx.delta(x, &g.components)?;
                if d < best.1 {
                    best = (h, d);
                }
            }
            Ok(best.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition {
        assignments,
        k: prototypes.len(),
    })
}

fn cluster_prototype(rows: &[Vec<&QuantileFunction>], members: &[usize]) -> Result<Prototype> {
    let p = rows[members[0]].len();
    let components = (0..p)
        .map(|j| {
            let col: Vec<&QuantileFunction> = members.iter().map(|&i| rows[i][j]).collect();
            barycenter_of(&col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prototype { components })
}

/// Recomputes every prototype as its cluster's barycenter. An empty cluster
/// takes over the individual farthest from its own prototype (among
/// clusters with at least two members), which updates `partition`.
pub fn update_prototypes(
    rows: &[Vec<&QuantileFunction>],
    partition: &mut Partition,
    ctx: &MetricContext,
) -> Result<Vec<Prototype>> {
    let k = partition.k;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in partition.assignments.iter().enumerate() {
        members[a].push(i);
    }
    let mut protos: Vec<Option<Prototype>> = members
        .iter()
        .map(|m| {
            if m.is_empty() {
                Ok(None)
            } else {
                cluster_prototype(rows, m).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    for h in 0..k {
        if !members[h].is_empty() {
            continue;
        }
        let mut pick: Option<(usize, f64)> = None;
        for (i, &a) in partition.assignments.iter().enumerate() {
            if members[a].len() < 2 {
                continue;
            }
            let proto = protos[a]
                .as_ref()
                .expect("non-empty cluster has a prototype");
            let d = ctx.delta(&rows[i], &proto.components)?;
            if pick.is_none_or(|(_, best)| d > best) {
                pick = Some((i, d));
            }
        }
        let (i, _) = pick.ok_or(Error::InvalidK { k, n: rows.len() })?;
        let donor = partition.assignments[i];
        partition.assignments[i] = h;
        members[donor].retain(|&m| m != i);
        members[h].push(i);
        protos[h] = Some(Prototype {
            components: rows[i].iter().map(|&q| q.clone()).collect(),
        });
        protos[donor] = Some(cluster_prototype(rows, &members[donor])?);
    }
    Ok(protos
        .into_iter()
        .map(|p| p.expect("all clusters repaired"))
        .collect())
}

/// Δ(P, L) = Σᵢ δ(xᵢ, G_{P(i)}), summed in individual order.
pub fn criterion(
    rows: &[Vec<&QuantileFunction>],
    partition: &Partition,
    prototypes: &[Prototype],
    ctx: &MetricContext,
) -> Result<f64> {
    let terms = rows
        .par_iter()
        .zip(partition.assignments.par_iter())
        .map(|(x, &h)| ctx.delta(x, &prototypes[h].components))
        .collect::<Result<Vec<_>>>()?;
    Ok(terms.iter().sum())
}

/// Σᵢ δ(xᵢ, G_E) with `G_E` the barycenter of all individuals.
pub fn total_inertia(rows: &[Vec<&QuantileFunction>], ctx: &MetricContext) -> Result<f64> {
    let all: Vec<usize> = (0..rows.len()).collect();
    let global = cluster_prototype(rows, &all)?;
    let single = Partition {
        assignments: vec![0; rows.len()],
        k: 1,
    };
    criterion(rows, &single, std::slice::from_ref(&global), ctx)
}

/// `Q = 1 − Δ / Σᵢ δ(xᵢ, G_E)`; 0 when the total inertia is zero.
pub fn quality(
    rows: &[Vec<&QuantileFunction>],
    partition: &Partition,
    prototypes: &[Prototype],
    ctx: &MetricContext,
) -> Result<f64> {
    let within = criterion(rows, partition, prototypes, ctx)?;
    let total = total_inertia(rows, ctx)?;
    Ok(quality_ratio(within, total))
}

fn quality_ratio(within: f64, total: f64) -> f64 {
    if total > 0.0 {
        1.0 - within / total
    } else {
        0.0
    }
}

/// One full restart from a given seed.
pub fn run_restart(
    rows: &[Vec<&QuantileFunction>],
    k: usize,
    max_iter: usize,
    ctx: &MetricContext,
    seed: u64,
) -> Result<RestartOutcome> {
    let n = rows.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<Prototype> = sample(&mut rng, n, k)
        .into_iter()
        .map(|i| Prototype {
            components: rows[i].iter().map(|&q| q.clone()).collect(),
        })
        .collect();

    let mut partition = assign(rows, &initial, ctx)?;
    let mut prototypes = update_prototypes(rows, &mut partition, ctx)?;
    let mut delta = criterion(rows, &partition, &prototypes, ctx)?;
    let mut history = vec![delta];
    let mut iterations = 1;
    while iterations < max_iter {
        let next = assign(rows, &prototypes, ctx)?;
        if next == partition {
            break;
        }
        partition = next;
        prototypes = update_prototypes(rows, &mut partition, ctx)?;
        let updated = criterion(rows, &partition, &prototypes, ctx)?;
        history.push(updated);
        iterations += 1;
        let settled = (delta - updated).abs() <= RELATIVE_TOLERANCE * delta.abs();
        delta = updated;
        if settled {
            break;
        }
    }
    Ok(RestartOutcome {
        partition,
        prototypes,
        criterion: delta,
        iterations,
        history,
    })
}

/// Relabels clusters in order of first occurrence.
pub fn canonicalize(
    partition: &Partition,
    prototypes: &[Prototype],
) -> (Partition, Vec<Prototype>) {
    let mut map = vec![usize::MAX; partition.k];
    let mut next = 0;
    for &a in &partition.assignments {
        if map[a] == usize::MAX {
            map[a] = next;
            next += 1;
        }
    }
    for m in map.iter_mut() {
        if *m == usize::MAX {
            *m = next;
            next += 1;
        }
    }
    let assignments = partition.assignments.iter().map(|&a| map[a]).collect();
    let mut protos: Vec<Option<Prototype>> = vec![None; partition.k];
    for (old, p) in prototypes.iter().enumerate() {
        protos[map[old]] = Some(p.clone());
    }
    (
        Partition {
            assignments,
            k: partition.k,
        },
        protos
            .into_iter()
            .map(|p| p.expect("label map is a bijection"))
            .collect(),
    )
}

/// Standardizes (optionally) and builds the metric for a table.
pub fn prepare(
    table: &DistributionalTable,
    metric: Metric,
    standardize: bool,
    ridge: f64,
) -> Result<(DistributionalTable, MetricContext)> {
    let data = if standardize {
        let cols = table
            .columns()
            .iter()
            .zip(table.variable_names())
            .map(|(c, name)| standardize_named(c, name))
            .collect::<Result<Vec<_>>>()?;
        table.with_columns(cols)
    } else {
        table.clone()
    };
    let ctx = match metric {
        Metric::Wasserstein => MetricContext::Wasserstein,
        Metric::Mahalanobis => MetricContext::Mahalanobis(inverse_covariance(&data, ridge)?),
    };
    Ok((data, ctx))
}

/// Best of `config.restarts` independent restarts. Deterministic for a
/// fixed configuration regardless of thread count.
pub fn cluster(table: &DistributionalTable, config: &ClusterConfig) -> Result<ClusteringResult> {
    let n = table.n();
    if config.k == 0 || config.k > n {
        return Err(Error::InvalidK { k: config.k, n });
    }
    if config.restarts == 0 {
        return Err(Error::Validation("restarts must be at least 1".into()));
    }
    if config.max_iter == 0 {
        return Err(Error::Validation("max_iter must be at least 1".into()));
    }
    let (data, ctx) = prepare(table, config.metric, config.standardize, config.ridge)?;
    let rows = rows_of(data.columns());

    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = (0..config.restarts).map(|_| master.gen()).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&s| run_restart(&rows, config.k, config.max_iter, &ctx, s))
        .collect::<Result<Vec<_>>>()?;

    let best = outcomes
        .into_iter()
        .reduce(|best, o| {
            if o.criterion < best.criterion {
                o
            } else {
                best
            }
        })
        .expect("at least one restart");

    let (partition, prototypes) = canonicalize(&best.partition, &best.prototypes);
    let total = total_inertia(&rows, &ctx)?;
    let regularized = match &ctx {
        MetricContext::Mahalanobis(m) => m.is_regularized(),
        MetricContext::Wasserstein => false,
    };
    Ok(ClusteringResult {
        partition,
        prototypes,
        criterion: best.criterion,
        total,
        quality: quality_ratio(best.criterion, total),
        iterations: best.iterations,
        restarts_run: config.restarts,
        seed: config.seed,
        metric: config.metric,
        standardized: config.standardize,
        regularized,
        history: best.history,
    })
}

/// Contingency table of two partitions of the same individuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossTab {
    pub counts: Vec<Vec<usize>>,
    pub row_totals: Vec<usize>,
    pub col_totals: Vec<usize>,
    /// Share of individuals on the diagonal under the best one-to-one
    /// matching of cluster labels.
    pub agreement: f64,
}

pub fn cross_tabulate(a: &Partition, b: &Partition) -> Result<CrossTab> {
    if a.assignments.len() != b.assignments.len() {
        return Err(Error::Shape(format!(
            "partitions cover {} and {} individuals",
            a.assignments.len(),
            b.assignments.len()
        )));
    }
    let mut counts = vec![vec![0usize; b.k]; a.k];
    for (&x, &y) in a.assignments.iter().zip(&b.assignments) {
        counts[x][y] += 1;
    }
    let row_totals = counts.iter().map(|r| r.iter().sum()).collect();
    let col_totals = (0..b.k)
        .map(|c| counts.iter().map(|r| r[c]).sum())
        .collect();
    let n = a.assignments.len();
    let matched = best_matching(&counts);
    Ok(CrossTab {
        counts,
        row_totals,
        col_totals,
        agreement: if n == 0 {
            0.0
        } else {
            matched as f64 / n as f64
        },
    })
}

/// Maximum-weight one-to-one label matching by subset DP over the smaller
/// side; greedy beyond 16 labels.
fn best_matching(counts: &[Vec<usize>]) -> usize {
    let rows = counts.len();
    let cols = counts.first().map_or(0, |r| r.len());
    let (m, get): (usize, Box<dyn Fn(usize, usize) -> usize>) = if rows <= cols {
        (rows, Box::new(|i, j| counts[i][j]))
    } else {
        (cols, Box::new(|i, j| counts[j][i]))
    };
    let other = rows.max(cols);
    if other > 16 {
        let mut used = vec![false; other];
        let mut total = 0;
        for i in 0..m {
            if let Some((j, v)) = (0..other)
                .filter(|&j| !used[j])
                .map(|j| (j, get(i, j)))
                .max_by_key(|&(j, v)| (v, std::cmp::Reverse(j)))
            {
                used[j] = true;
                total += v;
            }
        }
        return total;
    }
    let mut dp = vec![None::<usize>; 1 << other];
    dp[0] = Some(0);
    for mask in 0..(1usize << other) {
        let Some(cur) = dp[mask] else { continue };
        let i = mask.count_ones() as usize;
        if i >= m {
            continue;
        }
        for j in 0..other {
            if mask & (1 << j) == 0 {
                let nm = mask | (1 << j);
                let v = cur + get(i, j);
                if dp[nm].is_none_or(|x| v > x) {
                    dp[nm] = Some(v);
                }
            }
        }
    }
    dp.iter()
        .enumerate()
        .filter(|(mask, _)| mask.count_ones() as usize == m)
        .filter_map(|(_, v)| *v)
        .max()
        .unwrap_or(0)
}
