//! Seeded generators and independent oracles shared by the integration
//! tests and the acceptance suite.

#![allow(dead_code)]

use modalstat::modal::{Bin, ModalValue};
use modalstat::{DistributionalTable, QuantileFunction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / s).collect()
}

/// Histogram with 1 to 12 bins, sometimes separated by gaps.
pub fn random_histogram(rng: &mut impl Rng) -> ModalValue {
    let nb = rng.gen_range(1..=12);
    let mut lo = rng.gen_range(-10.0..10.0);
    let gaps = rng.gen_bool(0.3);
    let weights = normalized((0..nb).map(|_| rng.gen_range(0.05..1.0)).collect());
    let mut bins = Vec::with_capacity(nb);
    for w in weights {
        let hi = lo + rng.gen_range(0.05..3.0);
        bins.push((lo, hi, w));
        lo = hi + if gaps { rng.gen_range(0.0..1.0) } else { 0.0 };
    }
    ModalValue::histogram(&bins)
}

pub fn random_interval(rng: &mut impl Rng) -> ModalValue {
    let lo = rng.gen_range(-10.0..10.0);
    ModalValue::interval(lo, lo + rng.gen_range(0.1..5.0))
}

pub fn random_point(rng: &mut impl Rng) -> ModalValue {
    ModalValue::point(rng.gen_range(-10.0..10.0))
}

pub fn random_discrete(rng: &mut impl Rng) -> ModalValue {
    let na = rng.gen_range(1..=5);
    let mut x = rng.gen_range(-10.0..0.0);
    let weights = normalized((0..na).map(|_| rng.gen_range(0.05..1.0)).collect());
    let atoms: Vec<(f64, f64)> = weights
        .into_iter()
        .map(|w| {
            x += rng.gen_range(0.1..4.0);
            (x, w)
        })
        .collect();
    ModalValue::discrete(&atoms)
}

/// Any non-parametric kind, histograms most often.
pub fn random_value(rng: &mut impl Rng) -> ModalValue {
    match rng.gen_range(0..6) {
        0 => random_point(rng),
        1 => random_interval(rng),
        2 => random_discrete(rng),
        _ => random_histogram(rng),
    }
}

pub fn lowered(v: &ModalValue) -> QuantileFunction {
    modalstat::lower(v).expect("generated values are valid")
}

pub fn histogram_qf(rng: &mut impl Rng) -> QuantileFunction {
    lowered(&random_histogram(rng))
}

pub fn histogram_column(rng: &mut impl Rng, n: usize) -> Vec<QuantileFunction> {
    (0..n).map(|_| histogram_qf(rng)).collect()
}

pub fn mixed_column(rng: &mut impl Rng, n: usize) -> Vec<QuantileFunction> {
    (0..n).map(|_| lowered(&random_value(rng))).collect()
}

pub fn point_column(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()
}

pub fn histogram_table(rng: &mut impl Rng, n: usize, p: usize) -> DistributionalTable {
    let rows = (0..n)
        .map(|_| (0..p).map(|_| histogram_qf(rng)).collect())
        .collect();
    DistributionalTable::new(
        (0..p).map(|j| format!("v{j}")).collect(),
        (0..n).map(|i| format!("r{i}")).collect(),
        rows,
    )
    .unwrap()
}

pub fn point_table(columns: &[Vec<f64>]) -> DistributionalTable {
    let n = columns[0].len();
    let rows = (0..n)
        .map(|i| {
            columns
                .iter()
                .map(|c| QuantileFunction::constant(c[i]))
                .collect()
        })
        .collect();
    DistributionalTable::new(
        (0..columns.len()).map(|j| format!("v{j}")).collect(),
        (0..n).map(|i| format!("r{i}")).collect(),
        rows,
    )
    .unwrap()
}

/// Quantile of a histogram by direct inversion of its piecewise-uniform
/// CDF, independent of the library's lowering.
pub fn histogram_quantile(bins: &[Bin], t: f64) -> f64 {
    let mut sorted = bins.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let total: f64 = sorted.iter().map(|b| b.weight).sum();
    let mut cum = 0.0;
    for b in &sorted {
        let next = cum + b.weight / total;
        if t <= next {
            let frac = ((t - cum) / (next - cum)).clamp(0.0, 1.0);
            return b.lo + (b.hi - b.lo) * frac;
        }
        cum = next;
    }
    sorted.last().unwrap().hi
}

pub fn bins_of(v: &ModalValue) -> &[Bin] {
    match v {
        ModalValue::Histogram { bins } => bins,
        _ => panic!("histogram expected"),
    }
}

/// Midpoint-rule `∫ (A − B)²` with `nodes` nodes. Nodes are visited in
/// increasing order, so each histogram is inverted by a forward sweep.
pub fn quadrature_distance_squared(a: &[Bin], b: &[Bin], nodes: usize) -> f64 {
    let (mut sa, mut sb) = (Sweep::new(a), Sweep::new(b));
    let h = 1.0 / nodes as f64;
    (0..nodes)
        .map(|m| {
            let t = (m as f64 + 0.5) * h;
            let d = sa.at(t) - sb.at(t);
            d * d
        })
        .sum::<f64>()
        * h
}

struct Sweep {
    bins: Vec<Bin>,
    cum: Vec<f64>,
    k: usize,
}

impl Sweep {
    fn new(bins: &[Bin]) -> Self {
        let mut bins = bins.to_vec();
        bins.sort_by(|x, y| x.lo.total_cmp(&y.lo));
        let total: f64 = bins.iter().map(|b| b.weight).sum();
        let mut acc = 0.0;
        let mut cum = vec![0.0];
        for b in &bins {
            acc += b.weight;
            cum.push(acc / total);
        }
        Sweep { bins, cum, k: 0 }
    }

    fn at(&mut self, t: f64) -> f64 {
        while self.k + 1 < self.bins.len() && t > self.cum[self.k + 1] {
            self.k += 1;
        }
        let (b, lo, hi) = (&self.bins[self.k], self.cum[self.k], self.cum[self.k + 1]);
        let frac = ((t - lo) / (hi - lo)).clamp(0.0, 1.0);
        b.lo + (b.hi - b.lo) * frac
    }
}

pub fn population_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn population_cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (population_mean(x), population_mean(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    let pivot_row = a[c].clone();
                    for (v, p) in a[r].iter_mut().zip(pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `A·Aᵀ + I` with entries of `A` uniform in [-1, 1].
pub fn random_spd(rng: &mut impl Rng, p: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let s: f64 = (0..p).map(|m| a[i][m] * a[j][m]).sum();
                    s + if i == j { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Proptest strategy for histograms with up to 12 contiguous bins.
pub fn histogram_strategy() -> impl Strategy<Value = ModalValue> {
    (
        -10.0f64..10.0,
        prop::collection::vec((0.05f64..3.0, 0.05f64..1.0), 1..=12),
    )
        .prop_map(|(start, parts)| {
            let total: f64 = parts.iter().map(|p| p.1).sum();
            let mut lo = start;
            let bins: Vec<(f64, f64, f64)> = parts
                .iter()
                .map(|&(w, m)| {
                    let b = (lo, lo + w, m / total);
                    lo += w;
                    b
                })
                .collect();
            ModalValue::histogram(&bins)
        })
}

/// Any non-parametric modal value.
pub fn value_strategy() -> impl Strategy<Value = ModalValue> {
    prop_oneof![
        (-10.0f64..10.0).prop_map(ModalValue::point),
        (-10.0f64..10.0, 0.0f64..5.0).prop_map(|(a, w)| ModalValue::interval(a, a + w)),
        prop::collection::vec((0.1f64..4.0, 0.05f64..1.0), 1..=5).prop_map(|parts| {
            let total: f64 = parts.iter().map(|p| p.1).sum();
            let mut x = -10.0;
            let atoms: Vec<(f64, f64)> = parts
                .iter()
                .map(|&(step, w)| {
                    x += step;
                    (x, w / total)
                })
                .collect();
            ModalValue::discrete(&atoms)
        }),
        histogram_strategy(),
        histogram_strategy(),
    ]
}

pub fn qf_strategy() -> impl Strategy<Value = QuantileFunction> {
    value_strategy().prop_map(|v| lowered(&v))
}
