//! Modal descriptions of an individual (point, interval, histogram, discrete
//! distribution, parametric density) and their lowering to quantile
//! functions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Exp, Gamma, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::piecewise::Segment;
use crate::quantile::QuantileFunction;

/// Weights whose sum is within this distance of one are accepted and
/// renormalized on lowering.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Number of equal-probability knots used for parametric families.
pub const DEFAULT_RESOLUTION: usize = 200;

/// Unbounded tails of parametric families are cut at `ε` and `1 − ε`.
pub const TAIL_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// The description of one individual on one modal-numeric variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModalValue {
    Point { value: f64 },
    Interval { lo: f64, hi: f64 },
    Histogram { bins: Vec<Bin> },
    Discrete { atoms: Vec<Atom> },
    Parametric { family: String, params: Vec<f64> },
}

impl ModalValue {
    pub fn point(value: f64) -> Self {
        ModalValue::Point { value }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        ModalValue::Interval { lo, hi }
    }

    /// Histogram from `(lo, hi, weight)` triples.
    pub fn histogram(bins: &[(f64, f64, f64)]) -> Self {
        ModalValue::Histogram {
            bins: bins
                .iter()
                .map(|&(lo, hi, weight)| Bin { lo, hi, weight })
                .collect(),
        }
    }

    /// Discrete distribution from `(value, weight)` pairs.
    pub fn discrete(atoms: &[(f64, f64)]) -> Self {
        ModalValue::Discrete {
            atoms: atoms
                .iter()
                .map(|&(value, weight)| Atom { value, weight })
                .collect(),
        }
    }

    pub fn parametric(family: &str, params: &[f64]) -> Self {
        ModalValue::Parametric {
            family: family.to_string(),
            params: params.to_vec(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModalValue::Point { .. } => "point",
            ModalValue::Interval { .. } => "interval",
            ModalValue::Histogram { .. } => "histogram",
            ModalValue::Discrete { .. } => "discrete",
            ModalValue::Parametric { .. } => "parametric",
        }
    }

    /// Checks the kind invariants and returns the canonical form with bins
    /// and atoms sorted. Validating twice gives the same value.
    pub fn validated(&self) -> Result<ModalValue> {
        match self {
            ModalValue::Point { value } => {
                finite(*value, "point value")?;
                Ok(self.clone())
            }
            ModalValue::Interval { lo, hi } => {
                finite(*lo, "interval lower bound")?;
                finite(*hi, "interval upper bound")?;
                if lo > hi {
                    return Err(Error::Validation(format!(
                        "interval lower bound {lo} exceeds upper bound {hi}"
                    )));
                }
                Ok(self.clone())
            }
            ModalValue::Histogram { bins } => {
                if bins.is_empty() {
                    return Err(Error::Validation("histogram has no bins".into()));
                }
                let mut bins = bins.clone();
                for b in &bins {
                    finite(b.lo, "bin lower edge")?;
                    finite(b.hi, "bin upper edge")?;
                    finite(b.weight, "bin weight")?;
                    if b.lo > b.hi {
                        return Err(Error::Validation(format!(
                            "bin [{}, {}] has lower edge above upper edge",
                            b.lo, b.hi
                        )));
                    }
                    if b.weight <= 0.0 {
                        return Err(Error::Validation(format!(
                            "bin [{}, {}] has non-positive weight {}",
                            b.lo, b.hi, b.weight
                        )));
                    }
                }
                bins.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
                for pair in bins.windows(2) {
                    if pair[0].hi > pair[1].lo {
                        return Err(Error::Validation(format!(
                            "bins [{}, {}] and [{}, {}] overlap",
                            pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi
                        )));
                    }
                }
                check_weight_sum(bins.iter().map(|b| b.weight))?;
                Ok(ModalValue::Histogram { bins })
            }
            ModalValue::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Validation(
                        "discrete distribution has no atoms".into(),
                    ));
                }
                let mut atoms = atoms.clone();
                for a in &atoms {
                    finite(a.value, "atom value")?;
                    finite(a.weight, "atom weight")?;
                    if a.weight <= 0.0 {
                        return Err(Error::Validation(format!(
                            "atom {} has non-positive weight {}",
                            a.value, a.weight
                        )));
                    }
                }
                atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
                for pair in atoms.windows(2) {
                    if pair[0].value == pair[1].value {
                        return Err(Error::Validation(format!(
                            "atom {} appears more than once",
                            pair[0].value
                        )));
                    }
                }
                check_weight_sum(atoms.iter().map(|a| a.weight))?;
                Ok(ModalValue::Discrete { atoms })
            }
            ModalValue::Parametric { family, params } => {
                Family::parse(family, params)?;
                Ok(self.clone())
            }
        }
    }

    /// Lowers this description to its quantile function. `resolution` is the
    /// knot count used for parametric families and must be at least 2.
    pub fn lower(&self, resolution: usize) -> Result<QuantileFunction> {
        if resolution < 2 {
            return Err(Error::Validation(format!(
                "resolution must be at least 2, got {resolution}"
            )));
        }
        match self.validated()? {
            ModalValue::Point { value } => Ok(QuantileFunction::constant(value)),
            ModalValue::Interval { lo, hi } => Ok(QuantileFunction::from_segments_unchecked(vec![
                Segment::new(0.0, 1.0, lo, hi),
            ])),
            ModalValue::Histogram { bins } => {
                Ok(stack(bins.iter().map(|b| (b.weight, b.lo, b.hi)).collect()))
            }
            ModalValue::Discrete { atoms } => Ok(stack(
                atoms.iter().map(|a| (a.weight, a.value, a.value)).collect(),
            )),
            ModalValue::Parametric { family, params } => {
                Family::parse(&family, &params)?.lower(resolution)
            }
        }
    }
}

/// Lowers with [`DEFAULT_RESOLUTION`].
pub fn lower(value: &ModalValue) -> Result<QuantileFunction> {
    value.lower(DEFAULT_RESOLUTION)
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} is not finite ({v})")))
    }
}

fn check_weight_sum(weights: impl Iterator<Item = f64>) -> Result<()> {
    let sum: f64 = weights.sum();
    // Slack absorbs rounding in the sum itself.
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE * (1.0 + 1e-9) {
        return Err(Error::Validation(format!(
            "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOLERANCE}"
        )));
    }
    Ok(())
}

/// Stacks `(mass, q_lo, q_hi)` pieces on consecutive cumulative-mass
/// intervals, normalizing by the total mass so the last breakpoint is 1.
fn stack(pieces: Vec<(f64, f64, f64)>) -> QuantileFunction {
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    let mut segments: Vec<Segment> = Vec::new();
    let mut mass = 0.0f64;
    let mut cum = 0.0f64;
    for (m, lo, hi) in pieces {
        mass += m;
        let next = (mass / total).min(1.0);
        if next > cum {
            segments.push(Segment::new(cum, next, lo, hi));
        } else if let Some(last) = segments.last_mut() {
            // mass lost to rounding; keep the upper value reachable
            last.q_hi = last.q_hi.max(hi).max(lo);
        }
        cum = next;
    }
    if let Some(last) = segments.last_mut() {
        last.t_hi = 1.0;
    }
    QuantileFunction::from_segments_unchecked(segments)
}

/// A supported parametric family with validated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal { mean: f64, std: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl Family {
    pub const NAMES: [&'static str; 6] = [
        "normal",
        "lognormal",
        "exponential",
        "uniform",
        "gamma",
        "beta",
    ];

    pub fn parse(name: &str, params: &[f64]) -> Result<Family> {
        let expect = |n: usize| -> Result<()> {
            if params.len() != n {
                return Err(Error::Validation(format!(
                    "family `{name}` takes {n} parameter(s), got {}",
                    params.len()
                )));
            }
            for &p in params {
                finite(p, "parameter")?;
            }
            Ok(())
        };
        let positive = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "family `{name}` requires {what} > 0, got {v}"
                )))
            }
        };
        let family = match name.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => {
                expect(2)?;
                positive(params[1], "std")?;
                Family::Normal {
                    mean: params[0],
                    std: params[1],
                }
            }
            "lognormal" => {
                expect(2)?;
                positive(params[1], "sigma")?;
                Family::LogNormal {
                    mu: params[0],
                    sigma: params[1],
                }
            }
            "exponential" => {
                expect(1)?;
                positive(params[0], "rate")?;
                Family::Exponential { rate: params[0] }
            }
            "uniform" => {
                expect(2)?;
                if params[0] > params[1] {
                    return Err(Error::Validation(format!(
                        "family `uniform` requires lo <= hi, got {} > {}",
                        params[0], params[1]
                    )));
                }
                Family::Uniform {
                    lo: params[0],
                    hi: params[1],
                }
            }
            "gamma" => {
                expect(2)?;
                positive(params[0], "shape")?;
                positive(params[1], "rate")?;
                Family::Gamma {
                    shape: params[0],
                    rate: params[1],
                }
            }
            "beta" => {
                expect(2)?;
                positive(params[0], "alpha")?;
                positive(params[1], "beta")?;
                Family::Beta {
                    alpha: params[0],
                    beta: params[1],
                }
            }
            _ => return Err(Error::UnsupportedFamily(name.to_string())),
        };
        Ok(family)
    }

    /// Quantile at `t`; finite support bounds are returned exactly.
    fn quantile(&self, t: f64) -> Result<f64> {
        let bad = |e: String| Error::Validation(e);
        let q = match *self {
            Family::Normal { mean, std } => Normal::new(mean, std)
                .map_err(|e| bad(e.to_string()))?
                .inverse_cdf(t),
            Family::LogNormal { mu, sigma } => {
                if t == 0.0 {
                    0.0
                } else {
                    LogNormal::new(mu, sigma)
                        .map_err(|e| bad(e.to_string()))?
                        .inverse_cdf(t)
                }
            }
            Family::Exponential { rate } => {
                if t == 0.0 {
                    0.0
                } else {
                    Exp::new(rate)
                        .map_err(|e| bad(e.to_string()))?
                        .inverse_cdf(t)
                }
            }
            Family::Uniform { lo, hi } => lo + (hi - lo) * t,
            Family::Gamma { shape, rate } => {
                if t == 0.0 {
                    0.0
                } else {
                    Gamma::new(shape, rate)
                        .map_err(|e| bad(e.to_string()))?
                        .inverse_cdf(t)
                }
            }
            Family::Beta { alpha, beta } => {
                if t == 0.0 {
                    0.0
                } else if t == 1.0 {
                    1.0
                } else {
                    Beta::new(alpha, beta)
                        .map_err(|e| bad(e.to_string()))?
                        .inverse_cdf(t)
                }
            }
        };
        Ok(q)
    }

    fn unbounded_tails(&self) -> (bool, bool) {
        match self {
            Family::Normal { .. } => (true, true),
            Family::LogNormal { .. } | Family::Exponential { .. } | Family::Gamma { .. } => {
                (false, true)
            }
            Family::Uniform { .. } | Family::Beta { .. } => (false, false),
        }
    }

    /// Piecewise-linear interpolation of the quantile on `resolution`
    /// equally spaced probability knots, unbounded tails cut at
    /// [`TAIL_EPSILON`].
    pub fn lower(&self, resolution: usize) -> Result<QuantileFunction> {
        if let Family::Uniform { lo, hi } = *self {
            return Ok(QuantileFunction::from_segments_unchecked(vec![
                Segment::new(0.0, 1.0, lo, hi),
            ]));
        }
        let (open_lo, open_hi) = self.unbounded_tails();
        let last = (resolution - 1) as f64;
        let mut knots = Vec::with_capacity(resolution);
        let mut running = f64::NEG_INFINITY;
        for j in 0..resolution {
            let t = j as f64 / last;
            let mut te = t;
            if open_lo {
                te = te.max(TAIL_EPSILON);
            }
            if open_hi {
                te = te.min(1.0 - TAIL_EPSILON);
            }
            let q = self.quantile(te)?;
            if !q.is_finite() {
                return Err(Error::Validation(format!(
                    "parametric quantile at t={te} is not finite"
                )));
            }
            running = running.max(q);
            knots.push((t, running));
        }
        let segments = knots
            .windows(2)
            .map(|w| Segment::new(w[0].0, w[1].0, w[0].1, w[1].1))
            .collect();
        Ok(QuantileFunction::from_segments_unchecked(segments))
    }
}
