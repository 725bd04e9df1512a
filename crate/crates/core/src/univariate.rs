//! Barycenter, inertia, and dispersion of one modal-numeric variable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantile::{self, QuantileFunction};
use crate::wasserstein::distance_squared;

/// Per-variable summary: barycenter moments and Wasserstein dispersion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub barycenter: QuantileFunction,
    /// Mean of the barycenter distribution.
    pub barycenter_mean: f64,
    /// Standard deviation of the barycenter distribution.
    pub barycenter_std: f64,
    /// Sum of squared distances to the barycenter.
    pub ss: f64,
    pub variance: f64,
    pub std: f64,
    pub n: usize,
}

/// Pointwise mean of the quantile functions.
pub fn barycenter(column: &[QuantileFunction]) -> Result<QuantileFunction> {
    if column.is_empty() {
        return Err(Error::EmptyInput("barycenter of an empty column"));
    }
    let refs: Vec<&QuantileFunction> = column.iter().collect();
    Ok(quantile::weighted_mean(&refs, None))
}

/// Barycenter over borrowed members, as used for cluster prototypes.
pub fn barycenter_of(members: &[&QuantileFunction]) -> Result<QuantileFunction> {
    if members.is_empty() {
        return Err(Error::EmptyInput("barycenter of an empty column"));
    }
    Ok(quantile::weighted_mean(members, None))
}

/// Pointwise weighted mean `Σ wᵢ Fᵢ⁻¹ / Σ wᵢ`.
pub fn weighted_barycenter(
    column: &[QuantileFunction],
    weights: &[f64],
) -> Result<QuantileFunction> {
    if column.is_empty() {
        return Err(Error::EmptyInput("barycenter of an empty column"));
    }
    if weights.len() != column.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} quantile functions",
            weights.len(),
            column.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Validation(
            "barycenter weights must be finite, non-negative, and not all zero".into(),
        ));
    }
    let refs: Vec<&QuantileFunction> = column.iter().collect();
    Ok(quantile::weighted_mean(&refs, Some(weights)))
}

/// `Σᵢ d²(columnᵢ, center)`.
pub fn inertia_to(column: &[QuantileFunction], center: &QuantileFunction) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::EmptyInput("inertia of an empty column"));
    }
    Ok(column.iter().map(|q| distance_squared(q, center)).sum())
}

/// `Σᵢ Σⱼ d²(columnᵢ, columnⱼ)` over ordered pairs.
pub fn pairwise_inertia(column: &[QuantileFunction]) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::EmptyInput("inertia of an empty column"));
    }
    let mut acc = 0.0;
    for (i, a) in column.iter().enumerate() {
        for b in &column[i + 1..] {
            acc += distance_squared(a, b);
        }
    }
    Ok(2.0 * acc)
}

pub fn summarize(column: &[QuantileFunction]) -> Result<VariableSummary> {
    let bary = barycenter(column)?;
    let ss = inertia_to(column, &bary)?;
    let n = column.len();
    let variance = ss / n as f64;
    Ok(VariableSummary {
        barycenter_mean: bary.mean(),
        barycenter_std: bary.std(),
        barycenter: bary,
        ss,
        variance,
        std: variance.sqrt(),
        n,
    })
}

/// Maps each value through `q ↦ (q − μ̄) / s^F` so the column has barycenter
/// mean 0 and Wasserstein standard deviation 1.
pub fn standardize(column: &[QuantileFunction]) -> Result<Vec<QuantileFunction>> {
    standardize_named(column, "column")
}

pub(crate) fn standardize_named(
    column: &[QuantileFunction],
    name: &str,
) -> Result<Vec<QuantileFunction>> {
    let summary = summarize(column)?;
    if !(summary.std > 0.0) {
        return Err(Error::DegenerateVariable(name.to_string()));
    }
    let h = 1.0 / summary.std;
    let k = -summary.barycenter_mean / summary.std;
    Ok(column.iter().map(|q| q.affine(h, k)).collect())
}
