//! The quantile-function representation shared by every modal value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::piecewise::{self, square_integral, walk_many, walk_pair, Segment};

/// A non-decreasing piecewise-linear map `[0, 1] -> ℝ`.
///
/// Segments tile `[0, 1]` contiguously with strictly positive widths. A jump
/// between consecutive segments encodes an atom of the distribution; a flat
/// segment of width `w` is an atom of mass `w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileFunction {
    segments: Vec<Segment>,
}

impl QuantileFunction {
    /// Builds a quantile function, checking every representation invariant.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        validate_segments(&segments)?;
        Ok(QuantileFunction { segments })
    }

    pub(crate) fn from_segments_unchecked(segments: Vec<Segment>) -> Self {
        debug_assert!(
            validate_segments(&segments).is_ok(),
            "{:?}",
            validate_segments(&segments)
        );
        QuantileFunction { segments }
    }

    /// The quantile function of a Dirac mass at `y`.
    pub fn constant(y: f64) -> Self {
        QuantileFunction {
            segments: vec![Segment::new(0.0, 1.0, y, y)],
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Breakpoints `0 = t_0 < t_1 < ... < t_m = 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push(0.0);
        out.extend(self.segments.iter().map(|s| s.t_hi));
        out
    }

    /// Value at probability `t`. At an interior breakpoint the right
    /// segment's value is returned.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("probability {t} is outside [0, 1]")));
        }
        let idx = self
            .segments
            .partition_point(|s| s.t_hi <= t)
            .min(self.segments.len() - 1);
        Ok(self.segments[idx].value_at(t))
    }

    /// `∫₀¹ F⁻¹(t) dt`, exact.
    pub fn mean(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.width() * (s.q_lo + s.q_hi) * 0.5)
            .sum()
    }

    /// `∫₀¹ (F⁻¹(t) − μ)² dt`, exact up to rounding and clamped at zero.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let v: f64 = self
            .segments
            .iter()
            .map(|s| square_integral(s.width(), s.q_lo - mu, s.q_hi - mu))
            .sum();
        v.max(0.0)
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Quantile function of `h·Y + k`. For negative `h` the segment order is
    /// reversed so the result is again non-decreasing.
    pub fn affine(&self, h: f64, k: f64) -> Self {
        if h >= 0.0 {
            let segments = self
                .segments
                .iter()
                .map(|s| Segment::new(s.t_lo, s.t_hi, h * s.q_lo + k, h * s.q_hi + k))
                .collect();
            return QuantileFunction::from_segments_unchecked(segments);
        }
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment::new(1.0 - s.t_hi, 1.0 - s.t_lo, h * s.q_hi + k, h * s.q_lo + k))
            .filter(|s| s.t_hi > s.t_lo)
            .collect();
        QuantileFunction::from_segments_unchecked(segments)
    }

    /// Inverts this quantile function into a CDF value at `x`: the measure of
    /// `{t : F⁻¹(t) ≤ x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for s in &self.segments {
            if s.q_hi <= x {
                acc = s.t_hi;
            } else if s.q_lo <= x {
                // strictly increasing piece crossing x
                acc = s.t_lo + s.width() * (x - s.q_lo) / (s.q_hi - s.q_lo);
                break;
            } else {
                break;
            }
        }
        acc.clamp(0.0, 1.0)
    }
}

impl AsRef<QuantileFunction> for QuantileFunction {
    fn as_ref(&self) -> &QuantileFunction {
        self
    }
}

pub(crate) fn validate_segments(segments: &[Segment]) -> Result<()> {
    let first = segments
        .first()
        .ok_or_else(|| Error::Validation("quantile function has no segments".into()))?;
    if first.t_lo != 0.0 {
        return Err(Error::Validation(format!(
            "first segment starts at t={} instead of 0",
            first.t_lo
        )));
    }
    let last = segments.last().unwrap();
    if last.t_hi != 1.0 {
        return Err(Error::Validation(format!(
            "last segment ends at t={} instead of 1",
            last.t_hi
        )));
    }
    for (idx, s) in segments.iter().enumerate() {
        if ![s.t_lo, s.t_hi, s.q_lo, s.q_hi]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Validation(format!(
                "segment {idx} has a non-finite coordinate"
            )));
        }
        if s.t_hi <= s.t_lo {
            return Err(Error::Validation(format!(
                "segment {idx} has non-positive width [{}, {}]",
                s.t_lo, s.t_hi
            )));
        }
        if s.q_lo > s.q_hi {
            return Err(Error::Validation(format!(
                "segment {idx} is decreasing ({} > {})",
                s.q_lo, s.q_hi
            )));
        }
        if idx > 0 {
            let prev = &segments[idx - 1];
            if prev.t_hi != s.t_lo {
                return Err(Error::Validation(format!(
                    "segments {} and {idx} are not contiguous",
                    idx - 1
                )));
            }
            if s.q_lo < prev.q_hi {
                return Err(Error::Validation(format!(
                    "quantile decreases across the breakpoint t={}",
                    s.t_lo
                )));
            }
        }
    }
    Ok(())
}

/// Re-expresses `a` and `b` on the union of their breakpoints.
pub fn align(a: &QuantileFunction, b: &QuantileFunction) -> (QuantileFunction, QuantileFunction) {
    let cap = a.len() + b.len();
    let mut sa = Vec::with_capacity(cap);
    let mut sb = Vec::with_capacity(cap);
    walk_pair(&a.segments, &b.segments, |t0, t1, a0, a1, b0, b1| {
        sa.push(Segment::new(t0, t1, a0, a1));
        sb.push(Segment::new(t0, t1, b0, b1));
    });
    (
        QuantileFunction::from_segments_unchecked(sa),
        QuantileFunction::from_segments_unchecked(sb),
    )
}

/// Pointwise weighted mean `Σ wᵢ Fᵢ⁻¹ / Σ wᵢ` over the common refinement.
/// Weights must be non-negative with a positive sum; the caller checks.
pub(crate) fn weighted_mean(
    fns: &[&QuantileFunction],
    weights: Option<&[f64]>,
) -> QuantileFunction {
    debug_assert!(!fns.is_empty());
    if fns.iter().all(|f| f.segments == fns[0].segments) {
        // keeps barycenters of constant columns exact
        return fns[0].clone();
    }
    let total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => fns.len() as f64,
    };
    let slices: Vec<&[Segment]> = fns.iter().map(|f| f.segments()).collect();
    let mut out = Vec::new();
    walk_many(&slices, |t0, t1, vals| {
        let (mut lo, mut hi) = (0.0, 0.0);
        match weights {
            Some(w) => {
                for (&(v0, v1), &wi) in vals.iter().zip(w) {
                    lo += wi * v0;
                    hi += wi * v1;
                }
            }
            None => {
                for &(v0, v1) in vals {
                    lo += v0;
                    hi += v1;
                }
            }
        }
        out.push(Segment::new(t0, t1, lo / total, hi / total));
    });
    QuantileFunction::from_segments_unchecked(out)
}

/// Exact `∫ a(t) b(t) dt`.
pub(crate) fn inner(a: &QuantileFunction, b: &QuantileFunction) -> f64 {
    piecewise::integrate_product(&a.segments, &b.segments)
}
