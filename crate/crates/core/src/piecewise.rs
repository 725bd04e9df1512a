//! Piecewise-linear functions on `[0, 1]` and exact integration over a
//! shared breakpoint refinement.
//!
//! Every integral in this crate reduces to integrating products of two
//! linear pieces over the union of the operands' breakpoints. Walking the
//! breakpoints of several functions in lockstep gives, for each elementary
//! interval, the value of every operand at both ends; the integral of a
//! product of two linear functions over that interval is then closed form.

use serde::{Deserialize, Serialize};

/// One linear piece `t -> q` on `[t_lo, t_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl Segment {
    pub fn new(t_lo: f64, t_hi: f64, q_lo: f64, q_hi: f64) -> Self {
        Segment {
            t_lo,
            t_hi,
            q_lo,
            q_hi,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    /// Linear interpolation, exact at both endpoints and clamped to the
    /// endpoint range so rounding never leaves the segment's hull.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= self.t_lo {
            return self.q_lo;
        }
        if t >= self.t_hi {
            return self.q_hi;
        }
        let frac = (t - self.t_lo) / (self.t_hi - self.t_lo);
        let v = self.q_lo + (self.q_hi - self.q_lo) * frac;
        let (lo, hi) = if self.q_lo <= self.q_hi {
            (self.q_lo, self.q_hi)
        } else {
            (self.q_hi, self.q_lo)
        };
        v.clamp(lo, hi)
    }
}

/// `∫ a(t) b(t) dt` over an interval of width `w` where `a` and `b` are
/// linear with endpoint values `(a0, a1)` and `(b0, b1)`.
#[inline]
pub(crate) fn product_integral(w: f64, a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    w * (2.0 * a0 * b0 + a0 * b1 + a1 * b0 + 2.0 * a1 * b1) / 6.0
}

/// `∫ d(t)^2 dt` for a linear `d` with endpoint values `(d0, d1)`.
#[inline]
pub(crate) fn square_integral(w: f64, d0: f64, d1: f64) -> f64 {
    w * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0
}

/// Walks the union of the breakpoints of `a` and `b`, calling
/// `f(t0, t1, a0, a1, b0, b1)` once per elementary interval.
///
/// Both inputs must cover `[0, 1]` with contiguous segments.
pub(crate) fn walk_pair<F>(a: &[Segment], b: &[Segment], mut f: F)
where
    F: FnMut(f64, f64, f64, f64, f64, f64),
{
    let (mut i, mut j) = (0usize, 0usize);
    let mut t = 0.0;
    while i < a.len() && j < b.len() {
        let sa = &a[i];
        let sb = &b[j];
        let next = sa.t_hi.min(sb.t_hi);
        if next > t {
            f(
                t,
                next,
                sa.value_at(t),
                sa.value_at(next),
                sb.value_at(t),
                sb.value_at(next),
            );
        }
        if sa.t_hi == next {
            i += 1;
        }
        if sb.t_hi == next {
            j += 1;
        }
        t = next;
    }
}

/// Multi-way version of [`walk_pair`]. `f` receives the interval and, for
/// each operand in order, its values at the two interval ends.
pub(crate) fn walk_many<F>(fns: &[&[Segment]], mut f: F)
where
    F: FnMut(f64, f64, &[(f64, f64)]),
{
    if fns.is_empty() {
        return;
    }
    let mut cursor = vec![0usize; fns.len()];
    let mut vals = vec![(0.0, 0.0); fns.len()];
    let mut t = 0.0;
    loop {
        let mut next = f64::INFINITY;
        for (segs, &c) in fns.iter().zip(&cursor) {
            next = next.min(segs[c].t_hi);
        }
        if next > t {
            for ((segs, &c), v) in fns.iter().zip(&cursor).zip(vals.iter_mut()) {
                let s = &segs[c];
                *v = (s.value_at(t), s.value_at(next));
            }
            f(t, next, &vals);
        }
        let mut done = false;
        for (segs, c) in fns.iter().zip(cursor.iter_mut()) {
            if segs[*c].t_hi == next {
                *c += 1;
                if *c == segs.len() {
                    done = true;
                }
            }
        }
        if done {
            break;
        }
        t = next;
    }
}

/// Exact `∫ a(t) b(t) dt` over `[0, 1]`.
pub(crate) fn integrate_product(a: &[Segment], b: &[Segment]) -> f64 {
    let mut acc = 0.0;
    walk_pair(a, b, |t0, t1, a0, a1, b0, b1| {
        acc += product_integral(t1 - t0, a0, a1, b0, b1);
    });
    acc
}

/// Exact `∫ (a(t) - b(t))^2 dt` over `[0, 1]`.
pub(crate) fn integrate_squared_difference(a: &[Segment], b: &[Segment]) -> f64 {
    let mut acc = 0.0;
    walk_pair(a, b, |t0, t1, a0, a1, b0, b1| {
        acc += square_integral(t1 - t0, a0 - b0, a1 - b1);
    });
    acc
}

/// Exact `∫ (a1 - b1)(a2 - b2) dt` over `[0, 1]`.
pub(crate) fn integrate_cross_difference(
    a1: &[Segment],
    b1: &[Segment],
    a2: &[Segment],
    b2: &[Segment],
) -> f64 {
    let mut acc = 0.0;
    walk_many(&[a1, b1, a2, b2], |t0, t1, v| {
        let d0 = v[0].0 - v[1].0;
        let d1 = v[0].1 - v[1].1;
        let e0 = v[2].0 - v[3].0;
        let e1 = v[2].1 - v[3].1;
        acc += product_integral(t1 - t0, d0, d1, e0, e1);
    });
    acc
}

/// Pointwise `a - b` on the union refinement. The result is piecewise
/// linear but in general not monotone.
pub(crate) fn difference(a: &[Segment], b: &[Segment]) -> Vec<Segment> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    walk_pair(a, b, |t0, t1, a0, a1, b0, b1| {
        out.push(Segment::new(t0, t1, a0 - b0, a1 - b1));
    });
    out
}
