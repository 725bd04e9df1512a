//! Symmetric positive-definite inversion and the Mahalanobis–Wasserstein
//! distance between individuals described by `p` modal variables.

use serde::Serialize;

use crate::association::association_matrix;
use crate::error::{Error, Result};
use crate::piecewise::{self, Segment};
use crate::quantile::QuantileFunction;
use crate::table::DistributionalTable;
use crate::wasserstein::{distance_squared, rho_qq};

/// Default relative ridge added to the diagonal when factorization fails.
pub const DEFAULT_RIDGE: f64 = 1e-8;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const NEGATIVE_FORM_TOLERANCE: f64 = 1e-9;
const SAME_SHAPE_TOLERANCE: f64 = 1e-9;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
    /// Set when the matrix was produced from a ridge-regularized input.
    regularized: bool,
}

impl SpdMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Shape("matrix must be at least 1x1".into()));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "row of length {} in a {dim}x{dim} matrix",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for h in 0..dim {
            for k in h + 1..dim {
                let (a, b) = (entries[h * dim + k], entries[k * dim + h]);
                if (a - b).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric at ({h}, {k}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(SpdMatrix {
            dim,
            entries,
            regularized: false,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for h in 0..dim {
            entries[h * dim + h] = 1.0;
        }
        SpdMatrix {
            dim,
            entries,
            regularized: false,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        for (h, &d) in diag.iter().enumerate() {
            m.entries[h * m.dim + h] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, h: usize, k: usize) -> f64 {
        self.entries[h * self.dim + k]
    }

    pub fn is_regularized(&self) -> bool {
        self.regularized
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Max-abs entry of `self · other − I`.
    pub fn identity_residual(&self, other: &SpdMatrix) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for h in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += self.get(h, m) * other.get(m, k);
                }
                let target = if h == k { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}

/// `LDLᵀ` factorization with unit lower `L` and pivots `D`, or `None` if a
/// pivot is not comfortably positive. Avoids square roots so diagonal
/// matrices invert exactly.
fn ldl(a: &[f64], n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max);
    let floor = 1e-12 * max_diag;
    let mut l = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = a[j * n + j];
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k] * d[k];
        }
        if !(dj > floor) || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        l[j * n + j] = 1.0;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k] * d[k];
            }
            l[i * n + j] = s / dj;
        }
    }
    Some((l, d))
}

/// Inverse from an `LDLᵀ` factorization, one unit column at a time.
fn inverse_from_ldl(l: &[f64], d: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i] / d[i];
            for k in i + 1..n {
                s -= l[k * n + i] * inv[k * n + col];
            }
            inv[i * n + col] = s;
        }
    }
    for h in 0..n {
        for k in h + 1..n {
            let v = 0.5 * (inv[h * n + k] + inv[k * n + h]);
            inv[h * n + k] = v;
            inv[k * n + h] = v;
        }
    }
    inv
}

/// Inverts through an `LDLᵀ` factorization. On failure retries once with
/// `m + ridge · mean(diag) · I` and flags the result as regularized.
pub fn invert_spd(m: &SpdMatrix, ridge: f64) -> Result<SpdMatrix> {
    let n = m.dim;
    if let Some((l, d)) = ldl(&m.entries, n) {
        return Ok(SpdMatrix {
            dim: n,
            entries: inverse_from_ldl(&l, &d, n),
            regularized: m.regularized,
        });
    }
    if !(ridge > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let mean_diag = (0..n).map(|i| m.get(i, i)).sum::<f64>() / n as f64;
    if !(mean_diag > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let mut shifted = m.entries.clone();
    for i in 0..n {
        shifted[i * n + i] += ridge * mean_diag;
    }
    let (l, d) = ldl(&shifted, n).ok_or(Error::SingularMatrix)?;
    Ok(SpdMatrix {
        dim: n,
        entries: inverse_from_ldl(&l, &d, n),
        regularized: true,
    })
}

/// Inverse of the covariance matrix (codeviance / n) of a table.
pub fn inverse_covariance(table: &DistributionalTable, ridge: f64) -> Result<SpdMatrix> {
    let assoc = association_matrix(table)?;
    invert_spd(&SpdMatrix::new(assoc.cov)?, ridge)
}

fn check_dims<A, B>(xi: &[A], xj: &[B], a: &SpdMatrix) -> Result<()> {
    if xi.len() != a.dim || xj.len() != a.dim {
        return Err(Error::Shape(format!(
            "individuals have {} and {} components for a {}x{} matrix",
            xi.len(),
            xj.len(),
            a.dim,
            a.dim
        )));
    }
    Ok(())
}

/// `C[h][k] = ∫ (X_ih − X_jh)(X_ik − X_jk) dt` for all component pairs.
pub fn cross_integrals<A, B>(xi: &[A], xj: &[B]) -> Vec<Vec<f64>>
where
    A: AsRef<QuantileFunction>,
    B: AsRef<QuantileFunction>,
{
    let diffs: Vec<Vec<Segment>> = xi
        .iter()
        .zip(xj)
        .map(|(a, b)| piecewise::difference(a.as_ref().segments(), b.as_ref().segments()))
        .collect();
    let p = diffs.len();
    let mut c = vec![vec![0.0; p]; p];
    for h in 0..p {
        for k in h..p {
            let v = piecewise::integrate_product(&diffs[h], &diffs[k]);
            c[h][k] = v;
            c[k][h] = v;
        }
    }
    c
}

fn finish_form(q: f64, scale: f64) -> Result<f64> {
    if q < 0.0 {
        if q < -NEGATIVE_FORM_TOLERANCE * scale.max(1.0) {
            return Err(Error::InvalidMetric(q));
        }
        return Ok(0.0);
    }
    Ok(q)
}

/// Squared Mahalanobis–Wasserstein distance `Σ_h Σ_k a_hk C[h][k]`.
pub fn mahalanobis_squared<A, B>(xi: &[A], xj: &[B], a: &SpdMatrix) -> Result<f64>
where
    A: AsRef<QuantileFunction>,
    B: AsRef<QuantileFunction>,
{
    check_dims(xi, xj, a)?;
    let p = a.dim;
    if p == 1 {
        let d2 = distance_squared(xi[0].as_ref(), xj[0].as_ref());
        return finish_form(a.get(0, 0) * d2, (a.get(0, 0) * d2).abs());
    }
    let c = cross_integrals(xi, xj);
    let (mut q, mut scale) = (0.0, 0.0);
    for h in 0..p {
        for k in 0..p {
            let term = a.get(h, k) * c[h][k];
            q += term;
            scale += term.abs();
        }
    }
    finish_form(q, scale)
}

pub fn mahalanobis_wasserstein<A, B>(xi: &[A], xj: &[B], a: &SpdMatrix) -> Result<f64>
where
    A: AsRef<QuantileFunction>,
    B: AsRef<QuantileFunction>,
{
    Ok(mahalanobis_squared(xi, xj, a)?.sqrt())
}

/// Same-shape simplification: off-diagonal cross integrals are replaced by
/// products of mean and standard-deviation differences. Fails with a
/// validation error if the components do not share one shape.
pub fn mahalanobis_same_shape<A, B>(xi: &[A], xj: &[B], a: &SpdMatrix) -> Result<f64>
where
    A: AsRef<QuantileFunction>,
    B: AsRef<QuantileFunction>,
{
    check_dims(xi, xj, a)?;
    let all: Vec<&QuantileFunction> = xi
        .iter()
        .map(|q| q.as_ref())
        .chain(xj.iter().map(|q| q.as_ref()))
        .collect();
    for (u, qu) in all.iter().enumerate() {
        for qv in &all[u + 1..] {
            let r = rho_qq(qu, qv);
            if r < 1.0 - SAME_SHAPE_TOLERANCE {
                return Err(Error::Validation(format!(
                    "components do not share one shape (QQ correlation {r})"
                )));
            }
        }
    }
    mahalanobis_same_shape_unchecked(xi, xj, a)
}

/// As [`mahalanobis_same_shape`] with the shape check left to the caller.
pub fn mahalanobis_same_shape_unchecked<A, B>(xi: &[A], xj: &[B], a: &SpdMatrix) -> Result<f64>
where
    A: AsRef<QuantileFunction>,
    B: AsRef<QuantileFunction>,
{
    check_dims(xi, xj, a)?;
    let p = a.dim;
    let dm: Vec<f64> = xi
        .iter()
        .zip(xj)
        .map(|(u, v)| u.as_ref().mean() - v.as_ref().mean())
        .collect();
    let ds: Vec<f64> = xi
        .iter()
        .zip(xj)
        .map(|(u, v)| u.as_ref().std() - v.as_ref().std())
        .collect();
    let (mut q, mut scale) = (0.0, 0.0);
    for k in 0..p {
        let term = a.get(k, k) * distance_squared(xi[k].as_ref(), xj[k].as_ref());
        q += term;
        scale += term.abs();
    }
    for h in 0..p {
        for k in h + 1..p {
            let term = 2.0 * a.get(h, k) * (ds[h] * ds[k] + dm[h] * dm[k]);
            q += term;
            scale += term.abs();
        }
    }
    Ok(finish_form(q, scale)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{lower, ModalValue};

    fn iv(a: f64, b: f64) -> QuantileFunction {
        lower(&ModalValue::interval(a, b)).unwrap()
    }

    #[test]
    fn invert_examples() {
        let d = invert_spd(&SpdMatrix::diagonal(&[2.0, 4.0]), DEFAULT_RIDGE).unwrap();
        assert_eq!(d.rows(), vec![vec![0.5, 0.0], vec![0.0, 0.25]]);
        let i = invert_spd(&SpdMatrix::identity(3), DEFAULT_RIDGE).unwrap();
        assert_eq!(i, SpdMatrix::identity(3));
        let m = SpdMatrix::new(vec![vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let inv = invert_spd(&m, 0.0).unwrap();
        assert!(m.identity_residual(&inv) < 1e-14);
        assert!(!inv.is_regularized());
    }

    #[test]
    fn singular_needs_ridge() {
        let m = SpdMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(invert_spd(&m, 0.0), Err(Error::SingularMatrix)));
        let inv = invert_spd(&m, 1e-3).unwrap();
        assert!(inv.is_regularized());
        assert!(matches!(
            invert_spd(&SpdMatrix::diagonal(&[0.0, 0.0]), 1e-3),
            Err(Error::SingularMatrix)
        ));
        assert!(matches!(
            invert_spd(&SpdMatrix::diagonal(&[-1.0, 2.0]), 0.0),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn rejects_asymmetric_and_ragged() {
        assert!(SpdMatrix::new(vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(SpdMatrix::new(vec![vec![1.0, 0.5], vec![0.5]]).is_err());
        assert!(SpdMatrix::new(vec![]).is_err());
    }

    #[test]
    fn identity_metric_is_euclidean_wasserstein() {
        let xi = vec![iv(0.0, 1.0), QuantileFunction::constant(2.0)];
        let xj = vec![iv(2.0, 4.0), QuantileFunction::constant(5.0)];
        let d = mahalanobis_wasserstein(&xi, &xj, &SpdMatrix::identity(2)).unwrap();
        assert!((d * d - (19.0 / 3.0 + 9.0)).abs() < 1e-13);
        assert_eq!(
            mahalanobis_wasserstein(&xi, &xi, &SpdMatrix::identity(2)).unwrap(),
            0.0
        );
        assert!(matches!(
            mahalanobis_wasserstein(&xi, &xj[..1], &SpdMatrix::identity(2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn same_shape_matches_general_form() {
        let a = SpdMatrix::new(vec![vec![2.0, -0.7], vec![-0.7, 1.5]]).unwrap();
        let xi = vec![iv(0.0, 1.0), iv(3.0, 7.0)];
        let xj = vec![iv(2.0, 5.0), iv(-1.0, 0.0)];
        let general = mahalanobis_wasserstein(&xi, &xj, &a).unwrap();
        let simple = mahalanobis_same_shape(&xi, &xj, &a).unwrap();
        assert!((general - simple).abs() < 1e-12);
        assert_eq!(mahalanobis_same_shape(&xi, &xi, &a).unwrap(), 0.0);

        let skew = lower(&ModalValue::histogram(&[(0.0, 1.0, 0.9), (1.0, 9.0, 0.1)])).unwrap();
        let xk = vec![skew, iv(0.0, 1.0)];
        assert!(mahalanobis_same_shape(&xi, &xk, &a).is_err());
    }

    #[test]
    fn negative_form_is_rejected() {
        let a = SpdMatrix::new(vec![vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        let xi = vec![
            QuantileFunction::constant(1.0),
            QuantileFunction::constant(-1.0),
        ];
        let xj = vec![
            QuantileFunction::constant(0.0),
            QuantileFunction::constant(0.0),
        ];
        assert!(matches!(
            mahalanobis_wasserstein(&xi, &xj, &a),
            Err(Error::InvalidMetric(_))
        ));
    }
}
