//! Codeviance, covariance, and correlation between modal-numeric variables.
//!
//! Individuals are assumed to carry independent descriptions across
//! variables; only the marginal quantile functions enter the computation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::piecewise;
use crate::quantile::QuantileFunction;
use crate::table::DistributionalTable;
use crate::univariate::{barycenter, summarize};
use crate::wasserstein::rho_qq;

/// Σᵢ ∫ (Yᵢ − Ȳ)(Zᵢ − Z̄) dt with both barycenters supplied.
pub(crate) fn codeviance_about(
    y: &[QuantileFunction],
    y_bar: &QuantileFunction,
    z: &[QuantileFunction],
    z_bar: &QuantileFunction,
) -> f64 {
    y.iter()
        .zip(z)
        .map(|(yi, zi)| {
            piecewise::integrate_cross_difference(
                yi.segments(),
                y_bar.segments(),
                zi.segments(),
                z_bar.segments(),
            )
        })
        .sum()
}

fn check_pair(y: &[QuantileFunction], z: &[QuantileFunction]) -> Result<()> {
    if y.len() != z.len() {
        return Err(Error::Shape(format!(
            "columns have {} and {} individuals",
            y.len(),
            z.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("codeviance of empty columns"));
    }
    Ok(())
}

/// Direct-integral codeviance `ss_yz`.
pub fn codeviance(y: &[QuantileFunction], z: &[QuantileFunction]) -> Result<f64> {
    check_pair(y, z)?;
    let y_bar = barycenter(y)?;
    let z_bar = barycenter(z)?;
    Ok(codeviance_about(y, &y_bar, z, &z_bar))
}

pub fn covariance(y: &[QuantileFunction], z: &[QuantileFunction]) -> Result<f64> {
    Ok(codeviance(y, z)? / y.len() as f64)
}

/// The moment/QQ-correlation expansion of the codeviance and its terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodevianceExpansion {
    /// `ρ_QQ(Yᵢ, Zᵢ)`
    pub alpha: Vec<f64>,
    /// `ρ_QQ(Zᵢ, Ȳ)`
    pub beta: Vec<f64>,
    /// `ρ_QQ(Yᵢ, Z̄)`
    pub gamma: Vec<f64>,
    /// `ρ_QQ(Ȳ, Z̄)`
    pub delta: f64,
    /// Σᵢ μ_iy μ_iz − n μ_ȳ μ_z̄
    pub mean_part: f64,
    /// The remaining spread/shape part.
    pub spread_part: f64,
    pub value: f64,
}

pub fn codeviance_terms(
    y: &[QuantileFunction],
    z: &[QuantileFunction],
) -> Result<CodevianceExpansion> {
    check_pair(y, z)?;
    let n = y.len() as f64;
    let y_bar = barycenter(y)?;
    let z_bar = barycenter(z)?;
    let (s_ybar, s_zbar) = (y_bar.std(), z_bar.std());
    let (m_ybar, m_zbar) = (y_bar.mean(), z_bar.mean());

    let mut alpha = Vec::with_capacity(y.len());
    let mut beta = Vec::with_capacity(y.len());
    let mut gamma = Vec::with_capacity(y.len());
    let mut spread = 0.0;
    let mut cross_means = 0.0;
    for (yi, zi) in y.iter().zip(z) {
        let (s_iy, s_iz) = (yi.std(), zi.std());
        let a = rho_qq(yi, zi);
        let b = rho_qq(zi, &y_bar);
        let g = rho_qq(yi, &z_bar);
        spread += a * s_iy * s_iz - b * s_ybar * s_iz - g * s_iy * s_zbar;
        cross_means += yi.mean() * zi.mean();
        alpha.push(a);
        beta.push(b);
        gamma.push(g);
    }
    let delta = rho_qq(&y_bar, &z_bar);
    spread += n * delta * s_ybar * s_zbar;
    let mean_part = cross_means - n * m_ybar * m_zbar;
    Ok(CodevianceExpansion {
        alpha,
        beta,
        gamma,
        delta,
        mean_part,
        spread_part: spread,
        value: mean_part + spread,
    })
}

/// Codeviance rebuilt from first two moments and QQ correlations. Agrees
/// with [`codeviance`] up to rounding.
pub fn codeviance_expanded(y: &[QuantileFunction], z: &[QuantileFunction]) -> Result<f64> {
    Ok(codeviance_terms(y, z)?.value)
}

/// Codeviance when every distribution involved shares one shape, so every
/// QQ correlation is 1: `(Σ μ_iy μ_iz − n μ_ȳ μ_z̄) + (Σ s_iy s_iz − n s_ȳ s_z̄)`.
pub fn codeviance_same_shape(y: &[QuantileFunction], z: &[QuantileFunction]) -> Result<f64> {
    check_pair(y, z)?;
    let n = y.len() as f64;
    let y_bar = barycenter(y)?;
    let z_bar = barycenter(z)?;
    let mut means = 0.0;
    let mut stds = 0.0;
    for (yi, zi) in y.iter().zip(z) {
        means += yi.mean() * zi.mean();
        stds += yi.std() * zi.std();
    }
    Ok((means - n * y_bar.mean() * z_bar.mean()) + (stds - n * y_bar.std() * z_bar.std()))
}

/// `ss_yz / √(ss_y ss_z)`. All three sums share one integrator, so
/// `correlation(y, y)` is exactly 1.
pub fn correlation(y: &[QuantileFunction], z: &[QuantileFunction]) -> Result<f64> {
    check_pair(y, z)?;
    let y_bar = barycenter(y)?;
    let z_bar = barycenter(z)?;
    let ss_y = codeviance_about(y, &y_bar, y, &y_bar);
    let ss_z = codeviance_about(z, &z_bar, z, &z_bar);
    if !(ss_y > 0.0) {
        return Err(Error::DegenerateVariable("y".into()));
    }
    if !(ss_z > 0.0) {
        return Err(Error::DegenerateVariable("z".into()));
    }
    Ok(codeviance_about(y, &y_bar, z, &z_bar) / (ss_y * ss_z).sqrt())
}

/// Codeviance, covariance, and correlation matrices of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationMatrix {
    pub names: Vec<String>,
    pub n: usize,
    pub ss: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
    /// `None` where either variable is degenerate.
    pub corr: Vec<Vec<Option<f64>>>,
}

impl AssociationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }
}

pub fn association_matrix(table: &DistributionalTable) -> Result<AssociationMatrix> {
    let p = table.p();
    let n = table.n();
    let summaries = table
        .columns()
        .par_iter()
        .map(|c| summarize(c))
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|h| (h + 1..p).map(move |k| (h, k)))
        .collect();
    let off: Vec<f64> = pairs
        .par_iter()
        .map(|&(h, k)| {
            codeviance_about(
                table.column(h),
                &summaries[h].barycenter,
                table.column(k),
                &summaries[k].barycenter,
            )
        })
        .collect();

    let mut ss = vec![vec![0.0; p]; p];
    for (h, s) in summaries.iter().enumerate() {
        ss[h][h] = s.ss;
    }
    for (&(h, k), &v) in pairs.iter().zip(&off) {
        ss[h][k] = v;
        ss[k][h] = v;
    }
    let nf = n as f64;
    let cov = ss
        .iter()
        .map(|row| row.iter().map(|v| v / nf).collect())
        .collect();
    let corr = (0..p)
        .map(|h| {
            (0..p)
                .map(|k| {
                    let (a, b) = (ss[h][h], ss[k][k]);
                    if !(a > 0.0 && b > 0.0) {
                        None
                    } else if h == k {
                        Some(1.0)
                    } else {
                        Some(ss[h][k] / (a * b).sqrt())
                    }
                })
                .collect()
        })
        .collect();
    Ok(AssociationMatrix {
        names: table.variable_names().to_vec(),
        n,
        ss,
        cov,
        corr,
    })
}
