mod common;

use common::*;
use modalstat::association::{
    association_matrix, codeviance, codeviance_expanded, codeviance_same_shape, correlation,
};
use modalstat::mahalanobis::{
    cross_integrals, inverse_covariance, invert_spd, mahalanobis_squared, mahalanobis_wasserstein,
    SpdMatrix, DEFAULT_RIDGE,
};
use modalstat::univariate::{barycenter, inertia_to, pairwise_inertia, standardize, summarize};
use modalstat::wasserstein::distance_squared;
use modalstat::QuantileFunction;
use proptest::prelude::*;
use rand::Rng;

fn column(n: usize) -> impl Strategy<Value = Vec<QuantileFunction>> {
    prop::collection::vec(qf_strategy(), n)
}

fn column_pair() -> impl Strategy<Value = (Vec<QuantileFunction>, Vec<QuantileFunction>)> {
    (2usize..12).prop_flat_map(|n| (column(n), column(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairwise_identity(col in (1usize..20).prop_flat_map(column)) {
        let s = summarize(&col).unwrap();
        prop_assert!(rel_close(pairwise_inertia(&col).unwrap(), 2.0 * col.len() as f64 * s.ss, 1e-9));
    }

    #[test]
    fn barycenter_mean_is_mean_of_means(col in (1usize..20).prop_flat_map(column)) {
        let b = barycenter(&col).unwrap();
        let m = col.iter().map(|q| q.mean()).sum::<f64>() / col.len() as f64;
        prop_assert!(rel_close(b.mean(), m, 1e-12));
    }

    #[test]
    fn standardized_column_is_centered_and_unit(col in (2usize..15).prop_flat_map(column)) {
        prop_assume!(summarize(&col).unwrap().std > 1e-6);
        let z = standardize(&col).unwrap();
        let s = summarize(&z).unwrap();
        prop_assert!(s.barycenter_mean.abs() <= 1e-9);
        prop_assert!((s.std - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn shrinking(col in (1usize..15).prop_flat_map(column), h in -3.0f64..3.0, k in -5.0f64..5.0) {
        let s = summarize(&col).unwrap().std;
        let moved: Vec<_> = col.iter().map(|q| q.affine(h, k)).collect();
        prop_assert!((summarize(&moved).unwrap().std - h.abs() * s).abs() <= 1e-9 * (1.0 + h.abs() * s));
    }

    #[test]
    fn cauchy_schwarz((y, z) in column_pair()) {
        let c = codeviance(&y, &z).unwrap();
        let (sy, sz) = (summarize(&y).unwrap().ss, summarize(&z).unwrap().ss);
        prop_assert!(c.abs() <= (sy * sz).sqrt() + 1e-9);
        if sy > 0.0 && sz > 0.0 {
            prop_assert!(correlation(&y, &z).unwrap().abs() <= 1.0 + 1e-9);
            prop_assert_eq!(correlation(&y, &y).unwrap(), 1.0);
        }
    }

    #[test]
    fn codeviance_bilinear((y, z) in column_pair(), h1 in 0.1f64..3.0, h2 in 0.1f64..3.0, k1 in -5.0f64..5.0, k2 in -5.0f64..5.0) {
        let ym: Vec<_> = y.iter().map(|q| q.affine(h1, k1)).collect();
        let zm: Vec<_> = z.iter().map(|q| q.affine(h2, k2)).collect();
        let base = codeviance(&y, &z).unwrap();
        let scale = (summarize(&y).unwrap().ss * summarize(&z).unwrap().ss).sqrt() * h1 * h2;
        prop_assert!((codeviance(&ym, &zm).unwrap() - h1 * h2 * base).abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn expansion_matches_direct((y, z) in column_pair()) {
        let direct = codeviance(&y, &z).unwrap();
        let scale = (summarize(&y).unwrap().ss * summarize(&z).unwrap().ss).sqrt().max(1.0);
        prop_assert!((codeviance_expanded(&y, &z).unwrap() - direct).abs() <= 1e-9 * scale);
    }

    #[test]
    fn mahalanobis_identity_reduction(xi in prop::collection::vec(qf_strategy(), 1..5), seed in any::<u64>()) {
        let mut r = rng(seed);
        let xj = mixed_column(&mut r, xi.len());
        let id = SpdMatrix::identity(xi.len());
        let d2: f64 = xi.iter().zip(&xj).map(|(a, b)| distance_squared(a, b)).sum();
        prop_assert!(rel_close(mahalanobis_wasserstein(&xi, &xj, &id).unwrap(), d2.sqrt(), 1e-12));
        prop_assert_eq!(mahalanobis_wasserstein(&xi, &xi, &id).unwrap(), 0.0);
        let cross = cross_integrals(&xi, &xj);
        for (h, row) in cross.iter().enumerate() {
            prop_assert!(rel_close(row[h], distance_squared(&xi[h], &xj[h]), 1e-12));
        }
    }

    #[test]
    fn mahalanobis_symmetric(seed in any::<u64>(), p in 1usize..5) {
        let mut r = rng(seed);
        let a = SpdMatrix::new(random_spd(&mut r, p)).unwrap();
        let xi = mixed_column(&mut r, p);
        let xj = mixed_column(&mut r, p);
        let (d1, d2) = (mahalanobis_squared(&xi, &xj, &a).unwrap(), mahalanobis_squared(&xj, &xi, &a).unwrap());
        prop_assert!((d1 - d2).abs() <= 1e-9 * d1.max(1.0));
        prop_assert!(d1 >= 0.0);
    }
}

#[test]
fn huygens_decomposition() {
    let mut r = rng(11);
    for _ in 0..100 {
        let n = r.gen_range(2..25);
        let col = mixed_column(&mut r, n);
        let g = r.gen_range(1..=n.min(5));
        let labels: Vec<usize> = (0..n)
            .map(|i| if i < g { i } else { r.gen_range(0..g) })
            .collect();
        let global = barycenter(&col).unwrap();
        let total = inertia_to(&col, &global).unwrap();
        let mut within = 0.0;
        let mut between = 0.0;
        for h in 0..g {
            let members: Vec<QuantileFunction> = col
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == h)
                .map(|(q, _)| q.clone())
                .collect();
            let gb = barycenter(&members).unwrap();
            within += inertia_to(&members, &gb).unwrap();
            between += members.len() as f64 * distance_squared(&gb, &global);
        }
        assert!(
            rel_close(total, within + between, 1e-9),
            "{total} vs {}",
            within + between
        );
    }
}

#[test]
fn codeviance_between_within_additivity() {
    let mut r = rng(12);
    for _ in 0..50 {
        let n = r.gen_range(2..20);
        let y = mixed_column(&mut r, n);
        let z = mixed_column(&mut r, n);
        let g = r.gen_range(1..=n.min(4));
        let labels: Vec<usize> = (0..n)
            .map(|i| if i < g { i } else { r.gen_range(0..g) })
            .collect();
        let (yb, zb) = (barycenter(&y).unwrap(), barycenter(&z).unwrap());
        let total = codeviance(&y, &z).unwrap();
        let mut parts = 0.0;
        for h in 0..g {
            let pick = |c: &[QuantileFunction]| -> Vec<QuantileFunction> {
                c.iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == h)
                    .map(|(q, _)| q.clone())
                    .collect()
            };
            let (yg, zg) = (pick(&y), pick(&z));
            parts += codeviance(&yg, &zg).unwrap();
            let (ygb, zgb) = (barycenter(&yg).unwrap(), barycenter(&zg).unwrap());
            let cross = cross_integrals(&[&ygb, &zgb], &[&yb, &zb]);
            parts += yg.len() as f64 * cross[0][1];
        }
        let scale = (summarize(&y).unwrap().ss * summarize(&z).unwrap().ss)
            .sqrt()
            .max(1.0);
        assert!((total - parts).abs() <= 1e-9 * scale, "{total} vs {parts}");
    }
}

#[test]
fn same_shape_codeviance_on_uniform_columns() {
    let mut r = rng(13);
    for _ in 0..50 {
        let n = r.gen_range(2..15);
        let y: Vec<_> = (0..n).map(|_| lowered(&random_interval(&mut r))).collect();
        let z: Vec<_> = (0..n).map(|_| lowered(&random_interval(&mut r))).collect();
        let direct = codeviance(&y, &z).unwrap();
        assert!(rel_close(
            codeviance_same_shape(&y, &z).unwrap(),
            direct,
            1e-12
        ));
    }
}

#[test]
fn association_matrix_matches_pairwise_calls() {
    let mut r = rng(14);
    let t = histogram_table(&mut r, 5, 3);
    let m = association_matrix(&t).unwrap();
    for h in 0..3 {
        assert_eq!(m.corr[h][h], Some(1.0));
        for k in 0..3 {
            assert!((m.ss[h][k] - m.ss[k][h]).abs() <= 1e-12 * m.ss[h][h].max(1.0));
            let c = codeviance(t.column(h), t.column(k)).unwrap();
            assert!(rel_close(m.ss[h][k], c, 1e-12));
            assert_eq!(m.cov[h][k], m.ss[h][k] / 5.0);
            let r = correlation(t.column(h), t.column(k)).unwrap();
            assert!((m.corr[h][k].unwrap() - r).abs() <= 1e-12);
        }
    }
}

#[test]
fn mahalanobis_total_inertia_is_n_times_p() {
    // Σᵢ δ(xᵢ, G) = Σ a_hk ss_hk = n · tr(C⁻¹C) = n·p
    let mut r = rng(15);
    for p in 1..=4 {
        let n = 12;
        let t = histogram_table(&mut r, n, p);
        let a = inverse_covariance(&t, DEFAULT_RIDGE).unwrap();
        let g: Vec<QuantileFunction> = t.columns().iter().map(|c| barycenter(c).unwrap()).collect();
        let total: f64 = (0..n)
            .map(|i| mahalanobis_squared(&t.row(i), &g, &a).unwrap())
            .sum();
        assert!(rel_close(total, (n * p) as f64, 1e-9), "{total}");
    }
}

#[test]
fn spd_inverse_residual() {
    let mut r = rng(16);
    for _ in 0..50 {
        let m = SpdMatrix::new(random_spd(&mut r, 5)).unwrap();
        let inv = invert_spd(&m, DEFAULT_RIDGE).unwrap();
        assert!(m.identity_residual(&inv) <= 1e-8);
        assert!(!inv.is_regularized());
    }
}
