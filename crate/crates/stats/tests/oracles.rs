//! Rank tests, OLS and Fisher checked against independent brute-force routes.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailors_stats::{fisher_compare, kruskal_wallis, ols_fit, significance_stars, wilcoxon_signed_rank};

/// Midrank by counting: (#smaller) + (#equal + 1) / 2.
fn count_rank(values: &[f64], v: f64) -> f64 {
    let less = values.iter().filter(|x| **x < v).count() as f64;
    let equal = values.iter().filter(|x| **x == v).count() as f64;
    less + (equal + 1.0) / 2.0
}

/// Exact two-sided signed-rank p by visiting all 2^n sign assignments.
fn enumerate_signed_rank(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    let diffs: Vec<f64> = pairs.iter().map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return None;
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = mags.iter().map(|m| count_rank(&mags, *m)).collect();
    let observed: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = ranks.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    let total = 2f64.powi(n as i32);
    Some((observed, (2.0 * le.min(ge) as f64 / total).min(1.0)))
}

/// H as the between-group share of rank variance, which carries the tie
/// correction implicitly.
fn direct_h(groups: &[Vec<f64>]) -> f64 {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let grand = (n + 1.0) / 2.0;
    let total_ss: f64 = pooled.iter().map(|v| (count_rank(&pooled, *v) - grand).powi(2)).sum();
    if total_ss == 0.0 {
        return 0.0;
    }
    let between: f64 = groups
        .iter()
        .map(|g| {
            let mean = g.iter().map(|v| count_rank(&pooled, *v)).sum::<f64>() / g.len() as f64;
            g.len() as f64 * (mean - grand).powi(2)
        })
        .sum();
    (n - 1.0) * between / total_ss
}

#[test]
fn signed_rank_exact_p_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 300 {
        let n = rng.random_range(1..=10);
        // small integer grid forces ties and zero differences
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(1..=7) as f64, rng.random_range(1..=7) as f64))
            .collect();
        let Some((w_plus, p)) = enumerate_signed_rank(&pairs) else { continue };
        let got = wilcoxon_signed_rank(&pairs).unwrap();
        assert!(got.exact);
        assert_eq!(got.w_plus, w_plus, "{pairs:?}");
        assert_eq!(got.test.p_value, p, "{pairs:?}");
        checked += 1;
    }
}

#[test]
fn kruskal_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let k = rng.random_range(2..=4);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let len = rng.random_range(1..=8);
                (0..len).map(|_| rng.random_range(1..=6) as f64).collect()
            })
            .collect();
        if groups.iter().map(Vec::len).sum::<usize>() < 3 {
            continue;
        }
        let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
        let h = kruskal_wallis(&refs).unwrap().statistic;
        let oracle = direct_h(&groups);
        assert!((h - oracle).abs() <= 1e-12 * oracle.max(1.0), "{h} vs {oracle}");
        let all_equal = groups.iter().flatten().all(|v| *v == groups[0][0]);
        assert_eq!(h == 0.0, all_equal || oracle.abs() < 1e-12);
    }
}

#[test]
fn kruskal_h_zero_only_when_pooled_constant() {
    let r = kruskal_wallis(&[&[2.0, 2.0], &[2.0], &[2.0, 2.0]]).unwrap();
    assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    let r = kruskal_wallis(&[&[2.0, 2.0], &[2.0], &[2.0, 3.0]]).unwrap();
    assert!(r.statistic > 0.0);
}

#[test]
fn ols_recovers_planted_twelve_coefficient_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, k) = (27, 12);
    let x = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let beta: Vec<f64> = (0..k).map(|j| (j as f64 - 5.5) / 7.0).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 0.3 + (0..k).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
    let fit = ols_fit(&x, &y, &names).unwrap();
    for (row, b) in fit.rows.iter().zip(&beta) {
        assert!((row.coefficient - b).abs() < 1e-8);
    }
    assert!((fit.intercept.coefficient - 0.3).abs() < 1e-8);
    assert_eq!((fit.df_model, fit.df_resid), (12, 14));
}

#[test]
fn adding_noise_column_to_exact_fit_keeps_adjusted_r2() {
    // exact fit stays exact; adjusted R^2 cannot rise above 1
    let xs = [1.0, 2.0, 4.0, 5.0, 7.0, 8.0, 9.5];
    let y: Vec<f64> = xs.iter().map(|v| 3.0 - 0.5 * v).collect();
    let one = ols_fit(&DMatrix::from_column_slice(7, 1, &xs), &y, &["a".into()]).unwrap();
    let mut data = xs.to_vec();
    data.extend([0.3, -1.2, 0.8, 0.1, -0.4, 1.1, -0.7]);
    let two = ols_fit(&DMatrix::from_column_slice(7, 2, &data), &y, &["a".into(), "noise".into()]).unwrap();
    assert!(two.adj_r_squared <= one.adj_r_squared + 1e-12);
    assert_eq!(two.df_resid + 1, one.df_resid);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kruskal_invariant_under_monotone_transform(
        a in prop::collection::vec(-50i32..50, 1..8),
        b in prop::collection::vec(-50i32..50, 1..8),
        c in prop::collection::vec(-50i32..50, 1..8),
    ) {
        let to_f = |v: &Vec<i32>| v.iter().map(|x| *x as f64).collect::<Vec<_>>();
        let (a, b, c) = (to_f(&a), to_f(&b), to_f(&c));
        let f = |v: &Vec<f64>| v.iter().map(|x| (x / 10.0).exp() + 3.0 * x).collect::<Vec<_>>();
        let h1 = kruskal_wallis(&[&a, &b, &c]).unwrap().statistic;
        let h2 = kruskal_wallis(&[&f(&a), &f(&b), &f(&c)]).unwrap().statistic;
        prop_assert!((h1 - h2).abs() <= 1e-12 * h1.max(1.0));
    }

    #[test]
    fn ols_residuals_orthogonal_to_design(seed in any::<u64>(), n in 8usize..40, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, k, |_, _| rng.random_range(-3.0..3.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
        let fit = ols_fit(&x, &y, &names).unwrap();
        let intercept_dot: f64 = fit.residuals.iter().sum();
        prop_assert!(intercept_dot.abs() <= 1e-8);
        for j in 0..k {
            let dot: f64 = fit.residuals.iter().enumerate().map(|(i, r)| r * x[(i, j)]).sum();
            prop_assert!(dot.abs() <= 1e-8);
        }
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        prop_assert!(fit.adj_r_squared <= fit.r_squared);
        for row in &fit.rows {
            prop_assert_eq!(row.t_value, row.coefficient / row.std_err);
        }
    }

    #[test]
    fn fisher_is_antisymmetric(r1 in -0.99f64..0.99, r2 in -0.99f64..0.99, n1 in 4usize..200, n2 in 4usize..200) {
        let a = fisher_compare(r1, n1, r2, n2).unwrap();
        let b = fisher_compare(r2, n2, r1, n1).unwrap();
        prop_assert_eq!(a.z_stat, -b.z_stat);
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert_eq!(a.stars, significance_stars(a.p_value));
    }

    #[test]
    fn stars_monotone_in_p(p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(significance_stars(lo).len() >= significance_stars(hi).len());
    }
}

#[test]
fn fisher_strong_coefficient_gaps_are_highly_significant() {
    let bright = fisher_compare(0.9809, 27, -0.0587, 27).unwrap();
    assert_eq!(bright.stars, "***");
    assert!(bright.z_stat.abs() >= 3.29 && (bright.z_stat - 8.24).abs() < 0.01);
    let blunt = fisher_compare(-0.7973, 27, 0.1497, 27).unwrap();
    assert_eq!(blunt.stars, "***");
}
