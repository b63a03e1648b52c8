mod oracles;

use proptest::prelude::*;

use socialclust::stattests::{
    chi_square_sf, kruskal_wallis, kruskal_wallis_with, ln_gamma, mann_whitney_u, mann_whitney_u_with, midrank,
    normal_sf, u_distribution, KruskalWallisMethod, MannWhitneyMode, MannWhitneyOptions, TestMethod,
};
use socialclust::Error;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..12).prop_map(f64::from), 1..25)
}

proptest! {
    #[test]
    fn u_statistic_matches_pair_count(x in sample(), y in sample()) {
        let r = mann_whitney_u(&x, &y, MannWhitneyMode::Normal).unwrap();
        let mut u1 = 0.0;
        for a in &x {
            for b in &y {
                u1 += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        let u2 = (x.len() * y.len()) as f64 - u1;
        prop_assert!((r.statistic - u1.min(u2)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn mann_whitney_is_symmetric(x in sample(), y in sample()) {
        for mode in [MannWhitneyMode::Auto, MannWhitneyMode::Normal] {
            let a = mann_whitney_u(&x, &y, mode).unwrap();
            let b = mann_whitney_u(&y, &x, mode).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn two_group_h_is_squared_z(x in sample(), y in sample()) {
        let pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
        prop_assume!(pooled.len() >= 3 && pooled.iter().any(|&v| v != pooled[0]));
        let kw = kruskal_wallis(&[x.clone(), y.clone()]).unwrap();
        let mw = mann_whitney_u_with(
            &x,
            &y,
            MannWhitneyOptions { mode: MannWhitneyMode::Normal, continuity_correction: false },
        )
        .unwrap();
        let z = mw.z.unwrap();
        prop_assert!((kw.statistic - z * z).abs() < 1e-9, "H = {}, z² = {}", kw.statistic, z * z);
        prop_assert!((kw.p_value - mw.p_value).abs() < 1e-9);
    }

    #[test]
    fn kruskal_wallis_statistic_matches_naive(groups in prop::collection::vec(sample(), 2..5)) {
        let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
        prop_assume!(pooled.len() >= 3 && pooled.iter().any(|&v| v != pooled[0]));
        let r = kruskal_wallis(&groups).unwrap();
        prop_assert!((r.statistic - oracles::naive_h(&groups)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.df, Some(groups.len() as u32 - 1));
    }

    #[test]
    fn midranks_match_counting(values in prop::collection::vec((0u8..8).prop_map(f64::from), 1..40)) {
        let ranked = midrank(&values).unwrap();
        prop_assert_eq!(ranked.ranks, oracles::naive_midranks(&values));
    }

    #[test]
    fn chi_square_sf_is_monotone(x in 0.0f64..300.0, dx in 0.001f64..20.0, df in 1u32..60) {
        let here = chi_square_sf(x, df).unwrap();
        prop_assert!((0.0..=1.0).contains(&here));
        prop_assert!(chi_square_sf(x + dx, df).unwrap() <= here);
        prop_assert!(chi_square_sf(x, df + 1).unwrap() >= here);
    }
}

#[test]
fn exact_and_normal_agree_for_eight_per_group() {
    let counts = u_distribution(8, 8);
    let total: u128 = counts.iter().sum();
    assert_eq!(total, 12870);
    let mut worst = 0.0f64;
    for mask in 0u32..(1 << 16) {
        if mask.count_ones() != 8 {
            continue;
        }
        let x: Vec<f64> = (0..16).filter(|b| mask & (1 << b) != 0).map(f64::from).collect();
        let y: Vec<f64> = (0..16).filter(|b| mask & (1 << b) == 0).map(f64::from).collect();
        let exact = mann_whitney_u(&x, &y, MannWhitneyMode::Exact).unwrap();
        assert_eq!(exact.method, TestMethod::ExactEnumeration);
        let normal = mann_whitney_u(&x, &y, MannWhitneyMode::Normal).unwrap();
        worst = worst.max((exact.p_value - normal.p_value).abs());
    }
    assert!(worst <= 0.02, "max |exact - normal| = {worst}");
}

#[test]
fn mann_whitney_textbook_values() {
    // completely separated groups of 3: U = 0, exact p = 2/20
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], MannWhitneyMode::Auto).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.method, TestMethod::ExactEnumeration);
    assert_eq!(r.p_value, 0.1);
    // ties push auto mode onto the normal approximation
    let r = mann_whitney_u(&[1.0, 1.0, 2.0], &[2.0, 3.0, 3.0], MannWhitneyMode::Auto).unwrap();
    assert_eq!(r.method, TestMethod::NormalApprox);
    assert!(r.tie_corrected);
    assert!(matches!(
        mann_whitney_u(&[1.0, 1.0], &[2.0], MannWhitneyMode::Exact),
        Err(Error::ExactWithTies)
    ));
    assert!(mann_whitney_u(&[], &[1.0], MannWhitneyMode::Auto).is_err());
    // identical samples: no evidence at all
    let r = mann_whitney_u(&[3.0; 5], &[3.0; 4], MannWhitneyMode::Auto).unwrap();
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn exact_kruskal_wallis_counts_arrangements() {
    let g = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
    let r = kruskal_wallis_with(&g, KruskalWallisMethod::Exact).unwrap();
    // 6!/(2!)^3 = 90 labelings; the 3! block orderings reach the maximum H
    assert!((r.p_value - 6.0 / 90.0).abs() < 1e-15);
    assert_eq!(r.method, TestMethod::ExactEnumeration);
    let auto = kruskal_wallis_with(&g, KruskalWallisMethod::Auto).unwrap();
    assert_eq!(auto.p_value, r.p_value);
    let big: Vec<Vec<f64>> = (0..3).map(|i| (0..200).map(|j| (i * 7 + j) as f64).collect()).collect();
    assert_eq!(kruskal_wallis_with(&big, KruskalWallisMethod::Auto).unwrap().method, TestMethod::ChiSquareApprox);
    assert!(matches!(
        kruskal_wallis_with(&big, KruskalWallisMethod::Exact),
        Err(Error::EnumerationTooLarge(_))
    ));
}

#[test]
fn kruskal_wallis_rejects_bad_groups() {
    assert!(kruskal_wallis(&[vec![1.0, 2.0]]).is_err());
    assert!(kruskal_wallis(&[vec![1.0], vec![]]).is_err());
    assert!(kruskal_wallis(&[vec![1.0], vec![2.0]]).is_err());
    let same = kruskal_wallis(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
    assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
    assert!(same.note.is_some());
}

#[test]
fn special_functions_reference_points() {
    assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-12);
    assert_eq!(normal_sf(0.0), 0.5);
    assert!((normal_sf(1.959963984540054) - 0.025).abs() < 1e-15);
    assert!((normal_sf(-1.0) + normal_sf(1.0) - 1.0).abs() < 1e-15);
    assert_eq!(normal_sf(40.0), 0.0);
    assert!(chi_square_sf(1.0, 0).is_err());
    assert!(chi_square_sf(-1.0, 3).is_err());
    assert!(chi_square_sf(f64::NAN, 3).is_err());
    assert_eq!(chi_square_sf(0.0, 3).unwrap(), 1.0);
    for z in [0.1, 0.5, 1.0, 2.5, 5.0, 10.0] {
        let want = oracles::erfc_series(z);
        assert!((socialclust::stattests::erfc(z) - want).abs() < 1e-13, "erfc({z})");
    }
}
