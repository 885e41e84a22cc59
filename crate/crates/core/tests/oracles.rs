mod common;

use common::*;
use geoaffinity::affinity::{correlation_of_columns, pearson};
use geoaffinity::regression::{hc1_standard_errors, ols_fit, vif, Design};
use geoaffinity::spatial::{benjamini_hochberg, getis_ord_gi_star, morans_i};
use geoaffinity::synth::{graph_ball, plant_hotspot};
use geoaffinity::weights::{distance_band_weights, knn_weights, queen_contiguity, row_standardize};
use rand::Rng;

#[test]
fn moran_three_by_three_matches_double_sum() {
    let l = lattice(3, 3);
    let w = row_standardize(&l.rook().unwrap());
    let x: Vec<f64> = (1..=9).map(f64::from).collect();
    let r = morans_i(&x, &w).unwrap();
    assert!((r.i - moran_oracle(&x, &dense(&w))).abs() < 1e-12);
}

#[test]
fn moran_random_fields_match_double_sum() {
    let mut g = rng(1);
    for (rows, cols) in [(4, 4), (5, 6), (7, 3)] {
        let l = lattice(rows, cols);
        let rook = l.rook().unwrap();
        let queen = queen_contiguity(&l.geometry, None).unwrap();
        for w in [rook.clone(), row_standardize(&rook), queen.clone(), row_standardize(&queen)] {
            let x = normal_field(&mut g, w.n);
            let r = morans_i(&x, &w).unwrap();
            assert!((r.i - moran_oracle(&x, &dense(&w))).abs() < 1e-10);
        }
    }
}

#[test]
fn gi_star_three_by_three_matches_formula() {
    let l = lattice(3, 3);
    let cents: Vec<_> = l.geometry.iter().map(|g| g.centroid()).collect();
    let w = distance_band_weights(&cents, 1.0, true).unwrap();
    let x: Vec<f64> = (1..=9).map(f64::from).collect();
    let gi = getis_ord_gi_star(&x, &w).unwrap();
    let d = dense(&w);
    for i in 0..9 {
        assert!((gi.z[i] - gi_star_oracle(&x, &d, i)).abs() < 1e-12, "tract {i}");
    }
}

#[test]
fn ols_matches_normal_equations() {
    let mut g = rng(2);
    let n = 50;
    let cols: Vec<Vec<f64>> = (0..3).map(|_| normal_field(&mut g, n)).collect();
    let eps = normal_field(&mut g, n);
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * cols[0][i] - cols[1][i] + 0.5 * cols[2][i] + eps[i]).collect();
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let fit = ols_fit(&Design::with_intercept(&names, &cols).unwrap(), &y).unwrap();
    let oracle = ols_oracle(&cols, &y);
    for (b, o) in fit.coefficients.iter().zip(&oracle) {
        assert!((b - o).abs() < 1e-8);
    }
}

#[test]
fn hc1_exceeds_classical_under_heteroscedasticity() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut g = rng(100 + seed);
        let n = 100;
        let x = normal_field(&mut g, n);
        let e = normal_field(&mut g, n);
        let y: Vec<f64> = (0..n).map(|i| 1.0 + x[i] + x[i] * e[i]).collect();
        let d = Design::with_intercept(&["x".to_string()], &[x]).unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        let hc1 = hc1_standard_errors(&fit, &d, &y).unwrap();
        if hc1[1] > fit.std_errors[1] {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn vif_matches_auxiliary_regression() {
    let mut g = rng(3);
    let n = 100;
    let x1 = normal_field(&mut g, n);
    let noise = normal_field(&mut g, n);
    let x2: Vec<f64> = x1.iter().zip(&noise).map(|(a, b)| a + 0.1 * b).collect();
    let report = vif(&["x1".into(), "x2".into()], &[x1.clone(), x2.clone()]).unwrap();
    // with two predictors R^2 of the auxiliary regression is r^2
    let b = ols_oracle(std::slice::from_ref(&x1), &x2);
    let fitted: Vec<f64> = x1.iter().map(|v| b[0] + b[1] * v).collect();
    let mean = x2.iter().sum::<f64>() / n as f64;
    let tss: f64 = x2.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = x2.iter().zip(&fitted).map(|(a, f)| (a - f).powi(2)).sum();
    let expected = 1.0 / (rss / tss);
    assert!((report.entries[1].vif - expected).abs() < 1e-8 * expected);
    assert!((report.entries[0].vif - expected).abs() < 1e-8 * expected);
    assert!((1.0 / (1.0 - pearson(&x1, &x2).powi(2)) - expected).abs() < 1e-8 * expected);
}

#[test]
fn bh_matches_hand_step_up() {
    let mut g = rng(4);
    for _ in 0..50 {
        let m = g.random_range(1..40);
        let p: Vec<f64> = (0..m).map(|_| g.random::<f64>().powi(3)).collect();
        let alpha = 0.05;
        let mut sorted = p.clone();
        sorted.sort_by(f64::total_cmp);
        let mut k = 0;
        for (i, v) in sorted.iter().enumerate() {
            if *v <= (i + 1) as f64 * alpha / m as f64 {
                k = i + 1;
            }
        }
        let cutoff = if k == 0 { -1.0 } else { sorted[k - 1] };
        let expected: Vec<bool> = p.iter().map(|v| *v <= cutoff).collect();
        assert_eq!(benjamini_hochberg(&p, alpha), expected);
    }
}

#[test]
fn knn_matches_brute_force() {
    let mut g = rng(5);
    let pts: Vec<[f64; 2]> = (0..40).map(|_| [g.random(), g.random()]).collect();
    let w = knn_weights(&pts, 4).unwrap();
    for i in 0..pts.len() {
        let mut d: Vec<(f64, usize)> = (0..pts.len())
            .filter(|&j| j != i)
            .map(|j| (((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt(), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut expected: Vec<usize> = d[..4].iter().map(|t| t.1).collect();
        expected.sort();
        let got: Vec<usize> = w.neighbors[i].iter().map(|t| t.0).collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn planted_ball_matches_bfs() {
    let l = lattice(20, 20);
    let rook = l.rook().unwrap();
    let d = dense(&rook);
    let center = l.index_of(10, 10).unwrap();
    let x = vec![0.0; 400];
    let (_, planted) = plant_hotspot(&x, &rook, center, 2, 1.0).unwrap();
    assert_eq!(planted.len(), 13);
    assert_eq!(planted.into_iter().collect::<Vec<_>>(), bfs_ball(&d, center, 2));
    let corner = l.index_of(0, 0).unwrap();
    assert_eq!(graph_ball(&rook, corner, 3).unwrap().into_iter().collect::<Vec<_>>(), bfs_ball(&d, corner, 3));
}

#[test]
fn correlation_matches_textbook_formula() {
    let mut g = rng(6);
    let cols: Vec<Vec<f64>> = (0..3).map(|_| normal_field(&mut g, 30)).collect();
    let m = correlation_of_columns(&["a".into(), "b".into(), "c".into()], &cols).unwrap();
    let n = 30.0;
    let (x, y) = (&cols[0], &cols[2]);
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    assert!((m.r[0][2] - r).abs() < 1e-12);
}
