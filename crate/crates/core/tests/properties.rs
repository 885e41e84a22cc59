#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeSet;

use common::*;
use geoaffinity::affinity::{affinity_scores, correlation_of_columns};
use geoaffinity::geometry::Ring;
use geoaffinity::ingest::{
    join_region, parse_geometry, parse_indicator_csv, parse_prevalence_csv, write_geometry_geojson, write_table_csv,
    AttributeTable, GeometrySet, MissingPolicy, TableSchema, TractId, ValueKind,
};
use geoaffinity::regression::{irls_m_fit, ols_fit, vif, Design, IrlsConfig};
use geoaffinity::spatial::{benjamini_hochberg, getis_ord_gi_star, morans_i};
use geoaffinity::synth::{build_scenario, Scenario};
use geoaffinity::weights::{
    distance_band_weights, knn_weights, queen_contiguity, rook_contiguity, row_standardize, WeightsMatrix,
};
use proptest::prelude::*;

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, n).prop_filter("non-constant", |v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() > 1e-6
    })
}

fn table(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..100.0f64, k), n)
}

fn permuted(w: &WeightsMatrix, perm: &[usize]) -> WeightsMatrix {
    // new index perm[i] takes old row i
    let mut rows = vec![Vec::new(); w.n];
    for (i, row) in w.neighbors.iter().enumerate() {
        rows[perm[i]] = row.iter().map(|&(j, v)| (perm[j], v)).collect();
    }
    WeightsMatrix::from_neighbors(w.n, rows, w.standardization, w.includes_self).unwrap()
}

fn apply_perm(x: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = x[i];
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affinity_is_popcount_and_affine_invariant(
        prev in table(16, 5),
        col in 0usize..5,
        shift in -50.0..50.0f64,
        scale in 0.01..100.0f64,
    ) {
        let l = lattice(4, 4);
        let r = region_from(&l, &prev, &[1.0; 16]);
        let a = affinity_scores(&r);
        for t in 0..16 {
            prop_assert_eq!(a.scores[t] as usize, a.flags[t].iter().filter(|f| **f).count());
        }
        prop_assert!((0.0..=1.0).contains(&a.share_max));
        let moved: Vec<Vec<f64>> = prev
            .iter()
            .map(|row| row.iter().enumerate().map(|(c, v)| if c == col { v * scale + shift } else { *v }).collect())
            .collect();
        let b = affinity_scores(&region_from(&l, &moved, &[1.0; 16]));
        prop_assert_eq!(&a.scores, &b.scores);
    }

    #[test]
    fn correlation_symmetric_and_affine_invariant(
        cols in prop::collection::vec(field(20), 3),
        scale in 0.1..10.0f64,
        shift in -10.0..10.0f64,
    ) {
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let m = correlation_of_columns(&names, &cols).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((m.r[i][j] - m.r[j][i]).abs() < 1e-12);
            }
        }
        let mut moved = cols.clone();
        moved[1] = moved[1].iter().map(|v| v * scale + shift).collect();
        let m2 = correlation_of_columns(&names, &moved).unwrap();
        prop_assert!((m.r[0][1] - m2.r[0][1]).abs() < 1e-10);
    }

    #[test]
    fn knn_out_degree_is_k(pts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 8..30), k in 1usize..6) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
        let w = knn_weights(&pts, k).unwrap();
        prop_assert!(w.neighbors.iter().all(|r| r.len() == k));
    }

    #[test]
    fn distance_band_is_symmetric(pts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 4..30), d in 0.5..5.0f64) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
        let w = distance_band_weights(&pts, d, false).unwrap();
        prop_assert!(w.is_symmetric());
    }

    #[test]
    fn moran_invariances(x in field(25), scale in 0.01..100.0f64, shift in -100.0..100.0f64, wscale in 0.1..10.0f64) {
        let l = lattice(5, 5);
        let w = l.rook().unwrap();
        let base = morans_i(&x, &w).unwrap().i;
        let moved: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
        prop_assert!((morans_i(&moved, &w).unwrap().i - base).abs() < 1e-9);
        prop_assert!((morans_i(&x, &w.scaled(wscale).unwrap()).unwrap().i - base).abs() < 1e-12);
    }

    #[test]
    fn relabeling_equivariance(x in field(25), perm in Just((0..25).collect::<Vec<usize>>()).prop_shuffle()) {
        let l = lattice(5, 5);
        let w = row_standardize(&queen_contiguity(&l.geometry, None).unwrap());
        let px = apply_perm(&x, &perm);
        let pw = permuted(&w, &perm);
        let a = morans_i(&x, &w).unwrap();
        let b = morans_i(&px, &pw).unwrap();
        prop_assert!((a.i - b.i).abs() < 1e-12);
        let cents: Vec<_> = l.geometry.iter().map(|g| g.centroid()).collect();
        let gw = distance_band_weights(&cents, 1.5, true).unwrap();
        let ga = getis_ord_gi_star(&x, &gw).unwrap();
        let gb = getis_ord_gi_star(&px, &permuted(&gw, &perm)).unwrap();
        for i in 0..25 {
            prop_assert!((ga.z[i] - gb.z[perm[i]]).abs() < 1e-10);
        }
    }

    #[test]
    fn gi_star_matches_formula(x in field(25)) {
        let l = lattice(5, 5);
        let cents: Vec<_> = l.geometry.iter().map(|g| g.centroid()).collect();
        let w = distance_band_weights(&cents, 1.0, true).unwrap();
        let gi = getis_ord_gi_star(&x, &w).unwrap();
        let d = dense(&w);
        for i in 0..25 {
            prop_assert!((gi.z[i] - gi_star_oracle(&x, &d, i)).abs() < 1e-10);
        }
    }

    #[test]
    fn fdr_rejections_are_nested(p in prop::collection::vec(0.0..1.0f64, 1..60), a1 in 0.001..0.5f64, gap in 0.0..0.5f64) {
        let small = benjamini_hochberg(&p, a1);
        let large = benjamini_hochberg(&p, a1 + gap);
        for (s, l) in small.iter().zip(&large) {
            prop_assert!(!s || *l);
        }
    }

    #[test]
    fn ols_normal_equations(cols in prop::collection::vec(field(30), 2), y in field(30)) {
        let names: Vec<String> = ["a", "b"].map(String::from).to_vec();
        let d = Design::with_intercept(&names, &cols).unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max) * 30.0 * 100.0;
        for j in 0..d.p() {
            let g: f64 = (0..30).map(|i| d.x[(i, j)] * fit.residuals[i]).sum();
            prop_assert!(g.abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn huber_stage_is_monotone(cols in prop::collection::vec(field(40), 2), y in field(40)) {
        let names: Vec<String> = ["a", "b"].map(String::from).to_vec();
        let d = Design::with_intercept(&names, &cols).unwrap();
        let fit = irls_m_fit(&d, &y, &IrlsConfig::default()).unwrap();
        for step in fit.trace.iter().filter(|s| s.stage == "huber") {
            prop_assert!(step.objective_after <= step.objective_before * (1.0 + 1e-10) + 1e-10);
        }
    }

    #[test]
    fn m_estimator_regression_equivariance(
        cols in prop::collection::vec(field(40), 2),
        y in field(40),
        gamma in prop::collection::vec(-5.0..5.0f64, 3),
    ) {
        let names: Vec<String> = ["a", "b"].map(String::from).to_vec();
        let d = Design::with_intercept(&names, &cols).unwrap();
        let base = irls_m_fit(&d, &y, &IrlsConfig::default()).unwrap();
        let shift = d.predict(&gamma);
        let y2: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let moved = irls_m_fit(&d, &y2, &IrlsConfig::default()).unwrap();
        for j in 0..3 {
            let scale = 1.0 + base.coefficients[j].abs() + gamma[j].abs();
            prop_assert!((moved.coefficients[j] - base.coefficients[j] - gamma[j]).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn vif_at_least_one(cols in prop::collection::vec(field(30), 3)) {
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let r = vif(&names, &cols).unwrap();
        prop_assert!(r.entries.iter().all(|e| e.vif >= 1.0 - 1e-12));
    }
}

#[test]
fn contiguity_symmetric_and_queen_contains_rook() {
    let l = lattice(6, 7);
    let q = queen_contiguity(&l.geometry, None).unwrap();
    let r = rook_contiguity(&l.geometry, None).unwrap();
    assert!(q.is_symmetric() && r.is_symmetric());
    let qe: BTreeSet<_> = q.edges().into_iter().collect();
    assert!(r.edges().iter().all(|e| qe.contains(e)));
    let rs = row_standardize(&q);
    assert!((rs.w_sum - 42.0).abs() < 1e-12);
}

#[test]
fn vertex_order_does_not_change_edges() {
    let l = lattice(4, 5);
    let mut moved = l.geometry.clone();
    for (i, mp) in moved.iter_mut().enumerate() {
        let ring = &mut mp.polygons[0].exterior;
        let mut open: Vec<[f64; 2]> = ring.points[..ring.points.len() - 1].to_vec();
        open.rotate_left(i % 4);
        if i % 2 == 0 {
            open.reverse();
        }
        *ring = Ring::closed(open).0;
    }
    let a = queen_contiguity(&l.geometry, None).unwrap();
    let b = queen_contiguity(&moved, None).unwrap();
    assert_eq!(a.edges(), b.edges());
    assert_eq!(rook_contiguity(&l.geometry, None).unwrap().edges(), rook_contiguity(&moved, None).unwrap().edges());
}

#[test]
fn breakdown_bisquare_bounded_ols_not() {
    let mut g = rng(11);
    let n = 60;
    let x = normal_field(&mut g, n);
    let e = normal_field(&mut g, n);
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x[i] + 0.5 * e[i]).collect();
    let d = Design::with_intercept(&["x".to_string()], &[x]).unwrap();
    let clean_ols = ols_fit(&d, &y).unwrap().coefficients;
    let clean_m = irls_m_fit(&d, &y, &IrlsConfig::default()).unwrap().coefficients;
    let mut ols_shift = Vec::new();
    for mag in [1e2, 1e4, 1e6] {
        let mut yo = y.clone();
        yo[0] += mag;
        let o = ols_fit(&d, &yo).unwrap().coefficients;
        let m = irls_m_fit(&d, &yo, &IrlsConfig::default()).unwrap().coefficients;
        let dm = ((m[0] - clean_m[0]).powi(2) + (m[1] - clean_m[1]).powi(2)).sqrt();
        assert!(dm < 0.5, "bisquare moved {dm} at {mag}");
        ols_shift.push(((o[0] - clean_ols[0]).powi(2) + (o[1] - clean_ols[1]).powi(2)).sqrt());
    }
    assert!(ols_shift[1] > 50.0 * ols_shift[0] && ols_shift[2] > 50.0 * ols_shift[1]);
}

fn csv_of(table: &AttributeTable) -> String {
    let mut buf = Vec::new();
    write_table_csv(table, "GEOID", &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn shuffle_body(csv: &str, seed: u64) -> String {
    use rand::seq::SliceRandom;
    let mut lines: Vec<&str> = csv.lines().collect();
    let header = lines.remove(0);
    lines.shuffle(&mut rng(seed));
    std::iter::once(header).chain(lines).collect::<Vec<_>>().join("\n") + "\n"
}

#[test]
fn synth_round_trip_and_order_canonicalization() {
    let sc = Scenario { lattice: geoaffinity::synth::LatticeSpec::new(6, 6), ..Default::default() };
    let data = build_scenario(&sc).unwrap();
    let region = data.region().unwrap();
    let prev_csv = csv_of(&data.tables.prevalence);
    let ind_csv = csv_of(&data.tables.indicators);
    let mut geo = Vec::new();
    write_geometry_geojson(&data.geometry_set(), "GEOID", &mut geo).unwrap();
    let names: Vec<&str> = data.tables.prevalence.names.iter().map(String::as_str).collect();
    let ind_names: Vec<&str> = data.tables.indicators.names.iter().map(String::as_str).collect();
    for seed in 0..3 {
        let p = parse_prevalence_csv(shuffle_body(&prev_csv, seed).as_bytes(), &TableSchema::identity("GEOID", &names, None))
            .unwrap();
        let i = parse_indicator_csv(shuffle_body(&ind_csv, seed + 10).as_bytes(), &TableSchema::identity("GEOID", &ind_names, None))
            .unwrap();
        let gset = parse_geometry(geo.as_slice(), "GEOID").unwrap();
        let back = join_region(&p, &i, &gset, MissingPolicy::DropIncomplete).unwrap();
        assert_eq!(back.tract_ids, region.tract_ids);
        assert_eq!(back.prevalence, region.prevalence);
        assert_eq!(back.indicators, region.indicators);
        assert_eq!(affinity_scores(&back).scores, affinity_scores(&region).scores);
        assert!(back.validation.dropped.is_empty());
    }
}

#[test]
fn join_is_idempotent() {
    let data = build_scenario(&Scenario { lattice: geoaffinity::synth::LatticeSpec::new(5, 5), ..Default::default() }).unwrap();
    let region = data.region().unwrap();
    let again = join_region(
        &region.prevalence_table(),
        &region.indicator_table(),
        &region.geometry_set(),
        MissingPolicy::Strict,
    )
    .unwrap();
    assert_eq!(again.tract_ids, region.tract_ids);
    assert_eq!(again.prevalence, region.prevalence);
    assert_eq!(again.indicators, region.indicators);
    assert_eq!(again.geometry, region.geometry);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn join_conserves_tracts(missing in prop::collection::vec(0u8..8, 20)) {
        // bit 0: no prevalence, bit 1: no indicators, bit 2: no geometry
        let l = lattice(4, 5);
        let ids: Vec<TractId> = l.ids.clone();
        let prev = AttributeTable {
            names: vec!["c0".into()],
            kinds: vec![ValueKind::Percent],
            rows: ids.iter().zip(&missing).filter(|(_, m)| *m & 1 == 0).map(|(id, _)| (id.clone(), vec![Some(5.0 + id.as_str().len() as f64)])).collect(),
            ..Default::default()
        };
        let ind = AttributeTable {
            names: vec!["poverty".into()],
            kinds: vec![ValueKind::Percent],
            rows: ids.iter().zip(&missing).filter(|(_, m)| *m & 2 == 0).map(|(id, _)| (id.clone(), vec![Some(1.0)])).collect(),
            ..Default::default()
        };
        let geom = GeometrySet {
            rows: ids.iter().zip(&missing).zip(&l.geometry).filter(|((_, m), _)| *m & 4 == 0).map(|((id, _), g)| (id.clone(), g.clone())).collect(),
            ..Default::default()
        };
        let complete = missing.iter().filter(|m| **m == 0).count();
        match join_region(&prev, &ind, &geom, MissingPolicy::DropIncomplete) {
            Ok(r) => {
                let v = &r.validation;
                prop_assert_eq!(v.counts.joined, complete);
                let dropped: BTreeSet<&TractId> = v.dropped.iter().map(|d| &d.id).collect();
                for (source, count, bit) in [("prevalence", v.counts.prevalence, 1u8), ("indicators", v.counts.indicators, 2), ("geometry", v.counts.geometry, 4)] {
                    let present_dropped = ids.iter().zip(&missing).filter(|(id, m)| *m & bit == 0 && dropped.contains(id)).count();
                    prop_assert_eq!(count, complete + present_dropped, "{}", source);
                    let absent = v.dropped.iter().filter(|d| d.reason.contains(&format!("no {source}"))).count();
                    // a tract absent from every source is invisible to the join
                    prop_assert_eq!(absent, missing.iter().filter(|m| *m & bit != 0 && **m != 7).count());
                }
                prop_assert_eq!(dropped.len() + complete, missing.iter().filter(|m| **m != 7).count());
            }
            Err(_) => prop_assert!(complete < 2),
        }
    }
}
