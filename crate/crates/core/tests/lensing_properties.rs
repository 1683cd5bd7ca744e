use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;

use semcurv::lensing::{
    align_triples, compare_pair, compare_polylines, compare_triple, curvature_divergence, describe, final_separation,
    layer_separation, summarize_cohort, turning_angle_gap, LensingError, Metric, Pairing,
};
use semcurv::synthetic::lensing_bundles;
use semcurv::EmbeddingTrajectory;

const EPS: f64 = 1e-12;

fn pts(rows: &[[f64; 2]]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

fn walk(rng: &mut Pcg64Mcg, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn all_metrics(a: &[Vec<f64>], b: &[Vec<f64>]) -> [f64; 4] {
    let m = compare_pair(a, b, EPS).unwrap();
    [
        m.d_final.unwrap(),
        m.d_layer,
        m.delta_curv.value.unwrap(),
        m.delta_theta.value.unwrap(),
    ]
}

#[test]
fn final_separation_by_hand() {
    let a = pts(&[[0.0, 0.0], [1.0, 0.0]]);
    assert_eq!(final_separation(&a, &a, EPS).unwrap(), Some(0.0));
    assert_eq!(
        final_separation(&a, &pts(&[[0.0, 0.0], [0.0, 1.0]]), EPS).unwrap(),
        Some(1.0)
    );
    assert_eq!(
        final_separation(&a, &pts(&[[0.0, 0.0], [-1.0, 0.0]]), EPS).unwrap(),
        Some(2.0)
    );
}

#[test]
fn layer_separation_by_hand() {
    let a = pts(&[[0.0, 0.0], [1.0, 2.0], [4.0, -1.0]]);
    assert_eq!(layer_separation(&a, &a).unwrap(), 0.0);
    let b: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0] + 3.0, p[1] - 4.0]).collect();
    assert_eq!(layer_separation(&a, &b).unwrap(), 5.0);
}

#[test]
fn curvature_divergence_by_hand() {
    let a = pts(&[[0.0, 0.0], [1.0, 0.0], [2.0, 1.0], [3.0, 1.0], [4.0, 2.0]]);
    assert_eq!(curvature_divergence(&a, &a, EPS).unwrap().value, Some(0.0));
    let mirrored: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0], -p[1]]).collect();
    let zigzag = pts(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0], [4.0, 0.0]]);
    let flipped: Vec<Vec<f64>> = zigzag.iter().map(|p| vec![p[0], -p[1]]).collect();
    assert_eq!(curvature_divergence(&zigzag, &flipped, EPS).unwrap().value, Some(2.0));
    assert!(curvature_divergence(&a, &mirrored, EPS).unwrap().value.unwrap() > 0.0);
}

#[test]
fn turning_gap_by_hand() {
    let line = pts(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
    let stairs = pts(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    assert_eq!(turning_angle_gap(&line, &line, EPS).unwrap().value, Some(0.0));
    let gap = turning_angle_gap(&line, &stairs, EPS).unwrap().value.unwrap();
    assert!((gap - FRAC_PI_2).abs() <= 1e-12);
}

#[test]
fn identical_triple_is_all_zero() {
    let mut rng = Pcg64Mcg::seed_from_u64(1);
    let a = walk(&mut rng, 13, 32);
    let r = compare_polylines("t", &a, &a, &a, EPS).unwrap();
    for p in Pairing::ALL {
        for m in Metric::ALL {
            assert_eq!(r.pairing(p).get(m), Some(0.0), "{} {}", p.name(), m.name());
        }
    }
}

#[test]
fn base_equal_to_with_mirrors_the_other_pairings() {
    let mut rng = Pcg64Mcg::seed_from_u64(2);
    let (with, without) = (walk(&mut rng, 13, 32), walk(&mut rng, 13, 32));
    let r = compare_polylines("t", &with, &without, &with, EPS).unwrap();
    for m in Metric::ALL {
        assert_eq!(r.with_vs_base.get(m), Some(0.0));
        assert_eq!(r.with_vs_without.get(m), r.without_vs_base.get(m));
    }
}

#[test]
fn single_report_collapses_the_summary() {
    let s = describe(&[0.25], 0).unwrap();
    assert_eq!([s.min, s.q1, s.median, s.q3, s.max], [0.25; 5]);
    assert_eq!(s.mean, 0.25);
    assert_eq!(s.sd, None);
}

#[test]
fn identical_reports_have_zero_spread() {
    let mut rng = Pcg64Mcg::seed_from_u64(3);
    let (a, b, c) = (walk(&mut rng, 13, 16), walk(&mut rng, 13, 16), walk(&mut rng, 13, 16));
    let r = compare_polylines("t", &a, &b, &c, EPS).unwrap();
    let cohort = summarize_cohort(&vec![r; 7]).unwrap();
    for (_, _, s) in &cohort.cells {
        assert_eq!(s.as_ref().unwrap().sd, Some(0.0));
    }
}

#[test]
fn quantiles_interpolate_linearly() {
    let s = describe(&[4.0, 1.0, 3.0, 2.0], 0).unwrap();
    assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.75, 2.5, 3.25, 4.0));
}

#[test]
#[allow(clippy::needless_range_loop)]
fn random_pairs_match_explicit_loops() {
    let mut rng = Pcg64Mcg::seed_from_u64(4);
    for _ in 0..50 {
        let (a, b) = (walk(&mut rng, 13, 24), walk(&mut rng, 13, 24));
        let mut layer = 0.0;
        for i in 0..13 {
            let mut s = 0.0;
            for k in 0..24 {
                s += (a[i][k] - b[i][k]) * (a[i][k] - b[i][k]);
            }
            layer += s.sqrt();
        }
        layer /= 13.0;
        let mut curv = 0.0;
        let mut gap = 0.0;
        for i in 1..12 {
            let mut ga = [0.0; 24];
            let mut gb = [0.0; 24];
            for k in 0..24 {
                ga[k] = a[i + 1][k] - 2.0 * a[i][k] + a[i - 1][k];
                gb[k] = b[i + 1][k] - 2.0 * b[i][k] + b[i - 1][k];
            }
            let (mut dab, mut naa, mut nbb) = (0.0, 0.0, 0.0);
            for k in 0..24 {
                dab += ga[k] * gb[k];
                naa += ga[k] * ga[k];
                nbb += gb[k] * gb[k];
            }
            curv += 1.0 - dab / (naa.sqrt() * nbb.sqrt());
            let angle = |p: &[Vec<f64>]| {
                let (mut d, mut n1, mut n2) = (0.0, 0.0, 0.0);
                for k in 0..24 {
                    let u = p[i][k] - p[i - 1][k];
                    let v = p[i + 1][k] - p[i][k];
                    d += u * v;
                    n1 += u * u;
                    n2 += v * v;
                }
                (d / (n1.sqrt() * n2.sqrt())).clamp(-1.0, 1.0).acos()
            };
            gap += (angle(&a) - angle(&b)).abs();
        }
        let got = all_metrics(&a, &b);
        assert!((got[1] - layer).abs() <= 1e-12 * layer);
        assert!((got[2] - curv / 11.0).abs() <= 1e-12);
        assert!((got[3] - gap / 11.0).abs() <= 1e-9);
    }
}

#[test]
fn misaligned_ids_are_listed() {
    let t = |id: &str| EmbeddingTrajectory::new(id, "bank", "s", 0, &[vec![0.0f32, 1.0], vec![1.0, 1.0]]).unwrap();
    let with = vec![t("a"), t("b")];
    let without = vec![t("b"), t("a")];
    let base = vec![t("a"), t("c")];
    match align_triples(&with, &without, &base) {
        Err(LensingError::Misaligned(ids)) => assert_eq!(ids, vec!["b".to_owned(), "c".to_owned()]),
        other => panic!("{other:?}"),
    }
    let ok = align_triples(&with, &without, &[t("b"), t("a")]).unwrap();
    assert_eq!(ok.iter().map(|t| t.triple_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
}

#[test]
fn synthetic_cohort_orders_pairings() {
    let [with, without, base] = lensing_bundles(50, 50, 128, 13).unwrap();
    let triples = align_triples(&with.trajectories, &without.trajectories, &base.trajectories).unwrap();
    let reports: Vec<_> = triples.iter().map(|t| compare_triple(t, EPS).unwrap()).collect();
    let cohort = summarize_cohort(&reports).unwrap();
    assert!(cohort.pairing_order_holds());
    for m in Metric::ALL {
        let mean = |p| cohort.get(p, m).unwrap().mean;
        let manual = |p| reports.iter().map(|r| r.pairing(p).get(m).unwrap()).sum::<f64>() / reports.len() as f64;
        for p in Pairing::ALL {
            assert!((mean(p) - manual(p)).abs() <= 1e-12 * manual(p).abs().max(1.0));
        }
    }
}

/// Orthogonal map from three reflections.
fn reflect(normals: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for n in normals {
        let d: f64 = y.iter().zip(n).map(|(a, b)| a * b).sum();
        y.iter_mut().zip(n).for_each(|(a, b)| *a -= 2.0 * d * b);
    }
    y
}

fn pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (3usize..9, 2usize..10).prop_flat_map(|(n, d)| {
        let poly = prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n);
        (poly.clone(), poly)
    })
}

proptest! {
    #[test]
    fn metrics_are_symmetric((a, b) in pair()) {
        let (x, y) = (compare_pair(&a, &b, EPS).unwrap(), compare_pair(&b, &a, EPS).unwrap());
        for m in Metric::ALL {
            match (x.get(m), y.get(m)) {
                (Some(u), Some(v)) => prop_assert!((u - v).abs() <= 1e-12),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn metrics_stay_in_range((a, b) in pair()) {
        let m = compare_pair(&a, &b, EPS).unwrap();
        if let Some(v) = m.d_final { prop_assert!((0.0..=2.0).contains(&v)); }
        if let Some(v) = m.delta_curv.value { prop_assert!((0.0..=2.0).contains(&v)); }
        if let Some(v) = m.delta_theta.value { prop_assert!((0.0..=PI).contains(&v)); }
        prop_assert!(m.d_layer >= 0.0);
    }

    #[test]
    fn rigid_motion_invariance((a, b) in pair(), seed in any::<u64>()) {
        let d = a[0].len();
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let normals: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let rotate = |p: &[Vec<f64>]| p.iter().map(|x| reflect(&normals, x)).collect::<Vec<_>>();
        let moved = |p: &[Vec<f64>]| {
            rotate(p).into_iter().map(|x| x.iter().zip(&shift).map(|(u, s)| u + s).collect()).collect::<Vec<Vec<f64>>>()
        };
        let before = compare_pair(&a, &b, EPS).unwrap();
        let after = compare_pair(&moved(&a), &moved(&b), EPS).unwrap();
        prop_assert!((before.d_layer - after.d_layer).abs() <= 1e-9);
        for m in [Metric::DeltaCurv, Metric::DeltaTheta] {
            if let (Some(u), Some(v)) = (before.get(m), after.get(m)) {
                prop_assert!((u - v).abs() <= 1e-9);
            }
        }
        let rotated = compare_pair(&rotate(&a), &rotate(&b), EPS).unwrap();
        if let (Some(u), Some(v)) = (before.d_final, rotated.d_final) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
    }
}
