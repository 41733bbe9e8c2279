mod common;

use common::*;
use openpatch_core::bank::{Label, MatchRecord, Provenance};
use openpatch_core::coreset::{coverage_radius, farthest_point_order, CoresetConfig};
use openpatch_core::metrics::{auroc, fpr95};
use openpatch_core::pipeline::build_bank;
use openpatch_core::scoring::{class_probabilities, score_entropy, score_max, score_mean, score_weighted_entropy};
use openpatch_core::{build_index, match_patches, ClassId, SampleEmbeddingSet};
use proptest::prelude::*;

fn rows(dim: usize, max_rows: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    prop::collection::vec(prop::collection::vec(-10.0f32..10.0, dim), 1..=max_rows)
}

/// (bank rows per class, probe rows), sharing one dimension.
fn instance() -> impl Strategy<Value = (Vec<Vec<Vec<f32>>>, Vec<Vec<f32>>)> {
    (1usize..8, 1usize..5).prop_flat_map(|(dim, classes)| {
        (prop::collection::vec(rows(dim, 15), classes), rows(dim, 20))
    })
}

fn records(assign: &[(u32, f64)]) -> Vec<MatchRecord> {
    assign
        .iter()
        .enumerate()
        .map(|(k, &(c, d))| MatchRecord {
            patch_index: k as u32,
            distance: d,
            assigned_class: ClassId(c),
            matched: Provenance { sample_id: 0, patch_index: 0 },
        })
        .collect()
}

fn assignments() -> impl Strategy<Value = (usize, Vec<(u32, f64)>)> {
    (1usize..6).prop_flat_map(|classes| {
        (Just(classes), prop::collection::vec((0..classes as u32, 0.0f64..50.0), 1..40))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matcher_agrees_with_double_loop((classes, probe_rows) in instance()) {
        let index = build_index(&make_bank(&classes)).unwrap();
        let flat = flat_rows(&classes);
        let matches = match_patches(&index, &probe(probe_rows.clone())).unwrap();
        for (m, q) in matches.iter().zip(&probe_rows) {
            let (row, d, c) = nearest(&flat, q);
            prop_assert_eq!(m.assigned_class, ClassId(c));
            prop_assert_eq!(m.matched, index.provenance()[row]);
            prop_assert!((m.distance - d).abs() <= 1e-5 * d.max(1.0), "{} vs {}", m.distance, d);
        }
    }

    #[test]
    fn patch_order_permutes_records((classes, probe_rows) in instance(), seed in any::<u64>()) {
        let index = build_index(&make_bank(&classes)).unwrap();
        let mut order: Vec<usize> = (0..probe_rows.len()).collect();
        // deterministic shuffle from the seed
        let n = order.len();
        for i in (1..n).rev() {
            order.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        let forward = match_patches(&index, &probe(probe_rows.clone())).unwrap();
        let shuffled: Vec<Vec<f32>> = order.iter().map(|&i| probe_rows[i].clone()).collect();
        let permuted = match_patches(&index, &probe(shuffled)).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(permuted[k].distance, forward[i].distance);
            prop_assert_eq!(permuted[k].assigned_class, forward[i].assigned_class);
        }
    }

    #[test]
    fn adding_rows_never_increases_distance((mut classes, probe_rows) in instance(), extra in rows(1, 5)) {
        let dim = probe_rows[0].len();
        let before = match_patches(&build_index(&make_bank(&classes)).unwrap(), &probe(probe_rows.clone())).unwrap();
        let extra: Vec<Vec<f32>> = extra.iter().map(|r| vec![r[0]; dim]).collect();
        classes.push(extra);
        let after = match_patches(&build_index(&make_bank(&classes)).unwrap(), &probe(probe_rows)).unwrap();
        for (a, b) in after.iter().zip(&before) {
            prop_assert!(a.distance <= b.distance);
        }
    }

    #[test]
    fn scores_match_definitions((classes, assign) in assignments()) {
        let m = records(&assign);
        let oracle = oracle_scores(&assign, classes);
        let probs = class_probabilities(&m, classes).unwrap();
        for (p, o) in probs.iter().zip(&oracle.probs) {
            prop_assert!((p - o).abs() <= 1e-12);
        }
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!((score_entropy(&m, &probs) - oracle.entropy).abs() <= 1e-9);
        prop_assert!((score_weighted_entropy(&m, &probs) - oracle.weighted).abs() <= 1e-9);
        prop_assert!((score_max(&m) - oracle.max).abs() <= 1e-9);
        prop_assert!((score_mean(&m) - oracle.mean).abs() <= 1e-9);
        let h = score_entropy(&m, &probs);
        prop_assert!(h <= 0.0 && h >= -(classes as f64).ln() - 1e-12);
    }

    #[test]
    fn scores_ignore_patch_order((classes, assign) in assignments()) {
        let mut reversed = assign.clone();
        reversed.reverse();
        let (a, b) = (records(&assign), records(&reversed));
        let (pa, pb) = (class_probabilities(&a, classes).unwrap(), class_probabilities(&b, classes).unwrap());
        prop_assert_eq!(&pa, &pb);
        prop_assert!((score_entropy(&a, &pa) - score_entropy(&b, &pb)).abs() <= 1e-12);
        prop_assert!((score_weighted_entropy(&a, &pa) - score_weighted_entropy(&b, &pb)).abs() <= 1e-12);
        prop_assert_eq!(score_max(&a), score_max(&b));
        prop_assert!((score_mean(&a) - score_mean(&b)).abs() <= 1e-12);
    }

    #[test]
    fn distance_scaling((classes, assign) in assignments(), c in 0.01f64..100.0) {
        let m = records(&assign);
        let scaled: Vec<(u32, f64)> = assign.iter().map(|&(k, d)| (k, c * d)).collect();
        let ms = records(&scaled);
        let p = class_probabilities(&m, classes).unwrap();
        prop_assert_eq!(score_entropy(&ms, &p), score_entropy(&m, &p));
        let hw = score_weighted_entropy(&m, &p);
        prop_assert!((score_weighted_entropy(&ms, &p) - c * hw).abs() <= 1e-12 * (c * hw).abs().max(1.0));
    }

    #[test]
    fn weighted_entropy_is_bracketed((classes, assign) in assignments()) {
        let m = records(&assign);
        let p = class_probabilities(&m, classes).unwrap();
        let h = score_entropy(&m, &p);
        let hw = score_weighted_entropy(&m, &p);
        let dmax = assign.iter().map(|a| a.1).fold(0.0, f64::max);
        let dmin = assign.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
        prop_assert!(hw >= dmax * h - 1e-9);
        prop_assert!(hw <= dmin * h + 1e-9);
    }

    #[test]
    fn entropy_zero_iff_unanimous((classes, assign) in assignments()) {
        let m = records(&assign);
        let p = class_probabilities(&m, classes).unwrap();
        let unanimous = assign.iter().all(|a| a.0 == assign[0].0);
        prop_assert_eq!(score_entropy(&m, &p) == 0.0, unanimous);
    }

    #[test]
    fn uniform_assignments_reach_lower_bound(classes in 1usize..7, per in 1usize..6) {
        let assign: Vec<(u32, f64)> = (0..classes * per).map(|i| ((i % classes) as u32, 1.0)).collect();
        let m = records(&assign);
        let p = class_probabilities(&m, classes).unwrap();
        prop_assert!((score_entropy(&m, &p) + (classes as f64).ln()).abs() <= 1e-12);
    }

    #[test]
    fn auroc_equals_pairwise(
        known in prop::collection::vec(-20i32..20, 1..200),
        unknown in prop::collection::vec(-20i32..20, 1..200),
    ) {
        let k: Vec<f64> = known.iter().map(|&x| f64::from(x) * 0.25).collect();
        let u: Vec<f64> = unknown.iter().map(|&x| f64::from(x) * 0.25).collect();
        prop_assert!((auroc(&k, &u).unwrap() - pairwise_auroc(&k, &u)).abs() <= 1e-12);
        prop_assert_eq!(fpr95(&k, &u).unwrap(), sweep_fpr95(&k, &u));
    }

    #[test]
    fn auroc_is_antisymmetric_without_ties(values in prop::collection::hash_set(-10_000i32..10_000, 2..300), split in any::<prop::sample::Index>()) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let at = 1 + split.index(values.len() - 1);
        let (a, b) = values.split_at(at);
        prop_assert!((auroc(a, b).unwrap() + auroc(b, a).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn metrics_invariant_under_increasing_maps(
        known in prop::collection::vec(-30i32..30, 1..100),
        unknown in prop::collection::vec(-30i32..30, 1..100),
    ) {
        let k: Vec<f64> = known.iter().map(|&x| f64::from(x)).collect();
        let u: Vec<f64> = unknown.iter().map(|&x| f64::from(x)).collect();
        for f in [|x: f64| x * x * x + 5.0 * x, |x: f64| (x / 7.0).exp(), |x: f64| x.atan()] {
            let fk: Vec<f64> = k.iter().map(|&x| f(x)).collect();
            let fu: Vec<f64> = u.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(auroc(&fk, &fu).unwrap(), auroc(&k, &u).unwrap());
            prop_assert_eq!(fpr95(&fk, &fu).unwrap(), fpr95(&k, &u).unwrap());
        }
    }

    #[test]
    fn fpr95_drops_as_unknowns_drop(
        known in prop::collection::vec(-50.0f64..50.0, 1..100),
        unknown in prop::collection::vec(-50.0f64..50.0, 1..100),
        shift in 0.0f64..20.0,
    ) {
        let lowered: Vec<f64> = unknown.iter().map(|u| u - shift).collect();
        prop_assert!(fpr95(&known, &lowered).unwrap() <= fpr95(&known, &unknown).unwrap());
    }

    #[test]
    fn greedy_is_two_approximate(points in rows(2, 12), m in 1usize..=4) {
        let m = m.min(points.len());
        let order = farthest_point_order(&points, m, 0);
        let chosen: Vec<&Vec<f32>> = order.iter().map(|&i| &points[i]).collect();
        let greedy = coverage_radius(&chosen, &points).unwrap();
        let best = optimal_k_center(&points, m);
        prop_assert!(greedy <= 2.0 * best + 1e-9, "greedy {} optimum {}", greedy, best);
    }

    #[test]
    fn radius_shrinks_along_greedy_order(points in rows(3, 40), start in any::<prop::sample::Index>()) {
        let order = farthest_point_order(&points, points.len(), start.index(points.len()));
        let mut last = f64::INFINITY;
        for m in 1..=order.len() {
            let chosen: Vec<&Vec<f32>> = order[..m].iter().map(|&i| &points[i]).collect();
            let r = coverage_radius(&chosen, &points).unwrap();
            prop_assert!(r <= last);
            last = r;
        }
        prop_assert_eq!(last, 0.0);
    }

    #[test]
    fn coreset_of_a_class_ignores_other_classes(a in rows(2, 30), b in rows(2, 30), c in rows(2, 30), seed in any::<u64>()) {
        let sample = |id: u64, class: u32, rows: Vec<Vec<f32>>| {
            SampleEmbeddingSet::from_rows(id, Label::Known(ClassId(class)), rows).unwrap()
        };
        let cfg = CoresetConfig::new(0.3, seed).unwrap();
        let one = build_bank(&[sample(0, 0, a.clone()), sample(1, 1, b)], &cfg).unwrap();
        let two = build_bank(&[sample(0, 0, a), sample(1, 1, c)], &cfg).unwrap();
        prop_assert_eq!(&one.banks()[0], &two.banks()[0]);
    }
}
