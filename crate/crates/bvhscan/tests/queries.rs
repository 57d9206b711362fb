mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use bvhscan::bvh::Bvh;
use bvhscan::geometry::{Aabb, Point};
use bvhscan::morton::CodeWidth;
use bvhscan::traversal::{
    nearest_query, pair_traversal, query_crs, range_query, sort_queries, CallbackControl,
    Execution, NearestPredicate, QueryOptions, RangePredicate,
};
use common::RefTree;
use rand::Rng;

fn collect_range<const D: usize>(
    bvh: &Bvh<D>,
    preds: &[RangePredicate<D>],
    options: &QueryOptions,
) -> Vec<Vec<usize>> {
    let out: Vec<Mutex<Vec<usize>>> = preds.iter().map(|_| Mutex::new(Vec::new())).collect();
    range_query(bvh, preds, options, |q, obj| {
        out[q].lock().unwrap().push(obj);
        CallbackControl::Continue
    });
    out.into_iter()
        .map(|m| common::sorted(m.into_inner().unwrap()))
        .collect()
}

fn random_predicates<const D: usize>(
    rng: &mut impl Rng,
    count: usize,
    extent: f32,
) -> Vec<RangePredicate<D>> {
    (0..count)
        .map(|i| {
            let c: Point<D> = common::uniform(rng, 1, extent)[0];
            let r = rng.random_range(0.0..extent * 0.3);
            if i % 4 == 3 {
                RangePredicate::Aabb(Aabb::new(c, Point(std::array::from_fn(|k| c[k] + r))))
            } else {
                RangePredicate::sphere(c, r)
            }
        })
        .collect()
}

#[test]
fn range_matches_brute_force() {
    let mut rng = common::rng(10);
    let pts: Vec<Point<3>> = common::uniform(&mut rng, 1000, 1.0);
    let boxes = common::point_boxes(&pts);
    let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
    let preds = random_predicates(&mut rng, 100, 1.0);
    let got = collect_range(&bvh, &preds, &QueryOptions::default());
    for (q, pred) in preds.iter().enumerate() {
        assert_eq!(got[q], common::brute_range(&boxes, pred), "query {q}");
    }
}

#[test]
fn stackless_equals_stack_traversal() {
    let mut rng = common::rng(11);
    for case in 0..100 {
        let n = rng.random_range(1..1500);
        let pts: Vec<Point<2>> = if case % 2 == 0 {
            common::clustered(&mut rng, n, 10.0)
        } else {
            common::snapped(&mut rng, n, 10.0)
        };
        let boxes = common::point_boxes(&pts);
        let width = if case % 3 == 0 {
            CodeWidth::W32
        } else {
            CodeWidth::W64
        };
        let bvh = Bvh::build(&boxes, width).unwrap();
        let tree = RefTree::build(&boxes, width);
        let preds = random_predicates(&mut rng, 30, 10.0);
        let got = collect_range(&bvh, &preds, &QueryOptions::sequential());
        for (q, pred) in preds.iter().enumerate() {
            assert_eq!(
                got[q],
                common::sorted(tree.stack_range(pred)),
                "case {case} query {q}"
            );
        }
    }
}

#[test]
fn early_termination_is_exact() {
    let mut rng = common::rng(12);
    let pts: Vec<Point<3>> = common::clustered(&mut rng, 2000, 1.0);
    let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
    let preds = random_predicates(&mut rng, 200, 1.0);
    let full = collect_range(&bvh, &preds, &QueryOptions::default());
    let limits: Vec<usize> = (0..preds.len()).map(|_| rng.random_range(1..50)).collect();
    let seen: Vec<Mutex<Vec<usize>>> = preds.iter().map(|_| Mutex::new(Vec::new())).collect();
    range_query(&bvh, &preds, &QueryOptions::default(), |q, obj| {
        let mut s = seen[q].lock().unwrap();
        s.push(obj);
        if s.len() == limits[q] {
            CallbackControl::TerminateQuery
        } else {
            CallbackControl::Continue
        }
    });
    for q in 0..preds.len() {
        let s = seen[q].lock().unwrap();
        assert_eq!(s.len(), limits[q].min(full[q].len()));
        let unique = common::sorted(s.clone());
        assert!(unique.windows(2).all(|w| w[0] != w[1]), "duplicate report");
        assert!(unique.iter().all(|o| full[q].binary_search(o).is_ok()));
    }
}

#[test]
fn presorting_does_not_change_results() {
    let mut rng = common::rng(13);
    let pts: Vec<Point<3>> = common::clustered(&mut rng, 3000, 1.0);
    let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
    let preds = random_predicates(&mut rng, 300, 1.0);
    let sorted = collect_range(
        &bvh,
        &preds,
        &QueryOptions {
            execution: Execution::Parallel,
            sort_queries: true,
        },
    );
    let unsorted = collect_range(&bvh, &preds, &QueryOptions::sequential());
    assert_eq!(sorted, unsorted);

    // queries already in Z-order come back as the identity
    let reps: Vec<Point<3>> = preds.iter().map(|p| p.representative()).collect();
    let perm = sort_queries(&reps);
    let zordered: Vec<Point<3>> = perm.iter().map(|&i| reps[i as usize]).collect();
    assert_eq!(
        sort_queries(&zordered),
        (0..reps.len() as u32).collect::<Vec<_>>()
    );
}

#[test]
fn nearest_matches_brute_force() {
    let mut rng = common::rng(14);
    for case in 0..30 {
        let n = rng.random_range(1..2000);
        let pts: Vec<Point<3>> = if case % 2 == 0 {
            common::uniform(&mut rng, n, 1.0)
        } else {
            common::snapped(&mut rng, n, 1.0)
        };
        let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
        for k in [1, 5, 32] {
            let preds: Vec<NearestPredicate<3>> = common::uniform(&mut rng, 20, 1.2)
                .into_iter()
                .map(|o| NearestPredicate::new(o, k))
                .collect();
            let got: Vec<Mutex<Vec<usize>>> =
                preds.iter().map(|_| Mutex::new(Vec::new())).collect();
            nearest_query(&bvh, &preds, &QueryOptions::default(), |q, obj| {
                got[q].lock().unwrap().push(obj)
            });
            for (q, p) in preds.iter().enumerate() {
                let expected = common::brute_knn(&pts, &p.origin, k);
                assert_eq!(
                    *got[q].lock().unwrap(),
                    expected,
                    "case {case} k {k} query {q}"
                );
            }
        }
    }
}

#[test]
fn nearest_is_independent_of_width() {
    let mut rng = common::rng(15);
    let pts: Vec<Point<2>> = common::snapped(&mut rng, 1500, 1.0);
    let a = Bvh::from_points(&pts, CodeWidth::W32).unwrap();
    let b = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
    for o in common::uniform::<2>(&mut rng, 100, 1.0) {
        assert_eq!(a.nearest_search(&o, 7), b.nearest_search(&o, 7));
    }
}

#[test]
fn pair_traversal_matches_brute_force() {
    let mut rng = common::rng(16);
    for case in 0..40 {
        let n = rng.random_range(2..2000);
        let pts: Vec<Point<3>> = if case % 2 == 0 {
            common::clustered(&mut rng, n, 1.0)
        } else {
            common::snapped(&mut rng, n, 1.0)
        };
        let eps = rng.random_range(0.005..0.08);
        let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
        let leaf_of: Vec<usize> = {
            let mut v = vec![0; n];
            for (pos, l) in bvh.leaves().iter().enumerate() {
                v[l.object as usize] = pos;
            }
            v
        };
        let emitted = Mutex::new(Vec::new());
        pair_traversal(&bvh, eps, Execution::Parallel, |i, j| {
            // i's leaf precedes j's leaf
            assert!(leaf_of[i] < leaf_of[j]);
            emitted.lock().unwrap().push((i.min(j), i.max(j)));
        });
        let emitted = common::sorted(emitted.into_inner().unwrap());
        assert_eq!(emitted, common::brute_pairs(&pts, eps), "case {case}");
    }
}

#[test]
fn crs_matches_brute_force() {
    let mut rng = common::rng(17);
    let pts: Vec<Point<2>> = common::clustered(&mut rng, 1500, 1.0);
    let boxes = common::point_boxes(&pts);
    let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
    let preds = random_predicates(&mut rng, 150, 1.0);
    let crs = query_crs(&bvh, &preds, &QueryOptions::default(), usize::MAX).unwrap();
    let mut offsets = vec![0];
    let mut values = Vec::new();
    for p in &preds {
        values.extend(common::brute_range(&boxes, p).into_iter().map(|i| i as u32));
        offsets.push(values.len());
    }
    assert_eq!(crs.offsets, offsets);
    assert_eq!(crs.values, values);
    let seq = query_crs(&bvh, &preds, &QueryOptions::sequential(), usize::MAX).unwrap();
    assert_eq!(seq, crs);
}

#[test]
fn covering_sphere_reports_every_object_once() {
    let mut rng = common::rng(18);
    let pts: Vec<Point<3>> = common::uniform(&mut rng, 777, 2.0);
    let bvh = Bvh::from_points(&pts, CodeWidth::W64).unwrap();
    let preds = vec![RangePredicate::sphere(Point([1.0, 1.0, 1.0]), 5.0); 8];
    let counts: Vec<AtomicUsize> = (0..8).map(|_| AtomicUsize::new(0)).collect();
    range_query(&bvh, &preds, &QueryOptions::default(), |q, _| {
        counts[q].fetch_add(1, Ordering::Relaxed);
        CallbackControl::Continue
    });
    assert!(counts.iter().all(|c| c.load(Ordering::Relaxed) == 777));
}
