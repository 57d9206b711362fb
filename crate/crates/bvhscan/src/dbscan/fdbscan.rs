use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::time::Instant;

use super::{
    check_points, DbscanError, DbscanOptions, DbscanOutput, DbscanParams, MergeState, PhaseTimings,
};
use crate::bvh::Bvh;
use crate::geometry::Point;
use crate::traversal::{
    pair_traversal, range_query, CallbackControl, Execution, QueryOptions, RangePredicate,
};

/// Neighborhood size of every point, self included, counted up to `cap`.
///
/// Each count is also the number of callback invocations its query
/// received: a query stops as soon as it reaches `cap`. `bvh` must be built
/// over `points`.
pub fn count_neighbors_capped<const D: usize>(
    bvh: &Bvh<D>,
    eps: f32,
    cap: usize,
    execution: Execution,
) -> Vec<u32> {
    // Leaves are already in Z-order, so querying in leaf order is the
    // pre-sorted order.
    let predicates: Vec<RangePredicate<D>> = bvh
        .leaves()
        .iter()
        .map(|l| RangePredicate::sphere(l.volume.min, eps))
        .collect();
    let counts: Vec<AtomicU32> = (0..bvh.len()).map(|_| AtomicU32::new(0)).collect();
    let cap = cap.min(u32::MAX as usize) as u32;
    let options = QueryOptions {
        execution,
        sort_queries: false,
    };
    range_query(bvh, &predicates, &options, |q, _| {
        let object = bvh.leaves()[q].object as usize;
        // callbacks of one query run on one worker
        let c = counts[object].fetch_add(1, Ordering::Relaxed) + 1;
        if c >= cap {
            CallbackControl::TerminateQuery
        } else {
            CallbackControl::Continue
        }
    });
    counts.into_iter().map(AtomicU32::into_inner).collect()
}

/// Core flags from early-terminating neighborhood counts.
pub fn detect_core_points<const D: usize>(
    bvh: &Bvh<D>,
    params: &DbscanParams,
    execution: Execution,
) -> Vec<bool> {
    count_neighbors_capped(bvh, params.eps, params.min_pts, execution)
        .into_iter()
        .map(|c| c as usize >= params.min_pts)
        .collect()
}

/// FDBSCAN: BVH over the points, core detection (skipped when
/// `min_pts == 2`), then a pair traversal that applies the merge rule to
/// every close pair as it is found. No neighbor lists are stored.
pub fn fdbscan<const D: usize>(
    points: &[Point<D>],
    params: &DbscanParams,
    options: &DbscanOptions,
) -> Result<DbscanOutput, DbscanError> {
    check_points(points)?;
    if params.min_pts == 2 {
        return fof(points, params.eps, options);
    }
    let mut timings = PhaseTimings::default();

    let start = Instant::now();
    let bvh = Bvh::from_points(points, options.code_width)?;
    timings.build = start.elapsed();

    let start = Instant::now();
    let core = detect_core_points(&bvh, params, options.execution);
    timings.core_detection = start.elapsed();

    let start = Instant::now();
    let state = MergeState::new(points.len());
    pair_traversal(&bvh, params.eps, options.execution, |i, j| {
        state.merge(&core, i, j)
    });
    timings.merge = start.elapsed();

    let start = Instant::now();
    let labels = state.finish(&core);
    timings.finalize = start.elapsed();
    Ok(DbscanOutput {
        labels,
        core_flags: core,
        timings,
    })
}

/// Friends-of-friends: DBSCAN with `min_pts = 2`, i.e. connected components
/// of the `eps`-proximity graph. Points without a close pair are noise.
pub fn fof_connected_components<const D: usize>(
    points: &[Point<D>],
    eps: f32,
    options: &DbscanOptions,
) -> Result<DbscanOutput, DbscanError> {
    DbscanParams::new(eps, 2)?;
    check_points(points)?;
    fof(points, eps, options)
}

fn fof<const D: usize>(
    points: &[Point<D>],
    eps: f32,
    options: &DbscanOptions,
) -> Result<DbscanOutput, DbscanError> {
    let mut timings = PhaseTimings::default();

    let start = Instant::now();
    let bvh = Bvh::from_points(points, options.code_width)?;
    timings.build = start.elapsed();

    let start = Instant::now();
    let state = MergeState::new(points.len());
    let paired: Vec<AtomicBool> = (0..points.len()).map(|_| AtomicBool::new(false)).collect();
    pair_traversal(&bvh, eps, options.execution, |i, j| {
        paired[i].store(true, Ordering::Relaxed);
        paired[j].store(true, Ordering::Relaxed);
        state.sets.union(i, j);
    });
    timings.merge = start.elapsed();

    let start = Instant::now();
    let core: Vec<bool> = paired.into_iter().map(AtomicBool::into_inner).collect();
    let labels = state.finish(&core);
    timings.finalize = start.elapsed();
    Ok(DbscanOutput {
        labels,
        core_flags: core,
        timings,
    })
}
