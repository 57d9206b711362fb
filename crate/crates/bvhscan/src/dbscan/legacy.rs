use std::time::Instant;

use rayon::prelude::*;

use super::{
    check_points, finalize_labels, DbscanError, DbscanOptions, DbscanOutput, DbscanParams,
    PhaseTimings,
};
use crate::bvh::Bvh;
use crate::geometry::Point;
use crate::traversal::{query_crs, Execution, QueryOptions, RangePredicate};
use crate::unionfind::AtomicDisjointSets;

/// Friends-of-friends through an explicit neighbor graph: stores every
/// point's `eps`-neighborhood in CRS form, then runs connected components
/// over the stored edges.
///
/// Memory grows with the total neighbor count. When the graph would exceed
/// `max_edges` entries (or the allocator refuses it) this fails with
/// [`DbscanError::Storage`].
pub fn legacy_graph_dbscan<const D: usize>(
    points: &[Point<D>],
    eps: f32,
    options: &DbscanOptions,
    max_edges: usize,
) -> Result<DbscanOutput, DbscanError> {
    DbscanParams::new(eps, 2)?;
    check_points(points)?;
    let n = points.len();
    let mut timings = PhaseTimings::default();

    let start = Instant::now();
    let bvh = Bvh::from_points(points, options.code_width)?;
    timings.build = start.elapsed();

    let start = Instant::now();
    let predicates: Vec<RangePredicate<D>> = points
        .iter()
        .map(|p| RangePredicate::sphere(*p, eps))
        .collect();
    let query_options = QueryOptions {
        execution: options.execution,
        sort_queries: true,
    };
    let graph = query_crs(&bvh, &predicates, &query_options, max_edges)?;
    drop(predicates);
    // every row contains the point itself
    let core: Vec<bool> = (0..n).map(|i| graph.row(i).len() >= 2).collect();
    timings.core_detection = start.elapsed();

    let start = Instant::now();
    let sets = AtomicDisjointSets::new(n);
    let link = |i: usize| {
        for &j in graph.row(i) {
            sets.union(i, j as usize);
        }
    };
    match options.execution {
        Execution::Parallel => (0..n).into_par_iter().for_each(link),
        Execution::Sequential => (0..n).for_each(link),
    }
    timings.merge = start.elapsed();

    let start = Instant::now();
    let labels = finalize_labels(&sets, &core, &[]);
    timings.finalize = start.elapsed();
    Ok(DbscanOutput {
        labels,
        core_flags: core,
        timings,
    })
}
