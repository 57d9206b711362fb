use std::time::Instant;

use super::{check_points, finalize_labels, DbscanError, DbscanOutput, DbscanParams, PhaseTimings};
use crate::geometry::{distance, Point};
use crate::unionfind::DisjointSets;

/// Sequential disjoint-set DBSCAN with brute-force neighborhoods.
///
/// Each point computes its own neighborhood. A core point unions with every
/// neighbor already known to be core and claims every neighbor not yet in
/// any cluster. O(n^2) distance evaluations; independent of the BVH.
pub fn dsdbscan_oracle<const D: usize>(
    points: &[Point<D>],
    params: &DbscanParams,
) -> Result<DbscanOutput, DbscanError> {
    check_points(points)?;
    let n = points.len();
    let start = Instant::now();

    let mut core = vec![false; n];
    let mut member = vec![false; n];
    let mut sets = DisjointSets::new(n);
    let mut neighbors = Vec::new();

    for x in 0..n {
        neighbors.clear();
        neighbors.extend((0..n).filter(|&y| distance(&points[x], &points[y]) <= params.eps));
        if neighbors.len() < params.min_pts {
            continue;
        }
        core[x] = true;
        for &y in &neighbors {
            if core[y] {
                sets.union(x, y);
            } else if !member[y] {
                member[y] = true;
                sets.union(x, y);
            }
        }
    }
    let merge = start.elapsed();

    let start = Instant::now();
    // a point claimed before it turned out to be core is not a border claim
    let claimed: Vec<bool> = member.iter().zip(&core).map(|(&m, &c)| m && !c).collect();
    let labels = finalize_labels(&sets, &core, &claimed);
    Ok(DbscanOutput {
        labels,
        core_flags: core,
        timings: PhaseTimings {
            merge,
            finalize: start.elapsed(),
            ..PhaseTimings::default()
        },
    })
}
