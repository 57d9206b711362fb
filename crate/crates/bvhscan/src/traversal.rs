//! Query execution against a [`Bvh`].
//!
//! Range queries walk the hierarchy without a stack by following ropes.
//! Nearest queries keep an explicit stack and a bounded max-heap of the best
//! candidates. Pair traversal starts each point's walk at its own leaf, so
//! every close pair is reported once.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use thiserror::Error;

use crate::bvh::{Bvh, Node, NodeRef};
use crate::geometry::{bounding_box, min_distance, Aabb, Point, Sphere};
use crate::morton::{self, CodeWidth};

/// Returned by range-query callbacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CallbackControl {
    Continue,
    /// Stops the traversal of the query that emitted it. Other queries in the
    /// same batch are unaffected.
    TerminateQuery,
}

/// Spatial predicate of a range query: all objects whose volume intersects
/// the query geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RangePredicate<const D: usize> {
    Sphere(Sphere<D>),
    Aabb(Aabb<D>),
}

impl<const D: usize> RangePredicate<D> {
    pub fn sphere(center: Point<D>, radius: f32) -> Self {
        RangePredicate::Sphere(Sphere::new(center, radius))
    }

    #[inline]
    pub fn test(&self, volume: &Aabb<D>) -> bool {
        match self {
            RangePredicate::Sphere(s) => volume.intersects_sphere(s),
            RangePredicate::Aabb(b) => volume.intersects(b),
        }
    }

    pub fn representative(&self) -> Point<D> {
        match self {
            RangePredicate::Sphere(s) => s.center,
            RangePredicate::Aabb(b) => b.centroid(),
        }
    }
}

/// The `k` objects closest to `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearestPredicate<const D: usize> {
    pub origin: Point<D>,
    pub k: usize,
}

impl<const D: usize> NearestPredicate<D> {
    pub fn new(origin: Point<D>, k: usize) -> Self {
        assert!(k >= 1, "nearest predicate needs k >= 1");
        Self { origin, k }
    }
}

/// Whether batch operations fan out over the rayon pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryOptions {
    pub execution: Execution,
    /// Process queries in Z-order of their representative points.
    pub sort_queries: bool,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            execution: Execution::Parallel,
            sort_queries: true,
        }
    }
}

impl QueryOptions {
    pub fn sequential() -> Self {
        Self {
            execution: Execution::Sequential,
            sort_queries: false,
        }
    }
}

/// Runs `f(i)` for every index in `order`, or `0..len` when no order is
/// given.
pub(crate) fn for_each_index<F>(len: usize, order: Option<&[u32]>, execution: Execution, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    match (order, execution) {
        (Some(order), Execution::Parallel) => order.par_iter().for_each(|&i| f(i as usize)),
        (Some(order), Execution::Sequential) => order.iter().for_each(|&i| f(i as usize)),
        (None, Execution::Parallel) => (0..len).into_par_iter().for_each(f),
        (None, Execution::Sequential) => (0..len).for_each(f),
    }
}

impl<const D: usize> Bvh<D> {
    /// Stackless range search for one predicate. `callback` receives object
    /// indices and may stop the search early.
    pub fn range_search<F>(&self, predicate: &RangePredicate<D>, callback: F)
    where
        F: FnMut(usize) -> CallbackControl,
    {
        self.walk_from(self.root(), predicate, callback);
    }

    /// Rope walk starting at `start`; visits `start` and everything after it
    /// in traversal order.
    #[inline]
    fn walk_from<F>(&self, start: NodeRef, predicate: &RangePredicate<D>, mut on_leaf: F)
    where
        F: FnMut(usize) -> CallbackControl,
    {
        let leaves = self.leaves();
        let internals = self.internal_nodes();
        let mut node = start;
        loop {
            node = match node.get() {
                Node::Sentinel => return,
                Node::Internal(i) => {
                    let n = &internals[i];
                    if predicate.test(&n.volume) {
                        n.left
                    } else {
                        n.rope
                    }
                }
                Node::Leaf(i) => {
                    let leaf = &leaves[i];
                    if predicate.test(&leaf.volume)
                        && on_leaf(leaf.object as usize) == CallbackControl::TerminateQuery
                    {
                        return;
                    }
                    leaf.rope
                }
            };
        }
    }

    /// The `min(k, n)` objects nearest to `origin`, sorted by distance with
    /// ties going to the smaller object index.
    pub fn nearest_search(&self, origin: &Point<D>, k: usize) -> Vec<(usize, f32)> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack: Vec<(NodeRef, f32)> = Vec::with_capacity(64);
        let root = self.root();
        stack.push((root, min_distance(origin, &self.volume(root))));

        let worst = |best: &BinaryHeap<Candidate>| -> f32 {
            if best.len() < k {
                f32::INFINITY
            } else {
                best.peek().map_or(f32::INFINITY, |c| c.distance)
            }
        };

        while let Some((node, dist)) = stack.pop() {
            if dist > worst(&best) {
                continue;
            }
            match node.get() {
                Node::Leaf(i) => {
                    let candidate = Candidate {
                        distance: dist,
                        index: self.leaves()[i].object,
                    };
                    if best.len() < k {
                        best.push(candidate);
                    } else if candidate < *best.peek().expect("heap is full") {
                        best.pop();
                        best.push(candidate);
                    }
                }
                Node::Internal(_) => {
                    let (left, right) = self.children(node).expect("internal node");
                    let dl = min_distance(origin, &self.volume(left));
                    let dr = min_distance(origin, &self.volume(right));
                    let bound = worst(&best);
                    // nearer child goes on top of the stack
                    let (near, far) = if dl <= dr {
                        ((left, dl), (right, dr))
                    } else {
                        ((right, dr), (left, dl))
                    };
                    if far.1 <= bound {
                        stack.push(far);
                    }
                    if near.1 <= bound {
                        stack.push(near);
                    }
                }
                Node::Sentinel => {}
            }
        }
        best.into_sorted_vec()
            .into_iter()
            .map(|c| (c.index as usize, c.distance))
            .collect()
    }

    /// Objects stored after leaf `leaf` (in Z-order) whose volume is within
    /// `eps` of that leaf's point.
    #[inline]
    fn pair_walk<F>(&self, leaf: usize, eps: f32, mut on_pair: F)
    where
        F: FnMut(usize),
    {
        let l = &self.leaves()[leaf];
        debug_assert_eq!(
            l.volume.min, l.volume.max,
            "pair traversal needs point leaves"
        );
        let predicate = RangePredicate::sphere(l.volume.min, eps);
        self.walk_from(l.rope, &predicate, |obj| {
            on_pair(obj);
            CallbackControl::Continue
        });
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    distance: f32,
    index: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

/// Permutation of `predicates` in Z-order of their representative points,
/// binned against the box of all representatives.
pub fn sort_queries<const D: usize>(representatives: &[Point<D>]) -> Vec<u32> {
    let scene = bounding_box(representatives);
    let codes: Vec<_> = representatives
        .par_iter()
        .map(|p| morton::point_code(p, &scene, CodeWidth::W64))
        .collect();
    morton::sort_by_code(&codes)
}

fn query_order<const D: usize>(
    options: &QueryOptions,
    len: usize,
    representative: impl Fn(usize) -> Point<D> + Sync + Send,
) -> Option<Vec<u32>> {
    if !options.sort_queries || len < 2 {
        return None;
    }
    let reps: Vec<Point<D>> = (0..len).into_par_iter().map(representative).collect();
    Some(sort_queries(&reps))
}

/// Runs every range predicate against `bvh`, calling
/// `callback(query_index, object_index)` on each match.
///
/// Callbacks of one query run sequentially on one worker. Callbacks of
/// different queries may run concurrently.
pub fn range_query<const D: usize, F>(
    bvh: &Bvh<D>,
    predicates: &[RangePredicate<D>],
    options: &QueryOptions,
    callback: F,
) where
    F: Fn(usize, usize) -> CallbackControl + Sync + Send,
{
    if bvh.is_empty() {
        return;
    }
    let order = query_order(options, predicates.len(), |q| {
        predicates[q].representative()
    });
    for_each_index(predicates.len(), order.as_deref(), options.execution, |q| {
        bvh.range_search(&predicates[q], |obj| callback(q, obj));
    });
}

/// Runs every nearest predicate. For each query the callback receives its
/// `min(k, n)` results in order of increasing distance.
pub fn nearest_query<const D: usize, F>(
    bvh: &Bvh<D>,
    predicates: &[NearestPredicate<D>],
    options: &QueryOptions,
    callback: F,
) where
    F: Fn(usize, usize) + Sync + Send,
{
    if bvh.is_empty() {
        return;
    }
    let order = query_order(options, predicates.len(), |q| predicates[q].origin);
    for_each_index(predicates.len(), order.as_deref(), options.execution, |q| {
        let p = &predicates[q];
        for (obj, _) in bvh.nearest_search(&p.origin, p.k) {
            callback(q, obj);
        }
    });
}

/// Calls `callback(i, j)` once for every unordered pair of stored points
/// within `eps`, with `i` and `j` as object indices. `i` is the object whose
/// leaf comes first in Z-order.
///
/// The hierarchy must be built over points (degenerate boxes).
pub fn pair_traversal<const D: usize, F>(bvh: &Bvh<D>, eps: f32, execution: Execution, callback: F)
where
    F: Fn(usize, usize) + Sync + Send,
{
    for_each_index(bvh.len(), None, execution, |leaf| {
        let i = bvh.leaves()[leaf].object as usize;
        bvh.pair_walk(leaf, eps, |j| callback(i, j));
    });
}

/// Per-query match lists in compressed row storage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CrsResult {
    /// `offsets[q]..offsets[q + 1]` indexes query `q`'s matches in `values`.
    pub offsets: Vec<usize>,
    pub values: Vec<u32>,
}

impl CrsResult {
    pub fn num_queries(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn row(&self, q: usize) -> &[u32] {
        &self.values[self.offsets[q]..self.offsets[q + 1]]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CrsError {
    /// The flat result list does not fit; callbacks avoid storing matches.
    #[error(
        "storing {requested} matches exceeds the result capacity ({limit}); use callbacks instead"
    )]
    CapacityExceeded { requested: usize, limit: usize },
}

/// Stores all range-query matches.
///
/// A counting pass sizes each row, an exclusive scan gives the offsets, and a
/// fill pass writes the matches. Rows are sorted by object index. Fails
/// without allocating the value array if the total exceeds `max_values` or
/// the allocator refuses it.
pub fn query_crs<const D: usize>(
    bvh: &Bvh<D>,
    predicates: &[RangePredicate<D>],
    options: &QueryOptions,
    max_values: usize,
) -> Result<CrsResult, CrsError> {
    let nq = predicates.len();
    let count_one = |q: usize| {
        let mut c = 0usize;
        bvh.range_search(&predicates[q], |_| {
            c += 1;
            CallbackControl::Continue
        });
        c
    };
    let counts: Vec<usize> = match options.execution {
        Execution::Parallel => (0..nq).into_par_iter().map(count_one).collect(),
        Execution::Sequential => (0..nq).map(count_one).collect(),
    };

    let mut offsets = Vec::with_capacity(nq + 1);
    let mut total = 0usize;
    offsets.push(0);
    for c in &counts {
        total = total.checked_add(*c).ok_or(CrsError::CapacityExceeded {
            requested: usize::MAX,
            limit: max_values,
        })?;
        offsets.push(total);
    }
    drop(counts);
    if total > max_values {
        return Err(CrsError::CapacityExceeded {
            requested: total,
            limit: max_values,
        });
    }
    let mut values: Vec<u32> = Vec::new();
    values
        .try_reserve_exact(total)
        .map_err(|_| CrsError::CapacityExceeded {
            requested: total,
            limit: max_values,
        })?;
    values.resize(total, 0);

    let mut rows: Vec<&mut [u32]> = Vec::with_capacity(nq);
    let mut rest = values.as_mut_slice();
    for q in 0..nq {
        let (row, tail) = rest.split_at_mut(offsets[q + 1] - offsets[q]);
        rows.push(row);
        rest = tail;
    }
    let fill = |(q, row): (usize, &mut &mut [u32])| {
        let mut pos = 0;
        bvh.range_search(&predicates[q], |obj| {
            row[pos] = obj as u32;
            pos += 1;
            CallbackControl::Continue
        });
        row.sort_unstable();
    };
    match options.execution {
        Execution::Parallel => rows.par_iter_mut().enumerate().for_each(fill),
        Execution::Sequential => rows.iter_mut().enumerate().for_each(fill),
    }
    drop(rows);
    Ok(CrsResult { offsets, values })
}
