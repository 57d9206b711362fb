use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    check_points, DbscanError, DbscanOptions, DbscanOutput, DbscanParams, MergeState, PhaseTimings,
};
use crate::bvh::Bvh;
use crate::geometry::{bounding_box, distance, Aabb, Point};
use crate::traversal::{for_each_index, CallbackControl, RangePredicate};

/// Regular grid of side `eps / sqrt(D)` anchored at the scene's lower
/// corner. Any two points in one cell are within `eps` of each other, so a
/// cell holding at least `min_pts` points contains only core points.
#[derive(Clone, Debug)]
pub struct DenseGrid<const D: usize> {
    cell_length: f64,
    origin: Point<D>,
    /// Occupied cells in order of first occurrence.
    keys: Vec<[i64; D]>,
    lookup: HashMap<[i64; D], u32>,
    /// `members[offsets[c]..offsets[c + 1]]` are the points of cell `c`,
    /// in increasing index order.
    offsets: Vec<usize>,
    members: Vec<u32>,
    dense: Vec<bool>,
    volumes: Vec<Aabb<D>>,
    cell_of: Vec<u32>,
}

impl<const D: usize> DenseGrid<D> {
    pub fn cell_length(&self) -> f64 {
        self.cell_length
    }

    pub fn origin(&self) -> &Point<D> {
        &self.origin
    }

    pub fn num_cells(&self) -> usize {
        self.keys.len()
    }

    pub fn key(&self, cell: usize) -> [i64; D] {
        self.keys[cell]
    }

    pub fn cell_at(&self, key: &[i64; D]) -> Option<usize> {
        self.lookup.get(key).map(|&c| c as usize)
    }

    pub fn members(&self, cell: usize) -> &[u32] {
        &self.members[self.offsets[cell]..self.offsets[cell + 1]]
    }

    pub fn is_dense(&self, cell: usize) -> bool {
        self.dense[cell]
    }

    /// Tight box over the cell's members.
    pub fn volume(&self, cell: usize) -> &Aabb<D> {
        &self.volumes[cell]
    }

    pub fn cell_of(&self, point: usize) -> usize {
        self.cell_of[point] as usize
    }

    pub fn dense_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_cells()).filter(|&c| self.dense[c])
    }

    fn key_of(&self, p: &Point<D>) -> [i64; D] {
        let mut key = [0i64; D];
        for (k, key) in key.iter_mut().enumerate() {
            *key = ((p[k] as f64 - self.origin[k] as f64) / self.cell_length).floor() as i64;
        }
        key
    }
}

/// Bins every point into the grid and flags dense cells.
///
/// A cell is dense when it holds at least `min_pts` points. As a guard
/// against rounding in the binning, a cell whose member box has a diagonal
/// longer than `eps` is never marked dense.
pub fn build_dense_grid<const D: usize>(
    points: &[Point<D>],
    params: &DbscanParams,
) -> DenseGrid<D> {
    let scene = bounding_box(points);
    let mut grid = DenseGrid {
        cell_length: params.eps as f64 / (D as f64).sqrt(),
        origin: if points.is_empty() {
            Point([0.0; D])
        } else {
            scene.min
        },
        keys: Vec::new(),
        lookup: HashMap::new(),
        offsets: Vec::new(),
        members: Vec::new(),
        dense: Vec::new(),
        volumes: Vec::new(),
        cell_of: Vec::with_capacity(points.len()),
    };

    let mut counts: Vec<usize> = Vec::new();
    for p in points {
        let key = grid.key_of(p);
        let next = grid.keys.len() as u32;
        let cell = *grid.lookup.entry(key).or_insert(next);
        if cell == next {
            grid.keys.push(key);
            counts.push(0);
            grid.volumes.push(Aabb::empty());
        }
        counts[cell as usize] += 1;
        grid.volumes[cell as usize] = grid.volumes[cell as usize].expand_point(p);
        grid.cell_of.push(cell);
    }

    let num_cells = grid.keys.len();
    grid.offsets = Vec::with_capacity(num_cells + 1);
    grid.offsets.push(0);
    for c in &counts {
        grid.offsets.push(grid.offsets.last().unwrap() + c);
    }
    let mut cursor = grid.offsets[..num_cells].to_vec();
    grid.members = vec![0; points.len()];
    for (i, &cell) in grid.cell_of.iter().enumerate() {
        grid.members[cursor[cell as usize]] = i as u32;
        cursor[cell as usize] += 1;
    }
    grid.dense = (0..num_cells)
        .map(|c| {
            counts[c] >= params.min_pts
                && distance(&grid.volumes[c].min, &grid.volumes[c].max) <= params.eps
        })
        .collect();
    grid
}

/// Object of the mixed hierarchy.
#[derive(Clone, Copy)]
enum Object {
    Cell(u32),
    Point(u32),
}

/// FDBSCAN-DenseBox: the hierarchy holds one box per dense cell plus every
/// point outside dense cells. Members of a dense cell are core and are
/// unioned without distance checks; hits on a dense cell expand to
/// per-member distance checks.
///
/// Each relation is handled once: loose pairs by the smaller index, loose
/// point vs. dense cell by the loose point, and dense cell vs. dense cell by
/// members of the cell with the smaller id.
pub fn fdbscan_densebox<const D: usize>(
    points: &[Point<D>],
    params: &DbscanParams,
    options: &DbscanOptions,
) -> Result<DbscanOutput, DbscanError> {
    check_points(points)?;
    let n = points.len();
    let eps = params.eps;
    let mut timings = PhaseTimings::default();

    let start = Instant::now();
    let grid = build_dense_grid(points, params);
    let mut objects: Vec<Object> = grid.dense_cells().map(|c| Object::Cell(c as u32)).collect();
    objects.extend(
        (0..n)
            .filter(|&i| !grid.is_dense(grid.cell_of(i)))
            .map(|i| Object::Point(i as u32)),
    );
    let volumes: Vec<Aabb<D>> = objects
        .iter()
        .map(|o| match *o {
            Object::Cell(c) => *grid.volume(c as usize),
            Object::Point(i) => Aabb::from_point(points[i as usize]),
        })
        .collect();
    let bvh = Bvh::build(&volumes, options.code_width)?;
    drop(volumes);
    timings.build = start.elapsed();

    let start = Instant::now();
    let count_capped = |x: usize| -> usize {
        let predicate = RangePredicate::sphere(points[x], eps);
        let mut count = 1;
        if count >= params.min_pts {
            return count;
        }
        bvh.range_search(&predicate, |obj| {
            match objects[obj] {
                Object::Point(y) => {
                    if y as usize != x {
                        count += 1;
                    }
                }
                Object::Cell(c) => {
                    for &y in grid.members(c as usize) {
                        if distance(&points[x], &points[y as usize]) <= eps {
                            count += 1;
                            if count >= params.min_pts {
                                break;
                            }
                        }
                    }
                }
            }
            if count >= params.min_pts {
                CallbackControl::TerminateQuery
            } else {
                CallbackControl::Continue
            }
        });
        count
    };
    let is_core = |x: usize| grid.is_dense(grid.cell_of(x)) || count_capped(x) >= params.min_pts;
    let core: Vec<bool> = match options.execution {
        crate::traversal::Execution::Parallel => (0..n).into_par_iter().map(is_core).collect(),
        crate::traversal::Execution::Sequential => (0..n).map(is_core).collect(),
    };
    timings.core_detection = start.elapsed();

    let start = Instant::now();
    let state = MergeState::new(n);
    for c in grid.dense_cells() {
        let m = grid.members(c);
        for &y in &m[1..] {
            state.sets.union(m[0] as usize, y as usize);
        }
    }
    for_each_index(n, None, options.execution, |x| {
        let own_cell = grid.cell_of(x);
        let x_dense = grid.is_dense(own_cell);
        let predicate = RangePredicate::sphere(points[x], eps);
        bvh.range_search(&predicate, |obj| {
            match objects[obj] {
                Object::Point(y) => {
                    let y = y as usize;
                    if !x_dense && x < y {
                        state.merge(&core, x, y);
                    }
                }
                Object::Cell(c) => {
                    let c = c as usize;
                    if !x_dense || own_cell < c {
                        let close = grid
                            .members(c)
                            .iter()
                            .find(|&&y| distance(&points[x], &points[y as usize]) <= eps);
                        // every member of `c` is core and already unioned with
                        // the rest of its cell, so one close member settles it
                        if let Some(&y) = close {
                            state.merge(&core, x, y as usize);
                        }
                    }
                }
            }
            CallbackControl::Continue
        });
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
