//! Density-based clustering.
//!
//! A point is *core* when at least `min_pts` points (itself included) lie
//! within `eps` of it. Core points within `eps` of each other share a
//! cluster; a non-core point within `eps` of a core point joins one such
//! cluster as a *border* point; everything else is noise.
//!
//! Implementations:
//!
//! * [`dsdbscan_oracle`]: sequential disjoint-set reference with brute-force
//!   neighborhoods.
//! * [`fdbscan`]: two-phase parallel algorithm on a BVH, core detection with
//!   early-terminating counts, then a pair-traversal merge.
//! * [`fdbscan_densebox`]: the same merge rule on a hierarchy that mixes
//!   dense grid cells and loose points.
//! * [`fof_connected_components`]: the `min_pts = 2` (friends-of-friends)
//!   special case.
//! * [`legacy_graph_dbscan`]: stores the whole neighbor graph first, then
//!   finds connected components. Only for small inputs.

mod densebox;
mod fdbscan;
mod legacy;
mod oracle;
mod verify;

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use thiserror::Error;

pub use densebox::{build_dense_grid, fdbscan_densebox, DenseGrid};
pub use fdbscan::{count_neighbors_capped, detect_core_points, fdbscan, fof_connected_components};
pub use legacy::legacy_graph_dbscan;
pub use oracle::dsdbscan_oracle;
pub use verify::{check_equivalence, check_output_invariants, Mismatch};

use crate::bvh::BuildError;
use crate::geometry::Point;
use crate::morton::CodeWidth;
use crate::traversal::{CrsError, Execution};
use crate::unionfind::{canonical_labels, AtomicDisjointSets, Partition};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbscanParams {
    pub eps: f32,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn new(eps: f32, min_pts: usize) -> Result<Self, DbscanError> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(DbscanError::InvalidParams(format!(
                "eps must be finite and positive, got {eps}"
            )));
        }
        if min_pts < 2 {
            return Err(DbscanError::InvalidParams(format!(
                "min_pts must be at least 2, got {min_pts}"
            )));
        }
        Ok(Self { eps, min_pts })
    }
}

/// Runtime knobs shared by the tree-based implementations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DbscanOptions {
    pub execution: Execution,
    pub code_width: CodeWidth,
}

impl DbscanOptions {
    pub fn sequential() -> Self {
        Self {
            execution: Execution::Sequential,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Noise,
    /// Cluster id: the smallest point index in the cluster.
    Cluster(usize),
}

impl Label {
    /// `-1` for noise, the cluster id otherwise.
    pub fn as_i64(self) -> i64 {
        match self {
            Label::Noise => -1,
            Label::Cluster(c) => c as i64,
        }
    }

    pub fn is_noise(self) -> bool {
        self == Label::Noise
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub build: Duration,
    pub core_detection: Duration,
    pub merge: Duration,
    pub finalize: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.build + self.core_detection + self.merge + self.finalize
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DbscanOutput {
    pub labels: Vec<Label>,
    pub core_flags: Vec<bool>,
    pub timings: PhaseTimings,
}

impl DbscanOutput {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        // cluster ids are member indices, so a cluster's id labels its smallest member
        self.labels
            .iter()
            .enumerate()
            .filter(|&(i, l)| *l == Label::Cluster(i))
            .count()
    }

    pub fn num_noise(&self) -> usize {
        self.labels.iter().filter(|l| l.is_noise()).count()
    }

    pub fn num_core(&self) -> usize {
        self.core_flags.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DbscanError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Storage(#[from] CrsError),
}

pub(crate) fn check_points<const D: usize>(points: &[Point<D>]) -> Result<(), DbscanError> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(index) => Err(DbscanError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Turns a merged partition into labels.
///
/// Each point gets the smallest index of its set as cluster id. A non-core
/// point alone in its set is noise. `claimed` is the border latch state of
/// the merge phase; a non-core point is in a larger set exactly when it was
/// claimed.
pub fn finalize_labels<P: Partition + ?Sized>(
    sets: &P,
    core_flags: &[bool],
    claimed: &[bool],
) -> Vec<Label> {
    let canonical = canonical_labels(sets);
    let mut set_size = vec![0u32; canonical.len()];
    for &c in &canonical {
        set_size[c] += 1;
    }
    canonical
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let alone = set_size[c] == 1;
            debug_assert!(core_flags[i] || claimed.is_empty() || claimed[i] != alone);
            if !core_flags[i] && alone {
                Label::Noise
            } else {
                Label::Cluster(c)
            }
        })
        .collect()
}

/// Shared state of the merge phase.
pub(crate) struct MergeState {
    pub sets: AtomicDisjointSets,
    pub claimed: Vec<AtomicBool>,
}

impl MergeState {
    pub fn new(n: usize) -> Self {
        Self {
            sets: AtomicDisjointSets::new(n),
            claimed: (0..n).map(|_| AtomicBool::new(false)).collect(),
        }
    }

    /// Atomically marks non-core point `i` as a cluster member. Only the
    /// first caller wins.
    #[inline]
    pub fn claim(&self, i: usize) -> bool {
        !self.claimed[i].load(Ordering::Relaxed) && !self.claimed[i].swap(true, Ordering::AcqRel)
    }

    /// Merge rule for a pair within `eps`: core-core pairs always union; a
    /// core point takes a non-core neighbor only if it wins that neighbor's
    /// claim.
    #[inline]
    pub fn merge(&self, core: &[bool], x: usize, y: usize) {
        match (core[x], core[y]) {
            (true, true) => self.sets.union(x, y),
            (true, false) => {
                if self.claim(y) {
                    self.sets.union(x, y)
                }
            }
            (false, true) => {
                if self.claim(x) {
                    self.sets.union(y, x)
                }
            }
            (false, false) => {}
        }
    }

    pub fn finish(self, core_flags: &[bool]) -> Vec<Label> {
        let claimed: Vec<bool> = self
            .claimed
            .into_iter()
            .map(AtomicBool::into_inner)
            .collect();
        finalize_labels(&self.sets, core_flags, &claimed)
    }
}
