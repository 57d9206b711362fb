//! Linear bounding volume hierarchy with ropes.
//!
//! Objects are sorted along the Z-curve of their box centroids and a binary
//! hierarchy is derived from the common-prefix lengths of adjacent sort keys.
//! Internal node `i` follows the Karras numbering: it is anchored at one end
//! of its leaf range, and the split between its children sits right after the
//! left child's last leaf. Right children are not stored. Every node carries a
//! rope, the next node to visit once its subtree has been handled, and ropes
//! of the right-most path point to [`NodeRef::SENTINEL`].
//!
//! With ropes a full traversal needs no stack: descend to the left child while
//! the predicate holds, otherwise (or at a leaf) follow the rope, and stop at
//! the sentinel. The right child of an internal node is the rope of its left
//! child.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Aabb, Point};
use crate::morton::{self, CodeWidth, MortonCode};

/// Reference to a node: internal, leaf, or the sentinel.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef(u32);

const LEAF_BIT: u32 = 1 << 31;

/// Largest number of objects a hierarchy can hold.
pub const MAX_OBJECTS: usize = (LEAF_BIT - 1) as usize;

/// Decoded form of a [`NodeRef`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Internal(usize),
    Leaf(usize),
    Sentinel,
}

impl NodeRef {
    pub const SENTINEL: NodeRef = NodeRef(u32::MAX);

    pub fn internal(i: usize) -> Self {
        debug_assert!(i < MAX_OBJECTS);
        NodeRef(i as u32)
    }

    pub fn leaf(i: usize) -> Self {
        debug_assert!(i < MAX_OBJECTS);
        NodeRef(i as u32 | LEAF_BIT)
    }

    #[inline]
    pub fn get(self) -> Node {
        if self == Self::SENTINEL {
            Node::Sentinel
        } else if self.0 & LEAF_BIT != 0 {
            Node::Leaf((self.0 & !LEAF_BIT) as usize)
        } else {
            Node::Internal(self.0 as usize)
        }
    }

    #[inline]
    pub fn is_sentinel(self) -> bool {
        self == Self::SENTINEL
    }
}

impl fmt::Debug for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.get() {
            Node::Internal(i) => write!(f, "I{i}"),
            Node::Leaf(i) => write!(f, "L{i}"),
            Node::Sentinel => f.write_str("S"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafNode<const D: usize> {
    /// Index of the object in the slice passed to [`Bvh::build`].
    pub object: u32,
    pub volume: Aabb<D>,
    pub rope: NodeRef,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InternalNode<const D: usize> {
    pub left: NodeRef,
    pub volume: Aabb<D>,
    pub rope: NodeRef,
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("object {index} has a non-finite bounding box")]
    NonFinite { index: usize },
    #[error("object {index} has an inverted bounding box")]
    Inverted { index: usize },
    #[error("{count} objects exceed the hierarchy capacity of {MAX_OBJECTS}")]
    TooManyObjects { count: usize },
}

/// First structural defect found by [`Bvh::validate`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Violation {
    #[error("expected {expected} {kind} nodes, found {found}")]
    NodeCount {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("rope walk is broken: {0}")]
    RopeCoverage(String),
    #[error("child {child:?} of {parent:?} is not contained in its parent's volume")]
    Containment { parent: NodeRef, child: NodeRef },
    #[error("node {0:?} lies on the right-most path but its rope is not the sentinel")]
    SentinelRule(NodeRef),
    #[error("scene box does not match the root volume")]
    Scene,
}

/// Immutable linear BVH over `D`-dimensional boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct Bvh<const D: usize> {
    leaves: Vec<LeafNode<D>>,
    internals: Vec<InternalNode<D>>,
    scene: Aabb<D>,
    width: CodeWidth,
}

impl<const D: usize> Bvh<D> {
    /// Builds a hierarchy over `objects`. An empty slice gives an empty
    /// hierarchy that answers every query with nothing.
    pub fn build(objects: &[Aabb<D>], width: CodeWidth) -> Result<Self, BuildError> {
        let n = objects.len();
        if n > MAX_OBJECTS {
            return Err(BuildError::TooManyObjects { count: n });
        }
        for (index, b) in objects.iter().enumerate() {
            if !b.is_finite() {
                return Err(BuildError::NonFinite { index });
            }
            if b.is_empty() {
                return Err(BuildError::Inverted { index });
            }
        }

        let scene = objects
            .par_iter()
            .fold(Aabb::empty, |acc, b| acc.expand(b))
            .reduce(Aabb::empty, |a, b| a.expand(&b));
        let codes: Vec<MortonCode> = objects
            .par_iter()
            .map(|b| morton::point_code(&b.centroid(), &scene, width))
            .collect();
        let order = morton::sort_by_code(&codes);

        let leaves: Vec<LeafNode<D>> = order
            .iter()
            .map(|&obj| LeafNode {
                object: obj,
                volume: objects[obj as usize],
                rope: NodeRef::SENTINEL,
            })
            .collect();
        let sorted_codes: Vec<u64> = order.iter().map(|&i| codes[i as usize].0).collect();
        let delta: Vec<u32> = (0..n.saturating_sub(1))
            .into_par_iter()
            .map(|i| {
                common_prefix(
                    (sorted_codes[i], order[i]),
                    (sorted_codes[i + 1], order[i + 1]),
                )
            })
            .collect();

        let mut bvh = Bvh {
            leaves,
            internals: Vec::new(),
            scene,
            width,
        };
        bvh.link(&delta);
        Ok(bvh)
    }

    /// Builds over degenerate boxes, one per point.
    pub fn from_points(points: &[Point<D>], width: CodeWidth) -> Result<Self, BuildError> {
        let boxes: Vec<Aabb<D>> = points.par_iter().map(|p| Aabb::from_point(*p)).collect();
        Self::build(&boxes, width)
    }

    /// Single bottom-up pass: merges ranges, computes volumes and sets ropes.
    ///
    /// A node covering leaves `[l, r]` merges with its right neighbour when
    /// `delta[r] > delta[l - 1]` and with its left neighbour otherwise. The
    /// first of two siblings to arrive parks its outer bound in the slot of
    /// the split and stops; the second one builds the parent.
    fn link(&mut self, delta: &[u32]) {
        let n = self.leaves.len();
        if n == 0 {
            return;
        }
        if n == 1 {
            self.leaves[0].rope = NodeRef::SENTINEL;
            return;
        }
        self.internals = vec![
            InternalNode {
                left: NodeRef::SENTINEL,
                volume: Aabb::empty(),
                rope: NodeRef::SENTINEL,
            };
            n - 1
        ];
        const UNSET: u32 = u32::MAX;
        let mut pending = vec![UNSET; n - 1];

        let rope_after = |r: usize| -> NodeRef {
            if r == n - 1 {
                NodeRef::SENTINEL
            } else if r + 1 == n - 1 || delta[r + 1] < delta[r] {
                NodeRef::leaf(r + 1)
            } else {
                NodeRef::internal(r + 1)
            }
        };

        for leaf in 0..n {
            let (mut l, mut r) = (leaf, leaf);
            // Volume and left child of the current node; for a leaf the left
            // child is unused.
            let mut volume = self.leaves[leaf].volume;
            let mut left = NodeRef::SENTINEL;
            loop {
                let rope = rope_after(r);
                if l == 0 && r == n - 1 {
                    self.internals[0] = InternalNode { left, volume, rope };
                    break;
                }
                let is_left = r != n - 1 && (l == 0 || delta[r] > delta[l - 1]);
                let me = if l == r {
                    NodeRef::leaf(l)
                } else if is_left {
                    NodeRef::internal(r)
                } else {
                    NodeRef::internal(l)
                };
                match me.get() {
                    Node::Leaf(i) => self.leaves[i].rope = rope,
                    Node::Internal(i) => self.internals[i] = InternalNode { left, volume, rope },
                    Node::Sentinel => unreachable!(),
                }

                let split = if is_left { r } else { l - 1 };
                let other = pending[split];
                if other == UNSET {
                    pending[split] = if is_left { l as u32 } else { r as u32 };
                    break;
                }
                let (pl, pr) = if is_left {
                    (l, other as usize)
                } else {
                    (other as usize, r)
                };
                let left_child = if pl == split {
                    NodeRef::leaf(split)
                } else {
                    NodeRef::internal(split)
                };
                let right_child = if pr == split + 1 {
                    NodeRef::leaf(split + 1)
                } else {
                    NodeRef::internal(split + 1)
                };
                volume = self.volume(left_child).expand(&self.volume(right_child));
                left = left_child;
                l = pl;
                r = pr;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn code_width(&self) -> CodeWidth {
        self.width
    }

    /// Box over every stored object.
    pub fn scene(&self) -> &Aabb<D> {
        &self.scene
    }

    pub fn root(&self) -> NodeRef {
        match self.leaves.len() {
            0 => NodeRef::SENTINEL,
            1 => NodeRef::leaf(0),
            _ => NodeRef::internal(0),
        }
    }

    pub fn leaves(&self) -> &[LeafNode<D>] {
        &self.leaves
    }

    pub fn internal_nodes(&self) -> &[InternalNode<D>] {
        &self.internals
    }

    /// Mutable node access for fault-injection tests of [`Bvh::validate`].
    #[doc(hidden)]
    pub fn nodes_mut(&mut self) -> (&mut [LeafNode<D>], &mut [InternalNode<D>]) {
        (&mut self.leaves, &mut self.internals)
    }

    /// Volume of an internal node or leaf. Panics on the sentinel.
    #[inline]
    pub fn volume(&self, node: NodeRef) -> Aabb<D> {
        match node.get() {
            Node::Internal(i) => self.internals[i].volume,
            Node::Leaf(i) => self.leaves[i].volume,
            Node::Sentinel => panic!("the sentinel has no volume"),
        }
    }

    #[inline]
    pub fn rope(&self, node: NodeRef) -> NodeRef {
        match node.get() {
            Node::Internal(i) => self.internals[i].rope,
            Node::Leaf(i) => self.leaves[i].rope,
            Node::Sentinel => NodeRef::SENTINEL,
        }
    }

    /// Left and right child of an internal node.
    #[inline]
    pub fn children(&self, node: NodeRef) -> Option<(NodeRef, NodeRef)> {
        match node.get() {
            Node::Internal(i) => {
                let left = self.internals[i].left;
                Some((left, self.rope(left)))
            }
            _ => None,
        }
    }

    /// Checks leaf count, rope coverage, child containment and the
    /// right-most-path sentinel rule, in that order.
    pub fn validate(&self) -> Result<(), Violation> {
        let n = self.leaves.len();
        let expected_internal = n.saturating_sub(1);
        if self.internals.len() != expected_internal {
            return Err(Violation::NodeCount {
                kind: "internal",
                expected: expected_internal,
                found: self.internals.len(),
            });
        }
        if n == 0 {
            return Ok(());
        }

        // Unpruned rope walk must visit leaves 0..n in order, each exactly once.
        let mut node = self.root();
        let mut next_leaf = 0;
        let mut steps = 0;
        while !node.is_sentinel() {
            steps += 1;
            if steps > 2 * n {
                return Err(Violation::RopeCoverage("walk does not terminate".into()));
            }
            node = match node.get() {
                Node::Internal(i) => self.internals[i].left,
                Node::Leaf(i) => {
                    if i != next_leaf {
                        return Err(Violation::RopeCoverage(format!(
                            "visited leaf {i} where leaf {next_leaf} was expected"
                        )));
                    }
                    next_leaf += 1;
                    self.leaves[i].rope
                }
                Node::Sentinel => unreachable!(),
            };
            if let Node::Internal(i) | Node::Leaf(i) = node.get() {
                let bound = if matches!(node.get(), Node::Leaf(_)) {
                    n
                } else {
                    n - 1
                };
                if i >= bound {
                    return Err(Violation::RopeCoverage(format!("{node:?} is out of range")));
                }
            }
        }
        if next_leaf != n {
            return Err(Violation::RopeCoverage(format!(
                "walk ended after {next_leaf} of {n} leaves"
            )));
        }

        for i in 0..expected_internal {
            let parent = NodeRef::internal(i);
            let (left, right) = self.children(parent).expect("internal node");
            let volume = self.internals[i].volume;
            for child in [left, right] {
                if child.is_sentinel() || !volume.contains(&self.volume(child)) {
                    return Err(Violation::Containment { parent, child });
                }
            }
        }

        let mut node = self.root();
        let mut steps = 0;
        loop {
            if self.rope(node) != NodeRef::SENTINEL {
                return Err(Violation::SentinelRule(node));
            }
            match self.children(node) {
                Some((_, right)) if steps < n => node = right,
                _ => break,
            }
            steps += 1;
        }

        if self.volume(self.root()) != self.scene {
            return Err(Violation::Scene);
        }
        Ok(())
    }

    /// Deterministic text dump of the node arrays, one node per line.
    ///
    /// Internal nodes come first as `I <i> left=<ref> rope=<ref> min=[..] max=[..]`,
    /// then leaves as `L <i> object=<o> rope=<ref> min=[..] max=[..]`, where a
    /// reference is `I<i>`, `L<i>` or `S` for the sentinel.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.internals.iter().enumerate() {
            let _ = writeln!(
                out,
                "I {i} left={:?} rope={:?} min={:?} max={:?}",
                node.left, node.rope, node.volume.min.0, node.volume.max.0
            );
        }
        for (i, leaf) in self.leaves.iter().enumerate() {
            let _ = writeln!(
                out,
                "L {i} object={} rope={:?} min={:?} max={:?}",
                leaf.object, leaf.rope, leaf.volume.min.0, leaf.volume.max.0
            );
        }
        out
    }
}

/// Common-prefix length of two sorted keys. Equal codes fall through to the
/// object indices, so adjacent keys are always distinct.
#[inline]
fn common_prefix(a: (u64, u32), b: (u64, u32)) -> u32 {
    if a.0 != b.0 {
        (a.0 ^ b.0).leading_zeros()
    } else {
        64 + (a.1 ^ b.1).leading_zeros()
    }
}
