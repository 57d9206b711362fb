//! Test-only oracles: random instances, brute-force searches, and a
//! top-down reference hierarchy with explicit children.
#![allow(dead_code)]

use bvhscan::geometry::{bounding_box, distance, min_distance, Aabb, Point};
use bvhscan::morton::{self, CodeWidth};
use bvhscan::traversal::RangePredicate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform<const D: usize>(rng: &mut impl Rng, n: usize, extent: f32) -> Vec<Point<D>> {
    (0..n)
        .map(|_| Point(std::array::from_fn(|_| rng.random_range(0.0..extent))))
        .collect()
}

/// Points scattered around a few random centres (box-uniform blobs plus
/// some background), which yields core, border and noise points together.
pub fn clustered<const D: usize>(rng: &mut impl Rng, n: usize, extent: f32) -> Vec<Point<D>> {
    let num_centres = rng.random_range(1..=6);
    let centres: Vec<Point<D>> = uniform(rng, num_centres, extent);
    let spread = extent * rng.random_range(0.02..0.15);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.15) {
                Point(std::array::from_fn(|_| rng.random_range(0.0..extent)))
            } else {
                let c = centres[rng.random_range(0..num_centres)];
                Point(std::array::from_fn(|k| {
                    c[k] + rng.random_range(-spread..spread) * rng.random_range(0.0f32..1.0)
                }))
            }
        })
        .collect()
}

/// Same as [`clustered`] but snapped to a coarse lattice, so exact
/// duplicates and distance ties are common.
pub fn snapped<const D: usize>(rng: &mut impl Rng, n: usize, extent: f32) -> Vec<Point<D>> {
    let step = extent / 64.0;
    clustered::<D>(rng, n, extent)
        .into_iter()
        .map(|p| Point(std::array::from_fn(|k| (p[k] / step).round() * step)))
        .collect()
}

pub fn brute_range<const D: usize>(boxes: &[Aabb<D>], pred: &RangePredicate<D>) -> Vec<usize> {
    (0..boxes.len()).filter(|&i| pred.test(&boxes[i])).collect()
}

/// k nearest by (distance, index).
pub fn brute_knn<const D: usize>(points: &[Point<D>], origin: &Point<D>, k: usize) -> Vec<usize> {
    let mut all: Vec<(f32, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (distance(origin, p), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, i)| i).collect()
}

/// All unordered pairs within `eps`, as (min, max).
pub fn brute_pairs<const D: usize>(points: &[Point<D>], eps: f32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if distance(&points[i], &points[j]) <= eps {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn brute_neighbor_counts<const D: usize>(points: &[Point<D>], eps: f32) -> Vec<usize> {
    points
        .iter()
        .map(|p| points.iter().filter(|q| distance(p, q) <= eps).count())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefChild {
    Internal(usize),
    Leaf(usize),
}

#[derive(Clone, Debug)]
pub struct RefNode<const D: usize> {
    pub first: usize,
    pub last: usize,
    pub left: RefChild,
    pub right: RefChild,
    pub volume: Aabb<D>,
}

/// Hierarchy built top-down by recursive splitting on the highest
/// differing bit of the (code, index) keys. Internal nodes are stored in
/// creation order; `karras_index` gives the numbering the library uses.
pub struct RefTree<const D: usize> {
    pub order: Vec<usize>,
    pub leaf_volumes: Vec<Aabb<D>>,
    pub nodes: Vec<RefNode<D>>,
}

impl<const D: usize> RefTree<D> {
    pub fn build(objects: &[Aabb<D>], width: CodeWidth) -> Self {
        let scene = objects.iter().fold(Aabb::empty(), |a, b| a.expand(b));
        let keys_unsorted: Vec<u128> = objects
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let code = morton::point_code(&b.centroid(), &scene, width).0;
                ((code as u128) << 32) | i as u128
            })
            .collect();
        let mut order: Vec<usize> = (0..objects.len()).collect();
        order.sort_by_key(|&i| keys_unsorted[i]);
        let keys: Vec<u128> = order.iter().map(|&i| keys_unsorted[i]).collect();
        let leaf_volumes: Vec<Aabb<D>> = order.iter().map(|&i| objects[i]).collect();
        let mut tree = RefTree {
            order,
            leaf_volumes,
            nodes: Vec::new(),
        };
        if objects.len() > 1 {
            tree.split(&keys, 0, objects.len() - 1);
        }
        tree
    }

    fn split(&mut self, keys: &[u128], first: usize, last: usize) -> RefChild {
        if first == last {
            return RefChild::Leaf(first);
        }
        let bit = 127 - (keys[first] ^ keys[last]).leading_zeros();
        let gamma = (first..last)
            .rev()
            .find(|&i| keys[i] >> bit & 1 == 0)
            .expect("keys are sorted and distinct");
        let slot = self.nodes.len();
        self.nodes.push(RefNode {
            first,
            last,
            left: RefChild::Leaf(0),
            right: RefChild::Leaf(0),
            volume: Aabb::empty(),
        });
        let left = self.split(keys, first, gamma);
        let right = self.split(keys, gamma + 1, last);
        let volume = self.child_volume(left).expand(&self.child_volume(right));
        let node = &mut self.nodes[slot];
        node.left = left;
        node.right = right;
        node.volume = volume;
        RefChild::Internal(slot)
    }

    pub fn root(&self) -> Option<RefChild> {
        match self.leaf_volumes.len() {
            0 => None,
            1 => Some(RefChild::Leaf(0)),
            _ => Some(RefChild::Internal(0)),
        }
    }

    pub fn child_volume(&self, c: RefChild) -> Aabb<D> {
        match c {
            RefChild::Internal(i) => self.nodes[i].volume,
            RefChild::Leaf(i) => self.leaf_volumes[i],
        }
    }

    /// Karras number of a reference node: the root is 0, a left child is
    /// numbered by its last leaf, a right child by its first leaf.
    pub fn karras_index(&self, c: RefChild) -> usize {
        let RefChild::Internal(i) = c else {
            panic!("leaf")
        };
        if i == 0 {
            return 0;
        }
        let parent = self
            .nodes
            .iter()
            .find(|p| p.left == c || p.right == c)
            .expect("parent");
        if parent.left == c {
            self.nodes[i].last
        } else {
            self.nodes[i].first
        }
    }

    /// Stack-based range search over the explicit children.
    pub fn stack_range(&self, pred: &RangePredicate<D>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<RefChild> = self.root().into_iter().collect();
        while let Some(node) = stack.pop() {
            if !pred.test(&self.child_volume(node)) {
                continue;
            }
            match node {
                RefChild::Leaf(i) => out.push(self.order[i]),
                RefChild::Internal(i) => {
                    stack.push(self.nodes[i].right);
                    stack.push(self.nodes[i].left);
                }
            }
        }
        out
    }
}

pub fn sorted<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v
}

pub fn point_boxes<const D: usize>(points: &[Point<D>]) -> Vec<Aabb<D>> {
    points.iter().map(|p| Aabb::from_point(*p)).collect()
}

pub fn scene_of<const D: usize>(points: &[Point<D>]) -> Aabb<D> {
    bounding_box(points)
}

pub fn min_dist<const D: usize>(p: &Point<D>, b: &Aabb<D>) -> f32 {
    min_distance(p, b)
}
