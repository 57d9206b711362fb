//! Disjoint sets for cluster merging.
//!
//! [`DisjointSets`] is the plain sequential structure (union by size, path
//! compression). [`AtomicDisjointSets`] allows concurrent `union` from many
//! workers: roots are linked with a compare-and-swap on the parent entry,
//! always from the larger root index to the smaller one, so parent chains
//! strictly decrease and can never form a cycle. A lost race simply retries.

use std::sync::atomic::{AtomicU32, Ordering};

/// Read access to a partition, shared by both implementations.
pub trait Partition {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Representative of `i`'s set, without modifying the structure.
    fn root(&self, i: usize) -> usize;
}

#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize);
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = i;
        while cur != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
    }
}

impl Partition for DisjointSets {
    fn len(&self) -> usize {
        self.parent.len()
    }

    fn root(&self, i: usize) -> usize {
        let mut r = i;
        while self.parent[r] as usize != r {
            r = self.parent[r] as usize;
        }
        r
    }
}

/// Disjoint sets safe for concurrent `union` and `find` through `&self`.
///
/// The root of every set is its smallest element.
#[derive(Debug)]
pub struct AtomicDisjointSets {
    parent: Vec<AtomicU32>,
}

impl AtomicDisjointSets {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize);
        Self {
            parent: (0..n as u32).map(AtomicU32::new).collect(),
        }
    }

    /// Root of `i` with path halving. Concurrent unions may make the answer
    /// stale, never wrong about past merges.
    pub fn find(&self, i: usize) -> usize {
        let mut cur = i as u32;
        loop {
            let parent = self.parent[cur as usize].load(Ordering::Acquire);
            if parent == cur {
                return cur as usize;
            }
            let grand = self.parent[parent as usize].load(Ordering::Acquire);
            if grand != parent {
                // Both values are ancestors of `cur`, so skipping ahead is safe
                // even if the entry changed in between.
                let _ = self.parent[cur as usize].compare_exchange_weak(
                    parent,
                    grand,
                    Ordering::AcqRel,
                    Ordering::Relaxed,
                );
            }
            cur = grand;
        }
    }

    pub fn union(&self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a) as u32, self.find(b) as u32);
        loop {
            if ra == rb {
                return;
            }
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            match self.parent[hi as usize].compare_exchange(
                hi,
                lo,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => return,
                Err(_) => {
                    // `hi` got linked elsewhere; retry from the fresh roots.
                    ra = self.find(hi as usize) as u32;
                    rb = self.find(lo as usize) as u32;
                }
            }
        }
    }
}

impl Partition for AtomicDisjointSets {
    fn len(&self) -> usize {
        self.parent.len()
    }

    fn root(&self, i: usize) -> usize {
        let mut r = i as u32;
        loop {
            let p = self.parent[r as usize].load(Ordering::Acquire);
            if p == r {
                return r as usize;
            }
            r = p;
        }
    }
}

/// Canonical form of a partition: each element mapped to the smallest member
/// of its set. Two partitions are equal iff their canonical forms are.
pub fn canonical_labels<P: Partition + ?Sized>(sets: &P) -> Vec<usize> {
    let n = sets.len();
    let mut min_of_root = vec![usize::MAX; n];
    let roots: Vec<usize> = (0..n).map(|i| sets.root(i)).collect();
    for (i, &r) in roots.iter().enumerate() {
        min_of_root[r] = min_of_root[r].min(i);
    }
    roots.into_iter().map(|r| min_of_root[r]).collect()
}
