//! Spatial search on a linear bounding volume hierarchy, and density-based
//! clustering built on it.
//!
//! The hierarchy ([`bvh::Bvh`]) is built from Morton-sorted objects and
//! carries ropes, so range queries and pair enumeration run without a
//! traversal stack. [`dbscan`] implements union-find DBSCAN variants on top
//! of those traversals, plus a brute-force oracle to check them against.
//!
//! ```
//! use bvhscan::dbscan::{fdbscan, DbscanOptions, DbscanParams, Label};
//! use bvhscan::geometry::Point;
//!
//! let points = [
//!     Point([0.0, 0.0]),
//!     Point([0.1, 0.0]),
//!     Point([0.0, 0.1]),
//!     Point([5.0, 5.0]),
//! ];
//! let params = DbscanParams::new(0.2, 3).unwrap();
//! let out = fdbscan(&points, &params, &DbscanOptions::default()).unwrap();
//! assert_eq!(out.labels[..3], [Label::Cluster(0); 3]);
//! assert_eq!(out.labels[3], Label::Noise);
//! ```

pub mod bvh;
pub mod dbscan;
pub mod geometry;
pub mod morton;
pub mod traversal;
pub mod unionfind;

pub use bvh::{Bvh, NodeRef};
pub use geometry::{Aabb, Point, Sphere};
pub use morton::CodeWidth;
pub use traversal::{CallbackControl, Execution, QueryOptions, RangePredicate};
