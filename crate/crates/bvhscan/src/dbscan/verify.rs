use std::collections::HashMap;

use thiserror::Error;

use super::{DbscanOutput, Label};
use crate::geometry::{distance, Point};

/// First disagreement found between two clusterings, or a broken output
/// invariant.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Mismatch {
    #[error("outputs cover {found} points, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("point {0}: core flag differs")]
    CoreSet(usize),
    #[error("point {0}: noise status differs")]
    NoiseSet(usize),
    #[error("core points {0} and {1} are grouped differently")]
    CorePartition(usize, usize),
    #[error("border point {0} has no core neighbor in its cluster")]
    BorderValidity(usize),
    #[error("point {0}: label {1} is not the smallest index of its cluster")]
    NonCanonical(usize, i64),
    #[error("core point {0} is labeled noise")]
    NoisyCore(usize),
}

/// Checks the shape of one output: core points are clustered, cluster ids
/// are the smallest member index, and border points sit within `eps` of a
/// core point of their own cluster.
pub fn check_output_invariants<const D: usize>(
    points: &[Point<D>],
    eps: f32,
    output: &DbscanOutput,
) -> Result<(), Mismatch> {
    let n = points.len();
    for (found, expected) in [(output.labels.len(), n), (output.core_flags.len(), n)] {
        if found != expected {
            return Err(Mismatch::Length { expected, found });
        }
    }
    let mut smallest: HashMap<usize, usize> = HashMap::new();
    for (i, &label) in output.labels.iter().enumerate() {
        match label {
            Label::Noise if output.core_flags[i] => return Err(Mismatch::NoisyCore(i)),
            Label::Noise => {}
            Label::Cluster(c) => {
                smallest.entry(c).or_insert(i);
            }
        }
    }
    for (i, &label) in output.labels.iter().enumerate() {
        if let Label::Cluster(c) = label {
            if smallest[&c] != c {
                return Err(Mismatch::NonCanonical(i, c as i64));
            }
            if !output.core_flags[i] {
                let anchored = (0..n).any(|y| {
                    output.core_flags[y]
                        && output.labels[y] == label
                        && distance(&points[i], &points[y]) <= eps
                });
                if !anchored {
                    return Err(Mismatch::BorderValidity(i));
                }
            }
        }
    }
    Ok(())
}

/// Equivalence of two clusterings of the same points: identical core and
/// noise sets, identical partition of the core points, and valid border
/// labels on both sides. Border points may legitimately sit in different
/// clusters.
pub fn check_equivalence<const D: usize>(
    points: &[Point<D>],
    eps: f32,
    candidate: &DbscanOutput,
    reference: &DbscanOutput,
) -> Result<(), Mismatch> {
    check_output_invariants(points, eps, reference)?;
    check_output_invariants(points, eps, candidate)?;
    for i in 0..points.len() {
        if candidate.core_flags[i] != reference.core_flags[i] {
            return Err(Mismatch::CoreSet(i));
        }
        if candidate.labels[i].is_noise() != reference.labels[i].is_noise() {
            return Err(Mismatch::NoiseSet(i));
        }
    }
    // the label maps between the two outputs must be a bijection on core points
    let mut forward: HashMap<Label, usize> = HashMap::new();
    let mut backward: HashMap<Label, usize> = HashMap::new();
    for i in (0..points.len()).filter(|&i| candidate.core_flags[i]) {
        let a = *forward.entry(candidate.labels[i]).or_insert(i);
        if reference.labels[a] != reference.labels[i] {
            return Err(Mismatch::CorePartition(a, i));
        }
        let b = *backward.entry(reference.labels[i]).or_insert(i);
        if candidate.labels[b] != candidate.labels[i] {
            return Err(Mismatch::CorePartition(b, i));
        }
    }
    Ok(())
}
