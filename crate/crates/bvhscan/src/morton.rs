//! Z-order (Morton) codes.
//!
//! Each axis is quantized into `2^bits` bins against the scene box, with
//! `bits = floor(width / D)`. Bits are interleaved with axis 0 in the least
//! significant position of each group, so for `D = 3` the code reads
//! `... z1 y1 x1 z0 y0 x0`. Unused high bits stay zero.

use rayon::prelude::*;

use crate::geometry::{Aabb, Point};

/// Bit width of the Morton codes used for sorting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CodeWidth {
    W32,
    #[default]
    W64,
}

impl CodeWidth {
    pub fn bits(self) -> u32 {
        match self {
            CodeWidth::W32 => 32,
            CodeWidth::W64 => 64,
        }
    }

    /// Bins per axis are `2^bits_per_axis(dim)`.
    pub fn bits_per_axis(self, dim: usize) -> u32 {
        self.bits() / dim as u32
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            32 => Some(CodeWidth::W32),
            64 => Some(CodeWidth::W64),
            _ => None,
        }
    }
}

/// A Morton code. 32-bit codes are stored zero-extended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonCode(pub u64);

/// Duplicate-code statistics over a set of codes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MortonStats {
    /// Number of distinct codes shared by more than 3 points.
    pub num_codes_duplicated_gt3: usize,
    /// Number of points whose code is shared with at least one other point.
    pub num_points_with_duplicate_code: usize,
    /// Largest multiplicity of a single code (1 if all distinct, 0 if empty).
    pub max_same_code_duplicates: usize,
}

/// Per-axis bin indices of `p` inside `scene`.
///
/// Points on the upper face are clamped into the last bin and zero-extent
/// axes map to bin 0.
pub fn bin<const D: usize>(p: &Point<D>, scene: &Aabb<D>, bits_per_axis: u32) -> [u32; D] {
    let bins = (1u64 << bits_per_axis) as f64;
    let last = (1u64 << bits_per_axis) - 1;
    let mut out = [0u32; D];
    for (k, o) in out.iter_mut().enumerate() {
        let lo = scene.min[k] as f64;
        let extent = scene.max[k] as f64 - lo;
        if extent <= 0.0 {
            continue;
        }
        let t = ((p[k] as f64 - lo) / extent * bins).floor();
        *o = if t <= 0.0 {
            0
        } else {
            (t as u64).min(last) as u32
        };
    }
    out
}

/// Spreads the low 32 bits of `v` so that bit `i` lands on bit `2i`.
#[inline]
fn spread_by_1(v: u64) -> u64 {
    let mut x = v & 0xffff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// Spreads the low 21 bits of `v` so that bit `i` lands on bit `3i`.
#[inline]
fn spread_by_2(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

/// Interleaves per-axis bins into a code.
///
/// Each bin must fit in `width.bits_per_axis(D)` bits.
pub fn encode<const D: usize>(bins: &[u32; D], width: CodeWidth) -> MortonCode {
    let bits = width.bits_per_axis(D);
    debug_assert!(bins
        .iter()
        .all(|&b| bits >= 32 || (b as u64) < (1u64 << bits)));
    let code = match D {
        1 => bins[0] as u64,
        2 => spread_by_1(bins[0] as u64) | (spread_by_1(bins[1] as u64) << 1),
        3 => {
            spread_by_2(bins[0] as u64)
                | (spread_by_2(bins[1] as u64) << 1)
                | (spread_by_2(bins[2] as u64) << 2)
        }
        _ => {
            let mut code = 0u64;
            for b in 0..bits {
                for (k, &v) in bins.iter().enumerate() {
                    code |= (((v >> b) & 1) as u64) << (b as usize * D + k);
                }
            }
            code
        }
    };
    MortonCode(code)
}

/// Bins and encodes a point in one step.
pub fn point_code<const D: usize>(p: &Point<D>, scene: &Aabb<D>, width: CodeWidth) -> MortonCode {
    encode(&bin(p, scene, width.bits_per_axis(D)), width)
}

/// Stable ascending sort of `codes`: returns `perm` with `codes[perm[i]]`
/// non-decreasing and equal codes kept in original index order.
pub fn sort_by_code(codes: &[MortonCode]) -> Vec<u32> {
    let mut keyed: Vec<(u64, u32)> = codes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.0, i as u32))
        .collect();
    // (code, index) keys are unique, so an unstable sort yields the stable order.
    keyed.par_sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

pub fn morton_stats(codes: &[MortonCode]) -> MortonStats {
    let mut sorted: Vec<u64> = codes.iter().map(|c| c.0).collect();
    sorted.par_sort_unstable();
    let mut stats = MortonStats::default();
    for run in sorted.chunk_by(|a, b| a == b) {
        let len = run.len();
        if len > 1 {
            stats.num_points_with_duplicate_code += len;
        }
        if len > 3 {
            stats.num_codes_duplicated_gt3 += 1;
        }
        stats.max_same_code_duplicates = stats.max_same_code_duplicates.max(len);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bit-by-bit reference interleaver.
    fn naive_encode(bins: &[u32], width: u32) -> u64 {
        let d = bins.len() as u32;
        let bits = width / d;
        let mut code = 0u64;
        let mut pos = 0;
        for b in 0..bits {
            for &v in bins {
                if v & (1 << b) != 0 {
                    code |= 1 << pos;
                }
                pos += 1;
            }
        }
        code
    }

    fn decode(code: u64, d: usize, width: u32) -> Vec<u32> {
        let bits = width / d as u32;
        let mut out = vec![0u32; d];
        for b in 0..bits {
            for (k, o) in out.iter_mut().enumerate() {
                if code >> (b as usize * d + k) & 1 == 1 {
                    *o |= 1 << b;
                }
            }
        }
        out
    }

    #[test]
    fn bits_per_axis_layout() {
        assert_eq!(CodeWidth::W32.bits_per_axis(3), 10);
        assert_eq!(CodeWidth::W64.bits_per_axis(3), 21);
        assert_eq!(CodeWidth::W32.bits_per_axis(2), 16);
        assert_eq!(CodeWidth::W64.bits_per_axis(2), 32);
    }

    #[test]
    fn bin_corners_and_midpoint() {
        let unit = Aabb::new(Point([0.0f32; 3]), Point([1.0f32; 3]));
        assert_eq!(bin(&Point([0.0, 0.0, 0.0]), &unit, 10), [0, 0, 0]);
        assert_eq!(bin(&Point([1.0, 1.0, 1.0]), &unit, 10), [1023; 3]);
        assert_eq!(bin(&Point([0.5, 0.0, 0.0]), &unit, 10), [512, 0, 0]);
        assert_eq!(bin(&Point([1.0, 1.0, 1.0]), &unit, 21), [(1 << 21) - 1; 3]);
    }

    #[test]
    fn bin_zero_extent_axis() {
        let flat = Aabb::new(Point([0.0, 2.0]), Point([1.0, 2.0]));
        assert_eq!(bin(&Point([0.75, 2.0]), &flat, 16), [49152, 0]);
    }

    #[test]
    fn encode_small_cases() {
        assert_eq!(encode(&[0, 0, 0], CodeWidth::W32), MortonCode(0));
        assert_eq!(encode(&[1, 1, 1], CodeWidth::W32), MortonCode(0b111));
        assert_eq!(encode(&[1, 0, 0], CodeWidth::W64), MortonCode(1));
        assert_eq!(encode(&[0, 1], CodeWidth::W32), MortonCode(0b10));
    }

    #[test]
    fn sort_identity_cases() {
        let sorted: Vec<_> = (0..10u64).map(MortonCode).collect();
        assert_eq!(sort_by_code(&sorted), (0..10).collect::<Vec<u32>>());
        let equal = vec![MortonCode(42); 7];
        assert_eq!(sort_by_code(&equal), (0..7).collect::<Vec<u32>>());
    }

    #[test]
    fn stats_hand_counted() {
        let distinct: Vec<_> = (0..5u64).map(MortonCode).collect();
        assert_eq!(
            morton_stats(&distinct),
            MortonStats {
                num_codes_duplicated_gt3: 0,
                num_points_with_duplicate_code: 0,
                max_same_code_duplicates: 1
            }
        );
        let codes: Vec<_> = [5u64, 5, 5, 5, 9].into_iter().map(MortonCode).collect();
        assert_eq!(
            morton_stats(&codes),
            MortonStats {
                num_codes_duplicated_gt3: 1,
                num_points_with_duplicate_code: 4,
                max_same_code_duplicates: 4
            }
        );
        assert_eq!(morton_stats(&[]), MortonStats::default());
    }

    proptest! {
        #[test]
        fn encode_matches_naive_3d(b in [0u32..(1 << 21), 0u32..(1 << 21), 0u32..(1 << 21)]) {
            prop_assert_eq!(encode(&b, CodeWidth::W64).0, naive_encode(&b, 64));
            prop_assert_eq!(decode(encode(&b, CodeWidth::W64).0, 3, 64), b.to_vec());
            let small = [b[0] & 1023, b[1] & 1023, b[2] & 1023];
            prop_assert_eq!(encode(&small, CodeWidth::W32).0, naive_encode(&small, 32));
            prop_assert_eq!(decode(encode(&small, CodeWidth::W32).0, 3, 32), small.to_vec());
        }

        #[test]
        fn encode_matches_naive_2d(b in [any::<u32>(), any::<u32>()]) {
            prop_assert_eq!(encode(&b, CodeWidth::W64).0, naive_encode(&b, 64));
            prop_assert_eq!(decode(encode(&b, CodeWidth::W64).0, 2, 64), b.to_vec());
            let small = [b[0] & 0xffff, b[1] & 0xffff];
            prop_assert_eq!(encode(&small, CodeWidth::W32).0, naive_encode(&small, 32));
        }

        #[test]
        fn generic_path_matches_naive(b in [0u32..(1 << 16), 0u32..(1 << 16), 0u32..(1 << 16), 0u32..(1 << 16)]) {
            prop_assert_eq!(encode(&b, CodeWidth::W64).0, naive_encode(&b, 64));
        }

        #[test]
        fn monotone_along_an_axis(b in [0u32..1023, 0u32..1024, 0u32..1024], axis in 0usize..3) {
            let mut up = b;
            if up[axis] < 1023 {
                up[axis] += 1;
            }
            prop_assert!(encode(&up, CodeWidth::W32) >= encode(&b, CodeWidth::W32));
        }

        #[test]
        fn sort_matches_reference_stable_sort(codes in prop::collection::vec(0u64..20, 0..200)) {
            let codes: Vec<_> = codes.into_iter().map(MortonCode).collect();
            let mut reference: Vec<u32> = (0..codes.len() as u32).collect();
            reference.sort_by_key(|&i| codes[i as usize]);
            prop_assert_eq!(sort_by_code(&codes), reference);
        }
    }
}
