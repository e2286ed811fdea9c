//! Nine-mode lossy occupancy coding.
//!
//! A leaf's occupancy mask is replaced by the closest of nine fixed shapes.
//! The encoder fills the depth maps so they stay smooth: empty cells inside
//! the shape take the mean depth of their Chebyshev-nearest occupied cells,
//! empty cells outside it take a dummy depth (−1 or S). The decoder keeps
//! exactly the cells of the shape.

use crate::error::{Error, Result};
use crate::projection::{Axis, DepthMapSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OccupancyMode {
    Full = 0,
    Left = 1,
    Right = 2,
    Top = 3,
    Bottom = 4,
    UpperLeft = 5,
    LowerRight = 6,
    UpperRight = 7,
    LowerLeft = 8,
}

impl OccupancyMode {
    pub const ALL: [OccupancyMode; 9] = [
        OccupancyMode::Full,
        OccupancyMode::Left,
        OccupancyMode::Right,
        OccupancyMode::Top,
        OccupancyMode::Bottom,
        OccupancyMode::UpperLeft,
        OccupancyMode::LowerRight,
        OccupancyMode::UpperRight,
        OccupancyMode::LowerLeft,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u64) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    /// Whether cell (column `u`, row `v`) belongs to the mode on an `s`×`s` grid.
    #[inline]
    pub fn contains(self, u: usize, v: usize, s: usize) -> bool {
        let h = s / 2;
        match self {
            OccupancyMode::Full => true,
            OccupancyMode::Left => u < h,
            OccupancyMode::Right => u >= h,
            OccupancyMode::Top => v < h,
            OccupancyMode::Bottom => v >= h,
            OccupancyMode::UpperLeft => u + v < s,
            OccupancyMode::LowerRight => u + v + 1 >= s,
            OccupancyMode::UpperRight => u >= v,
            OccupancyMode::LowerLeft => u <= v,
        }
    }
}

/// Row-major `s`×`s` mask of `mode`.
pub fn mode_mask(mode: OccupancyMode, s: usize) -> Result<Vec<bool>> {
    if s < 2 || !s.is_multiple_of(2) {
        return Err(Error::Domain(format!("mode masks need an even side >= 2, got {s}")));
    }
    Ok((0..s * s).map(|i| mode.contains(i % s, i / s, s)).collect())
}

/// Number of cells where the mode mask agrees with `occ`.
pub fn agreement(mode: OccupancyMode, occ: &[bool], s: usize) -> usize {
    occ.iter()
        .enumerate()
        .filter(|(i, &o)| mode.contains(i % s, i / s, s) == o)
        .count()
}

/// The mode with the highest agreement; ties go to the smallest index.
pub fn select_mode(occ: &[bool], s: usize) -> OccupancyMode {
    let mut best = OccupancyMode::Full;
    let mut best_score = agreement(best, occ, s);
    for mode in &OccupancyMode::ALL[1..] {
        let score = agreement(*mode, occ, s);
        if score > best_score {
            best = *mode;
            best_score = score;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilledMaps {
    pub near: Vec<i32>,
    pub far: Vec<i32>,
    pub dummy: i32,
}

impl FilledMaps {
    /// Dummy bit: 0 for −1, 1 for `S`.
    pub fn dummy_bit(&self) -> bool {
        self.dummy >= 0
    }
}

fn rounded_mean(sum: i64, count: i64) -> i32 {
    (2 * sum + count).div_euclid(2 * count) as i32
}

/// Mean of the occupied cells at minimal Chebyshev distance from `(u, v)`.
fn infer(map: &[i32], occ: &[bool], s: usize, u: usize, v: usize) -> i32 {
    for r in 1..s {
        let (mut sum, mut count) = (0i64, 0i64);
        let r = r as isize;
        for dv in -r..=r {
            for du in -r..=r {
                if du.abs() != r && dv.abs() != r {
                    continue;
                }
                let (uu, vv) = (u as isize + du, v as isize + dv);
                if uu < 0 || vv < 0 || uu >= s as isize || vv >= s as isize {
                    continue;
                }
                let i = vv as usize * s + uu as usize;
                if occ[i] {
                    sum += map[i] as i64;
                    count += 1;
                }
            }
        }
        if count > 0 {
            return rounded_mean(sum, count);
        }
    }
    0
}

/// Fills the near/far maps of `dms` for coding under `mode`.
pub fn fill_depth(dms: &DepthMapSet, mode: OccupancyMode) -> FilledMaps {
    let s = dms.side;
    let (mut sum, mut count) = (0i64, 0i64);
    for i in 0..s * s {
        if dms.occupancy[i] {
            sum += dms.near[i] as i64 + dms.far[i] as i64;
            count += 2;
        }
    }
    // mean depth <= (S−1)/2 picks −1, otherwise S
    let dummy = if count == 0 || 2 * sum <= (s as i64 - 1) * count {
        -1
    } else {
        s as i32
    };
    let mut near = dms.near.clone();
    let mut far = dms.far.clone();
    for v in 0..s {
        for u in 0..s {
            let i = v * s + u;
            if dms.occupancy[i] {
                continue;
            }
            if mode.contains(u, v, s) && count > 0 {
                near[i] = infer(&dms.near, &dms.occupancy, s, u, v);
                far[i] = infer(&dms.far, &dms.occupancy, s, u, v);
            } else {
                near[i] = dummy;
                far[i] = dummy;
            }
        }
    }
    FilledMaps { near, far, dummy }
}

/// Decoder-side pixel set: occupancy is exactly the mode mask and depths are
/// clamped into the voxel.
pub fn reconstruct_pixels(
    decoded_near: &[i32],
    decoded_far: &[i32],
    mode: OccupancyMode,
    dual: bool,
    side: usize,
    axis: Axis,
) -> DepthMapSet {
    let max = side as i32 - 1;
    let n = side * side;
    let mut occupancy = vec![false; n];
    let mut near = vec![crate::projection::EMPTY; n];
    let mut far = vec![crate::projection::EMPTY; n];
    for i in 0..n {
        if mode.contains(i % side, i / side, side) {
            occupancy[i] = true;
            near[i] = decoded_near[i].clamp(0, max);
            far[i] = if dual { decoded_far[i].clamp(0, max) } else { near[i] };
        }
    }
    // keep the near <= far invariant even if coding noise swapped them
    for i in 0..n {
        if occupancy[i] && near[i] > far[i] {
            std::mem::swap(&mut near[i], &mut far[i]);
        }
    }
    let dual = near.iter().zip(&far).any(|(a, b)| a != b);
    DepthMapSet {
        side,
        axis,
        occupancy,
        near,
        far,
        dual,
    }
}
