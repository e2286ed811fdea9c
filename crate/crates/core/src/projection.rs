//! Per-leaf orthographic projection onto near/far depth maps.
//!
//! The projection plane sits at coordinate 0 of the dropped axis, so the
//! depth of a point is simply its dropped local coordinate. Maps are stored
//! row-major with `v` as the row and `u` as the column.

use crate::octree::LocalPoint;

/// Marker for a cell with no projected point.
pub const EMPTY: i32 = i32::MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u64) -> Option<Axis> {
        match code {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    /// `(u, v, depth)` of a local point.
    #[inline]
    pub fn split(self, p: &LocalPoint) -> (usize, usize, i32) {
        let [x, y, z] = p.map(|c| c as usize);
        match self {
            Axis::X => (y, z, x as i32),
            Axis::Y => (x, z, y as i32),
            Axis::Z => (x, y, z as i32),
        }
    }

    /// Inverse of [`Axis::split`].
    #[inline]
    pub fn join(self, u: u32, v: u32, depth: u32) -> [u32; 3] {
        match self {
            Axis::X => [depth, u, v],
            Axis::Y => [u, depth, v],
            Axis::Z => [u, v, depth],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMapSet {
    pub side: usize,
    pub axis: Axis,
    pub occupancy: Vec<bool>,
    pub near: Vec<i32>,
    pub far: Vec<i32>,
    pub dual: bool,
}

impl DepthMapSet {
    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }
}

/// Number of distinct cells hit when dropping `axis`.
pub fn projection_area(points: &[LocalPoint], side: usize, axis: Axis) -> usize {
    let mut hit = vec![false; side * side];
    let mut area = 0;
    for p in points {
        let (u, v, _) = axis.split(p);
        let cell = &mut hit[v * side + u];
        if !*cell {
            *cell = true;
            area += 1;
        }
    }
    area
}

/// Axis with the largest projection area; ties prefer X, then Y.
pub fn select_axis(points: &[LocalPoint], side: usize) -> Axis {
    let mut best = Axis::X;
    let mut best_area = 0;
    for axis in Axis::ALL {
        let a = projection_area(points, side, axis);
        if a > best_area {
            best = axis;
            best_area = a;
        }
    }
    best
}

pub fn project(points: &[LocalPoint], side: usize, axis: Axis) -> DepthMapSet {
    let n = side * side;
    let mut near = vec![EMPTY; n];
    let mut far = vec![EMPTY; n];
    let mut occupancy = vec![false; n];
    for p in points {
        let (u, v, d) = axis.split(p);
        let i = v * side + u;
        if occupancy[i] {
            near[i] = near[i].min(d);
            far[i] = far[i].max(d);
        } else {
            occupancy[i] = true;
            near[i] = d;
            far[i] = d;
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

/// True when every point lies within `thickness` of its cell's near or far
/// surface.
pub fn is_projectable(dms: &DepthMapSet, points: &[LocalPoint], thickness: i32) -> bool {
    points.iter().all(|p| {
        let (u, v, d) = dms.axis.split(p);
        let i = v * dms.side + u;
        let (near, far) = (dms.near[i], dms.far[i]);
        (d >= near && d <= near + thickness) || (d >= far - thickness && d <= far)
    })
}

/// Local points represented by the maps: the near point of every occupied
/// cell plus the far point where it differs. Depths are clamped to the voxel.
pub fn unproject_local(dms: &DepthMapSet) -> Vec<LocalPoint> {
    let side = dms.side;
    let max = side as i32 - 1;
    let mut out = Vec::with_capacity(dms.occupied_count() * 2);
    for v in 0..side {
        for u in 0..side {
            let i = v * side + u;
            if !dms.occupancy[i] {
                continue;
            }
            let near = dms.near[i].clamp(0, max) as u32;
            let far = dms.far[i].clamp(0, max) as u32;
            let p = dms.axis.join(u as u32, v as u32, near);
            out.push([p[0] as u16, p[1] as u16, p[2] as u16]);
            if far != near {
                let q = dms.axis.join(u as u32, v as u32, far);
                out.push([q[0] as u16, q[1] as u16, q[2] as u16]);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Global coordinates of [`unproject_local`] translated by `origin`.
pub fn unproject(dms: &DepthMapSet, origin: [u32; 3]) -> Vec<[u32; 3]> {
    unproject_local(dms)
        .into_iter()
        .map(|p| [origin[0] + p[0] as u32, origin[1] + p[1] as u32, origin[2] + p[2] as u32])
        .collect()
}
