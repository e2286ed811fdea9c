//! Synthetic voxelized surfaces for training corpora and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pointcloud::{Point, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Voxels within half a voxel of a sphere surface.
    SphereShell { center: [f64; 3], radius: f64 },
    /// Axis-aligned rectangle at `axis = offset`, spanning `lo..hi` on the
    /// two other axes (in increasing axis order).
    Plane { axis: usize, offset: u32, lo: [u32; 2], hi: [u32; 2] },
    /// Open cylinder along `axis` over `lo..hi`; `center` is given on the
    /// two other axes.
    Cylinder { axis: usize, center: [f64; 2], radius: f64, lo: u32, hi: u32 },
    /// The six faces of the box `lo..=hi`.
    BoxSurface { lo: [u32; 3], hi: [u32; 3] },
}

fn push(out: &mut Vec<Point>, p: [i64; 3], limit: i64) {
    if p.iter().all(|&c| (0..limit).contains(&c)) {
        out.push(p.map(|c| c as u32));
    }
}

fn with_axis(axis: usize, along: i64, u: i64, v: i64) -> [i64; 3] {
    match axis {
        0 => [along, u, v],
        1 => [u, along, v],
        _ => [u, v, along],
    }
}

impl Shape {
    fn rasterize(&self, limit: i64, out: &mut Vec<Point>) {
        match *self {
            Shape::SphereShell { center, radius } => {
                let (inner2, outer2) = ((radius - 0.5).max(0.0).powi(2), (radius + 0.5).powi(2));
                let r = radius.ceil() as i64 + 1;
                let c = center.map(|v| v.round() as i64);
                for x in c[0] - r..=c[0] + r {
                    for y in c[1] - r..=c[1] + r {
                        let rest = (x as f64 - center[0]).powi(2) + (y as f64 - center[1]).powi(2);
                        if rest >= outer2 {
                            continue;
                        }
                        // integer z around a possibly fractional centre
                        let base = center[2].floor() as i64;
                        let frac = center[2] - base as f64;
                        for z in base - r..=base + r {
                            let dz = z as f64 - base as f64 - frac;
                            let d2 = rest + dz * dz;
                            if d2 >= inner2 && d2 < outer2 {
                                push(out, [x, y, z], limit);
                            }
                        }
                    }
                }
            }
            Shape::Plane { axis, offset, lo, hi } => {
                for u in lo[0]..hi[0] {
                    for v in lo[1]..hi[1] {
                        push(out, with_axis(axis, offset as i64, u as i64, v as i64), limit);
                    }
                }
            }
            Shape::Cylinder { axis, center, radius, lo, hi } => {
                let (inner2, outer2) = ((radius - 0.5).max(0.0).powi(2), (radius + 0.5).powi(2));
                let cu = center[0].round() as i64;
                let r = radius.ceil() as i64 + 1;
                let mut ring = Vec::new();
                for u in cu - r..=cu + r {
                    let rest = (u as f64 - center[0]).powi(2);
                    let cv = center[1].round() as i64;
                    for v in cv - r..=cv + r {
                        let d2 = rest + (v as f64 - center[1]).powi(2);
                        if d2 >= inner2 && d2 < outer2 {
                            ring.push((u, v));
                        }
                    }
                }
                for t in lo..hi {
                    for &(u, v) in &ring {
                        push(out, with_axis(axis, t as i64, u, v), limit);
                    }
                }
            }
            Shape::BoxSurface { lo, hi } => {
                for axis in 0..3 {
                    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                    let (ua, ub) = (a.min(b), a.max(b));
                    for off in [lo[axis], hi[axis]] {
                        Shape::Plane {
                            axis,
                            offset: off,
                            lo: [lo[ua], lo[ub]],
                            hi: [hi[ua] + 1, hi[ub] + 1],
                        }
                        .rasterize(limit, out);
                    }
                }
            }
        }
    }
}

/// Union of `shapes` clipped to a `2^bit_depth` cube.
pub fn rasterize(shapes: &[Shape], bit_depth: u8) -> PointCloud {
    let limit = 1i64 << bit_depth;
    let mut pts = Vec::new();
    for s in shapes {
        s.rasterize(limit, &mut pts);
    }
    PointCloud::with_bit_depth(pts, bit_depth).expect("points are clipped to the cube")
}

/// Centred sphere shell of the given radius.
pub fn sphere_shell(bit_depth: u8, radius: f64) -> PointCloud {
    let c = (1u32 << bit_depth) as f64 / 2.0;
    rasterize(&[Shape::SphereShell { center: [c; 3], radius }], bit_depth)
}

/// A few random surfaces of random size and placement.
pub fn random_scene(seed: u64, bit_depth: u8) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (1u32 << bit_depth) as f64;
    let count = rng.random_range(1..=3);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let pos = |rng: &mut ChaCha8Rng| rng.random_range(0.2 * n..0.8 * n);
        let size = rng.random_range(0.05 * n..0.3 * n);
        let shape = match rng.random_range(0..4) {
            0 => Shape::SphereShell {
                center: [pos(&mut rng), pos(&mut rng), pos(&mut rng)],
                radius: size,
            },
            1 => {
                let lo = [pos(&mut rng) as u32, pos(&mut rng) as u32];
                Shape::Plane {
                    axis: rng.random_range(0..3),
                    offset: pos(&mut rng) as u32,
                    lo,
                    hi: lo.map(|v| v + size as u32),
                }
            }
            2 => {
                let lo = pos(&mut rng) as u32;
                Shape::Cylinder {
                    axis: rng.random_range(0..3),
                    center: [pos(&mut rng), pos(&mut rng)],
                    radius: size / 2.0,
                    lo,
                    hi: lo + size as u32,
                }
            }
            _ => {
                let lo = [pos(&mut rng) as u32, pos(&mut rng) as u32, pos(&mut rng) as u32];
                Shape::BoxSurface { lo, hi: lo.map(|v| v + size as u32) }
            }
        };
        shapes.push(shape);
    }
    rasterize(&shapes, bit_depth)
}

/// `count` random scenes plus a sphere shell and a plane, for training.
pub fn training_corpus(seed: u64, count: usize, bit_depth: u8) -> Vec<PointCloud> {
    let n = 1u32 << bit_depth;
    let mut out: Vec<PointCloud> = (0..count as u64).map(|i| random_scene(seed.wrapping_add(i), bit_depth)).collect();
    out.push(sphere_shell(bit_depth, n as f64 * 0.3));
    out.push(rasterize(
        &[Shape::Plane { axis: 2, offset: n / 3, lo: [n / 8, n / 8], hi: [7 * n / 8, 7 * n / 8] }],
        bit_depth,
    ));
    out
}
