//! Point-to-point (D1) and point-to-plane (D2) distortion, normals and PSNR.
//!
//! Both distortions are the larger of the two directional mean squared
//! nearest-neighbour errors. Per-point terms are computed in parallel and
//! summed sequentially in point order, so results do not depend on the
//! worker count.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::kdtree::KdTree;
use super::PointCloud;
use crate::error::{Error, Result};

pub const DEFAULT_NORMAL_NEIGHBOURS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub d1_mse: f64,
    pub d2_mse: f64,
    pub d1_psnr: f64,
    pub d2_psnr: f64,
    pub bpp: f64,
    pub num_points_in: usize,
    pub num_points_out: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "name,d1_mse,d1_psnr,d2_mse,d2_psnr,bpp,points_in,points_out";

    pub fn csv_record(&self, name: &str) -> String {
        format!(
            "{name},{},{},{},{},{},{},{}",
            self.d1_mse,
            fmt_db(self.d1_psnr),
            self.d2_mse,
            fmt_db(self.d2_psnr),
            self.bpp,
            self.num_points_in,
            self.num_points_out
        )
    }
}

pub(crate) fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn ensure_non_empty(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("distortion of an empty cloud".into()));
    }
    Ok(())
}

fn mean_sequential(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Symmetric max-of-means point-to-point distortion.
pub fn d1_distortion(reference: &PointCloud, reconstructed: &PointCloud) -> Result<f64> {
    ensure_non_empty(reference, reconstructed)?;
    let ref_pts = reference.as_f64();
    let rec_pts = reconstructed.as_f64();
    let ref_tree = KdTree::new(ref_pts.clone());
    let rec_tree = KdTree::new(rec_pts.clone());
    let forward: Vec<f64> = ref_pts
        .par_iter()
        .map(|p| rec_tree.nearest(p).unwrap().dist2)
        .collect();
    let backward: Vec<f64> = rec_pts
        .par_iter()
        .map(|p| ref_tree.nearest(p).unwrap().dist2)
        .collect();
    Ok(mean_sequential(&forward).max(mean_sequential(&backward)))
}

fn projected(a: &[f64; 3], b: &[f64; 3], n: &[f64; 3]) -> f64 {
    let e = (b[0] - a[0]) * n[0] + (b[1] - a[1]) * n[1] + (b[2] - a[2]) * n[2];
    e * e
}

/// Symmetric max-of-means point-to-plane distortion; each error vector is
/// projected on the normal of the reference-side point of the pair.
pub fn d2_distortion(
    reference: &PointCloud,
    reconstructed: &PointCloud,
    ref_normals: &[[f64; 3]],
) -> Result<f64> {
    ensure_non_empty(reference, reconstructed)?;
    if ref_normals.len() != reference.len() {
        return Err(Error::Domain(format!(
            "{} normals for {} reference points",
            ref_normals.len(),
            reference.len()
        )));
    }
    let ref_pts = reference.as_f64();
    let rec_pts = reconstructed.as_f64();
    let ref_tree = KdTree::new(ref_pts.clone());
    let rec_tree = KdTree::new(rec_pts.clone());
    let forward: Vec<f64> = ref_pts
        .par_iter()
        .zip(ref_normals.par_iter())
        .map(|(p, n)| {
            let j = rec_tree.nearest(p).unwrap().index;
            projected(p, &rec_pts[j], n)
        })
        .collect();
    let backward: Vec<f64> = rec_pts
        .par_iter()
        .map(|q| {
            let i = ref_tree.nearest(q).unwrap().index;
            projected(&ref_pts[i], q, &ref_normals[i])
        })
        .collect();
    Ok(mean_sequential(&forward).max(mean_sequential(&backward)))
}

/// `10·log10(peak² / mse)` with `peak = 2^bit_depth − 1`.
pub fn geometry_psnr(mse: f64, bit_depth: u8) -> f64 {
    if mse <= 0.0 {
        return f64::INFINITY;
    }
    let peak = ((1u64 << bit_depth) - 1) as f64;
    10.0 * (peak * peak / mse).log10()
}

pub fn estimate_normals(pc: &PointCloud, k: usize) -> Result<Vec<[f64; 3]>> {
    estimate_normals_f64(&pc.as_f64(), k)
}

/// Per-point normal from the covariance of its `k` nearest neighbours
/// (the point included). The sign makes the largest-magnitude component
/// positive.
pub fn estimate_normals_f64(points: &[[f64; 3]], k: usize) -> Result<Vec<[f64; 3]>> {
    if k < 3 || points.len() < k {
        return Err(Error::Domain(format!(
            "normal estimation needs 3 <= k <= |points|, got k={k}, |points|={}",
            points.len()
        )));
    }
    let tree = KdTree::new(points.to_vec());
    Ok(points
        .par_iter()
        .map(|p| {
            let nbrs = tree.knn(p, k);
            let mut mean = Vector3::zeros();
            for n in &nbrs {
                mean += Vector3::from(tree.point(n.index));
            }
            mean /= nbrs.len() as f64;
            let mut cov = Matrix3::zeros();
            for n in &nbrs {
                let d = Vector3::from(tree.point(n.index)) - mean;
                cov += d * d.transpose();
            }
            normal_from_covariance(cov)
        })
        .collect())
}

fn sign_normalize(v: Vector3<f64>) -> [f64; 3] {
    let v = v.normalize();
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    let v = if v[best] < 0.0 { -v } else { v };
    [v[0], v[1], v[2]]
}

pub(crate) fn normal_from_covariance(cov: Matrix3<f64>) -> [f64; 3] {
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if largest <= 1e-12 {
        return [0.0, 0.0, 1.0];
    }
    if middle <= 1e-9 * largest {
        // collinear neighbourhood: any direction orthogonal to the line
        let d: Vector3<f64> = eig.eigenvectors.column(order[2]).into_owned();
        let mut axis = 0;
        for i in 1..3 {
            if d[i].abs() < d[axis].abs() {
                axis = i;
            }
        }
        let mut e = Vector3::zeros();
        e[axis] = 1.0;
        return sign_normalize(e - d * d.dot(&e));
    }
    sign_normalize(eig.eigenvectors.column(order[0]).into_owned())
}

/// Computes the full metrics record for a coded cloud.
pub fn evaluate(
    reference: &PointCloud,
    reconstructed: &PointCloud,
    stream_bits: u64,
    normal_k: usize,
) -> Result<MetricsReport> {
    let d1 = d1_distortion(reference, reconstructed)?;
    let k = normal_k.min(reference.len()).max(3);
    let d2 = if reference.len() >= 3 {
        let normals = estimate_normals(reference, k)?;
        d2_distortion(reference, reconstructed, &normals)?
    } else {
        d1
    };
    let bits = reference.bit_depth();
    Ok(MetricsReport {
        d1_mse: d1,
        d2_mse: d2,
        d1_psnr: geometry_psnr(d1, bits),
        d2_psnr: geometry_psnr(d2, bits),
        bpp: stream_bits as f64 / reference.len() as f64,
        num_points_in: reference.len(),
        num_points_out: reconstructed.len(),
    })
}
