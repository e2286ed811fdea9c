//! Saab transform: a fixed DC kernel plus PCA-derived AC kernels.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct SaabTransform {
    dim: usize,
    /// Row-major `dim`×`dim`; row `k` is kernel `k`.
    kernels: Vec<f64>,
    eigenvalues: Vec<f64>,
}

/// Orthonormal basis of the complement of the constant vector (Helmert).
fn dc_complement(d: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(d, d - 1);
    for k in 1..d {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

fn sign_fix(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl SaabTransform {
    /// DC kernel plus a fixed orthonormal AC completion, all eigenvalues 0.
    pub fn identity(dim: usize) -> Self {
        let q = dc_complement(dim);
        let mut kernels = vec![1.0 / (dim as f64).sqrt(); dim];
        for k in 0..dim - 1 {
            let mut col: Vec<f64> = q.column(k).iter().copied().collect();
            sign_fix(&mut col);
            kernels.extend(col);
        }
        Self {
            dim,
            kernels,
            eigenvalues: vec![0.0; dim],
        }
    }

    pub fn from_parts(dim: usize, kernels: Vec<f64>, eigenvalues: Vec<f64>) -> Self {
        assert_eq!(kernels.len(), dim * dim);
        assert_eq!(eigenvalues.len(), dim);
        Self {
            dim,
            kernels,
            eigenvalues,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self, k: usize) -> &[f64] {
        &self.kernels[k * self.dim..(k + 1) * self.dim]
    }

    pub fn kernels(&self) -> &[f64] {
        &self.kernels
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Coefficients `Kᵀ·patch` (one per kernel).
    pub fn forward(&self, patch: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|k| self.kernel(k).iter().zip(patch).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (k, &c) in coeffs.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.kernel(k)) {
                *o += c * w;
            }
        }
        out
    }

    /// `max |KᵀK − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                let dot: f64 = self.kernel(a).iter().zip(self.kernel(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Parameters stored for this transform.
    pub fn parameter_count(&self) -> usize {
        self.dim * self.dim
    }

    /// Fits AC kernels to the covariance of the DC-removed `patches`
    /// (flattened, `dim` values each).
    pub fn fit(patches: &[f64], dim: usize) -> Result<Self, TrainError> {
        let n = patches.len() / dim;
        if n < 2 {
            return Err(TrainError::Degenerate(format!(
                "Saab fit needs at least 2 patches, got {n}"
            )));
        }
        let mut mean = vec![0.0; dim];
        let mut dc_energy = 0.0;
        let ac: Vec<f64> = patches
            .chunks_exact(dim)
            .flat_map(|p| {
                let m = p.iter().sum::<f64>() / dim as f64;
                dc_energy += m * m * dim as f64;
                p.iter().map(move |v| v - m).collect::<Vec<_>>()
            })
            .collect();
        for p in ac.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for p in ac.chunks_exact(dim) {
            for i in 0..dim {
                let di = p[i] - mean[i];
                for j in i..dim {
                    cov[(i, j)] += di * (p[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[(i, j)] / n as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let q = dc_complement(dim);
        let reduced = q.transpose() * &cov * &q;
        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..dim - 1).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut kernels = vec![1.0 / (dim as f64).sqrt(); dim];
        let mut eigenvalues = vec![dc_energy / n as f64];
        for &k in &order {
            let v = &q * eig.eigenvectors.column(k);
            let norm = v.norm();
            let mut col: Vec<f64> = v.iter().map(|x| x / norm).collect();
            sign_fix(&mut col);
            kernels.extend(col);
            eigenvalues.push(eig.eigenvalues[k].max(0.0));
        }
        Ok(Self {
            dim,
            kernels,
            eigenvalues,
        })
    }
}
