//! Vector quantization codebooks and deterministic k-means training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{StreamError, TrainError};

const MAX_ITERATIONS: usize = 100;
const MIN_RELATIVE_IMPROVEMENT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    codewords: Vec<f64>,
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Codebook {
    pub fn new(dim: usize, codewords: Vec<f64>) -> Self {
        assert!(dim > 0 && codewords.len().is_multiple_of(dim) && !codewords.is_empty());
        Self { dim, codewords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.codewords.len() / self.dim
    }

    /// Fixed index width in bits.
    pub fn index_bits(&self) -> u32 {
        self.size().trailing_zeros()
    }

    pub fn codewords(&self) -> &[f64] {
        &self.codewords
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.codewords[i * self.dim..(i + 1) * self.dim]
    }

    /// Nearest codeword by squared distance; ties go to the smallest index.
    pub fn encode(&self, v: &[f64]) -> u32 {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.codewords.chunks_exact(self.dim).enumerate() {
            let d = dist2(c, v);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best as u32
    }

    pub fn decode(&self, index: u32) -> Result<&[f64], StreamError> {
        if index as usize >= self.size() {
            return Err(StreamError::InvalidField(format!(
                "codeword index {index} >= codebook size {}",
                self.size()
            )));
        }
        Ok(self.codeword(index as usize))
    }

    pub fn parameter_count(&self) -> usize {
        self.codewords.len()
    }

    /// k-means with k-means++ seeding. Deterministic for a given
    /// `(vectors, size, seed)`.
    pub fn train(vectors: &[f64], dim: usize, size: usize, seed: u64) -> Result<Self, TrainError> {
        if size == 0 || !size.is_power_of_two() {
            return Err(TrainError::Degenerate(format!("codebook size {size} is not a power of two")));
        }
        let n = vectors.len() / dim;
        if n < size {
            return Err(TrainError::InsufficientSamples {
                level: "codebook".into(),
                have: n,
                need: size,
            });
        }
        let points: Vec<&[f64]> = vectors.chunks_exact(dim).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = seed_plus_plus(&points, size, &mut rng);
        let mut previous = f64::INFINITY;
        for _ in 0..MAX_ITERATIONS {
            let assign: Vec<(usize, f64)> = points
                .par_iter()
                .map(|p| {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (k, c) in centroids.chunks_exact(dim).enumerate() {
                        let d = dist2(c, p);
                        if d < best_d {
                            best = k;
                            best_d = d;
                        }
                    }
                    (best, best_d)
                })
                .collect();
            let inertia: f64 = assign.iter().map(|a| a.1).sum();
            let mut sums = vec![0.0; size * dim];
            let mut counts = vec![0usize; size];
            for (p, &(k, _)) in points.iter().zip(&assign) {
                counts[k] += 1;
                for (s, v) in sums[k * dim..(k + 1) * dim].iter_mut().zip(p.iter()) {
                    *s += v;
                }
            }
            // empty clusters move to the points farthest from their centroid
            let mut taken = vec![false; n];
            for k in 0..size {
                if counts[k] > 0 {
                    for j in 0..dim {
                        centroids[k * dim + j] = sums[k * dim + j] / counts[k] as f64;
                    }
                    continue;
                }
                let mut far = None;
                let mut far_d = -1.0;
                for (i, a) in assign.iter().enumerate() {
                    if !taken[i] && a.1 > far_d {
                        far = Some(i);
                        far_d = a.1;
                    }
                }
                if let Some(i) = far {
                    taken[i] = true;
                    centroids[k * dim..(k + 1) * dim].copy_from_slice(points[i]);
                }
            }
            let converged = previous.is_finite()
                && (previous <= 0.0 || (previous - inertia) / previous < MIN_RELATIVE_IMPROVEMENT);
            if inertia == 0.0 || converged {
                break;
            }
            previous = inertia;
        }
        Ok(Self {
            dim,
            codewords: centroids,
        })
    }
}

fn seed_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len();
    let dim = points[0].len();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(points[first]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, points[first])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding landing on an already-chosen point
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap();
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick];
        centroids.extend_from_slice(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }
    centroids
}
