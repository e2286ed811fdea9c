//! Separable Lanczos-3 resampling by a factor of two with edge clamping.

use crate::error::{Error, Result};

const LOBES: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

pub fn lanczos3(x: f64) -> f64 {
    if x.abs() >= LOBES {
        0.0
    } else {
        sinc(x) * sinc(x / LOBES)
    }
}

/// Normalized taps `(source index, weight)` for each output sample.
/// `center(i)` is the output position in source pixel coordinates and
/// `scale` stretches the kernel (2 when decimating).
fn taps(n_in: usize, n_out: usize, center: impl Fn(usize) -> f64, scale: f64) -> Vec<Vec<(usize, f64)>> {
    let support = LOBES * scale;
    (0..n_out)
        .map(|i| {
            let x = center(i);
            let lo = (x - support).ceil() as i64;
            let hi = (x + support).floor() as i64;
            let mut t: Vec<(usize, f64)> = (lo..=hi)
                .map(|j| {
                    let w = lanczos3((j as f64 - x) / scale);
                    (j.clamp(0, n_in as i64 - 1) as usize, w)
                })
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let sum: f64 = t.iter().map(|p| p.1).sum();
            t.iter_mut().for_each(|p| p.1 /= sum);
            t
        })
        .collect()
}

fn down_taps(n_in: usize) -> Vec<Vec<(usize, f64)>> {
    taps(n_in, n_in / 2, |i| 2.0 * i as f64 + 0.5, 2.0)
}

fn up_taps(n_in: usize) -> Vec<Vec<(usize, f64)>> {
    taps(n_in, n_in * 2, |i| i as f64 / 2.0 - 0.25, 1.0)
}

fn resample(img: &Image, row_taps: &[Vec<(usize, f64)>], col_taps: &[Vec<(usize, f64)>]) -> Image {
    let out_cols = col_taps.len();
    let out_rows = row_taps.len();
    let mut horiz = vec![0.0; img.rows * out_cols];
    for r in 0..img.rows {
        for (c, t) in col_taps.iter().enumerate() {
            horiz[r * out_cols + c] = t.iter().map(|&(j, w)| w * img.at(r, j)).sum();
        }
    }
    let mut data = vec![0.0; out_rows * out_cols];
    for (r, t) in row_taps.iter().enumerate() {
        for c in 0..out_cols {
            data[r * out_cols + c] = t.iter().map(|&(j, w)| w * horiz[j * out_cols + c]).sum();
        }
    }
    Image::new(out_rows, out_cols, data)
}

/// Anti-aliased half-resolution image.
pub fn downsample(img: &Image) -> Result<Image> {
    if !img.rows.is_multiple_of(2) || !img.cols.is_multiple_of(2) {
        return Err(Error::Domain(format!("cannot halve a {}x{} image", img.rows, img.cols)));
    }
    if img.rows / 2 < 4 || img.cols / 2 < 4 {
        return Err(Error::Domain(format!(
            "pyramid floor: {}x{} would drop below 4x4",
            img.rows, img.cols
        )));
    }
    Ok(resample(img, &down_taps(img.rows), &down_taps(img.cols)))
}

/// Double-resolution interpolation.
pub fn upsample(img: &Image) -> Image {
    resample(img, &up_taps(img.rows), &up_taps(img.cols))
}
