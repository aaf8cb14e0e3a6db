use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major RGB image (`height × width × 3`) in linear floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::ShapeError { expected: width * height * 3, found: data.len() });
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Euclidean distance between two images of the same shape.
    pub fn l2_distance(&self, other: &Image) -> f64 {
        debug_assert!(self.same_shape(other));
        crate::math::sqrt(self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    /// Bilinear resampling with pixel-centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut out = Image::new(width, height);
        for (y, x, taps) in bilinear_taps(self.width, self.height, width, height) {
            let mut rgb = [0.0; 3];
            for (src, w) in taps {
                for c in 0..3 {
                    rgb[c] += w * self.data[src * 3 + c];
                }
            }
            out.set_pixel(x, y, rgb);
        }
        out
    }
}

/// Source pixel indices and weights of bilinear resampling from
/// `(sw, sh)` to `(dw, dh)`, one entry per destination pixel.
pub fn bilinear_taps(
    sw: usize,
    sh: usize,
    dw: usize,
    dh: usize,
) -> impl Iterator<Item = (usize, usize, [(usize, f64); 4])> {
    (0..dh).flat_map(move |y| {
        (0..dw).map(move |x| {
            let (x0, x1, fx) = axis_tap(x, sw, dw);
            let (y0, y1, fy) = axis_tap(y, sh, dh);
            (
                y,
                x,
                [
                    (y0 * sw + x0, (1.0 - fx) * (1.0 - fy)),
                    (y0 * sw + x1, fx * (1.0 - fy)),
                    (y1 * sw + x0, (1.0 - fx) * fy),
                    (y1 * sw + x1, fx * fy),
                ],
            )
        })
    })
}

fn axis_tap(i: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let i0 = crate::math::floor(s) as usize;
    let i1 = (i0 + 1).min(src - 1);
    (i0, i1, s - i0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_identity_and_constant() {
        let img = Image::filled(5, 3, [0.2, 0.4, 0.6]);
        assert_eq!(img.resize_bilinear(5, 3), img);
        let up = img.resize_bilinear(11, 7);
        for v in up.data.chunks(3) {
            assert!((v[0] - 0.2).abs() < 1e-12 && (v[2] - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn from_data_checks_shape() {
        assert!(Image::from_data(2, 2, vec![0.0; 11]).is_err());
    }
}
