//! In-memory image buffer.
//!
//! Layout matches the on-disk raster format: row-major in `y`, then `x`,
//! channels interleaved innermost.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::num::Real;

/// Dense interleaved image with `channels` values per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    /// Allocates a zero-filled image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::zero(); width * height * channels],
        }
    }

    /// Wraps an existing buffer; `data.len()` must equal `w * h * c`.
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::shape(
                "image buffer",
                width * height * channels,
                data.len(),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    fn base(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, ch: usize) -> T {
        self.data[self.base(x, y) + ch]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, ch: usize) -> &mut T {
        let i = self.base(x, y) + ch;
        &mut self.data[i]
    }

    /// Reads the first three channels as a vector (RGB access).
    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> Vec3<T> {
        let b = self.base(x, y);
        Vec3::new(self.data[b], self.data[b + 1], self.data[b + 2])
    }

    #[inline]
    pub fn set_rgb(&mut self, x: usize, y: usize, v: Vec3<T>) {
        let b = self.base(x, y);
        self.data[b] = v.x;
        self.data[b + 1] = v.y;
        self.data[b + 2] = v.z;
    }

    /// Box-filter downsample to `(out_w, out_h)`. Each output pixel averages
    /// the input pixels whose centers fall in its footprint; dimensions do not
    /// need to divide evenly.
    pub fn downsample(&self, out_w: usize, out_h: usize) -> Image<T> {
        let mut out = Image::zeros(out_w, out_h, self.channels);
        for oy in 0..out_h {
            // Input row range [y0, y1) covered by this output row.
            let y0 = oy * self.height / out_h;
            let y1 = (((oy + 1) * self.height).div_ceil(out_h)).max(y0 + 1);
            for ox in 0..out_w {
                let x0 = ox * self.width / out_w;
                let x1 = (((ox + 1) * self.width).div_ceil(out_w)).max(x0 + 1);
                let inv_n = T::one() / T::of_usize((y1 - y0) * (x1 - x0));
                for ch in 0..self.channels {
                    let mut acc = T::zero();
                    for y in y0..y1.min(self.height) {
                        for x in x0..x1.min(self.width) {
                            acc = acc + self.at(x, y, ch);
                        }
                    }
                    *out.at_mut(ox, oy, ch) = acc * inv_n;
                }
            }
        }
        out
    }

    /// Converts the scalar type (e.g. `f32` storage to `f64` math).
    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Largest absolute per-value difference against another image.
    pub fn max_abs_diff(&self, other: &Image<T>) -> T {
        assert_eq!(self.data.len(), other.data.len(), "image shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// Mean squared difference over all values.
    pub fn mse(&self, other: &Image<T>) -> T {
        assert_eq!(self.data.len(), other.data.len(), "image shape mismatch");
        let sum: T = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum();
        sum / T::of_usize(self.data.len())
    }
}
