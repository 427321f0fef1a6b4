//! Dense rank-3 tensors and the primitive operators the network is built from.
//!
//! Layout is row-major `(y, x, c)`: `y` is the row, `x` the column and `c`
//! the channel, so the channel index varies fastest.

mod activation;
mod conv;
mod shuffle;
mod simd;

pub use activation::{activation_derivative, apply_activation, Activation};
pub use conv::{conv2d_backward, conv2d_forward, ConvGradients, ConvKernel, Padding};
pub use shuffle::{pixel_shuffle, pixel_unshuffle};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    /// Zero-filled tensor. Panics on a zero dimension.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(
            height >= 1 && width >= 1 && channels >= 1,
            "tensor dimensions must be >= 1, got {height}x{width}x{channels}"
        );
        Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        let mut t = Self::zeros(height, width, channels);
        t.data.fill(value);
        t
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidShape(format!(
                "dimensions must be >= 1, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidShape(format!(
                "{height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(y, x, c)` at every coordinate.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(height, width, channels);
        let mut i = 0;
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    t.data[i] = f(y, x, c);
                    i += 1;
                }
            }
        }
        t
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert!(y < self.height && x < self.width && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Copies rows `[y0, y1)` into a new tensor.
    pub fn rows(&self, y0: usize, y1: usize) -> Tensor3 {
        assert!(y0 < y1 && y1 <= self.height, "row range {y0}..{y1} out of bounds");
        let stride = self.width * self.channels;
        Tensor3 {
            height: y1 - y0,
            width: self.width,
            channels: self.channels,
            data: self.data[y0 * stride..y1 * stride].to_vec(),
        }
    }

    pub(crate) fn same_shape(&self, other: &Tensor3) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    // Bypasses the shape checks; callers guarantee the invariants.
    pub(crate) fn from_parts(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Tensor3 {
            height,
            width,
            channels,
            data,
        }
    }
}
