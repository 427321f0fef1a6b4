use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Subtracted after scaling to `[0, 1]` so network data is zero-centred.
pub const NETWORK_OFFSET: f64 = 0.5;

/// One image channel as floating point samples, nominally in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape(format!("plane dimensions must be >= 1, got {height}x{width}")));
        }
        if values.len() != height * width {
            return Err(Error::InvalidShape(format!(
                "{height}x{width} plane needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("plane values must be finite".into()));
        }
        Ok(Plane { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::from_fn(height, width, |_, _| value)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height >= 1 && width >= 1, "plane dimensions must be >= 1");
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Plane { height, width, values }
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| b as f64).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Plane {
        assert!(y0 + height <= self.height && x0 + width <= self.width, "crop out of bounds");
        Plane::from_fn(height, width, |y, x| self.get(y0 + y, x0 + x))
    }

    /// Rounded and clamped to 8-bit code values.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|&v| quantize(v)).collect()
    }

    /// `H x W x 1` tensor in the network's range: `v / 255 - 0.5`.
    pub fn to_network_tensor(&self) -> Tensor3 {
        let values = self.values.iter().map(|v| v / 255.0 - NETWORK_OFFSET).collect();
        Tensor3::from_parts(self.height, self.width, 1, values)
    }

    /// Inverse of [`to_network_tensor`](Self::to_network_tensor); takes channel 0.
    pub fn from_network_tensor(t: &Tensor3) -> Plane {
        Plane::from_fn(t.height(), t.width(), |y, x| (t.get(y, x, 0) + NETWORK_OFFSET) * 255.0)
    }
}

/// Round half away from zero, then clamp to `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Interleaved 8-bit RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    samples: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, samples: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape(format!("image dimensions must be >= 1, got {height}x{width}")));
        }
        if samples.len() != 3 * height * width {
            return Err(Error::InvalidShape(format!(
                "{height}x{width} RGB image needs {} samples, got {}",
                3 * height * width,
                samples.len()
            )));
        }
        Ok(RgbImage { height, width, samples })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }
}
