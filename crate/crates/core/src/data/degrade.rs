//! The HR -> LR degradation: separable Gaussian blur and decimation by `r`.

use super::Plane;
use crate::error::{Error, Result};

/// Below this the blur is treated as a point sample.
pub const SIGMA_EPSILON: f64 = 1e-8;

pub fn default_sigma(r: usize) -> f64 {
    r as f64 / 3.0
}

/// Crops to `(floor(H/r)*r) x (floor(W/r)*r)`, anchored at the top-left.
pub fn modcrop(plane: &Plane, r: usize) -> Result<Plane> {
    if r == 0 {
        return Err(Error::InvalidShape("scale must be >= 1".into()));
    }
    let (h, w) = (plane.height(), plane.width());
    if h < r || w < r {
        return Err(Error::ImageTooSmall { height: h, width: w, r });
    }
    let (ch, cw) = (h / r * r, w / r * r);
    if (ch, cw) == (h, w) {
        return Ok(plane.clone());
    }
    Ok(plane.crop(0, 0, ch, cw))
}

/// Blurs `hr` with a normalized Gaussian of standard deviation `sigma`
/// (radius `ceil(3 sigma)`, clamp-to-edge) and decimates by `r`.
///
/// LR sample `j` is the blurred signal evaluated at HR position
/// `r*j + (r-1)/2`, the centre of the `r x r` block it summarises; for even
/// `r` the taps sit at half-integer offsets. This keeps LR and HR grids
/// centre-aligned, which is the alignment bicubic upscaling assumes.
pub fn gaussian_degrade(hr: &Plane, r: usize, sigma: f64) -> Result<Plane> {
    if r == 0 {
        return Err(Error::InvalidShape("scale must be >= 1".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidShape(format!("sigma must be >= 0, got {sigma}")));
    }
    let (h, w) = (hr.height(), hr.width());
    for (what, value) in [("height", h), ("width", w)] {
        if value % r != 0 {
            return Err(Error::NotDivisible { what, value, divisor: r });
        }
    }
    if r == 1 && sigma <= SIGMA_EPSILON {
        return Ok(hr.clone());
    }
    let taps = Taps::new(r, sigma);
    let (lh, lw) = (h / r, w / r);

    // Horizontal pass: h x lw.
    let mut tmp = vec![0.0; h * lw];
    for y in 0..h {
        let row = &hr.values()[y * w..(y + 1) * w];
        for j in 0..lw {
            tmp[y * lw + j] = taps.apply(j, w, |i| row[i]);
        }
    }
    // Vertical pass: lh x lw.
    let mut out = vec![0.0; lh * lw];
    for j in 0..lh {
        for x in 0..lw {
            out[j * lw + x] = taps.apply(j, h, |i| tmp[i * lw + x]);
        }
    }
    Plane::new(lh, lw, out)
}

/// Normalized 1-D taps relative to the first HR index they cover.
struct Taps {
    r: usize,
    // Offset of the first tap from `r * j`.
    first: isize,
    weights: Vec<f64>,
}

impl Taps {
    fn new(r: usize, sigma: f64) -> Self {
        let centre = (r as f64 - 1.0) / 2.0;
        let (lo, hi, weights): (isize, isize, Vec<f64>) = if sigma <= SIGMA_EPSILON {
            let lo = centre.floor() as isize;
            let hi = centre.ceil() as isize;
            (lo, hi, vec![1.0; (hi - lo + 1) as usize])
        } else {
            let radius = (3.0 * sigma).ceil();
            let lo = (centre - radius).ceil() as isize;
            let hi = (centre + radius).floor() as isize;
            let w = (lo..=hi)
                .map(|i| {
                    let d = i as f64 - centre;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            (lo, hi, w)
        };
        debug_assert_eq!(weights.len(), (hi - lo + 1) as usize);
        let total: f64 = weights.iter().sum();
        Taps {
            r,
            first: lo,
            weights: weights.into_iter().map(|v| v / total).collect(),
        }
    }

    #[inline]
    fn apply(&self, j: usize, len: usize, sample: impl Fn(usize) -> f64) -> f64 {
        let base = (self.r * j) as isize + self.first;
        let last = len as isize - 1;
        self.weights
            .iter()
            .enumerate()
            .map(|(t, &wt)| wt * sample((base + t as isize).clamp(0, last) as usize))
            .sum()
    }
}
