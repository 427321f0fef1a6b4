//! Studio-swing BT.601 YCbCr, kept in floating point until the final encode.

use std::sync::LazyLock;

use super::{quantize, Plane, RgbImage};
use crate::error::{Error, Result};

const FORWARD: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];
const OFFSET: [f64; 3] = [16.0, 128.0, 128.0];

// Inverse of FORWARD / 255.
static INVERSE: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| {
    let m = FORWARD.map(|row| row.map(|v| v / 255.0));
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    [
        [cof(1, 2, 1, 2) / det, -cof(0, 2, 1, 2) / det, cof(0, 1, 1, 2) / det],
        [-cof(1, 2, 0, 2) / det, cof(0, 2, 0, 2) / det, -cof(0, 1, 0, 2) / det],
        [cof(1, 2, 0, 1) / det, -cof(0, 2, 0, 1) / det, cof(0, 1, 0, 1) / det],
    ]
});

#[derive(Clone, Debug, PartialEq)]
pub struct YCbCr {
    pub y: Plane,
    pub cb: Plane,
    pub cr: Plane,
}

pub fn rgb_to_ycbcr(img: &RgbImage) -> YCbCr {
    let (h, w) = (img.height(), img.width());
    let mut planes = [
        Vec::with_capacity(h * w),
        Vec::with_capacity(h * w),
        Vec::with_capacity(h * w),
    ];
    for px in img.samples().chunks_exact(3) {
        let rgb = [px[0] as f64, px[1] as f64, px[2] as f64];
        for (ch, plane) in planes.iter_mut().enumerate() {
            let row = FORWARD[ch];
            plane.push(OFFSET[ch] + (row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]) / 255.0);
        }
    }
    let [y, cb, cr] = planes.map(|v| Plane::new(h, w, v).expect("finite values of the right length"));
    YCbCr { y, cb, cr }
}

/// Converts back to RGB with a single final rounding per sample.
pub fn ycbcr_to_rgb(y: &Plane, cb: &Plane, cr: &Plane) -> Result<RgbImage> {
    let (h, w) = (y.height(), y.width());
    for p in [cb, cr] {
        if (p.height(), p.width()) != (h, w) {
            return Err(Error::ShapeMismatch {
                expected: (h, w, 1),
                found: (p.height(), p.width(), 1),
            });
        }
    }
    let inv = &*INVERSE;
    let mut samples = Vec::with_capacity(3 * h * w);
    for i in 0..h * w {
        let d = [
            y.values()[i] - OFFSET[0],
            cb.values()[i] - OFFSET[1],
            cr.values()[i] - OFFSET[2],
        ];
        for row in inv {
            samples.push(quantize(row[0] * d[0] + row[1] * d[1] + row[2] * d[2]));
        }
    }
    RgbImage::new(h, w, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn single(rgb: [u8; 3]) -> YCbCr {
        rgb_to_ycbcr(&RgbImage::new(1, 1, rgb.to_vec()).unwrap())
    }

    #[test]
    fn black_and_white_points() {
        let black = single([0, 0, 0]);
        assert_eq!((black.y.get(0, 0), black.cb.get(0, 0), black.cr.get(0, 0)), (16.0, 128.0, 128.0));
        let white = single([255, 255, 255]);
        assert!((white.y.get(0, 0) - 235.0).abs() < 1e-12);
        assert!((white.cb.get(0, 0) - 128.0).abs() < 1e-12);
        assert!((white.cr.get(0, 0) - 128.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_within_half_code_value() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
        let samples: Vec<u8> = (0..3 * 64 * 48).map(|_| rng.gen()).collect();
        let img = RgbImage::new(64, 48, samples).unwrap();
        let ycc = rgb_to_ycbcr(&img);
        let back = ycbcr_to_rgb(&ycc.y, &ycc.cb, &ycc.cr).unwrap();
        let max_err = img
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(&a, &b)| (a as i32 - b as i32).abs())
            .max()
            .unwrap();
        assert!(max_err as f64 <= 0.51, "max error {max_err}");
    }

    #[test]
    fn mismatched_planes_are_rejected() {
        let y = Plane::filled(2, 2, 16.0);
        let c = Plane::filled(2, 3, 128.0);
        assert!(ycbcr_to_rgb(&y, &c, &c).is_err());
    }
}
