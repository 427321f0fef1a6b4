//! Periodic shuffle between `H x W x C*r^2` and `rH x rW x C`.
//!
//! Output pixel `(x, y, c)` (x = column, y = row) reads input pixel
//! `(x / r, y / r)` at channel `C*r*(y mod r) + C*(x mod r) + c`.

use super::Tensor3;
use crate::error::{Error, Result};

pub fn pixel_shuffle(input: &Tensor3, r: usize) -> Result<Tensor3> {
    if r == 0 {
        return Err(Error::InvalidShape("upscale ratio must be >= 1".into()));
    }
    let (h, w, cr2) = input.shape();
    if cr2 % (r * r) != 0 {
        return Err(Error::NotDivisible {
            what: "channel count",
            value: cr2,
            divisor: r * r,
        });
    }
    let c = cr2 / (r * r);
    let (oh, ow) = (h * r, w * r);
    let src = input.data();
    let mut out = vec![0.0; oh * ow * c];
    for y in 0..oh {
        let (iy, dy) = (y / r, y % r);
        for x in 0..ow {
            let (ix, dx) = (x / r, x % r);
            let base = (iy * w + ix) * cr2 + c * r * dy + c * dx;
            let dst = (y * ow + x) * c;
            out[dst..dst + c].copy_from_slice(&src[base..base + c]);
        }
    }
    Ok(Tensor3::from_parts(oh, ow, c, out))
}

pub fn pixel_unshuffle(input: &Tensor3, r: usize) -> Result<Tensor3> {
    if r == 0 {
        return Err(Error::InvalidShape("upscale ratio must be >= 1".into()));
    }
    let (oh, ow, c) = input.shape();
    for (what, value) in [("height", oh), ("width", ow)] {
        if value % r != 0 {
            return Err(Error::NotDivisible {
                what,
                value,
                divisor: r,
            });
        }
    }
    let (h, w, cr2) = (oh / r, ow / r, c * r * r);
    let src = input.data();
    let mut out = vec![0.0; h * w * cr2];
    for y in 0..oh {
        let (iy, dy) = (y / r, y % r);
        for x in 0..ow {
            let (ix, dx) = (x / r, x % r);
            let dst = (iy * w + ix) * cr2 + c * r * dy + c * dx;
            let s = (y * ow + x) * c;
            out[dst..dst + c].copy_from_slice(&src[s..s + c]);
        }
    }
    Ok(Tensor3::from_parts(h, w, cr2, out))
}
