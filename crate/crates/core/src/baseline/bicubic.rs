use crate::data::Plane;
use crate::error::{Error, Result};

const A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four source indices and weights for each destination sample.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = dst_len as f64 / src_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|d| {
            let s = (d as f64 + 0.5) / scale - 0.5;
            let base = s.floor();
            let frac = s - base;
            let mut idx = [0usize; 4];
            let mut wts = [0.0; 4];
            for t in 0..4 {
                let offset = t as f64 - 1.0;
                idx[t] = (base as isize + t as isize - 1).clamp(0, last) as usize;
                wts[t] = keys_kernel(frac - offset);
            }
            (idx, wts)
        })
        .collect()
}

/// Separable bicubic resampling with clamp-to-edge borders and no
/// antialiasing prefilter.
pub fn bicubic_resize(plane: &Plane, out_h: usize, out_w: usize) -> Result<Plane> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidShape(format!("bicubic output must be non-empty, got {out_h}x{out_w}")));
    }
    let (h, w) = (plane.height(), plane.width());
    let cols = axis_taps(w, out_w);
    let rows = axis_taps(h, out_h);
    let src = plane.values();

    let mut horizontal = vec![0.0; h * out_w];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for (x, (idx, wts)) in cols.iter().enumerate() {
            horizontal[y * out_w + x] = (0..4).map(|t| wts[t] * line[idx[t]]).sum();
        }
    }
    let mut out = vec![0.0; out_h * out_w];
    for (y, (idx, wts)) in rows.iter().enumerate() {
        let dst = &mut out[y * out_w..(y + 1) * out_w];
        for t in 0..4 {
            let line = &horizontal[idx[t] * out_w..(idx[t] + 1) * out_w];
            for (d, s) in dst.iter_mut().zip(line) {
                *d += wts[t] * s;
            }
        }
    }
    Plane::new(out_h, out_w, out)
}

/// Upscales by an integer ratio.
pub fn bicubic_upscale(plane: &Plane, r: usize) -> Result<Plane> {
    bicubic_resize(plane, plane.height() * r, plane.width() * r)
}
