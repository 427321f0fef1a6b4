//! HR-space deconvolution reference and its LR-space rearrangement.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::{ConvKernel, Tensor3};

/// A filter of `k_s` taps per side with weight spacing `1/r`, applied in HR space.
#[derive(Clone, Debug, PartialEq)]
pub struct BigFilter {
    out_channels: usize,
    in_channels: usize,
    k_s: usize,
    /// `(o, i, ky, kx)` order.
    weights: Vec<f64>,
}

impl BigFilter {
    pub fn new(out_channels: usize, in_channels: usize, k_s: usize, weights: Vec<f64>) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || k_s == 0 {
            return Err(Error::InvalidShape("filter dimensions must be non-zero".into()));
        }
        let expected = out_channels * in_channels * k_s * k_s;
        if weights.len() != expected {
            return Err(Error::InvalidShape(format!(
                "expected {expected} filter weights, got {}",
                weights.len()
            )));
        }
        Ok(BigFilter {
            out_channels,
            in_channels,
            k_s,
            weights,
        })
    }

    pub fn from_fn(
        out_channels: usize,
        in_channels: usize,
        k_s: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut weights = Vec::with_capacity(out_channels * in_channels * k_s * k_s);
        for o in 0..out_channels {
            for i in 0..in_channels {
                for ky in 0..k_s {
                    for kx in 0..k_s {
                        weights.push(f(o, i, ky, kx));
                    }
                }
            }
        }
        BigFilter::new(out_channels, in_channels, k_s, weights)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn k_s(&self) -> usize {
        self.k_s
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.k_s + ky) * self.k_s + kx]
    }

    /// Leading zero-padding of the HR same convolution.
    pub fn pad(&self) -> usize {
        (self.k_s - 1) / 2
    }

    fn check_ratio(&self, r: usize) -> Result<()> {
        if r == 0 || !self.k_s.is_multiple_of(r) {
            return Err(Error::NotDivisible {
                what: "filter size",
                value: self.k_s,
                divisor: r,
            });
        }
        Ok(())
    }
}

/// Places input `(y, x)` at `(r*y, r*x)` and fills the rest with zeros.
pub fn zero_insertion_upsample(t: &Tensor3, r: usize) -> Result<Tensor3> {
    if r == 0 {
        return Err(Error::InvalidShape("upscale ratio must be >= 1".into()));
    }
    let (h, w, c) = t.shape();
    let mut out = Tensor3::zeros(h * r, w * r, c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.set(y * r, x * r, ch, t.get(y, x, ch));
            }
        }
    }
    Ok(out)
}

/// Zero-insertion upsampling followed by a stride-1 same convolution with
/// `big` in HR space, written as plain loops.
pub fn deconv_oracle(lr: &Tensor3, big: &BigFilter, r: usize) -> Result<Tensor3> {
    big.check_ratio(r)?;
    if lr.channels() != big.in_channels {
        return Err(Error::ChannelMismatch {
            expected: big.in_channels,
            found: lr.channels(),
        });
    }
    let up = zero_insertion_upsample(lr, r)?;
    let (hh, hw, _) = up.shape();
    let p = big.pad() as isize;
    let k = big.k_s;
    let mut out = Tensor3::zeros(hh, hw, big.out_channels);
    for y in 0..hh {
        for x in 0..hw {
            for o in 0..big.out_channels {
                let mut acc = 0.0;
                for i in 0..big.in_channels {
                    for ky in 0..k {
                        let sy = y as isize + ky as isize - p;
                        if sy < 0 || sy >= hh as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let sx = x as isize + kx as isize - p;
                            if sx < 0 || sx >= hw as isize {
                                continue;
                            }
                            acc += big.weight(o, i, ky, kx) * up.get(sy as usize, sx as usize, i);
                        }
                    }
                }
                out.set(y, x, o, acc);
            }
        }
    }
    Ok(out)
}

/// LR offsets `t` reached by HR phase `d`: tap `r*t + pad - d` must lie in
/// `0..k_s`.
fn offset_range(k_s: usize, r: usize, pad: usize, d: usize) -> (isize, isize) {
    let (k_s, r, pad, d) = (k_s as isize, r as isize, pad as isize, d as isize);
    let lo = -(pad - d).div_euclid(r);
    let hi = (k_s - 1 - pad + d).div_euclid(r);
    (lo, hi)
}

/// Side length of the LR kernel produced by [`rearrange_filter`]: the phase
/// sub-filters span `k_s / r` taps, centred in the smallest odd window.
pub fn rearranged_kernel_size(k_s: usize, r: usize) -> usize {
    let pad = (k_s - 1) / 2;
    let reach = (0..r)
        .map(|d| offset_range(k_s, r, pad, d))
        .map(|(lo, hi)| (-lo).max(hi))
        .max()
        .unwrap_or(0);
    2 * reach as usize + 1
}

/// LR-space kernel with `r^2 * C_out` output channels whose convolution
/// followed by [`pixel_shuffle`](crate::tensor::pixel_shuffle) reproduces
/// [`deconv_oracle`]. Output channel `C*r*dy + C*dx + o` holds the phase
/// `(dx, dy)` sub-filter for colour `o`: every `r`-th tap of `W_s`, starting
/// at the phase-dependent offset.
pub fn rearrange_filter(big: &BigFilter, r: usize) -> Result<ConvKernel> {
    big.check_ratio(r)?;
    let k_s = big.k_s;
    let pad = big.pad();
    let kk = rearranged_kernel_size(k_s, r);
    let centre = (kk / 2) as isize;
    let (c_out, c_in) = (big.out_channels, big.in_channels);
    let mut kernel = ConvKernel::zeros(c_out * r * r, c_in, kk)?;
    for dy in 0..r {
        for dx in 0..r {
            for o in 0..c_out {
                let channel = c_out * r * dy + c_out * dx + o;
                for i in 0..c_in {
                    for ty in 0..kk {
                        let ky = r as isize * (ty as isize - centre) + pad as isize - dy as isize;
                        if ky < 0 || ky >= k_s as isize {
                            continue;
                        }
                        for tx in 0..kk {
                            let kx = r as isize * (tx as isize - centre) + pad as isize - dx as isize;
                            if kx < 0 || kx >= k_s as isize {
                                continue;
                            }
                            let idx = kernel.weight_index(channel, i, ty, tx);
                            kernel.weights_mut()[idx] = big.weight(o, i, ky as usize, kx as usize);
                        }
                    }
                }
            }
        }
    }
    Ok(kernel)
}

/// Taps of `W_s` that meet a non-zero sample for one HR output phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhasePattern {
    pub dy: usize,
    pub dx: usize,
    pub taps: BTreeSet<(usize, usize)>,
}

/// Finds the active taps of every HR phase by probing [`deconv_oracle`]
/// with one-hot filters on an all-ones LR input, reading outputs well away
/// from the border.
pub fn activation_patterns(k_s: usize, r: usize) -> Result<Vec<PhasePattern>> {
    let side = 2 * k_s.div_ceil(r) + 3;
    let lr = Tensor3::filled(side, side, 1, 1.0);
    let mut patterns: Vec<PhasePattern> = (0..r * r)
        .map(|p| PhasePattern {
            dy: p / r,
            dx: p % r,
            taps: BTreeSet::new(),
        })
        .collect();
    let base = (side / 2) * r;
    for ky in 0..k_s {
        for kx in 0..k_s {
            let probe = BigFilter::from_fn(1, 1, k_s, |_, _, y, x| f64::from(u8::from((y, x) == (ky, kx))))?;
            let out = deconv_oracle(&lr, &probe, r)?;
            for pattern in &mut patterns {
                if out.get(base + pattern.dy, base + pattern.dx, 0) != 0.0 {
                    pattern.taps.insert((ky, kx));
                }
            }
        }
    }
    Ok(patterns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{conv2d_forward, pixel_shuffle, Padding};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_filter(rng: &mut impl Rng, o: usize, i: usize, k: usize) -> BigFilter {
        BigFilter::from_fn(o, i, k, |_, _, _, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    fn random_input(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> Tensor3 {
        Tensor3::from_fn(h, w, c, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn upsample_examples() {
        let t = Tensor3::from_fn(2, 3, 2, |y, x, c| (y * 6 + x * 2 + c) as f64 + 1.0);
        assert_eq!(zero_insertion_upsample(&t, 1).unwrap(), t);
        let up = zero_insertion_upsample(&t, 3).unwrap();
        assert_eq!(up.shape(), (6, 9, 2));
        assert_eq!(up.data().iter().sum::<f64>(), t.data().iter().sum::<f64>());
        let one = zero_insertion_upsample(&Tensor3::filled(1, 1, 1, 5.0), 3).unwrap();
        assert_eq!(one.data(), &[5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn ratio_one_oracle_is_plain_convolution() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let big = random_filter(&mut rng, 2, 3, 5);
        let x = random_input(&mut rng, 7, 6, 3);
        let kernel = rearrange_filter(&big, 1).unwrap();
        assert_eq!(kernel.weights(), big.weights());
        let a = deconv_oracle(&x, &big, 1).unwrap();
        let b = conv2d_forward(&x, &kernel, Padding::Same).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indivisible_filter() {
        let big = BigFilter::from_fn(1, 1, 5, |_, _, _, _| 1.0).unwrap();
        let x = Tensor3::zeros(3, 3, 1);
        assert!(matches!(deconv_oracle(&x, &big, 2), Err(Error::NotDivisible { .. })));
        assert!(matches!(rearrange_filter(&big, 3), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn kernel_sizes() {
        assert_eq!(rearranged_kernel_size(6, 3), 3);
        assert_eq!(rearranged_kernel_size(8, 4), 3);
        assert_eq!(rearranged_kernel_size(4, 2), 3);
        assert_eq!(rearranged_kernel_size(5, 1), 5);
        assert_eq!(rearranged_kernel_size(9, 3), 5);
    }

    #[test]
    fn sub_filters_partition_the_taps() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        for (k, r) in [(6, 3), (8, 4), (4, 2), (6, 2), (9, 3)] {
            let big = random_filter(&mut rng, 1, 1, k);
            let kernel = rearrange_filter(&big, r).unwrap();
            let mut a: Vec<f64> = big.weights().to_vec();
            let mut b: Vec<f64> = kernel.weights().iter().copied().filter(|&v| v != 0.0).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b, "k_s={k} r={r}");
        }
    }

    #[test]
    fn rearranged_conv_matches_oracle_6_3() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
        let big = random_filter(&mut rng, 1, 1, 6);
        let x = random_input(&mut rng, 12, 12, 1);
        let fast = pixel_shuffle(&conv2d_forward(&x, &rearrange_filter(&big, 3).unwrap(), Padding::Same).unwrap(), 3).unwrap();
        let slow = deconv_oracle(&x, &big, 3).unwrap();
        for y in 6..30 {
            for x in 6..30 {
                assert!((fast.get(y, x, 0) - slow.get(y, x, 0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_impulse_all_ones_6_3() {
        let big = BigFilter::from_fn(1, 1, 6, |_, _, _, _| 1.0).unwrap();
        let lr = Tensor3::filled(7, 7, 1, 1.0);
        let out = deconv_oracle(&lr, &big, 3).unwrap();
        for y in 6..15 {
            for x in 6..15 {
                let v = out.get(y, x, 0);
                assert!((1.0..=4.0).contains(&v), "({y}, {x}) sums {v} taps");
            }
        }
    }

    #[test]
    fn pattern_counts() {
        for (k, r) in [(6, 3), (8, 4), (4, 2)] {
            let patterns = activation_patterns(k, r).unwrap();
            let distinct: BTreeSet<_> = patterns.iter().map(|p| p.taps.clone()).collect();
            assert_eq!(distinct.len(), r * r);
            let bound = k.div_ceil(r).pow(2);
            assert!(patterns.iter().all(|p| !p.taps.is_empty() && p.taps.len() <= bound));
        }
    }

    #[test]
    fn oracle_is_linear() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let big = random_filter(&mut rng, 2, 1, 4);
        let a = random_input(&mut rng, 5, 4, 1);
        let b = random_input(&mut rng, 5, 4, 1);
        let sum = Tensor3::from_fn(5, 4, 1, |y, x, c| 2.0 * a.get(y, x, c) - b.get(y, x, c));
        let (fa, fb, fs) = (
            deconv_oracle(&a, &big, 2).unwrap(),
            deconv_oracle(&b, &big, 2).unwrap(),
            deconv_oracle(&sum, &big, 2).unwrap(),
        );
        for i in 0..fs.len() {
            assert!((fs.data()[i] - (2.0 * fa.data()[i] - fb.data()[i])).abs() < 1e-12);
        }
    }
}
