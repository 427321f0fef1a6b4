//! Stride-1 2-D cross-correlation (no kernel flip) and its exact gradients.
//!
//! Each convolution is lowered onto `k` GEMM calls, one per kernel row. The
//! input is zero-padded into a buffer of width `Wp`; for a fixed kernel row
//! `ky`, the `k * C_in` taps under output pixel `(y, x)` are contiguous in
//! that buffer and consecutive pixels start `C_in` elements apart. Treating
//! every padded column as an output pixel gives one strided GEMM of
//! `(H_out * Wp) x (k * C_in) x C_out`; the `Wp - W_out` surplus columns are
//! discarded afterwards.

use super::{simd, Tensor3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    /// Zero padding of `(k - 1) / 2` on every side; output keeps the input size.
    #[default]
    Same,
    /// No padding; output shrinks to `(H - k + 1) x (W - k + 1)`.
    Valid,
}

impl Padding {
    pub fn amount(self, k: usize) -> usize {
        match self {
            Padding::Same => (k - 1) / 2,
            Padding::Valid => 0,
        }
    }
}

/// Weights `(o, i, ky, kx)` and per-output-channel bias of one convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    out_channels: usize,
    in_channels: usize,
    k: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        k: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::EvenKernel(k));
        }
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::InvalidShape("kernel channel counts must be >= 1".into()));
        }
        let expected = out_channels * in_channels * k * k;
        if weights.len() != expected {
            return Err(Error::InvalidShape(format!(
                "{out_channels}x{in_channels}x{k}x{k} kernel needs {expected} weights, got {}",
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::InvalidShape(format!(
                "kernel with {out_channels} outputs needs {out_channels} biases, got {}",
                bias.len()
            )));
        }
        Ok(ConvKernel {
            out_channels,
            in_channels,
            k,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Result<Self> {
        Self::new(
            out_channels,
            in_channels,
            k,
            vec![0.0; out_channels * in_channels * k * k],
            vec![0.0; out_channels],
        )
    }

    /// 1x1 kernel that copies every channel through unchanged.
    pub fn identity(channels: usize) -> Self {
        let mut kernel = Self::zeros(channels, channels, 1).expect("valid shape");
        for c in 0..channels {
            kernel.weights[c * channels + c] = 1.0;
        }
        kernel
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    pub fn weight_index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.k + ky) * self.k + kx
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.weight_index(o, i, ky, kx)]
    }

    /// Taps reordered as `[ky][kx][i][o]` for the GEMM lowering.
    fn pack_forward(&self) -> Vec<f64> {
        let (k, ci, co) = (self.k, self.in_channels, self.out_channels);
        let mut packed = vec![0.0; self.weights.len()];
        for o in 0..co {
            for i in 0..ci {
                for ky in 0..k {
                    for kx in 0..k {
                        packed[((ky * k + kx) * ci + i) * co + o] = self.weight(o, i, ky, kx);
                    }
                }
            }
        }
        packed
    }

    /// Spatially flipped, channel-transposed taps `[ky][kx][o][i]`: the
    /// kernel whose correlation with the output gradient yields the input
    /// gradient.
    fn pack_adjoint(&self) -> Vec<f64> {
        let (k, ci, co) = (self.k, self.in_channels, self.out_channels);
        let mut packed = vec![0.0; self.weights.len()];
        for o in 0..co {
            for i in 0..ci {
                for ky in 0..k {
                    for kx in 0..k {
                        packed[((ky * k + kx) * co + o) * ci + i] =
                            self.weight(o, i, k - 1 - ky, k - 1 - kx);
                    }
                }
            }
        }
        packed
    }
}

/// Gradients of `<grad_output, conv(input)>` with respect to each argument.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGradients {
    pub input: Tensor3,
    /// Same `(o, i, ky, kx)` layout as [`ConvKernel::weights`].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn output_dims(input: &Tensor3, kernel: &ConvKernel, padding: Padding) -> Result<(usize, usize)> {
    if input.channels() != kernel.in_channels {
        return Err(Error::ChannelMismatch {
            expected: kernel.in_channels,
            found: input.channels(),
        });
    }
    let k = kernel.k;
    let pad = padding.amount(k);
    let (h, w) = (input.height() + 2 * pad, input.width() + 2 * pad);
    if h < k || w < k {
        return Err(Error::InputTooSmall {
            height: input.height(),
            width: input.width(),
            k,
        });
    }
    Ok((h - k + 1, w - k + 1))
}

pub fn conv2d_forward(input: &Tensor3, kernel: &ConvKernel, padding: Padding) -> Result<Tensor3> {
    output_dims(input, kernel, padding)?;
    let packed = kernel.pack_forward();
    Ok(correlate(
        input,
        &packed,
        kernel.k,
        kernel.out_channels,
        padding.amount(kernel.k),
        Some(&kernel.bias),
    ))
}

pub fn conv2d_backward(
    input: &Tensor3,
    kernel: &ConvKernel,
    grad_output: &Tensor3,
    padding: Padding,
) -> Result<ConvGradients> {
    let (ho, wo) = output_dims(input, kernel, padding)?;
    let expected = (ho, wo, kernel.out_channels);
    if grad_output.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            found: grad_output.shape(),
        });
    }
    let (k, cin, cout) = (kernel.k, kernel.in_channels, kernel.out_channels);
    let pad = padding.amount(k);

    let mut grad_bias = vec![0.0; cout];
    for px in grad_output.data().chunks_exact(cout) {
        for (g, v) in grad_bias.iter_mut().zip(px) {
            *g += v;
        }
    }

    // dW[ky] (k*cin x cout) = A_ky^T (k*cin x M) * G (M x cout), with G laid
    // out on the padded grid and zero in the surplus columns.
    let padded = PaddedInput::new(input, pad, k);
    let wp = padded.width;
    let mut g = vec![0.0; ho * wp * cout];
    for y in 0..ho {
        for x in 0..wo {
            let src = (y * wo + x) * cout;
            let dst = (y * wp + x) * cout;
            g[dst..dst + cout].copy_from_slice(&grad_output.data()[src..src + cout]);
        }
    }
    let m = ho * wp;
    let kc = k * cin;
    let mut packed_grad = vec![0.0; k * kc * cout];
    for ky in 0..k {
        let a = &padded.data[ky * wp * cin..];
        let c = &mut packed_grad[ky * kc * cout..(ky + 1) * kc * cout];
        gemm(kc, m, cout, a, 1, cin, &g, cout, 1, c);
    }
    let mut grad_weights = vec![0.0; kernel.weights.len()];
    for o in 0..cout {
        for i in 0..cin {
            for ky in 0..k {
                for kx in 0..k {
                    grad_weights[kernel.weight_index(o, i, ky, kx)] =
                        packed_grad[((ky * k + kx) * cin + i) * cout + o];
                }
            }
        }
    }

    // The adjoint of a correlation with padding p is a correlation of the
    // output gradient with the flipped kernel and padding k - 1 - p.
    let adjoint = kernel.pack_adjoint();
    let grad_input = correlate(grad_output, &adjoint, k, cin, k - 1 - pad, None);
    debug_assert_eq!(grad_input.shape(), input.shape());

    Ok(ConvGradients {
        input: grad_input,
        weights: grad_weights,
        bias: grad_bias,
    })
}

struct PaddedInput {
    data: Vec<f64>,
    width: usize,
}

impl PaddedInput {
    fn new(input: &Tensor3, pad: usize, k: usize) -> Self {
        let (h, w, c) = input.shape();
        let (hp, wp) = (h + 2 * pad, w + 2 * pad);
        // The last strided row reads (k - 1) * c elements past the grid.
        let mut data = vec![0.0; (hp * wp + k - 1) * c];
        let row = w * c;
        for y in 0..h {
            let dst = ((y + pad) * wp + pad) * c;
            data[dst..dst + row].copy_from_slice(&input.data()[y * row..(y + 1) * row]);
        }
        PaddedInput { data, width: wp }
    }
}

/// Correlation with `pad` zeros on every border. `packed` is `[ky][kx][ci][co]`.
fn correlate(
    input: &Tensor3,
    packed: &[f64],
    k: usize,
    cout: usize,
    pad: usize,
    bias: Option<&[f64]>,
) -> Tensor3 {
    correlate_with(input, packed, k, cout, pad, bias, simd::available())
}

fn correlate_with(
    input: &Tensor3,
    packed: &[f64],
    k: usize,
    cout: usize,
    pad: usize,
    bias: Option<&[f64]>,
    use_simd: bool,
) -> Tensor3 {
    let cin = input.channels();
    let padded = PaddedInput::new(input, pad, k);
    let wp = padded.width;
    let ho = input.height() + 2 * pad + 1 - k;
    let wo = wp + 1 - k;
    let kc = k * cin;

    // Rows are computed over the full padded width; the surplus columns
    // (and padded channels) are dropped afterwards.
    let np = if use_simd { cout.next_multiple_of(simd::LANES) } else { cout };
    let mut out = vec![0.0; ho * wp * np];
    if use_simd {
        let b = if np == cout {
            packed.to_vec()
        } else {
            let mut b = vec![0.0; k * kc * np];
            for (dst, src) in b.chunks_exact_mut(np).zip(packed.chunks_exact(cout)) {
                dst[..cout].copy_from_slice(src);
            }
            b
        };
        let shape = simd::Strided {
            m: ho * wp,
            k,
            kc,
            cs: cin,
            row: wp * cin,
            np,
        };
        simd::strided_product(shape, &padded.data, &b, &mut out);
    } else {
        for ky in 0..k {
            let a = &padded.data[ky * wp * cin..];
            let b = &packed[ky * kc * cout..(ky + 1) * kc * cout];
            gemm(ho * wp, kc, cout, a, cin, 1, b, cout, 1, &mut out);
        }
    }
    if np != cout {
        for p in 0..ho * wp {
            let (y, x) = (p / wp, p % wp);
            if x < wo {
                out.copy_within(p * np..p * np + cout, (y * wo + x) * cout);
            }
        }
    } else if wo != wp {
        for y in 0..ho {
            let src = y * wp * cout;
            out.copy_within(src..src + wo * cout, y * wo * cout);
        }
    }
    out.truncate(ho * wo * cout);
    if let Some(bias) = bias {
        for px in out.chunks_exact_mut(cout) {
            for (v, b) in px.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }
    Tensor3::from_parts(ho, wo, cout, out)
}

/// `c (m x n, row-major dense) += a (m x kk) * b (kk x n)` with arbitrary
/// element strides on `a` and `b`. Rows of `a` may overlap.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    kk: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
) {
    if m == 0 || n == 0 || kk == 0 {
        return;
    }
    assert!((m - 1) * rsa + (kk - 1) * csa < a.len(), "gemm: A out of bounds");
    assert!((kk - 1) * rsb + (n - 1) * csb < b.len(), "gemm: B out of bounds");
    assert!(m * n <= c.len(), "gemm: C out of bounds");
    // SAFETY: the asserts above bound every element matrixmultiply reads
    // from `a` and `b` and writes to `c`; `c` is a distinct mutable borrow
    // with a non-overlapping row-major layout.
    unsafe {
        matrixmultiply::dgemm(
            m,
            kk,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
