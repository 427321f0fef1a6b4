//! AVX-512 register-blocked kernel for the strided convolution product.
//!
//! Computes `c[m][n0..n0+8*NV] = sum_{ky, j} a[m*cs + ky*row + j] * b[(ky*kc + j)*np + n]`
//! for every output position `m`, keeping a block of `MR` positions by
//! `8*NV` channels in registers for the whole reduction.

#[cfg(target_arch = "x86_64")]
use std::arch::x86_64::{__m512d, _mm512_fmadd_pd, _mm512_loadu_pd, _mm512_set1_pd, _mm512_setzero_pd, _mm512_storeu_pd};

/// Channel counts handled by the kernel must be padded to this multiple.
pub(super) const LANES: usize = 8;

pub(super) fn available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx512f")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Shape of one strided product.
#[derive(Clone, Copy, Debug)]
pub(super) struct Strided {
    /// Output positions.
    pub m: usize,
    /// Kernel rows.
    pub k: usize,
    /// Reduction length per kernel row.
    pub kc: usize,
    /// Element step between consecutive output positions in `a`.
    pub cs: usize,
    /// Element step between kernel rows in `a`.
    pub row: usize,
    /// Row length of `b` and `c`; a multiple of [`LANES`].
    pub np: usize,
}

/// Overwrites `c` (`m x np`, row-major). Panics if the kernel is
/// unavailable or any access would fall outside the slices.
pub(super) fn strided_product(s: Strided, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(available(), "AVX-512 kernel requested on an unsupported CPU");
    assert!(s.np.is_multiple_of(LANES) && s.np > 0, "padded width must be a positive multiple of {LANES}");
    if s.m == 0 || s.k == 0 || s.kc == 0 {
        c[..s.m * s.np].fill(0.0);
        return;
    }
    assert!((s.m - 1) * s.cs + (s.k - 1) * s.row + s.kc <= a.len(), "strided product: A out of bounds");
    assert!(s.k * s.kc * s.np <= b.len(), "strided product: B out of bounds");
    assert!(s.m * s.np <= c.len(), "strided product: C out of bounds");
    #[cfg(target_arch = "x86_64")]
    // SAFETY: avx512f is present (asserted above) and the asserts bound every
    // offset the kernel forms: reads of `a` stay below
    // (m-1)*cs + (k-1)*row + kc, reads of `b` below k*kc*np and writes of `c`
    // below m*np.
    unsafe {
        dispatch(s, a.as_ptr(), b.as_ptr(), c.as_mut_ptr());
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn dispatch(s: Strided, a: *const f64, b: *const f64, c: *mut f64) {
    let mut n0 = 0;
    while n0 < s.np {
        match s.np - n0 {
            rem if rem >= 32 => {
                run::<4, 6>(s, n0, a, b, c);
                n0 += 32;
            }
            rem if rem >= 16 => {
                run::<2, 12>(s, n0, a, b, c);
                n0 += 16;
            }
            _ => {
                run::<1, 16>(s, n0, a, b, c);
                n0 += 8;
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn run<const NV: usize, const MR: usize>(s: Strided, n0: usize, a: *const f64, b: *const f64, c: *mut f64) {
    let mut m0 = 0;
    while m0 + MR <= s.m {
        block::<NV, MR>(s, m0, n0, a, b, c);
        m0 += MR;
    }
    while m0 < s.m {
        block::<NV, 1>(s, m0, n0, a, b, c);
        m0 += 1;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[inline]
unsafe fn block<const NV: usize, const MR: usize>(
    s: Strided,
    m0: usize,
    n0: usize,
    a: *const f64,
    b: *const f64,
    c: *mut f64,
) {
    let mut acc: [[__m512d; NV]; MR] = [[_mm512_setzero_pd(); NV]; MR];
    for ky in 0..s.k {
        let arow = a.add(m0 * s.cs + ky * s.row);
        let brow = b.add(ky * s.kc * s.np + n0);
        for j in 0..s.kc {
            let mut bv: [__m512d; NV] = [_mm512_setzero_pd(); NV];
            for (v, slot) in bv.iter_mut().enumerate() {
                *slot = _mm512_loadu_pd(brow.add(j * s.np + LANES * v));
            }
            for (r, lane) in acc.iter_mut().enumerate() {
                let av = _mm512_set1_pd(*arow.add(r * s.cs + j));
                for (v, slot) in lane.iter_mut().enumerate() {
                    *slot = _mm512_fmadd_pd(av, bv[v], *slot);
                }
            }
        }
    }
    for (r, lane) in acc.iter().enumerate() {
        for (v, slot) in lane.iter().enumerate() {
            _mm512_storeu_pd(c.add((m0 + r) * s.np + n0 + LANES * v), *slot);
        }
    }
}
