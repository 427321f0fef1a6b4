use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{quantize, Plane};
use crate::error::{Error, Result};

/// PSNR in dB between two 8-bit-quantised planes after shaving `shave`
/// pixels from every border. Identical planes give `f64::INFINITY`.
pub fn psnr(a: &Plane, b: &Plane, shave: usize) -> Result<f64> {
    let (h, w) = (a.height(), a.width());
    if (b.height(), b.width()) != (h, w) {
        return Err(Error::ShapeMismatch {
            expected: (h, w, 1),
            found: (b.height(), b.width(), 1),
        });
    }
    if 2 * shave >= h.min(w) {
        return Err(Error::OverShave {
            shave,
            height: h,
            width: w,
        });
    }
    let mut sum = 0u64;
    for y in shave..h - shave {
        for x in shave..w - shave {
            let d = i64::from(quantize(a.get(y, x))) - i64::from(quantize(b.get(y, x)));
            sum += (d * d) as u64;
        }
    }
    if sum == 0 {
        return Ok(f64::INFINITY);
    }
    let n = ((h - 2 * shave) * (w - 2 * shave)) as f64;
    let mse = sum as f64 / n;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub n: usize,
    pub t: f64,
    /// Two-sided.
    pub p: f64,
}

/// Paired t-test on per-image differences.
pub fn paired_t_test(diffs: &[f64]) -> Result<TTest> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidShape("paired differences must be finite".into()));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = mean * (n as f64).sqrt() / var.sqrt();
    Ok(TTest {
        n,
        t,
        p: two_sided_p(t, (n - 1) as f64),
    })
}

/// Two-sided tail probability of Student's t with `dof` degrees of freedom.
pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof).expect("degrees of freedom are positive");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ln_gamma(x: f64) -> f64 {
        // Lanczos, g = 7.
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let mut a = C[0];
        let t = x + 7.5;
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }

    /// `2 * integral_{|t|}^{inf} pdf`, via Simpson's rule on `[0, |t|]`.
    fn simpson_p(t: f64, dof: f64) -> f64 {
        let norm = (ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0)).exp() / (dof * PI).sqrt();
        let pdf = |x: f64| norm * (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
        let n = 20_000;
        let h = t.abs() / n as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - 2.0 * s * h / 3.0
    }

    fn plane(v: f64) -> Plane {
        Plane::filled(8, 8, v)
    }

    #[test]
    fn analytic_values() {
        assert_eq!(psnr(&plane(0.0), &plane(255.0), 0).unwrap(), 0.0);
        let one = psnr(&plane(10.0), &plane(11.0), 1).unwrap();
        assert!((one - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((one - 48.1308).abs() < 1e-3);
        assert_eq!(psnr(&plane(3.0), &plane(3.0), 2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quantises_before_scoring() {
        // 3.4 and 2.6 both round to 3.
        assert_eq!(psnr(&plane(3.4), &plane(2.6), 0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&plane(-40.0), &plane(300.0), 0).unwrap(), 0.0);
    }

    #[test]
    fn shave_excludes_borders() {
        let a = Plane::from_fn(6, 6, |y, x| if y == 0 || x == 5 { 200.0 } else { 50.0 });
        assert_eq!(psnr(&a, &plane(50.0).crop(0, 0, 6, 6), 1).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &plane(50.0).crop(0, 0, 6, 6), 0).unwrap().is_finite());
    }

    #[test]
    fn psnr_errors() {
        assert!(matches!(psnr(&plane(0.0), &Plane::filled(8, 7, 0.0), 0), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(psnr(&plane(0.0), &plane(0.0), 4), Err(Error::OverShave { .. })));
    }

    #[test]
    fn t_test_examples() {
        let r = paired_t_test(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
        assert!(matches!(paired_t_test(&[1.0; 4]), Err(Error::ZeroVariance)));
        assert!(matches!(paired_t_test(&[1.0]), Err(Error::TooFewSamples(1))));
    }

    #[test]
    fn p_value_matches_quadrature() {
        let p = two_sided_p(2.0, 29.0);
        assert!((p - 0.0549).abs() < 1e-3, "{p}");
        for (t, dof) in [(2.0, 29.0), (0.5, 3.0), (3.7, 9.0), (1.1, 1.0), (2.5, 60.0)] {
            let oracle = simpson_p(t, dof);
            assert!((two_sided_p(t, dof) - oracle).abs() < 1e-8, "t={t} dof={dof}");
        }
    }

    proptest! {
        #[test]
        fn psnr_is_symmetric(seed in any::<u64>(), shave in 0usize..3) {
            let f = |s: u64| Plane::from_fn(9, 10, move |y, x| ((s.wrapping_mul(y as u64 * 31 + x as u64 + 7) >> 13) % 256) as f64);
            let (a, b) = (f(seed), f(seed ^ 0x5555));
            prop_assert_eq!(psnr(&a, &b, shave).unwrap(), psnr(&b, &a, shave).unwrap());
        }

        #[test]
        fn psnr_falls_with_noise(amp in 1u32..100) {
            let base = Plane::filled(8, 8, 120.0);
            let noisy = |a: f64| Plane::from_fn(8, 8, |y, x| 120.0 + if (y + x) % 2 == 0 { a } else { -a });
            let lo = psnr(&base, &noisy(f64::from(amp)), 0).unwrap();
            let hi = psnr(&base, &noisy(f64::from(amp + 1)), 0).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn t_test_is_antisymmetric(d in proptest::collection::vec(-5.0f64..5.0, 3..20)) {
            prop_assume!(d.iter().any(|v| (v - d[0]).abs() > 1e-6));
            let a = paired_t_test(&d).unwrap();
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            let b = paired_t_test(&neg).unwrap();
            prop_assert!((a.t + b.t).abs() <= 1e-12 * a.t.abs().max(1.0));
            prop_assert!((a.p - b.p).abs() < 1e-12);
        }
    }
}
