//! Floating-point abstraction shared by the kernel, detector and bound code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the numeric core: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Sum of `exp(-gamma * ((ax - xs[i])^2 + (ay - ys[i])^2))` over `i`.
    ///
    /// This is the inner loop of every kernel sum, so implementations are
    /// free to use a faster exponential as long as the result stays within
    /// a few ulps per term.
    fn gaussian_row_sum(ax: Self, ay: Self, xs: &[Self], ys: &[Self], gamma: Self) -> Self {
        debug_assert_eq!(xs.len(), ys.len());
        let mut acc = Self::zero();
        for (&x, &y) in xs.iter().zip(ys) {
            let dx = ax - x;
            let dy = ay - y;
            acc = acc + (-(dx * dx + dy * dy) * gamma).exp();
        }
        acc
    }

    /// Lossless-enough conversion from `f64` literals.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }
}

impl Scalar for f32 {}

impl Scalar for f64 {
    fn gaussian_row_sum(ax: f64, ay: f64, xs: &[f64], ys: &[f64], gamma: f64) -> f64 {
        debug_assert_eq!(xs.len(), ys.len());
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the required CPU feature was detected at runtime.
                return unsafe { fast64::row_sum_avx2(ax, ay, xs, ys, gamma) };
            }
        }
        fast64::row_sum(ax, ay, xs, ys, gamma)
    }
}

/// Branch-free `exp` for non-positive arguments, written so that LLVM can
/// vectorize the row loop. Relative error against `exp2` stays below 3e-15 on `[-1000, 0]`;
/// results below `2^-1022` flush to zero.
mod fast64 {
    const LANES: usize = 16;
    // 1.5 * 2^52: adding it rounds to the nearest integer in the low mantissa bits.
    const ROUND_SHIFT: f64 = 6_755_399_441_055_744.0;
    // Taylor coefficients 1/11! .. 1/0! of exp after the leading 1/12!.
    const LEAD: f64 = 1.0 / 479_001_600.0;
    const COEFFS: [f64; 12] = [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ];

    #[inline(always)]
    fn exp2_nonpositive(x0: f64) -> f64 {
        let x = x0.max(-1022.0);
        let t = x + ROUND_SHIFT;
        let n = t - ROUND_SHIFT;
        let r = (x - n) * std::f64::consts::LN_2;
        // Taylor series of exp on |r| <= ln2/2, Horner form.
        let mut p = LEAD;
        for c in COEFFS {
            p = p * r + c;
        }
        let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
        if x0 < -1022.0 {
            0.0
        } else {
            p * scale
        }
    }

    #[inline(always)]
    pub(super) fn row_sum(ax: f64, ay: f64, xs: &[f64], ys: &[f64], gamma: f64) -> f64 {
        let g = gamma * std::f64::consts::LOG2_E;
        let mut lanes = [0.0f64; LANES];
        let xc = xs.chunks_exact(LANES);
        let yc = ys.chunks_exact(LANES);
        let (xr, yr) = (xc.remainder(), yc.remainder());
        for (cx, cy) in xc.zip(yc) {
            for l in 0..LANES {
                let dx = ax - cx[l];
                let dy = ay - cy[l];
                lanes[l] += exp2_nonpositive(-(dx * dx + dy * dy) * g);
            }
        }
        let mut tail = 0.0;
        for (&x, &y) in xr.iter().zip(yr) {
            let dx = ax - x;
            let dy = ay - y;
            tail += exp2_nonpositive(-(dx * dx + dy * dy) * g);
        }
        let mut acc = 0.0;
        for v in lanes {
            acc += v;
        }
        acc + tail
    }

    // Same operations in the same order as `row_sum`, sixteen lanes as four
    // 4-wide registers, so both paths return bit-identical sums.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn row_sum_avx2(ax: f64, ay: f64, xs: &[f64], ys: &[f64], gamma: f64) -> f64 {
        use std::arch::x86_64::*;

        #[inline(always)]
        unsafe fn exp2_v(x0: __m256d) -> __m256d {
            let floor = _mm256_set1_pd(-1022.0);
            let shift = _mm256_set1_pd(ROUND_SHIFT);
            let x = _mm256_max_pd(x0, floor);
            let t = _mm256_add_pd(x, shift);
            let n = _mm256_sub_pd(t, shift);
            let r = _mm256_mul_pd(_mm256_sub_pd(x, n), _mm256_set1_pd(std::f64::consts::LN_2));
            let mut p = _mm256_set1_pd(LEAD);
            for c in COEFFS {
                p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(c));
            }
            let bits = _mm256_slli_epi64(_mm256_add_epi64(_mm256_castpd_si256(t), _mm256_set1_epi64x(1023)), 52);
            let v = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
            let under = _mm256_cmp_pd(x0, floor, _CMP_LT_OQ);
            _mm256_andnot_pd(under, v)
        }

        let g = gamma * std::f64::consts::LOG2_E;
        let (vax, vay, vg) = (_mm256_set1_pd(ax), _mm256_set1_pd(ay), _mm256_set1_pd(-g));
        let mut acc = [_mm256_setzero_pd(); LANES / 4];
        let chunks = xs.len() / LANES;
        for c in 0..chunks {
            let i = c * LANES;
            for (k, a) in acc.iter_mut().enumerate() {
                let dx = _mm256_sub_pd(vax, _mm256_loadu_pd(xs.as_ptr().add(i + 4 * k)));
                let dy = _mm256_sub_pd(vay, _mm256_loadu_pd(ys.as_ptr().add(i + 4 * k)));
                let d = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
                *a = _mm256_add_pd(*a, exp2_v(_mm256_mul_pd(d, vg)));
            }
        }
        let mut lanes = [0.0f64; LANES];
        for (k, a) in acc.iter().enumerate() {
            _mm256_storeu_pd(lanes.as_mut_ptr().add(4 * k), *a);
        }
        let mut tail = 0.0;
        for (&x, &y) in xs[chunks * LANES..].iter().zip(&ys[chunks * LANES..]) {
            let dx = ax - x;
            let dy = ay - y;
            tail += exp2_nonpositive(-(dx * dx + dy * dy) * g);
        }
        let mut acc = 0.0;
        for v in lanes {
            acc += v;
        }
        acc + tail
    }

}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a sequence.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}
