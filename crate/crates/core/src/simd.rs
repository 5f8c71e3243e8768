//! Fixed-width `f64` vector used by the sweep kernels.
//!
//! With AVX-512 available at compile time the vector holds eight lanes; otherwise it is
//! `wide::f64x4`. Both expose the same small surface.

#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
// SAFETY (all `unsafe` blocks below): this module is compiled only when avx512f is
// enabled for the whole build, and `__m512d` is plain data of eight `f64`s.
mod imp {
    use std::arch::x86_64::*;
    use std::ops::{Add, Mul, Sub};

    use wide::f64x4;

    pub const LANES: usize = 8;

    #[derive(Clone, Copy, Debug)]
    #[repr(transparent)]
    pub struct V(__m512d);

    impl V {
        pub const ZERO: V = V(unsafe { std::mem::transmute::<[f64; 8], __m512d>([0.0; 8]) });
        pub const ONE: V = V(unsafe { std::mem::transmute::<[f64; 8], __m512d>([1.0; 8]) });

        #[inline(always)]
        pub fn splat(x: f64) -> V {
            V(unsafe { _mm512_set1_pd(x) })
        }

        #[inline(always)]
        pub fn from_slice(s: &[f64]) -> V {
            let a: [f64; 8] = s.try_into().expect("eight lanes");
            V(unsafe { std::mem::transmute::<[f64; 8], __m512d>(a) })
        }

        #[inline(always)]
        pub fn to_array(self) -> [f64; 8] {
            unsafe { std::mem::transmute::<__m512d, [f64; 8]>(self.0) }
        }

        /// `self * m + a`
        #[inline(always)]
        pub fn mul_add(self, m: V, a: V) -> V {
            V(unsafe { _mm512_fmadd_pd(self.0, m.0, a.0) })
        }

        /// `self * m - a`
        #[inline(always)]
        pub fn mul_sub(self, m: V, a: V) -> V {
            V(unsafe { _mm512_fmsub_pd(self.0, m.0, a.0) })
        }

        #[inline(always)]
        pub fn reduce_add(self) -> f64 {
            let [a, b, c, d, e, f, g, h] = self.to_array();
            ((a + e) + (c + g)) + ((b + f) + (d + h))
        }

        /// Lanes with `self < t` replaced by zero in both `self` and `other`.
        #[inline(always)]
        pub fn zero_where_below(self, t: f64, other: V, third: V) -> (V, V) {
            unsafe {
                let m = _mm512_cmp_pd_mask::<_CMP_LT_OQ>(self.0, _mm512_set1_pd(t));
                let z = _mm512_setzero_pd();
                (
                    V(_mm512_mask_blend_pd(m, other.0, z)),
                    V(_mm512_mask_blend_pd(m, third.0, z)),
                )
            }
        }

        #[inline(always)]
        fn halves(self) -> (f64x4, f64x4) {
            let a = self.to_array();
            (
                f64x4::from([a[0], a[1], a[2], a[3]]),
                f64x4::from([a[4], a[5], a[6], a[7]]),
            )
        }

        #[inline(always)]
        fn join(lo: f64x4, hi: f64x4) -> V {
            let (l, h) = (lo.to_array(), hi.to_array());
            V::from_slice(&[l[0], l[1], l[2], l[3], h[0], h[1], h[2], h[3]])
        }

        #[inline(always)]
        pub fn exp(self) -> V {
            let (l, h) = self.halves();
            V::join(l.exp(), h.exp())
        }

        #[inline(always)]
        pub fn sin_cos(self) -> (V, V) {
            let (l, h) = self.halves();
            let (sl, cl) = l.sin_cos();
            let (sh, ch) = h.sin_cos();
            (V::join(sl, sh), V::join(cl, ch))
        }
    }

    impl Add for V {
        type Output = V;
        #[inline(always)]
        fn add(self, o: V) -> V {
            V(unsafe { _mm512_add_pd(self.0, o.0) })
        }
    }

    impl Sub for V {
        type Output = V;
        #[inline(always)]
        fn sub(self, o: V) -> V {
            V(unsafe { _mm512_sub_pd(self.0, o.0) })
        }
    }

    impl Mul for V {
        type Output = V;
        #[inline(always)]
        fn mul(self, o: V) -> V {
            V(unsafe { _mm512_mul_pd(self.0, o.0) })
        }
    }
}

#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
mod imp {
    use std::ops::{Add, Mul, Sub};

    use wide::{f64x4, CmpLt};

    pub const LANES: usize = 4;

    #[derive(Clone, Copy, Debug)]
    #[repr(transparent)]
    pub struct V(f64x4);

    impl V {
        pub const ZERO: V = V(f64x4::ZERO);
        pub const ONE: V = V(f64x4::ONE);

        #[inline(always)]
        pub fn splat(x: f64) -> V {
            V(f64x4::splat(x))
        }

        #[inline(always)]
        pub fn from_slice(s: &[f64]) -> V {
            V(f64x4::from([s[0], s[1], s[2], s[3]]))
        }

        #[inline(always)]
        pub fn to_array(self) -> [f64; 4] {
            self.0.to_array()
        }

        /// `self * m + a`
        #[inline(always)]
        pub fn mul_add(self, m: V, a: V) -> V {
            V(self.0.mul_add(m.0, a.0))
        }

        /// `self * m - a`
        #[inline(always)]
        pub fn mul_sub(self, m: V, a: V) -> V {
            V(self.0.mul_sub(m.0, a.0))
        }

        #[inline(always)]
        pub fn reduce_add(self) -> f64 {
            let [a, b, c, d] = self.0.to_array();
            (a + c) + (b + d)
        }

        /// Lanes with `self < t` replaced by zero in both `other` and `third`.
        #[inline(always)]
        pub fn zero_where_below(self, t: f64, other: V, third: V) -> (V, V) {
            let m = self.0.cmp_lt(f64x4::splat(t));
            (V(m.blend(f64x4::ZERO, other.0)), V(m.blend(f64x4::ZERO, third.0)))
        }

        #[inline(always)]
        pub fn exp(self) -> V {
            V(self.0.exp())
        }

        #[inline(always)]
        pub fn sin_cos(self) -> (V, V) {
            let (s, c) = self.0.sin_cos();
            (V(s), V(c))
        }
    }

    impl Add for V {
        type Output = V;
        #[inline(always)]
        fn add(self, o: V) -> V {
            V(self.0 + o.0)
        }
    }

    impl Sub for V {
        type Output = V;
        #[inline(always)]
        fn sub(self, o: V) -> V {
            V(self.0 - o.0)
        }
    }

    impl Mul for V {
        type Output = V;
        #[inline(always)]
        fn mul(self, o: V) -> V {
            V(self.0 * o.0)
        }
    }
}

pub(crate) use imp::{V, LANES};
