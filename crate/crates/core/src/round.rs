//! Directed rounding on top of round-to-nearest IEEE arithmetic.
//!
//! Each operation computes the nearest result together with its exact error
//! term (TwoSum / FMA), and steps one ulp outward only when the error is
//! nonzero. Exact operations stay exact.

/// Relative widening applied to libm transcendental evaluations.
pub const TRANSCENDENTAL_REL: f64 = 1e-12;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return s;
    }
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return s;
    }
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

// The FMA residual is exact unless the product underflows; in the subnormal
// range we fall back to an unconditional one-ulp step.
const SUBNORMAL_GUARD: f64 = 1e-290;

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p != 0.0 && p.abs() < SUBNORMAL_GUARD {
        return p.next_down();
    }
    if p == 0.0 && a != 0.0 && b != 0.0 {
        return (-f64::MIN_POSITIVE).min(0.0_f64.next_down());
    }
    let e = a.mul_add(b, -p);
    if e < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    -mul_down(-a, b)
}

/// 1/x rounded outward in the requested direction. IEEE division is
/// correctly rounded, so a single unconditional step suffices.
#[inline]
pub fn recip_down(x: f64) -> f64 {
    let r = 1.0 / x;
    if (r * x) == 1.0 && x.abs().log2().fract() == 0.0 {
        r
    } else {
        r.next_down()
    }
}

#[inline]
pub fn recip_up(x: f64) -> f64 {
    -recip_down(-x)
}

/// Widen a libm result downward by the transcendental tolerance.
#[inline]
pub fn widen_down(v: f64) -> f64 {
    if v == 0.0 {
        v
    } else {
        v - v.abs() * TRANSCENDENTAL_REL
    }
}

#[inline]
pub fn widen_up(v: f64) -> f64 {
    if v == 0.0 {
        v
    } else {
        v + v.abs() * TRANSCENDENTAL_REL
    }
}
