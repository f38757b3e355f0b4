// SPDX-License-Identifier: Apache-2.0

//! Double-double arithmetic (about 106 significant bits) for the
//! finite-difference oracle, where perturbations of small softmax weights
//! fall below the resolution of `f64`.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar operations needed by the smooth forward pass.
pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn from_pair((hi, lo): (f64, f64)) -> Self {
        Self { hi, lo }
    }

    /// Multiplication by a power of two (exact).
    fn scale(self, factor: f64) -> Self {
        Self {
            hi: self.hi * factor,
            lo: self.lo * factor,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::from_pair(quick_two_sum(s, e + f))
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        Self::from_pair(quick_two_sum(p, e))
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * Self::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::new(q2);
        let q3 = r.hi / b.hi;
        Self::from_pair(quick_two_sum(q1, q2)) + Self::new(q3)
    }
}

impl Real for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self::new(x)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Range reduction `x = k ln 2 + r`, Taylor series of `exp(r / 1024)`,
    /// then ten squarings.
    fn exp(self) -> Self {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::one();
        }
        if self.hi < -708.0 {
            return Self::zero();
        }
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Self::new(k)).scale(1.0 / 1024.0);
        let mut sum = Self::one() + r;
        let mut term = r;
        for i in 2..=12 {
            term = term * r / Self::new(f64::from(i));
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale(2f64.powi(k as i32))
    }

    /// Newton iterations on `exp(y) = x` from the `f64` logarithm.
    fn ln(self) -> Self {
        if self.hi == 1.0 && self.lo == 0.0 {
            return Self::zero();
        }
        let mut y = Self::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::one();
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::E,
        lo: 1.445_646_891_729_250_2e-16,
    };

    fn rel(a: DoubleDouble, b: DoubleDouble) -> f64 {
        ((a - b).to_f64() / b.to_f64()).abs()
    }

    #[test]
    fn exp_and_ln_constants() {
        assert!(rel(DoubleDouble::one().exp(), E) < 1e-28);
        assert!(rel(DoubleDouble::new(2.0).ln(), LN2) < 1e-28);
        assert!(rel(E.ln(), DoubleDouble::one()) < 1e-28);
        assert_eq!(DoubleDouble::zero().exp(), DoubleDouble::one());
        assert_eq!(DoubleDouble::one().ln(), DoubleDouble::zero());
    }

    #[test]
    fn round_trips_and_agreement_with_f64() {
        for x in [-50.0, -3.25, -1e-3, 1e-9, 0.5, 7.0, 40.0] {
            let d = DoubleDouble::new(x);
            assert!(((d.exp().ln() - d).to_f64()).abs() <= 1e-27 * x.abs().max(1.0));
            assert!((d.exp().to_f64() / x.exp() - 1.0).abs() < 4e-16);
        }
    }

    #[test]
    fn arithmetic_keeps_low_bits() {
        let tiny = DoubleDouble::new(1e-20);
        let one = DoubleDouble::one();
        assert_eq!(((one + tiny) - one).to_f64(), 1e-20);
        let third = one / DoubleDouble::new(3.0);
        assert!(((third * DoubleDouble::new(3.0)) - one).to_f64().abs() < 1e-31);
    }
}
