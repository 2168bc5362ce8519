//! Double-double ("software extended precision") arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 106 bits of significand. Only the handful of operations needed to
//! re-evaluate the closed-form rate functions and the counterexample counts
//! are provided: add, sub, mul, div, sqrt, ln, exp, floor and ceil.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
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

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn from_u64(n: u64) -> Self {
        let hi = n as f64;
        // exact remainder: n - hi fits in an i64 and is exactly representable
        let lo = (n as i128 - hi as i128) as f64;
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let y = self.hi.sqrt();
        let y2 = Dd::new(y) * Dd::new(y);
        let corr = (self - y2).hi / (2.0 * y);
        let (hi, lo) = quick_two_sum(y, corr);
        Dd { hi, lo }
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        // x = k ln2 + r, then exp(r) = (exp(r / 2^S))^(2^S)
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::new(k);
        const S: i32 = 9;
        let scale = (2.0f64).powi(S);
        let r = Dd {
            hi: r.hi / scale,
            lo: r.lo / scale,
        };
        // Taylor series for exp(r) - 1 with |r| < 2^-10
        let mut term = r;
        let mut sum = r;
        let mut i = 2.0;
        while i < 30.0 {
            term = term * r / Dd::new(i);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
            i += 1.0;
        }
        // (1 + s)^2 - 1 = 2s + s^2 keeps precision near 1
        for _ in 0..S {
            sum = Dd::new(2.0) * sum + sum * sum;
        }
        let e = sum + Dd::ONE;
        let p = (2.0f64).powi(k as i32);
        Dd {
            hi: e.hi * p,
            lo: e.lo * p,
        }
    }

    /// Natural logarithm; non-positive arguments return `-inf`.
    pub fn ln(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::new(f64::NEG_INFINITY);
        }
        // two Newton steps on y -> y + x exp(-y) - 1
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn floor(self) -> Dd {
        let hi = self.hi.floor();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.floor());
            Dd { hi, lo }
        } else {
            Dd { hi, lo: 0.0 }
        }
    }

    pub fn ceil(self) -> Dd {
        -(-self).floor()
    }

    /// Distance to the nearest integer.
    pub fn frac_distance(self) -> f64 {
        let f = self - self.floor();
        let f = f.to_f64();
        f.min(1.0 - f)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&o.lo),
            other => other,
        }
    }
}

/// Guarded logarithm in double-double: `ln x` for `x > 1`, else 0.
pub fn glog(x: Dd) -> Dd {
    if x > Dd::ONE {
        x.ln()
    } else {
        Dd::ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference digits from a 50-digit evaluation
    const LN10_HI: f64 = std::f64::consts::LN_10;
    const LN10_LO: f64 = -2.170_756_223_382_249_4e-16;

    #[test]
    fn ln_of_ten_matches_reference() {
        let l = Dd::new(10.0).ln();
        assert_eq!(l.hi, LN10_HI);
        assert!((l.lo - LN10_LO).abs() < 1e-30);
    }

    #[test]
    fn exp_ln_round_trip() {
        for &x in &[1e-5, 0.3, 1.0, 2.5, 17.0, 1e6, 3.7e15] {
            let y = Dd::new(x).ln().exp();
            let rel = ((y - Dd::new(x)).to_f64() / x).abs();
            assert!(rel < 1e-30, "x={x} rel={rel:e}");
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Dd::new(2.0);
        let s = x.sqrt();
        assert!(((s * s) - x).to_f64().abs() < 1e-31);
    }

    #[test]
    fn from_u64_is_exact() {
        let n = u64::MAX - 12;
        let d = Dd::from_u64(n);
        assert_eq!(d.hi as i128 + d.lo as i128, n as i128);
    }

    #[test]
    fn floor_and_ceil() {
        let x = Dd::new(4.0) - Dd::new(1e-20);
        assert_eq!(x.floor().to_f64(), 3.0);
        assert_eq!(x.ceil().to_f64(), 4.0);
        assert_eq!(Dd::new(-2.5).floor().to_f64(), -3.0);
        assert_eq!(Dd::new(7.0).ceil().to_f64(), 7.0);
    }
}
