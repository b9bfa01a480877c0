//! Double-double arithmetic (~106-bit significand) used only as a
//! reference evaluator for finite-difference gradient checks.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use audiocap::numcore::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: 0.693_147_180_559_945_3,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

/// After reduction |r| < 3.4e-4, so r^11/11! is far below 2^-106.
const TAYLOR_TERMS: usize = 10;

fn inverse_factorials() -> &'static [Dd; TAYLOR_TERMS + 1] {
    static COEFFS: std::sync::OnceLock<[Dd; TAYLOR_TERMS + 1]> = std::sync::OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut c = [Dd::from_f64(1.0); TAYLOR_TERMS + 1];
        for n in 1..=TAYLOR_TERMS {
            c[n] = c[n - 1] / Dd::from_f64(n as f64);
        }
        c
    })
}

impl Dd {
    pub const fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        quick_two_sum(q1, q2) + Dd::from_f64(q3)
    }
}

macro_rules! assign_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Dd {
            fn $f(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::default(), |a, b| a + b)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}+{:e}", self.hi, self.lo)
    }
}

impl Real for Dd {
    fn lit(x: f64) -> Self {
        Dd::from_f64(x)
    }

    fn as_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::default();
        }
        let k = (self.hi / LN2.hi).round();
        // |r| <= ln2/2, then shrink by 2^10 before the Taylor series
        let r = (self - LN2 * Dd::from_f64(k)).scale_pow2(-10);
        let coeffs = inverse_factorials();
        let mut sum = coeffs[TAYLOR_TERMS];
        for c in coeffs[..TAYLOR_TERMS].iter().rev() {
            sum = sum * r + *c;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale_pow2(k as i32)
    }

    fn ln(self) -> Self {
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::from_f64(1.0);
        }
        y
    }

    fn tanh(self) -> Self {
        if self.hi == 0.0 {
            return self;
        }
        let neg = self.hi < 0.0;
        let a = if neg { -self } else { self };
        let t = (a * Dd::from_f64(-2.0)).exp();
        let one = Dd::from_f64(1.0);
        let v = (one - t) / (one + t);
        if neg {
            -v
        } else {
            v
        }
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::default();
        }
        let y = Dd::from_f64(self.hi.sqrt());
        y + (self - y * y) / (y * Dd::from_f64(2.0))
    }

    fn is_finite(self) -> bool {
        self.hi.is_finite()
    }
}
