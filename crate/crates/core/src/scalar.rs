//! Scalar types used by the geometry kernels.
//!
//! Every composition of dilations is generic over [`Real`]. `f64` is the
//! default; [`DoubleDouble`] carries roughly 106 significant bits and is used
//! wherever an algebraic identity has to be confirmed through a metric that is
//! not Lipschitz in coordinates (the Heisenberg gauge turns a coordinate error
//! `e` in the centre into a distance of order `sqrt(e)`).

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal real-number interface needed by the spaces and dilation structures.
pub trait Real:
    Copy
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn floor(self) -> Self;
    fn ceil(self) -> Self;
    /// `self^p` for `self >= 0`.
    fn powf(self, p: f64) -> Self;
    fn is_finite(self) -> bool;

    /// `self^(1/a)` for `self > 0`, without rounding `1/a` first.
    fn root(self, a: f64) -> Self {
        self.powf(1.0 / a)
    }

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn floor(self) -> Self {
        f64::floor(self)
    }
    #[inline]
    fn ceil(self) -> Self {
        f64::ceil(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
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
    pub const fn new(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }

    pub fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::new(0.0);
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::new(1.0);
        }
        let k = (self.hi / LN2.hi).round();
        // |r| <= ln2 / 2, then shrink by 2^-10 so the series converges fast.
        let r = (self - LN2 * Self::new(k)).scale_pow2(-10);
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = term * r / Self::new(n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // expm1(2r) = 2 expm1(r) + expm1(r)^2
        for _ in 0..10 {
            sum = sum.scale_pow2(1) + sum * sum;
        }
        (sum + Self::new(1.0)).scale_pow2(k as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::new(if self.hi == 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            });
        }
        // One Newton step on exp(y) = x doubles the f64 accuracy.
        let y = Self::new(self.hi.ln());
        y + self * (-y).exp() - Self::new(1.0)
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self::new(v)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
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
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::new(q3)
    }
}

impl Real for DoubleDouble {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::new(v)
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::new(if self.hi == 0.0 { 0.0 } else { f64::NAN });
        }
        let q = self.hi.sqrt();
        let y = Self::new(q);
        let r = self - y * y;
        let (hi, lo) = quick_two_sum(q, r.hi / (2.0 * q));
        Self { hi, lo }
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.floor());
            Self { hi, lo }
        } else {
            Self::new(hi)
        }
    }

    fn ceil(self) -> Self {
        let hi = self.hi.ceil();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.ceil());
            Self { hi, lo }
        } else {
            Self::new(hi)
        }
    }

    fn powf(self, p: f64) -> Self {
        if p == 1.0 {
            return self;
        }
        if p == 2.0 {
            return self * self;
        }
        if p == 0.5 {
            return self.sqrt();
        }
        if self.hi == 0.0 {
            return Self::new(if p > 0.0 { 0.0 } else { f64::INFINITY });
        }
        (self.ln() * Self::new(p)).exp()
    }

    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    fn root(self, a: f64) -> Self {
        if a == 1.0 {
            return self;
        }
        if a == 0.5 {
            return self * self;
        }
        if self.hi == 0.0 {
            return Self::new(0.0);
        }
        (self.ln() / Self::new(a)).exp()
    }
}

/// Shorthand used throughout the checkers.
pub type Dd = DoubleDouble;
