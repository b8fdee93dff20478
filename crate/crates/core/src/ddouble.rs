//! Double-double arithmetic (about 32 significant digits).
//!
//! Only what the circulant Fourier sums need: add, multiply, integer powers,
//! division by a double and `cos`/`sin` of rational multiples of `2π`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

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

// pi/4 split into two doubles.
const QUARTER_PI: DoubleDouble = DoubleDouble {
    hi: 7.853_981_633_974_483e-1,
    lo: 3.061_616_997_868_383e-17,
};

impl DoubleDouble {
    pub(crate) const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub(crate) const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub(crate) fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub(crate) fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub(crate) fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let (s, t) = two_sum(self.hi, -p);
        let t = t + self.lo - e;
        let q2 = (s + t) / d;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }
    }

    pub(crate) fn powi(self, mut n: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// `(cos θ, sin θ)` for `θ ∈ [0, π/4]`, by Taylor series.
    fn cos_sin_small(theta: Self) -> (Self, Self) {
        let x2 = theta * theta;
        let mut term = theta;
        let mut sin = theta;
        let mut k = 1.0;
        loop {
            term = -(term * x2).div_f64((k + 1.0) * (k + 2.0));
            sin = sin + term;
            k += 2.0;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        let mut term = Self::ONE;
        let mut cos = Self::ONE;
        let mut k = 0.0;
        loop {
            term = -(term * x2).div_f64((k + 1.0) * (k + 2.0));
            cos = cos + term;
            k += 2.0;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        (cos, sin)
    }

    /// `(cos 2πm/n, sin 2πm/n)` with exact octant reduction.
    pub(crate) fn cos_sin_turn(m: u64, n: u64) -> (Self, Self) {
        assert!(n > 0 && n < (1u64 << 50));
        let m = m % n;
        let t = 8 * m;
        let octant = t / n;
        let rem = t % n;
        // Angle inside the octant is (pi/4) * frac with frac in [0, 1].
        let num = if octant % 2 == 0 { rem } else { n - rem };
        let theta = QUARTER_PI * Self::from_f64(num as f64).div_f64(n as f64);
        let (c, s) = Self::cos_sin_small(theta);
        match octant {
            0 => (c, s),
            1 => (s, c),
            2 => (-s, c),
            3 => (-c, s),
            4 => (-c, -s),
            5 => (-s, -c),
            6 => (s, -c),
            _ => (c, -s),
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, y: Self) -> Self {
        let (s, e) = two_sum(self.hi, y.hi);
        let (t, f) = two_sum(self.lo, y.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
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

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, y: Self) -> Self {
        self + (-y)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, y: Self) -> Self {
        let (p, e) = two_prod(self.hi, y.hi);
        let e = e + (self.hi * y.lo + self.lo * y.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}
