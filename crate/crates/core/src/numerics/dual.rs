//! Nested forward-mode dual numbers with a runtime nesting depth.
//!
//! A `DualScalar` of order `k` carries `2^k` coefficients, one per subset of
//! the infinitesimals `e_1 .. e_k` (with `e_i^2 = 0`). Bit `j` of a coefficient
//! index marks the presence of `e_{j+1}`. This is the flattened form of
//! `Dual<Dual<...<f64>>>` nested `k` times, which lets recursively defined
//! functions nest one more level per recursion step without monomorphizing a
//! new type for every depth.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use smallvec::{smallvec, SmallVec};

type Coeffs = SmallVec<[f64; 4]>;

#[derive(Clone, PartialEq)]
pub struct DualScalar {
    coeffs: Coeffs,
}

impl fmt::Debug for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DualScalar")
            .field("order", &self.order())
            .field("coeffs", &self.coeffs.as_slice())
            .finish()
    }
}

impl Default for DualScalar {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl From<f64> for DualScalar {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

impl DualScalar {
    /// Lifts a real number; all derivative parts are zero.
    pub fn constant(value: f64) -> Self {
        Self {
            coeffs: smallvec![value],
        }
    }

    /// First-order dual `value + derivative * e_1`.
    pub fn variable(value: f64, derivative: f64) -> Self {
        Self {
            coeffs: smallvec![value, derivative],
        }
    }

    /// Builds a dual from raw subset-indexed coefficients. The length must be a
    /// power of two.
    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        assert!(
            coeffs.len().is_power_of_two(),
            "dual coefficient count must be a power of two"
        );
        Self {
            coeffs: Coeffs::from_slice(coeffs),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of nested infinitesimals.
    pub fn order(&self) -> usize {
        self.coeffs.len().trailing_zeros() as usize
    }

    /// Real part.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Adds one nesting level: `self + tangent * e_{k+1}` where `k` is the
    /// larger of the two orders.
    pub fn nest(&self, tangent: &DualScalar) -> DualScalar {
        let k = self.order().max(tangent.order());
        let half = 1usize << k;
        let mut coeffs: Coeffs = smallvec![0.0; half * 2];
        coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        coeffs[half..half + tangent.coeffs.len()].copy_from_slice(&tangent.coeffs);
        DualScalar { coeffs }
    }

    /// Like [`nest`](Self::nest) but places the new infinitesimal at a fixed
    /// position `e_{k+1}`. Both parts must have order at most `k`.
    pub fn nest_at(&self, tangent: &DualScalar, k: usize) -> DualScalar {
        debug_assert!(self.order() <= k && tangent.order() <= k);
        let half = 1usize << k;
        let mut coeffs: Coeffs = smallvec![0.0; half * 2];
        coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        coeffs[half..half + tangent.coeffs.len()].copy_from_slice(&tangent.coeffs);
        DualScalar { coeffs }
    }

    /// Inverse of [`nest_at`](Self::nest_at): `(inner, tangent)` of order `k`.
    pub fn split_at(&self, k: usize) -> (DualScalar, DualScalar) {
        let full = self.lifted(k + 1);
        let half = 1usize << k;
        (
            DualScalar::from_coeffs(&full[..half]),
            DualScalar::from_coeffs(&full[half..]),
        )
    }

    /// Splits off the outermost infinitesimal: returns `(inner, tangent)` with
    /// `self = inner + tangent * e_k`. Order-0 values split into `(self, 0)`.
    pub fn split_top(&self) -> (DualScalar, DualScalar) {
        if self.coeffs.len() == 1 {
            return (self.clone(), DualScalar::constant(0.0));
        }
        let half = self.coeffs.len() / 2;
        (
            DualScalar::from_coeffs(&self.coeffs[..half]),
            DualScalar::from_coeffs(&self.coeffs[half..]),
        )
    }

    /// Derivative along the innermost infinitesimal `e_1` with every other
    /// infinitesimal set to zero. Functions that nest further levels
    /// internally keep the caller's seed in this slot.
    pub fn first_derivative(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }

    /// Outermost derivative part, i.e. the tangent of [`split_top`](Self::split_top).
    pub fn tangent(&self) -> DualScalar {
        self.split_top().1
    }

    fn lifted(&self, order: usize) -> Coeffs {
        let n = 1usize << order;
        let mut c: Coeffs = smallvec![0.0; n.max(self.coeffs.len())];
        c[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        c
    }

    fn zip_with(&self, rhs: &DualScalar, op: impl Fn(f64, f64) -> f64) -> DualScalar {
        let k = self.order().max(rhs.order());
        let mut a = self.lifted(k);
        for (i, r) in rhs.coeffs.iter().enumerate() {
            a[i] = op(a[i], *r);
        }
        for i in rhs.coeffs.len()..a.len() {
            a[i] = op(a[i], 0.0);
        }
        DualScalar { coeffs: a }
    }

    fn mul_dual(&self, rhs: &DualScalar) -> DualScalar {
        if self.coeffs.len() == 1 {
            return rhs.scale(self.coeffs[0]);
        }
        if rhs.coeffs.len() == 1 {
            return self.scale(rhs.coeffs[0]);
        }
        let k = self.order().max(rhs.order());
        let n = 1usize << k;
        let a = &self.coeffs;
        let b = &rhs.coeffs;
        let at = |i: usize| a.get(i).copied().unwrap_or(0.0);
        let bt = |i: usize| b.get(i).copied().unwrap_or(0.0);
        let mut out: Coeffs = smallvec![0.0; n];
        for (s, slot) in out.iter_mut().enumerate() {
            // c[S] = sum over A subset of S of a[A] * b[S \ A]
            let mut sub = s;
            let mut acc = 0.0;
            loop {
                acc += at(sub) * bt(s ^ sub);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            *slot = acc;
        }
        DualScalar { coeffs: out }
    }

    fn scale(&self, k: f64) -> DualScalar {
        DualScalar {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Applies a scalar function given its Taylor coefficients at the real part.
    ///
    /// `taylor(x, j)` must return `f^{(j)}(x) / j!`. The expansion is exact
    /// because the non-real part is nilpotent of index `order + 1`.
    pub fn apply_taylor(&self, taylor: impl Fn(f64, usize) -> f64) -> DualScalar {
        let x0 = self.coeffs[0];
        let order = self.order();
        let mut result = DualScalar::constant(taylor(x0, 0));
        if order == 0 {
            return result;
        }
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut power = h.clone();
        for j in 1..=order {
            let c = taylor(x0, j);
            if c != 0.0 {
                result += power.scale(c);
            }
            if j < order {
                power = power.mul_dual(&h);
            }
        }
        result
    }

    pub fn recip(&self) -> DualScalar {
        // d^j/dx^j (1/x) / j! = (-1)^j / x^(j+1)
        self.apply_taylor(|x, j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign / x.powi(j as i32 + 1)
        })
    }

    pub fn powi(&self, n: i32) -> DualScalar {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut base = self.clone();
        let mut acc = DualScalar::constant(1.0);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_dual(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_dual(&base);
            }
        }
        acc
    }

    pub fn powf(&self, p: f64) -> DualScalar {
        self.apply_taylor(|x, j| binomial(p, j) * x.powf(p - j as f64))
    }

    pub fn sqrt(&self) -> DualScalar {
        self.powf(0.5)
    }

    pub fn exp(&self) -> DualScalar {
        self.apply_taylor(|x, j| x.exp() / factorial(j))
    }

    pub fn ln(&self) -> DualScalar {
        self.apply_taylor(|x, j| {
            if j == 0 {
                x.ln()
            } else {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign / (j as f64 * x.powi(j as i32))
            }
        })
    }

    pub fn sin(&self) -> DualScalar {
        self.apply_taylor(|x, j| {
            let d = match j % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            };
            d / factorial(j)
        })
    }

    pub fn cos(&self) -> DualScalar {
        self.apply_taylor(|x, j| {
            let d = match j % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            };
            d / factorial(j)
        })
    }

    /// `sgn` with `sgn(0) = 0`; derivative parts vanish.
    pub fn signum(&self) -> DualScalar {
        let x = self.coeffs[0];
        let s = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        DualScalar::constant(s)
    }

    pub fn abs(&self) -> DualScalar {
        if self.coeffs[0] < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

fn factorial(j: usize) -> f64 {
    (1..=j).fold(1.0, |acc, k| acc * k as f64)
}

/// Generalized binomial coefficient `p choose j`.
fn binomial(p: f64, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (p - i as f64) / (i as f64 + 1.0))
}

impl Neg for DualScalar {
    type Output = DualScalar;
    fn neg(self) -> DualScalar {
        self.scale(-1.0)
    }
}

impl Neg for &DualScalar {
    type Output = DualScalar;
    fn neg(self) -> DualScalar {
        self.scale(-1.0)
    }
}

macro_rules! dual_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&DualScalar> for &DualScalar {
            type Output = DualScalar;
            fn $method(self, rhs: &DualScalar) -> DualScalar {
                let f: fn(&DualScalar, &DualScalar) -> DualScalar = $body;
                f(self, rhs)
            }
        }
        impl $trait<DualScalar> for DualScalar {
            type Output = DualScalar;
            fn $method(self, rhs: DualScalar) -> DualScalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&DualScalar> for DualScalar {
            type Output = DualScalar;
            fn $method(self, rhs: &DualScalar) -> DualScalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<DualScalar> for &DualScalar {
            type Output = DualScalar;
            fn $method(self, rhs: DualScalar) -> DualScalar {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for DualScalar {
            type Output = DualScalar;
            fn $method(self, rhs: f64) -> DualScalar {
                (&self).$method(&DualScalar::constant(rhs))
            }
        }
        impl $trait<f64> for &DualScalar {
            type Output = DualScalar;
            fn $method(self, rhs: f64) -> DualScalar {
                self.$method(&DualScalar::constant(rhs))
            }
        }
        impl $trait<DualScalar> for f64 {
            type Output = DualScalar;
            fn $method(self, rhs: DualScalar) -> DualScalar {
                (&DualScalar::constant(self)).$method(&rhs)
            }
        }
        impl $trait<&DualScalar> for f64 {
            type Output = DualScalar;
            fn $method(self, rhs: &DualScalar) -> DualScalar {
                (&DualScalar::constant(self)).$method(rhs)
            }
        }
    };
}

dual_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
dual_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
dual_binop!(Mul, mul, |a, b| a.mul_dual(b));
dual_binop!(Div, div, |a, b| {
    if b.coeffs.len() == 1 {
        a.scale(1.0 / b.coeffs[0])
    } else {
        a.mul_dual(&b.recip())
    }
});

impl AddAssign<DualScalar> for DualScalar {
    fn add_assign(&mut self, rhs: DualScalar) {
        *self = &*self + &rhs;
    }
}

impl AddAssign<&DualScalar> for DualScalar {
    fn add_assign(&mut self, rhs: &DualScalar) {
        *self = &*self + rhs;
    }
}

impl SubAssign<DualScalar> for DualScalar {
    fn sub_assign(&mut self, rhs: DualScalar) {
        *self = &*self - &rhs;
    }
}

impl MulAssign<DualScalar> for DualScalar {
    fn mul_assign(&mut self, rhs: DualScalar) {
        *self = &*self * &rhs;
    }
}

impl std::iter::Sum for DualScalar {
    fn sum<I: Iterator<Item = DualScalar>>(iter: I) -> Self {
        iter.fold(DualScalar::constant(0.0), |a, b| a + b)
    }
}
