//! Forward-mode automatic differentiation with dual numbers.
//!
//! A [`Dual`] carries a value and the derivatives with respect to `m` seed
//! directions. Up to four derivative components are stored inline. A dual
//! with zero components acts as a constant and combines with any dimension.
//!
//! The arithmetic operators follow IEEE semantics (division by a zero value
//! yields infinities or NaN) and panic on a dimension mismatch; the
//! `checked_*` methods report both conditions as errors instead.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Derivs = SmallVec<[f64; 4]>;

#[derive(Clone, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: Derivs,
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:?})", self.v, self.d.as_slice())
    }
}

impl Dual {
    /// A constant: no derivative components.
    pub fn constant(v: f64) -> Dual {
        Dual {
            v,
            d: SmallVec::new(),
        }
    }

    pub fn new(v: f64, d: &[f64]) -> Dual {
        Dual {
            v,
            d: SmallVec::from_slice(d),
        }
    }

    /// Independent variable `i` of `m`: derivative `e_i`.
    pub fn variable(v: f64, i: usize, m: usize) -> Dual {
        let mut d: Derivs = SmallVec::from_elem(0.0, m);
        d[i] = 1.0;
        Dual { v, d }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Derivative component `j`; zero for constants.
    pub fn deriv(&self, j: usize) -> f64 {
        self.d.get(j).copied().unwrap_or(0.0)
    }

    fn common_dim(&self, other: &Dual) -> Result<usize> {
        match (self.dim(), other.dim()) {
            (0, m) | (m, 0) => Ok(m),
            (a, b) if a == b => Ok(a),
            (a, b) => Err(Error::DualDimension(a, b)),
        }
    }

    /// `self.d·a + other.d·b`, padding constants with zeros.
    fn combine(&self, a: f64, other: &Dual, b: f64, m: usize) -> Derivs {
        (0..m).map(|j| a * self.deriv(j) + b * other.deriv(j)).collect()
    }

    /// `(f(v), f'(v)·d)`.
    fn chain(&self, fv: f64, dfv: f64) -> Dual {
        Dual {
            v: fv,
            d: self.d.iter().map(|x| dfv * x).collect(),
        }
    }

    pub fn checked_add(&self, o: &Dual) -> Result<Dual> {
        let m = self.common_dim(o)?;
        Ok(Dual {
            v: self.v + o.v,
            d: self.combine(1.0, o, 1.0, m),
        })
    }

    pub fn checked_sub(&self, o: &Dual) -> Result<Dual> {
        let m = self.common_dim(o)?;
        Ok(Dual {
            v: self.v - o.v,
            d: self.combine(1.0, o, -1.0, m),
        })
    }

    pub fn checked_mul(&self, o: &Dual) -> Result<Dual> {
        let m = self.common_dim(o)?;
        Ok(Dual {
            v: self.v * o.v,
            d: self.combine(o.v, o, self.v, m),
        })
    }

    pub fn checked_div(&self, o: &Dual) -> Result<Dual> {
        let m = self.common_dim(o)?;
        if o.v == 0.0 {
            return Err(Error::Domain("division by a zero value"));
        }
        let q = self.v / o.v;
        Ok(Dual {
            v: q,
            d: (0..m)
                .map(|j| (self.deriv(j) - q * o.deriv(j)) / o.v)
                .collect(),
        })
    }

    pub fn checked_ln(&self) -> Result<Dual> {
        if self.v > 0.0 {
            Ok(self.ln())
        } else {
            Err(Error::Domain("log"))
        }
    }

    pub fn checked_sqrt(&self) -> Result<Dual> {
        if self.v > 0.0 {
            Ok(self.sqrt())
        } else {
            Err(Error::Domain("sqrt"))
        }
    }

    pub fn sin(&self) -> Dual {
        self.chain(self.v.sin(), self.v.cos())
    }

    pub fn cos(&self) -> Dual {
        self.chain(self.v.cos(), -self.v.sin())
    }

    pub fn exp(&self) -> Dual {
        let e = self.v.exp();
        self.chain(e, e)
    }

    pub fn ln(&self) -> Dual {
        self.chain(self.v.ln(), 1.0 / self.v)
    }

    pub fn sqrt(&self) -> Dual {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    pub fn powf(&self, p: f64) -> Dual {
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0))
    }

    pub fn powi(&self, n: i32) -> Dual {
        self.chain(self.v.powi(n), n as f64 * self.v.powi(n - 1))
    }

    pub fn tanh(&self) -> Dual {
        let t = self.v.tanh();
        self.chain(t, 1.0 - t * t)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl $tr<&Dual> for &Dual {
            type Output = Dual;
            fn $m(self, o: &Dual) -> Dual {
                match self.$checked(o) {
                    Ok(r) => r,
                    Err(Error::DualDimension(a, b)) => {
                        panic!("dual dimension mismatch: {a} vs {b}")
                    }
                    Err(_) => unreachable!(),
                }
            }
        }
        impl $tr<Dual> for Dual {
            type Output = Dual;
            fn $m(self, o: Dual) -> Dual {
                (&self).$m(&o)
            }
        }
        impl $tr<&Dual> for Dual {
            type Output = Dual;
            fn $m(self, o: &Dual) -> Dual {
                (&self).$m(o)
            }
        }
        impl $tr<Dual> for &Dual {
            type Output = Dual;
            fn $m(self, o: Dual) -> Dual {
                self.$m(&o)
            }
        }
        impl $tr<f64> for Dual {
            type Output = Dual;
            fn $m(self, o: f64) -> Dual {
                (&self).$m(&Dual::constant(o))
            }
        }
        impl $tr<f64> for &Dual {
            type Output = Dual;
            fn $m(self, o: f64) -> Dual {
                self.$m(&Dual::constant(o))
            }
        }
        impl $tr<Dual> for f64 {
            type Output = Dual;
            fn $m(self, o: Dual) -> Dual {
                (&Dual::constant(self)).$m(&o)
            }
        }
        impl $tr<&Dual> for f64 {
            type Output = Dual;
            fn $m(self, o: &Dual) -> Dual {
                (&Dual::constant(self)).$m(o)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Div<&Dual> for &Dual {
    type Output = Dual;
    fn div(self, o: &Dual) -> Dual {
        let m = match self.common_dim(o) {
            Ok(m) => m,
            Err(_) => panic!("dual dimension mismatch: {} vs {}", self.dim(), o.dim()),
        };
        let q = self.v / o.v;
        Dual {
            v: q,
            d: (0..m)
                .map(|j| (self.deriv(j) - q * o.deriv(j)) / o.v)
                .collect(),
        }
    }
}
impl Div<Dual> for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        &self / &o
    }
}
impl Div<&Dual> for Dual {
    type Output = Dual;
    fn div(self, o: &Dual) -> Dual {
        &self / o
    }
}
impl Div<Dual> for &Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        self / &o
    }
}
impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, o: f64) -> Dual {
        &self / &Dual::constant(o)
    }
}
impl Div<f64> for &Dual {
    type Output = Dual;
    fn div(self, o: f64) -> Dual {
        self / &Dual::constant(o)
    }
}
impl Div<Dual> for f64 {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        &Dual::constant(self) / &o
    }
}
impl Div<&Dual> for f64 {
    type Output = Dual;
    fn div(self, o: &Dual) -> Dual {
        &Dual::constant(self) / o
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: self.d.iter().map(|x| -x).collect(),
        }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.clone().neg()
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Dual {
        Dual::constant(v)
    }
}

/// Numbers a model can be evaluated on: plain reals or duals.
pub trait Scalar:
    Clone
    + fmt::Debug
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn tanh(&self) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn powf(&self, p: f64) -> f64 {
        f64::powf(*self, p)
    }
    fn powi(&self, n: i32) -> f64 {
        f64::powi(*self, n)
    }
    fn tanh(&self) -> f64 {
        f64::tanh(*self)
    }
}

impl Scalar for Dual {
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(&self) -> Dual {
        Dual::sin(self)
    }
    fn cos(&self) -> Dual {
        Dual::cos(self)
    }
    fn exp(&self) -> Dual {
        Dual::exp(self)
    }
    fn ln(&self) -> Dual {
        Dual::ln(self)
    }
    fn sqrt(&self) -> Dual {
        Dual::sqrt(self)
    }
    fn powf(&self, p: f64) -> Dual {
        Dual::powf(self, p)
    }
    fn powi(&self, n: i32) -> Dual {
        Dual::powi(self, n)
    }
    fn tanh(&self) -> Dual {
        Dual::tanh(self)
    }
}

/// Seed `x` as `n` independent variables.
pub fn seed(x: &[f64]) -> Vec<Dual> {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(v, i, n))
        .collect()
}

/// Dense Jacobian of `f` at `x` from one dual evaluation, as rows.
pub fn jacobian<F>(f: F, x: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: FnOnce(&[Dual]) -> Result<Vec<Dual>>,
{
    let n = x.len();
    let out = f(&seed(x))?;
    out.iter()
        .map(|y| match y.dim() {
            0 => Ok(vec![0.0; n]),
            m if m == n => Ok(y.d.to_vec()),
            m => Err(Error::DualDimension(m, n)),
        })
        .collect()
}
