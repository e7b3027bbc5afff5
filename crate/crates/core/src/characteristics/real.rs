//! Scalar abstraction that lets one stepping routine run on plain `f64` or on forward-mode
//! dual numbers carrying the six tangent directions of phase space.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};
use num_dual::{DualNum, DualSVec64};
use num_traits::{One, Zero};

use crate::{Mat3, Vec3};

/// Dual number with one derivative slot per phase-space coordinate.
pub type Tangent = DualSVec64<6>;

pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + From<f64>
{
    /// Whether values carry derivative information worth propagating.
    const TANGENT: bool;
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
}

impl Real for f64 {
    const TANGENT: bool = false;
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
}

impl Real for Tangent {
    const TANGENT: bool = true;
    #[inline]
    fn re(&self) -> f64 {
        self.re
    }
    #[inline]
    fn sqrt(self) -> Self {
        DualNum::sqrt(&self)
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        DualNum::sin_cos(&self)
    }
}

pub type V3<T> = Vector3<T>;

#[inline]
pub fn lift<T: Real>(v: &Vec3) -> V3<T> {
    v.map(T::from)
}

#[inline]
pub fn lift_mat<T: Real>(m: &Mat3) -> Matrix3<T> {
    m.map(T::from)
}

#[inline]
pub fn re3<T: Real>(v: &V3<T>) -> Vec3 {
    v.map(|c| c.re())
}

/// The purely infinitesimal part v − re(v).
#[inline]
pub fn infinitesimal<T: Real>(v: &V3<T>) -> V3<T> {
    v.map(|c| c - T::from(c.re()))
}

#[inline]
pub fn matvec<T: Real>(m: &Mat3, v: &V3<T>) -> V3<T> {
    V3::new(
        v[0] * m[(0, 0)] + v[1] * m[(0, 1)] + v[2] * m[(0, 2)],
        v[0] * m[(1, 0)] + v[1] * m[(1, 1)] + v[2] * m[(1, 2)],
        v[0] * m[(2, 0)] + v[1] * m[(2, 1)] + v[2] * m[(2, 2)],
    )
}

/// First-order lift of a scalar known with its gradient at re(x).
#[inline]
pub fn lift_scalar<T: Real>(value: f64, grad: &Vec3, dx: &V3<T>) -> T {
    T::from(value) + dx[0] * grad[0] + dx[1] * grad[1] + dx[2] * grad[2]
}

/// First-order lift of a vector known with its Jacobian at re(x).
#[inline]
pub fn lift_vector<T: Real>(value: &Vec3, jac: &Mat3, dx: &V3<T>) -> V3<T> {
    lift::<T>(value) + matvec(jac, dx)
}

#[inline]
pub fn lorentz<T: Real>(xi: &V3<T>) -> T {
    (T::one() + xi.dot(xi)).sqrt()
}

/// Rotation of `v` by the rotation vector `omega` (axis·angle), smooth through angle 0.
pub fn rotate<T: Real>(omega: &V3<T>, v: &V3<T>) -> V3<T> {
    let th2 = omega.dot(omega);
    let (cos, sinc, cosc) = if th2.re() < 1e-8 {
        let th4 = th2 * th2;
        (
            T::one() - th2 * 0.5 + th4 / 24.0 - th4 * th2 / 720.0,
            T::one() - th2 / 6.0 + th4 / 120.0,
            T::from(0.5) - th2 / 24.0 + th4 / 720.0,
        )
    } else {
        let th = th2.sqrt();
        let (s, c) = th.sin_cos();
        (c, s / th, (T::one() - c) / th2)
    };
    v * cos + omega.cross(v) * sinc + omega * (omega.dot(v) * cosc)
}
