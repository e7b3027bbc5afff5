//! Fourth-order centered finite differences, used only where no analytic derivative exists.

use nalgebra::{SMatrix, SVector};

use crate::{Mat3, Vec3};

/// d/ds f(x + s·dir) at s = 0.
pub fn directional<const N: usize, const M: usize>(
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    x: &SVector<f64, N>,
    dir: &SVector<f64, N>,
    h: f64,
) -> SVector<f64, M> {
    let at = |s: f64| f(&(x + dir * s));
    (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h)
}

pub fn scalar_directional<const N: usize>(
    f: impl Fn(&SVector<f64, N>) -> f64,
    x: &SVector<f64, N>,
    dir: &SVector<f64, N>,
    h: f64,
) -> f64 {
    let at = |s: f64| f(&(x + dir * s));
    (at(-2.0 * h) - at(2.0 * h) + 8.0 * (at(h) - at(-h))) / (12.0 * h)
}

/// Jacobian J_ij = ∂f_i/∂x_j.
pub fn jacobian<const N: usize, const M: usize>(
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    x: &SVector<f64, N>,
    h: f64,
) -> SMatrix<f64, M, N> {
    let mut jac = SMatrix::<f64, M, N>::zeros();
    for j in 0..N {
        let mut e = SVector::<f64, N>::zeros();
        e[j] = 1.0;
        jac.set_column(j, &directional(&f, x, &e, h));
    }
    jac
}

pub fn gradient<const N: usize>(f: impl Fn(&SVector<f64, N>) -> f64, x: &SVector<f64, N>, h: f64) -> SVector<f64, N> {
    SVector::<f64, N>::from_fn(|j, _| {
        let mut e = SVector::<f64, N>::zeros();
        e[j] = 1.0;
        scalar_directional(&f, x, &e, h)
    })
}

pub fn jacobian3(f: impl Fn(&Vec3) -> Vec3, x: &Vec3, h: f64) -> Mat3 {
    jacobian(f, x, h)
}
