//! Field straightening: the rotation Oᵗ(x) taking B_e(x) onto b_e(x)·e₃, its spatial
//! derivatives, and the drift Q(x, ξ) = −Oᵗ(x)·∇ₓ(O(x)ξ)·O(x)ξ that the rotation adds to
//! the momentum equation.

use nalgebra::{DMatrix, SMatrix, SVector};

use crate::error::fmt_point;
use crate::field_models::{FieldKind, MagneticField};
use crate::{diff, Error, Mat3, Result, Vec3};

/// Below this value of 1 + cos ϑ the closed form loses accuracy and the axis form is used.
const NEAR_ANTIPODAL: f64 = 1e-10;

/// Oᵗ(x) together with b_e(x) and a flag for the antipodal convention.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    /// Oᵗ(x): maps B_e(x) to b_e(x)·e₃.
    pub o_t: Mat3,
    pub b: f64,
    pub antipodal: bool,
}

impl Frame {
    /// O(x) = Oᵗ(x)ᵗ.
    pub fn o(&self) -> Mat3 {
        self.o_t.transpose()
    }
}

/// Rotation about k = (B × e₃)/|B × e₃| by the angle between B and e₃, written as
/// R = c·I + [w×] + w wᵗ/(1 + c) with c = cos ϑ, w = sin ϑ·k = u × e₃, u = B/|B|.
fn rotation_from_unit(u: &Vec3) -> (Mat3, bool) {
    let c = u.z;
    let w = Vec3::new(u.y, -u.x, 0.0);
    if 1.0 + c > NEAR_ANTIPODAL {
        (Mat3::identity() * c + w.cross_matrix() + w * w.transpose() / (1.0 + c), false)
    } else if w.norm() > 0.0 {
        let k = w.normalize();
        let s = w.norm();
        (Mat3::identity() * c + k.cross_matrix() * s + k * k.transpose() * (1.0 - c), true)
    } else {
        (Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)), true)
    }
}

/// Oᵗ(x) for the field at x.
pub fn rotation_at(model: &dyn MagneticField, x: &Vec3) -> Result<Frame> {
    let field = model.field(x);
    if !field.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite { what: "field value", at: fmt_point(x) });
    }
    let b = field.norm();
    if b <= 0.0 || (model.kind() == FieldKind::FixedDirection && model.magnitude(x) <= 0.0) {
        return Err(Error::Domain(format!("b_e = {b:e} <= 0 at {}", fmt_point(x))));
    }
    let (o_t, antipodal) = rotation_from_unit(&(field / b));
    Ok(Frame { o_t, b, antipodal })
}

/// ∂O/∂x_j for j = 1, 2, 3.
pub fn rotation_gradient(model: &dyn MagneticField, x: &Vec3) -> Result<[Mat3; 3]> {
    let field = model.field(x);
    let b = field.norm();
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("b_e = {b:e} at {}", fmt_point(x))));
    }
    let u = field / b;
    let c = u.z;
    if 1.0 + c <= 1e-8 {
        return Err(Error::Domain(format!("rotation not differentiable near the antipodal locus at {}", fmt_point(x))));
    }
    let w = Vec3::new(u.y, -u.x, 0.0);
    let jac = model.jacobian(x);
    let mut out = [Mat3::zeros(); 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let dfield = jac.column(j).into_owned();
        let du = (dfield - u * u.dot(&dfield)) / b;
        let dc = du.z;
        let dw = Vec3::new(du.y, -du.x, 0.0);
        let d_rot = Mat3::identity() * dc + dw.cross_matrix() + (dw * w.transpose() + w * dw.transpose()) / (1.0 + c)
            - w * w.transpose() * (dc / (1.0 + c).powi(2));
        *slot = d_rot.transpose();
    }
    Ok(out)
}

/// ∇ₓ(O(x)ξ) as a matrix: column j is (∂_jO)ξ.
pub fn rotation_derivative_applied(grad: &[Mat3; 3], xi: &Vec3) -> Mat3 {
    Mat3::from_columns(&[grad[0] * xi, grad[1] * xi, grad[2] * xi])
}

/// Q(x, ξ) from a precomputed frame and rotation gradient.
pub fn drift_from_parts(frame: &Frame, grad: &[Mat3; 3], xi: &Vec3) -> Vec3 {
    let o = frame.o();
    let o_xi = o * xi;
    -(frame.o_t * (rotation_derivative_applied(grad, xi) * o_xi))
}

/// Q(x, ξ) = −Oᵗ(x)∇ₓ(O(x)ξ)O(x)ξ; orthogonal to ξ and quadratic in ξ.
pub fn quadratic_drift(model: &dyn MagneticField, x: &Vec3, xi: &Vec3) -> Result<Vec3> {
    if model.kind() == FieldKind::Constant {
        return Ok(Vec3::zeros());
    }
    let frame = rotation_at(model, x)?;
    let grad = rotation_gradient(model, x)?;
    Ok(drift_from_parts(&frame, &grad, xi))
}

/// Quadratic-form coefficients of Q: Q_i(x, ξ) = Σ_{k,l} C[i][(k,l)] ξ_k ξ_l.
pub(crate) fn drift_coefficients(frame: &Frame, grad: &[Mat3; 3]) -> [Mat3; 3] {
    let o = frame.o();
    let mut coeff = [Mat3::zeros(); 3];
    for k in 0..3 {
        let mk = rotation_derivative_applied(grad, &Vec3::ith(k, 1.0));
        for l in 0..3 {
            let col = -(frame.o_t * (mk * o.column(l)));
            for (i, c) in coeff.iter_mut().enumerate() {
                c[(k, l)] = col[i];
            }
        }
    }
    coeff
}

/// Outcome of the divergence-transfer check at the worst grid point.
#[derive(Clone, Debug)]
pub struct TransferReport {
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub points: usize,
}

/// Checks ∇_y·F̃ = ∇ₓ·F + F·∇ₓ ln|det Dη| with F̃(η(x)) = Dη(x)F(x) at every grid point.
///
/// The y-divergence is computed as tr(Dₓ(Dη F)·Dη⁻¹), so η never needs to be inverted.
/// All derivatives are fourth-order centered differences with step `h`.
pub fn divergence_transfer_check<const N: usize>(
    field: impl Fn(&SVector<f64, N>) -> SVector<f64, N>,
    eta: impl Fn(&SVector<f64, N>) -> SVector<f64, N>,
    grid: &[SVector<f64, N>],
    h: f64,
) -> Result<TransferReport> {
    let d_eta = |x: &SVector<f64, N>| diff::jacobian(&eta, x, h);
    let dynamic = |m: &SMatrix<f64, N, N>| DMatrix::from_column_slice(N, N, m.as_slice());
    let mut report = TransferReport { max_residual: 0.0, worst_point: vec![], points: grid.len() };
    for x in grid {
        let j = d_eta(x);
        let det = dynamic(&j).determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::SingularJacobian { det, at: format!("{:?}", x.as_slice()) });
        }
        let j_inv = dynamic(&j)
            .try_inverse()
            .ok_or_else(|| Error::SingularJacobian { det, at: format!("{:?}", x.as_slice()) })?;
        let pushed = |y: &SVector<f64, N>| d_eta(y) * field(y);
        let div_y = (dynamic(&diff::jacobian(pushed, x, h)) * j_inv).trace();
        let div_x = diff::jacobian(&field, x, h).trace();
        let log_det = diff::gradient(|y: &SVector<f64, N>| dynamic(&d_eta(y)).determinant().abs().ln(), x, h);
        let residual = (div_y - div_x - field(x).dot(&log_det)).abs();
        if residual >= report.max_residual {
            report.max_residual = residual;
            report.worst_point = x.as_slice().to_vec();
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_models::{ConstantField, HarmonicField};

    #[test]
    fn aligned_field_is_identity() {
        let f = rotation_at(&ConstantField::along_e3(2.0), &Vec3::zeros()).unwrap();
        assert_eq!(f.o_t, Mat3::identity());
        assert!(!f.antipodal);
    }

    #[test]
    fn field_along_e1() {
        let f = rotation_at(&ConstantField::new(Vec3::x()), &Vec3::zeros()).unwrap();
        let expected = Mat3::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        assert!((f.o_t - expected).norm() < 1e-15);
        assert!((f.o_t * Vec3::x() - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn antipodal_convention() {
        let f = rotation_at(&ConstantField::along_e3(-1.0), &Vec3::zeros()).unwrap();
        assert_eq!(f.o_t, Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)));
        assert!(f.antipodal);
        assert!((f.o_t * Vec3::new(0.0, 0.0, -1.0) - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn near_antipodal_still_satisfies_defining_relation() {
        let b = Vec3::new(1e-7, -2e-7, -1.0);
        let f = rotation_at(&ConstantField::new(b), &Vec3::zeros()).unwrap();
        assert!((f.o_t * b - b.norm() * Vec3::z()).norm() < 1e-12);
        assert!((f.o_t.transpose() * f.o_t - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences_of_rotation() {
        let m = HarmonicField::new(0.2, 0.15);
        let x = Vec3::new(0.3, -0.2, 0.4);
        let grad = rotation_gradient(&m, &x).unwrap();
        for (j, g) in grad.iter().enumerate() {
            let e = Vec3::ith(j, 1e-4);
            let p = rotation_at(&m, &(x + e)).unwrap().o();
            let q = rotation_at(&m, &(x - e)).unwrap().o();
            assert!((g - (p - q) / 2e-4).norm() < 1e-8);
        }
    }

    #[test]
    fn coefficients_reproduce_drift() {
        let m = HarmonicField::new(0.2, 0.15);
        let x = Vec3::new(0.3, -0.2, 0.4);
        let xi = Vec3::new(0.3, 0.5, -0.4);
        let frame = rotation_at(&m, &x).unwrap();
        let grad = rotation_gradient(&m, &x).unwrap();
        let c = drift_coefficients(&frame, &grad);
        let q = quadratic_drift(&m, &x, &xi).unwrap();
        for i in 0..3 {
            assert!((xi.dot(&(c[i] * xi)) - q[i]).abs() < 1e-14);
        }
    }
}
