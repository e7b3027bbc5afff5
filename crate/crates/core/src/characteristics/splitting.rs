//! One step of the gyro-exact splitting, written once for any [`Real`] scalar.
//!
//! A step of size h is K(h/2) ∘ H(h) ∘ K*(h/2). H is the exact helix of the field frozen at
//! the step's starting position; K collects everything else (the rotation by the field
//! residual b(x) − b̄, the straightening drift and the self-consistent forces) and K* applies
//! the same sub-steps in reverse order, which makes the composition symmetric. For a
//! constant field the residual vanishes and the step is exact.

use nalgebra::Matrix3;

use super::real::{infinitesimal, lift, lift_mat, lift_scalar, lift_vector, lorentz, matvec, re3, rotate, Real, V3};
use super::{FlowKind, FlowSystem, InternalFields};
use crate::straightening::{drift_coefficients, rotation_at, rotation_gradient};
use crate::{diff, Error, Mat3, Result, Vec3};

/// Phase-space point over a generic scalar.
#[derive(Clone, Copy, Debug)]
pub(crate) struct GState<T: Real> {
    pub x: V3<T>,
    pub xi: V3<T>,
}

/// Field data frozen at the start of a step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Reference {
    /// Gyration strength b̄ > 0.
    pub b: f64,
    /// Unit rotation axis of the helix.
    pub axis: Vec3,
    /// Maps helix displacements (in Ξ coordinates) to x displacements.
    pub frame: Mat3,
    /// B(x_ref) for the full system.
    pub field: Vec3,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Order {
    Forward,
    Adjoint,
}

/// Exact helix of duration h about a frozen axis. Returns (displacement, new momentum).
pub(crate) fn helix<T: Real>(xi: &V3<T>, axis: &Vec3, b_ref: f64, eps: f64, h: f64) -> (V3<T>, V3<T>) {
    let gamma = lorentz(xi);
    let n = lift::<T>(axis);
    let par = n * n.dot(xi);
    let perp = xi - par;
    let n_perp = n.cross(&perp);
    let omega = T::from(b_ref / eps) / gamma;
    let phi = omega * h;
    let (s, c) = phi.sin_cos();
    // ∫₀ʰ cos(Ωτ) dτ and ∫₀ʰ sin(Ωτ) dτ
    let (int_cos, int_sin) = if phi.re().abs() < 1e-3 {
        let p2 = phi * phi;
        let p4 = p2 * p2;
        (
            (T::one() - p2 / 6.0 + p4 / 120.0 - p4 * p2 / 5040.0) * h,
            phi * (T::from(0.5) - p2 / 24.0 + p4 / 720.0 - p4 * p2 / 40320.0) * h,
        )
    } else {
        (s / omega, (T::one() - c) / omega)
    };
    let new_xi = par + perp * c + n_perp * s;
    let disp = (par * T::from(h) + perp * int_cos + n_perp * int_sin) / gamma;
    (disp, new_xi)
}

impl FlowSystem<'_> {
    pub(crate) fn reference(&self, x: &Vec3) -> Result<Reference> {
        let at = || crate::error::fmt_point(x);
        match self.kind {
            FlowKind::Linear => {
                let b = self.model.magnitude(x);
                if !(b > 0.0) || !b.is_finite() {
                    return Err(Error::Domain(format!("b_e = {b:e} is not positive at {}", at())));
                }
                Ok(Reference { b, axis: Vec3::z(), frame: Mat3::identity(), field: Vec3::z() * b })
            }
            FlowKind::Straightened => {
                let f = rotation_at(self.model, x)?;
                Ok(Reference { b: f.b, axis: Vec3::z(), frame: f.o(), field: Vec3::z() * f.b })
            }
            FlowKind::Full => {
                let field = self.model.field(x);
                let b = field.norm();
                if !(b > 0.0) || !b.is_finite() {
                    return Err(Error::Domain(format!("|B_e| = {b:e} at {}", at())));
                }
                Ok(Reference { b, axis: field / b, frame: Mat3::identity(), field })
            }
        }
    }

    pub(crate) fn step<T: Real>(&self, t: f64, h: f64, st: &mut GState<T>) -> Result<()> {
        let rf = self.reference(&re3(&st.x))?;
        self.kick(t, 0.5 * h, &rf, st, Order::Forward)?;
        let (disp, xi) = helix(&st.xi, &rf.axis, rf.b, self.config.epsilon, h);
        st.x += matvec(&rf.frame, &disp);
        st.xi = xi;
        self.kick(t + 0.5 * h, 0.5 * h, &rf, st, Order::Adjoint)
    }

    fn kick<T: Real>(&self, t0: f64, s: f64, rf: &Reference, st: &mut GState<T>, order: Order) -> Result<()> {
        let straightened = self.kind == FlowKind::Straightened;
        if order == Order::Forward {
            self.residual_rotation(s, rf, st)?;
            if straightened {
                self.frame_drift(s, rf, st)?;
                self.drift_rotation(s, st)?;
            }
        }
        if let Some(fields) = self.fields {
            self.force(t0 + 0.5 * s, s, fields, st)?;
        }
        if order == Order::Adjoint {
            if straightened {
                self.drift_rotation(s, st)?;
                self.frame_drift(s, rf, st)?;
            }
            self.residual_rotation(s, rf, st)?;
        }
        Ok(())
    }

    /// Ξ ← exp(s·[W×]/(ε⟨Ξ⟩))Ξ with W the difference between the local and frozen field.
    fn residual_rotation<T: Real>(&self, s: f64, rf: &Reference, st: &mut GState<T>) -> Result<()> {
        let xr = re3(&st.x);
        let dx = infinitesimal(&st.x);
        let w: V3<T> = match self.kind {
            FlowKind::Linear | FlowKind::Straightened => {
                let b = if T::TANGENT {
                    lift_scalar(self.model.magnitude(&xr), &self.model.grad_magnitude(&xr), &dx)
                } else {
                    T::from(self.model.magnitude(&xr))
                };
                V3::new(T::zero(), T::zero(), b - rf.b)
            }
            FlowKind::Full => {
                let field = self.model.field(&xr);
                if T::TANGENT {
                    lift_vector(&(field - rf.field), &self.model.jacobian(&xr), &dx)
                } else {
                    lift(&(field - rf.field))
                }
            }
        };
        let scale = T::from(s / self.config.epsilon) / lorentz(&st.xi);
        st.xi = rotate(&(w * scale), &st.xi);
        Ok(())
    }

    /// (O(x) − F̄) lifted to first order around re(x).
    fn frame_mismatch<T: Real>(&self, x: &V3<T>, rf: &Reference) -> Result<Matrix3<T>> {
        let xr = re3(x);
        let o = rotation_at(self.model, &xr)?.o();
        let mut m = lift_mat::<T>(&(o - rf.frame));
        if T::TANGENT {
            let dx = infinitesimal(x);
            let grad = rotation_gradient(self.model, &xr)?;
            for (j, g) in grad.iter().enumerate() {
                m += lift_mat::<T>(g) * dx[j];
            }
        }
        Ok(m)
    }

    /// ẋ = (O(x) − F̄)Ξ/⟨Ξ⟩ with Ξ frozen, by the midpoint rule.
    fn frame_drift<T: Real>(&self, s: f64, rf: &Reference, st: &mut GState<T>) -> Result<()> {
        let velocity = |x: &V3<T>| -> Result<V3<T>> { Ok(self.frame_mismatch(x, rf)? * st.xi / lorentz(&st.xi)) };
        let k1 = velocity(&st.x)?;
        let mid = st.x + k1 * T::from(0.5 * s);
        let k2 = velocity(&mid)?;
        st.x += k2 * T::from(s);
        Ok(())
    }

    /// Q(x, Ξ) with x held fixed, lifted in x to first order when tangents are carried.
    fn drift_field<T: Real>(&self, x: &V3<T>) -> Result<impl Fn(&V3<T>) -> V3<T>> {
        let xr = re3(x);
        let coeffs = |p: &Vec3| -> Result<[Mat3; 3]> {
            Ok(drift_coefficients(&rotation_at(self.model, p)?, &rotation_gradient(self.model, p)?))
        };
        let base = coeffs(&xr)?;
        let mut lifted: [Matrix3<T>; 3] = [lift_mat(&base[0]), lift_mat(&base[1]), lift_mat(&base[2])];
        if T::TANGENT {
            let dx = infinitesimal(x);
            let h = 1e-4 * self.model.region().diameter().max(1e-8);
            for m in 0..3 {
                let e = Vec3::ith(m, h);
                let (p1, m1, p2, m2) =
                    (coeffs(&(xr + e))?, coeffs(&(xr - e))?, coeffs(&(xr + 2.0 * e))?, coeffs(&(xr - 2.0 * e))?);
                for i in 0..3 {
                    let d = ((p1[i] - m1[i]) * 8.0 - (p2[i] - m2[i])) / (12.0 * h);
                    lifted[i] += lift_mat::<T>(&d) * dx[m];
                }
            }
        }
        Ok(move |xi: &V3<T>| V3::new(xi.dot(&(lifted[0] * xi)), xi.dot(&(lifted[1] * xi)), xi.dot(&(lifted[2] * xi))))
    }

    /// Ξ̇ = Q(x, Ξ)/⟨Ξ⟩ as a rotation (Q ⟂ Ξ), advanced by the Lie midpoint rule.
    fn drift_rotation<T: Real>(&self, s: f64, st: &mut GState<T>) -> Result<()> {
        let n2 = st.xi.dot(&st.xi);
        if n2.re() == 0.0 {
            return Ok(());
        }
        let q = self.drift_field(&st.x)?;
        let angular = |xi: &V3<T>| xi.cross(&q(xi)) / (xi.dot(xi) * lorentz(xi));
        let half = rotate(&(angular(&st.xi) * T::from(0.5 * s)), &st.xi);
        st.xi = rotate(&(angular(&half) * T::from(s)), &st.xi);
        Ok(())
    }

    /// Ξ̇ = −ε(E + v × B), rotated into the straightened frame when needed; midpoint rule.
    fn force<T: Real>(&self, t: f64, s: f64, fields: &dyn InternalFields, st: &mut GState<T>) -> Result<()> {
        let xr = re3(&st.x);
        let dx = infinitesimal(&st.x);
        let (mut e, mut b) = if T::TANGENT {
            let h = 1e-4 * self.model.region().diameter().max(1e-8);
            let je = diff::jacobian3(|y| fields.electric(t, y), &xr, h);
            let jb = diff::jacobian3(|y| fields.magnetic(t, y), &xr, h);
            (lift_vector(&fields.electric(t, &xr), &je, &dx), lift_vector(&fields.magnetic(t, &xr), &jb, &dx))
        } else {
            (lift(&fields.electric(t, &xr)), lift(&fields.magnetic(t, &xr)))
        };
        if self.kind == FlowKind::Straightened {
            let mut o = lift_mat::<T>(&rotation_at(self.model, &xr)?.o());
            if T::TANGENT {
                for (j, g) in rotation_gradient(self.model, &xr)?.iter().enumerate() {
                    o += lift_mat::<T>(g) * dx[j];
                }
            }
            let o_t = o.transpose();
            e = o_t * e;
            b = o_t * b;
        }
        let eps = self.config.epsilon;
        let accel = |xi: &V3<T>| -> V3<T> { -(e + (xi / lorentz(xi)).cross(&b)) * T::from(eps) };
        let k1 = accel(&st.xi);
        let k2 = accel(&(st.xi + k1 * T::from(0.5 * s)));
        st.xi += k2 * T::from(s);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helix_series_matches_closed_form() {
        let xi = V3::new(0.4, -0.3, 0.2);
        let axis = Vec3::new(0.0, 0.6, 0.8);
        let g = lorentz(&xi);
        // |φ| just below and above the series threshold
        for phi in [0.999e-3, 1.001e-3] {
            let h = phi * g;
            let (d, x) = helix(&xi, &axis, 1.0, 1.0, h);
            let (d2, x2) = helix(&xi, &axis, 1.0, 1.0, h * (1.0 + 2e-12));
            assert!((d - d2).norm() < 1e-14 && (x - x2).norm() < 1e-14);
        }
    }

    #[test]
    fn full_period_returns_to_start_momentum() {
        let xi = V3::new(0.4, -0.3, 0.2);
        let axis = Vec3::new(0.0, 0.6, 0.8);
        let period = 2.0 * std::f64::consts::PI * 0.1 * lorentz(&xi) / 2.0;
        let (d, x) = helix(&xi, &axis, 2.0, 0.1, period);
        assert!((x - xi).norm() < 1e-14);
        // only the guiding-centre drift along the axis survives
        let along = axis * axis.dot(&xi) * period / lorentz(&xi);
        assert!((d - along).norm() < 1e-14);
    }
}
