//! Explicit small-ε approximations of the characteristics.
//!
//! For a field b_e(x₁, x₂)e₃ the linear flow is, up to O(ε²) in position and O(ε) in
//! momentum, a helix whose phase Φ and guiding-centre drift are known in closed form
//! ([`FixedDirectionApprox`]). For a field of varying direction the straightened system in
//! polar momentum coordinates is averaged over the gyro-angle to second order
//! ([`GeneralDirectionApprox`]).
//!
//! Angles follow the usual counterclockwise convention: Ξ = (R cos Θ, R sin Θ, Z) and the
//! magnetic rotation increases Θ at rate b_e/(ε⟨ξ⟩).

mod averaging;

use statrs::distribution::{ContinuousCDF, StudentsT};

pub use averaging::{
    approx_error_general, averaged_flow_general, fourier_split_rhs, wrap_angle, AveragedTrajectory, FourierSplit,
    GeneralDirectionApprox, PolarState, MAX_MODE,
};

use crate::characteristics::{FlowSystem, IntegratorConfig};
use crate::field_models::{horizontal, lorentz_factor, perp, FieldKind, MagneticField, PhaseState};
use crate::{Error, Result, Vec3};

/// Closed-form approximation of the linear flow in a fixed-direction field.
#[derive(Clone, Copy)]
pub struct FixedDirectionApprox<'a> {
    model: &'a dyn MagneticField,
    epsilon: f64,
}

impl<'a> FixedDirectionApprox<'a> {
    pub fn new(model: &'a dyn MagneticField, epsilon: f64) -> Result<Self> {
        require_fixed_direction(model)?;
        if !(epsilon > 0.0) {
            return Err(Error::Precondition(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Self { model, epsilon })
    }

    /// Φ(t, x, ξ) = b t − ε t (∇b·ξ^⊥)/b, the accumulated gyro-phase up to O(ε²).
    ///
    /// The t² corrections one gets from expanding b_e along the drift are proportional to
    /// ∇b·[(∇b·ξ̄)ξ^⊥ − (∇b·ξ^⊥)ξ̄], which vanishes identically.
    pub fn phi(&self, t: f64, x: &Vec3, xi: &Vec3) -> f64 {
        let b = self.model.magnitude(x);
        let g = self.model.grad_magnitude(x);
        b * t - self.epsilon * t * g.dot(&perp(xi)) / b
    }

    /// Guiding-centre drift velocity D = [(∇b·ξ̄)ξ^⊥ − (∇b·ξ^⊥)ξ̄]/(2⟨ξ⟩b²).
    pub fn drift_velocity(&self, x: &Vec3, xi: &Vec3) -> Vec3 {
        let b = self.model.magnitude(x);
        let g = self.model.grad_magnitude(x);
        let (bar, per) = (horizontal(xi), perp(xi));
        (per * g.dot(&bar) - bar * g.dot(&per)) / (2.0 * lorentz_factor(xi) * b * b)
    }

    /// R_ε: gyration about the initial guiding centre plus the linear-in-t drift.
    pub fn r_eps(&self, t: f64, x: &Vec3, xi: &Vec3) -> Vec3 {
        let b = self.model.magnitude(x);
        let psi = self.phi(t, x, xi) / (self.epsilon * lorentz_factor(xi));
        let (s, c) = psi.sin_cos();
        let (bar, per) = (horizontal(xi), perp(xi));
        (bar * s + per * c - per) / b + self.drift_velocity(x, xi) * t
    }

    pub fn x_approx(&self, t: f64, x: &Vec3, xi: &Vec3) -> Vec3 {
        x + Vec3::z() * (t * xi.z / lorentz_factor(xi)) + self.r_eps(t, x, xi) * self.epsilon
    }

    pub fn xi_approx(&self, t: f64, x: &Vec3, xi: &Vec3) -> Vec3 {
        let psi = self.phi(t, x, xi) / (self.epsilon * lorentz_factor(xi));
        let (s, c) = psi.sin_cos();
        horizontal(xi) * c - perp(xi) * s + Vec3::z() * xi.z
    }
}

fn require_fixed_direction(model: &dyn MagneticField) -> Result<()> {
    match model.kind() {
        FieldKind::FixedDirection => Ok(()),
        FieldKind::Constant => {
            let b = model.field(&Vec3::zeros());
            if b.x == 0.0 && b.y == 0.0 && b.z > 0.0 {
                Ok(())
            } else {
                Err(Error::Precondition("constant field must point along +e3".into()))
            }
        }
        FieldKind::GeneralDirection => Err(Error::Precondition("a fixed-direction field is required".into())),
    }
}

/// Φ for callers that do not keep a [`FixedDirectionApprox`] around.
pub fn phase_phi(model: &dyn MagneticField, epsilon: f64, t: f64, x: &Vec3, xi: &Vec3) -> Result<f64> {
    Ok(FixedDirectionApprox::new(model, epsilon)?.phi(t, x, xi))
}

/// Sup-norm errors of the closed-form approximation over a time grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxError {
    pub x: f64,
    pub xi: f64,
}

/// Resolution factor of the ground-truth integration relative to `config`.
pub const TRUTH_REFINEMENT: usize = 8;

/// Compares x_approx, xi_approx with the linear flow integrated at 8× the resolution of
/// `config`.
pub fn approx_error_fixed(
    model: &dyn MagneticField,
    state: PhaseState,
    epsilon: f64,
    t_grid: &[f64],
    config: IntegratorConfig,
) -> Result<ApproxError> {
    let approx = FixedDirectionApprox::new(model, epsilon)?;
    let cfg =
        IntegratorConfig { epsilon, steps_per_gyroperiod: config.steps_per_gyroperiod * TRUTH_REFINEMENT, ..config };
    let truth = FlowSystem::linear(model, cfg)?.integrate(state, t_grid)?;
    let mut err = ApproxError { x: 0.0, xi: 0.0 };
    for (t, s) in truth.times.iter().zip(&truth.states) {
        err.x = err.x.max((s.x - approx.x_approx(*t, &state.x, &state.xi)).norm());
        err.xi = err.xi.max((s.xi - approx.xi_approx(*t, &state.x, &state.xi)).norm());
    }
    Ok(err)
}

/// Least-squares fit of log(error) against log(ε).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval of the slope (Student t, n − 2 dof).
    pub half_width_95: f64,
    pub points: usize,
}

pub fn convergence_order(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 points for a slope fit, got {}", points.len())));
    }
    if let Some((e, v)) = points.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0) || !e.is_finite() || !v.is_finite()) {
        return Err(Error::Domain(format!("slope fit needs positive finite entries, got ({e:e}, {v:e})")));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(e, v)| (e.ln(), v.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("slope fit needs at least two distinct epsilon values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let quantile =
        StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Domain(format!("t distribution: {e}")))?.inverse_cdf(0.975);
    let half_width_95 = quantile * (sse / dof / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, half_width_95, points: points.len() })
}

/// max over `samples` of the operator 2-norm of D_xX(t) − I for the linear flow.
pub fn diffeo_margin(
    model: &dyn MagneticField,
    epsilon: f64,
    t: f64,
    samples: &[PhaseState],
    config: IntegratorConfig,
) -> Result<f64> {
    require_fixed_direction(model)?;
    let sys = FlowSystem::linear(model, IntegratorConfig { epsilon, ..config })?;
    let mut worst = 0.0f64;
    for s in samples {
        let jac = sys.jacobian(*s, t)?;
        let block = jac.matrix.fixed_view::<3, 3>(0, 0).into_owned() - crate::Mat3::identity();
        worst = worst.max(block.singular_values().max());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
