//! Linear Vlasov transport along the characteristics: Duhamel evaluation with a dilute
//! equilibrium source, preparedness of initial data, the explicit gyrating solution with
//! vanishing fields, the dilute-source bound and a Lipschitz growth probe.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector6};
use rayon::prelude::*;

use crate::characteristics::{FlowSystem, IntegratorConfig, Real, Tangent};
use crate::diff;
use crate::field_models::{
    lorentz_factor, perp, relativistic_velocity, EquilibriumProfile, FieldKind, MagneticField, PhaseState,
};
use crate::quadrature::{CompositeRule, GaussRule, MomentumGrid, SphericalQuadrature};
use crate::wave_kernel::symbol_p_jacobian;
use crate::{Error, Result, Vec3};

/// Phase-space density f(x, ξ).
pub type Density<'a> = &'a (dyn Fn(&Vec3, &Vec3) -> f64 + Sync);
/// Spatial vector field.
pub type VectorField<'a> = &'a (dyn Fn(&Vec3) -> Vec3 + Sync);

const FD_STEP: f64 = 1e-4;

/// Initial data (f_in, E_in, B_in) with declared support radii.
#[derive(Clone, Copy)]
pub struct InitialData<'a> {
    pub f_in: Density<'a>,
    pub e_in: VectorField<'a>,
    pub b_in: VectorField<'a>,
    pub radius_x: f64,
    pub radius_xi: f64,
}

/// Divergence constraints of the initial fields, reported for both charge sign conventions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityReport {
    /// sup |∇·E_in − ρ(f_in)|.
    pub div_e_minus_rho: f64,
    /// sup |∇·E_in + ρ(f_in)|.
    pub div_e_plus_rho: f64,
    /// sup |∇·B_in|.
    pub div_b: f64,
}

impl InitialData<'_> {
    /// Nonzero values of f_in outside {|x| ≤ R_x, |ξ| ≤ R_ξ} among the probes, if any.
    pub fn check_support(&self, probes: &[PhaseState]) -> Result<()> {
        for p in probes {
            let outside = p.x.norm() > self.radius_x || p.xi.norm() > self.radius_xi;
            if outside && (self.f_in)(&p.x, &p.xi) != 0.0 {
                return Err(Error::Domain(format!(
                    "f_in is nonzero outside its declared support at x = {}, xi = {}",
                    crate::error::fmt_point(&p.x),
                    crate::error::fmt_point(&p.xi)
                )));
            }
        }
        Ok(())
    }

    pub fn compatibility(&self, positions: &[Vec3], grid: &MomentumGrid) -> Result<CompatibilityReport> {
        let mut rep = CompatibilityReport { div_e_minus_rho: 0.0, div_e_plus_rho: 0.0, div_b: 0.0 };
        for x in positions {
            grid.check_support(|xi| (self.f_in)(x, xi))?;
            let rho = grid.integrate(|n| (self.f_in)(x, &n.xi));
            let div_e = diff::jacobian3(self.e_in, x, FD_STEP).trace();
            let div_b = diff::jacobian3(self.b_in, x, FD_STEP).trace();
            if !(rho.is_finite() && div_e.is_finite() && div_b.is_finite()) {
                return Err(Error::NonFinite { what: "compatibility residual", at: crate::error::fmt_point(x) });
            }
            rep.div_e_minus_rho = rep.div_e_minus_rho.max((div_e - rho).abs());
            rep.div_e_plus_rho = rep.div_e_plus_rho.max((div_e + rho).abs());
            rep.div_b = rep.div_b.max(div_b.abs());
        }
        Ok(rep)
    }
}

/// The linear characteristics used for transport: the fixed-direction system in lab
/// variables, or the full system for a field of varying direction.
pub fn transport_system(model: &dyn MagneticField, config: IntegratorConfig) -> Result<FlowSystem<'_>> {
    match model.kind() {
        FieldKind::GeneralDirection => FlowSystem::full(model, None, config),
        _ => FlowSystem::linear(model, config),
    }
}

/// sup over the grid of |[v(ξ) × B_e(x)]·∇_ξ f_in|, the derivative along the magnetic rotation.
pub fn preparedness_norm(
    model: &dyn MagneticField,
    f_in: impl Fn(&Vec3, &Vec3) -> f64,
    positions: &[Vec3],
    momentum: &MomentumGrid,
) -> Result<f64> {
    let mut sup = 0.0f64;
    for x in positions {
        let b = model.field(x);
        for n in momentum.nodes() {
            let w = relativistic_velocity(&n.xi).cross(&b);
            let d = diff::scalar_directional(|xi| f_in(x, xi), &n.xi, &w, FD_STEP);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    what: "magnetic derivative of f_in",
                    at: crate::error::fmt_point(&n.xi),
                });
            }
            sup = sup.max(d.abs());
        }
    }
    Ok(sup)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreparednessReport {
    pub sup_norm: f64,
    pub epsilon_ref: f64,
    pub constant: f64,
    pub prepared: bool,
}

impl PreparednessReport {
    pub fn assess(sup_norm: f64, epsilon_ref: f64, constant: f64) -> Self {
        Self { sup_norm, epsilon_ref, constant, prepared: sup_norm <= constant * epsilon_ref }
    }
}

/// Time nodes per gyroperiod for the Duhamel source integral.
const DUHAMEL_NODES_PER_PERIOD: usize = 32;

/// f_ℓ(t, z) = f_in(F_{−t}z) + ε∫₀ᵗ [M'(|ξ|)(ξ/|ξ|)·E(s, x)](F_{s−t}z) ds for each z in
/// `states`, where F is the linear flow without internal fields. The source is sampled on the
/// forward trajectory from F_{−t}z.
#[allow(clippy::too_many_arguments)]
pub fn duhamel_linear_density(
    model: &dyn MagneticField,
    f_in: impl Fn(&Vec3, &Vec3) -> f64 + Sync,
    profile: EquilibriumProfile,
    e_field: impl Fn(f64, &Vec3) -> Vec3 + Sync,
    t: f64,
    states: &[PhaseState],
    config: IntegratorConfig,
) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("t = {t} must be finite and >= 0")));
    }
    let sys = transport_system(model, config)?;
    let eps = config.epsilon;
    let b_max = 1.0 / model.c_lower();
    states
        .par_iter()
        .map(|z| {
            let start = sys.transport(*z, t, 0.0)?;
            let transported = f_in(&start.x, &start.xi);
            if matches!(profile, EquilibriumProfile::Zero) || t == 0.0 {
                return Ok(transported);
            }
            let period = 2.0 * PI * eps * start.gamma() / b_max;
            let nodes = CompositeRule::resolving(0.0, t, period, DUHAMEL_NODES_PER_PERIOD, 8).nodes(0.0, t);
            let times: Vec<f64> = nodes.iter().map(|(s, _)| *s).collect();
            let traj = sys.integrate(start, &times)?;
            let mut source = 0.0;
            for ((s, w), st) in nodes.iter().zip(&traj.states) {
                let r = st.xi.norm();
                if r > 0.0 {
                    source += w * profile.derivative(r) / r * st.xi.dot(&e_field(*s, &st.x));
                }
            }
            Ok(transported + eps * source)
        })
        .collect()
}

/// Closed-form gyrating solution with vanishing fields and its numerically evaluated residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleEvaluation {
    pub f: f64,
    pub dt_f: f64,
    /// ∂_t f + v·∇_x f − (1/(ε⟨ξ⟩))(ξ₂∂_{ξ₁} − ξ₁∂_{ξ₂})f.
    pub residual: f64,
}

/// cos(2(θ − t/(ε⟨ξ⟩))) written without angles: cos 2θ = (ξ₁² − ξ₂²)/r², sin 2θ = 2ξ₁ξ₂/r².
fn example_phase<T: Real>(t: T, xi1: T, xi2: T, xi3: f64, eps: f64) -> T {
    let r2 = xi1 * xi1 + xi2 * xi2;
    let gamma = (T::from(1.0 + xi3 * xi3) + r2).sqrt();
    let (s, c) = (t / (gamma * eps) * 2.0).sin_cos();
    ((xi1 * xi1 - xi2 * xi2) * c + xi1 * xi2 * s * 2.0) / r2
}

fn tangent_part(v: &Tangent, i: usize) -> f64 {
    let d: Vector6<f64> = v.eps.unwrap_generic(nalgebra::Const::<6>, nalgebra::Const::<1>);
    d[i]
}

/// f = χ(r, z)·cos(2(θ − t/(ε⟨ξ⟩))) in the counterclockwise gyro-angle, the solution for a
/// unit field along e₃, no equilibrium and (E, B) ≡ 0. Derivatives of the angular factor are
/// taken by forward-mode differentiation; χ only enters through (r, z), which the magnetic
/// rotation leaves unchanged. f does not depend on x, so v·∇_x f drops out. Requires r > 0.
pub fn example_closed_form(
    chi: impl Fn(f64, f64) -> f64,
    epsilon: f64,
    t: f64,
    _x: &Vec3,
    xi: &Vec3,
) -> Result<ExampleEvaluation> {
    let r = xi.x.hypot(xi.y);
    if !(r > 0.0) {
        return Err(Error::Domain("the gyro-angle is undefined at r = 0".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon = {epsilon} must be positive")));
    }
    let seed = |v: f64, i: usize| Tangent::from_re(v).derivative(i);
    let phase = example_phase(seed(t, 0), seed(xi.x, 1), seed(xi.y, 2), xi.z, epsilon);
    let amp = chi(r, xi.z);
    // χ(r, z) contributes amp' · (ξ₂∂₁r − ξ₁∂₂r) = amp'·(ξ₂ξ₁ − ξ₁ξ₂)/r to the angular
    // derivative, which is exactly zero in floating point.
    let f = amp * phase.re();
    let dt_f = amp * tangent_part(&phase, 0);
    let dtheta = amp * (xi.y * tangent_part(&phase, 1) - xi.x * tangent_part(&phase, 2));
    let residual = dt_f - dtheta / (epsilon * lorentz_factor(xi));
    Ok(ExampleEvaluation { f, dt_f, residual })
}

/// (ρ(f), J(f)) of the closed-form solution at time t, by quadrature on the momentum grid.
pub fn example_moments(chi: impl Fn(f64, f64) -> f64, epsilon: f64, t: f64, grid: &MomentumGrid) -> (f64, Vec3) {
    let f = |xi: &Vec3| {
        let r = xi.x.hypot(xi.y);
        if r == 0.0 {
            return 0.0;
        }
        chi(r, xi.z) * example_phase(t, xi.x, xi.y, xi.z, epsilon)
    };
    (grid.integrate(|n| f(&n.xi)), grid.integrate_vec(|n| relativistic_velocity(&n.xi) * f(&n.xi)))
}

/// Sample points of ‖∂_θp(1, ·, ξ)‖ on S² used to bound its sup.
fn dtheta_p_sup(xi: &Vec3, sphere: &SphericalQuadrature) -> Result<f64> {
    let xp = perp(xi);
    let mut sup = 0.0f64;
    for (w, _) in sphere.iter() {
        sup = sup.max((symbol_p_jacobian(w, xi)? * xp).norm());
    }
    Ok(sup)
}

/// Pieces of the dilute-source bound C_T·∫₀ᵗ sup_{s'≤s}‖E(s')‖ ds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiluteBound {
    /// sup of b_e over the region.
    pub b_sup: f64,
    /// ∫_{|ξ|≤R} |M'(|ξ|)|/⟨ξ⟩ · sup_{S²}|∂_θp(1, ·, ξ)| dξ.
    pub momentum_factor: f64,
    /// (t²/2)·b_sup·momentum_factor.
    pub constant: f64,
    /// ∫₀ᵗ sup_{s'≤s}‖E(s')‖ ds, trapezoid rule on the history.
    pub field_integral: f64,
    pub bound: f64,
}

/// Evaluates the bound from a history of (time, sup_x|E|) samples starting at time 0.
pub fn dilute_source_bound(
    model: &dyn MagneticField,
    profile: EquilibriumProfile,
    history: &[(f64, f64)],
    t: f64,
    radius_xi: f64,
    momentum: &MomentumGrid,
    sphere: &SphericalQuadrature,
) -> Result<DiluteBound> {
    if history.first().map(|h| h.0) != Some(0.0) {
        return Err(Error::Precondition("the field history must start at t = 0".into()));
    }
    if history.iter().any(|(_, e)| !(*e >= 0.0)) || history.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Precondition("history needs increasing times and nonnegative sup norms".into()));
    }
    let b_sup = model.region().grid(9).iter().map(|x| model.magnitude(x)).fold(0.0, f64::max);
    let mut momentum_factor = 0.0;
    for n in momentum.nodes() {
        let rho = n.xi.norm();
        if rho > radius_xi || matches!(profile, EquilibriumProfile::Zero) {
            continue;
        }
        let m = profile.derivative(rho).abs();
        if m > 0.0 {
            momentum_factor += n.weight * m / lorentz_factor(&n.xi) * dtheta_p_sup(&n.xi, sphere)?;
        }
    }
    let field_integral = running_max_integral(history, t);
    let constant = 0.5 * t * t * b_sup * momentum_factor;
    Ok(DiluteBound { b_sup, momentum_factor, constant, field_integral, bound: constant * field_integral })
}

/// ∫₀ᵗ max_{s'≤s} e(s') ds with the history linearly interpolated and held beyond its end.
fn running_max_integral(history: &[(f64, f64)], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut run = history[0].1;
    for w in history.windows(2) {
        let (t0, t1) = (w[0].0, w[1].0.min(t));
        if t1 <= t0 {
            break;
        }
        let next = run.max(w[1].1);
        acc += 0.5 * (run + next) * (t1 - t0);
        run = next;
    }
    let last = history.last().expect("history is nonempty").0;
    if t > last {
        acc += run * (t - last);
    }
    acc
}

/// One row of the Lipschitz probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzRow {
    pub epsilon: f64,
    pub sup_dt: f64,
    pub sup_dxi: f64,
}

/// sup over `probes` of |∂_t f_ℓ(t)| and |∇_ξ f_ℓ(t)| for pure transport f_ℓ(t, z) = f_in(F_{−t}z).
///
/// With w = F_{−t}z, ∂_t f_ℓ = −∇f_in(w)·V(w) for the flow's vector field V, and
/// ∇_z f_ℓ = (DF_t(w))^{−T}∇f_in(w), where DF_t comes from the differentiated integrator.
/// Only f_in is differenced; the phase sensitivity ∝ t/ε never is.
pub fn lipschitz_growth_probe(
    model: &dyn MagneticField,
    f_in: impl Fn(&Vec3, &Vec3) -> f64 + Sync,
    epsilons: &[f64],
    t: f64,
    probes: &[PhaseState],
    steps_per_gyroperiod: usize,
) -> Result<Vec<LipschitzRow>> {
    let grad6 = |w: &PhaseState| {
        diff::gradient(
            |u: &Vector6<f64>| f_in(&Vec3::new(u[0], u[1], u[2]), &Vec3::new(u[3], u[4], u[5])),
            &Vector6::new(w.x.x, w.x.y, w.x.z, w.xi.x, w.xi.y, w.xi.z),
            FD_STEP,
        )
    };
    epsilons
        .iter()
        .map(|&eps| {
            let sys = transport_system(model, IntegratorConfig::new(eps).with_steps(steps_per_gyroperiod))?;
            let rows: Vec<Result<(f64, f64)>> = probes
                .par_iter()
                .map(|z| {
                    let w = sys.transport(*z, t, 0.0)?;
                    let g = grad6(&w);
                    if g.iter().all(|c| *c == 0.0) {
                        return Ok((0.0, 0.0));
                    }
                    let (vx, vxi) = sys.vector_field(0.0, &w)?;
                    let dt = -(g.fixed_rows::<3>(0).dot(&vx) + g.fixed_rows::<3>(3).dot(&vxi));
                    let jac = sys.jacobian(w, t)?.matrix;
                    let inv = DMatrix::from_iterator(6, 6, jac.iter().copied()).try_inverse().ok_or_else(|| {
                        Error::SingularJacobian { det: jac.determinant(), at: crate::error::fmt_point(&w.x) }
                    })?;
                    let grad_z = inv.transpose() * DMatrix::from_iterator(6, 1, g.iter().copied());
                    let dxi = Vec3::new(grad_z[3], grad_z[4], grad_z[5]).norm();
                    Ok((dt.abs(), dxi))
                })
                .collect();
            let mut row = LipschitzRow { epsilon: eps, sup_dt: 0.0, sup_dxi: 0.0 };
            for r in rows {
                let (a, b) = r?;
                row.sup_dt = row.sup_dt.max(a);
                row.sup_dxi = row.sup_dxi.max(b);
            }
            Ok(row)
        })
        .collect()
}

/// Second evaluation of the momentum factor of [`dilute_source_bound`] in spherical
/// coordinates (|ξ|, polar angle, azimuth), for cross-checking.
pub fn dilute_momentum_factor_spherical(
    profile: EquilibriumProfile,
    radius_xi: f64,
    n_radial: usize,
    n_polar: usize,
    sphere: &SphericalQuadrature,
) -> Result<f64> {
    let rho_rule = GaussRule::new(n_radial);
    let mu_rule = GaussRule::new(n_polar);
    let mut acc = 0.0;
    for (rho, wr) in rho_rule.on(0.0, radius_xi) {
        let m = profile.derivative(rho).abs();
        if m == 0.0 {
            continue;
        }
        for (mu, wm) in mu_rule.on(-1.0, 1.0) {
            // the integrand is invariant under rotations about e₃, so one azimuth suffices
            let xi = Vec3::new(rho * (1.0 - mu * mu).sqrt(), 0.0, rho * mu);
            acc += wr * wm * 2.0 * PI * rho * rho * m / lorentz_factor(&xi) * dtheta_p_sup(&xi, sphere)?;
        }
    }
    Ok(acc)
}
