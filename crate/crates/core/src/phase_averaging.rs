//! Non-stationary phase along the characteristics: oscillatory time integrals against
//! e^{inΘ}, the phase-speed margin that makes integration by parts in time legitimate,
//! gyro-angle Fourier coefficients of initial data, and the oscillating-flow contribution to
//! the field representation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::asymptotics::{FixedDirectionApprox, GeneralDirectionApprox, PolarState};
use crate::characteristics::{backward_flow, FlowSystem, IntegratorConfig};
use crate::field_models::{lorentz_factor, perp, FieldKind, MagneticField, PhaseState};
use crate::quadrature::{CompositeRule, MomentumGrid, SphericalQuadrature};
use crate::wave_kernel::symbol_p_jacobian;
use crate::{Error, Result, Vec3};

/// Gauss order of the panels used for oscillatory time integrals.
const PANEL_ORDER: usize = 8;
/// Above this ε the [`PhaseSource::Auto`] phase comes from integrating the flow itself.
pub const AUTO_TRUE_FLOW_ABOVE: f64 = 1e-3;

/// Where the phase Θ and the slow variables along the ray come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseSource {
    /// True flow for ε > 1e-3, closed-form or averaged approximation below.
    #[default]
    Auto,
    TrueFlow,
    Asymptotic,
}

impl PhaseSource {
    fn uses_true_flow(self, epsilon: f64) -> bool {
        match self {
            Self::Auto => epsilon > AUTO_TRUE_FLOW_ABOVE,
            Self::TrueFlow => true,
            Self::Asymptotic => false,
        }
    }
}

/// Amplitude g(s, X, R, Z) of an oscillatory integral.
pub type Amplitude<'a> = &'a (dyn Fn(f64, &Vec3, f64, f64) -> f64 + Sync);

/// ∫₀ᵗ g(s, (X, R, Z)(t − s, x − sω, ξ)) e^{inΘ(t − s, x − sω, ξ)} ds, with (X, Ξ) the
/// straightened linear flow and Ξ = (R cos Θ, R sin Θ, Z).
#[derive(Clone, Copy)]
pub struct OscillatoryIntegralSpec<'a> {
    pub amplitude: Amplitude<'a>,
    pub mode: i32,
    pub epsilon: f64,
    pub direction: Vec3,
    pub t: f64,
    pub state: PhaseState,
    pub source: PhaseSource,
    pub nodes_per_period: usize,
    pub steps_per_gyroperiod: usize,
}

impl<'a> OscillatoryIntegralSpec<'a> {
    pub fn new(amplitude: Amplitude<'a>, mode: i32, epsilon: f64, direction: Vec3, t: f64, state: PhaseState) -> Self {
        Self {
            amplitude,
            mode,
            epsilon,
            direction,
            t,
            state,
            source: PhaseSource::Auto,
            nodes_per_period: 64,
            steps_per_gyroperiod: 64,
        }
    }

    pub fn with_source(mut self, source: PhaseSource) -> Self {
        self.source = source;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Precondition(format!("epsilon = {} must lie in (0, 1]", self.epsilon)));
        }
        if ((self.direction.norm() - 1.0).abs() > 1e-12) || !self.direction.iter().all(|c| c.is_finite()) {
            return Err(Error::Precondition("the line direction must be a unit vector".into()));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Precondition(format!("t = {} must be finite and >= 0", self.t)));
        }
        if self.nodes_per_period < PANEL_ORDER {
            return Err(Error::Precondition(format!("need at least {PANEL_ORDER} nodes per period")));
        }
        if !self.state.is_finite() {
            return Err(Error::Precondition("non-finite starting state".into()));
        }
        Ok(())
    }
}

/// sup of |∇b_e| over the model's region, sampled on a 9³ grid.
pub fn gradient_sup(model: &dyn MagneticField) -> f64 {
    model.region().grid(9).iter().map(|x| model.grad_magnitude(x).norm()).fold(0.0, f64::max)
}

/// Checks b₋ − t·sup|∇b_e| > (3/4)b₋, with b₋ = c(K) the lower bound of the model.
pub fn check_time_threshold(model: &dyn MagneticField, t: f64) -> Result<()> {
    let b_minus = model.c_lower();
    let grad = gradient_sup(model);
    if b_minus - t * grad > 0.75 * b_minus {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "time threshold b_- - t*sup|grad b_e| > (3/4) b_- fails: b_- = {b_minus:.6}, t = {t:.6}, sup|grad b_e| = {grad:.6}"
        )))
    }
}

/// Slow variables and phase at the end of the flow started from (y, ξ) after time τ.
#[derive(Clone, Copy, Debug)]
struct RayPoint {
    x: Vec3,
    r: f64,
    z: f64,
    theta: f64,
}

/// Evaluates the flow from (y, ξ) for time τ either by integration or by the approximations.
struct RayFlow<'a> {
    model: &'a dyn MagneticField,
    epsilon: f64,
    true_flow: bool,
    steps: usize,
}

impl RayFlow<'_> {
    fn at(&self, tau: f64, y: &Vec3, xi: &Vec3) -> Result<RayPoint> {
        let polar = |x: Vec3, xi: Vec3| RayPoint { x, r: xi.x.hypot(xi.y), z: xi.z, theta: xi.y.atan2(xi.x) };
        let start = PhaseState::new(*y, *xi);
        if self.true_flow {
            let cfg = IntegratorConfig::new(self.epsilon).with_steps(self.steps);
            let sys = match self.model.kind() {
                FieldKind::GeneralDirection => FlowSystem::straightened(self.model, None, cfg)?,
                _ => FlowSystem::linear(self.model, cfg)?,
            };
            let end = sys.flow(start, tau)?;
            return Ok(polar(end.x, end.xi));
        }
        match self.model.kind() {
            FieldKind::GeneralDirection => {
                let approx = GeneralDirectionApprox::new(self.model, self.epsilon)?;
                let traj = approx.integrate(&PolarState::from_phase(&start), &[tau])?;
                let u = traj.u2[0];
                Ok(RayPoint { x: Vec3::new(u[0], u[1], u[2]), r: u[3], z: u[4], theta: traj.theta1[0] })
            }
            _ => {
                let approx = FixedDirectionApprox::new(self.model, self.epsilon)?;
                let theta = xi.y.atan2(xi.x) + approx.phi(tau, y, xi) / (self.epsilon * lorentz_factor(xi));
                Ok(RayPoint { x: approx.x_approx(tau, y, xi), r: xi.x.hypot(xi.y), z: xi.z, theta })
            }
        }
    }
}

/// Value of the oscillatory integral. Mode n = 0 is allowed and gives the plain time integral
/// without any ε gain.
pub fn oscillatory_integral(spec: &OscillatoryIntegralSpec, model: &dyn MagneticField) -> Result<Complex64> {
    spec.validate()?;
    check_time_threshold(model, spec.t)?;
    if spec.t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let flow = RayFlow {
        model,
        epsilon: spec.epsilon,
        true_flow: spec.source.uses_true_flow(spec.epsilon),
        steps: spec.steps_per_gyroperiod,
    };
    let gamma = lorentz_factor(&spec.state.xi);
    // 1/c_lower bounds b_e from above, so this is the shortest gyro-period of mode n.
    let period = if spec.mode == 0 {
        spec.t
    } else {
        2.0 * PI * spec.epsilon * gamma * model.c_lower() / spec.mode.unsigned_abs() as f64
    };
    let nodes = CompositeRule::resolving(0.0, spec.t, period, spec.nodes_per_period, PANEL_ORDER).nodes(0.0, spec.t);
    let (x, xi, w) = (spec.state.x, spec.state.xi, spec.direction);
    let terms: Vec<Result<Complex64>> = nodes
        .par_iter()
        .map(|&(s, weight)| {
            let p = flow.at(spec.t - s, &(x - w * s), &xi)?;
            let g = (spec.amplitude)(s, &p.x, p.r, p.z);
            if !g.is_finite() {
                return Err(Error::NonFinite { what: "oscillatory amplitude", at: format!("s = {s:e}") });
            }
            Ok(Complex64::from_polar(weight * g, spec.mode as f64 * p.theta))
        })
        .collect();
    terms.into_iter().try_fold(Complex64::new(0.0, 0.0), |acc, v| Ok(acc + v?))
}

/// |εγ(e^{int/(εγ)} − 1)|/|n|: the constant-field, unit-amplitude value in closed form.
pub fn constant_field_closed_form(b: f64, epsilon: f64, xi: &Vec3, mode: i32, t: f64) -> f64 {
    let scale = epsilon * lorentz_factor(xi) / b;
    let n = mode as f64;
    (scale * (Complex64::from_polar(1.0, n * t / scale) - 1.0)).norm() / n.abs()
}

/// Number of s samples used to minimize the phase speed along the ray.
const MARGIN_SAMPLES: usize = 257;

/// min over s ∈ [0, t] of the phase speed along the ray s ↦ (t − s, x − sω), in units of b:
/// |∂_τΦ + ω·∇_xΦ| for fixed-direction fields (closed-form Φ) and εγ|d/ds Θ₁| for a general
/// direction (averaged phase, centered differences in s).
pub fn phase_speed_margin(
    model: &dyn MagneticField,
    omega: &Vec3,
    t: f64,
    x: &Vec3,
    xi: &Vec3,
    epsilon: f64,
) -> Result<f64> {
    let samples = (0..MARGIN_SAMPLES).map(|k| t * k as f64 / (MARGIN_SAMPLES - 1) as f64);
    match model.kind() {
        FieldKind::GeneralDirection => {
            let approx = GeneralDirectionApprox::new(model, epsilon)?;
            let gamma = lorentz_factor(xi);
            let phase = |s: f64| -> Result<f64> {
                let start = PolarState::from_phase(&PhaseState::new(x - omega * s, *xi));
                Ok(approx.integrate(&start, &[(t - s).max(0.0)])?.theta1[0])
            };
            let h = 1e-3 * t.max(1e-3);
            let mut margin = f64::INFINITY;
            for s in samples {
                let (lo, hi) = ((s - h).max(0.0), (s + h).min(t));
                if hi <= lo {
                    continue;
                }
                let speed = (phase(hi)? - phase(lo)?) / (hi - lo);
                margin = margin.min(epsilon * gamma * speed.abs());
            }
            Ok(margin)
        }
        _ => {
            FixedDirectionApprox::new(model, epsilon)?;
            let mut margin = f64::INFINITY;
            for s in samples {
                margin = margin.min(fixed_phase_speed(model, omega, t - s, &(x - omega * s), xi, epsilon).abs());
            }
            Ok(margin)
        }
    }
}

/// (∂_τΦ + ω·∇_xΦ)(τ, y, ξ) for Φ = bτ − ετ(∇b·ξ^⊥)/b.
pub fn fixed_phase_speed(model: &dyn MagneticField, omega: &Vec3, tau: f64, y: &Vec3, xi: &Vec3, epsilon: f64) -> f64 {
    let b = model.magnitude(y);
    let g = model.grad_magnitude(y);
    let h = model.hess_magnitude(y);
    let xp = perp(xi);
    let gp = g.dot(&xp);
    let d_tau = b - epsilon * gp / b;
    let grad_phi = g * tau - (h * xp / b - g * (gp / (b * b))) * (epsilon * tau);
    d_tau + omega.dot(&grad_phi)
}

/// Gyro-angle Fourier coefficients f_n(x, r, z), n = −N..=N, of f_in(x, (r cos θ, r sin θ, z)).
#[derive(Clone, Debug)]
pub struct GyroFourier {
    pub max_mode: usize,
    /// c[N + n] = f_n.
    pub coefficients: Vec<Complex64>,
    /// Σ_{n≠0} |f_n|/|n|.
    pub weighted_sum: f64,
    /// |f_n| for the largest sampled mode |n| = 2^k/2 not included in `coefficients`.
    pub tail: f64,
    pub samples: usize,
}

impl GyroFourier {
    pub fn coefficient(&self, n: i32) -> Complex64 {
        self.coefficients[(n + self.max_mode as i32) as usize]
    }

    pub fn reconstruct(&self, theta: f64) -> f64 {
        let n0 = self.max_mode as i32;
        (-n0..=n0).map(|n| (self.coefficient(n) * Complex64::from_polar(1.0, n as f64 * theta)).re).sum()
    }
}

/// FFT over 2^k ≥ 4N equispaced angles θ_j = 2πj/2^k.
pub fn gyro_fourier_coefficients(
    f_in: impl Fn(&Vec3, &Vec3) -> f64,
    r: f64,
    z: f64,
    x: &Vec3,
    max_mode: usize,
) -> Result<GyroFourier> {
    let m = (4 * max_mode.max(1)).next_power_of_two();
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| {
            let (s, c) = (2.0 * PI * j as f64 / m as f64).sin_cos();
            Complex64::new(f_in(x, &Vec3::new(r * c, r * s, z)), 0.0)
        })
        .collect();
    if let Some(bad) = buf.iter().position(|c| !c.re.is_finite()) {
        return Err(Error::NonFinite { what: "initial density", at: format!("angle index {bad}") });
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let coef = |n: i32| buf[n.rem_euclid(m as i32) as usize] / m as f64;
    let n0 = max_mode as i32;
    let coefficients: Vec<Complex64> = (-n0..=n0).map(coef).collect();
    let weighted_sum = (-n0..=n0).filter(|n| *n != 0).map(|n| coef(n).norm() / n.unsigned_abs() as f64).sum();
    Ok(GyroFourier { max_mode, coefficients, weighted_sum, tail: coef(m as i32 / 2).norm(), samples: m })
}

/// Quadrature and flow choices for [`averaged_initial_term`].
#[derive(Clone, Debug)]
pub struct InitialTermQuadrature {
    pub sphere: SphericalQuadrature,
    pub momentum: MomentumGrid,
    /// Time nodes per gyro-period of the highest mode `max_mode`.
    pub nodes_per_period: usize,
    pub max_mode: usize,
    pub source: PhaseSource,
    pub steps_per_gyroperiod: usize,
}

impl InitialTermQuadrature {
    pub fn new(sphere: SphericalQuadrature, momentum: MomentumGrid, max_mode: usize) -> Self {
        Self {
            sphere,
            momentum,
            nodes_per_period: 32,
            max_mode,
            source: PhaseSource::Asymptotic,
            steps_per_gyroperiod: 64,
        }
    }
}

/// ∫∫∫₀ᵗ s ∂_θp(1, ω, ξ)/(4π) · b_e(x − sω)/⟨ξ⟩ · f_in((X, Ξ)(−(t − s), x − sω, ξ)) ds dω dξ
/// for a fixed-direction field, with ∂_θ = ξ^⊥·∇_ξ.
///
/// The backward flow is the closed-form approximation unless the quadrature asks for the
/// integrated flow; per-node integration costs O(1/ε) steps for each of the O(1/ε) time nodes.
pub fn averaged_initial_term(
    model: &dyn MagneticField,
    f_in: impl Fn(&Vec3, &Vec3) -> f64 + Sync,
    t: f64,
    x: &Vec3,
    epsilon: f64,
    quad: &InitialTermQuadrature,
) -> Result<Vec3> {
    let approx = FixedDirectionApprox::new(model, epsilon)?;
    check_time_threshold(model, t)?;
    quad.momentum.check_support(|xi| f_in(x, xi))?;
    let true_flow = quad.source.uses_true_flow(epsilon);
    let sys = FlowSystem::linear(model, IntegratorConfig::new(epsilon).with_steps(quad.steps_per_gyroperiod))?;
    let parts: Vec<Result<Vec3>> = quad
        .momentum
        .nodes()
        .par_iter()
        .map(|node| {
            let xi = node.xi;
            let gamma = lorentz_factor(&xi);
            let period = 2.0 * PI * epsilon * gamma * model.c_lower() / quad.max_mode.max(1) as f64;
            let times = CompositeRule::resolving(0.0, t, period, quad.nodes_per_period, PANEL_ORDER).nodes(0.0, t);
            let mut acc = Vec3::zeros();
            for (w, qw) in quad.sphere.iter() {
                let dtheta_p = symbol_p_jacobian(w, &xi)? * perp(&xi);
                let mut inner = 0.0;
                for &(s, ws) in &times {
                    let y = x - w * s;
                    let tau = t - s;
                    let back = if true_flow {
                        backward_flow(&sys, PhaseState::new(y, xi), tau)?
                    } else {
                        PhaseState::new(approx.x_approx(-tau, &y, &xi), approx.xi_approx(-tau, &y, &xi))
                    };
                    inner += ws * s * model.magnitude(&y) * f_in(&back.x, &back.xi);
                }
                acc += dtheta_p * (qw * inner);
            }
            Ok(acc * (node.weight / (4.0 * PI * gamma)))
        })
        .collect();
    let total = parts.into_iter().try_fold(Vec3::zeros(), |acc, p| p.map(|v| acc + v))?;
    if !total.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite { what: "initial-term integral", at: crate::error::fmt_point(x) });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::convergence_order;
    use crate::field_models::{ConstantField, FixedDirectionField, HarmonicField};

    fn one(_: f64, _: &Vec3, _: f64, _: f64) -> f64 {
        1.0
    }

    #[test]
    fn constant_field_matches_closed_form_at_resonance() {
        let m = ConstantField::along_e3(1.0);
        let xi = Vec3::new(0.6, 0.0, 0.8);
        let eps = 0.01;
        let gamma = lorentz_factor(&xi);
        // t/(εγ) = 41π: the closed form attains 2εγ
        let t = 41.0 * PI * eps * gamma;
        let state = PhaseState::new(Vec3::zeros(), xi);
        for source in [PhaseSource::TrueFlow, PhaseSource::Asymptotic] {
            let spec = OscillatoryIntegralSpec::new(&one, 1, eps, Vec3::x(), t, state).with_source(source);
            let v = oscillatory_integral(&spec, &m).unwrap().norm();
            assert!((v - 2.0 * eps * gamma).abs() < 1e-12, "{source:?}: {v}");
        }
        assert!((constant_field_closed_form(1.0, eps, &xi, 1, t) - 2.0 * eps * gamma).abs() < 1e-14);
    }

    #[test]
    fn mean_mode_has_no_gain() {
        let m = ConstantField::along_e3(1.0);
        let state = PhaseState::new(Vec3::zeros(), Vec3::new(0.3, 0.1, 0.0));
        let spec = OscillatoryIntegralSpec::new(&one, 0, 1e-3, Vec3::z(), 0.4, state);
        assert!((oscillatory_integral(&spec, &m).unwrap() - Complex64::new(0.4, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inhomogeneous_field_gains_one_power() {
        let m = FixedDirectionField::sine(0.1);
        let t = 0.5;
        let amp = move |s: f64, x: &Vec3, r: f64, _z: f64| (1.0 - s / t) * (1.0 + 0.5 * x.x.sin()) * (1.0 + r);
        let state = PhaseState::new(Vec3::new(0.2, -0.1, 0.0), Vec3::new(0.5, 0.3, -0.2));
        let w = Vec3::new(1.0, 2.0, 2.0) / 3.0;
        let pts: Vec<(f64, f64)> = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
            .iter()
            .map(|&eps| {
                let spec = OscillatoryIntegralSpec::new(&amp, 1, eps, w, t, state);
                (eps, oscillatory_integral(&spec, &m).unwrap().norm())
            })
            .collect();
        let fit = convergence_order(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.3, "{fit:?} {pts:?}");
    }

    #[test]
    fn true_flow_and_asymptotic_phase_agree() {
        let m = FixedDirectionField::sine(0.1);
        let t = 0.5;
        let amp = move |s: f64, x: &Vec3, r: f64, _z: f64| (1.0 - s / t) * (1.0 + 0.5 * x.x.sin()) * (1.0 + r);
        let state = PhaseState::new(Vec3::new(0.2, -0.1, 0.0), Vec3::new(0.5, 0.3, -0.2));
        let eps = 3e-3;
        let spec = OscillatoryIntegralSpec::new(&amp, 1, eps, Vec3::x(), t, state);
        let a = oscillatory_integral(&spec.with_source(PhaseSource::TrueFlow), &m).unwrap();
        let b = oscillatory_integral(&spec.with_source(PhaseSource::Asymptotic), &m).unwrap();
        assert!((a - b).norm() < 0.05 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn threshold_violation_is_an_error() {
        let m = FixedDirectionField::sine(0.5);
        let spec =
            OscillatoryIntegralSpec::new(&one, 1, 0.01, Vec3::x(), 50.0, PhaseState::new(Vec3::zeros(), Vec3::x()));
        match oscillatory_integral(&spec, &m) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("3/4")),
            other => panic!("expected a precondition error, got {other:?}"),
        }
    }

    #[test]
    fn margin_for_constant_field_is_b() {
        let m = ConstantField::along_e3(1.7);
        let v = phase_speed_margin(&m, &Vec3::x(), 1.0, &Vec3::zeros(), &Vec3::new(0.2, 0.4, 0.1), 0.01).unwrap();
        assert!((v - 1.7).abs() < 1e-14);
    }

    #[test]
    fn margin_at_threshold_time() {
        let m = FixedDirectionField::sine(0.2);
        let b_minus = m.c_lower();
        let t = 0.25 * b_minus / gradient_sup(&m);
        let xi = Vec3::new(0.5, -0.4, 0.3);
        for w in [Vec3::x(), -Vec3::x(), Vec3::new(0.6, 0.8, 0.0)] {
            let v = phase_speed_margin(&m, &w, t, &Vec3::new(0.3, 0.0, 0.0), &xi, 1e-3).unwrap();
            assert!(v >= 0.75 * b_minus - 1e-2, "margin {v}");
        }
    }

    #[test]
    fn general_margin_is_close_to_field_strength() {
        let m = HarmonicField::new(0.1, 0.1);
        let x = Vec3::new(0.1, 0.0, 0.0);
        let v = phase_speed_margin(&m, &Vec3::z(), 0.2, &x, &Vec3::new(0.3, 0.2, 0.1), 0.01).unwrap();
        let b = m.magnitude(&x);
        assert!(v > 0.7 * b && v < 1.3 * b, "margin {v}, b = {b}");
    }

    #[test]
    fn fourier_of_example_data() {
        let chi = |r: f64, z: f64| (1.0 - r * r - z * z).max(0.0).powi(3);
        let f = |_: &Vec3, xi: &Vec3| {
            let r = xi.x.hypot(xi.y);
            let c2 = if r > 0.0 { (xi.x * xi.x - xi.y * xi.y) / (r * r) } else { 1.0 };
            chi(r, xi.z) * c2
        };
        let four = gyro_fourier_coefficients(f, 0.4, 0.2, &Vec3::zeros(), 4).unwrap();
        for n in -4i32..=4 {
            let expect = if n.abs() == 2 { chi(0.4, 0.2) / 2.0 } else { 0.0 };
            assert!((four.coefficient(n) - Complex64::new(expect, 0.0)).norm() < 1e-14, "n = {n}");
        }
        for k in 0..128 {
            let th = 2.0 * PI * k as f64 / 128.0 + 0.1;
            let (s, c) = th.sin_cos();
            assert!((four.reconstruct(th) - f(&Vec3::zeros(), &Vec3::new(0.4 * c, 0.4 * s, 0.2))).abs() < 1e-10);
        }
        let radial =
            gyro_fourier_coefficients(|_, xi| (-xi.norm_squared()).exp(), 0.7, 0.0, &Vec3::zeros(), 3).unwrap();
        assert!(radial.weighted_sum < 1e-15);
    }

    fn bump(u: f64) -> f64 {
        if u.abs() < 1.0 {
            (1.0 - u * u).powi(4)
        } else {
            0.0
        }
    }

    fn example_data(xi: &Vec3) -> f64 {
        let r = xi.x.hypot(xi.y);
        let c2 = if r > 0.0 { (xi.x * xi.x - xi.y * xi.y) / (r * r) } else { 1.0 };
        bump(r / 0.8) * bump(xi.z / 0.8) * r * r * c2
    }

    /// Example profile with a spatial envelope, so that mode 2 couples through x − sω.
    fn enveloped(x: &Vec3, xi: &Vec3) -> f64 {
        (-(x - Vec3::new(0.5, 0.0, 0.0)).norm_squared()).exp() * example_data(xi)
    }

    fn small_quad() -> InitialTermQuadrature {
        InitialTermQuadrature::new(SphericalQuadrature::new(4, 8), MomentumGrid::new(0.8, 4, 8, 4), 2)
    }

    #[test]
    fn initial_term_vanishes_for_gyrotropic_data() {
        let m = ConstantField::along_e3(1.0);
        let f = |_: &Vec3, xi: &Vec3| bump(xi.x.hypot(xi.y) / 0.8) * bump(xi.z / 0.8);
        let v = averaged_initial_term(&m, f, 0.5, &Vec3::zeros(), 0.05, &small_quad()).unwrap();
        assert!(v.norm() < 1e-14, "{v}");
    }

    #[test]
    fn initial_term_flow_routes_converge() {
        let m = FixedDirectionField::sine(0.1);
        let x = Vec3::new(0.3, -0.2, 0.0);
        let gap = |eps: f64| {
            let mut q = small_quad();
            let asym = averaged_initial_term(&m, enveloped, 0.3, &x, eps, &q).unwrap();
            q.source = PhaseSource::TrueFlow;
            let flow = averaged_initial_term(&m, enveloped, 0.3, &x, eps, &q).unwrap();
            (asym - flow).norm() / flow.norm()
        };
        let (coarse, fine) = (gap(0.05), gap(0.025));
        assert!(fine < 0.1 && coarse / fine > 1.5, "relative gaps {coarse} -> {fine}");
    }

    #[test]
    fn initial_term_vanishes_for_example_data_in_constant_field() {
        // the sphere mean of p is parallel to v, so only gyro-modes ±1 can couple
        let m = ConstantField::along_e3(1.0);
        let v = averaged_initial_term(&m, |_, xi| example_data(xi), 0.5, &Vec3::zeros(), 0.02, &small_quad()).unwrap();
        assert!(v.norm() < 1e-15, "{v}");
    }

    #[test]
    fn initial_term_scales_with_epsilon() {
        let m = FixedDirectionField::sine(0.1);
        let x = Vec3::new(0.3, -0.2, 0.0);
        let pts: Vec<(f64, f64)> = [0.08, 0.04, 0.02, 0.01]
            .iter()
            .map(|&eps: &f64| (eps, averaged_initial_term(&m, enveloped, 0.5, &x, eps, &small_quad()).unwrap().norm()))
            .collect();
        let fit = convergence_order(&pts).unwrap();
        assert!(fit.slope >= 0.7, "{fit:?} {pts:?}");
    }
}
