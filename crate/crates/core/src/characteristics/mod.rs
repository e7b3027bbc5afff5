//! Characteristic flows of the strongly magnetized relativistic Vlasov equation.
//!
//! Three systems share one integrator:
//!
//! * `Linear`: ẋ = v(ξ), ξ̇ = (b_e(x)/(ε⟨ξ⟩)) e₃ × ξ, for fields along e₃.
//! * `Straightened`: Ẋ = O(X)Ξ/⟨Ξ⟩, Ξ̇ = (b_e(X)/(ε⟨Ξ⟩)) e₃ × Ξ + Q(X, Ξ)/⟨Ξ⟩ − ε(OᵗE + v × OᵗB).
//! * `Full`: ẋ = v(ξ), ξ̇ = (1/(ε⟨ξ⟩)) B_e(x) × ξ − ε(E + v × B).
//!
//! The default scheme resolves the gyration exactly for a frozen field and treats the rest
//! as a symmetric perturbation (see [`splitting`]); a classical RK4 on the full vector field
//! is kept as an independent reference. Flow Jacobians come from running the same step on
//! dual numbers.

mod real;
mod splitting;

use std::f64::consts::PI;

use nalgebra::{Matrix6, Vector6};

use real::re3;
pub use real::{Real, Tangent};
use splitting::GState;

use crate::field_models::{lorentz_factor, relativistic_velocity, FieldKind, MagneticField, PhaseState};
use crate::straightening::{drift_from_parts, rotation_at, rotation_gradient};
use crate::{diff, Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Linear,
    Straightened,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Exact gyration of the frozen field plus a symmetric residual kick. Second order,
    /// exact for constant fields, preserves |ξ| to roundoff without internal fields.
    GyroSplitting,
    /// Classical fourth-order Runge–Kutta on the full vector field.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Steps per local gyroperiod 2πε⟨ξ⟩/b_e.
    pub steps_per_gyroperiod: usize,
    pub epsilon: f64,
}

impl IntegratorConfig {
    pub fn new(epsilon: f64) -> Self {
        Self { scheme: Scheme::GyroSplitting, steps_per_gyroperiod: 64, epsilon }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_steps(mut self, steps_per_gyroperiod: usize) -> Self {
        self.steps_per_gyroperiod = steps_per_gyroperiod;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Precondition(format!("epsilon = {} is outside (0, 1]", self.epsilon)));
        }
        if self.steps_per_gyroperiod < 8 {
            return Err(Error::Precondition(format!(
                "{} steps per gyroperiod cannot resolve the rotation (need >= 8)",
                self.steps_per_gyroperiod
            )));
        }
        Ok(())
    }
}

/// Self-consistent fields E(t, x), B(t, x) entering the momentum equation at order ε.
pub trait InternalFields: Send + Sync {
    fn electric(&self, t: f64, x: &Vec3) -> Vec3;
    fn magnetic(&self, t: f64, x: &Vec3) -> Vec3;
}

/// Spatially uniform, time-independent internal fields.
#[derive(Clone, Copy, Debug)]
pub struct UniformFields {
    pub e: Vec3,
    pub b: Vec3,
}

impl InternalFields for UniformFields {
    fn electric(&self, _t: f64, _x: &Vec3) -> Vec3 {
        self.e
    }
    fn magnetic(&self, _t: f64, _x: &Vec3) -> Vec3 {
        self.b
    }
}

/// Internal fields given by closures.
pub struct FnFields<E, B> {
    pub e: E,
    pub b: B,
}

impl<E, B> InternalFields for FnFields<E, B>
where
    E: Fn(f64, &Vec3) -> Vec3 + Send + Sync,
    B: Fn(f64, &Vec3) -> Vec3 + Send + Sync,
{
    fn electric(&self, t: f64, x: &Vec3) -> Vec3 {
        (self.e)(t, x)
    }
    fn magnetic(&self, t: f64, x: &Vec3) -> Vec3 {
        (self.b)(t, x)
    }
}

/// A characteristic system bound to its field model and integrator settings.
#[derive(Clone, Copy)]
pub struct FlowSystem<'a> {
    kind: FlowKind,
    model: &'a dyn MagneticField,
    fields: Option<&'a dyn InternalFields>,
    config: IntegratorConfig,
}

impl<'a> FlowSystem<'a> {
    /// The linear system. Requires a field along +e₃.
    pub fn linear(model: &'a dyn MagneticField, config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        match model.kind() {
            FieldKind::FixedDirection => {}
            FieldKind::Constant => {
                let b = model.field(&Vec3::zeros());
                if b.x != 0.0 || b.y != 0.0 || !(b.z > 0.0) {
                    return Err(Error::Precondition(format!(
                        "linear system needs a field along +e3, got ({}, {}, {})",
                        b.x, b.y, b.z
                    )));
                }
            }
            FieldKind::GeneralDirection => {
                return Err(Error::Precondition(
                    "linear system needs a fixed-direction field; use the straightened system".into(),
                ))
            }
        }
        Ok(Self { kind: FlowKind::Linear, model, fields: None, config })
    }

    pub fn straightened(
        model: &'a dyn MagneticField,
        fields: Option<&'a dyn InternalFields>,
        config: IntegratorConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self { kind: FlowKind::Straightened, model, fields, config })
    }

    pub fn full(
        model: &'a dyn MagneticField,
        fields: Option<&'a dyn InternalFields>,
        config: IntegratorConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self { kind: FlowKind::Full, model, fields, config })
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn config(&self) -> IntegratorConfig {
        self.config
    }

    pub fn model(&self) -> &'a dyn MagneticField {
        self.model
    }

    /// Right-hand side (ẋ, ξ̇) at time t.
    pub fn vector_field(&self, t: f64, s: &PhaseState) -> Result<(Vec3, Vec3)> {
        let eps = self.config.epsilon;
        let gamma = lorentz_factor(&s.xi);
        let v = s.xi / gamma;
        let (dx, mut dxi) = match self.kind {
            FlowKind::Linear => {
                let b = self.model.magnitude(&s.x);
                (v, Vec3::z().cross(&s.xi) * (b / (eps * gamma)))
            }
            FlowKind::Straightened => {
                let frame = rotation_at(self.model, &s.x)?;
                let q = match self.model.kind() {
                    FieldKind::Constant => Vec3::zeros(),
                    _ => drift_from_parts(&frame, &rotation_gradient(self.model, &s.x)?, &s.xi),
                };
                (frame.o() * v, Vec3::z().cross(&s.xi) * (frame.b / (eps * gamma)) + q / gamma)
            }
            FlowKind::Full => (v, self.model.field(&s.x).cross(&s.xi) / (eps * gamma)),
        };
        if let Some(f) = self.fields {
            let (mut e, mut b) = (f.electric(t, &s.x), f.magnetic(t, &s.x));
            if self.kind == FlowKind::Straightened {
                let o_t = rotation_at(self.model, &s.x)?.o_t;
                e = o_t * e;
                b = o_t * b;
            }
            dxi -= (e + v.cross(&b)) * eps;
        }
        Ok((dx, dxi))
    }

    /// Samples the flow from `start` (at t = 0) at each time of `times`.
    pub fn integrate(&self, start: PhaseState, times: &[f64]) -> Result<Trajectory> {
        check_state(&start)?;
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("output times must be finite, >= 0 and strictly increasing".into()));
        }
        let mut monitor = Monitor::new(start.xi.norm());
        let mut states = Vec::with_capacity(times.len());
        let mut current = start;
        let mut t = 0.0;
        for &target in times {
            current = self.advance_f64(current, t, target, &mut monitor)?;
            t = target;
            states.push(current);
        }
        Ok(Trajectory {
            times: times.to_vec(),
            initial_norm: start.xi.norm(),
            states,
            max_norm_drift: monitor.max_drift,
            steps: monitor.steps,
        })
    }

    /// The state at time `t_to` of the characteristic that is at `state` at time `t_from`.
    pub fn transport(&self, state: PhaseState, t_from: f64, t_to: f64) -> Result<PhaseState> {
        check_state(&state)?;
        let mut monitor = Monitor::new(state.xi.norm());
        self.advance_f64(state, t_from, t_to, &mut monitor)
    }

    /// F_t(state) for either sign of t, starting at time 0.
    pub fn flow(&self, state: PhaseState, t: f64) -> Result<PhaseState> {
        self.transport(state, 0.0, t)
    }

    /// D(x, ξ)F_t as a 6×6 matrix, differentiating the numerical flow exactly.
    ///
    /// Always uses the splitting scheme. The per-step frozen reference field is held
    /// constant under differentiation, so the result is the derivative of a map that
    /// agrees with the flow to the integrator's order.
    pub fn jacobian(&self, state: PhaseState, t: f64) -> Result<FlowJacobian> {
        check_state(&state)?;
        let seed = |v: f64, i: usize| Tangent::from_re(v).derivative(i);
        let mut st = GState {
            x: real::V3::new(seed(state.x.x, 0), seed(state.x.y, 1), seed(state.x.z, 2)),
            xi: real::V3::new(seed(state.xi.x, 3), seed(state.xi.y, 4), seed(state.xi.z, 5)),
        };
        let mut monitor = Monitor::new(state.xi.norm());
        self.advance_split(&mut st, 0.0, t, &mut monitor)?;
        let mut matrix = Matrix6::zeros();
        for (row, c) in st.x.iter().chain(st.xi.iter()).enumerate() {
            let d: Vector6<f64> = c.eps.unwrap_generic(nalgebra::Const::<6>, nalgebra::Const::<1>);
            matrix.set_row(row, &d.transpose());
        }
        let det = matrix.determinant();
        Ok(FlowJacobian { matrix, det, end: PhaseState::new(re3(&st.x), re3(&st.xi)) })
    }

    fn nominal_step(&self, x: &Vec3, xi: &Vec3) -> Result<f64> {
        let b = self.reference(x)?.b;
        Ok(2.0 * PI * self.config.epsilon * lorentz_factor(xi) / (b * self.config.steps_per_gyroperiod as f64))
    }

    fn advance_f64(&self, state: PhaseState, t_from: f64, t_to: f64, monitor: &mut Monitor) -> Result<PhaseState> {
        match self.config.scheme {
            Scheme::GyroSplitting => {
                let mut st = GState { x: state.x, xi: state.xi };
                self.advance_split(&mut st, t_from, t_to, monitor)?;
                Ok(PhaseState::new(st.x, st.xi))
            }
            Scheme::Rk4 => {
                let mut s = state;
                self.advance_with(
                    t_from,
                    t_to,
                    monitor,
                    |t, h, m| {
                        s = self.rk4_step(t, h, &s)?;
                        m.record(t + h, &s.x, &s.xi)?;
                        Ok((s.x, s.xi))
                    },
                    (state.x, state.xi),
                )?;
                Ok(s)
            }
        }
    }

    fn advance_split<T: Real>(&self, st: &mut GState<T>, t_from: f64, t_to: f64, monitor: &mut Monitor) -> Result<()> {
        let start = (re3(&st.x), re3(&st.xi));
        self.advance_with(
            t_from,
            t_to,
            monitor,
            |t, h, m| {
                self.step(t, h, st)?;
                let (x, xi) = (re3(&st.x), re3(&st.xi));
                m.record(t + h, &x, &xi)?;
                Ok((x, xi))
            },
            start,
        )
    }

    /// Drives `step(t, h)` from t_from to t_to, re-deriving the step size from the local
    /// gyroperiod every few periods and landing exactly on t_to.
    fn advance_with(
        &self,
        t_from: f64,
        t_to: f64,
        monitor: &mut Monitor,
        mut step: impl FnMut(f64, f64, &mut Monitor) -> Result<(Vec3, Vec3)>,
        start: (Vec3, Vec3),
    ) -> Result<()> {
        const PERIODS_PER_CHUNK: usize = 4;
        let dir = if t_to >= t_from { 1.0 } else { -1.0 };
        let (mut x, mut xi) = start;
        let mut t = t_from;
        while (t_to - t) * dir > 0.0 {
            let h_nom = self.nominal_step(&x, &xi)?;
            let remaining = (t_to - t).abs();
            let chunk = PERIODS_PER_CHUNK * self.config.steps_per_gyroperiod;
            let last = remaining <= chunk as f64 * h_nom * (1.0 + 1e-12);
            let (n, h) = if last {
                let n = (remaining / h_nom).ceil().max(1.0) as usize;
                (n, remaining / n as f64)
            } else {
                (chunk, h_nom)
            };
            for k in 0..n {
                (x, xi) = step(t + dir * h * k as f64, dir * h, monitor)?;
            }
            t = if last { t_to } else { t + dir * h * n as f64 };
        }
        Ok(())
    }

    fn rk4_step(&self, t: f64, h: f64, s: &PhaseState) -> Result<PhaseState> {
        let at = |dt: f64, k: &(Vec3, Vec3), scale: f64| -> Result<(Vec3, Vec3)> {
            self.vector_field(t + dt, &PhaseState::new(s.x + k.0 * scale, s.xi + k.1 * scale))
        };
        let zero = (Vec3::zeros(), Vec3::zeros());
        let k1 = at(0.0, &zero, 0.0)?;
        let k2 = at(0.5 * h, &k1, 0.5 * h)?;
        let k3 = at(0.5 * h, &k2, 0.5 * h)?;
        let k4 = at(h, &k3, h)?;
        Ok(PhaseState::new(
            s.x + (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) * (h / 6.0),
            s.xi + (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) * (h / 6.0),
        ))
    }
}

fn check_state(s: &PhaseState) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what: "initial state", at: crate::error::fmt_point(&s.x) })
    }
}

struct Monitor {
    norm0: f64,
    max_drift: f64,
    steps: usize,
}

impl Monitor {
    fn new(norm0: f64) -> Self {
        Self { norm0, max_drift: 0.0, steps: 0 }
    }

    fn record(&mut self, t: f64, x: &Vec3, xi: &Vec3) -> Result<()> {
        self.steps += 1;
        if !x.iter().chain(xi.iter()).all(|c| c.is_finite()) {
            return Err(Error::Integration { time: t, reason: "state became non-finite".into() });
        }
        self.max_drift = self.max_drift.max((xi.norm() - self.norm0).abs());
        Ok(())
    }
}

/// Sampled characteristic.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub initial_norm: f64,
    /// max over all steps of ||ξ(t)| − |ξ(0)||.
    pub max_norm_drift: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> Option<&PhaseState> {
        self.states.last()
    }

    /// Rows (t, x₁, x₂, x₃, ξ₁, ξ₂, ξ₃, ||ξ| − |ξ(0)||).
    pub fn rows(&self) -> Vec<[f64; 8]> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(t, s)| [*t, s.x.x, s.x.y, s.x.z, s.xi.x, s.xi.y, s.xi.z, (s.xi.norm() - self.initial_norm).abs()])
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FlowJacobian {
    /// Rows and columns ordered (x₁, x₂, x₃, ξ₁, ξ₂, ξ₃).
    pub matrix: Matrix6<f64>,
    pub det: f64,
    pub end: PhaseState,
}

pub fn integrate_linear(
    model: &dyn MagneticField,
    start: PhaseState,
    times: &[f64],
    config: IntegratorConfig,
) -> Result<Trajectory> {
    FlowSystem::linear(model, config)?.integrate(start, times)
}

pub fn integrate_straightened(
    model: &dyn MagneticField,
    fields: Option<&dyn InternalFields>,
    start: PhaseState,
    times: &[f64],
    config: IntegratorConfig,
) -> Result<Trajectory> {
    FlowSystem::straightened(model, fields, config)?.integrate(start, times)
}

pub fn integrate_full(
    model: &dyn MagneticField,
    fields: Option<&dyn InternalFields>,
    start: PhaseState,
    times: &[f64],
    config: IntegratorConfig,
) -> Result<Trajectory> {
    FlowSystem::full(model, fields, config)?.integrate(start, times)
}

/// The point at time 0 of the characteristic through `state` at time t.
pub fn backward_flow(system: &FlowSystem, state: PhaseState, t: f64) -> Result<PhaseState> {
    system.transport(state, t, 0.0)
}

pub fn flow_jacobian(system: &FlowSystem, state: PhaseState, t: f64) -> Result<FlowJacobian> {
    system.jacobian(state, t)
}

/// Upper bounds on the momentum support, R(tₖ) = R₀ + εC∫₀^{tₖ} sup|E(s)| ds (trapezoid
/// rule on the samples `(tₖ, sup|E(tₖ)|)`, which must start at t = 0).
pub fn support_radius_bound(r0: f64, epsilon: f64, c: f64, e_sup: &[(f64, f64)]) -> Result<Vec<f64>> {
    if !(r0 >= 0.0) || !(epsilon > 0.0) || !(c >= 0.0) {
        return Err(Error::Precondition("support bound needs R0 >= 0, epsilon > 0, C >= 0".into()));
    }
    if e_sup.first().is_some_and(|(t, _)| *t != 0.0)
        || e_sup.windows(2).any(|w| w[1].0 < w[0].0)
        || e_sup.iter().any(|(t, e)| !t.is_finite() || !(*e >= 0.0))
    {
        return Err(Error::Precondition(
            "E history must start at t = 0 with nondecreasing times and sup|E| >= 0".into(),
        ));
    }
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(e_sup.len());
    for (k, &(t, e)) in e_sup.iter().enumerate() {
        if k > 0 {
            let (tp, ep) = e_sup[k - 1];
            acc += 0.5 * (t - tp) * (e + ep);
        }
        out.push(r0 + epsilon * c * acc);
    }
    Ok(out)
}

/// ∂/∂ξ of v(ξ) = ξ/⟨ξ⟩, i.e. (I − v vᵗ)/⟨ξ⟩; handy for tangent-space work.
pub fn velocity_jacobian(xi: &Vec3) -> crate::Mat3 {
    let v = relativistic_velocity(xi);
    (crate::Mat3::identity() - v * v.transpose()) / lorentz_factor(xi)
}

/// Fourth-order finite-difference Jacobian of F_t, the independent route for
/// [`FlowSystem::jacobian`].
pub fn flow_jacobian_fd(system: &FlowSystem, state: PhaseState, t: f64, h: f64) -> Result<Matrix6<f64>> {
    let pack = |s: &PhaseState| Vector6::new(s.x.x, s.x.y, s.x.z, s.xi.x, s.xi.y, s.xi.z);
    let unpack = |v: &Vector6<f64>| PhaseState::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]));
    let failure = std::cell::RefCell::new(None);
    let m = diff::jacobian(
        |v: &Vector6<f64>| match system.flow(unpack(v), t) {
            Ok(s) => pack(&s),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Vector6::zeros()
            }
        },
        &pack(&state),
        h,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

#[cfg(test)]
mod tests;
