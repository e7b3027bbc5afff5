//! Second-order averaging of the straightened characteristics in polar momentum
//! coordinates Ξ = (R cos Θ, R sin Θ, Z).
//!
//! Writing U = (X, R, Z), γ = ⟨Ξ⟩ and ω(U) = b_e(X)/γ, the straightened system reads
//!
//!   U̇ = F(U, Θ),   Θ̇ = ω(U)/ε + G(U, Θ),
//!
//! with F = (OΞ/γ, (cos Θ, sin Θ, 0)·Q/γ, Q₃/γ) and G = (−sin Θ, cos Θ, 0)·Q/(Rγ). Both are
//! trigonometric polynomials of degree 3 in Θ (Q is quadratic in Ξ and gets projected once
//! more), so 8 equispaced angles determine them exactly.
//!
//! With W the zero-mean Θ-antiderivative of F − F̄ divided by ω, the near-identity change
//! U = V + εW(V, Θ) turns the system into V̇ = F̄ + εF₂ + O(ε²) plus oscillations, where
//!
//!   F₂ = ⟨D_UF·W⟩ − ⟨(F − F̄)(∇ω·W + G)⟩/ω
//!
//! and ⟨·⟩ is the Θ-mean. The second-order approximation is then Ũ₂ solving
//! Ũ̇₂ = F̄(Ũ₂) + εF₂(Ũ₂), Ũ₂(0) = u − εW(u, θ), the phase Θ̇₁ = ω(Ũ₂)/ε + Ḡ(U₁), and
//! U₂ = Ũ₂ + εW(Ũ₂, Θ₁), with U₁ the solution of the plain averaged system U̇₁ = F̄(U₁).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SVector;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::characteristics::{FlowSystem, IntegratorConfig};
use crate::field_models::{lorentz_factor, FieldKind, MagneticField, PhaseState};
use crate::straightening::{drift_from_parts, rotation_at, rotation_gradient};
use crate::{Error, Result, Vec3};

type U5 = SVector<f64, 5>;
/// (F, G): the five slow equations and the slow part of the phase equation.
type Rhs = SVector<f64, 6>;

const SAMPLES: usize = 8;
/// Highest gyro-harmonic present in the straightened right-hand side.
pub const MAX_MODE: i32 = 3;
/// Angles used for the Θ-means in F₂ (exact for the degree-6 products involved).
const MEAN_SAMPLES: usize = 32;
const FD_STEP: f64 = 1e-5;
const MAX_STEP: f64 = 5e-3;

/// Straightened phase-space point in polar momentum coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarState {
    pub x: Vec3,
    pub r: f64,
    pub z: f64,
    pub theta: f64,
}

impl PolarState {
    pub fn from_phase(s: &PhaseState) -> Self {
        Self { x: s.x, r: s.xi.x.hypot(s.xi.y), z: s.xi.z, theta: s.xi.y.atan2(s.xi.x) }
    }

    pub fn to_phase(&self) -> PhaseState {
        let (s, c) = self.theta.sin_cos();
        PhaseState::new(self.x, Vec3::new(self.r * c, self.r * s, self.z))
    }

    fn slow(&self) -> U5 {
        U5::new(self.x.x, self.x.y, self.x.z, self.r, self.z)
    }
}

/// Gyro-Fourier coefficients c_n, n = −3..=3, of (F, G) at a fixed U:
/// (F, G)(U, Θ) = Σ c_n e^{inΘ}.
#[derive(Clone, Debug)]
pub struct FourierSplit {
    modes: [SVector<Complex64, 6>; (2 * MAX_MODE + 1) as usize],
}

impl FourierSplit {
    pub fn mode(&self, n: i32) -> SVector<Complex64, 6> {
        assert!(n.abs() <= MAX_MODE, "mode {n} outside -{MAX_MODE}..={MAX_MODE}");
        self.modes[(n + MAX_MODE) as usize]
    }

    /// Θ-mean (F̄, Ḡ).
    pub fn mean(&self) -> Rhs {
        self.mode(0).map(|c| c.re)
    }

    pub fn evaluate(&self, theta: f64) -> Rhs {
        let mut acc = Rhs::zeros();
        for n in -MAX_MODE..=MAX_MODE {
            let e = Complex64::from_polar(1.0, n as f64 * theta);
            acc += self.mode(n).map(|c| (c * e).re);
        }
        acc
    }

    /// W(Θ) = Σ_{n≠0} c_n e^{inΘ}/(inω) restricted to the five slow components.
    fn antiderivative(&self, theta: f64, omega: f64) -> U5 {
        let mut acc = U5::zeros();
        for n in (-MAX_MODE..=MAX_MODE).filter(|n| *n != 0) {
            let e = Complex64::from_polar(1.0, n as f64 * theta) / Complex64::new(0.0, n as f64 * omega);
            let c = self.mode(n);
            for i in 0..5 {
                acc[i] += (c[i] * e).re;
            }
        }
        acc
    }
}

/// Averaged approximation of the straightened flow for a general-direction field.
#[derive(Clone)]
pub struct GeneralDirectionApprox<'a> {
    model: &'a dyn MagneticField,
    epsilon: f64,
    fft: Arc<dyn Fft<f64>>,
}

/// Sampled output of [`averaged_flow_general`]; slow vectors are (X₁, X₂, X₃, R, Z).
#[derive(Clone, Debug)]
pub struct AveragedTrajectory {
    pub times: Vec<f64>,
    pub u1: Vec<U5>,
    pub u2_tilde: Vec<U5>,
    pub u2: Vec<U5>,
    pub theta1: Vec<f64>,
}

impl<'a> GeneralDirectionApprox<'a> {
    pub fn new(model: &'a dyn MagneticField, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Precondition(format!("epsilon = {epsilon} must be positive")));
        }
        let fft = FftPlanner::<f64>::new().plan_fft_forward(SAMPLES);
        Ok(Self { model, epsilon, fft })
    }

    /// (F, G) at (U, Θ).
    pub fn rhs(&self, u: &U5, theta: f64) -> Result<Rhs> {
        let x = Vec3::new(u[0], u[1], u[2]);
        let (r, z) = (u[3], u[4]);
        if !(r > 0.0) {
            return Err(Error::Domain(format!("perpendicular momentum R = {r:e} must stay positive")));
        }
        let (s, c) = theta.sin_cos();
        let xi = Vec3::new(r * c, r * s, z);
        let gamma = lorentz_factor(&xi);
        let frame = rotation_at(self.model, &x)?;
        let q = match self.model.kind() {
            FieldKind::Constant => Vec3::zeros(),
            _ => drift_from_parts(&frame, &rotation_gradient(self.model, &x)?, &xi),
        };
        let ox = frame.o() * xi / gamma;
        Ok(Rhs::from_column_slice(&[
            ox.x,
            ox.y,
            ox.z,
            (c * q.x + s * q.y) / gamma,
            q.z / gamma,
            (c * q.y - s * q.x) / (r * gamma),
        ]))
    }

    /// Leading gyration rate ω(U) = b_e(X)/⟨Ξ⟩ (the phase advances at ω/ε).
    pub fn omega(&self, u: &U5) -> f64 {
        let x = Vec3::new(u[0], u[1], u[2]);
        self.model.magnitude(&x) / (1.0 + u[3] * u[3] + u[4] * u[4]).sqrt()
    }

    pub fn fourier_split(&self, u: &U5) -> Result<FourierSplit> {
        let mut channels = vec![vec![Complex64::default(); SAMPLES]; 6];
        for k in 0..SAMPLES {
            let rhs = self.rhs(u, 2.0 * PI * k as f64 / SAMPLES as f64)?;
            for (ch, v) in channels.iter_mut().zip(rhs.iter()) {
                ch[k] = Complex64::new(*v, 0.0);
            }
        }
        let mut modes = [SVector::<Complex64, 6>::zeros(); (2 * MAX_MODE + 1) as usize];
        for (i, ch) in channels.iter_mut().enumerate() {
            self.fft.process(ch);
            for n in -MAX_MODE..=MAX_MODE {
                modes[(n + MAX_MODE) as usize][i] = ch[n.rem_euclid(SAMPLES as i32) as usize] / SAMPLES as f64;
            }
        }
        Ok(FourierSplit { modes })
    }

    /// W(U, Θ).
    pub fn correction(&self, u: &U5, theta: f64) -> Result<U5> {
        Ok(self.fourier_split(u)?.antiderivative(theta, self.omega(u)))
    }

    /// F₂(U), the O(ε) correction of the averaged vector field.
    pub fn second_order_field(&self, u: &U5) -> Result<U5> {
        let split = self.fourier_split(u)?;
        let omega = self.omega(u);
        let mean = split.mean();
        let mut acc = U5::zeros();
        for k in 0..MEAN_SAMPLES {
            let theta = 2.0 * PI * k as f64 / MEAN_SAMPLES as f64;
            let w = split.antiderivative(theta, omega);
            let (up, um) = (u + w * FD_STEP, u - w * FD_STEP);
            let df = (self.rhs(&up, theta)? - self.rhs(&um, theta)?) / (2.0 * FD_STEP);
            let d_omega = (self.omega(&up) - self.omega(&um)) / (2.0 * FD_STEP);
            let here = self.rhs(u, theta)?;
            let osc = (here - mean).fixed_rows::<5>(0).into_owned();
            acc += df.fixed_rows::<5>(0).into_owned() - osc * ((d_omega + here[5]) / omega);
        }
        Ok(acc / MEAN_SAMPLES as f64)
    }

    fn averaged_rhs(&self, y: &SVector<f64, 11>) -> Result<SVector<f64, 11>> {
        let u1 = y.fixed_rows::<5>(0).into_owned();
        let u2 = y.fixed_rows::<5>(5).into_owned();
        let s1 = self.fourier_split(&u1)?.mean();
        let s2 = self.fourier_split(&u2)?.mean();
        let f2 = self.second_order_field(&u2)?;
        let mut out = SVector::<f64, 11>::zeros();
        out.fixed_rows_mut::<5>(0).copy_from(&s1.fixed_rows::<5>(0));
        out.fixed_rows_mut::<5>(5).copy_from(&(s2.fixed_rows::<5>(0) + f2 * self.epsilon));
        out[10] = self.omega(&u2) / self.epsilon + s1[5];
        Ok(out)
    }

    pub fn integrate(&self, start: &PolarState, t_grid: &[f64]) -> Result<AveragedTrajectory> {
        if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("output times must be finite, >= 0 and strictly increasing".into()));
        }
        let u = start.slow();
        let mut y = SVector::<f64, 11>::zeros();
        y.fixed_rows_mut::<5>(0).copy_from(&u);
        y.fixed_rows_mut::<5>(5).copy_from(&(u - self.correction(&u, start.theta)? * self.epsilon));
        y[10] = start.theta;
        let mut out = AveragedTrajectory {
            times: t_grid.to_vec(),
            u1: Vec::with_capacity(t_grid.len()),
            u2_tilde: Vec::with_capacity(t_grid.len()),
            u2: Vec::with_capacity(t_grid.len()),
            theta1: Vec::with_capacity(t_grid.len()),
        };
        let mut t = 0.0;
        for &target in t_grid {
            let n = ((target - t) / MAX_STEP).ceil() as usize;
            let h = if n > 0 { (target - t) / n as f64 } else { 0.0 };
            for _ in 0..n {
                let k1 = self.averaged_rhs(&y)?;
                let k2 = self.averaged_rhs(&(y + k1 * (0.5 * h)))?;
                let k3 = self.averaged_rhs(&(y + k2 * (0.5 * h)))?;
                let k4 = self.averaged_rhs(&(y + k3 * h))?;
                y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            t = target;
            let u2t = y.fixed_rows::<5>(5).into_owned();
            out.u1.push(y.fixed_rows::<5>(0).into_owned());
            out.u2.push(u2t + self.correction(&u2t, y[10])? * self.epsilon);
            out.u2_tilde.push(u2t);
            out.theta1.push(y[10]);
        }
        Ok(out)
    }
}

/// Gyro-Fourier split of the straightened polar right-hand side at U = (x, r, z).
pub fn fourier_split_rhs(model: &dyn MagneticField, x: &Vec3, r: f64, z: f64) -> Result<FourierSplit> {
    GeneralDirectionApprox::new(model, 1.0)?.fourier_split(&U5::new(x.x, x.y, x.z, r, z))
}

/// U₁, Ũ₂, U₂ and Θ₁ from a straightened phase-space point with ξ̄ ≠ 0.
pub fn averaged_flow_general(
    model: &dyn MagneticField,
    state: &PhaseState,
    epsilon: f64,
    t_grid: &[f64],
) -> Result<AveragedTrajectory> {
    let polar = PolarState::from_phase(state);
    if !(polar.r > 0.0) {
        return Err(Error::Domain("averaging needs a nonzero perpendicular momentum".into()));
    }
    GeneralDirectionApprox::new(model, epsilon)?.integrate(&polar, t_grid)
}

/// Sup-norm errors |U − U₂| and |Θ − Θ₁| (mod 2π) against the straightened flow integrated
/// at 8× the resolution of `config`.
pub fn approx_error_general(
    model: &dyn MagneticField,
    state: &PhaseState,
    epsilon: f64,
    t_grid: &[f64],
    config: IntegratorConfig,
) -> Result<(f64, f64)> {
    let avg = averaged_flow_general(model, state, epsilon, t_grid)?;
    let cfg = IntegratorConfig {
        epsilon,
        steps_per_gyroperiod: config.steps_per_gyroperiod * super::TRUTH_REFINEMENT,
        ..config
    };
    let truth = FlowSystem::straightened(model, None, cfg)?.integrate(*state, t_grid)?;
    let (mut eu, mut eth) = (0.0f64, 0.0f64);
    for (k, s) in truth.states.iter().enumerate() {
        let p = PolarState::from_phase(s);
        eu = eu.max((p.slow() - avg.u2[k]).norm());
        eth = eth.max(wrap_angle(p.theta - avg.theta1[k]).abs());
    }
    Ok((eu, eth))
}

/// Representative of an angle in (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
