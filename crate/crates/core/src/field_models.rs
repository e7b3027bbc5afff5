//! External magnetic fields, the relativistic velocity map, equilibrium profiles and the
//! admissibility checks a field must pass before it is used to drive characteristics.
//!
//! A field is anything implementing [`MagneticField`]. The built-in models carry analytic
//! first and second derivatives; [`FnField`] wraps a closure and differentiates it with
//! fourth-order centered differences at step `1e-4 · diameter(region)`.

use crate::error::fmt_point;
use crate::quadrature::MomentumGrid;
use crate::{diff, Error, Mat3, Result, Vec3};

/// ⟨ξ⟩ = √(1 + |ξ|²).
#[inline]
pub fn lorentz_factor(xi: &Vec3) -> f64 {
    (1.0 + xi.norm_squared()).sqrt()
}

/// v(ξ) = ξ/⟨ξ⟩. Always strictly slower than light for finite ξ.
#[inline]
pub fn relativistic_velocity(xi: &Vec3) -> Vec3 {
    xi / lorentz_factor(xi)
}

/// ξ̄ = (ξ₁, ξ₂, 0).
#[inline]
pub fn horizontal(xi: &Vec3) -> Vec3 {
    Vec3::new(xi.x, xi.y, 0.0)
}

/// ξ^⊥ = (ξ₂, −ξ₁, 0) = ξ × e₃.
#[inline]
pub fn perp(xi: &Vec3) -> Vec3 {
    Vec3::new(xi.y, -xi.x, 0.0)
}

/// A point of phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState {
    pub x: Vec3,
    pub xi: Vec3,
}

impl PhaseState {
    pub fn new(x: Vec3, xi: Vec3) -> Self {
        Self { x, xi }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.xi.iter()).all(|c| c.is_finite())
    }

    pub fn gamma(&self) -> f64 {
        lorentz_factor(&self.xi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Constant,
    FixedDirection,
    GeneralDirection,
}

/// Axis-aligned box used for validation and finite-difference scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Region {
    pub fn cube(half_width: f64) -> Self {
        Self { lo: Vec3::repeat(-half_width), hi: Vec3::repeat(half_width) }
    }

    pub fn diameter(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// `n` points per axis including the faces.
    pub fn grid(&self, n: usize) -> Vec<Vec3> {
        let n = n.max(2);
        let step = (self.hi - self.lo) / (n - 1) as f64;
        let mut pts = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    pts.push(self.lo + Vec3::new(step.x * i as f64, step.y * j as f64, step.z * k as f64));
                }
            }
        }
        pts
    }

    pub fn grid_step(&self, n: usize) -> f64 {
        let side = self.hi - self.lo;
        side.min() / (n.max(2) - 1) as f64
    }
}

/// An external field B_e with the metadata the admissibility checks need.
///
/// `magnitude` is b_e. For fixed-direction models it is the signed coefficient of e₃,
/// so a model whose coefficient crosses zero shows up as a lower-bound violation.
pub trait MagneticField: Send + Sync {
    fn kind(&self) -> FieldKind;
    fn region(&self) -> Region;
    /// The constant c(K) with c ≤ b_e ≤ 1/c on the region.
    fn c_lower(&self) -> f64;
    fn field(&self, x: &Vec3) -> Vec3;

    /// J_ij = ∂B_i/∂x_j.
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        diff::jacobian3(|y| self.field(y), x, fd_step(&self.region()))
    }

    fn magnitude(&self, x: &Vec3) -> f64 {
        self.field(x).norm()
    }

    fn grad_magnitude(&self, x: &Vec3) -> Vec3 {
        let b = self.field(x);
        self.jacobian(x).transpose() * b / b.norm()
    }

    fn hess_magnitude(&self, x: &Vec3) -> Mat3 {
        let h = diff::jacobian3(|y| self.grad_magnitude(y), x, fd_step(&self.region()));
        (h + h.transpose()) * 0.5
    }

    fn describe(&self) -> String;
}

fn fd_step(region: &Region) -> f64 {
    1e-4 * region.diameter().max(1e-12)
}

/// Uniform field.
#[derive(Clone, Debug)]
pub struct ConstantField {
    pub b: Vec3,
    pub region: Region,
}

impl ConstantField {
    pub fn new(b: Vec3) -> Self {
        Self { b, region: Region::cube(2.0) }
    }

    pub fn along_e3(strength: f64) -> Self {
        Self::new(Vec3::new(0.0, 0.0, strength))
    }
}

impl MagneticField for ConstantField {
    fn kind(&self) -> FieldKind {
        FieldKind::Constant
    }
    fn region(&self) -> Region {
        self.region
    }
    fn c_lower(&self) -> f64 {
        let b = self.b.norm();
        b.min(1.0 / b)
    }
    fn field(&self, _x: &Vec3) -> Vec3 {
        self.b
    }
    fn jacobian(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn grad_magnitude(&self, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn hess_magnitude(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn describe(&self) -> String {
        format!("constant B = ({}, {}, {})", self.b.x, self.b.y, self.b.z)
    }
}

/// B_e = b_e(x₁, x₂)·e₃ with b_e = b₀ + a·sin(k₁x₁) + c·cos(k₂x₂).
#[derive(Clone, Debug)]
pub struct FixedDirectionField {
    pub b0: f64,
    pub a: f64,
    pub k1: f64,
    pub c: f64,
    pub k2: f64,
    pub region: Region,
    c_lower: f64,
}

impl FixedDirectionField {
    pub fn new(b0: f64, a: f64, k1: f64, c: f64, k2: f64) -> Self {
        let lower = b0 - a.abs() - c.abs();
        let upper = b0 + a.abs() + c.abs();
        // A model that can reach zero keeps a tiny declared bound so validation flags it.
        let c_lower = if lower > 0.0 { lower.min(1.0 / upper) } else { 1e-6 };
        Self { b0, a, k1, c, k2, region: Region::cube(2.0), c_lower }
    }

    /// b_e = 1 + 0.1 sin x₁, the model of the convergence studies.
    pub fn sine(amplitude: f64) -> Self {
        Self::new(1.0, amplitude, 1.0, 0.0, 1.0)
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn with_c_lower(mut self, c: f64) -> Self {
        self.c_lower = c;
        self
    }

    #[inline]
    pub fn b_e(&self, x: &Vec3) -> f64 {
        self.b0 + self.a * (self.k1 * x.x).sin() + self.c * (self.k2 * x.y).cos()
    }
}

impl MagneticField for FixedDirectionField {
    fn kind(&self) -> FieldKind {
        FieldKind::FixedDirection
    }
    fn region(&self) -> Region {
        self.region
    }
    fn c_lower(&self) -> f64 {
        self.c_lower
    }
    fn field(&self, x: &Vec3) -> Vec3 {
        Vec3::new(0.0, 0.0, self.b_e(x))
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let g = self.grad_magnitude(x);
        let mut j = Mat3::zeros();
        j.set_row(2, &g.transpose());
        j
    }
    fn magnitude(&self, x: &Vec3) -> f64 {
        self.b_e(x)
    }
    fn grad_magnitude(&self, x: &Vec3) -> Vec3 {
        Vec3::new(self.a * self.k1 * (self.k1 * x.x).cos(), -self.c * self.k2 * (self.k2 * x.y).sin(), 0.0)
    }
    fn hess_magnitude(&self, x: &Vec3) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(
            -self.a * self.k1 * self.k1 * (self.k1 * x.x).sin(),
            -self.c * self.k2 * self.k2 * (self.k2 * x.y).cos(),
            0.0,
        ))
    }
    fn describe(&self) -> String {
        format!("fixed-direction b = {} + {} sin({} x1) + {} cos({} x2)", self.b0, self.a, self.k1, self.c, self.k2)
    }
}

/// Curl- and divergence-free field B_e = ∇ψ with the harmonic potential
/// ψ = x₃ + α(x₁² − x₂²) + β x₁x₃, i.e. B_e = (2αx₁ + βx₃, −2αx₂, 1 + βx₁).
#[derive(Clone, Debug)]
pub struct HarmonicField {
    pub alpha: f64,
    pub beta: f64,
    pub region: Region,
}

impl HarmonicField {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, region: Region::cube(1.0) }
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    fn gradient_matrix(&self) -> Mat3 {
        let (a, b) = (self.alpha, self.beta);
        Mat3::new(2.0 * a, 0.0, b, 0.0, -2.0 * a, 0.0, b, 0.0, 0.0)
    }

    fn bounds(&self) -> (f64, f64) {
        let m = self.region.lo.abs().sup(&self.region.hi.abs());
        let (a, b) = (self.alpha.abs(), self.beta.abs());
        let lower = 1.0 - b * m.x;
        let upper = ((2.0 * a * m.x + b * m.z).powi(2) + (2.0 * a * m.y).powi(2) + (1.0 + b * m.x).powi(2)).sqrt();
        (lower, upper)
    }
}

impl MagneticField for HarmonicField {
    fn kind(&self) -> FieldKind {
        FieldKind::GeneralDirection
    }
    fn region(&self) -> Region {
        self.region
    }
    fn c_lower(&self) -> f64 {
        let (lower, upper) = self.bounds();
        if lower > 0.0 {
            lower.min(1.0 / upper)
        } else {
            1e-6
        }
    }
    fn field(&self, x: &Vec3) -> Vec3 {
        let (a, b) = (self.alpha, self.beta);
        Vec3::new(2.0 * a * x.x + b * x.z, -2.0 * a * x.y, 1.0 + b * x.x)
    }
    fn jacobian(&self, _x: &Vec3) -> Mat3 {
        self.gradient_matrix()
    }
    fn grad_magnitude(&self, x: &Vec3) -> Vec3 {
        // J is symmetric for a gradient field.
        let b = self.field(x);
        self.gradient_matrix() * b / b.norm()
    }
    fn hess_magnitude(&self, x: &Vec3) -> Mat3 {
        let b = self.field(x);
        let bn = b.norm();
        let j = self.gradient_matrix();
        let jb = j * b;
        j * j / bn - jb * jb.transpose() / bn.powi(3)
    }
    fn describe(&self) -> String {
        format!("harmonic psi = x3 + {}(x1^2 - x2^2) + {} x1 x3", self.alpha, self.beta)
    }
}

/// A user-supplied field; all derivatives by fourth-order finite differences.
pub struct FnField<F> {
    f: F,
    kind: FieldKind,
    region: Region,
    c_lower: f64,
}

impl<F: Fn(&Vec3) -> Vec3 + Send + Sync> FnField<F> {
    pub fn new(kind: FieldKind, region: Region, c_lower: f64, f: F) -> Self {
        Self { f, kind, region, c_lower }
    }
}

impl<F: Fn(&Vec3) -> Vec3 + Send + Sync> MagneticField for FnField<F> {
    fn kind(&self) -> FieldKind {
        self.kind
    }
    fn region(&self) -> Region {
        self.region
    }
    fn c_lower(&self) -> f64 {
        self.c_lower
    }
    fn field(&self, x: &Vec3) -> Vec3 {
        (self.f)(x)
    }
    fn magnitude(&self, x: &Vec3) -> f64 {
        let b = (self.f)(x);
        match self.kind {
            FieldKind::FixedDirection => b.z,
            _ => b.norm(),
        }
    }
    fn describe(&self) -> String {
        format!("user field ({:?})", self.kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Issue {
    Divergence { max: f64, at: Vec3 },
    Curl { max: f64, at: Vec3 },
    BelowLowerBound { min: f64, bound: f64, at: Vec3 },
    AboveUpperBound { max: f64, bound: f64, at: Vec3 },
}

#[derive(Clone, Copy, Debug)]
pub struct ValidationOptions {
    pub points_per_axis: usize,
    /// Divergence and (for general-direction fields) curl above this are reported.
    pub tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { points_per_axis: 17, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub max_div: f64,
    pub max_curl: f64,
    pub min_b: f64,
    pub max_b: f64,
    pub grid_step: f64,
    pub issues: Vec<(Severity, Issue)>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.issues.iter().all(|(s, _)| *s == Severity::Warning)
    }

    pub fn lower_bound_violated(&self) -> bool {
        self.issues.iter().any(|(_, i)| matches!(i, Issue::BelowLowerBound { .. }))
    }
}

/// Samples the region, computing divergence and curl by second-order centered differences
/// at the grid step. Curl is a warning for fixed-direction fields (a varying b_e(x₁,x₂)e₃
/// cannot be curl-free) and an error for general-direction ones.
pub fn validate_field(model: &dyn MagneticField, opts: ValidationOptions) -> Result<ValidationReport> {
    let region = model.region();
    let h = region.grid_step(opts.points_per_axis);
    let c = model.c_lower();
    let mut rep = ValidationReport {
        max_div: 0.0,
        max_curl: 0.0,
        min_b: f64::INFINITY,
        max_b: f64::NEG_INFINITY,
        grid_step: h,
        issues: Vec::new(),
    };
    let (mut div_at, mut curl_at, mut min_at, mut max_at) =
        (Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
    for x in region.grid(opts.points_per_axis) {
        let b = model.field(&x);
        let mag = model.magnitude(&x);
        if !b.iter().all(|v| v.is_finite()) || !mag.is_finite() {
            return Err(Error::NonFinite { what: "field value", at: fmt_point(&x) });
        }
        let mut jac = Mat3::zeros();
        for j in 0..3 {
            let e = Vec3::ith(j, h);
            let d = (model.field(&(x + e)) - model.field(&(x - e))) / (2.0 * h);
            if !d.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { what: "field value", at: fmt_point(&(x + e)) });
            }
            jac.set_column(j, &d);
        }
        let div = jac.trace().abs();
        let curl = Vec3::new(jac[(2, 1)] - jac[(1, 2)], jac[(0, 2)] - jac[(2, 0)], jac[(1, 0)] - jac[(0, 1)]).norm();
        if div > rep.max_div {
            rep.max_div = div;
            div_at = x;
        }
        if curl > rep.max_curl {
            rep.max_curl = curl;
            curl_at = x;
        }
        if mag < rep.min_b {
            rep.min_b = mag;
            min_at = x;
        }
        if mag > rep.max_b {
            rep.max_b = mag;
            max_at = x;
        }
    }
    if rep.max_div > opts.tolerance {
        rep.issues.push((Severity::Error, Issue::Divergence { max: rep.max_div, at: div_at }));
    }
    if rep.max_curl > opts.tolerance {
        let sev = match model.kind() {
            FieldKind::GeneralDirection => Severity::Error,
            _ => Severity::Warning,
        };
        rep.issues.push((sev, Issue::Curl { max: rep.max_curl, at: curl_at }));
    }
    if rep.min_b < c {
        rep.issues.push((Severity::Error, Issue::BelowLowerBound { min: rep.min_b, bound: c, at: min_at }));
    }
    if rep.max_b > 1.0 / c {
        rep.issues.push((Severity::Error, Issue::AboveUpperBound { max: rep.max_b, bound: 1.0 / c, at: max_at }));
    }
    Ok(rep)
}

/// sup over `positions` of |∫ f_in(x, ξ) dξ|.
pub fn neutrality_check(f_in: impl Fn(&Vec3, &Vec3) -> f64, grid: &MomentumGrid, positions: &[Vec3]) -> Result<f64> {
    let mut sup = 0.0f64;
    for x in positions {
        grid.check_support(|xi| f_in(x, xi))?;
        let rho = grid.integrate(|n| f_in(x, &n.xi));
        if !rho.is_finite() {
            return Err(Error::NonFinite { what: "momentum integral", at: fmt_point(x) });
        }
        sup = sup.max(rho.abs());
    }
    Ok(sup)
}

/// Background profile M(|ξ|).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EquilibriumProfile {
    Zero,
    /// M(r) = A·(1 − r²/R²)³ on r < R, zero beyond.
    Polynomial {
        amplitude: f64,
        radius: f64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileReport {
    pub vanishes_beyond_support: bool,
    pub even_extension_ok: bool,
    pub max_derivative_over_r: f64,
}

impl EquilibriumProfile {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Polynomial { amplitude, radius } => {
                let s = 1.0 - (r / radius).powi(2);
                if s > 0.0 {
                    amplitude * s.powi(3)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        r * self.derivative_over_r(r)
    }

    /// M'(r)/r, which stays bounded at r = 0 for an even profile.
    pub fn derivative_over_r(&self, r: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Polynomial { amplitude, radius } => {
                let s = 1.0 - (r / radius).powi(2);
                if s > 0.0 {
                    -6.0 * amplitude / (radius * radius) * s * s
                } else {
                    0.0
                }
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Polynomial { radius, .. } => radius,
        }
    }

    pub fn check(&self) -> ProfileReport {
        let rm = self.support_radius();
        let vanishes = (1..=64).all(|k| self.value(rm * (1.0 + k as f64 / 16.0)) == 0.0);
        let small: Vec<f64> = (1..=100).map(|k| 1e-5 * k as f64).collect();
        let max_ratio = small.iter().map(|&r| (self.derivative(r) / r).abs()).fold(0.0, f64::max);
        let even = self.derivative(0.0) == 0.0 && max_ratio.is_finite();
        ProfileReport { vanishes_beyond_support: vanishes, even_extension_ok: even, max_derivative_over_r: max_ratio }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_examples() {
        assert_eq!(relativistic_velocity(&Vec3::zeros()), Vec3::zeros());
        let v = relativistic_velocity(&Vec3::new(1.0, 0.0, 0.0));
        assert!((v.x - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let v = relativistic_velocity(&Vec3::new(3.0, 4.0, 0.0));
        assert!((v.norm() - 5.0 / 26f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let fixed = FixedDirectionField::new(1.0, 0.1, 1.3, 0.05, 0.7);
        let harmonic = HarmonicField::new(0.2, 0.15);
        let x = Vec3::new(0.31, -0.42, 0.27);
        for m in [&fixed as &dyn MagneticField, &harmonic] {
            let fd_j = diff::jacobian3(|y| m.field(y), &x, 1e-3);
            assert!((m.jacobian(&x) - fd_j).norm() < 1e-10);
            let fd_g = diff::gradient(|y: &Vec3| m.magnitude(y), &x, 1e-3);
            assert!((m.grad_magnitude(&x) - fd_g).norm() < 1e-10);
            let fd_h = diff::jacobian3(|y| m.grad_magnitude(y), &x, 1e-3);
            assert!((m.hess_magnitude(&x) - fd_h).norm() < 1e-9);
        }
    }

    #[test]
    fn fn_field_differences_agree_with_builtin() {
        let h = HarmonicField::new(0.2, 0.15);
        let user = FnField::new(FieldKind::GeneralDirection, h.region, h.c_lower(), |x: &Vec3| {
            Vec3::new(0.4 * x.x + 0.15 * x.z, -0.4 * x.y, 1.0 + 0.15 * x.x)
        });
        let x = Vec3::new(0.1, 0.2, -0.3);
        assert!((user.jacobian(&x) - h.jacobian(&x)).norm() < 1e-9);
        assert!((user.hess_magnitude(&x) - h.hess_magnitude(&x)).norm() < 1e-6);
    }

    #[test]
    fn validation_examples() {
        let rep = validate_field(&ConstantField::along_e3(1.0), ValidationOptions::default()).unwrap();
        assert_eq!(rep.max_div, 0.0);
        assert_eq!(rep.max_curl, 0.0);
        assert_eq!(rep.min_b, 1.0);
        assert!(rep.is_admissible());

        let rep = validate_field(&FixedDirectionField::sine(0.1), ValidationOptions::default()).unwrap();
        assert_eq!(rep.max_div, 0.0);
        // |curl| = |∂₁b| ≤ 0.1, attained at x₁ = 0; the centered difference shrinks it by sinc(h)
        let h = rep.grid_step;
        assert!((rep.max_curl - 0.1 * h.sin() / h).abs() < 1e-12, "{}", rep.max_curl);
        assert!(rep.is_admissible(), "curl is only a warning here");

        let crossing = FixedDirectionField::new(0.05, 0.1, 1.0, 0.0, 1.0);
        let rep = validate_field(&crossing, ValidationOptions::default()).unwrap();
        assert!(rep.lower_bound_violated());

        let rep = validate_field(&HarmonicField::new(0.2, 0.15), ValidationOptions::default()).unwrap();
        assert!(rep.max_div < 1e-12 && rep.max_curl < 1e-12);
        assert!(rep.is_admissible());

        let bad =
            FnField::new(FieldKind::GeneralDirection, Region::cube(1.0), 0.1, |x: &Vec3| Vec3::new(-x.y, x.x, 1.0));
        let rep = validate_field(&bad, ValidationOptions::default()).unwrap();
        assert!(!rep.is_admissible());
    }

    #[test]
    fn non_finite_field_is_reported() {
        let bad = FnField::new(FieldKind::GeneralDirection, Region::cube(1.0), 0.1, |x: &Vec3| {
            Vec3::new(0.0, 0.0, 1.0 / x.x)
        });
        assert!(matches!(validate_field(&bad, ValidationOptions::default()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn profile_checks() {
        let m = EquilibriumProfile::Polynomial { amplitude: 1.0, radius: 1.5 };
        let rep = m.check();
        assert!(rep.vanishes_beyond_support && rep.even_extension_ok);
        assert!((rep.max_derivative_over_r - 6.0 / 2.25).abs() < 1e-6);
        assert_eq!(EquilibriumProfile::Zero.value(0.3), 0.0);
    }
}
