//! Wave-kernel side of the field representation: the division-lemma symbols p and q, their
//! bounds on S², the shell convolution (gY)*(f·1_{t>0}) written as a time-sphere integral,
//! the Kirchhoff initial-data terms, and two identities checked by independent quadratures.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::field_models::{lorentz_factor, relativistic_velocity, MagneticField};
use crate::quadrature::{GaussRule, MomentumGrid, SphericalQuadrature};
use crate::straightening::rotation_at;
use crate::{Error, Mat3, Result, Vec3};

/// Below this |v·x − t| a symbol evaluation is refused.
pub const CONE_GUARD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSymbol {
    P,
    Q,
}

impl KernelSymbol {
    /// Degree of homogeneity in (t, x).
    pub fn degree(self) -> i32 {
        match self {
            Self::P => 0,
            Self::Q => -1,
        }
    }

    pub fn evaluate(self, t: f64, x: &Vec3, xi: &Vec3) -> Result<Vec3> {
        match self {
            Self::P => symbol_p(t, x, xi),
            Self::Q => symbol_q(t, x, xi),
        }
    }

    pub fn bound(self, r: f64) -> f64 {
        match self {
            Self::P => symbol_bound_p(r),
            Self::Q => symbol_bound_q(r),
        }
    }

    /// Exact sup over ω ∈ S² of |symbol(1, ω, ξ)|, from maximizing over c = ω·v/|v|.
    pub fn sharp_sup(self, xi: &Vec3) -> f64 {
        let g = lorentz_factor(xi);
        let a = relativistic_velocity(xi).norm();
        match self {
            Self::P => g,
            Self::Q if a <= 0.5 => 1.0 / (g * g * (1.0 - a)),
            Self::Q => 3.0 * 3f64.sqrt() / 4.0 * g,
        }
    }
}

fn cone_denominator(t: f64, x: &Vec3, v: &Vec3) -> Result<f64> {
    let d = v.dot(x) - t;
    if d.abs() < CONE_GUARD || !d.is_finite() {
        return Err(Error::NearCone { denominator: d });
    }
    Ok(d)
}

/// p(t, x, ξ) = (v t − x)/(v·x − t).
pub fn symbol_p(t: f64, x: &Vec3, xi: &Vec3) -> Result<Vec3> {
    let v = relativistic_velocity(xi);
    let d = cone_denominator(t, x, &v)?;
    Ok((v * t - x) / d)
}

/// q(t, x, ξ) = (v t − x)/(⟨ξ⟩²(v·x − t)²).
pub fn symbol_q(t: f64, x: &Vec3, xi: &Vec3) -> Result<Vec3> {
    let v = relativistic_velocity(xi);
    let d = cone_denominator(t, x, &v)?;
    Ok((v * t - x) / ((1.0 + xi.norm_squared()) * d * d))
}

/// 2(1 + R² + R√(1 + R²)).
pub fn symbol_bound_p(r: f64) -> f64 {
    2.0 * (1.0 + r * r + r * (1.0 + r * r).sqrt())
}

/// 2(1 + R² + R√(1 + R²))².
pub fn symbol_bound_q(r: f64) -> f64 {
    let inner = 1.0 + r * r + r * (1.0 + r * r).sqrt();
    2.0 * inner * inner
}

/// ∂p(1, ω, ξ)/∂ξ, analytic.
pub fn symbol_p_jacobian(omega: &Vec3, xi: &Vec3) -> Result<Mat3> {
    let v = relativistic_velocity(xi);
    let d = cone_denominator(1.0, omega, &v)?;
    let dp_dv = Mat3::identity() / d - (v - omega) * omega.transpose() / (d * d);
    let dv_dxi = (Mat3::identity() - v * v.transpose()) / lorentz_factor(xi);
    Ok(dp_dv * dv_dxi)
}

/// Numerical sup over ω ∈ S² of |symbol(1, ω, ξ)|: best node of `quad`, then a shrinking
/// pattern search on the sphere.
pub fn sup_on_sphere(symbol: KernelSymbol, xi: &Vec3, quad: &SphericalQuadrature) -> Result<f64> {
    let value = |w: &Vec3| symbol.evaluate(1.0, w, xi).map(|p| p.norm());
    let mut best = (f64::NEG_INFINITY, Vec3::z());
    for (w, _) in quad.iter() {
        let v = value(w)?;
        if v > best.0 {
            best = (v, *w);
        }
    }
    let (n_polar, _) = quad.shape();
    let mut step = PI / n_polar as f64;
    while step > 1e-10 {
        let w = best.1;
        let a = w.cross(&if w.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
        let b = w.cross(&a);
        let mut improved = false;
        for dir in
            [a, -a, b, -b, (a + b) / 2f64.sqrt(), -(a + b) / 2f64.sqrt(), (a - b) / 2f64.sqrt(), (b - a) / 2f64.sqrt()]
        {
            let cand = (w * step.cos() + dir * step.sin()).normalize();
            let v = value(&cand)?;
            if v > best.0 {
                best = (v, cand);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best.0)
}

/// (gY)*(f·1_{t>0})(t, x) = ∫₀ᵗ∫_{S²} g(ω)/(4π) f(t − s, x − sω) s^{1+m} dω ds for a weight
/// g = g(1, ·) of degree m ≥ −1.
pub fn shell_convolution(
    weight: impl Fn(&Vec3) -> f64 + Sync,
    degree: i32,
    f: impl Fn(f64, &Vec3) -> f64 + Sync,
    t: f64,
    x: &Vec3,
    quad: &SphericalQuadrature,
    time_nodes: usize,
) -> Result<f64> {
    let v = shell_convolution_vec(|w| Vec3::new(weight(w), 0.0, 0.0), degree, f, t, x, quad, time_nodes)?;
    Ok(v.x)
}

/// Vector-weighted version of [`shell_convolution`].
pub fn shell_convolution_vec(
    weight: impl Fn(&Vec3) -> Vec3 + Sync,
    degree: i32,
    f: impl Fn(f64, &Vec3) -> f64 + Sync,
    t: f64,
    x: &Vec3,
    quad: &SphericalQuadrature,
    time_nodes: usize,
) -> Result<Vec3> {
    if degree < -1 {
        return Err(Error::Precondition(format!("weight degree {degree} < -1 is not integrable")));
    }
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("t = {t} must be >= 0")));
    }
    let nodes: Vec<(f64, f64)> = GaussRule::new(time_nodes).on(0.0, t).collect();
    let weights: Vec<(Vec3, Vec3, f64)> = quad.iter().map(|(w, q)| (*w, weight(w), q)).collect();
    let partial: Vec<Result<Vec3>> = nodes
        .par_iter()
        .map(|&(s, ws)| {
            let mut acc = Vec3::zeros();
            let scale = ws * s.powi(1 + degree) / (4.0 * PI);
            for (w, g, q) in &weights {
                let val = f(t - s, &(x - w * s));
                if !val.is_finite() {
                    return Err(Error::NonFinite {
                        what: "shell source",
                        at: format!("s = {s:e}, omega = {}", crate::error::fmt_point(w)),
                    });
                }
                acc += g * (q * val * scale);
            }
            Ok(acc)
        })
        .collect();
    partial.into_iter().try_fold(Vec3::zeros(), |acc, p| Ok(acc + p?))
}

/// The bound t^{1+m}·sup|g|·∫₀ᵗ sup|f(s, ·)| ds on the shell convolution.
pub fn shell_bound(t: f64, degree: i32, sup_weight: f64, integrated_sup_source: f64) -> f64 {
    t.powi(1 + degree) * sup_weight * integrated_sup_source
}

/// Fourth-order centered derivative of a vector field along `dir`.
fn dir_derivative(f: &impl Fn(&Vec3) -> Vec3, x: &Vec3, dir: &Vec3, h: f64) -> Vec3 {
    crate::diff::directional(|y: &Vec3| f(y), x, dir, h)
}

fn curl(f: &impl Fn(&Vec3) -> Vec3, x: &Vec3, h: f64) -> Vec3 {
    let j = crate::diff::jacobian3(f, x, h);
    Vec3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
}

/// Kirchhoff terms (K₁, K₂) of the initial data at (t, x), with ∂ₜE|₀ = J(f_in) + ∇×B_in
/// and ∂ₜB|₀ = −∇×E_in. Spatial derivatives use fourth-order differences with step `h`.
#[allow(clippy::too_many_arguments)]
pub fn kirchhoff_terms(
    e_in: impl Fn(&Vec3) -> Vec3 + Sync,
    b_in: impl Fn(&Vec3) -> Vec3 + Sync,
    f_in: impl Fn(&Vec3, &Vec3) -> f64 + Sync,
    t: f64,
    x: &Vec3,
    sphere: &SphericalQuadrature,
    momentum: &MomentumGrid,
    h: f64,
) -> Result<(Vec3, Vec3)> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("Kirchhoff terms need t > 0, got {t}")));
    }
    momentum.check_support(|xi| f_in(x, xi))?;
    let current = |y: &Vec3| momentum.integrate_vec(|n| relativistic_velocity(&n.xi) * f_in(y, &n.xi));
    let nodes: Vec<(Vec3, f64)> = sphere.iter().map(|(w, q)| (*w, q)).collect();
    let terms: Vec<(Vec3, Vec3)> = nodes
        .par_iter()
        .map(|(w, q)| {
            let y = x + w * t;
            let de = current(&y) + curl(&b_in, &y, h);
            let db = -curl(&e_in, &y, h);
            let k1 = de * t + e_in(&y) + dir_derivative(&e_in, &y, w, h) * t;
            let k2 = db * t + b_in(&y) + dir_derivative(&b_in, &y, w, h) * t;
            (k1 * (*q / (4.0 * PI)), k2 * (*q / (4.0 * PI)))
        })
        .collect();
    let (k1, k2) = terms.into_iter().fold((Vec3::zeros(), Vec3::zeros()), |(a, b), (c, d)| (a + c, b + d));
    if !k1.iter().chain(k2.iter()).all(|c| c.is_finite()) {
        return Err(Error::NonFinite { what: "Kirchhoff term", at: crate::error::fmt_point(x) });
    }
    Ok((k1, k2))
}

/// Both sides of ∂ₜ(Y*1_{t>0}f) = Y*1_{t>0}∂ₜf + (t/4π)∫_{S²} f(0, x − tω) dω.
#[derive(Clone, Copy, Debug)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// The left side is a centered difference (step `dt`, fourth order) of the shell
/// convolution in t; the right side evaluates the two terms directly, with ∂ₜf by a
/// fourth-order difference of f.
pub fn time_derivative_identity_residual(
    f: impl Fn(f64, &Vec3) -> f64 + Sync,
    t: f64,
    x: &Vec3,
    quad: &SphericalQuadrature,
    time_nodes: usize,
    dt: f64,
) -> Result<IdentityResidual> {
    if !(t > 2.0 * dt) {
        return Err(Error::Precondition(format!("t = {t} must exceed twice the difference step {dt}")));
    }
    let u = |tt: f64| shell_convolution(|_| 1.0, 0, &f, tt, x, quad, time_nodes);
    let lhs = (u(t - 2.0 * dt)? - u(t + 2.0 * dt)? + 8.0 * (u(t + dt)? - u(t - dt)?)) / (12.0 * dt);
    let df = |s: f64, y: &Vec3| {
        (f(s - 2.0 * dt, y) - f(s + 2.0 * dt, y) + 8.0 * (f(s + dt, y) - f(s - dt, y))) / (12.0 * dt)
    };
    let bulk = shell_convolution(|_| 1.0, 0, df, t, x, quad, time_nodes)?;
    let boundary = t / (4.0 * PI) * quad.integrate(|w| f(0.0, &(x - w * t)));
    let rhs = bulk + boundary;
    Ok(IdentityResidual { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// Node counts for one side of the transfer identity.
#[derive(Clone, Debug)]
pub struct TransferQuadrature {
    pub sphere: SphericalQuadrature,
    pub momentum: MomentumGrid,
    pub time_nodes: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct TransferResult {
    pub lhs: Vec3,
    pub rhs: Vec3,
    /// |lhs − rhs|/max(|lhs|, |rhs|), or 0 when both vanish.
    pub relative: f64,
    pub absolute: f64,
}

/// Derivative transfer after straightening, with the common factor 1/ε removed:
///
///   ∫ p·Y*1_{t>0}∇_ξ·[(v × B_e)ḡ] dξ = −(1/4π)∫₀ᵗ∫_{S²}∫ s·(η^⊥·∇_η)[p(1, ω, O(y)η)]
///                                         ·(b_e(y)/⟨η⟩)·g(t − s, y, η) dη dω ds,
///
/// y = x − sω, ḡ(t, y, ξ) = g(t, y, Oᵗ(y)ξ). The left side differentiates ḡ numerically along
/// v × B_e (the divergence of v × B_e in ξ vanishes) and integrates in the straightened
/// variable η with the `lhs` nodes; the right side differentiates p analytically with the
/// `rhs` nodes.
pub fn transfer_identity_residual(
    model: &dyn MagneticField,
    g: impl Fn(f64, &Vec3, &Vec3) -> f64 + Sync,
    t: f64,
    x: &Vec3,
    lhs_quad: &TransferQuadrature,
    rhs_quad: &TransferQuadrature,
) -> Result<TransferResult> {
    lhs_quad.momentum.check_support(|eta| g(t, x, eta))?;
    rhs_quad.momentum.check_support(|eta| g(t, x, eta))?;
    let lhs = transfer_side(lhs_quad, t, x, |s, w, y| {
        let frame = rotation_at(model, y)?;
        let (o, o_t) = (frame.o(), frame.o_t);
        let field = model.field(y);
        let h = 1e-3;
        let mut acc = Vec3::zeros();
        for n in lhs_quad.momentum.nodes() {
            let xi = o * n.xi;
            let dir = relativistic_velocity(&xi).cross(&field);
            let gbar = |z: f64| g(t - s, y, &(o_t * (xi + dir * z)));
            let deriv = (gbar(-2.0 * h) - gbar(2.0 * h) + 8.0 * (gbar(h) - gbar(-h))) / (12.0 * h);
            if deriv != 0.0 {
                acc += symbol_p(1.0, w, &xi)? * (n.weight * deriv);
            }
        }
        Ok(acc)
    })?;
    let rhs = transfer_side(rhs_quad, t, x, |s, w, y| {
        let frame = rotation_at(model, y)?;
        let o = frame.o();
        let mut acc = Vec3::zeros();
        for n in rhs_quad.momentum.nodes() {
            let val = g(t - s, y, &n.xi);
            if val == 0.0 {
                continue;
            }
            let eta_perp = Vec3::new(n.xi.y, -n.xi.x, 0.0);
            let dtheta_p = symbol_p_jacobian(w, &(o * n.xi))? * (o * eta_perp);
            acc -= dtheta_p * (n.weight * frame.b / lorentz_factor(&n.xi) * val);
        }
        Ok(acc)
    })?;
    let absolute = (lhs - rhs).norm();
    let scale = lhs.norm().max(rhs.norm());
    let relative = if scale > 0.0 { absolute / scale } else { 0.0 };
    Ok(TransferResult { lhs, rhs, relative, absolute })
}

/// (1/4π)∫₀ᵗ∫_{S²} s·inner(s, ω, x − sω) dω ds with deterministic summation order.
fn transfer_side(
    quad: &TransferQuadrature,
    t: f64,
    x: &Vec3,
    inner: impl Fn(f64, &Vec3, &Vec3) -> Result<Vec3> + Sync,
) -> Result<Vec3> {
    let times: Vec<(f64, f64)> = GaussRule::new(quad.time_nodes).on(0.0, t).collect();
    let points: Vec<(f64, f64, Vec3, f64)> =
        times.iter().flat_map(|&(s, ws)| quad.sphere.iter().map(move |(w, q)| (s, ws, *w, q))).collect();
    let parts: Vec<Result<Vec3>> =
        points.par_iter().map(|(s, ws, w, q)| Ok(inner(*s, w, &(x - w * *s))? * (ws * q * s / (4.0 * PI)))).collect();
    parts.into_iter().try_fold(Vec3::zeros(), |acc, p| Ok(acc + p?))
}
