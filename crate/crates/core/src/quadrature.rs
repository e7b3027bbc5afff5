//! Quadrature rules shared by the kernels: Gauss–Legendre lines, composite panels for
//! oscillatory time integrals, product rules on the unit sphere and a cylindrical
//! momentum grid.
//!
//! Every rule stores its nodes in a fixed order and sums sequentially, so results are
//! bit-reproducible across runs and thread counts.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result, Vec3};

/// Gauss–Legendre rule on the reference interval [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("order >= 1");
        let rule = GaussLegendre::new(order);
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.on(a, b).map(|(s, w)| w * f(s)).sum()
    }
}

/// Composite Gauss–Legendre: `panels` equal sub-intervals, each with a rule of `order` nodes.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    rule: GaussRule,
    panels: usize,
}

impl CompositeRule {
    pub fn new(panels: usize, order: usize) -> Self {
        Self { rule: GaussRule::new(order), panels: panels.max(1) }
    }

    /// Enough panels on [a, b] to place at least `nodes_per_period` nodes in every
    /// oscillation of length `period`.
    pub fn resolving(a: f64, b: f64, period: f64, nodes_per_period: usize, order: usize) -> Self {
        let per_period_panels = nodes_per_period.div_ceil(order).max(1) as f64;
        let panels = ((b - a).abs() / period * per_period_panels).ceil().max(1.0) as usize;
        Self::new(panels, order)
    }

    pub fn len(&self) -> usize {
        self.panels * self.rule.order()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let width = (b - a) / self.panels as f64;
        (0..self.panels)
            .flat_map(|k| {
                let lo = a + width * k as f64;
                let hi = if k + 1 == self.panels { b } else { lo + width };
                self.rule.on(lo, hi).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Product rule on S²: Gauss–Legendre in cos(polar angle) times uniform azimuth.
/// Exact for spherical polynomials of degree < min(2 n_polar, n_azimuth).
#[derive(Clone, Debug)]
pub struct SphericalQuadrature {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    n_polar: usize,
    n_azimuth: usize,
}

impl SphericalQuadrature {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Self {
        let n_azimuth = n_azimuth.max(1);
        let rule = GaussRule::new(n_polar);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut nodes = Vec::with_capacity(rule.order() * n_azimuth);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (mu, w) in rule.on(-1.0, 1.0) {
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            for j in 0..n_azimuth {
                let phi = dphi * (j as f64 + 0.5);
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), mu));
                weights.push(w * dphi);
            }
        }
        Self { nodes, weights, n_polar: rule.order(), n_azimuth }
    }

    /// Doubles both node counts; used as the refinement oracle.
    pub fn refined(&self) -> Self {
        Self::new(2 * self.n_polar, 2 * self.n_azimuth)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_polar, self.n_azimuth)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec3, f64)> + '_ {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, mut f: impl FnMut(&Vec3) -> f64) -> f64 {
        self.iter().map(|(w, wt)| wt * f(w)).sum()
    }

    /// Mean value (1/4π)∫ f dω of a vector-valued function.
    pub fn mean_vec(&self, mut f: impl FnMut(&Vec3) -> Vec3) -> Vec3 {
        let mut acc = Vec3::zeros();
        for (w, wt) in self.iter() {
            acc += wt * f(w);
        }
        acc / (4.0 * PI)
    }
}

impl Default for SphericalQuadrature {
    fn default() -> Self {
        Self::new(32, 64)
    }
}

/// Cylindrical momentum grid on {r ≤ R, |z| ≤ R}: Gauss nodes in r and z, uniform angle.
/// The weight of each node already contains the Jacobian r.
#[derive(Clone, Debug)]
pub struct MomentumGrid {
    radius: f64,
    shape: (usize, usize, usize),
    nodes: Vec<MomentumNode>,
}

#[derive(Clone, Copy, Debug)]
pub struct MomentumNode {
    pub xi: Vec3,
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub weight: f64,
}

impl MomentumGrid {
    pub fn new(radius: f64, n_r: usize, n_theta: usize, n_z: usize) -> Self {
        let r_rule = GaussRule::new(n_r);
        let z_rule = GaussRule::new(n_z);
        let n_theta = n_theta.max(1);
        let dtheta = 2.0 * PI / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_r * n_theta * n_z);
        for (r, wr) in r_rule.on(0.0, radius) {
            for k in 0..n_theta {
                let theta = dtheta * k as f64;
                let (s, c) = theta.sin_cos();
                for (z, wz) in z_rule.on(-radius, radius) {
                    nodes.push(MomentumNode {
                        xi: Vec3::new(r * c, r * s, z),
                        r,
                        theta,
                        z,
                        weight: wr * wz * dtheta * r,
                    });
                }
            }
        }
        Self { radius, shape: (r_rule.order(), n_theta, z_rule.order()), nodes }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn nodes(&self) -> &[MomentumNode] {
        &self.nodes
    }

    pub fn integrate(&self, mut f: impl FnMut(&MomentumNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n)).sum()
    }

    pub fn integrate_vec(&self, mut f: impl FnMut(&MomentumNode) -> Vec3) -> Vec3 {
        let mut acc = Vec3::zeros();
        for n in &self.nodes {
            acc += n.weight * f(n);
        }
        acc
    }

    /// Fails if `f` is visibly nonzero on cylinders just outside the grid.
    pub fn check_support(&self, mut f: impl FnMut(&Vec3) -> f64) -> Result<()> {
        let n_theta = 16;
        for scale in [1.02, 1.25, 1.5, 2.0] {
            let rho = scale * self.radius;
            for k in 0..n_theta {
                let (s, c) = (2.0 * PI * (k as f64 + 0.25) / n_theta as f64).sin_cos();
                for j in 0..=8 {
                    let u = j as f64 / 8.0;
                    let side = Vec3::new(rho * c, rho * s, rho * (2.0 * u - 1.0));
                    let top = Vec3::new(u * rho * c, u * rho * s, rho);
                    let bottom = Vec3::new(u * rho * c, u * rho * s, -rho);
                    if [side, top, bottom].iter().any(|p| f(p) != 0.0) {
                        return Err(Error::SupportExceedsQuadrature { radius: self.radius, probe: rho });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = GaussRule::new(5);
        let val = rule.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((val - 2f64.powi(10) / 10.0).abs() < 1e-11);
    }

    #[test]
    fn sphere_weights_sum_to_area() {
        let q = SphericalQuadrature::default();
        let total: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        // ∫ ω_3² dω = 4π/3
        assert!((q.integrate(|w| w.z * w.z) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_grid_integrates_ball_volume_of_polynomial() {
        // ∫_{cylinder} z² r dr dθ dz = 2π · (R²/2) · (2R³/3)
        let g = MomentumGrid::new(1.5, 6, 8, 6);
        let exact = 2.0 * PI * (1.5f64.powi(2) / 2.0) * (2.0 * 1.5f64.powi(3) / 3.0);
        assert!((g.integrate(|n| n.z * n.z) - exact).abs() < 1e-11);
    }

    #[test]
    fn composite_rule_resolves_oscillation() {
        let rule = CompositeRule::resolving(0.0, 3.0, 0.1, 64, 8);
        let k = 2.0 * PI / 0.1;
        let val: f64 = rule.nodes(0.0, 3.0).iter().map(|(s, w)| w * (k * s).cos()).sum();
        let exact = (k * 3.0).sin() / k;
        assert!((val - exact).abs() < 1e-13);
    }
}
