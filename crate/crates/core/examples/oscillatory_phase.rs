//! Oscillatory time integrals along the flow: the constant-field equality case, the epsilon
//! gain in a varying field, and the averaged initial-data term.
use std::f64::consts::PI;

use magflow::asymptotics::convergence_order;
use magflow::field_models::{lorentz_factor, ConstantField, FixedDirectionField, PhaseState};
use magflow::phase_averaging::{
    averaged_initial_term, oscillatory_integral, InitialTermQuadrature, OscillatoryIntegralSpec, PhaseSource,
};
use magflow::quadrature::{MomentumGrid, SphericalQuadrature};
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let one = |_: f64, _: &Vec3, _: f64, _: f64| 1.0;
    let xi = Vec3::new(0.6, 0.0, 0.8);
    let gamma = lorentz_factor(&xi);
    let eps = 0.01;
    let t = 41.0 * PI * eps * gamma;
    let spec = OscillatoryIntegralSpec::new(&one, 1, eps, Vec3::x(), t, PhaseState::new(Vec3::zeros(), xi));
    let v = oscillatory_integral(&spec.with_source(PhaseSource::TrueFlow), &ConstantField::along_e3(1.0))?;
    println!("constant field at resonance: |I| = {:.15}, 2 eps <xi> = {:.15}", v.norm(), 2.0 * eps * gamma);

    let m = FixedDirectionField::sine(0.1);
    let amp = |s: f64, x: &Vec3, r: f64, _: f64| (1.0 - s / 0.5) * (1.0 + 0.5 * x.x.sin()) * (1.0 + r);
    let state = PhaseState::new(Vec3::new(0.2, -0.1, 0.0), Vec3::new(0.5, 0.3, -0.2));
    let mut pts = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let spec = OscillatoryIntegralSpec::new(&amp, 1, eps, Vec3::new(1.0, 2.0, 2.0) / 3.0, 0.5, state);
        let v = oscillatory_integral(&spec, &m)?.norm();
        println!("varying field, eps {eps:.0e}: |I| = {v:.4e}");
        pts.push((eps, v));
    }
    println!("gain order {:.3}", convergence_order(&pts)?.slope);

    let data = |x: &Vec3, p: &Vec3| {
        let r = p.x.hypot(p.y);
        let s = 1.0 - (r / 0.8).powi(2);
        let sz = 1.0 - (p.z / 0.8).powi(2);
        if s <= 0.0 || sz <= 0.0 {
            return 0.0;
        }
        (-(x - Vec3::new(0.5, 0.0, 0.0)).norm_squared()).exp() * s.powi(4) * sz.powi(4) * (p.x * p.x - p.y * p.y)
    };
    let q = InitialTermQuadrature::new(SphericalQuadrature::new(4, 8), MomentumGrid::new(0.8, 4, 8, 4), 2);
    for eps in [0.04, 0.02, 0.01] {
        let v = averaged_initial_term(&m, data, 0.5, &Vec3::new(0.3, -0.2, 0.0), eps, &q)?;
        println!("averaged initial term, eps {eps}: {:.4e}", v.norm());
    }
    Ok(())
}
