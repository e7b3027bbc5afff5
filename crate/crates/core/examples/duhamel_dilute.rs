//! Linear Vlasov density with an equilibrium source, and the dilute-equilibrium bound on the
//! source contribution.
use magflow::characteristics::IntegratorConfig;
use magflow::field_models::{EquilibriumProfile, FixedDirectionField, PhaseState};
use magflow::quadrature::{MomentumGrid, SphericalQuadrature};
use magflow::vlasov_transport::{dilute_source_bound, duhamel_linear_density};
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let m = FixedDirectionField::sine(0.1);
    let profile = EquilibriumProfile::Polynomial { amplitude: 1.0, radius: 1.0 };
    let e_field = |t: f64, x: &Vec3| Vec3::new(0.2 * (1.0 + t), -0.1 * x.x, 0.3);
    let states: Vec<PhaseState> = (0..4)
        .map(|k| PhaseState::new(Vec3::new(0.1 * k as f64, 0.0, 0.0), Vec3::new(0.5, -0.2, 0.1 * k as f64)))
        .collect();
    let f_in = |x: &Vec3, xi: &Vec3| (-(x.norm_squared() + xi.norm_squared())).exp();
    for eps in [0.1, 0.01] {
        let f = duhamel_linear_density(&m, f_in, profile, e_field, 0.5, &states, IntegratorConfig::new(eps))?;
        println!("eps {eps}: f(0.5) = {f:.6?}");
    }
    let history: Vec<(f64, f64)> =
        (0..=10).map(|k| (0.05 * k as f64, e_field(0.05 * k as f64, &Vec3::x()).norm())).collect();
    let b = dilute_source_bound(
        &m,
        profile,
        &history,
        0.5,
        1.0,
        &MomentumGrid::new(1.0, 16, 8, 16),
        &SphericalQuadrature::new(8, 16),
    )?;
    println!(
        "dilute source bound at t = 0.5: {:.4e} (constant {:.4e}, field integral {:.4e})",
        b.bound, b.constant, b.field_integral
    );
    Ok(())
}
