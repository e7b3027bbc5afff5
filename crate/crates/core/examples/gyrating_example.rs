//! The exact gyrating solution in a unit field, and the Lipschitz growth of transported data
//! that is or is not gyrotropic.
use magflow::field_models::{ConstantField, FixedDirectionField, PhaseState};
use magflow::quadrature::MomentumGrid;
use magflow::vlasov_transport::{example_closed_form, example_moments, lipschitz_growth_probe, preparedness_norm};
use magflow::Vec3;

fn chi(r: f64, z: f64) -> f64 {
    let (a, b) = (1.0 - (r / 0.9).powi(2), 1.0 - (z / 0.9).powi(2));
    if a > 0.0 && b > 0.0 {
        a.powi(4) * b.powi(4) * (1.0 + r)
    } else {
        0.0
    }
}

fn gyrating(_: &Vec3, xi: &Vec3) -> f64 {
    let r = xi.x.hypot(xi.y);
    if r == 0.0 {
        chi(0.0, xi.z)
    } else {
        chi(r, xi.z) * (xi.x * xi.x - xi.y * xi.y) / (r * r)
    }
}

fn gyrotropic(x: &Vec3, xi: &Vec3) -> f64 {
    (-x.norm_squared()).exp() * chi(xi.x.hypot(xi.y), xi.z)
}

fn main() -> magflow::Result<()> {
    for eps in [0.1, 0.01, 0.001] {
        let e = example_closed_form(chi, eps, 0.37, &Vec3::zeros(), &Vec3::new(0.3, 0.2, 0.1))?;
        println!("eps {eps}: f = {:+.6}, df/dt = {:+.4e}, residual {:.1e}", e.f, e.dt_f, e.residual);
    }
    let (rho, j) = example_moments(chi, 0.01, 0.7, &MomentumGrid::new(0.9, 8, 16, 8));
    println!("charge {rho:.1e}, current {:.1e}", j.norm());

    let grid = MomentumGrid::new(0.9, 8, 32, 8);
    let unit = ConstantField::along_e3(1.0);
    println!(
        "gyro-angle derivative: gyrating {:.4}, gyrotropic {:.1e}",
        preparedness_norm(&unit, gyrating, &[Vec3::zeros()], &grid)?,
        preparedness_norm(&unit, gyrotropic, &[Vec3::zeros()], &grid)?
    );

    let m = FixedDirectionField::sine(0.1);
    let probes: Vec<PhaseState> = (0..12)
        .map(|k| {
            let a = 2.4 * k as f64;
            PhaseState::new(Vec3::new(0.3 * a.cos(), 0.2 * a.sin(), 0.0), Vec3::new(0.5 * a.cos(), 0.5 * a.sin(), 0.2))
        })
        .collect();
    let eps = [0.1, 0.01, 0.001];
    let ill = lipschitz_growth_probe(&m, |x, xi| gyrotropic(x, xi) + gyrating(x, xi), &eps, 0.5, &probes, 32)?;
    let prepared = lipschitz_growth_probe(&m, gyrotropic, &eps, 0.5, &probes, 32)?;
    for (a, b) in ill.iter().zip(&prepared) {
        println!("eps {:.0e}: sup|df/dt| ill-prepared {:.3e}, prepared {:.3e}", a.epsilon, a.sup_dt, b.sup_dt);
    }
    Ok(())
}
