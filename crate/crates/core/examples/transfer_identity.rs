//! Both sides of the straightened derivative-transfer identity, computed with different
//! node sets and different differentiation routes.
use magflow::field_models::{FixedDirectionField, HarmonicField, MagneticField};
use magflow::quadrature::{MomentumGrid, SphericalQuadrature};
use magflow::wave_kernel::{transfer_identity_residual, TransferQuadrature};
use magflow::Vec3;

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - u * u).powi(4)
    } else {
        0.0
    }
}

fn quad(scale: usize) -> TransferQuadrature {
    TransferQuadrature {
        sphere: SphericalQuadrature::new(6 * scale, 12 * scale),
        momentum: MomentumGrid::new(0.9, 6 * scale, 8, 6 * scale),
        time_nodes: 3 * scale,
    }
}

fn main() -> magflow::Result<()> {
    let g = |s: f64, y: &Vec3, eta: &Vec3| {
        let r = eta.x.hypot(eta.y);
        let ang = if r > 0.0 { eta.x / r } else { 1.0 };
        (1.0 + 0.5 * s) * (-y.norm_squared()).exp() * bump(r / 0.9) * bump(eta.z / 0.9) * ang * (1.0 + r)
    };
    let fixed = FixedDirectionField::sine(0.2);
    let harmonic = HarmonicField::new(0.1, 0.1);
    for m in [&fixed as &dyn MagneticField, &harmonic] {
        let r = transfer_identity_residual(m, g, 0.6, &Vec3::new(0.1, 0.0, 0.0), &quad(2), &quad(3))?;
        println!(
            "{}: lhs {:?}\n    rhs {:?}\n    relative difference {:.2e}",
            m.describe(),
            r.lhs.as_slice(),
            r.rhs.as_slice(),
            r.relative
        );
    }
    Ok(())
}
