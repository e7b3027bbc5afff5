//! Closed-form guiding-centre approximation against the integrated linear flow.
use magflow::asymptotics::{approx_error_fixed, convergence_order, FixedDirectionApprox};
use magflow::characteristics::IntegratorConfig;
use magflow::field_models::{FixedDirectionField, PhaseState};
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let m = FixedDirectionField::sine(0.1);
    let s = PhaseState::new(Vec3::new(0.3, -0.2, 0.0), Vec3::new(0.6, -0.5, 0.3));
    let grid: Vec<f64> = (0..=40).map(|k| 0.5 * k as f64 / 40.0).collect();

    let approx = FixedDirectionApprox::new(&m, 0.01)?;
    let x = approx.x_approx(0.5, &s.x, &s.xi);
    println!(
        "eps = 0.01: x_approx(0.5) = ({:.6}, {:.6}, {:.6}), phase {:.6}",
        x.x,
        x.y,
        x.z,
        approx.phi(0.5, &s.x, &s.xi)
    );

    let mut px = Vec::new();
    let mut pxi = Vec::new();
    for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        let e = approx_error_fixed(&m, s, eps, &grid, IntegratorConfig::new(eps))?;
        println!("eps {eps:.0e}: sup|X - X_approx| {:.3e}  sup|Xi - Xi_approx| {:.3e}", e.x, e.xi);
        px.push((eps, e.x));
        pxi.push((eps, e.xi));
    }
    let (fx, fxi) = (convergence_order(&px)?, convergence_order(&pxi)?);
    println!(
        "orders: position {:.3} +- {:.3}, momentum {:.3} +- {:.3}",
        fx.slope, fx.half_width_95, fxi.slope, fxi.half_width_95
    );
    Ok(())
}
