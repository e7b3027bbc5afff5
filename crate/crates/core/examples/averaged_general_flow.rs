//! Field straightening and second-order gyro-averaging in a field of varying direction.
use magflow::asymptotics::{approx_error_general, averaged_flow_general, convergence_order, fourier_split_rhs};
use magflow::characteristics::IntegratorConfig;
use magflow::field_models::{HarmonicField, MagneticField, PhaseState};
use magflow::straightening::rotation_at;
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let m = HarmonicField::new(0.1, 0.1);
    let x = Vec3::new(0.1, 0.05, -0.1);
    let frame = rotation_at(&m, &x)?;
    println!("O^t B_e(x) = {:?} (b_e = {:.6})", (frame.o_t * m.field(&x)).as_slice(), frame.b);

    let split = fourier_split_rhs(&m, &x, 0.5, 0.4)?;
    println!("gyro-averaged rhs at r = 0.5, z = 0.4: {:?}", split.mean().as_slice());

    let s = PhaseState::new(x, Vec3::new(0.5, -0.3, 0.4));
    let grid: Vec<f64> = (1..=40).map(|k| 0.5 * k as f64 / 40.0).collect();
    let avg = averaged_flow_general(&m, &s, 0.01, &grid)?;
    println!(
        "eps = 0.01: U2(0.5) = {:?}, Theta1(0.5) = {:.4}",
        avg.u2.last().unwrap().as_slice(),
        avg.theta1.last().unwrap()
    );

    let mut pu = Vec::new();
    let mut pth = Vec::new();
    for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
        let (eu, eth) = approx_error_general(&m, &s, eps, &grid, IntegratorConfig::new(eps))?;
        println!("eps {eps:.0e}: |U - U2| {eu:.3e}  |Theta - Theta1| {eth:.3e}");
        pu.push((eps, eu));
        pth.push((eps, eth));
    }
    println!("orders: {:.3} and {:.3}", convergence_order(&pu)?.slope, convergence_order(&pth)?.slope);
    Ok(())
}
