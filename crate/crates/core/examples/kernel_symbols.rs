//! Sup over the unit sphere of the wave-kernel symbols against their bounds.
use magflow::quadrature::SphericalQuadrature;
use magflow::wave_kernel::{sup_on_sphere, KernelSymbol};
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let quad = SphericalQuadrature::new(16, 32);
    let dir = Vec3::new(0.3, -0.5, 0.8).normalize();
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "R", "sup|p|", "sharp", "bound", "sup|q|", "sharp", "bound"
    );
    for r in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let xi = dir * r;
        let mut line = format!("{r:>5}");
        for sym in [KernelSymbol::P, KernelSymbol::Q] {
            let sup = sup_on_sphere(sym, &xi, &quad)?;
            line += &format!(" {sup:>10.6} {:>10.6} {:>10.4}", sym.sharp_sup(&xi), sym.bound(r));
        }
        println!("{line}");
    }
    Ok(())
}
