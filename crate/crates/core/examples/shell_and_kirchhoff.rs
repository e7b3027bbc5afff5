//! Shell convolution against a symbol weight, its bound, and the Kirchhoff terms of smooth
//! initial data.
use magflow::quadrature::{MomentumGrid, SphericalQuadrature};
use magflow::wave_kernel::{kirchhoff_terms, shell_bound, shell_convolution, shell_convolution_vec, KernelSymbol};
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let quad = SphericalQuadrature::new(16, 32);
    let x = Vec3::new(0.1, 0.2, -0.3);
    let t = 1.2;
    let ones = shell_convolution(|_| 1.0, 0, |_, _| 1.0, t, &x, &quad, 16)?;
    println!("g = f = 1: {ones:.15} (t^2/2 = {:.15})", t * t / 2.0);

    let xi = Vec3::new(0.4, -0.2, 0.3);
    let f = |s: f64, y: &Vec3| (1.0 + s) * (-(y - Vec3::new(0.2, 0.0, 0.1)).norm_squared()).exp();
    let u = shell_convolution_vec(|w| KernelSymbol::P.evaluate(1.0, w, &xi).unwrap(), 0, f, t, &x, &quad, 16)?;
    let bound = shell_bound(t, 0, KernelSymbol::P.sharp_sup(&xi), t + t * t / 2.0);
    println!("p-weighted Gaussian source: |u| = {:.6}, bound {bound:.6}", u.norm());

    let e_in = |y: &Vec3| Vec3::new(0.0, (-y.norm_squared()).exp(), 0.0);
    let b_in = |y: &Vec3| Vec3::new(0.0, 0.0, 0.5 * (-y.norm_squared()).exp());
    let f_in = |y: &Vec3, p: &Vec3| {
        let s = 1.0 - p.norm_squared();
        if s > 0.0 {
            s.powi(3) * (-y.norm_squared()).exp()
        } else {
            0.0
        }
    };
    let (k1, k2) = kirchhoff_terms(e_in, b_in, f_in, 0.5, &x, &quad, &MomentumGrid::new(1.0, 8, 16, 8), 1e-3)?;
    println!("Kirchhoff terms at t = 0.5: K1 = {:?}, K2 = {:?}", k1.as_slice(), k2.as_slice());
    Ok(())
}
