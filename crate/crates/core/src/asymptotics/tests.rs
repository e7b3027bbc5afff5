use std::f64::consts::PI;

use nalgebra::SVector;
use num_complex::Complex64;

use super::*;
use crate::field_models::{ConstantField, FixedDirectionField, HarmonicField};
use crate::straightening::rotation_at;

/// Φ evaluated term by term as printed, including the t² terms.
fn phi_as_printed(b: f64, g: Vec3, t: f64, eps: f64, xi: Vec3) -> f64 {
    let gam = (1.0 + xi.norm_squared()).sqrt();
    let bar = Vec3::new(xi.x, xi.y, 0.0);
    let per = Vec3::new(xi.y, -xi.x, 0.0);
    let inner = per * (t / b) - bar * (t * t * g.dot(&per) / (4.0 * gam * b * b))
        + per * (t * t * g.dot(&bar) / (4.0 * gam * b * b));
    b * t - eps * g.dot(&inner)
}

#[test]
fn phase_matches_term_by_term_evaluation() {
    let m = FixedDirectionField::sine(0.1);
    for (x, xi) in [(Vec3::zeros(), Vec3::x()), (Vec3::new(0.4, -0.3, 0.2), Vec3::new(0.3, -0.6, 0.2))] {
        let b = 1.0 + 0.1 * x.x.sin();
        let g = Vec3::new(0.1 * x.x.cos(), 0.0, 0.0);
        let got = phase_phi(&m, 0.05, 0.5, &x, &xi).unwrap();
        assert!((got - phi_as_printed(b, g, 0.5, 0.05, xi)).abs() < 1e-15);
    }
    // constant field: Φ = b t
    let c = ConstantField::along_e3(1.7);
    assert_eq!(phase_phi(&c, 0.1, 0.3, &Vec3::zeros(), &Vec3::x()).unwrap(), 1.7 * 0.3);
}

#[test]
fn approximation_identities() {
    let m = FixedDirectionField::sine(0.1);
    let a = FixedDirectionApprox::new(&m, 0.01).unwrap();
    let (x, xi) = (Vec3::new(0.3, 0.1, 0.0), Vec3::new(0.5, -0.4, 0.3));
    assert_eq!(a.phi(0.0, &x, &xi), 0.0);
    assert!(a.r_eps(0.0, &x, &xi).norm() < 1e-16);
    assert!((a.x_approx(0.0, &x, &xi) - x).norm() < 1e-16);
    assert!((a.xi_approx(0.0, &x, &xi) - xi).norm() < 1e-16);
    for t in [0.1, 0.37, 0.5] {
        assert!((a.xi_approx(t, &x, &xi).norm() - xi.norm()).abs() < 1e-14);
    }
    assert!(FixedDirectionApprox::new(&HarmonicField::new(0.1, 0.1), 0.1).is_err());
}

#[test]
fn homogeneous_and_parallel_cases_are_exact() {
    let grid: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let c = ConstantField::along_e3(1.0);
    let s = PhaseState::new(Vec3::zeros(), Vec3::new(0.6, 0.2, -0.3));
    let e = approx_error_fixed(&c, s, 0.01, &grid, IntegratorConfig::new(0.01)).unwrap();
    assert!(e.x < 1e-11 && e.xi < 1e-11, "{e:?}");
    let m = FixedDirectionField::sine(0.1);
    let s = PhaseState::new(Vec3::new(0.2, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0));
    let e = approx_error_fixed(&m, s, 0.01, &grid, IntegratorConfig::new(0.01)).unwrap();
    assert!(e.x < 1e-12 && e.xi < 1e-12, "{e:?}");
}

#[test]
fn fixed_direction_orders_on_coarse_sweep() {
    let m = FixedDirectionField::sine(0.1);
    let s = PhaseState::new(Vec3::new(0.3, -0.2, 0.0), Vec3::new(0.6, -0.5, 0.3));
    let grid: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let pts: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&eps| (eps, approx_error_fixed(&m, s, eps, &grid, IntegratorConfig::new(eps)).unwrap()))
        .collect();
    let sx = convergence_order(&pts.iter().map(|(e, r)| (*e, r.x)).collect::<Vec<_>>()).unwrap();
    let sxi = convergence_order(&pts.iter().map(|(e, r)| (*e, r.xi)).collect::<Vec<_>>()).unwrap();
    assert!((sx.slope - 2.0).abs() < 0.3, "X slope {sx:?}");
    assert!((sxi.slope - 1.0).abs() < 0.3, "Xi slope {sxi:?}");
}

#[test]
fn slope_fit_recovers_exact_powers() {
    let quad: Vec<_> = [0.1, 0.03, 0.01, 0.003].iter().map(|e: &f64| (*e, 3.0 * e * e)).collect();
    let fit = convergence_order(&quad).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12 && fit.half_width_95 < 1e-10);
    let lin: Vec<_> = [0.1, 0.03, 0.01].iter().map(|e: &f64| (*e, 0.5 * e)).collect();
    assert!((convergence_order(&lin).unwrap().slope - 1.0).abs() < 1e-12);
    assert!(convergence_order(&lin[..2]).is_err());
    assert!(convergence_order(&[(0.1, 1.0), (0.01, 0.0), (0.001, 1.0)]).is_err());
}

#[test]
fn fourier_split_reconstructs_rhs() {
    let m = HarmonicField::new(0.2, 0.15);
    let approx = GeneralDirectionApprox::new(&m, 0.1).unwrap();
    let u = SVector::<f64, 5>::new(0.3, -0.2, 0.1, 0.7, -0.4);
    let split = approx.fourier_split(&u).unwrap();
    for k in 0..32 {
        let th = 2.0 * PI * (k as f64 + 0.37) / 32.0;
        let err = (split.evaluate(th) - approx.rhs(&u, th).unwrap()).norm();
        assert!(err < 1e-10, "reconstruction error {err} at {th}");
    }
    // X-equation first harmonic is (R/γ)·O(e₁ − i e₂)/2.
    let o = rotation_at(&m, &Vec3::new(0.3, -0.2, 0.1)).unwrap().o();
    let gamma = (1.0f64 + 0.49 + 0.16).sqrt();
    let c1 = split.mode(1);
    for i in 0..3 {
        let expected = Complex64::new(o[(i, 0)], -o[(i, 1)]) * (0.7 / (2.0 * gamma));
        assert!((c1[i] - expected).norm() < 1e-14);
        assert!((split.mode(-1)[i] - expected.conj()).norm() < 1e-14);
    }
}

#[test]
fn fixed_direction_split_has_only_vertical_mean() {
    let m = FixedDirectionField::sine(0.1);
    let split = fourier_split_rhs(&m, &Vec3::new(0.2, 0.1, 0.0), 0.5, 0.3).unwrap();
    let gamma = (1.0f64 + 0.25 + 0.09).sqrt();
    let mean = split.mean();
    let expected = SVector::<f64, 6>::new(0.0, 0.0, 0.3 / gamma, 0.0, 0.0, 0.0);
    assert!((mean - expected).norm() < 1e-15);
}

#[test]
fn averaging_reduces_to_fixed_direction_phase() {
    let m = FixedDirectionField::sine(0.1);
    let eps = 0.01;
    let s = PhaseState::new(Vec3::new(0.3, -0.2, 0.0), Vec3::new(0.6, -0.5, 0.3));
    let grid = [0.1, 0.25, 0.5];
    let avg = averaged_flow_general(&m, &s, eps, &grid).unwrap();
    let fixed = FixedDirectionApprox::new(&m, eps).unwrap();
    let p = PolarState::from_phase(&s);
    let gamma = s.gamma();
    for (k, t) in grid.iter().enumerate() {
        let u1 = avg.u1[k];
        let expected = SVector::<f64, 5>::new(s.x.x, s.x.y, s.x.z + t * s.xi.z / gamma, p.r, p.z);
        assert!((u1 - expected).norm() < 1e-12);
        let phase = p.theta + fixed.phi(*t, &s.x, &s.xi) / (eps * gamma);
        assert!(wrap_angle(avg.theta1[k] - phase).abs() < 3.0 * eps, "t = {t}");
    }
}

#[test]
fn general_direction_orders_on_coarse_sweep() {
    let m = HarmonicField::new(0.1, 0.1);
    let s = PhaseState::new(Vec3::new(0.1, 0.05, -0.1), Vec3::new(0.5, -0.3, 0.4));
    let grid: Vec<f64> = (1..=5).map(|k| 0.1 * k as f64).collect();
    let pts: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&eps| (eps, approx_error_general(&m, &s, eps, &grid, IntegratorConfig::new(eps)).unwrap()))
        .collect();
    let su = convergence_order(&pts.iter().map(|(e, r)| (*e, r.0)).collect::<Vec<_>>()).unwrap();
    let sth = convergence_order(&pts.iter().map(|(e, r)| (*e, r.1)).collect::<Vec<_>>()).unwrap();
    assert!((su.slope - 2.0).abs() < 0.4, "U slope {su:?} {pts:?}");
    assert!((sth.slope - 1.0).abs() < 0.4, "Theta slope {sth:?} {pts:?}");
}

#[test]
fn diffeo_margin_starts_at_zero_and_grows() {
    let m = FixedDirectionField::sine(0.1);
    let samples = [PhaseState::new(Vec3::new(0.3, 0.0, 0.0), Vec3::new(0.6, -0.5, 0.3))];
    let cfg = IntegratorConfig::new(0.05);
    assert!(diffeo_margin(&m, 0.05, 0.0, &samples, cfg).unwrap() < 1e-14);
    let a = diffeo_margin(&m, 0.05, 0.2, &samples, cfg).unwrap();
    let b = diffeo_margin(&m, 0.05, 0.4, &samples, cfg).unwrap();
    assert!(a > 0.0 && b > a && b < 1.0, "{a} {b}");
}
